#include "pointer/io.hpp"
#include "pointer/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <memory>
#include <sstream>

namespace pointer {

std::string format_double(double v)
{
  std::array<char, 64> buf{};
  // Shortest representation that reads back to the same double.
  auto const res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvWriter::CsvWriter(std::filesystem::path const &path, std::vector<std::string> header)
  : path_(path)
  , out_(path)
  , columns_(header.size())
{
  if (!out_) {
    throw Error("cannot open " + path.string() + " for writing");
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    out_ << (i ? "," : "") << header[i];
  }
  out_ << '\n';
}

void CsvWriter::separator()
{
  if (cell_ >= columns_) {
    throw DimensionError(path_.string() + ": too many cells in row");
  }
  if (cell_++ > 0) {
    out_ << ',';
  }
}

CsvWriter &CsvWriter::operator<<(double v)
{
  separator();
  out_ << format_double(v);
  return *this;
}

CsvWriter &CsvWriter::operator<<(long long v)
{
  separator();
  out_ << v;
  return *this;
}

CsvWriter &CsvWriter::operator<<(unsigned long long v)
{
  separator();
  out_ << v;
  return *this;
}

CsvWriter &CsvWriter::operator<<(std::string const &v)
{
  separator();
  out_ << v;
  return *this;
}

void CsvWriter::end_row()
{
  if (cell_ != columns_) {
    throw DimensionError(path_.string() + ": row has " + std::to_string(cell_) + " cells, expected " +
                         std::to_string(columns_));
  }
  out_ << '\n';
  cell_ = 0;
}

void CsvWriter::close()
{
  out_.close();
  if (!out_) {
    throw Error("failed writing " + path_.string());
  }
}

std::size_t CsvTable::column(std::string const &name) const
{
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw DimensionError("CSV has no column '" + name + "'");
}

CsvTable read_csv(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  auto split = [](std::string const &line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    return cells;
  };
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) {
    t.header = split(line);
  }
  while (std::getline(in, line)) {
    if (!line.empty()) {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

std::string sha256_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string() + " for hashing");
  }
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

} // namespace pointer
