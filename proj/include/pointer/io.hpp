#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace pointer {

/// Comma-separated table with a fixed header. Doubles are written with 17 significant digits so
/// that a table read back reproduces the values exactly.
class CsvWriter
{
public:
  CsvWriter(std::filesystem::path const &path, std::vector<std::string> header);

  CsvWriter &operator<<(double v);
  CsvWriter &operator<<(long long v);
  CsvWriter &operator<<(unsigned long long v);
  CsvWriter &operator<<(int v) { return *this << static_cast<long long>(v); }
  CsvWriter &operator<<(unsigned v) { return *this << static_cast<unsigned long long>(v); }
  CsvWriter &operator<<(long v) { return *this << static_cast<long long>(v); }
  CsvWriter &operator<<(unsigned long v) { return *this << static_cast<unsigned long long>(v); }
  CsvWriter &operator<<(bool v) { return *this << static_cast<long long>(v); }
  CsvWriter &operator<<(std::string const &v);

  /// Ends the current row; throws if the row does not have one cell per column.
  void end_row();
  void close();

private:
  void separator();

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t cell_ = 0;
};

std::string format_double(double v);

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string const &name) const;
};

CsvTable read_csv(std::filesystem::path const &path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(std::filesystem::path const &path);

} // namespace pointer
