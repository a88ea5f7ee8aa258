#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace pointer::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_internal = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_rejected = 3;

inline constexpr int schema_version = 1;

/// Environment variable naming the default output root (outputs go to <root>/<command>).
inline constexpr char const *out_root_env = "POINTER_OUT_ROOT";

struct Options
{
  std::filesystem::path config; // empty: all defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<unsigned> workers;
};

/// Runs one of soliton | weights | ensemble | widthsweep | gasmodel and returns the exit code.
/// Progress and errors go to `log`.
int run(std::string const &command, Options const &opt, std::ostream &log);

} // namespace pointer::cli
