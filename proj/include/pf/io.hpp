#pragma once

#include "pf/pinn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pf {

// ---------------------------------------------------------------------------
// Weight dumps
//
// Layout (all integers little-endian):
//   8 bytes   magic "PFWDUMP\0"
//   u32       format version
//   u64       header length H
//   H bytes   JSON header: config, layer shapes, activations, history
//   payload   per layer: weights row-major, then bias; IEEE-754 f64 LE
//   u64       FNV-1a of every preceding byte (version 2 and later)
//
// Version 1 files carry neither the checksum nor the history; they load with
// an empty history.

inline constexpr std::uint32_t kDumpFormatVersion = 2;

struct WeightDump {
  PinnConfig config;
  NetworkParams params;
  TrainingHistory history;  // wall times are not stored
  int steps_completed = 0;
};

std::string encode_dump(const WeightDump& dump, std::uint32_t version = kDumpFormatVersion);
WeightDump decode_dump(std::string_view bytes);

void save_dump(const std::filesystem::path& path, const WeightDump& dump);
WeightDump load_dump(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Configuration files: one `key = value` per line, '#' starts a comment.
// Keys mirror PinnConfig fields; the domain bounds are x_lo, x_hi, t_lo,
// t_hi. Unknown keys and malformed values raise Configuration errors that
// name the key.

PinnConfig parse_config(std::string_view text, PinnConfig base = {});
void set_config_key(PinnConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

/// Canonical text form; parse_config(format_config(c)) reproduces c exactly.
std::string format_config(const PinnConfig& config);
std::uint64_t config_hash(const PinnConfig& config);

// ---------------------------------------------------------------------------
// Files and number formatting

/// Shortest decimal that reads back to the same double; never depends on
/// the locale.
std::string format_double(double v);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Builds CSV text with a fixed header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(const std::vector<double>& values);
  CsvTable& row(const std::vector<std::string>& cells);
  const std::string& text() const { return text_; }

 private:
  std::size_t columns_;
  std::string text_;
};

}  // namespace pf
