#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "statns/grid.hpp"

namespace statns {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Snapshot file: one JSON header line (grid, time, cell count) followed by the density block and
/// the momentum block (x then y components) as little-endian float64.
std::string encode_snapshot(const Grid& grid, double t, const FieldState& state);

struct Snapshot {
  Grid grid;
  double t = 0.0;
  FieldState state;
};

Snapshot decode_snapshot(std::string_view bytes);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Writes files under one directory and records them in manifest.json with SHA-256 hashes.
class ArchiveWriter {
 public:
  /// Creates `dir` (and parents). Existing files with the same names are overwritten.
  explicit ArchiveWriter(std::filesystem::path dir);

  void add(const std::string& relative, std::string_view content);
  const std::filesystem::path& dir() const { return dir_; }

  /// Writes manifest.json: command, status fields, config hash and the sorted file list.
  void finish(const std::string& command, const std::string& config_json, int exit_code,
              const std::string& status_json = "{}");

 private:
  struct Entry {
    std::string path;
    std::string sha256;
    std::size_t bytes;
  };
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
};

struct ArchiveCheck {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Recomputes every hash listed in the manifest of `dir`.
ArchiveCheck check_archive(const std::filesystem::path& dir);

/// Hash of every file listed in the manifest, keyed by relative path, plus the manifest itself.
std::vector<std::pair<std::string, std::string>> archive_hashes(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

/// Formats a double with 17 significant digits.
std::string fmt17(double v);

}  // namespace statns
