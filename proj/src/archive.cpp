#include "statns/archive.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "statns/error.hpp"

namespace statns {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 15];
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xff);
}

double get_f64(std::string_view in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_snapshot(const Grid& grid, double t, const FieldState& state) {
  json h;
  h["format"] = "statns-snapshot-1";
  h["dim"] = grid.dim;
  h["cells"] = grid.cells;
  h["extents"] = grid.extents;
  h["t"] = t;
  h["n"] = state.size();
  std::string out = h.dump() + "\n";
  out.reserve(out.size() + 24 * state.size());
  for (double r : state.rho) put_f64(out, r);
  for (const auto& m : state.mom) put_f64(out, m[0]);
  for (const auto& m : state.mom) put_f64(out, m[1]);
  return out;
}

Snapshot decode_snapshot(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw std::runtime_error("snapshot: missing header");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("snapshot: bad header: ") + e.what());
  }
  if (h.value("format", "") != "statns-snapshot-1") throw std::runtime_error("snapshot: bad format");
  Snapshot s;
  s.grid = build_grid(h["dim"].get<int>(), h["extents"].get<std::array<double, 2>>(),
                      h["cells"].get<std::array<int, 2>>());
  s.t = h["t"].get<double>();
  const std::size_t n = h["n"].get<std::size_t>();
  if (n != s.grid.cell_count() || bytes.size() != nl + 1 + 24 * n) {
    throw std::runtime_error("snapshot: size mismatch");
  }
  s.state = FieldState(n);
  std::size_t pos = nl + 1;
  for (std::size_t k = 0; k < n; ++k, pos += 8) s.state.rho[k] = get_f64(bytes, pos);
  for (std::size_t k = 0; k < n; ++k, pos += 8) s.state.mom[k][0] = get_f64(bytes, pos);
  for (std::size_t k = 0; k < n; ++k, pos += 8) s.state.mom[k][1] = get_f64(bytes, pos);
  return s;
}

Snapshot read_snapshot(const fs::path& path) { return decode_snapshot(read_file(path)); }

ArchiveWriter::ArchiveWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void ArchiveWriter::add(const std::string& relative, std::string_view content) {
  const fs::path p = dir_ / relative;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + p.string());
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const Entry& e) { return e.path == relative; }),
                 entries_.end());
  entries_.push_back({relative, sha256_hex(content), content.size()});
}

void ArchiveWriter::finish(const std::string& command, const std::string& config_json,
                           int exit_code, const std::string& status_json) {
  add("config.json", config_json);
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.path < b.path; });
  json m;
  m["format"] = "statns-archive-1";
  m["command"] = command;
  m["config_sha256"] = sha256_hex(config_json);
  m["exit_code"] = exit_code;
  m["status"] = json::parse(status_json);
  m["files"] = json::array();
  for (const auto& e : entries_) {
    m["files"].push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  }
  const std::string text = m.dump(2) + "\n";
  std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write manifest in " + dir_.string());
}

ArchiveCheck check_archive(const fs::path& dir) {
  ArchiveCheck check;
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const std::exception& e) {
    check.ok = false;
    check.problems.push_back(std::string("manifest: ") + e.what());
    return check;
  }
  for (const auto& f : m["files"]) {
    const std::string path = f["path"].get<std::string>();
    std::error_code ec;
    if (!fs::exists(dir / path, ec)) {
      check.ok = false;
      check.problems.push_back(path + ": missing");
      continue;
    }
    if (sha256_file(dir / path) != f["sha256"].get<std::string>()) {
      check.ok = false;
      check.problems.push_back(path + ": hash mismatch");
    }
  }
  return check;
}

std::vector<std::pair<std::string, std::string>> archive_hashes(const fs::path& dir) {
  const json m = json::parse(read_file(dir / "manifest.json"));
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : m["files"]) {
    const std::string path = f["path"].get<std::string>();
    out.emplace_back(path, sha256_file(dir / path));
  }
  out.emplace_back("manifest.json", sha256_file(dir / "manifest.json"));
  return out;
}

}  // namespace statns
