#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace failpass::zip {

struct Entry {
  std::string name;  // '/'-separated; directories end with '/'
  std::string data;  // empty for directories
  bool is_directory() const { return !name.empty() && name.back() == '/'; }
};

// Decodes every entry of an in-memory zip archive. Supports the stored and
// deflate methods; verifies CRC-32 and sizes. Throws Error(corrupt_archive)
// on malformed input, unsupported methods, or unsafe entry names (absolute
// paths, "..", backslashes).
std::vector<Entry> read_archive(const std::string& bytes);

// Encodes entries with deflate (or stored when `compress` is false).
std::string write_archive(const std::vector<Entry>& entries, bool compress = true);

// Extracts all entries under `dest`, returning the archive's single common
// top-level directory (code-host snapshots are laid out as <repo>-<sha>/...).
// Throws Error(corrupt_archive) if entries do not share one top-level dir.
std::filesystem::path extract_snapshot(const std::string& bytes,
                                       const std::filesystem::path& dest);

}  // namespace failpass::zip
