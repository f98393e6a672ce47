#pragma once

// Line-based change metrics between two source trees.
//
// Conventions:
//   - a modified line counts twice (one deletion, one addition);
//   - lines include their terminator, so dropping a final newline modifies
//     the last line;
//   - a binary file (NUL byte in its first 8000 bytes) that differs counts as
//     one changed file and two changes;
//   - a removed file whose exact content reappears under a new path is a
//     rename: one changed file, zero changes;
//   - `.git` directories are ignored.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace failpass {

struct DiffMetrics {
  std::int64_t num_changes = 0;
  std::int64_t num_files_changed = 0;
  std::int64_t additions = 0;
  std::int64_t deletions = 0;
  std::int64_t renames = 0;
  bool operator==(const DiffMetrics&) const = default;
};

// Shortest-edit-script length (insertions + deletions) between two line
// sequences. Equals a.size() + b.size() - 2 * LCS(a, b).
std::int64_t line_edit_distance(const std::vector<std::string_view>& a,
                                const std::vector<std::string_view>& b);

// Splits after every '\n'; a trailing fragment without '\n' is its own line.
std::vector<std::string_view> split_lines(std::string_view text);

bool looks_binary(std::string_view content);

// Additions/deletions for one file pair (either side may be empty).
DiffMetrics diff_file(std::string_view before, std::string_view after);

DiffMetrics compute_diff_metrics(const std::filesystem::path& failing_tree,
                                 const std::filesystem::path& passing_tree);

}  // namespace failpass
