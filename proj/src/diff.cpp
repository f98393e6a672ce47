#include "failpass/diff.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <unordered_map>

#include "failpass/error.hpp"

namespace failpass {

namespace fs = std::filesystem;

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto end = nl == std::string_view::npos ? text.size() : nl + 1;
    lines.push_back(text.substr(start, end - start));
    start = end;
  }
  return lines;
}

bool looks_binary(std::string_view content) {
  return content.substr(0, 8000).find('\0') != std::string_view::npos;
}

// Myers' greedy O((N+M)D) forward search; only the distance is kept, so
// memory stays O(N+M).
std::int64_t line_edit_distance(const std::vector<std::string_view>& a,
                                const std::vector<std::string_view>& b) {
  // Intern lines so comparisons in the inner loop are integer compares.
  std::unordered_map<std::string_view, int> ids;
  auto intern = [&](const std::vector<std::string_view>& lines) {
    std::vector<int> out;
    out.reserve(lines.size());
    for (auto l : lines) out.push_back(ids.emplace(l, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const auto x = intern(a);
  const auto y = intern(b);
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t m = static_cast<std::int64_t>(y.size());
  const std::int64_t max = n + m;
  if (max == 0) return 0;
  std::vector<std::int64_t> v(2 * max + 2, 0);
  const std::int64_t offset = max;
  for (std::int64_t d = 0; d <= max; ++d) {
    for (std::int64_t k = -d; k <= d; k += 2) {
      std::int64_t px;
      if (k == -d || (k != d && v[offset + k - 1] < v[offset + k + 1])) {
        px = v[offset + k + 1];
      } else {
        px = v[offset + k - 1] + 1;
      }
      std::int64_t py = px - k;
      while (px < n && py < m && x[px] == y[py]) {
        ++px;
        ++py;
      }
      v[offset + k] = px;
      if (px >= n && py >= m) return d;
    }
  }
  return max;
}

DiffMetrics diff_file(std::string_view before, std::string_view after) {
  DiffMetrics m;
  if (before == after) return m;
  m.num_files_changed = 1;
  if (looks_binary(before) || looks_binary(after)) {
    m.num_changes = 2;
    m.additions = 1;
    m.deletions = 1;
    return m;
  }
  const auto a = split_lines(before);
  const auto b = split_lines(after);
  const auto d = line_edit_distance(a, b);
  // d = (n - lcs) + (m - lcs)
  const auto lcs = (static_cast<std::int64_t>(a.size() + b.size()) - d) / 2;
  m.deletions = static_cast<std::int64_t>(a.size()) - lcs;
  m.additions = static_cast<std::int64_t>(b.size()) - lcs;
  m.num_changes = d;
  return m;
}

namespace {

std::string read_entry(const fs::path& p) {
  if (fs::is_symlink(p)) return "symlink:" + fs::read_symlink(p).string();
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::map<std::string, fs::path> list_files(const fs::path& root) {
  std::map<std::string, fs::path> files;
  if (!fs::is_directory(root)) throw Error(ErrorKind::io, "not a directory: " + root.string());
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
       ++it) {
    if (it->path().filename() == ".git") {
      if (it->is_directory() && !it->is_symlink()) it.disable_recursion_pending();
      continue;
    }
    if (it->is_symlink() || it->is_regular_file()) {
      files.emplace(it->path().lexically_relative(root).generic_string(), it->path());
    }
  }
  return files;
}

void add(DiffMetrics& total, const DiffMetrics& m) {
  total.num_changes += m.num_changes;
  total.num_files_changed += m.num_files_changed;
  total.additions += m.additions;
  total.deletions += m.deletions;
  total.renames += m.renames;
}

}  // namespace

DiffMetrics compute_diff_metrics(const fs::path& failing_tree, const fs::path& passing_tree) {
  const auto before = list_files(failing_tree);
  const auto after = list_files(passing_tree);
  DiffMetrics total;
  std::vector<std::pair<std::string, std::string>> removed, added;  // (path, content)
  for (const auto& [rel, path] : before) {
    auto it = after.find(rel);
    if (it == after.end()) {
      removed.emplace_back(rel, read_entry(path));
    } else {
      add(total, diff_file(read_entry(path), read_entry(it->second)));
    }
  }
  for (const auto& [rel, path] : after) {
    if (!before.count(rel)) added.emplace_back(rel, read_entry(path));
  }

  // Renames: pair removed and added files with identical content, in path
  // order on both sides.
  std::vector<bool> added_used(added.size(), false);
  for (const auto& [rel, content] : removed) {
    bool renamed = false;
    for (std::size_t k = 0; k < added.size(); ++k) {
      if (!added_used[k] && added[k].second == content) {
        added_used[k] = true;
        renamed = true;
        break;
      }
    }
    if (renamed) {
      DiffMetrics r;
      r.num_files_changed = 1;
      r.renames = 1;
      add(total, r);
    } else {
      auto m = diff_file(content, "");
      m.num_files_changed = 1;  // an emptied-out empty file is still a removal
      add(total, m);
    }
  }
  for (std::size_t k = 0; k < added.size(); ++k) {
    if (added_used[k]) continue;
    auto m = diff_file("", added[k].second);
    m.num_files_changed = 1;
    add(total, m);
  }
  return total;
}

}  // namespace failpass
