#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "failpass/process.hpp"

namespace failpass::git {

namespace fs = std::filesystem;

// Runs `git <args>` inside `repo`; throws Error(io) carrying git's output
// when the command fails.
std::string run(const fs::path& repo, const std::vector<std::string>& args);
ProcessResult try_run(const fs::path& repo, const std::vector<std::string>& args,
                      const ProcessOptions& extra = {});

// True iff `sha` names a commit in the clone's object store. Throws
// Error(io, "clone missing") when `repo` is not a git repository.
bool commit_exists(const fs::path& repo, std::string_view sha);

bool is_repository(const fs::path& path);
void clone(const std::string& url, const fs::path& dest);
std::string head_sha(const fs::path& worktree);
bool is_clean(const fs::path& worktree);

// Fixed identity and dates so that recreated merges are reproducible.
ProcessOptions deterministic_identity();

// Local clone cache: one bare mirror per project, created on first use and
// refreshed with `git fetch`. Writers to the same repository are serialized;
// different repositories proceed independently.
class CloneCache {
 public:
  explicit CloneCache(fs::path root) : root_(std::move(root)) {}

  // Path of an up-to-date mirror of `url` for `slug`.
  fs::path ensure(const std::string& slug, const std::string& url);

  const fs::path& root() const { return root_; }

 private:
  std::mutex& lock_for(const std::string& slug);

  fs::path root_;
  std::mutex map_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
  std::map<std::string, bool> refreshed_;
};

}  // namespace failpass::git
