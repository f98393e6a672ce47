#include "failpass/git.hpp"

#include "failpass/error.hpp"
#include "failpass/model.hpp"

namespace failpass::git {

ProcessResult try_run(const fs::path& repo, const std::vector<std::string>& args,
                      const ProcessOptions& extra) {
  std::vector<std::string> argv{"git"};
  if (!repo.empty()) {
    argv.push_back("-C");
    argv.push_back(repo.string());
  }
  argv.insert(argv.end(), args.begin(), args.end());
  ProcessOptions opt = extra;
  opt.env.emplace("GIT_TERMINAL_PROMPT", "0");
  opt.env.emplace("LC_ALL", "C");
  return run_process(argv, opt);
}

std::string run(const fs::path& repo, const std::vector<std::string>& args) {
  auto r = try_run(repo, args);
  if (!r.ok()) {
    std::string cmd = "git";
    for (const auto& a : args) cmd += " " + a;
    throw Error(ErrorKind::io, cmd + " failed (" + std::to_string(r.exit_code) + "): " + r.output);
  }
  return r.output;
}

bool is_repository(const fs::path& path) {
  if (!fs::exists(path)) return false;
  return try_run(path, {"rev-parse", "--git-dir"}).ok();
}

bool commit_exists(const fs::path& repo, std::string_view sha) {
  if (!is_repository(repo)) {
    throw Error(ErrorKind::io, "clone missing: '" + repo.string() + "'");
  }
  if (!is_sha40(sha)) return false;
  return try_run(repo, {"cat-file", "-e", std::string(sha) + "^{commit}"}).ok();
}

void clone(const std::string& url, const fs::path& dest) {
  run({}, {"clone", "--quiet", url, dest.string()});
}

std::string head_sha(const fs::path& worktree) {
  auto out = run(worktree, {"rev-parse", "HEAD"});
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out;
}

bool is_clean(const fs::path& worktree) {
  return run(worktree, {"status", "--porcelain", "--untracked-files=all"}).empty();
}

ProcessOptions deterministic_identity() {
  ProcessOptions opt;
  opt.env = {{"GIT_AUTHOR_NAME", "failpass"},
             {"GIT_AUTHOR_EMAIL", "failpass@localhost"},
             {"GIT_COMMITTER_NAME", "failpass"},
             {"GIT_COMMITTER_EMAIL", "failpass@localhost"},
             {"GIT_AUTHOR_DATE", "2000-01-01T00:00:00Z"},
             {"GIT_COMMITTER_DATE", "2000-01-01T00:00:00Z"}};
  return opt;
}

std::mutex& CloneCache::lock_for(const std::string& slug) {
  std::lock_guard guard(map_mutex_);
  auto& slot = locks_[slug];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

fs::path CloneCache::ensure(const std::string& slug, const std::string& url) {
  if (url.empty()) {
    throw Error(ErrorKind::configuration, "project '" + slug + "' has no repository url");
  }
  std::lock_guard guard(lock_for(slug));
  const fs::path dest = root_ / slug;
  if (!is_repository(dest)) {
    fs::create_directories(dest.parent_path());
    fs::remove_all(dest);
    run({}, {"clone", "--quiet", "--mirror", url, dest.string()});
  } else {
    bool fresh;
    {
      std::lock_guard map_guard(map_mutex_);
      fresh = refreshed_[slug];
    }
    if (!fresh) run(dest, {"fetch", "--quiet", "--prune", "origin"});
  }
  std::lock_guard map_guard(map_mutex_);
  refreshed_[slug] = true;
  return dest;
}

}  // namespace failpass::git
