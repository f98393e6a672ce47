#include "support/support.hpp"

#include <stdlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "failpass/error.hpp"
#include "failpass/git.hpp"
#include "failpass/zip.hpp"

namespace fpt {

// ---------------------------------------------------------------- files

TempDir::TempDir(const std::string& prefix) {
  std::string templ = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (!::mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed for " + templ);
  path_ = fs::canonical(templ);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

FileMap snapshot_tree(const fs::path& root) {
  FileMap out;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
       ++it) {
    if (it->path().filename() == ".git") {
      if (it->is_directory() && !it->is_symlink()) it.disable_recursion_pending();
      continue;
    }
    const auto rel = it->path().lexically_relative(root).generic_string();
    if (it->is_symlink()) {
      out[rel] = "symlink:" + fs::read_symlink(it->path()).string();
    } else if (it->is_regular_file()) {
      out[rel] = read_file(it->path());
    }
  }
  return out;
}

void write_tree(const fs::path& root, const FileMap& files) {
  fs::create_directories(root);
  for (const auto& [rel, content] : files) write_file(root / rel, content);
}

// ---------------------------------------------------------------- git

SeedRepo::SeedRepo(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  git({"init", "-q", "-b", "master"});
  git({"config", "user.name", "seed"});
  git({"config", "user.email", "seed@localhost"});
  git({"config", "commit.gpgsign", "false"});
}

std::string SeedRepo::git(const std::vector<std::string>& args) {
  auto opts = failpass::git::deterministic_identity();
  char date[32];
  std::snprintf(date, sizeof date, "2017-01-01T%02d:%02d:%02dZ", tick_ / 3600 % 24, tick_ / 60 % 60,
                tick_ % 60);
  opts.env["GIT_AUTHOR_DATE"] = date;
  opts.env["GIT_COMMITTER_DATE"] = date;
  auto r = failpass::git::try_run(dir_, args, opts);
  if (!r.ok()) {
    std::string cmd;
    for (const auto& a : args) cmd += " " + a;
    throw std::runtime_error("git" + cmd + " failed: " + r.output);
  }
  return r.output;
}

std::string SeedRepo::commit(const FileMap& files, const std::string& message,
                             const std::vector<std::string>& removed) {
  for (const auto& [rel, content] : files) write_file(dir_ / rel, content);
  for (const auto& rel : removed) fs::remove(dir_ / rel);
  ++tick_;
  git({"add", "-A"});
  git({"commit", "-q", "--allow-empty", "-m", message});
  auto sha = git({"rev-parse", "HEAD"});
  while (!sha.empty() && (sha.back() == '\n' || sha.back() == '\r')) sha.pop_back();
  return sha;
}

void SeedRepo::branch(const std::string& name, const std::string& at) {
  git({"branch", "-f", name, at});
}

void SeedRepo::checkout(const std::string& ref) { git({"checkout", "-q", ref}); }

std::string fake_sha(std::uint64_t seed) {
  std::mt19937_64 g(seed * 0x9e3779b97f4a7c15ULL + 17);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < 40; ++i) s.push_back(hex[g() % 16]);
  return s;
}

std::string snapshot_zip(const FileMap& files, const std::string& top) {
  std::vector<failpass::zip::Entry> entries;
  entries.push_back({top + "/", ""});
  for (const auto& [rel, content] : files) entries.push_back({top + "/" + rel, content});
  return failpass::zip::write_archive(entries);
}

// ---------------------------------------------------------------- CI fixtures

Json to_ci_record(const BuildSpec& b) {
  Json jobs = Json::array();
  for (const auto& j : b.jobs) {
    jobs.push_back({{"job_id", j.job_id},
                    {"status", j.status},
                    {"config", j.config},
                    {"log", "logs/" + std::to_string(j.job_id) + ".txt"}});
  }
  Json r{{"build_id", b.build_id},
         {"status", b.status},
         {"event", b.event},
         {"branch", b.branch},
         {"pr_number", b.pr_number ? Json(*b.pr_number) : Json(nullptr)},
         {"committed_at", b.committed_at},
         {"jobs", jobs},
         {"trigger_sha", b.trigger_sha},
         {"base_sha", b.base_sha ? Json(*b.base_sha) : Json(nullptr)},
         {"merge_message", b.merge_message ? Json(*b.merge_message) : Json(nullptr)}};
  return r;
}

FixtureProject::FixtureProject(fs::path root, std::string slug, std::string language)
    : root_(std::move(root)), slug_(std::move(slug)), language_(std::move(language)) {
  fs::create_directories(dir() / "logs");
  fs::create_directories(dir() / "archive");
  write_project_json();
  write_file(dir() / "builds.json", "[]\n");
}

void FixtureProject::write_project_json() {
  write_file(dir() / "project.json",
             Json{{"primary_language", language_}, {"repo_url", repo_url_}}.dump(2) + "\n");
}

void FixtureProject::set_repo_url(const std::string& url) {
  repo_url_ = url;
  write_project_json();
}

void FixtureProject::set_builds(const std::vector<BuildSpec>& builds) {
  Json arr = Json::array();
  for (const auto& b : builds) arr.push_back(to_ci_record(b));
  write_file(dir() / "builds.json", arr.dump(2) + "\n");
}

void FixtureProject::add_log(std::int64_t job_id, const std::string& text) {
  write_file(dir() / "logs" / (std::to_string(job_id) + ".txt"), text);
}

void FixtureProject::add_archive(const std::string& sha, const FileMap& files) {
  const auto name = slug_.substr(slug_.find('/') + 1);
  write_file(dir() / "archive" / (sha + ".zip"), snapshot_zip(files, name + "-" + sha.substr(0, 7)));
}

// ---------------------------------------------------------------- logs

std::string worker_header(const std::string& language, const std::string& instance,
                          const std::string& stamp, const std::string& os) {
  const std::string esc = "\x1b";
  std::string s;
  s += "travis_fold:start:worker_info\r" + esc + "[0K" + esc + "[33;1mWorker information" + esc + "[0m\n";
  s += "hostname: ip-10-12-5-193:2fc5bd5a-5d5e-4d5f-9b8a-1d1b3a0f3a44\n";
  s += "version: v3.4.0 https://github.com/travis-ci/worker/tree/ce0440bc30c2\n";
  s += "instance: " + instance + " travis-ci-garnet-trusty-1512502259-986baf0 (via amqp)\n";
  s += "startup: 524.917381ms\n";
  s += "travis_fold:end:worker_info\r" + esc + "[0K\n";
  s += "travis_fold:start:system_info\r" + esc + "[0K" + esc + "[33;1mBuild system information" + esc + "[0m\n";
  s += "Build language: " + language + "\n";
  s += "Build group: stable\nBuild dist: trusty\n";
  s += esc + "[34m" + esc + "[1mBuild image provisioning date and time" + esc + "[0m\n";
  s += stamp + "\n";
  s += esc + "[34m" + esc + "[1mOperating System Details" + esc + "[0m\n";
  s += "Distributor ID:\tUbuntu\nDescription:\t" + os + "\nRelease:\t14.04\nCodename:\ttrusty\n";
  s += "travis_fold:end:system_info\r" + esc + "[0K\n\n";
  return s;
}

std::string job_footer(const std::string& command, int exit_code) {
  return "\nThe command \"" + command + "\" exited with " + std::to_string(exit_code) +
         ".\n\nDone. Your build exited with " + (exit_code == 0 ? "0" : "1") + ".\n";
}

// ---------------------------------------------------------------- oracles

std::int64_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::int64_t>> t(a.size() + 1, std::vector<std::int64_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    cur.push_back(c);
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

OracleDiff oracle_diff(const FileMap& before, const FileMap& after) {
  OracleDiff d;
  std::map<std::string, std::int64_t> removed_by_content, added_by_content;
  for (const auto& [path, content] : before) {
    auto it = after.find(path);
    if (it == after.end()) {
      ++removed_by_content[content];
      continue;
    }
    auto a = lines_of(content);
    auto b = lines_of(it->second);
    const auto edits = static_cast<std::int64_t>(a.size() + b.size()) - 2 * lcs_length(a, b);
    d.changes += edits;
    if (edits > 0) ++d.files;
  }
  for (const auto& [path, content] : after) {
    if (!before.count(path)) ++added_by_content[content];
  }
  for (const auto& [content, n_removed] : removed_by_content) {
    const auto n_added = added_by_content.count(content) ? added_by_content[content] : 0;
    const auto renames = std::min(n_removed, n_added);
    const auto lines = static_cast<std::int64_t>(lines_of(content).size());
    d.files += n_removed;  // renamed or removed, one file each
    d.changes += (n_removed - renames) * lines;
    if (n_added) added_by_content[content] -= renames;
  }
  for (const auto& [content, n_added] : added_by_content) {
    d.files += n_added;
    d.changes += n_added * static_cast<std::int64_t>(lines_of(content).size());
  }
  return d;
}

// ---------------------------------------------------------------- misc

fs::path source_dir() { return FAILPASS_SOURCE_DIR; }
fs::path fixture_logs_dir() { return FAILPASS_FIXTURE_LOGS; }
fs::path cli_path() { return FAILPASS_CLI_PATH; }

std::mt19937_64& rng() {
  static thread_local std::mt19937_64 g(20180529);
  return g;
}

std::string random_word(std::mt19937_64& g, std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::string s(len(g), 'a');
  for (auto& c : s) c = static_cast<char>(ch(g));
  return s;
}

}  // namespace fpt

namespace fpt {

// ---------------------------------------------------------------- miner oracle

namespace {

// Group identity straight from the raw fields; nullopt means quarantined.
std::optional<std::string> raw_group(const failpass::Build& b) {
  if (b.event == failpass::EventKind::pull_request) {
    if (!b.pr_number) return std::nullopt;
    return "pr#" + std::to_string(*b.pr_number);
  }
  if (b.branch.empty()) return std::nullopt;
  return "branch:" + b.branch;
}

bool before(const failpass::Build& x, const failpass::Build& y) {
  if (x.committed_at.seconds != y.committed_at.seconds) {
    return x.committed_at.seconds < y.committed_at.seconds;
  }
  return x.build_id < y.build_id;
}

bool is_fail(failpass::Status s) {
  return s == failpass::Status::failed || s == failpass::Status::errored;
}

}  // namespace

std::vector<PairIds> oracle_mine(const std::vector<failpass::Build>& history) {
  using failpass::Status;
  std::vector<PairIds> out;
  for (const auto& f : history) {
    for (const auto& p : history) {
      auto gf = raw_group(f);
      if (!gf || gf != raw_group(p)) continue;
      if (!is_fail(f.status) || p.status != Status::passed || !before(f, p)) continue;
      bool adjacent = true;
      for (const auto& k : history) {
        if (k.status != Status::canceled && raw_group(k) == gf && before(f, k) && before(k, p)) {
          adjacent = false;
          break;
        }
      }
      if (!adjacent) continue;
      auto fjobs = f.jobs;
      auto pjobs = p.jobs;
      auto by_id = [](const failpass::Job& a, const failpass::Job& b) { return a.job_id < b.job_id; };
      std::sort(fjobs.begin(), fjobs.end(), by_id);
      std::sort(pjobs.begin(), pjobs.end(), by_id);
      std::set<std::int64_t> taken;
      for (const auto& jf : fjobs) {
        if (!is_fail(jf.status)) continue;
        for (const auto& jp : pjobs) {
          if (jp.status == Status::passed && !taken.count(jp.job_id) && jp.config_key == jf.config_key) {
            taken.insert(jp.job_id);
            out.push_back({f.build_id, p.build_id, jf.job_id, jp.job_id});
            break;
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PairIds> ids_of(const std::vector<failpass::JobPair>& pairs) {
  std::vector<PairIds> out;
  for (const auto& p : pairs) {
    out.push_back({p.failed_build_id, p.passed_build_id, p.failed_job.job_id, p.passed_job.job_id});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<failpass::Build> random_history(std::mt19937_64& g, std::size_t n, int groups,
                                            int max_configs) {
  using failpass::Status;
  static const Status kStatuses[] = {Status::passed, Status::failed, Status::errored, Status::canceled};
  static const char* kConfigs[] = {"oraclejdk8", "openjdk7", "openjdk11"};
  auto pick = [&](int hi) { return static_cast<int>(g() % static_cast<std::uint64_t>(hi)); };

  std::vector<failpass::Build> out;
  for (std::size_t i = 0; i < n; ++i) {
    failpass::Build b;
    b.build_id = static_cast<std::int64_t>(1000 + i * 7 + pick(5));
    b.status = kStatuses[pick(4)];
    b.committed_at = failpass::UtcTime{1500000000 + pick(static_cast<int>(n) + 1) * 60};
    const int group = pick(groups);
    if (group % 2 == 1) {
      b.event = failpass::EventKind::pull_request;
      b.pr_number = 40 + group;
      b.branch = "pr-branch-" + std::to_string(pick(3));
    } else {
      b.branch = group == 0 ? "master" : "release-" + std::to_string(group);
    }
    b.trigger_sha = fake_sha(static_cast<std::uint64_t>(b.build_id));
    const int njobs = 1 + pick(max_configs);
    for (int j = 0; j < njobs; ++j) {
      failpass::Job job;
      job.job_id = b.build_id * 10 + j;
      job.config = Json{{"language", "java"}, {"jdk", kConfigs[pick(max_configs)]}};
      job.config_key = failpass::config_fingerprint(job.config);
      switch (b.status) {
        case Status::passed: job.status = Status::passed; break;
        case Status::canceled: job.status = pick(2) ? Status::canceled : Status::passed; break;
        case Status::failed:
        case Status::errored: job.status = kStatuses[pick(3)]; break;
      }
      b.jobs.push_back(job);
    }
    if (b.status == Status::failed || b.status == Status::errored) {
      b.jobs[static_cast<std::size_t>(pick(njobs))].status = b.status;
    }
    out.push_back(std::move(b));
  }
  std::shuffle(out.begin(), out.end(), g);
  return out;
}

}  // namespace fpt

namespace fpt {

failpass::Project MemoryCi::project(const std::string& slug) {
  if (slug != proj.slug) throw failpass::Error(failpass::ErrorKind::project_not_found, slug);
  return proj;
}

std::vector<failpass::Build> MemoryCi::fetch_build_history(const std::string& slug) {
  project(slug);
  return history;
}

std::optional<std::string> MemoryCi::fetch_job_log(std::int64_t job_id) {
  ++log_requests;
  if (broken_logs.count(job_id)) {
    throw failpass::Error(failpass::ErrorKind::retryable, "log service unavailable");
  }
  auto it = logs.find(job_id);
  if (it == logs.end()) return std::nullopt;
  return it->second;
}

}  // namespace fpt

namespace fpt {

std::pair<FileMap, FileMap> random_tree_pair(std::mt19937_64& g) {
  static const char* kVocab[] = {"}", "{", "return x;", "int x = 0;", "", "// note", "x += 1;", "call();"};
  auto pick = [&](std::size_t hi) { return static_cast<std::size_t>(g() % hi); };
  auto random_text = [&] {
    std::string text;
    const std::size_t n = pick(12);
    for (std::size_t i = 0; i < n; ++i) text += std::string(kVocab[pick(8)]) + "\n";
    if (!text.empty() && pick(6) == 0) text.pop_back();
    return text;
  };

  FileMap before;
  const std::size_t nfiles = 1 + pick(8);
  for (std::size_t i = 0; i < nfiles; ++i) {
    before["src/" + random_word(g, 1, 6) + (pick(2) ? "/" + random_word(g, 1, 4) : "") + ".c"] = random_text();
  }
  FileMap after;
  for (const auto& [path, content] : before) {
    switch (pick(7)) {
      case 0:  // removed
        break;
      case 1:  // renamed
        after["moved/" + path] = content;
        break;
      case 2:  // rewritten
        after[path] = random_text();
        break;
      case 3: {  // line edits
        auto lines = lines_of(content);
        const std::size_t edits = 1 + pick(4);
        for (std::size_t e = 0; e < edits; ++e) {
          const auto op = pick(3);
          if (op == 0 || lines.empty()) {
            lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(pick(lines.size() + 1)),
                         std::string(kVocab[pick(8)]) + "\n");
          } else if (op == 1) {
            lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(pick(lines.size())));
          } else {
            lines[pick(lines.size())] = random_word(g, 1, 5) + "\n";
          }
        }
        std::string text;
        for (const auto& l : lines) text += l;
        after[path] = text;
        break;
      }
      case 4:  // final newline dropped
        after[path] = !content.empty() && content.back() == '\n' ? content.substr(0, content.size() - 1) : content;
        break;
      default:
        after[path] = content;
    }
  }
  const std::size_t extra = pick(3);
  for (std::size_t i = 0; i < extra; ++i) after["new/" + random_word(g, 3, 8) + ".c"] = random_text();
  return {before, after};
}

}  // namespace fpt
