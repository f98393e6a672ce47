#pragma once

// Shared helpers for the unit and acceptance suites: scratch directories,
// seeded git repositories, fixture-project writers, CI log builders, stub
// images for the local runtime, and independent oracles.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "failpass/connector.hpp"
#include "failpass/miner.hpp"
#include "failpass/model.hpp"
#include "failpass/runtime.hpp"

namespace fpt {

namespace fs = std::filesystem;
using failpass::Json;

// ---------------------------------------------------------------- files

class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "failpass-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

void write_file(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

using FileMap = std::map<std::string, std::string>;  // relative path -> content

// Every regular file and symlink below `root` (".git" excluded), by
// relative path. Symlinks read as "symlink:<target>".
FileMap snapshot_tree(const fs::path& root);
void write_tree(const fs::path& root, const FileMap& files);

// ---------------------------------------------------------------- git

// A small repository built commit by commit with a fixed identity.
class SeedRepo {
 public:
  explicit SeedRepo(fs::path dir);

  // Writes `files`, deletes `removed`, commits everything; returns the sha.
  std::string commit(const FileMap& files, const std::string& message,
                     const std::vector<std::string>& removed = {});
  void branch(const std::string& name, const std::string& at);
  void checkout(const std::string& ref);
  std::string git(const std::vector<std::string>& args);

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  int tick_ = 0;
};

// An all-hex 40-character id that no seeded repository contains.
std::string fake_sha(std::uint64_t seed);

// Zip bytes laid out like a code-host snapshot: <top>/<path>.
std::string snapshot_zip(const FileMap& files, const std::string& top = "repo-snapshot");

// ---------------------------------------------------------------- CI fixtures

struct JobSpec {
  std::int64_t job_id = 0;
  std::string status = "passed";
  Json config = Json::object();
};

struct BuildSpec {
  std::int64_t build_id = 0;
  std::string status = "passed";
  std::string event = "push";
  std::string branch = "master";
  std::optional<std::int64_t> pr_number;
  std::string committed_at = "2017-12-05T10:00:00Z";
  std::string trigger_sha;
  std::optional<std::string> base_sha;
  std::optional<std::string> merge_message;
  std::vector<JobSpec> jobs;
};

Json to_ci_record(const BuildSpec& b);

// Writes one project of the fixture layout under <root>/<owner>/<name>.
class FixtureProject {
 public:
  FixtureProject(fs::path root, std::string slug, std::string language = "java");

  void set_repo_url(const std::string& url);
  void set_builds(const std::vector<BuildSpec>& builds);
  void add_log(std::int64_t job_id, const std::string& text);
  void add_archive(const std::string& sha, const FileMap& files);

  fs::path dir() const { return root_ / slug_; }
  const std::string& slug() const { return slug_; }

 private:
  void write_project_json();
  fs::path root_;
  std::string slug_;
  std::string language_;
  std::string repo_url_;
};

// ---------------------------------------------------------------- logs

inline constexpr const char* kGarnetInstance = "worker-garnet-1512502259";
inline constexpr const char* kGarnetStamp = "Tue Dec  5 19:58:13 UTC 2017";
inline constexpr const char* kTrustyOs = "Ubuntu 14.04.5 LTS";

// Worker and system information blocks as a hosted CI worker prints them,
// with fold markers and colour codes.
std::string worker_header(const std::string& language, const std::string& instance = kGarnetInstance,
                          const std::string& stamp = kGarnetStamp, const std::string& os = kTrustyOs);

// Terminal lines of a job: the last command's result and the Done line.
std::string job_footer(const std::string& command, int exit_code);

// ---------------------------------------------------------------- oracles

// Textbook O(n*m) LCS table over whole lines.
std::int64_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
std::vector<std::string> lines_of(const std::string& text);

// Line-count change metrics for two file maps using the LCS table:
// modified line = 2, added/removed file = its line count, identical file
// moved to a new path = rename (1 file, 0 changes). Binary content is not
// generated by callers.
struct OracleDiff {
  std::int64_t changes = 0;
  std::int64_t files = 0;
};
OracleDiff oracle_diff(const FileMap& before, const FileMap& after);

// A random source tree and an edited copy: lines modified, inserted and
// deleted, files added, removed, emptied and renamed, final newlines
// dropped. Text only, drawn from a small vocabulary so lines repeat.
std::pair<FileMap, FileMap> random_tree_pair(std::mt19937_64& g);

// Job pairs as (failed build, passed build, failed job, passed job) ids.
struct PairIds {
  std::int64_t failed_build = 0;
  std::int64_t passed_build = 0;
  std::int64_t failed_job = 0;
  std::int64_t passed_job = 0;
  auto operator<=>(const PairIds&) const = default;
};

// Straight-line miner over a raw history: every ordered build pair in the
// same group with a fail then a pass and no non-canceled build of that group
// between them; jobs matched first-fit by ascending job id.
std::vector<PairIds> oracle_mine(const std::vector<failpass::Build>& history);
std::vector<PairIds> ids_of(const std::vector<failpass::JobPair>& pairs);

// Random history: up to `groups` group keys (branches and pull requests),
// colliding timestamps, 1..max_configs jobs per build whose statuses agree
// with the build status, shuffled delivery order.
std::vector<failpass::Build> random_history(std::mt19937_64& g, std::size_t n, int groups,
                                            int max_configs);

// Answers from fixed sets of shas.
class SetLookup final : public failpass::CommitLookup {
 public:
  std::set<std::string> git;
  std::set<std::string> archive;
  bool in_git_history(const std::string& sha) override { return git.count(sha) > 0; }
  bool in_archive(const std::string& sha) override { return archive.count(sha) > 0; }
};

// In-memory CI service: logs by job id, one project, counts log requests.
class MemoryCi final : public failpass::CiConnector {
 public:
  failpass::Project proj;
  std::vector<failpass::Build> history;
  std::map<std::int64_t, std::string> logs;
  std::set<std::int64_t> broken_logs;  // fetch throws a retryable error
  std::atomic<int> log_requests{0};

  failpass::Project project(const std::string& slug) override;
  std::vector<failpass::Build> fetch_build_history(const std::string& slug) override;
  std::optional<std::string> fetch_job_log(std::int64_t job_id) override;
};

// ---------------------------------------------------------------- images

inline constexpr const char* kJavaImage = "docker.io/failpass/base-java:garnet-20171205";
inline constexpr const char* kPythonImage = "docker.io/failpass/base-python:garnet-20171205";

// Java-flavoured stub: `mvn` in the image runs the shell test cases under
// src/test/cases/<Class>/<method>.sh and reports them the way Maven and
// Surefire do. Python-flavoured stub: `python` forwards to the host python3.
void install_java_stub_image(failpass::LocalRuntime& runtime, const std::string& ref = kJavaImage);
void install_python_stub_image(failpass::LocalRuntime& runtime,
                               const std::string& ref = kPythonImage);

// ---------------------------------------------------------------- misc

fs::path source_dir();
fs::path fixture_logs_dir();
fs::path cli_path();

std::mt19937_64& rng();  // fixed seed per process
std::string random_word(std::mt19937_64& g, std::size_t min_len, std::size_t max_len);

}  // namespace fpt
