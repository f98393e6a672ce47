#pragma once

// Pair reproduction: rebuild each side's source tree, run the job script
// in a container from the located base image, compare the new log with the
// original through the analyzer, and repeat to judge stability.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "failpass/analyzer.hpp"
#include "failpass/artifact.hpp"
#include "failpass/connector.hpp"
#include "failpass/error.hpp"
#include "failpass/filter.hpp"
#include "failpass/git.hpp"
#include "failpass/model.hpp"
#include "failpass/runtime.hpp"

namespace failpass {

enum class Side { failed, passed };
std::string_view to_string(Side);

struct JobScript {
  Side side = Side::failed;
  std::string script_text;
  std::string pinned_sha;
};

// Supported configuration keys: language, os, dist, group, sudo (recorded,
// no effect), env (string, list of strings, or {"global": [...]}), jdk,
// python (exported as TRAVIS_JDK_VERSION / TRAVIS_PYTHON_VERSION),
// before_install, install, before_script and script (string or list of
// strings; script is required). Anything else throws
// Error(ci_command_issue).
//
// The script checks out `pinned_sha` when the tree is a git checkout, runs
// the setup phases (a failure ends the job as errored), runs every script
// command (a failure marks the job failed), and ends with
// "Done. Your build exited with N.".
JobScript generate_job_script(const Json& config, const std::string& pinned_sha,
                              Side side = Side::failed);

enum class Construction { clone_reset, phantom_merge, archive_zip };
std::string_view to_string(Construction);

struct WorkTree {
  fs::path root;
  std::string sha;  // checked-out commit; the snapshot's commit for archive_zip
  Construction construction = Construction::clone_reset;
};

// Push: clone + checkout of the trigger commit. Pull request: checkout of
// the base and a --no-ff merge of the trigger with a fixed identity; a
// conflict throws Error(project_specific). Falls back to the archived
// snapshot (trigger for push, merge commit for pull requests). Throws
// Error(state_unrecoverable) when no source works. `dest` must not exist.
WorkTree revert_project(const CommitCoordinates& coords, const Project& project,
                        git::CloneCache& cache, ArchiveStore& archive, const fs::path& dest);

struct RunOutcome {
  Side side = Side::failed;
  int exit_status = 0;  // kKilledExitStatus when timed out
  std::string log_text;
  double wall_time = 0;
  bool timed_out = false;
};

// "/home/travis/build/<owner>/<repo>".
std::string build_path_for(const Project& project);

RunOutcome run_job(const JobScript& script, const ImageRef& image, const WorkTree& worktree,
                   const std::string& build_path, std::chrono::seconds timeout,
                   ContainerRuntime& runtime, const Labels& labels = {});

struct SideResult {
  RunOutcome outcome;
  std::optional<LogAttributes> attributes;  // of the reproduced log
  bool matched = false;
  std::optional<UnreproducibilityReason> reason;  // set when unmatched
  std::string error;                              // stage error, if any
  std::optional<ErrorKind> error_kind;
};

struct AttemptResult {
  SideResult failed;
  SideResult passed;
  bool matched() const { return failed.matched && passed.matched; }
};

struct OriginalLogs {
  std::string failed_text;
  std::string passed_text;
  LogAttributes failed;
  LogAttributes passed;
};

// Fetches and analyzes both original logs. Throws Error(invalid_argument)
// if a log is missing (the filter guarantees presence).
OriginalLogs load_original_logs(const JobPair& pair, CiConnector& ci);

struct ReproduceOptions {
  int repeats = 5;
  std::chrono::seconds timeout{1800};
  fs::path work_root;                // scratch space for worktrees
  fs::path output_root = "output";   // reproduced logs and artifact trees
  std::size_t jobs = 1;
  // Build the worktrees once and reuse them across attempts. Only for
  // checking state isolation; real runs always use fresh state.
  bool reuse_worktrees = false;
  bool package_artifacts = true;     // import an artifact image when reproduced
};

struct ReproduceContext {
  ContainerRuntime& runtime;
  git::CloneCache& cache;
  ArchiveStore& archive;
  CiConnector& ci;
  ReproduceOptions options;
};

// One attempt (1-based index). Logs go to
// <output_root>/<image_tag>/attempt-<k>/<failed|passed>.log.
AttemptResult attempt_pair(const FilterVerdict& verdict, const OriginalLogs& originals,
                           ReproduceContext& ctx, int attempt);

struct AttemptRecord {
  bool failed_matched = false;
  bool passed_matched = false;
  bool operator==(const AttemptRecord&) const = default;
};

struct ReproductionRecord {
  std::string pair_id;  // image tag
  std::vector<AttemptRecord> attempts;
  Stability stability = Stability::unreproducible;
  std::optional<Category> category;
  std::optional<UnreproducibilityReason> unreproducibility_reason;
  std::vector<std::string> errors;
  bool operator==(const ReproductionRecord&) const = default;
};

void to_json(Json& j, const ReproductionRecord& v);
void from_json(const Json& j, ReproductionRecord& v);

// all matched -> reproducible, none -> unreproducible, otherwise flaky.
// Throws Error(invalid_argument) for an empty vector.
Stability classify_stability(const std::vector<bool>& matched);

// failed with >= 1 failing test -> with_failed_test; failed without ->
// with_failed_job; errored -> error_pass; passed throws
// Error(not_a_fail_side).
Category classify_reproduced(const LogAttributes& fail_side);

// Ordered rules over an unmatched side: dependency installation markers,
// network or stale-URL markers, script generation errors, timeout,
// permission errors; project_specific otherwise.
UnreproducibilityReason classify_unreproducibility(const SideResult& side);

struct PairReproduction {
  ReproductionRecord record;
  std::optional<ArtifactMetadata> artifact;  // when stability != unreproducible
};

PairReproduction stability_protocol(const FilterVerdict& verdict, ReproduceContext& ctx);

// Reproduces every with_image verdict on ctx.options.jobs workers. `sink`
// receives each result as it completes, one call at a time.
void reproduce_all(const std::vector<FilterVerdict>& verdicts, ReproduceContext& ctx,
                   const std::function<void(const PairReproduction&)>& sink);

}  // namespace failpass
