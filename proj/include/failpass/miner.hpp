#pragma once

// Fail-pass pair mining: delinearize the build history into per-branch and
// per-pull-request sequences, find consecutive failed->passed builds, recover
// the commits each build ran on, and pair jobs that ran the same
// configuration.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "failpass/connector.hpp"
#include "failpass/git.hpp"
#include "failpass/model.hpp"

namespace failpass {

struct BuildGroup {
  GroupKey key;
  std::vector<Build> builds;  // ascending (committed_at, build_id)
};

struct Grouping {
  std::vector<BuildGroup> groups;  // ascending by key
  std::vector<Build> quarantine;   // neither branch nor pr_number; never paired
};

Grouping group_builds(std::vector<Build> history);

// Adjacent (fail, pass) builds after canceled builds are dropped.
std::vector<std::pair<Build, Build>> extract_fail_pass_build_pairs(const BuildGroup& group);

// Where commits can be found. Implementations answer for one project.
class CommitLookup {
 public:
  virtual ~CommitLookup() = default;
  virtual bool in_git_history(const std::string& sha) = 0;
  virtual bool in_archive(const std::string& sha) = 0;
};

// Git clone (through the cache) + archive store for one project.
class RepositoryCommitLookup final : public CommitLookup {
 public:
  RepositoryCommitLookup(Project project, git::CloneCache& cache, ArchiveStore& archive);

  bool in_git_history(const std::string& sha) override;
  bool in_archive(const std::string& sha) override;

 private:
  Project project_;
  git::CloneCache& cache_;
  ArchiveStore& archive_;
  std::optional<fs::path> clone_;
};

// "Merge <trigger> into <base>" -> (trigger, base); nullopt otherwise.
std::optional<std::pair<std::string, std::string>> parse_merge_message(std::string_view message);

// Push: available iff the trigger is in git history or archived.
// Pull request: the build's commit is the phantom merge m, whose message
// names trigger t and base b; available iff (t and b in git history) or m is
// archived. git history wins over the archive as recovery source.
CommitCoordinates assign_commits(const Build& build, CommitLookup& lookup);

struct JobPairing {
  std::vector<JobPair> pairs;
  std::vector<std::string> warnings;
};

// Both builds must carry `trigger` coordinates (from assign_commits).
JobPairing extract_job_pairs(const Project& project, const Build& failed, const Build& passed);

struct MineReport {
  std::vector<JobPair> pairs;
  std::vector<std::string> warnings;
  std::vector<std::int64_t> quarantined_builds;
};

MineReport mine(const Project& project, std::vector<Build> history, CommitLookup& lookup);
MineReport mine(const std::string& slug, CiConnector& ci, ArchiveStore& archive,
                git::CloneCache& cache);

}  // namespace failpass
