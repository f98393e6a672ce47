#include "failpass/miner.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>
#include <map>
#include <set>

#include "failpass/error.hpp"

namespace failpass {

Grouping group_builds(std::vector<Build> history) {
  Grouping out;
  std::map<GroupKey, std::vector<Build>> by_key;
  for (auto& b : history) {
    const bool pr = b.event == EventKind::pull_request;
    if ((pr && !b.pr_number) || (!pr && b.branch.empty())) {
      out.quarantine.push_back(std::move(b));
      continue;
    }
    by_key[group_key_of(b)].push_back(std::move(b));
  }
  for (auto& [key, builds] : by_key) {
    std::sort(builds.begin(), builds.end(), [](const Build& a, const Build& b) {
      return std::tie(a.committed_at, a.build_id) < std::tie(b.committed_at, b.build_id);
    });
    out.groups.push_back(BuildGroup{key, std::move(builds)});
  }
  return out;
}

std::vector<std::pair<Build, Build>> extract_fail_pass_build_pairs(const BuildGroup& group) {
  std::vector<const Build*> seq;
  for (const auto& b : group.builds) {
    if (outcome_class(b.status) != Outcome::excluded) seq.push_back(&b);
  }
  std::vector<std::pair<Build, Build>> pairs;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    if (outcome_class(seq[i]->status) == Outcome::fail &&
        outcome_class(seq[i + 1]->status) == Outcome::pass) {
      pairs.emplace_back(*seq[i], *seq[i + 1]);
    }
  }
  return pairs;
}

// ---------------------------------------------------------------- commits

RepositoryCommitLookup::RepositoryCommitLookup(Project project, git::CloneCache& cache,
                                               ArchiveStore& archive)
    : project_(std::move(project)), cache_(cache), archive_(archive) {}

bool RepositoryCommitLookup::in_git_history(const std::string& sha) {
  if (project_.repo_url.empty()) return false;
  if (!clone_) clone_ = cache_.ensure(project_.slug, project_.repo_url);
  return git::commit_exists(*clone_, sha);
}

bool RepositoryCommitLookup::in_archive(const std::string& sha) {
  return archive_.has_snapshot(project_, sha);
}

std::optional<std::pair<std::string, std::string>> parse_merge_message(std::string_view msg) {
  auto skip_spaces = [&](std::size_t& pos) {
    while (pos < msg.size() && (msg[pos] == ' ' || msg[pos] == '\t')) ++pos;
  };
  auto read_sha = [&](std::size_t& pos) -> std::optional<std::string> {
    if (pos + 40 > msg.size()) return std::nullopt;
    auto candidate = msg.substr(pos, 40);
    if (!is_sha40(candidate)) return std::nullopt;
    pos += 40;
    return std::string(candidate);
  };
  std::size_t pos = 0;
  skip_spaces(pos);
  if (msg.substr(pos, 5) != "Merge") return std::nullopt;
  pos += 5;
  if (pos >= msg.size() || msg[pos] != ' ') return std::nullopt;
  skip_spaces(pos);
  auto trigger = read_sha(pos);
  if (!trigger || pos >= msg.size() || msg[pos] != ' ') return std::nullopt;
  skip_spaces(pos);
  if (msg.substr(pos, 4) != "into") return std::nullopt;
  pos += 4;
  if (pos >= msg.size() || msg[pos] != ' ') return std::nullopt;
  skip_spaces(pos);
  auto base = read_sha(pos);
  if (!base) return std::nullopt;
  if (pos < msg.size() && !std::isspace(static_cast<unsigned char>(msg[pos]))) return std::nullopt;
  return std::make_pair(*trigger, *base);
}

CommitCoordinates assign_commits(const Build& build, CommitLookup& lookup) {
  CommitCoordinates c;  // unavailable by default
  if (build.event == EventKind::push) {
    c.trigger_sha = build.trigger_sha;
    if (lookup.in_git_history(c.trigger_sha)) {
      c.availability = Availability::available;
      c.recovery_source = RecoverySource::git_history;
    } else if (lookup.in_archive(c.trigger_sha)) {
      c.availability = Availability::available;
      c.recovery_source = RecoverySource::archive;
    } else {
      c.reason = "trigger commit not found";
    }
    return c;
  }

  c.merge_sha = build.trigger_sha;
  auto parsed = build.merge_message ? parse_merge_message(*build.merge_message) : std::nullopt;
  if (!parsed) {
    c.reason = "merge message unparsed";
    return c;
  }
  c.trigger_sha = parsed->first;
  c.base_sha = build.base_sha && is_sha40(*build.base_sha) ? *build.base_sha : parsed->second;
  if (lookup.in_git_history(c.trigger_sha) && lookup.in_git_history(*c.base_sha)) {
    c.availability = Availability::available;
    c.recovery_source = RecoverySource::git_history;
  } else if (lookup.in_archive(*c.merge_sha)) {
    c.availability = Availability::available;
    c.recovery_source = RecoverySource::archive;
  } else {
    c.reason = "trigger/base commits not found and merge commit not archived";
  }
  return c;
}

// ---------------------------------------------------------------- jobs

namespace {

void warn_duplicate_keys(const Build& b, std::vector<std::string>& warnings) {
  std::set<std::string> seen;
  for (const auto& j : b.jobs) {
    if (!seen.insert(j.config_key).second) {
      warnings.push_back("build " + std::to_string(b.build_id) +
                         ": duplicate configuration " + j.config_key +
                         "; pairing greedily by ascending job_id");
    }
  }
}

std::vector<const Job*> sorted_jobs(const Build& b) {
  std::vector<const Job*> jobs;
  for (const auto& j : b.jobs) jobs.push_back(&j);
  std::sort(jobs.begin(), jobs.end(),
            [](const Job* x, const Job* y) { return x->job_id < y->job_id; });
  return jobs;
}

}  // namespace

JobPairing extract_job_pairs(const Project& project, const Build& failed, const Build& passed) {
  if (!failed.trigger || !passed.trigger) {
    throw Error(ErrorKind::invalid_argument, "extract_job_pairs requires assigned commits");
  }
  JobPairing out;
  warn_duplicate_keys(failed, out.warnings);
  warn_duplicate_keys(passed, out.warnings);

  const auto fail_jobs = sorted_jobs(failed);
  const auto pass_jobs = sorted_jobs(passed);
  std::vector<bool> used(pass_jobs.size(), false);
  for (const Job* jf : fail_jobs) {
    if (outcome_class(jf->status) != Outcome::fail) continue;
    for (std::size_t k = 0; k < pass_jobs.size(); ++k) {
      const Job* jp = pass_jobs[k];
      if (used[k] || jp->status != Status::passed || jp->config_key != jf->config_key) continue;
      used[k] = true;
      JobPair p;
      p.project = project;
      p.failed_build_id = failed.build_id;
      p.passed_build_id = passed.build_id;
      p.failed_job = *jf;
      p.passed_job = *jp;
      p.failed_commits = *failed.trigger;
      p.passed_commits = *passed.trigger;
      p.group_key = group_key_of(failed);
      out.pairs.push_back(std::move(p));
      break;
    }
  }
  return out;
}

MineReport mine(const Project& project, std::vector<Build> history, CommitLookup& lookup) {
  std::set<std::int64_t> ids;
  for (const auto& b : history) {
    if (!ids.insert(b.build_id).second) {
      throw Error(ErrorKind::invalid_argument,
                  "duplicate build_id " + std::to_string(b.build_id) + " in history");
    }
  }
  MineReport report;
  auto grouping = group_builds(std::move(history));
  for (const auto& q : grouping.quarantine) {
    report.quarantined_builds.push_back(q.build_id);
    report.warnings.push_back("build " + std::to_string(q.build_id) +
                              " has neither branch nor pull request; quarantined");
  }
  for (const auto& group : grouping.groups) {
    for (auto& [failed, passed] : extract_fail_pass_build_pairs(group)) {
      failed.trigger = assign_commits(failed, lookup);
      passed.trigger = assign_commits(passed, lookup);
      auto pairing = extract_job_pairs(project, failed, passed);
      report.pairs.insert(report.pairs.end(), pairing.pairs.begin(), pairing.pairs.end());
      report.warnings.insert(report.warnings.end(), pairing.warnings.begin(),
                             pairing.warnings.end());
    }
  }
  return report;
}

MineReport mine(const std::string& slug, CiConnector& ci, ArchiveStore& archive,
                git::CloneCache& cache) {
  const Project project = ci.project(slug);
  RepositoryCommitLookup lookup(project, cache, archive);
  return mine(project, ci.fetch_build_history(slug), lookup);
}

}  // namespace failpass
