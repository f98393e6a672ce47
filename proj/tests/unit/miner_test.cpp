#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "failpass/connector.hpp"
#include "failpass/error.hpp"
#include "failpass/git.hpp"
#include "failpass/miner.hpp"
#include "support/support.hpp"

using namespace failpass;

namespace {

Build make_build(std::int64_t id, Status status, const std::string& branch, std::int64_t minute,
                 std::vector<std::pair<std::int64_t, Status>> jobs = {}) {
  Build b;
  b.build_id = id;
  b.status = status;
  b.branch = branch;
  b.committed_at = UtcTime{1512460800 + minute * 60};
  b.trigger_sha = fpt::fake_sha(static_cast<std::uint64_t>(id));
  if (jobs.empty()) jobs = {{id * 10, status}};
  for (auto [jid, js] : jobs) {
    Job j;
    j.job_id = jid;
    j.status = js;
    j.config = Json{{"jdk", "oraclejdk8"}};
    j.config_key = config_fingerprint(j.config);
    b.jobs.push_back(j);
  }
  return b;
}

Build pr_build(std::int64_t id, Status status, std::int64_t pr, std::int64_t minute) {
  auto b = make_build(id, status, "feature-" + std::to_string(id), minute);
  b.event = EventKind::pull_request;
  b.pr_number = pr;
  return b;
}

std::vector<std::int64_t> ids(const std::vector<Build>& builds) {
  std::vector<std::int64_t> out;
  for (const auto& b : builds) out.push_back(b.build_id);
  return out;
}

const Project kProject{"acme/widgets", Language::java(), ""};

}  // namespace

// ---------------------------------------------------------------- grouping

TEST(GroupBuilds, SplitsByBranchAndOrdersByCommitTime) {
  auto g = group_builds({make_build(3, Status::passed, "master", 5), make_build(1, Status::failed, "master", 1),
                         make_build(2, Status::passed, "dev", 2)});
  ASSERT_EQ(g.groups.size(), 2u);
  EXPECT_EQ(g.groups[0].key.branch, "dev");
  EXPECT_EQ(ids(g.groups[0].builds), (std::vector<std::int64_t>{2}));
  EXPECT_EQ(ids(g.groups[1].builds), (std::vector<std::int64_t>{1, 3}));
  EXPECT_TRUE(g.quarantine.empty());
}

TEST(GroupBuilds, PullRequestIsOneGroupAcrossPhantomBranches) {
  auto g = group_builds({pr_build(10, Status::failed, 7, 1), pr_build(11, Status::passed, 7, 2)});
  ASSERT_EQ(g.groups.size(), 1u);
  EXPECT_EQ(g.groups[0].key.pr_number, 7);
  EXPECT_EQ(g.groups[0].builds.size(), 2u);
}

TEST(GroupBuilds, EqualTimestampsBreakOnBuildId) {
  auto g = group_builds({make_build(9, Status::passed, "m", 1), make_build(4, Status::failed, "m", 1)});
  EXPECT_EQ(ids(g.groups.at(0).builds), (std::vector<std::int64_t>{4, 9}));
}

TEST(GroupBuilds, BuildsWithoutGroupAreQuarantined) {
  auto orphan = make_build(5, Status::failed, "", 1);
  auto pr_without_number = pr_build(6, Status::failed, 1, 2);
  pr_without_number.pr_number.reset();
  auto g = group_builds({orphan, pr_without_number, make_build(7, Status::passed, "m", 3)});
  EXPECT_EQ(ids(g.quarantine).size(), 2u);
  ASSERT_EQ(g.groups.size(), 1u);
}

// Every build lands in exactly one group or the quarantine, and each group
// only holds builds with its key.
TEST(GroupBuilds, PartitionsRandomHistories) {
  auto& g = fpt::rng();
  for (int round = 0; round < 500; ++round) {
    auto history = fpt::random_history(g, 1 + g() % 20, 4, 3);
    if (round % 5 == 0) history.front().branch.clear();
    auto grouping = group_builds(history);
    std::map<std::int64_t, int> seen;
    for (const auto& grp : grouping.groups) {
      for (std::size_t i = 0; i < grp.builds.size(); ++i) {
        const auto& b = grp.builds[i];
        ++seen[b.build_id];
        EXPECT_EQ(group_key_of(b), grp.key);
        if (i > 0) {
          const auto& prev = grp.builds[i - 1];
          EXPECT_TRUE(std::pair(prev.committed_at, prev.build_id) < std::pair(b.committed_at, b.build_id));
        }
      }
    }
    for (const auto& q : grouping.quarantine) ++seen[q.build_id];
    ASSERT_EQ(seen.size(), history.size());
    for (auto [id, n] : seen) EXPECT_EQ(n, 1) << id;
  }
}

// ---------------------------------------------------------------- build pairs

TEST(BuildPairs, FailThenPass) {
  BuildGroup grp{{"m", {}}, {make_build(1, Status::failed, "m", 1), make_build(2, Status::passed, "m", 2)}};
  auto pairs = extract_fail_pass_build_pairs(grp);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].first.build_id, 1);
  EXPECT_EQ(pairs[0].second.build_id, 2);
}

TEST(BuildPairs, OnlyTheLastFailureBeforeThePass) {
  BuildGroup grp{{"m", {}},
                 {make_build(1, Status::failed, "m", 1), make_build(2, Status::failed, "m", 2),
                  make_build(3, Status::passed, "m", 3)}};
  auto pairs = extract_fail_pass_build_pairs(grp);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].first.build_id, 2);
  EXPECT_EQ(pairs[0].second.build_id, 3);
}

TEST(BuildPairs, CanceledBuildsAreTransparentAndErroredCountsAsFail) {
  BuildGroup grp{{"m", {}},
                 {make_build(1, Status::errored, "m", 1), make_build(2, Status::canceled, "m", 2),
                  make_build(3, Status::passed, "m", 3), make_build(4, Status::passed, "m", 4)}};
  auto pairs = extract_fail_pass_build_pairs(grp);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].first.build_id, 1);
  EXPECT_EQ(pairs[0].second.build_id, 3);
}

// ---------------------------------------------------------------- commits

TEST(MergeMessage, Parses) {
  const auto t = fpt::fake_sha(1), b = fpt::fake_sha(2);
  auto parsed = parse_merge_message("Merge " + t + " into " + b);
  ASSERT_TRUE(parsed);
  EXPECT_EQ(parsed->first, t);
  EXPECT_EQ(parsed->second, b);
  EXPECT_TRUE(parse_merge_message("Merge " + t + " into " + b + "\n\nbody"));
  EXPECT_FALSE(parse_merge_message("Merge pull request #3 from a/b"));
  EXPECT_FALSE(parse_merge_message("Merge " + t + " onto " + b));
  EXPECT_FALSE(parse_merge_message("Merge " + t.substr(1) + " into " + b));
  EXPECT_FALSE(parse_merge_message(""));
}

TEST(AssignCommits, PushTriggerInClone) {
  fpt::SetLookup lookup;
  auto b = make_build(1, Status::failed, "m", 1);
  lookup.git.insert(b.trigger_sha);
  lookup.archive.insert(b.trigger_sha);
  auto c = assign_commits(b, lookup);
  EXPECT_TRUE(c.available());
  EXPECT_EQ(c.recovery_source, RecoverySource::git_history);
  EXPECT_EQ(c.trigger_sha, b.trigger_sha);
  EXPECT_FALSE(c.merge_sha);
}

TEST(AssignCommits, PushTriggerOnlyArchivedOrNowhere) {
  fpt::SetLookup lookup;
  auto b = make_build(1, Status::failed, "m", 1);
  lookup.archive.insert(b.trigger_sha);
  EXPECT_EQ(assign_commits(b, lookup).recovery_source, RecoverySource::archive);
  lookup.archive.clear();
  auto c = assign_commits(b, lookup);
  EXPECT_FALSE(c.available());
  EXPECT_EQ(c.recovery_source, RecoverySource::none);
  EXPECT_EQ(c.reason, "trigger commit not found");
}

TEST(AssignCommits, PullRequestFallsBackToArchivedMerge) {
  fpt::SetLookup lookup;
  auto b = pr_build(1, Status::failed, 3, 1);
  const auto t = fpt::fake_sha(101), base = fpt::fake_sha(102);
  b.merge_message = "Merge " + t + " into " + base;
  lookup.archive.insert(b.trigger_sha);
  auto c = assign_commits(b, lookup);
  EXPECT_TRUE(c.available());
  EXPECT_EQ(c.recovery_source, RecoverySource::archive);
  EXPECT_EQ(c.trigger_sha, t);
  EXPECT_EQ(c.base_sha, base);
  EXPECT_EQ(c.merge_sha, b.trigger_sha);

  lookup.git = {t, base};
  EXPECT_EQ(assign_commits(b, lookup).recovery_source, RecoverySource::git_history);
  lookup.git = {t};
  EXPECT_EQ(assign_commits(b, lookup).recovery_source, RecoverySource::archive);
  lookup.archive.clear();
  EXPECT_FALSE(assign_commits(b, lookup).available());
}

TEST(AssignCommits, UnparsedMergeMessage) {
  fpt::SetLookup lookup;
  auto b = pr_build(1, Status::failed, 3, 1);
  b.merge_message = "Merge branch 'x'";
  lookup.archive.insert(b.trigger_sha);
  auto c = assign_commits(b, lookup);
  EXPECT_FALSE(c.available());
  EXPECT_EQ(c.reason, "merge message unparsed");
}

// Adding a snapshot to the archive never turns an available build unavailable.
TEST(AssignCommits, ArchiveGrowthIsMonotone) {
  auto& g = fpt::rng();
  for (int round = 0; round < 2000; ++round) {
    fpt::SetLookup lookup;
    auto b = round % 2 ? pr_build(round + 1, Status::failed, 3, 1) : make_build(round + 1, Status::failed, "m", 1);
    const auto t = fpt::fake_sha(5000 + round), base = fpt::fake_sha(9000 + round);
    if (b.event == EventKind::pull_request) b.merge_message = "Merge " + t + " into " + base;
    std::vector<std::string> universe = {b.trigger_sha, t, base};
    for (const auto& s : universe) {
      if (g() % 2) lookup.git.insert(s);
      if (g() % 2) lookup.archive.insert(s);
    }
    const bool before = assign_commits(b, lookup).available();
    lookup.archive.insert(universe[g() % universe.size()]);
    if (before) EXPECT_TRUE(assign_commits(b, lookup).available());
  }
}

TEST(RepositoryLookup, UsesCloneAndArchive) {
  fpt::TempDir dir;
  fpt::SeedRepo repo(dir / "repo");
  auto sha = repo.commit({{"a", "1"}}, "one");
  fpt::FixtureProject proj(dir / "fixtures", "acme/widgets");
  const auto archived = fpt::fake_sha(3);
  proj.add_archive(archived, {{"a", "2"}});
  git::CloneCache cache(dir / "cache");
  FixtureArchiveStore archive(dir / "fixtures");
  RepositoryCommitLookup lookup({"acme/widgets", Language::java(), repo.dir().string()}, cache, archive);
  EXPECT_TRUE(lookup.in_git_history(sha));
  EXPECT_FALSE(lookup.in_git_history(archived));
  EXPECT_TRUE(lookup.in_archive(archived));
  EXPECT_FALSE(lookup.in_archive(sha));
}

// ---------------------------------------------------------------- job pairs

TEST(JobPairs, MatchesEqualConfigurationsOnly) {
  fpt::SetLookup lookup;
  auto f = make_build(1, Status::failed, "m", 1, {{11, Status::failed}, {12, Status::failed}, {13, Status::passed}});
  auto p = make_build(2, Status::passed, "m", 2, {{21, Status::passed}, {22, Status::passed}});
  f.jobs[0].config = Json{{"jdk", "openjdk7"}};
  f.jobs[0].config_key = config_fingerprint(f.jobs[0].config);
  f.jobs[2].config = Json{{"jdk", "openjdk8"}};
  f.jobs[2].config_key = config_fingerprint(f.jobs[2].config);
  p.jobs[0].config = f.jobs[0].config;
  p.jobs[0].config_key = f.jobs[0].config_key;
  f.trigger = assign_commits(f, lookup);
  p.trigger = assign_commits(p, lookup);
  auto r = extract_job_pairs(kProject, f, p);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].failed_job.job_id, 11);
  EXPECT_EQ(r.pairs[0].passed_job.job_id, 21);
  EXPECT_EQ(r.pairs[1].failed_job.job_id, 12);
  EXPECT_EQ(r.pairs[1].passed_job.job_id, 22);
  EXPECT_EQ(r.pairs[0].group_key.branch, "m");
  EXPECT_EQ(r.pairs[0].event(), EventKind::push);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(JobPairs, DuplicateConfigurationsWarnAndPairGreedily) {
  fpt::SetLookup lookup;
  auto f = make_build(1, Status::failed, "m", 1, {{12, Status::failed}, {11, Status::failed}});
  auto p = make_build(2, Status::passed, "m", 2, {{21, Status::passed}});
  f.trigger = assign_commits(f, lookup);
  p.trigger = assign_commits(p, lookup);
  auto r = extract_job_pairs(kProject, f, p);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].failed_job.job_id, 11);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(JobPairs, RequiresAssignedCommits) {
  auto f = make_build(1, Status::failed, "m", 1);
  auto p = make_build(2, Status::passed, "m", 2);
  EXPECT_THROW(extract_job_pairs(kProject, f, p), Error);
}

// ---------------------------------------------------------------- mine

TEST(Mine, OnePairPerEventKind) {
  fpt::SetLookup lookup;
  std::vector<Build> history = {make_build(1, Status::failed, "master", 1), make_build(2, Status::passed, "master", 2),
                                pr_build(3, Status::failed, 3, 3), pr_build(4, Status::passed, 3, 4)};
  auto r = mine(kProject, history, lookup);
  ASSERT_EQ(r.pairs.size(), 2u);
  std::set<EventKind> kinds;
  for (const auto& p : r.pairs) kinds.insert(p.event());
  EXPECT_EQ(kinds.size(), 2u);
  // Unavailable commits still produce pairs; filtering happens later.
  EXPECT_FALSE(r.pairs[0].failed_commits.available());
}

TEST(Mine, OnlyPassingBuildsYieldNothing) {
  fpt::SetLookup lookup;
  std::vector<Build> history;
  for (int i = 1; i <= 6; ++i) history.push_back(make_build(i, Status::passed, "master", i));
  EXPECT_TRUE(mine(kProject, history, lookup).pairs.empty());
}

TEST(Mine, DuplicateBuildIdIsRejected) {
  fpt::SetLookup lookup;
  std::vector<Build> history = {make_build(1, Status::failed, "m", 1), make_build(1, Status::passed, "m", 2)};
  EXPECT_THROW(mine(kProject, history, lookup), Error);
}

TEST(Mine, QuarantinedBuildsAreReported) {
  fpt::SetLookup lookup;
  std::vector<Build> history = {make_build(1, Status::failed, "", 1), make_build(2, Status::passed, "", 2)};
  auto r = mine(kProject, history, lookup);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.quarantined_builds.size(), 2u);
}

TEST(Mine, ReadsFixtureBackend) {
  fpt::TempDir dir;
  fpt::SeedRepo repo(dir / "fixtures/acme/widgets/repo");
  auto c1 = repo.commit({{"a", "1"}}, "one");
  auto c2 = repo.commit({{"a", "2"}}, "two");
  fpt::FixtureProject proj(dir / "fixtures", "acme/widgets");
  proj.set_repo_url("repo");
  fpt::BuildSpec b1, b2;
  b1.build_id = 1;
  b1.status = "failed";
  b1.trigger_sha = c1;
  b1.jobs = {{11, "failed", Json{{"jdk", "oraclejdk8"}}}};
  b2.build_id = 2;
  b2.committed_at = "2017-12-05T11:00:00Z";
  b2.trigger_sha = c2;
  b2.jobs = {{21, "passed", Json{{"jdk", "oraclejdk8"}}}};
  proj.set_builds({b2, b1});
  FixtureConnector ci(dir / "fixtures");
  FixtureArchiveStore archive(dir / "fixtures");
  git::CloneCache cache(dir / "cache");
  auto r = mine("acme/widgets", ci, archive, cache);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_TRUE(r.pairs[0].failed_commits.available());
  EXPECT_EQ(r.pairs[0].failed_commits.recovery_source, RecoverySource::git_history);
  EXPECT_EQ(r.pairs[0].passed_commits.trigger_sha, c2);
}

// Soundness and completeness against the straight-line oracle, plus the
// bound of at most one pair per failing job.
TEST(Mine, AgreesWithOracleOnRandomHistories) {
  auto& g = fpt::rng();
  fpt::SetLookup lookup;
  for (int round = 0; round < 10000; ++round) {
    const std::size_t n = 1 + g() % 12;
    auto history = fpt::random_history(g, n, 1 + static_cast<int>(g() % 4), 3);
    auto report = mine(kProject, history, lookup);
    ASSERT_EQ(fpt::ids_of(report.pairs), fpt::oracle_mine(history)) << "round " << round;
    std::size_t failing_jobs = 0;
    for (const auto& b : history) {
      for (const auto& j : b.jobs) failing_jobs += outcome_class(j.status) == Outcome::fail;
    }
    ASSERT_LE(report.pairs.size(), failing_jobs);
    for (const auto& p : report.pairs) {
      ASSERT_EQ(p.failed_job.config_key, p.passed_job.config_key);
      ASSERT_EQ(outcome_class(p.failed_job.status), Outcome::fail);
      ASSERT_EQ(p.passed_job.status, Status::passed);
    }
  }
}

TEST(Mine, DeliveryOrderDoesNotMatter) {
  auto& g = fpt::rng();
  fpt::SetLookup lookup;
  for (int round = 0; round < 300; ++round) {
    auto history = fpt::random_history(g, 10, 3, 3);
    auto a = fpt::ids_of(mine(kProject, history, lookup).pairs);
    std::shuffle(history.begin(), history.end(), g);
    EXPECT_EQ(fpt::ids_of(mine(kProject, history, lookup).pairs), a);
  }
}
