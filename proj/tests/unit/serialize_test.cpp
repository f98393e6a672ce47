#include <gtest/gtest.h>

#include "failpass/error.hpp"
#include "failpass/serialize.hpp"
#include "support/support.hpp"

using namespace failpass;

namespace {

JobPair sample_pair() {
  JobPair p;
  p.project = Project{"acme/widgets", Language::java(), "https://example.invalid/acme/widgets.git"};
  p.failed_build_id = 10;
  p.passed_build_id = 11;
  p.failed_job = Job{101, Status::failed, Json{{"jdk", "8"}}, config_fingerprint(Json{{"jdk", "8"}}),
                     "logs/101.txt"};
  p.passed_job = Job{111, Status::passed, Json{{"jdk", "8"}}, config_fingerprint(Json{{"jdk", "8"}}),
                     "logs/111.txt"};
  p.failed_commits = {fpt::fake_sha(1), std::nullopt, std::nullopt, Availability::available,
                      RecoverySource::git_history, std::nullopt};
  p.passed_commits = {fpt::fake_sha(2), fpt::fake_sha(3), fpt::fake_sha(4), Availability::available,
                      RecoverySource::archive, std::nullopt};
  p.group_key = GroupKey{"master", std::nullopt};
  return p;
}

}  // namespace

TEST(Serialize, JobPairRoundTrip) {
  const auto p = sample_pair();
  Json j = p;
  EXPECT_EQ(j.at("failed_job").at("job_id"), 101);
  EXPECT_EQ(j.at("project").at("primary_language"), "Java");
  EXPECT_EQ(j.get<JobPair>(), p);
  EXPECT_EQ(Json::parse(j.dump()).get<JobPair>(), p);
}

TEST(Serialize, FieldNamesMatchTypes) {
  Json j = sample_pair();
  for (const char* key : {"project", "failed_build_id", "passed_build_id", "failed_job", "passed_job",
                          "failed_commits", "passed_commits", "group_key"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  for (const char* key : {"trigger_sha", "base_sha", "merge_sha", "availability", "recovery_source"}) {
    EXPECT_TRUE(j.at("passed_commits").contains(key)) << key;
  }
}

TEST(Serialize, CiRecordRoundTrip) {
  fpt::BuildSpec spec;
  spec.build_id = 5;
  spec.status = "failed";
  spec.event = "pull_request";
  spec.branch = "feature";
  spec.pr_number = 3;
  spec.committed_at = "2017-06-01T12:30:00Z";
  spec.trigger_sha = fpt::fake_sha(9);
  spec.base_sha = fpt::fake_sha(10);
  spec.merge_message = "Merge " + fpt::fake_sha(11) + " into " + fpt::fake_sha(10);
  spec.jobs = {{51, "failed", Json{{"python", "3.6"}}}, {52, "passed", Json{{"python", "2.7"}}}};

  const Build b = build_from_ci_record(fpt::to_ci_record(spec));
  EXPECT_EQ(b.build_id, 5);
  EXPECT_EQ(b.event, EventKind::pull_request);
  EXPECT_EQ(b.pr_number, 3);
  EXPECT_EQ(format_utc(b.committed_at), "2017-06-01T12:30:00Z");
  ASSERT_EQ(b.jobs.size(), 2u);
  EXPECT_EQ(b.jobs[0].config_key, config_fingerprint(Json{{"python", "3.6"}}));
  EXPECT_EQ(build_from_ci_record(build_to_ci_record(b)), b);

  Json as_json = b;
  EXPECT_EQ(as_json.get<Build>(), b);
}

TEST(Serialize, CiRecordRequiresCoreFields) {
  Json r = fpt::to_ci_record(fpt::BuildSpec{1});
  r.erase("status");
  EXPECT_THROW(build_from_ci_record(r), Error);
  EXPECT_THROW(build_from_ci_record(Json::array()), Error);
  Json bad = fpt::to_ci_record(fpt::BuildSpec{1});
  bad["committed_at"] = "last tuesday";
  EXPECT_THROW(build_from_ci_record(bad), Error);
}

TEST(Serialize, CanceledStatusPreserved) {
  fpt::BuildSpec spec{7};
  spec.status = "canceled";
  spec.jobs = {{70, "canceled"}};
  EXPECT_EQ(build_from_ci_record(fpt::to_ci_record(spec)).status, Status::canceled);
}

TEST(Jsonl, WritesAndReadsRows) {
  fpt::TempDir dir;
  const auto path = (dir / "rows.jsonl").string();
  write_jsonl(path, {Json{{"a", 1}}, Json{{"a", 2}}});
  fpt::write_file(path, fpt::read_file(path) + "\n   \n");
  auto rows = read_jsonl(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].at("a"), 2);
}

TEST(Jsonl, ReportsMalformedLineNumber) {
  fpt::TempDir dir;
  const auto path = (dir / "bad.jsonl").string();
  fpt::write_file(path, "{\"a\":1}\n\n{broken\n");
  try {
    read_jsonl(path);
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, TypedReadOfPairs) {
  fpt::TempDir dir;
  const auto path = (dir / "pairs.jsonl").string();
  write_jsonl(path, {Json(sample_pair())});
  auto pairs = read_jsonl_as<JobPair>(path);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], sample_pair());
}
