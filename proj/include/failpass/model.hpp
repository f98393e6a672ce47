#pragma once

// Shared domain types for every pipeline stage. All types are plain values;
// once built they are never mutated in place by the library, so they can be
// handed to concurrent workers freely.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace failpass {

using Json = nlohmann::json;

enum class Status { passed, failed, errored, canceled };
enum class Outcome { fail, pass, excluded };
enum class EventKind { push, pull_request };
enum class Availability { available, unavailable };
enum class RecoverySource { git_history, archive, none };
enum class PipelineStage {
  all_pairs,
  available,
  log_present,
  docker_era,
  with_image,
  attempted,
  reproduced,
};

std::string_view to_string(Status);
std::string_view to_string(Outcome);
std::string_view to_string(EventKind);
std::string_view to_string(Availability);
std::string_view to_string(RecoverySource);
std::string_view to_string(PipelineStage);

Status parse_status(std::string_view);
EventKind parse_event(std::string_view);
Availability parse_availability(std::string_view);
RecoverySource parse_recovery_source(std::string_view);
PipelineStage parse_pipeline_stage(std::string_view);

// passed -> pass, failed/errored -> fail, canceled -> excluded.
constexpr Outcome outcome_class(Status status) noexcept {
  switch (status) {
    case Status::passed:
      return Outcome::pass;
    case Status::failed:
    case Status::errored:
      return Outcome::fail;
    case Status::canceled:
      return Outcome::excluded;
  }
  return Outcome::excluded;
}

// UTC instant with second precision.
struct UtcTime {
  std::int64_t seconds = 0;  // since the Unix epoch

  auto operator<=>(const UtcTime&) const = default;
};

// Strict "YYYY-MM-DDTHH:MM:SSZ" (a "+00:00" suffix is accepted for Z).
std::optional<UtcTime> parse_utc(std::string_view text);
UtcTime parse_utc_or_throw(std::string_view text);
std::string format_utc(UtcTime t);

class Language {
 public:
  enum class Kind { java, python, other };

  Language() = default;
  static Language java() { return Language(Kind::java, "Java"); }
  static Language python() { return Language(Kind::python, "Python"); }
  static Language other(std::string name);
  // Case-insensitive "java"/"python"; anything else non-empty is other(name).
  static Language parse(std::string_view text);

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }

  bool operator==(const Language& o) const { return kind_ == o.kind_ && name_ == o.name_; }

 private:
  Language(Kind k, std::string n) : kind_(k), name_(std::move(n)) {}
  Kind kind_ = Kind::other;
  std::string name_ = "unknown";
};

bool is_sha40(std::string_view text) noexcept;

struct Project {
  std::string slug;  // "owner/name"
  Language primary_language;
  std::string repo_url;

  std::string owner() const;
  std::string name() const;
  bool operator==(const Project&) const = default;
};

bool is_valid_slug(std::string_view slug) noexcept;

struct Job {
  std::int64_t job_id = 0;
  Status status = Status::passed;
  Json config = Json::object();  // raw configuration as delivered by CI
  std::string config_key;        // config_fingerprint(config)
  std::string log_ref;

  bool operator==(const Job&) const = default;
};

struct CommitCoordinates {
  std::string trigger_sha;
  std::optional<std::string> base_sha;
  std::optional<std::string> merge_sha;
  Availability availability = Availability::unavailable;
  RecoverySource recovery_source = RecoverySource::none;
  std::optional<std::string> reason;  // why unavailable, when known

  bool available() const noexcept { return availability == Availability::available; }
  bool operator==(const CommitCoordinates&) const = default;
};

struct Build {
  std::int64_t build_id = 0;
  Status status = Status::passed;
  EventKind event = EventKind::push;
  std::string branch;
  std::optional<std::int64_t> pr_number;
  UtcTime committed_at;
  std::vector<Job> jobs;

  // Raw trigger metadata as recorded by the CI service.
  std::string trigger_sha;
  std::optional<std::string> base_sha;
  std::optional<std::string> merge_message;

  // Filled in by commit assignment.
  std::optional<CommitCoordinates> trigger;

  bool operator==(const Build&) const = default;
};

// Throws Error(invalid_argument) naming the first violated invariant.
void validate(const Build& build);

struct GroupKey {
  std::string branch;  // empty for pull-request groups
  std::optional<std::int64_t> pr_number;

  auto operator<=>(const GroupKey&) const = default;
  bool operator==(const GroupKey&) const = default;
};

GroupKey group_key_of(const Build& build);

struct JobPair {
  Project project;
  std::int64_t failed_build_id = 0;
  std::int64_t passed_build_id = 0;
  Job failed_job;
  Job passed_job;
  CommitCoordinates failed_commits;
  CommitCoordinates passed_commits;
  GroupKey group_key;

  EventKind event() const noexcept {
    return group_key.pr_number ? EventKind::pull_request : EventKind::push;
  }
  bool operator==(const JobPair&) const = default;
};

struct PipelineStageCount {
  PipelineStage stage = PipelineStage::all_pairs;
  std::int64_t count = 0;

  bool operator==(const PipelineStageCount&) const = default;
};

// Lifecycle phase keys; they do not contribute to a job's environment key.
inline constexpr std::string_view kPhaseKeys[] = {
    "before_install", "install",      "before_script", "script",
    "after_script",   "after_success", "after_failure", "before_deploy",
    "deploy",         "after_deploy",  "before_cache",
};

// Canonical environment key of a raw job configuration: object keys sorted,
// runs of whitespace inside strings collapsed to one space and trimmed,
// list order preserved, lifecycle phases dropped. Non-object input throws
// Error(unparseable_configuration).
std::string config_fingerprint(const Json& raw_config);
std::string config_fingerprint_text(std::string_view raw_config_text);

}  // namespace failpass
