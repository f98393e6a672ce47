#include "failpass/serialize.hpp"

#include <fstream>
#include <sstream>

#include "failpass/error.hpp"

namespace failpass {

namespace {

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

const Json& require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorKind::parse, std::string("missing field '") + key + "'");
  }
  return *it;
}

}  // namespace

void to_json(Json& j, const Language& v) { j = v.name(); }
void from_json(const Json& j, Language& v) { v = Language::parse(j.get<std::string>()); }

void to_json(Json& j, const Project& v) {
  j = Json{{"slug", v.slug}, {"primary_language", v.primary_language}, {"repo_url", v.repo_url}};
}

void from_json(const Json& j, Project& v) {
  v.slug = require(j, "slug").get<std::string>();
  if (!is_valid_slug(v.slug)) {
    throw Error(ErrorKind::invalid_argument, "malformed slug '" + v.slug + "'");
  }
  v.primary_language = require(j, "primary_language").get<Language>();
  v.repo_url = j.value("repo_url", "");
}

void to_json(Json& j, const Job& v) {
  j = Json{{"job_id", v.job_id},
           {"status", to_string(v.status)},
           {"config", v.config},
           {"config_key", v.config_key},
           {"log_ref", v.log_ref}};
}

void from_json(const Json& j, Job& v) {
  v.job_id = require(j, "job_id").get<std::int64_t>();
  v.status = parse_status(require(j, "status").get<std::string>());
  v.config = j.value("config", Json::object());
  v.config_key = j.contains("config_key") ? j.at("config_key").get<std::string>()
                                          : config_fingerprint(v.config);
  v.log_ref = j.value("log_ref", "");
}

void to_json(Json& j, const CommitCoordinates& v) {
  j = Json{{"trigger_sha", v.trigger_sha},
           {"availability", to_string(v.availability)},
           {"recovery_source", to_string(v.recovery_source)}};
  put_optional(j, "base_sha", v.base_sha);
  put_optional(j, "merge_sha", v.merge_sha);
  put_optional(j, "reason", v.reason);
}

void from_json(const Json& j, CommitCoordinates& v) {
  v.trigger_sha = j.value("trigger_sha", "");
  v.base_sha = get_optional<std::string>(j, "base_sha");
  v.merge_sha = get_optional<std::string>(j, "merge_sha");
  v.availability = parse_availability(require(j, "availability").get<std::string>());
  v.recovery_source = parse_recovery_source(require(j, "recovery_source").get<std::string>());
  v.reason = get_optional<std::string>(j, "reason");
}

void to_json(Json& j, const GroupKey& v) {
  j = Json{{"branch", v.branch}};
  put_optional(j, "pr_number", v.pr_number);
}

void from_json(const Json& j, GroupKey& v) {
  v.branch = j.value("branch", "");
  v.pr_number = get_optional<std::int64_t>(j, "pr_number");
}

void to_json(Json& j, const Build& v) {
  j = build_to_ci_record(v);
  if (v.trigger) j["trigger"] = *v.trigger;
}

void from_json(const Json& j, Build& v) {
  v = build_from_ci_record(j);
  if (auto it = j.find("trigger"); it != j.end() && !it->is_null()) {
    v.trigger = it->get<CommitCoordinates>();
  }
}

void to_json(Json& j, const JobPair& v) {
  j = Json{{"project", v.project},
           {"failed_build_id", v.failed_build_id},
           {"passed_build_id", v.passed_build_id},
           {"failed_job", v.failed_job},
           {"passed_job", v.passed_job},
           {"failed_commits", v.failed_commits},
           {"passed_commits", v.passed_commits},
           {"group_key", v.group_key}};
}

void from_json(const Json& j, JobPair& v) {
  v.project = require(j, "project").get<Project>();
  v.failed_build_id = require(j, "failed_build_id").get<std::int64_t>();
  v.passed_build_id = require(j, "passed_build_id").get<std::int64_t>();
  v.failed_job = require(j, "failed_job").get<Job>();
  v.passed_job = require(j, "passed_job").get<Job>();
  v.failed_commits = require(j, "failed_commits").get<CommitCoordinates>();
  v.passed_commits = require(j, "passed_commits").get<CommitCoordinates>();
  v.group_key = require(j, "group_key").get<GroupKey>();
}

void to_json(Json& j, const PipelineStageCount& v) {
  j = Json{{"stage", to_string(v.stage)}, {"count", v.count}};
}

void from_json(const Json& j, PipelineStageCount& v) {
  v.stage = parse_pipeline_stage(require(j, "stage").get<std::string>());
  v.count = require(j, "count").get<std::int64_t>();
}

Build build_from_ci_record(const Json& r) {
  if (!r.is_object()) throw Error(ErrorKind::parse, "build record is not an object");
  Build b;
  try {
    b.build_id = require(r, "build_id").get<std::int64_t>();
    b.status = parse_status(require(r, "status").get<std::string>());
    b.event = parse_event(require(r, "event").get<std::string>());
    b.branch = r.contains("branch") && !r.at("branch").is_null()
                   ? r.at("branch").get<std::string>()
                   : std::string();
    b.pr_number = get_optional<std::int64_t>(r, "pr_number");
    b.committed_at = parse_utc_or_throw(require(r, "committed_at").get<std::string>());
    b.trigger_sha = r.value("trigger_sha", "");
    b.base_sha = get_optional<std::string>(r, "base_sha");
    b.merge_message = get_optional<std::string>(r, "merge_message");
    for (const auto& jr : r.value("jobs", Json::array())) {
      Job job;
      job.job_id = require(jr, "job_id").get<std::int64_t>();
      job.status = parse_status(require(jr, "status").get<std::string>());
      job.config = jr.value("config", Json::object());
      job.config_key = config_fingerprint(job.config);
      if (auto it = jr.find("log"); it != jr.end() && it->is_string()) {
        job.log_ref = it->get<std::string>();
      }
      b.jobs.push_back(std::move(job));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed build record: ") + e.what());
  }
  return b;
}

Json build_to_ci_record(const Build& b) {
  Json jobs = Json::array();
  for (const auto& job : b.jobs) {
    Json jj{{"job_id", job.job_id}, {"status", to_string(job.status)}, {"config", job.config}};
    jj["log"] = job.log_ref.empty() ? Json(nullptr) : Json(job.log_ref);
    jobs.push_back(std::move(jj));
  }
  Json r{{"build_id", b.build_id},
         {"status", to_string(b.status)},
         {"event", to_string(b.event)},
         {"branch", b.branch},
         {"committed_at", format_utc(b.committed_at)},
         {"jobs", std::move(jobs)},
         {"trigger_sha", b.trigger_sha}};
  put_optional(r, "pr_number", b.pr_number);
  put_optional(r, "base_sha", b.base_sha);
  put_optional(r, "merge_message", b.merge_message);
  return r;
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json row = Json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      throw Error(ErrorKind::parse,
                  path + ":" + std::to_string(line_no) + ": malformed JSON line");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_jsonl(const std::string& path, const std::vector<Json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) throw Error(ErrorKind::io, "short write to '" + path + "'");
}

}  // namespace failpass
