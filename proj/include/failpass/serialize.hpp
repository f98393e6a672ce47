#pragma once

// JSON forms of the core types. Field names equal the type's field names;
// every structured output of the CLI is one of these objects per line.

#include <string>
#include <vector>

#include "failpass/model.hpp"

namespace failpass {

void to_json(Json& j, const Language& v);
void from_json(const Json& j, Language& v);
void to_json(Json& j, const Project& v);
void from_json(const Json& j, Project& v);
void to_json(Json& j, const Job& v);
void from_json(const Json& j, Job& v);
void to_json(Json& j, const CommitCoordinates& v);
void from_json(const Json& j, CommitCoordinates& v);
void to_json(Json& j, const GroupKey& v);
void from_json(const Json& j, GroupKey& v);
void to_json(Json& j, const Build& v);
void from_json(const Json& j, Build& v);
void to_json(Json& j, const JobPair& v);
void from_json(const Json& j, JobPair& v);
void to_json(Json& j, const PipelineStageCount& v);
void from_json(const Json& j, PipelineStageCount& v);

// Parses one record of a fixture/CI `builds.json` array: build_id, status,
// event, branch, pr_number, committed_at, jobs[{job_id,status,config,log}],
// trigger_sha, base_sha, merge_message. Computes each job's config_key.
Build build_from_ci_record(const Json& record);
Json build_to_ci_record(const Build& build);

// JSON-lines helpers. read_jsonl skips blank lines and reports the 1-based
// line number of the first malformed line.
std::vector<Json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<Json>& rows);

template <typename T>
std::vector<T> read_jsonl_as(const std::string& path) {
  std::vector<T> out;
  for (const auto& row : read_jsonl(path)) out.push_back(row.get<T>());
  return out;
}

}  // namespace failpass
