#pragma once

// Artifact store: an append-only JSON-lines file (one ArtifactMetadata per
// line) with a derived tag index next to it (<file>.idx). Writers take an
// exclusive advisory lock on the data file; readers take a shared one.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "failpass/artifact.hpp"
#include "failpass/runtime.hpp"

namespace failpass {

class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path file);

  // Appends one record as a single write. Error(duplicate) when the
  // image_tag is already stored; Error(invalid_argument) for invalid records.
  void persist(const ArtifactMetadata& record);

  std::vector<ArtifactMetadata> all() const;
  // Error(artifact_not_found) for unknown tags.
  ArtifactMetadata get(const std::string& image_tag) const;
  bool contains(const std::string& image_tag) const;

  const std::filesystem::path& path() const { return file_; }
  std::filesystem::path index_path() const;

 private:
  std::filesystem::path file_;
};

// Store path from --store, else $FAILPASS_STORE; Error(configuration) when
// neither is given.
std::filesystem::path resolve_store_path(const std::optional<std::string>& flag);

// ---------------------------------------------------------------- queries
//
// A query is a whitespace-separated conjunction of `field op value` terms;
// op is one of = != < <= > >=. Values may be double-quoted. Fields are the
// record's JSON keys; side fields are addressed as failed.<key> or
// passed.<key>, and the unqualified num_tests_run, num_tests_failed,
// failed_test_names, job_id, build_id and trigger_sha mean the failed side.
// Integer fields accept all operators; text fields accept = and !=
// (case-insensitive); list fields (failed_test_names, error_tags) read = as
// "contains". An empty query matches everything.

enum class QueryOp { eq, ne, lt, le, gt, ge };

struct QueryTerm {
  std::string field;
  QueryOp op = QueryOp::eq;
  std::string value;
  std::size_t position = 0;  // of the field in the query text
};

struct Query {
  std::vector<QueryTerm> terms;
  bool matches(const ArtifactMetadata& record) const;
};

// ParseError with the 0-based offending position.
Query parse_query(std::string_view text);

std::vector<ArtifactMetadata> run_query(const std::vector<ArtifactMetadata>& records,
                                        const Query& query);

// ---------------------------------------------------------------- statistics

enum class Metric { changes, files_changed, failing_tests };
std::string_view to_string(Metric);
Metric parse_metric(std::string_view);

// Bin i covers [bin_edges[i], bin_edges[i+1] - 1].
struct HistogramSpec {
  Metric metric = Metric::changes;
  std::vector<std::int64_t> bin_edges;

  // Default bins:
  //   changes        1-5, 6-20, 21-100, 101-500, 501-2000, 2001-5000, 5001-37363
  //   files_changed  1-5, 6-10, 11-25, 26-50, 51-100, 101-200, 201-500, 501-2391
  //   failing_tests  1, 2, 3-5, 6-15, 16-50, 51-100, 101-400, 401-1826
  static HistogramSpec defaults(Metric metric);
  // Error(invalid_argument) unless there are >= 2 strictly ascending edges.
  void validate() const;
  std::string label(std::size_t bin) const;
};

struct HistogramBin {
  std::string label;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::int64_t count = 0;
};

struct Histogram {
  Metric metric = Metric::changes;
  std::vector<HistogramBin> bins;
  std::int64_t overflow = 0;               // values outside every bin
  std::vector<std::string> overflow_tags;  // which records overflowed
  std::int64_t defined = 0;                // records that have the metric
};

// failing_tests is defined only for with_failed_test artifacts (the failed
// side's num_tests_failed); the other metrics for every record.
std::optional<std::int64_t> metric_value(const ArtifactMetadata& record, Metric metric);

Histogram stats(const std::vector<ArtifactMetadata>& records, const HistogramSpec& spec);

struct ErrorFrequency {
  std::string name;
  std::int64_t artifacts = 0;
  bool operator==(const ErrorFrequency&) const = default;
};

// Artifacts of `language` whose failed-side tags include each name, counted
// once per artifact; descending by count, ties by name; at most top_n rows.
std::vector<ErrorFrequency> error_frequency_report(const std::vector<ArtifactMetadata>& records,
                                                   const Language& language, std::size_t top_n);

// ---------------------------------------------------------------- artifacts

// Makes image `tag` available in the runtime: a no-op when present,
// otherwise imported from <output_root>/<tag>/artifact over the record's
// base image. Error(artifact_not_found) for unknown tags or missing trees.
void artifact_fetch(const ArtifactStore& store, const std::string& tag, ContainerRuntime& runtime,
                    const std::filesystem::path& output_root);
// Fresh labeled container; interactive when command is empty. Returns the
// session's exit status.
int artifact_shell(const ArtifactStore& store, const std::string& tag, ContainerRuntime& runtime,
                   const std::string& command = "");
// Removes containers labeled with the tag, and the image when purge is set.
// Returns the number of containers removed.
std::size_t artifact_cleanup(const ArtifactStore& store, const std::string& tag,
                             ContainerRuntime& runtime, bool purge);

}  // namespace failpass
