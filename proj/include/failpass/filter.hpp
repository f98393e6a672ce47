#pragma once

// Pair filtering: keep only pairs whose project state is recoverable, whose
// original logs still exist, that ran in the container era, and for which a
// base image can be located.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "failpass/connector.hpp"
#include "failpass/model.hpp"

namespace failpass {

struct ImageRef {
  std::string registry;  // may be empty (local runtime)
  std::string name;
  std::string tag;
  UtcTime built_at;
  std::string instance_name;  // worker instance of the log that selected it

  // "registry/name:tag", or "name:tag" without a registry.
  std::string reference() const;
  bool operator==(const ImageRef&) const = default;
};

void to_json(Json& j, const ImageRef& v);
void from_json(const Json& j, ImageRef& v);

struct CatalogEntry {
  Language language;
  std::string registry;
  std::string name;
  std::string tag;
  UtcTime built_at;
  std::string instance_pattern;  // anchored: must match the whole name
};

// Local base-image catalog: a JSON array of entries, or an object
// {"version": N, "images": [...]}. (name, tag) must be unique.
class ImageCatalog {
 public:
  ImageCatalog() = default;
  explicit ImageCatalog(std::vector<CatalogEntry> entries);

  // Error(configuration) when unreadable, malformed, or not unique.
  static ImageCatalog load(const std::filesystem::path& path);
  static ImageCatalog from_json(const Json& doc);

  const std::vector<CatalogEntry>& entries() const { return entries_; }
  bool instance_matches(std::size_t index, std::string_view instance) const;

 private:
  std::vector<CatalogEntry> entries_;
  std::vector<std::regex> patterns_;
};

struct RuntimeMarkers {
  UtcTime timestamp;
  std::string instance_name;
  bool operator==(const RuntimeMarkers&) const = default;
};

// The worker header of a normalized log: the first token after "instance:"
// in the "Worker information" block, and the line following "Build image
// provisioning date and time" in `date` format ("Tue Dec  5 19:58:13 UTC
// 2017"). Absent when either marker is missing or malformed.
std::optional<RuntimeMarkers> extract_runtime_markers(std::string_view log);

// Parses "Www Mmm d HH:MM:SS UTC YYYY"; the weekday must agree with the date.
std::optional<UtcTime> parse_worker_timestamp(std::string_view text);

inline constexpr std::string_view kDefaultDockerCutoff = "2014-12-01T00:00:00Z";
inline constexpr std::string_view kDefaultContainerPattern = "worker-[a-z0-9]+-[0-9]{9,}";

struct FilterOptions {
  UtcTime docker_cutoff = parse_utc_or_throw(kDefaultDockerCutoff);
  std::string container_pattern{kDefaultContainerPattern};
  std::size_t jobs = 1;
};

bool is_docker_era(const RuntimeMarkers& markers, const FilterOptions& options = {});

// Matching language, instance pattern matching, latest built_at not after
// the log timestamp. Equal built_at is broken by the smallest (name, tag), so
// catalog file order never matters.
std::optional<ImageRef> locate_base_image(const RuntimeMarkers& markers, const Language& language,
                                          const ImageCatalog& catalog);

// Pass iff both sides are available.
bool check_availability(const JobPair& pair);

struct FilterVerdict {
  JobPair pair;
  // all_pairs when availability already failed; otherwise the last stage
  // passed (available, log_present, docker_era or with_image).
  PipelineStage stage_reached = PipelineStage::all_pairs;
  std::optional<ImageRef> image_ref;  // present iff stage_reached == with_image
  std::optional<std::string> reject_reason;
  bool operator==(const FilterVerdict&) const = default;
};

void to_json(Json& j, const FilterVerdict& v);
void from_json(const Json& j, FilterVerdict& v);

struct FilterResult {
  std::vector<FilterVerdict> verdicts;     // same order as the input pairs
  std::vector<PipelineStageCount> counts;  // all_pairs .. with_image
};

// Per-pair log fetch errors become reject reasons; nothing here is fatal.
FilterResult filter(const std::vector<JobPair>& pairs, CiConnector& ci,
                    const ImageCatalog& catalog, const FilterOptions& options = {});

}  // namespace failpass
