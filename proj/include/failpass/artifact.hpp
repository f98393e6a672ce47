#pragma once

// Reproduction verdict enums and the metadata record stored per artifact.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "failpass/analyzer.hpp"
#include "failpass/model.hpp"

namespace failpass {

enum class Stability { reproducible, flaky, unreproducible };
enum class Category { with_failed_test, with_failed_job, error_pass };
enum class UnreproducibilityReason {
  dependency_install_failed,
  stale_url_or_network,
  ci_command_issue,
  project_specific,
  did_not_finish,
  permission_issue,
};

std::string_view to_string(Stability);
std::string_view to_string(Category);
std::string_view to_string(UnreproducibilityReason);
Stability parse_stability(std::string_view);
Category parse_category(std::string_view);
UnreproducibilityReason parse_unreproducibility_reason(std::string_view);

// "<owner>-<repo>-<failing job id>".
std::string make_image_tag(std::string_view slug, std::int64_t failing_job_id);

struct SideMetadata {
  std::int64_t build_id = 0;
  std::int64_t job_id = 0;
  std::int64_t num_tests_run = 0;
  std::int64_t num_tests_failed = 0;
  std::vector<std::string> failed_test_names;
  std::string trigger_sha;
  std::string branch;
  bool operator==(const SideMetadata&) const = default;
};

struct ArtifactMetadata {
  std::string image_tag;

  std::string slug;
  Language language;
  BuildSystem build_system = BuildSystem::none_detected;
  TestFramework test_framework = TestFramework::none_detected;

  std::int64_t attempts = 0;
  std::int64_t successes = 0;
  Stability stability = Stability::unreproducible;
  std::optional<Category> category;

  std::optional<std::int64_t> pr_number;
  std::optional<UtcTime> merge_timestamp;
  std::string branch;

  SideMetadata failed;
  SideMetadata passed;

  std::int64_t num_changes = 0;
  std::int64_t num_files_changed = 0;

  std::vector<ErrorTag> error_tags;  // from the failed side's original log
  std::string base_image;            // image reference the artifact derives from

  bool operator==(const ArtifactMetadata&) const = default;
};

void to_json(Json& j, const SideMetadata& v);
void from_json(const Json& j, SideMetadata& v);
void to_json(Json& j, const ArtifactMetadata& v);
void from_json(const Json& j, ArtifactMetadata& v);

// Throws Error(invalid_argument) on violated record invariants.
void validate(const ArtifactMetadata& record);

}  // namespace failpass
