#include "failpass/artifact.hpp"

#include "failpass/error.hpp"
#include "failpass/serialize.hpp"

namespace failpass {

std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::reproducible: return "reproducible";
    case Stability::flaky: return "flaky";
    case Stability::unreproducible: return "unreproducible";
  }
  return "?";
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::with_failed_test: return "with_failed_test";
    case Category::with_failed_job: return "with_failed_job";
    case Category::error_pass: return "error_pass";
  }
  return "?";
}

std::string_view to_string(UnreproducibilityReason r) {
  switch (r) {
    case UnreproducibilityReason::dependency_install_failed: return "dependency_install_failed";
    case UnreproducibilityReason::stale_url_or_network: return "stale_url_or_network";
    case UnreproducibilityReason::ci_command_issue: return "ci_command_issue";
    case UnreproducibilityReason::project_specific: return "project_specific";
    case UnreproducibilityReason::did_not_finish: return "did_not_finish";
    case UnreproducibilityReason::permission_issue: return "permission_issue";
  }
  return "?";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const E (&values)[N], std::string_view what) {
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorKind::invalid_argument,
              "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

Stability parse_stability(std::string_view t) {
  static constexpr Stability kAll[] = {Stability::reproducible, Stability::flaky,
                                       Stability::unreproducible};
  return parse_enum(t, kAll, "stability");
}

Category parse_category(std::string_view t) {
  static constexpr Category kAll[] = {Category::with_failed_test, Category::with_failed_job,
                                      Category::error_pass};
  return parse_enum(t, kAll, "category");
}

UnreproducibilityReason parse_unreproducibility_reason(std::string_view t) {
  using R = UnreproducibilityReason;
  static constexpr R kAll[] = {R::dependency_install_failed, R::stale_url_or_network,
                               R::ci_command_issue,          R::project_specific,
                               R::did_not_finish,            R::permission_issue};
  return parse_enum(t, kAll, "unreproducibility reason");
}

std::string make_image_tag(std::string_view slug, std::int64_t failing_job_id) {
  if (!is_valid_slug(slug)) {
    throw Error(ErrorKind::invalid_argument, "malformed slug '" + std::string(slug) + "'");
  }
  if (failing_job_id <= 0) throw Error(ErrorKind::invalid_argument, "job id must be positive");
  std::string tag(slug);
  for (char& c : tag) {
    if (c == '/') c = '-';
  }
  return tag + "-" + std::to_string(failing_job_id);
}

void to_json(Json& j, const SideMetadata& v) {
  j = Json{{"build_id", v.build_id},
           {"job_id", v.job_id},
           {"num_tests_run", v.num_tests_run},
           {"num_tests_failed", v.num_tests_failed},
           {"failed_test_names", v.failed_test_names},
           {"trigger_sha", v.trigger_sha},
           {"branch", v.branch}};
}

void from_json(const Json& j, SideMetadata& v) {
  v.build_id = j.at("build_id").get<std::int64_t>();
  v.job_id = j.at("job_id").get<std::int64_t>();
  v.num_tests_run = j.at("num_tests_run").get<std::int64_t>();
  v.num_tests_failed = j.at("num_tests_failed").get<std::int64_t>();
  v.failed_test_names = j.at("failed_test_names").get<std::vector<std::string>>();
  v.trigger_sha = j.at("trigger_sha").get<std::string>();
  v.branch = j.value("branch", "");
}

void to_json(Json& j, const ArtifactMetadata& v) {
  j = Json{{"image_tag", v.image_tag},
           {"slug", v.slug},
           {"language", v.language.name()},
           {"build_system", to_string(v.build_system)},
           {"test_framework", to_string(v.test_framework)},
           {"attempts", v.attempts},
           {"successes", v.successes},
           {"stability", to_string(v.stability)},
           {"category", v.category ? Json(to_string(*v.category)) : Json(nullptr)},
           {"pr_number", v.pr_number ? Json(*v.pr_number) : Json(nullptr)},
           {"merge_timestamp", v.merge_timestamp ? Json(format_utc(*v.merge_timestamp)) : Json(nullptr)},
           {"branch", v.branch},
           {"failed", v.failed},
           {"passed", v.passed},
           {"num_changes", v.num_changes},
           {"num_files_changed", v.num_files_changed},
           {"error_tags", v.error_tags},
           {"base_image", v.base_image}};
}

void from_json(const Json& j, ArtifactMetadata& v) {
  v.image_tag = j.at("image_tag").get<std::string>();
  v.slug = j.at("slug").get<std::string>();
  v.language = Language::parse(j.at("language").get<std::string>());
  v.build_system = parse_build_system(j.at("build_system").get<std::string>());
  v.test_framework = parse_test_framework(j.at("test_framework").get<std::string>());
  v.attempts = j.at("attempts").get<std::int64_t>();
  v.successes = j.at("successes").get<std::int64_t>();
  v.stability = parse_stability(j.at("stability").get<std::string>());
  v.category.reset();
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
    v.category = parse_category(it->get<std::string>());
  }
  v.pr_number.reset();
  if (auto it = j.find("pr_number"); it != j.end() && !it->is_null()) {
    v.pr_number = it->get<std::int64_t>();
  }
  v.merge_timestamp.reset();
  if (auto it = j.find("merge_timestamp"); it != j.end() && !it->is_null()) {
    v.merge_timestamp = parse_utc_or_throw(it->get<std::string>());
  }
  v.branch = j.value("branch", "");
  v.failed = j.at("failed").get<SideMetadata>();
  v.passed = j.at("passed").get<SideMetadata>();
  v.num_changes = j.at("num_changes").get<std::int64_t>();
  v.num_files_changed = j.at("num_files_changed").get<std::int64_t>();
  v.error_tags = j.value("error_tags", std::vector<ErrorTag>{});
  v.base_image = j.value("base_image", "");
}

void validate(const ArtifactMetadata& r) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::invalid_argument, "artifact " + r.image_tag + ": " + what);
  };
  if (r.image_tag.empty()) fail("empty image_tag");
  if (r.attempts < 0 || r.successes < 0 || r.successes > r.attempts) {
    fail("successes must lie in [0, attempts]");
  }
  if (r.category.has_value() == (r.stability == Stability::unreproducible)) {
    fail("category must be present exactly when the pair reproduced");
  }
  if (r.num_changes < 0 || r.num_files_changed < 0) fail("negative diff metrics");
  for (const auto* side : {&r.failed, &r.passed}) {
    if (side->num_tests_failed > side->num_tests_run || side->num_tests_failed < 0) {
      fail("num_tests_failed must lie in [0, num_tests_run]");
    }
  }
  for (const auto& tag : r.error_tags) {
    if (tag.count <= 0) fail("error tag counts must be positive");
  }
}

}  // namespace failpass
