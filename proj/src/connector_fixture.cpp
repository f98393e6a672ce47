#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "failpass/connector.hpp"
#include "failpass/error.hpp"
#include "failpass/serialize.hpp"
#include "failpass/zip.hpp"

namespace failpass {

namespace {

std::optional<std::string> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::retryable, "read error on '" + path.string() + "'");
  return ss.str();
}

}  // namespace

void with_retry(const RetryPolicy& policy, const std::function<void()>& op) {
  auto delay = policy.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      op();
      return;
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= policy.attempts) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

// ---------------------------------------------------------------- CI fixture

FixtureConnector::FixtureConnector(fs::path root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) {
    throw Error(ErrorKind::configuration,
                "fixture directory '" + root_.string() + "' does not exist");
  }
}

fs::path FixtureConnector::project_dir(const std::string& slug) const {
  if (!is_valid_slug(slug)) {
    throw Error(ErrorKind::invalid_argument, "malformed slug '" + slug + "'");
  }
  return root_ / slug;
}

Project FixtureConnector::project(const std::string& slug) {
  const auto dir = project_dir(slug);
  if (!fs::exists(dir / "builds.json")) {
    throw Error(ErrorKind::project_not_found, "project not found: " + slug);
  }
  Project p;
  p.slug = slug;
  p.primary_language = Language::other("unknown");
  if (auto text = slurp(dir / "project.json")) {
    Json meta = Json::parse(*text, nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) {
      throw Error(ErrorKind::parse, "malformed project.json for " + slug);
    }
    p.primary_language = Language::parse(meta.value("primary_language", "unknown"));
    p.repo_url = meta.value("repo_url", "");
  }
  if (p.repo_url.empty() && fs::exists(dir / "repo")) p.repo_url = "repo";
  if (!p.repo_url.empty() && p.repo_url.find("://") == std::string::npos &&
      fs::path(p.repo_url).is_relative()) {
    p.repo_url = fs::absolute(dir / p.repo_url).lexically_normal().string();
  }
  return p;
}

std::vector<Build> FixtureConnector::fetch_build_history(const std::string& slug) {
  const auto dir = project_dir(slug);
  auto text = slurp(dir / "builds.json");
  if (!text) throw Error(ErrorKind::project_not_found, "project not found: " + slug);
  Json records = Json::parse(*text, nullptr, false);
  if (records.is_discarded() || !records.is_array()) {
    throw Error(ErrorKind::parse, "builds.json for " + slug + " is not a JSON array");
  }
  std::vector<Build> builds;
  builds.reserve(records.size());
  for (const auto& r : records) builds.push_back(build_from_ci_record(r));
  return builds;
}

std::optional<std::string> FixtureConnector::fetch_job_log(std::int64_t job_id) {
  const auto file = std::to_string(job_id) + ".txt";
  std::error_code ec;
  for (const auto& owner : fs::directory_iterator(root_, ec)) {
    if (!owner.is_directory()) continue;
    for (const auto& repo : fs::directory_iterator(owner.path(), ec)) {
      const auto candidate = repo.path() / "logs" / file;
      if (fs::exists(candidate)) return slurp(candidate);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------- archive fixture

fs::path FixtureArchiveStore::zip_path(const Project& project, const std::string& sha) const {
  return root_ / project.slug / "archive" / (sha + ".zip");
}

bool FixtureArchiveStore::has_snapshot(const Project& project, const std::string& sha) {
  return is_sha40(sha) && fs::exists(zip_path(project, sha));
}

std::optional<SnapshotRef> FixtureArchiveStore::fetch_archive_snapshot(
    const Project& project, const std::string& sha, const fs::path& dest) {
  if (!has_snapshot(project, sha)) return std::nullopt;
  auto bytes = slurp(zip_path(project, sha));
  if (!bytes) return std::nullopt;
  SnapshotRef ref;
  ref.sha = sha;
  ref.source = RecoverySource::archive;
  ref.content_root = zip::extract_snapshot(*bytes, dest);
  return ref;
}

// ---------------------------------------------------------------- factory

Backend make_backend(const BackendOptions& options) {
  std::optional<fs::path> fixture = options.fixture_dir;
  if (const char* env = std::getenv("FAILPASS_FIXTURE_DIR"); !fixture && env && *env) fixture = fs::path(env);
  Backend b;
  if (fixture) {
    b.ci = std::make_unique<FixtureConnector>(*fixture);
    b.archive = std::make_unique<FixtureArchiveStore>(*fixture);
    return b;
  }
  if (options.ci_url.empty()) {
    throw Error(ErrorKind::configuration,
                "no backend configured: pass --fixture DIR, set FAILPASS_FIXTURE_DIR, or --ci-url");
  }
  auto env_or_empty = [](const char* name) {
    const char* v = std::getenv(name);
    return std::string(v ? v : "");
  };
  b.ci = std::make_unique<LiveConnector>(options.ci_url, env_or_empty("CI_API_TOKEN"),
                                         options.retry);
  b.archive = std::make_unique<LiveArchiveStore>(
      options.codehost_url.empty() ? options.ci_url : options.codehost_url,
      env_or_empty("CODEHOST_API_TOKEN"), options.retry);
  return b;
}

}  // namespace failpass
