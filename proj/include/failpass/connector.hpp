#pragma once

// Uniform access to CI build histories, job logs, and code-host archive
// snapshots. Two interchangeable backends: a fixture directory (no network)
// and live HTTP services.
//
// Fixture layout, one directory per project:
//
//   <root>/<owner>/<name>/builds.json        array of CI build records
//   <root>/<owner>/<name>/project.json       {"primary_language", "repo_url"}
//   <root>/<owner>/<name>/logs/<job_id>.txt  original job logs
//   <root>/<owner>/<name>/archive/<sha>.zip  code-host snapshots
//
// A relative repo_url is resolved against the project directory.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "failpass/model.hpp"

namespace failpass {

namespace fs = std::filesystem;

struct SnapshotRef {
  std::string sha;
  RecoverySource source = RecoverySource::archive;
  fs::path content_root;
};

class CiConnector {
 public:
  virtual ~CiConnector() = default;

  // Project metadata; throws Error(project_not_found) for unknown slugs.
  virtual Project project(const std::string& slug) = 0;

  // Complete build history (all pages), in service order.
  virtual std::vector<Build> fetch_build_history(const std::string& slug) = 0;

  // Stored log bytes, or nullopt when the service no longer has the log.
  // Transient failures throw Error(retryable).
  virtual std::optional<std::string> fetch_job_log(std::int64_t job_id) = 0;
};

class ArchiveStore {
 public:
  virtual ~ArchiveStore() = default;

  virtual bool has_snapshot(const Project& project, const std::string& sha) = 0;

  // Extracts the snapshot for `sha` below `dest`. nullopt when the code host
  // has no archive for it; Error(corrupt_archive) for malformed archives.
  virtual std::optional<SnapshotRef> fetch_archive_snapshot(const Project& project,
                                                            const std::string& sha,
                                                            const fs::path& dest) = 0;
};

// --------------------------------------------------------------- fixtures

class FixtureConnector final : public CiConnector {
 public:
  explicit FixtureConnector(fs::path root);

  Project project(const std::string& slug) override;
  std::vector<Build> fetch_build_history(const std::string& slug) override;
  std::optional<std::string> fetch_job_log(std::int64_t job_id) override;

  fs::path project_dir(const std::string& slug) const;

 private:
  fs::path root_;
};

class FixtureArchiveStore final : public ArchiveStore {
 public:
  explicit FixtureArchiveStore(fs::path root) : root_(std::move(root)) {}

  bool has_snapshot(const Project& project, const std::string& sha) override;
  std::optional<SnapshotRef> fetch_archive_snapshot(const Project& project,
                                                    const std::string& sha,
                                                    const fs::path& dest) override;

 private:
  fs::path zip_path(const Project& project, const std::string& sha) const;
  fs::path root_;
};

// --------------------------------------------------------------- live HTTP

struct RetryPolicy {
  int attempts = 5;
  std::chrono::milliseconds initial_delay{500};  // doubled after every failure
};

// Generic CI REST shape:
//   GET {base}/repos/{owner}/{name}                -> {"primary_language","repo_url"}
//   GET {base}/repos/{owner}/{name}/builds?cursor= -> {"builds":[...],"next_cursor":str|null}
//   GET {base}/jobs/{id}/log                       -> text/plain
// Authenticated with "Authorization: token <CI_API_TOKEN>" when set.
class LiveConnector final : public CiConnector {
 public:
  LiveConnector(std::string base_url, std::string token, RetryPolicy retry = {});

  Project project(const std::string& slug) override;
  std::vector<Build> fetch_build_history(const std::string& slug) override;
  std::optional<std::string> fetch_job_log(std::int64_t job_id) override;

 private:
  std::string base_url_;
  std::string token_;
  RetryPolicy retry_;
};

//   GET {base}/repos/{owner}/{name}/zipball/{sha} -> application/zip
// Authenticated with CODEHOST_API_TOKEN when set.
class LiveArchiveStore final : public ArchiveStore {
 public:
  LiveArchiveStore(std::string base_url, std::string token, RetryPolicy retry = {});

  bool has_snapshot(const Project& project, const std::string& sha) override;
  std::optional<SnapshotRef> fetch_archive_snapshot(const Project& project,
                                                    const std::string& sha,
                                                    const fs::path& dest) override;

 private:
  std::optional<std::string> download(const Project& project, const std::string& sha,
                                      bool head_only);
  std::string base_url_;
  std::string token_;
  RetryPolicy retry_;
};

struct BackendOptions {
  std::optional<fs::path> fixture_dir;  // falls back to FAILPASS_FIXTURE_DIR
  std::string ci_url;
  std::string codehost_url;
  RetryPolicy retry;
};

struct Backend {
  std::unique_ptr<CiConnector> ci;
  std::unique_ptr<ArchiveStore> archive;
};

// Fixture backend when FAILPASS_FIXTURE_DIR or options.fixture_dir is set,
// otherwise live services (tokens from CI_API_TOKEN / CODEHOST_API_TOKEN).
Backend make_backend(const BackendOptions& options);

// Calls `op` up to policy.attempts times while it throws a retryable Error,
// sleeping with exponential backoff between tries.
void with_retry(const RetryPolicy& policy, const std::function<void()>& op);

}  // namespace failpass
