#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "failpass/connector.hpp"
#include "failpass/error.hpp"
#include "failpass/serialize.hpp"
#include "failpass/zip.hpp"

namespace failpass {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing '/'
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::configuration, "service url '" + url + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

struct Response {
  int status = 0;
  std::string body;
};

// One GET/HEAD with retry on transport errors, 429 and 5xx. Other statuses
// are returned to the caller.
Response request(const std::string& base, const std::string& path, const std::string& token,
                 const RetryPolicy& retry, bool head_only = false) {
  const auto ep = split_url(base);
  Response out;
  with_retry(retry, [&] {
    httplib::Client client(ep.origin);
    client.set_follow_location(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "token " + token);
    auto res = head_only ? client.Head(ep.prefix + path, headers)
                         : client.Get(ep.prefix + path, headers);
    if (!res) {
      throw Error(ErrorKind::retryable,
                  "request to " + base + path + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
      throw Error(ErrorKind::retryable,
                  "request to " + base + path + " returned HTTP " + std::to_string(res->status));
    }
    out.status = res->status;
    out.body = res->body;
  });
  return out;
}

std::string repo_path(const std::string& slug) {
  if (!is_valid_slug(slug)) throw Error(ErrorKind::invalid_argument, "malformed slug '" + slug + "'");
  return "/repos/" + slug;
}

Json parse_body(const Response& r, const std::string& what) {
  Json j = Json::parse(r.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::parse, "malformed JSON in " + what);
  return j;
}

}  // namespace

LiveConnector::LiveConnector(std::string base_url, std::string token, RetryPolicy retry)
    : base_url_(std::move(base_url)), token_(std::move(token)), retry_(retry) {}

Project LiveConnector::project(const std::string& slug) {
  auto r = request(base_url_, repo_path(slug), token_, retry_);
  if (r.status == 404) throw Error(ErrorKind::project_not_found, "project not found: " + slug);
  if (r.status != 200) throw Error(ErrorKind::io, "project lookup returned HTTP " + std::to_string(r.status));
  Json meta = parse_body(r, "project metadata");
  Project p;
  p.slug = slug;
  p.primary_language = Language::parse(meta.value("primary_language", "unknown"));
  p.repo_url = meta.value("repo_url", "");
  return p;
}

std::vector<Build> LiveConnector::fetch_build_history(const std::string& slug) {
  std::vector<Build> builds;
  std::string cursor;
  for (int page = 0;; ++page) {
    std::string path = repo_path(slug) + "/builds";
    if (!cursor.empty()) path += "?cursor=" + httplib::detail::encode_query_param(cursor);
    auto r = request(base_url_, path, token_, retry_);
    if (r.status == 404) throw Error(ErrorKind::project_not_found, "project not found: " + slug);
    if (r.status != 200) {
      throw Error(ErrorKind::io, "build history returned HTTP " + std::to_string(r.status));
    }
    Json body = parse_body(r, "build history page");
    for (const auto& rec : body.value("builds", Json::array())) {
      builds.push_back(build_from_ci_record(rec));
    }
    auto next = body.find("next_cursor");
    if (next == body.end() || next->is_null() || next->get<std::string>().empty()) break;
    cursor = next->get<std::string>();
    if (page > 1'000'000) throw Error(ErrorKind::io, "pagination does not terminate");
  }
  return builds;
}

std::optional<std::string> LiveConnector::fetch_job_log(std::int64_t job_id) {
  auto r = request(base_url_, "/jobs/" + std::to_string(job_id) + "/log", token_, retry_);
  if (r.status == 404 || r.status == 410) return std::nullopt;
  if (r.status != 200) throw Error(ErrorKind::io, "log fetch returned HTTP " + std::to_string(r.status));
  return r.body;
}

LiveArchiveStore::LiveArchiveStore(std::string base_url, std::string token, RetryPolicy retry)
    : base_url_(std::move(base_url)), token_(std::move(token)), retry_(retry) {}

std::optional<std::string> LiveArchiveStore::download(const Project& project,
                                                      const std::string& sha, bool head_only) {
  if (!is_sha40(sha)) return std::nullopt;
  auto r = request(base_url_, repo_path(project.slug) + "/zipball/" + sha, token_, retry_, head_only);
  if (r.status == 404) return std::nullopt;
  if (r.status != 200) throw Error(ErrorKind::io, "archive fetch returned HTTP " + std::to_string(r.status));
  return r.body;
}

bool LiveArchiveStore::has_snapshot(const Project& project, const std::string& sha) {
  return download(project, sha, /*head_only=*/true).has_value();
}

std::optional<SnapshotRef> LiveArchiveStore::fetch_archive_snapshot(const Project& project,
                                                                    const std::string& sha,
                                                                    const fs::path& dest) {
  auto bytes = download(project, sha, /*head_only=*/false);
  if (!bytes) return std::nullopt;
  SnapshotRef ref;
  ref.sha = sha;
  ref.source = RecoverySource::archive;
  ref.content_root = zip::extract_snapshot(*bytes, dest);
  return ref;
}

}  // namespace failpass
