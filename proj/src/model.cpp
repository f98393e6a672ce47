#include "failpass/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>

#include "failpass/error.hpp"

namespace failpass {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::unparseable_configuration: return "unparseable_configuration";
    case ErrorKind::project_not_found: return "project_not_found";
    case ErrorKind::retryable: return "retryable";
    case ErrorKind::corrupt_archive: return "corrupt_archive";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::state_unrecoverable: return "state_unrecoverable";
    case ErrorKind::project_specific: return "project_specific";
    case ErrorKind::ci_command_issue: return "ci_command_issue";
    case ErrorKind::not_a_fail_side: return "not_a_fail_side";
    case ErrorKind::duplicate: return "duplicate";
    case ErrorKind::unsupported_language: return "unsupported_language";
    case ErrorKind::artifact_not_found: return "artifact_not_found";
  }
  return "unknown";
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::passed: return "passed";
    case Status::failed: return "failed";
    case Status::errored: return "errored";
    case Status::canceled: return "canceled";
  }
  return "?";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::fail: return "fail";
    case Outcome::pass: return "pass";
    case Outcome::excluded: return "excluded";
  }
  return "?";
}

std::string_view to_string(EventKind e) {
  return e == EventKind::push ? "push" : "pull_request";
}

std::string_view to_string(Availability a) {
  return a == Availability::available ? "available" : "unavailable";
}

std::string_view to_string(RecoverySource r) {
  switch (r) {
    case RecoverySource::git_history: return "git_history";
    case RecoverySource::archive: return "archive";
    case RecoverySource::none: return "none";
  }
  return "?";
}

std::string_view to_string(PipelineStage s) {
  switch (s) {
    case PipelineStage::all_pairs: return "all_pairs";
    case PipelineStage::available: return "available";
    case PipelineStage::log_present: return "log_present";
    case PipelineStage::docker_era: return "docker_era";
    case PipelineStage::with_image: return "with_image";
    case PipelineStage::attempted: return "attempted";
    case PipelineStage::reproduced: return "reproduced";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_enum(std::string_view what, std::string_view text) {
  throw Error(ErrorKind::invalid_argument,
              "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

Status parse_status(std::string_view t) {
  if (t == "passed") return Status::passed;
  if (t == "failed") return Status::failed;
  if (t == "errored") return Status::errored;
  if (t == "canceled" || t == "cancelled") return Status::canceled;
  bad_enum("status", t);
}

EventKind parse_event(std::string_view t) {
  if (t == "push") return EventKind::push;
  if (t == "pull_request") return EventKind::pull_request;
  bad_enum("event", t);
}

Availability parse_availability(std::string_view t) {
  if (t == "available") return Availability::available;
  if (t == "unavailable") return Availability::unavailable;
  bad_enum("availability", t);
}

RecoverySource parse_recovery_source(std::string_view t) {
  if (t == "git_history") return RecoverySource::git_history;
  if (t == "archive") return RecoverySource::archive;
  if (t == "none") return RecoverySource::none;
  bad_enum("recovery source", t);
}

PipelineStage parse_pipeline_stage(std::string_view t) {
  for (auto s : {PipelineStage::all_pairs, PipelineStage::available,
                 PipelineStage::log_present, PipelineStage::docker_era,
                 PipelineStage::with_image, PipelineStage::attempted,
                 PipelineStage::reproduced}) {
    if (to_string(s) == t) return s;
  }
  bad_enum("pipeline stage", t);
}

// ---------------------------------------------------------------- time

namespace {

bool read_fixed(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    value = value * 10 + (text[i] - '0');
  }
  out = value;
  return true;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

std::optional<UtcTime> parse_utc(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS then Z or +00:00
  int year, month, day, hour, minute, second;
  if (text.size() < 20) return std::nullopt;
  if (!read_fixed(text, 0, 4, year) || text[4] != '-' ||
      !read_fixed(text, 5, 2, month) || text[7] != '-' ||
      !read_fixed(text, 8, 2, day) || text[10] != 'T' ||
      !read_fixed(text, 11, 2, hour) || text[13] != ':' ||
      !read_fixed(text, 14, 2, minute) || text[16] != ':' ||
      !read_fixed(text, 17, 2, second)) {
    return std::nullopt;
  }
  const auto zone = text.substr(19);
  if (zone != "Z" && zone != "+00:00") return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month) ||
      hour > 23 || minute > 59 || second > 59) {
    return std::nullopt;
  }
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  return UtcTime{static_cast<std::int64_t>(timegm(&tm))};
}

UtcTime parse_utc_or_throw(std::string_view text) {
  auto t = parse_utc(text);
  if (!t) {
    throw Error(ErrorKind::invalid_argument,
                "malformed UTC timestamp '" + std::string(text) + "'");
  }
  return *t;
}

std::string format_utc(UtcTime t) {
  std::time_t raw = static_cast<std::time_t>(t.seconds);
  std::tm tm{};
  gmtime_r(&raw, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- project

Language Language::other(std::string name) {
  if (name.empty()) {
    throw Error(ErrorKind::invalid_argument, "language name must be non-empty");
  }
  return Language(Kind::other, std::move(name));
}

Language Language::parse(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "java") return java();
  if (lower == "python") return python();
  return other(std::string(text));
}

bool is_sha40(std::string_view text) noexcept {
  return text.size() == 40 && std::all_of(text.begin(), text.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

bool is_valid_slug(std::string_view slug) noexcept {
  const auto sep = slug.find('/');
  return sep != std::string_view::npos && sep > 0 && sep + 1 < slug.size() &&
         slug.find('/', sep + 1) == std::string_view::npos;
}

std::string Project::owner() const { return slug.substr(0, slug.find('/')); }
std::string Project::name() const { return slug.substr(slug.find('/') + 1); }

// ---------------------------------------------------------------- build

void validate(const Build& b) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::invalid_argument,
                "build " + std::to_string(b.build_id) + ": " + what);
  };
  if ((b.event == EventKind::pull_request) != b.pr_number.has_value()) {
    fail("pull_request event iff pr_number present");
  }
  if (b.jobs.empty() && b.status != Status::canceled) fail("completed build has no jobs");
  const bool all_passed = std::all_of(b.jobs.begin(), b.jobs.end(), [](const Job& j) {
    return j.status == Status::passed;
  });
  if ((b.status == Status::passed) != (all_passed && !b.jobs.empty())) {
    fail("build passes iff every job passes");
  }
}

GroupKey group_key_of(const Build& b) {
  if (b.pr_number) return GroupKey{"", b.pr_number};
  return GroupKey{b.branch, std::nullopt};
}

// ---------------------------------------------------------------- config key

namespace {

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

Json normalize(const Json& value) {
  if (value.is_string()) return collapse_whitespace(value.get<std::string>());
  if (value.is_array()) {
    Json out = Json::array();
    for (const auto& v : value) out.push_back(normalize(v));
    return out;
  }
  if (value.is_object()) {
    Json out = Json::object();  // std::map backed: keys come out sorted
    for (auto it = value.begin(); it != value.end(); ++it) {
      out[collapse_whitespace(it.key())] = normalize(it.value());
    }
    return out;
  }
  return value;
}

}  // namespace

std::string config_fingerprint(const Json& raw) {
  if (!raw.is_object()) {
    throw Error(ErrorKind::unparseable_configuration, "unparseable configuration");
  }
  Json env = normalize(raw);
  for (auto key : kPhaseKeys) env.erase(std::string(key));
  return env.dump();
}

std::string config_fingerprint_text(std::string_view text) {
  Json parsed = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw Error(ErrorKind::unparseable_configuration, "unparseable configuration");
  }
  return config_fingerprint(parsed);
}

}  // namespace failpass
