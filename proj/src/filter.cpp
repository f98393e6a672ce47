#include "failpass/filter.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "failpass/analyzer.hpp"
#include "failpass/error.hpp"
#include "failpass/pool.hpp"
#include "failpass/serialize.hpp"

namespace failpass {

std::string ImageRef::reference() const {
  std::string ref = registry.empty() ? name : registry + "/" + name;
  return tag.empty() ? ref : ref + ":" + tag;
}

void to_json(Json& j, const ImageRef& v) {
  j = Json{{"registry", v.registry},
           {"name", v.name},
           {"tag", v.tag},
           {"built_at", format_utc(v.built_at)},
           {"instance_name", v.instance_name}};
}

void from_json(const Json& j, ImageRef& v) {
  v.registry = j.value("registry", "");
  v.name = j.at("name").get<std::string>();
  v.tag = j.value("tag", "");
  v.built_at = parse_utc_or_throw(j.at("built_at").get<std::string>());
  v.instance_name = j.value("instance_name", "");
}

// ---------------------------------------------------------------- catalog

ImageCatalog::ImageCatalog(std::vector<CatalogEntry> entries) : entries_(std::move(entries)) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : entries_) {
    if (!seen.emplace(e.name, e.tag).second) {
      throw Error(ErrorKind::configuration,
                  "image catalog lists " + e.name + ":" + e.tag + " more than once");
    }
    try {
      patterns_.emplace_back(e.instance_pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& err) {
      throw Error(ErrorKind::configuration, "image catalog entry " + e.name + ":" + e.tag +
                                                " has an invalid instance_pattern: " + err.what());
    }
  }
}

ImageCatalog ImageCatalog::from_json(const Json& doc) {
  const Json* list = &doc;
  if (doc.is_object()) {
    auto it = doc.find("images");
    if (it == doc.end()) throw Error(ErrorKind::configuration, "image catalog lacks \"images\"");
    list = &*it;
  }
  if (!list->is_array()) throw Error(ErrorKind::configuration, "image catalog must be a list");
  std::vector<CatalogEntry> entries;
  for (const auto& item : *list) {
    try {
      CatalogEntry e;
      e.language = Language::parse(item.at("language").get<std::string>());
      e.registry = item.value("registry", "");
      e.name = item.at("name").get<std::string>();
      e.tag = item.at("tag").get<std::string>();
      e.built_at = parse_utc_or_throw(item.at("built_at").get<std::string>());
      e.instance_pattern = item.at("instance_pattern").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const Json::exception& err) {
      throw Error(ErrorKind::configuration, std::string("malformed image catalog entry: ") + err.what());
    } catch (const Error& err) {
      throw Error(ErrorKind::configuration, std::string("malformed image catalog entry: ") + err.what());
    }
  }
  return ImageCatalog(std::move(entries));
}

ImageCatalog ImageCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::configuration, "cannot read image catalog " + path.string());
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorKind::configuration, "image catalog " + path.string() + " is not valid JSON");
  }
  return from_json(doc);
}

bool ImageCatalog::instance_matches(std::size_t index, std::string_view instance) const {
  return std::regex_match(instance.begin(), instance.end(), patterns_.at(index));
}

// ---------------------------------------------------------------- markers

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<int> parse_fixed(std::string_view s, std::size_t min_digits, std::size_t max_digits) {
  if (s.size() < min_digits || s.size() > max_digits) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::optional<UtcTime> parse_worker_timestamp(std::string_view text) {
  static constexpr std::string_view kDays[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  static constexpr std::string_view kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                 "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  const auto tok = split_ws(text);
  if (tok.size() != 6 || tok[4] != "UTC") return std::nullopt;
  const auto day_name = std::find(std::begin(kDays), std::end(kDays), tok[0]);
  const auto month = std::find(std::begin(kMonths), std::end(kMonths), tok[1]);
  if (day_name == std::end(kDays) || month == std::end(kMonths)) return std::nullopt;
  const auto mday = parse_fixed(tok[2], 1, 2);
  const auto year = parse_fixed(tok[5], 4, 4);
  const auto& hms = tok[3];
  if (!mday || !year || hms.size() != 8 || hms[2] != ':' || hms[5] != ':') return std::nullopt;
  const auto hh = parse_fixed(hms.substr(0, 2), 2, 2);
  const auto mm = parse_fixed(hms.substr(3, 2), 2, 2);
  const auto ss = parse_fixed(hms.substr(6, 2), 2, 2);
  if (!hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 60) return std::nullopt;

  std::tm tm{};
  tm.tm_year = *year - 1900;
  const int mon = static_cast<int>(month - std::begin(kMonths));
  tm.tm_mon = mon;
  tm.tm_mday = *mday;
  tm.tm_hour = *hh;
  tm.tm_min = *mm;
  tm.tm_sec = *ss;
  const std::time_t t = timegm(&tm);
  std::tm check{};
  gmtime_r(&t, &check);
  // timegm normalizes out-of-range days; reject those and weekday mismatches.
  if (check.tm_mday != *mday || check.tm_mon != mon ||
      check.tm_wday != static_cast<int>(day_name - std::begin(kDays))) {
    return std::nullopt;
  }
  return UtcTime{static_cast<std::int64_t>(t)};
}

std::optional<RuntimeMarkers> extract_runtime_markers(std::string_view log) {
  const auto lines = normalize_log(log);
  std::optional<std::string> instance;
  std::optional<UtcTime> stamp;
  bool in_worker = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto s = trim(lines[i]);
    if (s == "Worker information") {
      in_worker = true;
      continue;
    }
    if (in_worker && !instance && s.substr(0, 9) == "instance:") {
      const auto tok = split_ws(s.substr(9));
      if (!tok.empty()) instance = std::string(tok.front());
      continue;
    }
    if (s == "Build image provisioning date and time" && !stamp) {
      if (i + 1 >= lines.size()) return std::nullopt;
      stamp = parse_worker_timestamp(trim(lines[i + 1]));
      if (!stamp) return std::nullopt;
    }
  }
  if (!instance || !stamp) return std::nullopt;
  return RuntimeMarkers{*stamp, *instance};
}

bool is_docker_era(const RuntimeMarkers& markers, const FilterOptions& options) {
  if (markers.timestamp < options.docker_cutoff) return false;
  const std::regex pattern(options.container_pattern, std::regex::ECMAScript);
  return std::regex_match(markers.instance_name, pattern);
}

std::optional<ImageRef> locate_base_image(const RuntimeMarkers& markers, const Language& language,
                                          const ImageCatalog& catalog) {
  const CatalogEntry* best = nullptr;
  const auto& entries = catalog.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!(e.language == language) || e.built_at > markers.timestamp) continue;
    if (!catalog.instance_matches(i, markers.instance_name)) continue;
    if (!best || e.built_at > best->built_at ||
        (e.built_at == best->built_at &&
         std::tie(e.name, e.tag) < std::tie(best->name, best->tag))) {
      best = &e;
    }
  }
  if (!best) return std::nullopt;
  return ImageRef{best->registry, best->name, best->tag, best->built_at, markers.instance_name};
}

bool check_availability(const JobPair& pair) {
  return pair.failed_commits.available() && pair.passed_commits.available();
}

void to_json(Json& j, const FilterVerdict& v) {
  j = Json{{"pair", v.pair},
           {"stage_reached", to_string(v.stage_reached)},
           {"image_ref", v.image_ref ? Json(*v.image_ref) : Json(nullptr)},
           {"reject_reason", v.reject_reason ? Json(*v.reject_reason) : Json(nullptr)}};
}

void from_json(const Json& j, FilterVerdict& v) {
  v.pair = j.at("pair").get<JobPair>();
  v.stage_reached = parse_pipeline_stage(j.at("stage_reached").get<std::string>());
  v.image_ref.reset();
  v.reject_reason.reset();
  if (auto it = j.find("image_ref"); it != j.end() && !it->is_null()) v.image_ref = it->get<ImageRef>();
  if (auto it = j.find("reject_reason"); it != j.end() && !it->is_null()) {
    v.reject_reason = it->get<std::string>();
  }
  if (v.image_ref.has_value() != (v.stage_reached == PipelineStage::with_image)) {
    throw Error(ErrorKind::parse, "verdict image_ref must be present exactly at stage with_image");
  }
}

// ---------------------------------------------------------------- filter

namespace {

FilterVerdict judge(const JobPair& pair, CiConnector& ci, const ImageCatalog& catalog,
                    const FilterOptions& options) {
  FilterVerdict v;
  v.pair = pair;
  if (!check_availability(pair)) {
    const auto& side = pair.failed_commits.available() ? pair.passed_commits : pair.failed_commits;
    v.reject_reason = "state unrecoverable";
    if (side.reason) *v.reject_reason += ": " + *side.reason;
    return v;
  }
  v.stage_reached = PipelineStage::available;

  std::optional<std::string> failed_log, passed_log;
  try {
    failed_log = ci.fetch_job_log(pair.failed_job.job_id);
    passed_log = ci.fetch_job_log(pair.passed_job.job_id);
  } catch (const Error& e) {
    v.reject_reason = std::string("log fetch failed: ") + e.what();
    return v;
  }
  if (!failed_log || !passed_log) {
    v.reject_reason = "original log missing for job " +
                      std::to_string(failed_log ? pair.passed_job.job_id : pair.failed_job.job_id);
    return v;
  }
  v.stage_reached = PipelineStage::log_present;

  const auto failed_markers = extract_runtime_markers(*failed_log);
  const auto passed_markers = extract_runtime_markers(*passed_log);
  if (!failed_markers || !passed_markers) {
    v.reject_reason = "worker header missing or malformed";
    return v;
  }
  if (!is_docker_era(*failed_markers, options) || !is_docker_era(*passed_markers, options)) {
    v.reject_reason = "not run in a container-era worker";
    return v;
  }
  v.stage_reached = PipelineStage::docker_era;

  auto image = locate_base_image(*failed_markers, pair.project.primary_language, catalog);
  if (!image) {
    v.reject_reason = "no base image for " + pair.project.primary_language.name() + " at " +
                      format_utc(failed_markers->timestamp);
    return v;
  }
  v.stage_reached = PipelineStage::with_image;
  v.image_ref = std::move(image);
  return v;
}

}  // namespace

FilterResult filter(const std::vector<JobPair>& pairs, CiConnector& ci,
                    const ImageCatalog& catalog, const FilterOptions& options) {
  FilterResult out;
  out.verdicts.resize(pairs.size());
  parallel_for(pairs.size(), options.jobs, [&](std::size_t i) {
    out.verdicts[i] = judge(pairs[i], ci, catalog, options);
  });
  for (auto stage : {PipelineStage::all_pairs, PipelineStage::available, PipelineStage::log_present,
                     PipelineStage::docker_era, PipelineStage::with_image}) {
    std::int64_t n = 0;
    for (const auto& v : out.verdicts) n += v.stage_reached >= stage ? 1 : 0;
    out.counts.push_back(PipelineStageCount{stage, n});
  }
  return out;
}

}  // namespace failpass
