#include "failpass/store.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <map>
#include <set>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include "failpass/error.hpp"

namespace failpass {

namespace fs = std::filesystem;

// ================================================================ file access

namespace {

class LockedFile {
 public:
  LockedFile(const fs::path& path, bool exclusive) {
    if (exclusive && path.has_parent_path()) fs::create_directories(path.parent_path());
    const int flags = exclusive ? (O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC) : (O_RDONLY | O_CLOEXEC);
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0) {
      if (!exclusive && errno == ENOENT) return;  // an absent store is empty
      throw Error(ErrorKind::io, "cannot open store " + path.string() + ": " + std::strerror(errno));
    }
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      throw Error(ErrorKind::io, "cannot lock store " + path.string());
    }
  }
  ~LockedFile() {
    if (fd_ >= 0) ::close(fd_);  // releases the lock
  }
  LockedFile(const LockedFile&) = delete;
  LockedFile& operator=(const LockedFile&) = delete;

  bool is_open() const { return fd_ >= 0; }

  std::string read_all() const {
    std::string data;
    if (fd_ < 0) return data;
    char buf[65536];
    off_t offset = 0;
    for (;;) {
      ssize_t n = ::pread(fd_, buf, sizeof buf, offset);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorKind::io, "store read failed");
      }
      if (n == 0) break;
      data.append(buf, static_cast<std::size_t>(n));
      offset += n;
    }
    return data;
  }

  void append(const std::string& bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
      ssize_t n = ::write(fd_, bytes.data() + done, bytes.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorKind::io, std::string("store write failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
    ::fsync(fd_);
  }

 private:
  int fd_ = -1;
};

std::vector<ArtifactMetadata> parse_records(const std::string& data, const fs::path& file) {
  std::vector<ArtifactMetadata> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    ++line_no;
    std::string_view line(data.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorKind::parse,
                  file.string() + ":" + std::to_string(line_no) + ": malformed store record");
    }
    try {
      out.push_back(j.get<ArtifactMetadata>());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::parse, file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// Derived index: tag -> byte offset, valid for a given data size.
struct Index {
  std::uint64_t data_size = 0;
  std::map<std::string, std::uint64_t> offsets;
};

Index build_index(const std::string& data) {
  Index idx;
  idx.data_size = data.size();
  std::size_t start = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    Json j = Json::parse(std::string_view(data.data() + start, end - start), nullptr, false);
    if (j.is_object() && j.contains("image_tag") && j["image_tag"].is_string()) {
      idx.offsets.emplace(j["image_tag"].get<std::string>(), start);
    }
    start = end + 1;
  }
  return idx;
}

std::optional<Index> load_index(const fs::path& path, std::uint64_t data_size) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  Json j = Json::parse(in, nullptr, false);
  if (!j.is_object() || j.value("data_size", std::uint64_t{0}) != data_size) return std::nullopt;
  Index idx;
  idx.data_size = data_size;
  const Json tags = j.value("tags", Json::object());
  for (const auto& [tag, off] : tags.items()) {
    idx.offsets.emplace(tag, off.get<std::uint64_t>());
  }
  return idx;
}

void save_index(const fs::path& path, const Index& idx) {
  Json j{{"data_size", idx.data_size}, {"tags", idx.offsets}};
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump() << "\n";
    if (!out) return;  // the index is only a cache
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
}

}  // namespace

ArtifactStore::ArtifactStore(fs::path file) : file_(std::move(file)) {}

fs::path ArtifactStore::index_path() const { return file_.string() + ".idx"; }

void ArtifactStore::persist(const ArtifactMetadata& record) {
  validate(record);
  LockedFile f(file_, /*exclusive=*/true);
  std::string data = f.read_all();
  auto idx = load_index(index_path(), data.size());
  if (!idx) idx = build_index(data);
  if (idx->offsets.count(record.image_tag)) {
    throw Error(ErrorKind::duplicate, "image_tag " + record.image_tag + " is already stored");
  }
  std::string line;
  if (!data.empty() && data.back() != '\n') line = "\n";  // repair a torn last line
  const std::uint64_t offset = data.size() + line.size();
  line += Json(record).dump() + "\n";
  f.append(line);
  idx->offsets.emplace(record.image_tag, offset);
  idx->data_size = data.size() + line.size();
  save_index(index_path(), *idx);
}

std::vector<ArtifactMetadata> ArtifactStore::all() const {
  LockedFile f(file_, /*exclusive=*/false);
  return parse_records(f.read_all(), file_);
}

bool ArtifactStore::contains(const std::string& image_tag) const {
  LockedFile f(file_, /*exclusive=*/false);
  const auto data = f.read_all();
  auto idx = load_index(index_path(), data.size());
  if (!idx) {
    idx = build_index(data);
    save_index(index_path(), *idx);
  }
  return idx->offsets.count(image_tag) > 0;
}

ArtifactMetadata ArtifactStore::get(const std::string& image_tag) const {
  for (auto& r : all()) {
    if (r.image_tag == image_tag) return r;
  }
  throw Error(ErrorKind::artifact_not_found, "artifact not found: " + image_tag);
}

fs::path resolve_store_path(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("FAILPASS_STORE"); env && *env) return env;
  throw Error(ErrorKind::configuration, "no store given (use --store FILE or FAILPASS_STORE)");
}

// ================================================================ queries

namespace {

const std::set<std::string>& integer_fields() {
  static const std::set<std::string> f = {
      "attempts",           "successes",          "pr_number",
      "num_changes",        "num_files_changed",  "failed.build_id",
      "failed.job_id",      "failed.num_tests_run", "failed.num_tests_failed",
      "passed.build_id",    "passed.job_id",      "passed.num_tests_run",
      "passed.num_tests_failed"};
  return f;
}

const std::set<std::string>& list_fields() {
  static const std::set<std::string> f = {"error_tags", "failed.failed_test_names",
                                          "passed.failed_test_names"};
  return f;
}

const std::set<std::string>& text_fields() {
  static const std::set<std::string> f = {
      "image_tag",  "slug",           "language",        "build_system",
      "test_framework", "stability",  "category",        "merge_timestamp",
      "branch",     "base_image",     "failed.trigger_sha", "failed.branch",
      "passed.trigger_sha", "passed.branch"};
  return f;
}

std::string canonical_field(const std::string& field) {
  static const std::set<std::string> kFailedAliases = {
      "num_tests_run", "num_tests_failed", "failed_test_names", "job_id", "build_id", "trigger_sha"};
  return kFailedAliases.count(field) ? "failed." + field : field;
}

bool is_op_char(char c) { return c == '<' || c == '>' || c == '=' || c == '!'; }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  for (std::size_t k = i; k < s.size(); ++k) {
    if (!std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
  }
  errno = 0;
  const long long v = std::strtoll(s.c_str(), nullptr, 10);
  if (errno == ERANGE) return std::nullopt;
  return v;
}

const Json* resolve(const Json& record, const std::string& field) {
  const Json* cur = &record;
  std::size_t start = 0;
  while (start <= field.size()) {
    auto dot = field.find('.', start);
    if (dot == std::string::npos) dot = field.size();
    const auto key = field.substr(start, dot - start);
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(key);
    if (it == cur->end()) return nullptr;
    cur = &*it;
    start = dot + 1;
  }
  return cur;
}

bool compare_int(std::int64_t a, QueryOp op, std::int64_t b) {
  switch (op) {
    case QueryOp::eq: return a == b;
    case QueryOp::ne: return a != b;
    case QueryOp::lt: return a < b;
    case QueryOp::le: return a <= b;
    case QueryOp::gt: return a > b;
    case QueryOp::ge: return a >= b;
  }
  return false;
}

}  // namespace

Query parse_query(std::string_view text) {
  Query q;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  for (skip_ws(); i < text.size(); skip_ws()) {
    QueryTerm term;
    term.position = i;
    if (!(std::isalpha(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
      throw ParseError("expected a field name", i);
    }
    while (i < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_' || text[i] == '.')) {
      term.field.push_back(text[i++]);
    }
    const auto field = canonical_field(term.field);
    if (!integer_fields().count(field) && !list_fields().count(field) && !text_fields().count(field)) {
      throw ParseError("unknown field '" + term.field + "'", term.position);
    }
    term.field = field;

    const std::size_t op_pos = i;
    auto rest = text.substr(i);
    if (rest.substr(0, 2) == "<=") {
      term.op = QueryOp::le, i += 2;
    } else if (rest.substr(0, 2) == ">=") {
      term.op = QueryOp::ge, i += 2;
    } else if (rest.substr(0, 2) == "!=") {
      term.op = QueryOp::ne, i += 2;
    } else if (rest.substr(0, 1) == "<") {
      term.op = QueryOp::lt, i += 1;
    } else if (rest.substr(0, 1) == ">") {
      term.op = QueryOp::gt, i += 1;
    } else if (rest.substr(0, 1) == "=") {
      term.op = QueryOp::eq, i += 1;
    } else {
      throw ParseError("expected one of = != < <= > >=", op_pos);
    }

    const std::size_t value_pos = i;
    if (i < text.size() && text[i] == '"') {
      ++i;
      bool closed = false;
      while (i < text.size()) {
        char c = text[i++];
        if (c == '\\' && i < text.size()) {
          term.value.push_back(text[i++]);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          term.value.push_back(c);
        }
      }
      if (!closed) throw ParseError("unterminated quoted value", value_pos);
    } else {
      if (i >= text.size() || std::isspace(static_cast<unsigned char>(text[i]))) {
        throw ParseError("expected a value", value_pos);
      }
      if (is_op_char(text[i])) throw ParseError("unexpected operator character", value_pos);
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
        term.value.push_back(text[i++]);
      }
    }

    if (integer_fields().count(term.field)) {
      if (!parse_int(term.value) && term.value != "null") {
        throw ParseError("expected an integer", value_pos);
      }
    } else if (term.op != QueryOp::eq && term.op != QueryOp::ne) {
      throw ParseError("only = and != apply to '" + term.field + "'", op_pos);
    }
    q.terms.push_back(std::move(term));
  }
  return q;
}

bool Query::matches(const ArtifactMetadata& record) const {
  if (terms.empty()) return true;
  const Json j = record;
  for (const auto& t : terms) {
    const Json* v = resolve(j, t.field);
    bool ok = false;
    if (integer_fields().count(t.field)) {
      if (t.value == "null" || !v || v->is_null()) {
        const bool is_null = !v || v->is_null();
        const bool want_null = t.value == "null";
        ok = t.op == QueryOp::eq ? is_null == want_null
             : t.op == QueryOp::ne ? is_null != want_null
                                   : false;
      } else {
        ok = compare_int(v->get<std::int64_t>(), t.op, *parse_int(t.value));
      }
    } else if (list_fields().count(t.field)) {
      bool found = false;
      if (v && v->is_array()) {
        for (const auto& item : *v) {
          const std::string s = item.is_object() ? item.value("name", "") : item.get<std::string>();
          if (s == t.value) found = true;
        }
      }
      ok = t.op == QueryOp::eq ? found : !found;
    } else {
      const std::string s = (!v || v->is_null()) ? "null" : v->get<std::string>();
      const bool eq = lower(s) == lower(t.value);
      ok = t.op == QueryOp::eq ? eq : !eq;
    }
    if (!ok) return false;
  }
  return true;
}

std::vector<ArtifactMetadata> run_query(const std::vector<ArtifactMetadata>& records,
                                        const Query& query) {
  std::vector<ArtifactMetadata> out;
  for (const auto& r : records) {
    if (query.matches(r)) out.push_back(r);
  }
  return out;
}

// ================================================================ statistics

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::changes: return "changes";
    case Metric::files_changed: return "files_changed";
    case Metric::failing_tests: return "failing_tests";
  }
  return "?";
}

Metric parse_metric(std::string_view t) {
  for (auto m : {Metric::changes, Metric::files_changed, Metric::failing_tests}) {
    if (to_string(m) == t) return m;
  }
  throw Error(ErrorKind::invalid_argument, "unknown metric '" + std::string(t) + "'");
}

HistogramSpec HistogramSpec::defaults(Metric metric) {
  switch (metric) {
    case Metric::changes:
      return {metric, {1, 6, 21, 101, 501, 2001, 5001, 37364}};
    case Metric::files_changed:
      return {metric, {1, 6, 11, 26, 51, 101, 201, 501, 2392}};
    case Metric::failing_tests:
      return {metric, {1, 2, 3, 6, 16, 51, 101, 401, 1827}};
  }
  throw Error(ErrorKind::invalid_argument, "unknown metric");
}

void HistogramSpec::validate() const {
  if (bin_edges.size() < 2) throw Error(ErrorKind::invalid_argument, "need at least two bin edges");
  for (std::size_t i = 1; i < bin_edges.size(); ++i) {
    if (bin_edges[i] <= bin_edges[i - 1]) {
      throw Error(ErrorKind::invalid_argument, "bin edges must be strictly ascending");
    }
  }
}

std::string HistogramSpec::label(std::size_t bin) const {
  const auto lo = bin_edges.at(bin);
  const auto hi = bin_edges.at(bin + 1) - 1;
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

std::optional<std::int64_t> metric_value(const ArtifactMetadata& r, Metric metric) {
  switch (metric) {
    case Metric::changes: return r.num_changes;
    case Metric::files_changed: return r.num_files_changed;
    case Metric::failing_tests:
      if (r.category == Category::with_failed_test) return r.failed.num_tests_failed;
      return std::nullopt;
  }
  return std::nullopt;
}

Histogram stats(const std::vector<ArtifactMetadata>& records, const HistogramSpec& spec) {
  spec.validate();
  Histogram h;
  h.metric = spec.metric;
  for (std::size_t b = 0; b + 1 < spec.bin_edges.size(); ++b) {
    h.bins.push_back({spec.label(b), spec.bin_edges[b], spec.bin_edges[b + 1] - 1, 0});
  }
  for (const auto& r : records) {
    const auto v = metric_value(r, spec.metric);
    if (!v) continue;
    ++h.defined;
    auto it = std::upper_bound(spec.bin_edges.begin(), spec.bin_edges.end(), *v);
    if (it == spec.bin_edges.begin() || it == spec.bin_edges.end()) {
      ++h.overflow;
      h.overflow_tags.push_back(r.image_tag);
      continue;
    }
    ++h.bins[static_cast<std::size_t>(it - spec.bin_edges.begin() - 1)].count;
  }
  return h;
}

std::vector<ErrorFrequency> error_frequency_report(const std::vector<ArtifactMetadata>& records,
                                                   const Language& language, std::size_t top_n) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& r : records) {
    if (r.language.kind() != language.kind() || lower(r.language.name()) != lower(language.name())) {
      continue;
    }
    std::set<std::string> names;
    for (const auto& t : r.error_tags) names.insert(t.name);
    for (const auto& n : names) ++counts[n];
  }
  std::vector<ErrorFrequency> rows;
  for (const auto& [name, n] : counts) rows.push_back({name, n});
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorFrequency& a, const ErrorFrequency& b) {
    return a.artifacts > b.artifacts;
  });
  if (rows.size() > top_n) rows.resize(top_n);
  return rows;
}

// ================================================================ artifacts

void artifact_fetch(const ArtifactStore& store, const std::string& tag, ContainerRuntime& runtime,
                    const fs::path& output_root) {
  const auto record = store.get(tag);
  if (runtime.has_image(tag)) return;
  const fs::path tree = output_root / tag / "artifact";
  if (!fs::is_directory(tree)) {
    throw Error(ErrorKind::artifact_not_found,
                "artifact not found: no image '" + tag + "' and no tree at " + tree.string());
  }
  runtime.import_image(tag, record.base_image, tree);
}

int artifact_shell(const ArtifactStore& store, const std::string& tag, ContainerRuntime& runtime,
                   const std::string& command) {
  store.get(tag);
  if (!runtime.has_image(tag)) {
    throw Error(ErrorKind::artifact_not_found,
                "artifact image '" + tag + "' is not present; run `failpass artifact fetch` first");
  }
  return runtime.shell(tag, {{kTagLabel, tag}}, command);
}

std::size_t artifact_cleanup(const ArtifactStore& store, const std::string& tag,
                             ContainerRuntime& runtime, bool purge) {
  store.get(tag);
  const auto removed = runtime.remove_containers(kTagLabel, tag);
  if (purge && runtime.has_image(tag)) runtime.remove_image(tag);
  return removed;
}

}  // namespace failpass
