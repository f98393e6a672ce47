#include "failpass/analyzer.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "failpass/error.hpp"

namespace failpass {

std::string_view to_string(LogStatus s) {
  switch (s) {
    case LogStatus::passed: return "passed";
    case LogStatus::failed: return "failed";
    case LogStatus::errored: return "errored";
  }
  return "?";
}

std::string_view to_string(BuildSystem b) {
  switch (b) {
    case BuildSystem::Maven: return "Maven";
    case BuildSystem::Gradle: return "Gradle";
    case BuildSystem::Ant: return "Ant";
    case BuildSystem::none_detected: return "none_detected";
  }
  return "?";
}

std::string_view to_string(TestFramework f) {
  switch (f) {
    case TestFramework::JUnit: return "JUnit";
    case TestFramework::testng: return "testng";
    case TestFramework::unittest: return "unittest";
    case TestFramework::unittest2: return "unittest2";
    case TestFramework::nose: return "nose";
    case TestFramework::pytest: return "pytest";
    case TestFramework::none_detected: return "none_detected";
  }
  return "?";
}

LogStatus parse_log_status(std::string_view t) {
  for (auto s : {LogStatus::passed, LogStatus::failed, LogStatus::errored}) {
    if (to_string(s) == t) return s;
  }
  throw Error(ErrorKind::invalid_argument, "unknown log status '" + std::string(t) + "'");
}

BuildSystem parse_build_system(std::string_view t) {
  for (auto b : {BuildSystem::Maven, BuildSystem::Gradle, BuildSystem::Ant,
                 BuildSystem::none_detected}) {
    if (to_string(b) == t) return b;
  }
  throw Error(ErrorKind::invalid_argument, "unknown build system '" + std::string(t) + "'");
}

TestFramework parse_test_framework(std::string_view t) {
  for (auto f : {TestFramework::JUnit, TestFramework::testng, TestFramework::unittest,
                 TestFramework::unittest2, TestFramework::nose, TestFramework::pytest,
                 TestFramework::none_detected}) {
    if (to_string(f) == t) return f;
  }
  throw Error(ErrorKind::invalid_argument, "unknown test framework '" + std::string(t) + "'");
}

void to_json(Json& j, const LogAttributes& v) {
  j = Json{{"status", to_string(v.status)},
           {"os", v.os},
           {"build_system", to_string(v.build_system)},
           {"test_framework", to_string(v.test_framework)},
           {"num_tests_run", v.num_tests_run},
           {"num_tests_failed", v.num_tests_failed},
           {"num_tests_skipped", v.num_tests_skipped},
           {"failed_test_names", v.failed_test_names}};
}

void from_json(const Json& j, LogAttributes& v) {
  v.status = parse_log_status(j.at("status").get<std::string>());
  v.os = j.value("os", "unknown");
  v.build_system = parse_build_system(j.at("build_system").get<std::string>());
  v.test_framework = parse_test_framework(j.at("test_framework").get<std::string>());
  v.num_tests_run = j.at("num_tests_run").get<std::int64_t>();
  v.num_tests_failed = j.at("num_tests_failed").get<std::int64_t>();
  v.num_tests_skipped = j.at("num_tests_skipped").get<std::int64_t>();
  v.failed_test_names = j.value("failed_test_names", std::vector<std::string>{});
}

void to_json(Json& j, const ErrorTag& v) { j = Json{{"name", v.name}, {"count", v.count}}; }

void from_json(const Json& j, ErrorTag& v) {
  v.name = j.at("name").get<std::string>();
  v.count = j.at("count").get<std::int64_t>();
}

// ================================================================ helpers

namespace {

constexpr std::int64_t kCountCap = 1'000'000'000'000;

bool contains(std::string_view s, std::string_view needle) {
  return s.find(needle) != std::string_view::npos;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops leading whitespace and logger/task prefixes such as "[INFO] " or
// "    [junit] ".
std::string_view strip_prefixes(std::string_view s) {
  static constexpr std::string_view kPrefixes[] = {"[INFO]", "[ERROR]", "[WARNING]",
                                                   "[WARN]", "[junit]", "[testng]"};
  s = trim(s);
  for (bool changed = true; changed;) {
    changed = false;
    for (auto p : kPrefixes) {
      if (starts_with(s, p)) {
        s = trim(s.substr(p.size()));
        changed = true;
      }
    }
  }
  return s;
}

std::optional<std::int64_t> read_int(std::string_view s, std::size_t pos) {
  while (pos < s.size() && s[pos] == ' ') ++pos;
  if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) return std::nullopt;
  std::int64_t v = 0;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
    v = std::min(kCountCap, v * 10 + (s[pos] - '0'));
    ++pos;
  }
  return v;
}

std::optional<std::int64_t> count_after(std::string_view s, std::string_view key) {
  auto pos = s.find(key);
  if (pos == std::string_view::npos) return std::nullopt;
  return read_int(s, pos + key.size());
}

std::int64_t sat_add(std::int64_t a, std::int64_t b) { return std::min(kCountCap, a + b); }

// "method(pkg.Class)" -> "pkg.Class.method"; other shapes are kept, minus a
// trailing "()".
std::string canonical_java_name(std::string_view raw) {
  raw = trim(raw);
  auto open = raw.find('(');
  if (open != std::string_view::npos && open > 0 && ends_with(raw, ")") &&
      open + 2 < raw.size()) {
    auto method = raw.substr(0, open);
    auto cls = raw.substr(open + 1, raw.size() - open - 2);
    if (!contains(method, " ") && !contains(cls, " ") && contains(cls, ".")) {
      return std::string(cls) + "." + std::string(method);
    }
  }
  if (ends_with(raw, "()")) raw.remove_suffix(2);
  return std::string(raw);
}

// "test_x (mod.Class)" -> "mod.Class.test_x"; "test_x (mod.Class.test_x)"
// -> "mod.Class.test_x"; anything else verbatim.
std::string canonical_python_name(std::string_view raw) {
  raw = trim(raw);
  auto open = raw.find(" (");
  if (open != std::string_view::npos && ends_with(raw, ")")) {
    auto method = raw.substr(0, open);
    auto inner = raw.substr(open + 2, raw.size() - open - 3);
    if (!method.empty() && !contains(method, " ") && !contains(method, ":") &&
        !contains(inner, " ") && !inner.empty()) {
      if (ends_with(inner, std::string(".") + std::string(method))) return std::string(inner);
      return std::string(inner) + "." + std::string(method);
    }
  }
  return std::string(raw);
}

// ------------------------------------------------------------- markers

bool is_gradle_event(std::string_view s) {
  s = trim(s);
  if (starts_with(s, ">") || !contains(s, " > ")) return false;
  return ends_with(s, " FAILED") || ends_with(s, " PASSED") || ends_with(s, " SKIPPED");
}

bool is_surefire_running_class(std::string_view s) {
  s = strip_prefixes(s);
  if (!starts_with(s, "Running ")) return false;
  auto name = trim(s.substr(8));
  return !name.empty() && contains(name, ".") && !contains(name, " ");
}

bool is_unittest_ran_line(std::string_view s) {
  s = trim(s);
  if (!starts_with(s, "Ran ")) return false;
  auto n = read_int(s, 4);
  return n && (contains(s, " tests in ") || contains(s, " test in "));
}

bool mentions_module_run(std::string_view s, std::string_view module) {
  auto pos = s.find(std::string("-m ") + std::string(module));
  if (pos == std::string_view::npos) return false;
  auto end = pos + 3 + module.size();
  return end >= s.size() || s[end] == ' ' || s[end] == '\t';
}

std::optional<BuildSystem> build_marker(std::string_view line) {
  auto s = trim(line);
  if (contains(s, "Scanning for projects...") || contains(s, "Apache Maven ") ||
      starts_with(s, "$ mvn ") || s == "$ mvn" || starts_with(s, "$ ./mvnw") ||
      contains(s, "[INFO] BUILD SUCCESS") || contains(s, "[INFO] BUILD FAILURE") ||
      contains(s, "Reactor Summary") || contains(s, "The command \"mvn ")) {
    return BuildSystem::Maven;
  }
  if (starts_with(s, "$ gradle") || starts_with(s, "$ ./gradlew") ||
      contains(s, "Welcome to Gradle") || starts_with(s, "> Task :") ||
      starts_with(s, "BUILD SUCCESSFUL in ") || contains(s, "services.gradle.org") ||
      contains(s, "The command \"./gradlew") || contains(s, "The command \"gradle")) {
    return BuildSystem::Gradle;
  }
  if (starts_with(s, "Buildfile: ") || starts_with(s, "$ ant ") || s == "$ ant" ||
      contains(s, "The command \"ant ")) {
    return BuildSystem::Ant;
  }
  return std::nullopt;
}

std::optional<TestFramework> java_framework_marker(std::string_view line) {
  auto s = strip_prefixes(line);
  auto raw = trim(line);
  if (contains(s, "Running TestSuite") || contains(s, "Configuring TestNG") ||
      starts_with(raw, "[testng]") || contains(s, "Gradle suite > Gradle test >") ||
      starts_with(s, "Total tests run:")) {
    return TestFramework::testng;
  }
  if (starts_with(s, "Tests run:") || starts_with(raw, "[junit]") || is_surefire_running_class(s) ||
      is_gradle_event(s) || contains(s, " tests completed, ") || starts_with(s, "Testcase: ")) {
    return TestFramework::JUnit;
  }
  return std::nullopt;
}

std::optional<TestFramework> python_framework_marker(std::string_view line) {
  auto s = trim(line);
  if (contains(s, "test session starts") || (starts_with(s, "platform ") && contains(s, "pytest-"))) {
    return TestFramework::pytest;
  }
  if (contains(s, "nosetests") || mentions_module_run(s, "nose")) return TestFramework::nose;
  if (contains(s, "unittest2") || starts_with(s, "$ unit2") || contains(s, " unit2 ")) {
    return TestFramework::unittest2;
  }
  if (mentions_module_run(s, "unittest") || is_unittest_ran_line(s)) return TestFramework::unittest;
  return std::nullopt;
}

template <typename Marker>
auto first_marker(const std::vector<std::string>& lines, Marker marker)
    -> decltype(marker(std::string_view{})) {
  for (const auto& l : lines) {
    if (auto m = marker(l)) return m;
  }
  return std::nullopt;
}

}  // namespace

// ================================================================ normalize

std::vector<std::string> normalize_log(std::string_view raw) {
  // 1. ANSI escapes out, newlines kept.
  std::string clean;
  clean.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c != '\x1b') {
      clean.push_back(c);
      continue;
    }
    if (i + 1 >= raw.size()) break;
    const char kind = raw[i + 1];
    if (kind == '[') {  // CSI: parameters then a final byte in 0x40..0x7e
      std::size_t j = i + 2;
      while (j < raw.size() && !(raw[j] >= 0x40 && raw[j] <= 0x7e) && raw[j] != '\n') ++j;
      i = (j < raw.size() && raw[j] != '\n') ? j : j - 1;
    } else if (kind == ']') {  // OSC: up to BEL or ESC '\'
      std::size_t j = i + 2;
      while (j < raw.size() && raw[j] != '\x07' && raw[j] != '\n' &&
             !(raw[j] == '\x1b' && j + 1 < raw.size() && raw[j + 1] == '\\')) {
        ++j;
      }
      if (j < raw.size() && raw[j] == '\x1b') ++j;
      i = (j < raw.size() && raw[j] != '\n') ? j : j - 1;
    } else {
      ++i;  // two-byte escape
    }
  }

  // 2. Lines; CR overwrites keep the last non-empty segment.
  std::vector<std::string> lines;
  std::size_t start = 0;
  auto strip_ci_markers = [](std::string_view seg) {
    for (std::string_view marker : {"travis_fold:start:", "travis_fold:end:",
                                    "travis_time:start:", "travis_time:end:"}) {
      while (starts_with(seg, marker)) {
        auto end = seg.find_first_of(" \t", marker.size());
        seg = end == std::string_view::npos ? std::string_view{} : seg.substr(end + 1);
      }
    }
    return seg;
  };
  while (start <= clean.size()) {
    auto end = clean.find('\n', start);
    if (end == std::string::npos) end = clean.size();
    std::string_view line(clean.data() + start, end - start);
    while (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::string_view kept;
    std::size_t seg_start = 0;
    while (seg_start <= line.size()) {
      auto cr = line.find('\r', seg_start);
      if (cr == std::string_view::npos) cr = line.size();
      auto seg = strip_ci_markers(line.substr(seg_start, cr - seg_start));
      if (!seg.empty()) kept = seg;
      seg_start = cr + 1;
    }
    lines.emplace_back(kept);
    if (end == clean.size()) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

BuildSystem detect_build_system(std::string_view log) {
  return first_marker(normalize_log(log), build_marker).value_or(BuildSystem::none_detected);
}

TestFramework detect_test_framework(std::string_view log) {
  auto any = [](std::string_view l) -> std::optional<TestFramework> {
    if (auto f = java_framework_marker(l)) return f;
    return python_framework_marker(l);
  };
  return first_marker(normalize_log(log), any).value_or(TestFramework::none_detected);
}

// ================================================================ parsers

namespace {

struct JUnitCounts {
  std::int64_t run = 0, failures = 0, errors = 0, skipped = 0;
};

std::optional<JUnitCounts> parse_tests_run(std::string_view s) {
  auto run = count_after(s, "Tests run:");
  auto failures = count_after(s, "Failures:");
  if (!run || !failures) return std::nullopt;
  JUnitCounts c;
  c.run = *run;
  c.failures = *failures;
  c.errors = count_after(s, "Errors:").value_or(0);
  c.skipped = count_after(s, "Skipped:").value_or(0);
  return c;
}

// Surefire and Ant's junit task: aggregate "Tests run:" lines when present,
// per-class lines ("Time elapsed") otherwise.
void accumulate_tests_run(const std::vector<std::string>& lines, TestSection& out) {
  JUnitCounts agg, per_class;
  bool have_agg = false, have_class = false;
  for (const auto& line : lines) {
    auto s = strip_prefixes(line);
    if (!starts_with(s, "Tests run:")) continue;
    auto c = parse_tests_run(s);
    if (!c) continue;
    JUnitCounts& dst = (contains(s, "Time elapsed") || contains(s, " - in ")) ? per_class : agg;
    (&dst == &agg ? have_agg : have_class) = true;
    dst.run = sat_add(dst.run, c->run);
    dst.failures = sat_add(dst.failures, c->failures);
    dst.errors = sat_add(dst.errors, c->errors);
    dst.skipped = sat_add(dst.skipped, c->skipped);
  }
  if (!have_agg && !have_class) return;
  const JUnitCounts& c = have_agg ? agg : per_class;
  out.found = true;
  out.run = c.run;
  out.failed = sat_add(c.failures, c.errors);
  out.skipped = c.skipped;
}

TestSection parse_surefire(const std::vector<std::string>& lines) {
  TestSection out;
  accumulate_tests_run(lines, out);
  for (const auto& line : lines) {
    auto s = strip_prefixes(line);
    if (starts_with(s, "Tests run:")) continue;
    if (!contains(s, "<<< FAILURE!") && !contains(s, "<<< ERROR!")) continue;
    auto cut = s.find(" Time elapsed");
    if (cut == std::string_view::npos) continue;
    auto name = trim(s.substr(0, cut));
    if (ends_with(name, " --")) name = trim(name.substr(0, name.size() - 3));
    if (!name.empty()) out.failed_names.push_back(canonical_java_name(name));
  }
  return out;
}

TestSection parse_ant_junit(const std::vector<std::string>& lines) {
  TestSection out;
  accumulate_tests_run(lines, out);
  for (const auto& line : lines) {
    auto s = strip_prefixes(line);
    if (!starts_with(s, "Testcase: ")) continue;
    auto rest = s.substr(10);
    auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) continue;
    auto verdict = rest.substr(colon + 1);
    if (contains(verdict, "FAILED") || contains(verdict, "Caused an ERROR")) {
      out.failed_names.push_back(canonical_java_name(rest.substr(0, colon)));
    }
  }
  return out;
}

TestSection parse_testng_summary(const std::vector<std::string>& lines) {
  TestSection out;
  for (const auto& line : lines) {
    auto s = strip_prefixes(line);
    if (starts_with(s, "Total tests run:")) {
      auto run = count_after(s, "Total tests run:");
      auto failures = count_after(s, "Failures:");
      if (!run || !failures) continue;
      out.found = true;
      out.run = sat_add(out.run, *run);
      out.failed = sat_add(out.failed, *failures);
      out.skipped = sat_add(out.skipped, count_after(s, "Skips:").value_or(0));
    } else if (starts_with(s, "FAILED: ")) {
      auto name = trim(s.substr(8));
      if (!name.empty()) out.failed_names.emplace_back(name);
    }
  }
  return out;
}

TestSection parse_gradle(const std::vector<std::string>& lines) {
  TestSection out;
  std::int64_t passed = 0, failed = 0, skipped = 0;
  bool have_events = false, have_summary = false;
  TestSection summary;
  for (const auto& line : lines) {
    auto s = trim(line);
    if (contains(s, " tests completed, ") || contains(s, " test completed, ")) {
      auto total = read_int(s, 0);
      auto fails = count_after(s, "completed, ");
      if (total && fails) {
        have_summary = true;
        summary.run = sat_add(summary.run, *total);
        summary.failed = sat_add(summary.failed, *fails);
        auto sk = s.find(" skipped");
        if (sk != std::string_view::npos) {
          auto comma = s.rfind(", ", sk);
          if (comma != std::string_view::npos) {
            summary.skipped = sat_add(summary.skipped, read_int(s, comma + 2).value_or(0));
          }
        }
      }
      continue;
    }
    if (!is_gradle_event(s)) continue;
    have_events = true;
    const auto space = s.rfind(' ');
    const auto verdict = s.substr(space + 1);
    std::vector<std::string_view> parts;
    std::string_view body = s.substr(0, space);
    std::size_t start = 0;
    while (start <= body.size()) {
      auto sep = body.find(" > ", start);
      if (sep == std::string_view::npos) sep = body.size();
      auto part = trim(body.substr(start, sep - start));
      if (part != "Gradle suite" && part != "Gradle test" && !part.empty()) parts.push_back(part);
      start = sep + 3;
    }
    if (verdict == "PASSED") ++passed;
    if (verdict == "SKIPPED") ++skipped;
    if (verdict == "FAILED") {
      ++failed;
      if (parts.size() >= 2) {
        out.failed_names.push_back(std::string(parts[parts.size() - 2]) + "." +
                                   canonical_java_name(parts.back()));
      } else if (parts.size() == 1) {
        out.failed_names.push_back(canonical_java_name(parts.front()));
      }
    }
  }
  if (have_summary) {
    out.found = true;
    out.run = summary.run;
    out.failed = summary.failed;
    out.skipped = summary.skipped;
  } else if (have_events) {
    out.found = true;
    out.run = passed + failed + skipped;
    out.failed = failed;
    out.skipped = skipped;
  }
  return out;
}

// unittest, unittest2 and nose share the runner output format.
TestSection parse_unittest_style(const std::vector<std::string>& lines) {
  TestSection out;
  for (const auto& line : lines) {
    auto s = trim(line);
    if (is_unittest_ran_line(s)) {
      out.found = true;
      out.run = sat_add(out.run, read_int(s, 4).value_or(0));
    } else if (starts_with(s, "FAILED (") || s == "OK" || starts_with(s, "OK (")) {
      out.failed = sat_add(out.failed, count_after(s, "failures=").value_or(0));
      out.failed = sat_add(out.failed, count_after(s, "errors=").value_or(0));
      out.skipped = sat_add(out.skipped, count_after(s, "skipped=").value_or(0));
    } else if (starts_with(s, "FAIL: ")) {
      out.failed_names.push_back(canonical_python_name(s.substr(6)));
    } else if (starts_with(s, "ERROR: ")) {
      out.failed_names.push_back(canonical_python_name(s.substr(7)));
    }
  }
  return out;
}

bool is_pytest_summary(std::string_view s) {
  return starts_with(s, "=") && ends_with(s, "=") && contains(s, " in ") &&
         (contains(s, " passed") || contains(s, " failed") || contains(s, " error") ||
          contains(s, " skipped") || contains(s, "no tests ran") || contains(s, " xfailed") ||
          contains(s, " xpassed") || contains(s, " deselected"));
}

TestSection parse_pytest(const std::vector<std::string>& lines) {
  TestSection out;
  std::vector<std::string> short_names, verbose_names;
  for (const auto& line : lines) {
    auto s = trim(line);
    if (is_pytest_summary(s)) {
      auto body = trim(s.substr(s.find_first_not_of('=')));
      body = body.substr(0, body.find(" in "));
      std::size_t start = 0;
      while (start < body.size()) {
        auto comma = body.find(',', start);
        if (comma == std::string_view::npos) comma = body.size();
        auto item = trim(body.substr(start, comma - start));
        auto n = read_int(item, 0);
        auto sp = item.find(' ');
        if (n && sp != std::string_view::npos) {
          auto word = trim(item.substr(sp + 1));
          if (word == "passed" || word == "xfailed" || word == "xpassed") {
            out.run = sat_add(out.run, *n);
          } else if (word == "failed" || word == "error" || word == "errors") {
            out.run = sat_add(out.run, *n);
            out.failed = sat_add(out.failed, *n);
          } else if (word == "skipped") {
            out.run = sat_add(out.run, *n);
            out.skipped = sat_add(out.skipped, *n);
          }
        }
        start = comma + 1;
      }
      out.found = true;
      continue;
    }
    if (starts_with(s, "FAILED ") || starts_with(s, "ERROR ")) {
      auto rest = trim(s.substr(s.find(' ') + 1));
      auto dash = rest.find(" - ");
      auto name = trim(rest.substr(0, dash));
      if (!name.empty() && !contains(name, " ")) short_names.emplace_back(name);
      continue;
    }
    auto sp = s.find(' ');
    if (sp != std::string_view::npos && contains(s.substr(0, sp), "::")) {
      auto verdict = trim(s.substr(sp + 1));
      if (starts_with(verdict, "FAILED") || starts_with(verdict, "ERROR")) {
        verbose_names.emplace_back(s.substr(0, sp));
      }
    }
  }
  out.failed_names = short_names.empty() ? std::move(verbose_names) : std::move(short_names);
  return out;
}

// ------------------------------------------------------------- top level

struct StatusScan {
  std::optional<std::int64_t> exit_code;
  bool setup_phase_failed = false;
  bool stopped = false;
  bool tool_failure = false;
  bool tool_success = false;
};

StatusScan scan_status(const std::vector<std::string>& lines) {
  StatusScan scan;
  for (const auto& line : lines) {
    auto s = trim(line);
    if (starts_with(s, "Done. Your build exited with ")) {
      if (auto code = read_int(s, 29)) {
        scan.exit_code = *code;
        scan.setup_phase_failed = scan.setup_phase_failed && *code != 0;
      }
      continue;
    }
    if (contains(s, "failed and exited with") && contains(s, " during ")) {
      auto phase = trim(s.substr(s.rfind(" during ") + 8));
      if (ends_with(phase, ".")) phase.remove_suffix(1);
      if (phase.empty() || phase == "before_install" || phase == "install" ||
          phase == "before_script") {
        scan.setup_phase_failed = true;
      }
      continue;
    }
    if (contains(s, "Your build has been stopped.") ||
        contains(s, "exceeded the maximum time limit") ||
        starts_with(s, "No output has been received in the last") ||
        s == "The build has been terminated") {
      scan.stopped = true;
    }
    auto stripped = strip_prefixes(s);
    if (starts_with(stripped, "BUILD FAILURE") || starts_with(stripped, "BUILD FAILED")) {
      scan.tool_failure = true;
    } else if (starts_with(stripped, "BUILD SUCCESS")) {
      scan.tool_success = true;
    }
  }
  return scan;
}

LogStatus decide_status(const StatusScan& scan, const TestSection& tests) {
  if (scan.stopped) return LogStatus::errored;
  if (scan.exit_code) {
    if (*scan.exit_code == 0) return LogStatus::passed;
    return scan.setup_phase_failed ? LogStatus::errored : LogStatus::failed;
  }
  if (scan.tool_failure) return LogStatus::failed;
  if (scan.tool_success) return LogStatus::passed;
  if (tests.found) return tests.failed > 0 ? LogStatus::failed : LogStatus::passed;
  return LogStatus::errored;
}

std::string extract_os(const std::vector<std::string>& lines) {
  bool in_details = false;
  for (const auto& line : lines) {
    auto s = trim(line);
    if (s == "Operating System Details") {
      in_details = true;
      continue;
    }
    if (in_details && starts_with(s, "Description:")) {
      auto v = trim(s.substr(12));
      if (!v.empty()) return std::string(v);
    }
  }
  return "unknown";
}

}  // namespace

// ================================================================ registry

void ParserRegistry::add(Language::Kind language, BuildSystem build_system,
                         TestFramework framework, TestParser parser) {
  parsers_[{language, build_system, framework}] = std::move(parser);
}

const TestParser* ParserRegistry::find(Language::Kind language, BuildSystem build_system,
                                       TestFramework framework) const {
  if (auto it = parsers_.find({language, build_system, framework}); it != parsers_.end()) {
    return &it->second;
  }
  if (auto it = parsers_.find({language, BuildSystem::none_detected, framework});
      it != parsers_.end()) {
    return &it->second;
  }
  return nullptr;
}

const ParserRegistry& ParserRegistry::defaults() {
  static const ParserRegistry registry = [] {
    using K = Language::Kind;
    ParserRegistry r;
    r.add(K::java, BuildSystem::Maven, TestFramework::JUnit, parse_surefire);
    r.add(K::java, BuildSystem::Maven, TestFramework::testng, parse_surefire);
    r.add(K::java, BuildSystem::Gradle, TestFramework::JUnit, parse_gradle);
    r.add(K::java, BuildSystem::Gradle, TestFramework::testng, parse_gradle);
    r.add(K::java, BuildSystem::Ant, TestFramework::JUnit, parse_ant_junit);
    r.add(K::java, BuildSystem::Ant, TestFramework::testng, parse_testng_summary);
    r.add(K::java, BuildSystem::none_detected, TestFramework::JUnit, parse_surefire);
    r.add(K::java, BuildSystem::none_detected, TestFramework::testng, parse_testng_summary);
    r.add(K::python, BuildSystem::none_detected, TestFramework::unittest, parse_unittest_style);
    r.add(K::python, BuildSystem::none_detected, TestFramework::unittest2, parse_unittest_style);
    r.add(K::python, BuildSystem::none_detected, TestFramework::nose, parse_unittest_style);
    r.add(K::python, BuildSystem::none_detected, TestFramework::pytest, parse_pytest);
    return r;
  }();
  return registry;
}

// ================================================================ analyze

LogAttributes analyze(std::string_view log, const Language& language,
                      const ParserRegistry& registry) {
  if (language.kind() == Language::Kind::other) {
    throw Error(ErrorKind::unsupported_language,
                "unsupported language '" + language.name() + "' (Java and Python only)");
  }
  const auto lines = normalize_log(log);
  LogAttributes attrs;
  attrs.os = extract_os(lines);

  TestFramework framework = TestFramework::none_detected;
  if (language.kind() == Language::Kind::java) {
    attrs.build_system = first_marker(lines, build_marker).value_or(BuildSystem::none_detected);
    framework = first_marker(lines, java_framework_marker).value_or(TestFramework::none_detected);
  } else {
    framework = first_marker(lines, python_framework_marker).value_or(TestFramework::none_detected);
  }

  TestSection tests;
  if (framework != TestFramework::none_detected) {
    if (const TestParser* parser = registry.find(language.kind(), attrs.build_system, framework)) {
      tests = (*parser)(lines);
    }
  }
  const bool consistent = tests.found && tests.failed <= tests.run && tests.skipped <= tests.run;
  if (consistent) {
    attrs.test_framework = framework;
    attrs.num_tests_run = tests.run;
    attrs.num_tests_failed = tests.failed;
    attrs.num_tests_skipped = tests.skipped;
    // Names that disagree with the failure count are unreliable; keep counts only.
    if (static_cast<std::int64_t>(tests.failed_names.size()) == tests.failed) {
      attrs.failed_test_names = tests.failed_names;
    }
  } else {
    tests = TestSection{};
  }
  attrs.status = decide_status(scan_status(lines), tests);
  return attrs;
}

bool compare(const LogAttributes& a, const LogAttributes& b) {
  if (a.status != b.status || a.build_system != b.build_system ||
      a.test_framework != b.test_framework || a.num_tests_run != b.num_tests_run ||
      a.num_tests_failed != b.num_tests_failed || a.num_tests_skipped != b.num_tests_skipped) {
    return false;
  }
  auto x = a.failed_test_names;
  auto y = b.failed_test_names;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

// ================================================================ error tags

std::vector<ErrorTag> extract_error_tags(std::string_view log, const Language& language) {
  const bool java = language.kind() == Language::Kind::java;
  auto ident = [java](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || (java && c == '$');
  };
  std::map<std::string, std::int64_t> counts;
  for (const auto& line : normalize_log(log)) {
    std::size_t i = 0;
    while (i < line.size()) {
      if (!ident(line[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && ident(line[j])) ++j;
      std::string_view token(line.data() + i, j - i);
      const bool capitalised = token.front() >= 'A' && token.front() <= 'Z';
      if (capitalised && ((ends_with(token, "Exception") && token.size() > 9) ||
                          (ends_with(token, "Error") && token.size() > 5))) {
        ++counts[std::string(token)];
      }
      i = j;
    }
  }
  std::vector<ErrorTag> tags;
  for (auto& [name, count] : counts) tags.push_back(ErrorTag{name, count});
  std::stable_sort(tags.begin(), tags.end(),
                   [](const ErrorTag& a, const ErrorTag& b) { return a.count > b.count; });
  return tags;
}

}  // namespace failpass
