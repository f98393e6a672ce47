#pragma once

// Build log analysis. A top-level pass extracts language-agnostic items
// (job status, operating system) and hands the test section to a parser
// chosen by (language, build system, test framework).
//
// Status rules, applied to the normalized log:
//   "Done. Your build exited with 0."        -> passed
//   "Done. Your build exited with N." (N!=0) -> errored if a
//       `The command "..." failed and exited with K during <phase>.` line
//       names before_install, install, before_script or "."; else failed
//   stopped, time-limit or no-output termination -> errored
//   no terminal line: BUILD SUCCESS(FUL)/BUILD FAILURE/FAILED or a test
//       summary decides; otherwise errored (the job never completed).

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "failpass/model.hpp"

namespace failpass {

enum class LogStatus { passed, failed, errored };
enum class BuildSystem { Maven, Gradle, Ant, none_detected };
enum class TestFramework { JUnit, testng, unittest, unittest2, nose, pytest, none_detected };

std::string_view to_string(LogStatus);
std::string_view to_string(BuildSystem);
std::string_view to_string(TestFramework);
LogStatus parse_log_status(std::string_view);
BuildSystem parse_build_system(std::string_view);
TestFramework parse_test_framework(std::string_view);

struct LogAttributes {
  LogStatus status = LogStatus::errored;
  std::string os = "unknown";
  BuildSystem build_system = BuildSystem::none_detected;
  TestFramework test_framework = TestFramework::none_detected;
  std::int64_t num_tests_run = 0;
  std::int64_t num_tests_failed = 0;
  std::int64_t num_tests_skipped = 0;
  std::vector<std::string> failed_test_names;

  bool operator==(const LogAttributes&) const = default;
};

void to_json(Json& j, const LogAttributes& v);
void from_json(const Json& j, LogAttributes& v);

struct ErrorTag {
  std::string name;
  std::int64_t count = 0;

  bool operator==(const ErrorTag&) const = default;
};

void to_json(Json& j, const ErrorTag& v);
void from_json(const Json& j, ErrorTag& v);

// Splits into lines and removes ANSI escape sequences, carriage-return
// progress overwrites (only the last segment of a line survives), and CI
// fold/timing markers.
std::vector<std::string> normalize_log(std::string_view raw);

// Earliest banner wins; none_detected when no banner is present.
BuildSystem detect_build_system(std::string_view log);
// Earliest framework marker wins, over both Java and Python frameworks.
TestFramework detect_test_framework(std::string_view log);

// Counts and failed-test names from one test section.
struct TestSection {
  std::int64_t run = 0;
  std::int64_t failed = 0;
  std::int64_t skipped = 0;
  std::vector<std::string> failed_names;
  bool found = false;  // a summary or per-test result was recognised
};

using TestParser = std::function<TestSection(const std::vector<std::string>& lines)>;

// Open registry: adding support for a framework is one add() call.
// A parser registered with BuildSystem::none_detected serves any build
// system of that language that has no exact registration.
class ParserRegistry {
 public:
  void add(Language::Kind language, BuildSystem build_system, TestFramework framework,
           TestParser parser);
  const TestParser* find(Language::Kind language, BuildSystem build_system,
                         TestFramework framework) const;

  // Maven/Gradle/Ant x JUnit/testng; unittest/unittest2/nose/pytest.
  static const ParserRegistry& defaults();

 private:
  std::map<std::tuple<Language::Kind, BuildSystem, TestFramework>, TestParser> parsers_;
};

// Throws Error(unsupported_language) unless language is Java or Python.
// Never throws on log content: unrecognised test output yields zero counts
// and test_framework none_detected.
LogAttributes analyze(std::string_view log, const Language& language,
                      const ParserRegistry& registry = ParserRegistry::defaults());

// Status, build system, test framework, the three counts and the failed
// test names (as a multiset) must agree.
bool compare(const LogAttributes& original, const LogAttributes& reproduced);

// Exception/error identifiers (a capitalised name ending in Exception or
// Error; Java names may contain '$'), counted per distinct simple name and
// sorted by descending count, then name.
std::vector<ErrorTag> extract_error_tags(std::string_view log, const Language& language);

}  // namespace failpass
