// failpass: mine, filter and reproduce fail-pass CI pairs; query and run the
// resulting artifacts.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <mutex>
#include <sstream>

#include "failpass/analyzer.hpp"
#include "failpass/connector.hpp"
#include "failpass/error.hpp"
#include "failpass/filter.hpp"
#include "failpass/git.hpp"
#include "failpass/miner.hpp"
#include "failpass/reproducer.hpp"
#include "failpass/runtime.hpp"
#include "failpass/serialize.hpp"
#include "failpass/store.hpp"

namespace fs = std::filesystem;
using namespace failpass;

namespace {

struct BackendFlags {
  std::string fixture;
  std::string ci_url = "https://api.travis-ci.org";
  std::string codehost_url = "https://api.github.com";
  std::string clone_cache;

  void attach(CLI::App* cmd) {
    cmd->add_option("--fixture", fixture, "Fixture directory instead of live services");
    cmd->add_option("--ci-url", ci_url, "CI service base URL")->capture_default_str();
    cmd->add_option("--codehost-url", codehost_url, "Code host base URL")->capture_default_str();
    cmd->add_option("--clone-cache", clone_cache, "Directory for cached repository mirrors");
  }

  Backend backend() const {
    BackendOptions o;
    if (!fixture.empty()) o.fixture_dir = fixture;
    o.ci_url = ci_url;
    o.codehost_url = codehost_url;
    return make_backend(o);
  }

  fs::path cache_root() const {
    if (!clone_cache.empty()) return clone_cache;
    if (const char* d = std::getenv("FAILPASS_CACHE_DIR"); d && *d) return d;
    const char* home = std::getenv("HOME");
    return fs::path(home && *home ? home : "/tmp") / ".cache" / "failpass" / "clones";
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Appends JSON lines to a file, or stdout for "-".
class JsonlSink {
 public:
  explicit JsonlSink(const std::string& path) {
    if (path != "-") {
      if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
      file_.open(path, std::ios::trunc);
      if (!file_) throw Error(ErrorKind::io, "cannot write " + path);
    }
  }
  void write(const Json& row) {
    std::lock_guard lock(mutex_);
    std::ostream& out = file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout;
    out << row.dump() << "\n" << std::flush;
  }

 private:
  std::ofstream file_;
  std::mutex mutex_;
};

Language language_arg(const std::string& text) {
  auto lang = Language::parse(text);
  if (lang.kind() == Language::Kind::other) {
    throw Error(ErrorKind::unsupported_language, "unsupported language '" + text + "'");
  }
  return lang;
}

std::vector<std::int64_t> parse_edges(const std::string& text) {
  std::vector<std::int64_t> edges;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      edges.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_argument, "bad bin edge '" + item + "'");
    }
  }
  return edges;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::configuration:
    case ErrorKind::parse:
    case ErrorKind::unsupported_language:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine, filter, reproduce and package fail-pass CI build pairs"};
  app.require_subcommand(1);

  // ------------------------------------------------------------------ mine
  auto* mine_cmd = app.add_subcommand("mine", "Mine fail-pass job pairs from build histories");
  std::vector<std::string> slugs;
  std::string pairs_out = "-";
  BackendFlags mine_backend;
  mine_cmd->add_option("slugs", slugs, "Projects as owner/name")->required();
  mine_cmd->add_option("--out", pairs_out, "Pairs JSONL output ('-' for stdout)");
  mine_backend.attach(mine_cmd);

  // ------------------------------------------------------------------ filter
  auto* filter_cmd = app.add_subcommand("filter", "Keep pairs that can be reproduced");
  std::string filter_pairs, catalog_path = "data/images.json", verdicts_out = "-", counts_out;
  std::string cutoff{kDefaultDockerCutoff}, container_pattern{kDefaultContainerPattern};
  std::size_t filter_jobs = 1;
  BackendFlags filter_backend;
  filter_cmd->add_option("--pairs", filter_pairs, "Pairs JSONL from `mine`")->required();
  filter_cmd->add_option("--catalog", catalog_path, "Base-image catalog")->capture_default_str();
  filter_cmd->add_option("--out", verdicts_out, "Verdicts JSONL output ('-' for stdout)");
  filter_cmd->add_option("--counts", counts_out, "Stage counts JSONL output (default stderr)");
  filter_cmd->add_option("--docker-cutoff", cutoff, "Container era start (UTC)")->capture_default_str();
  filter_cmd->add_option("--container-pattern", container_pattern, "Container worker name regex")
      ->capture_default_str();
  filter_cmd->add_option("--jobs", filter_jobs, "Parallel workers")->check(CLI::PositiveNumber);
  filter_backend.attach(filter_cmd);

  // ------------------------------------------------------------------ reproduce
  auto* repro_cmd = app.add_subcommand("reproduce", "Reproduce filtered pairs in containers");
  std::string verdicts_in, records_out = "-", output_dir = "output", runtime_kind = "auto";
  std::string runtime_dir, work_dir;
  std::optional<std::string> repro_store;
  int repeats = 5;
  long timeout_s = 1800;
  std::size_t repro_jobs = 1;
  bool no_package = false;
  BackendFlags repro_backend;
  repro_cmd->add_option("--verdicts", verdicts_in, "Verdicts JSONL from `filter`")->required();
  repro_cmd->add_option("--repeats", repeats, "Attempts per pair")->capture_default_str()->check(CLI::PositiveNumber);
  repro_cmd->add_option("--timeout-s", timeout_s, "Per-job timeout in seconds")->capture_default_str()->check(CLI::PositiveNumber);
  repro_cmd->add_option("--jobs", repro_jobs, "Pairs reproduced in parallel")->check(CLI::PositiveNumber);
  repro_cmd->add_option("--out", records_out, "Reproduction records JSONL ('-' for stdout)");
  repro_cmd->add_option("--output-dir", output_dir, "Reproduced logs and artifact trees")->capture_default_str();
  repro_cmd->add_option("--runtime", runtime_kind, "docker, local or auto")->capture_default_str();
  repro_cmd->add_option("--runtime-dir", runtime_dir, "Local runtime state directory");
  repro_cmd->add_option("--work-dir", work_dir, "Scratch directory for worktrees");
  repro_cmd->add_option("--store", repro_store, "Artifact store to persist reproduced pairs into");
  repro_cmd->add_flag("--no-package", no_package, "Do not build artifact images");
  repro_backend.attach(repro_cmd);

  // ------------------------------------------------------------------ analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Parse a build log");
  std::string log_file, language_text;
  bool as_json = false, with_tags = false;
  analyze_cmd->add_option("log", log_file, "Log file")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--language", language_text, "java or python")->required();
  analyze_cmd->add_flag("--json", as_json, "Print the attributes as JSON");
  analyze_cmd->add_flag("--error-tags", with_tags, "Print exception/error tags instead");

  // ------------------------------------------------------------------ stats
  auto* stats_cmd = app.add_subcommand("stats", "Histograms and error rankings over the store");
  std::optional<std::string> stats_store;
  std::string metric_text = "all", edges_text, errors_language;
  std::size_t top_n = 10;
  stats_cmd->add_option("--store", stats_store, "Store file (default $FAILPASS_STORE)");
  stats_cmd->add_option("--metric", metric_text, "changes, files_changed, failing_tests or all")
      ->capture_default_str();
  stats_cmd->add_option("--edges", edges_text, "Comma-separated bin edges (lower bounds + end)");
  stats_cmd->add_option("--errors", errors_language, "Rank error names for java or python");
  stats_cmd->add_option("--top", top_n, "Rows in the error ranking")->capture_default_str();

  // ------------------------------------------------------------------ query
  auto* query_cmd = app.add_subcommand("query", "Select artifacts, e.g. 'language=Java num_changes<=5'");
  std::optional<std::string> query_store;
  std::vector<std::string> query_terms;
  query_cmd->add_option("expression", query_terms, "Filter terms");
  query_cmd->add_option("--store", query_store, "Store file (default $FAILPASS_STORE)");

  // ------------------------------------------------------------------ artifact
  auto* artifact_cmd = app.add_subcommand("artifact", "Fetch, enter, or clean up an artifact");
  artifact_cmd->require_subcommand(1);
  std::optional<std::string> artifact_store;
  std::string artifact_runtime = "auto", artifact_runtime_dir, artifact_output = "output";
  artifact_cmd->add_option("--store", artifact_store, "Store file (default $FAILPASS_STORE)");
  artifact_cmd->add_option("--runtime", artifact_runtime, "docker, local or auto")->capture_default_str();
  artifact_cmd->add_option("--runtime-dir", artifact_runtime_dir, "Local runtime state directory");
  artifact_cmd->add_option("--output-dir", artifact_output, "Where `reproduce` left artifact trees")
      ->capture_default_str();
  std::string tag, shell_command;
  bool purge = false;
  auto* fetch_cmd = artifact_cmd->add_subcommand("fetch", "Pull or import the artifact image");
  fetch_cmd->add_option("tag", tag, "Image tag")->required();
  auto* shell_cmd = artifact_cmd->add_subcommand("shell", "Start a shell in a fresh container");
  shell_cmd->add_option("tag", tag, "Image tag")->required();
  shell_cmd->add_option("-c,--command", shell_command, "Run a command instead of a shell");
  auto* cleanup_cmd = artifact_cmd->add_subcommand("cleanup", "Remove the artifact's containers");
  cleanup_cmd->add_option("tag", tag, "Image tag")->required();
  cleanup_cmd->add_flag("--purge", purge, "Remove the image as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mine_cmd) {
      auto backend = mine_backend.backend();
      git::CloneCache cache(mine_backend.cache_root());
      JsonlSink out(pairs_out);
      for (const auto& slug : slugs) {
        auto report = mine(slug, *backend.ci, *backend.archive, cache);
        for (const auto& w : report.warnings) std::cerr << "warning: " << slug << ": " << w << "\n";
        for (const auto& p : report.pairs) out.write(p);
        std::cerr << slug << ": " << report.pairs.size() << " job pairs\n";
      }
      return 0;
    }

    if (*filter_cmd) {
      auto backend = filter_backend.backend();
      FilterOptions opts;
      opts.docker_cutoff = parse_utc_or_throw(cutoff);
      opts.container_pattern = container_pattern;
      opts.jobs = filter_jobs;
      const auto catalog = ImageCatalog::load(catalog_path);
      const auto pairs = read_jsonl_as<JobPair>(filter_pairs);
      const auto result = filter(pairs, *backend.ci, catalog, opts);
      JsonlSink out(verdicts_out);
      for (const auto& v : result.verdicts) out.write(v);
      if (!counts_out.empty()) {
        JsonlSink counts(counts_out);
        for (const auto& c : result.counts) counts.write(c);
      } else {
        for (const auto& c : result.counts) std::cerr << Json(c).dump() << "\n";
      }
      return 0;
    }

    if (*repro_cmd) {
      auto backend = repro_backend.backend();
      git::CloneCache cache(repro_backend.cache_root());
      auto runtime = make_runtime(runtime_kind, runtime_dir.empty() ? default_local_runtime_root()
                                                                    : fs::path(runtime_dir));
      std::optional<ArtifactStore> store;
      if (repro_store || std::getenv("FAILPASS_STORE")) store.emplace(resolve_store_path(repro_store));
      ReproduceOptions opts;
      opts.repeats = repeats;
      opts.timeout = std::chrono::seconds(timeout_s);
      opts.jobs = repro_jobs;
      opts.output_root = output_dir;
      opts.work_root = work_dir;
      opts.package_artifacts = !no_package;
      ReproduceContext ctx{*runtime, cache, *backend.archive, *backend.ci, opts};
      const auto verdicts = read_jsonl_as<FilterVerdict>(verdicts_in);
      JsonlSink out(records_out);
      reproduce_all(verdicts, ctx, [&](const PairReproduction& r) {
        out.write(r.record);
        if (r.artifact && store) {
          try {
            store->persist(*r.artifact);
          } catch (const Error& e) {
            std::cerr << "warning: " << e.what() << "\n";
          }
        }
        std::cerr << r.record.pair_id << ": " << to_string(r.record.stability) << "\n";
      });
      return 0;
    }

    if (*analyze_cmd) {
      const auto lang = language_arg(language_text);
      const auto text = read_text(log_file);
      if (with_tags) {
        for (const auto& t : extract_error_tags(text, lang)) std::cout << Json(t).dump() << "\n";
        return 0;
      }
      const auto attrs = analyze(text, lang);
      if (as_json) {
        std::cout << Json(attrs).dump() << "\n";
      } else {
        std::cout << "status: " << to_string(attrs.status) << "\n"
                  << "os: " << attrs.os << "\n"
                  << "build system: " << to_string(attrs.build_system) << "\n"
                  << "test framework: " << to_string(attrs.test_framework) << "\n"
                  << "tests run/failed/skipped: " << attrs.num_tests_run << "/"
                  << attrs.num_tests_failed << "/" << attrs.num_tests_skipped << "\n";
        for (const auto& n : attrs.failed_test_names) std::cout << "failed: " << n << "\n";
      }
      return 0;
    }

    if (*stats_cmd) {
      ArtifactStore store(resolve_store_path(stats_store));
      const auto records = store.all();
      if (!errors_language.empty()) {
        const auto lang = language_arg(errors_language);
        for (const auto& row : error_frequency_report(records, lang, top_n)) {
          std::cout << Json{{"name", row.name}, {"artifacts", row.artifacts}}.dump() << "\n";
        }
        return 0;
      }
      std::vector<Metric> metrics;
      if (metric_text == "all") {
        metrics = {Metric::changes, Metric::files_changed, Metric::failing_tests};
      } else {
        metrics = {parse_metric(metric_text)};
      }
      for (auto m : metrics) {
        auto spec = HistogramSpec::defaults(m);
        if (!edges_text.empty()) spec.bin_edges = parse_edges(edges_text);
        const auto h = stats(records, spec);
        for (const auto& b : h.bins) {
          std::cout << Json{{"metric", to_string(m)}, {"bin", b.label}, {"lo", b.lo},
                            {"hi", b.hi}, {"count", b.count}}.dump()
                    << "\n";
        }
        std::cout << Json{{"metric", to_string(m)}, {"bin", "overflow"}, {"count", h.overflow},
                          {"image_tags", h.overflow_tags}}.dump()
                  << "\n";
        if (h.overflow > 0) {
          std::cerr << "warning: " << h.overflow << " " << to_string(m)
                    << " value(s) fall outside every bin\n";
        }
      }
      return 0;
    }

    if (*query_cmd) {
      ArtifactStore store(resolve_store_path(query_store));
      std::string expr;
      for (const auto& t : query_terms) expr += (expr.empty() ? "" : " ") + t;
      const auto q = parse_query(expr);
      for (const auto& r : run_query(store.all(), q)) std::cout << Json(r).dump() << "\n";
      return 0;
    }

    if (*artifact_cmd) {
      ArtifactStore store(resolve_store_path(artifact_store));
      auto runtime = make_runtime(artifact_runtime, artifact_runtime_dir.empty()
                                                        ? default_local_runtime_root()
                                                        : fs::path(artifact_runtime_dir));
      if (*fetch_cmd) {
        artifact_fetch(store, tag, *runtime, artifact_output);
        std::cerr << tag << ": image ready (" << runtime->name() << ")\n";
        return 0;
      }
      if (*shell_cmd) return artifact_shell(store, tag, *runtime, shell_command);
      if (*cleanup_cmd) {
        const auto n = artifact_cleanup(store, tag, *runtime, purge);
        std::cerr << tag << ": removed " << n << " container(s)" << (purge ? " and the image" : "")
                  << "\n";
        return 0;
      }
    }
  } catch (const Error& e) {
    std::cerr << "failpass: error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "failpass: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
