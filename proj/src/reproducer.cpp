#include "failpass/reproducer.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <unistd.h>

#include "failpass/diff.hpp"
#include "failpass/pool.hpp"
#include "failpass/serialize.hpp"

namespace failpass {

std::string_view to_string(Side s) { return s == Side::failed ? "failed" : "passed"; }

std::string_view to_string(Construction c) {
  switch (c) {
    case Construction::clone_reset: return "clone_reset";
    case Construction::phantom_merge: return "phantom_merge";
    case Construction::archive_zip: return "archive_zip";
  }
  return "?";
}

// ================================================================ scripts

namespace {

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::vector<std::string> string_list(const Json& config, const std::string& key) {
  auto it = config.find(key);
  if (it == config.end() || it->is_null()) return {};
  if (it->is_string()) return {it->get<std::string>()};
  if (it->is_array()) {
    std::vector<std::string> out;
    for (const auto& item : *it) {
      if (!item.is_string()) {
        throw Error(ErrorKind::ci_command_issue, "'" + key + "' entries must be strings");
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }
  throw Error(ErrorKind::ci_command_issue, "'" + key + "' must be a string or a list of strings");
}

std::vector<std::string> env_entries(const Json& config) {
  auto it = config.find("env");
  if (it == config.end() || it->is_null()) return {};
  if (it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      if (k != "global") {
        throw Error(ErrorKind::ci_command_issue, "unsupported env section '" + k + "'");
      }
    }
    return string_list(*it, "global");
  }
  return string_list(config, "env");
}

std::optional<std::string> version_selector(const Json& config, const std::string& key) {
  auto it = config.find(key);
  if (it == config.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw Error(ErrorKind::ci_command_issue, "'" + key + "' must name a single version");
}

void emit_fatal(std::string& s, const std::string& command, const std::string& phase) {
  s += "if [ $fp_rc -ne 0 ]; then\n";
  s += "  echo " + shell_quote("The command \"" + command + "\" failed and exited with ") +
       "\"$fp_rc\"" + shell_quote(" during " + phase + ".") + "\n";
  s += "  echo\n  echo 'Done. Your build exited with 1.'\n  exit 1\nfi\n";
}

}  // namespace

JobScript generate_job_script(const Json& config, const std::string& pinned_sha, Side side) {
  static const std::set<std::string> kSupported = {
      "language", "os",  "dist",   "group",          "sudo",    "env",           "jdk",
      "python",   "before_install", "install", "before_script", "script"};
  if (!is_sha40(pinned_sha)) {
    throw Error(ErrorKind::invalid_argument, "pinned sha must be 40 hex digits");
  }
  if (!config.is_object()) {
    throw Error(ErrorKind::ci_command_issue, "job configuration must be an object");
  }
  for (const auto& [key, value] : config.items()) {
    if (!kSupported.count(key)) {
      throw Error(ErrorKind::ci_command_issue, "unsupported configuration key '" + key + "'");
    }
  }
  const auto script_cmds = string_list(config, "script");
  if (script_cmds.empty()) throw Error(ErrorKind::ci_command_issue, "no script phase");
  const auto env = env_entries(config);
  const auto jdk = version_selector(config, "jdk");
  const auto python = version_selector(config, "python");

  std::string s;
  s += "#!/bin/bash\n";
  s += "# Job script (" + std::string(to_string(side)) + " side) pinned to " + pinned_sha + "\n";
  s += "fp_result=0\n";
  const std::string checkout = "git checkout -qf " + pinned_sha;
  s += "if [ -d .git ]; then\n";
  s += "  echo " + shell_quote("$ " + checkout) + "\n";
  s += "  " + checkout + "\n";
  s += "  fp_rc=$?\n";
  s += "else\n  fp_rc=0\nfi\n";
  emit_fatal(s, checkout, "checkout");

  if (jdk) {
    s += "export TRAVIS_JDK_VERSION=" + shell_quote(*jdk) + "\n";
    s += "echo " + shell_quote("$ export TRAVIS_JDK_VERSION=" + *jdk) + "\n";
  }
  if (python) {
    s += "export TRAVIS_PYTHON_VERSION=" + shell_quote(*python) + "\n";
    s += "echo " + shell_quote("$ export TRAVIS_PYTHON_VERSION=" + *python) + "\n";
  }
  for (const auto& e : env) {
    s += "echo " + shell_quote("$ export " + e) + "\n";
    s += "export " + e + "\n";
  }

  for (const std::string phase : {"before_install", "install", "before_script"}) {
    for (const auto& cmd : string_list(config, phase)) {
      s += "echo " + shell_quote("$ " + cmd) + "\n";
      s += cmd + "\n";
      s += "fp_rc=$?\n";
      emit_fatal(s, cmd, phase);
    }
  }
  for (const auto& cmd : script_cmds) {
    s += "echo " + shell_quote("$ " + cmd) + "\n";
    s += cmd + "\n";
    s += "fp_rc=$?\n";
    s += "if [ $fp_rc -ne 0 ]; then fp_result=1; fi\n";
    s += "echo\necho " + shell_quote("The command \"" + cmd + "\" exited with ") + "\"$fp_rc\"'.'\n";
  }
  s += "echo\necho \"Done. Your build exited with $fp_result.\"\nexit $fp_result\n";
  return JobScript{side, std::move(s), pinned_sha};
}

// ================================================================ worktrees

WorkTree revert_project(const CommitCoordinates& coords, const Project& project,
                        git::CloneCache& cache, ArchiveStore& archive, const fs::path& dest) {
  if (fs::exists(dest)) {
    throw Error(ErrorKind::invalid_argument, "worktree destination exists: " + dest.string());
  }
  if (!coords.available()) {
    throw Error(ErrorKind::state_unrecoverable,
                "state unrecoverable: " + coords.reason.value_or("commits unavailable"));
  }
  const bool push = !coords.merge_sha.has_value();
  std::vector<std::string> problems;

  if (!project.repo_url.empty()) {
    try {
      const auto mirror = cache.ensure(project.slug, project.repo_url);
      if (push && git::commit_exists(mirror, coords.trigger_sha)) {
        git::clone(mirror.string(), dest);
        git::run(dest, {"checkout", "-qf", coords.trigger_sha});
        return WorkTree{dest, coords.trigger_sha, Construction::clone_reset};
      }
      if (!push && coords.base_sha && git::commit_exists(mirror, coords.trigger_sha) &&
          git::commit_exists(mirror, *coords.base_sha)) {
        git::clone(mirror.string(), dest);
        git::run(dest, {"checkout", "-qf", *coords.base_sha});
        auto merged = git::try_run(dest,
                                   {"merge", "--no-ff", "-q", "-m",
                                    "Merge " + coords.trigger_sha + " into " + *coords.base_sha,
                                    coords.trigger_sha},
                                   git::deterministic_identity());
        if (!merged.ok()) {
          git::try_run(dest, {"merge", "--abort"});
          fs::remove_all(dest);
          throw Error(ErrorKind::project_specific,
                      "phantom merge of " + coords.trigger_sha + " into " + *coords.base_sha +
                          " conflicts: " + merged.output);
        }
        return WorkTree{dest, git::head_sha(dest), Construction::phantom_merge};
      }
      problems.push_back("commits not in git history");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::project_specific) throw;
      fs::remove_all(dest);
      problems.push_back(e.what());
    }
  }

  const std::string snapshot_sha = push ? coords.trigger_sha : *coords.merge_sha;
  try {
    if (auto ref = archive.fetch_archive_snapshot(project, snapshot_sha, dest)) {
      return WorkTree{ref->content_root, snapshot_sha, Construction::archive_zip};
    }
    problems.push_back("no archive for " + snapshot_sha);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  fs::remove_all(dest);
  std::string detail;
  for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  throw Error(ErrorKind::state_unrecoverable, "state unrecoverable: " + detail);
}

// ================================================================ running

std::string build_path_for(const Project& project) {
  return "/home/travis/build/" + project.owner() + "/" + project.name();
}

RunOutcome run_job(const JobScript& script, const ImageRef& image, const WorkTree& worktree,
                   const std::string& build_path, std::chrono::seconds timeout,
                   ContainerRuntime& runtime, const Labels& labels) {
  ContainerRun request;
  request.image = image.reference();
  request.worktree = worktree.root;
  request.build_path = build_path;
  request.script = script.script_text;
  request.timeout = timeout;
  request.labels = labels;
  const auto result = runtime.run(request);
  RunOutcome out;
  out.side = script.side;
  out.timed_out = result.timed_out;
  out.exit_status = result.timed_out ? kKilledExitStatus : result.exit_code;
  out.log_text = result.output;
  out.wall_time = result.wall_seconds;
  return out;
}

OriginalLogs load_original_logs(const JobPair& pair, CiConnector& ci) {
  OriginalLogs o;
  auto failed = ci.fetch_job_log(pair.failed_job.job_id);
  auto passed = ci.fetch_job_log(pair.passed_job.job_id);
  if (!failed || !passed) {
    throw Error(ErrorKind::invalid_argument,
                "original log missing for job " +
                    std::to_string(failed ? pair.passed_job.job_id : pair.failed_job.job_id));
  }
  o.failed_text = std::move(*failed);
  o.passed_text = std::move(*passed);
  o.failed = analyze(o.failed_text, pair.project.primary_language);
  o.passed = analyze(o.passed_text, pair.project.primary_language);
  return o;
}

// ================================================================ classification

Stability classify_stability(const std::vector<bool>& matched) {
  if (matched.empty()) throw Error(ErrorKind::invalid_argument, "at least one attempt is required");
  const auto hits = std::count(matched.begin(), matched.end(), true);
  if (hits == static_cast<std::ptrdiff_t>(matched.size())) return Stability::reproducible;
  if (hits == 0) return Stability::unreproducible;
  return Stability::flaky;
}

Category classify_reproduced(const LogAttributes& fail_side) {
  switch (fail_side.status) {
    case LogStatus::failed:
      return fail_side.num_tests_failed >= 1 ? Category::with_failed_test
                                             : Category::with_failed_job;
    case LogStatus::errored:
      return Category::error_pass;
    case LogStatus::passed:
      break;
  }
  throw Error(ErrorKind::not_a_fail_side, "not a fail side: the log reports a passed job");
}

namespace {

bool mentions_any(std::string_view text, std::initializer_list<std::string_view> needles) {
  for (auto n : needles) {
    if (text.find(n) != std::string_view::npos) return true;
  }
  return false;
}

}  // namespace

UnreproducibilityReason classify_unreproducibility(const SideResult& side) {
  using R = UnreproducibilityReason;
  const std::string_view log = side.outcome.log_text;
  if (mentions_any(log, {"Could not resolve dependencies", "Could not find artifact",
                         "Failed to collect dependencies", "Could not resolve all dependencies",
                         "Could not resolve all files", "Could not transfer artifact",
                         "No matching distribution found",
                         "Could not find a version that satisfies the requirement",
                         "Failed building wheel", "Could not install packages",
                         "during install."})) {
    return R::dependency_install_failed;
  }
  if (mentions_any(log, {"Could not resolve host", "Name or service not known",
                         "Temporary failure in name resolution", "Connection refused",
                         "Connection timed out", "Network is unreachable", "UnknownHostException",
                         "404 Not Found", "410 Gone", "SSL certificate problem",
                         "Failed to connect to"})) {
    return R::stale_url_or_network;
  }
  if (side.error_kind == ErrorKind::ci_command_issue) return R::ci_command_issue;
  if (side.outcome.timed_out) return R::did_not_finish;
  if (mentions_any(log, {"Permission denied", "Operation not permitted", "EACCES",
                         "AccessDeniedException"}) ||
      mentions_any(side.error, {"Permission denied", "Operation not permitted"})) {
    return R::permission_issue;
  }
  return R::project_specific;
}

// ================================================================ attempts

namespace {

fs::path resolve_work_root(const ReproduceOptions& options) {
  if (!options.work_root.empty()) return options.work_root;
  return fs::temp_directory_path() / ("failpass-work-" + std::to_string(::getpid()));
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
}

// Reused worktrees keep their metadata next to the tree.
WorkTree obtain_worktree(const CommitCoordinates& coords, const Project& project,
                         ReproduceContext& ctx, const fs::path& dest, bool reuse) {
  const fs::path meta = dest.string() + ".worktree.json";
  if (reuse && fs::exists(meta)) {
    std::ifstream in(meta);
    Json j = Json::parse(in);
    return WorkTree{j.at("root").get<std::string>(), j.at("sha").get<std::string>(),
                    static_cast<Construction>(j.at("construction").get<int>())};
  }
  auto wt = revert_project(coords, project, ctx.cache, ctx.archive, dest);
  if (reuse) {
    write_text(meta, Json{{"root", wt.root.string()},
                          {"sha", wt.sha},
                          {"construction", static_cast<int>(wt.construction)}}
                         .dump());
  }
  return wt;
}

SideResult reproduce_side(Side side, const FilterVerdict& verdict, const LogAttributes& original,
                          ReproduceContext& ctx, const fs::path& work, const std::string& tag,
                          int attempt) {
  const auto& pair = verdict.pair;
  const auto& opts = ctx.options;
  SideResult r;
  r.outcome.side = side;
  const auto& coords = side == Side::failed ? pair.failed_commits : pair.passed_commits;
  const auto& job = side == Side::failed ? pair.failed_job : pair.passed_job;
  try {
    const auto worktree =
        obtain_worktree(coords, pair.project, ctx, work / std::string(to_string(side)), opts.reuse_worktrees);
    const auto script = generate_job_script(job.config, worktree.sha, side);
    Labels labels = {{kTagLabel, tag},
                     {"failpass.side", std::string(to_string(side))},
                     {"failpass.attempt", std::to_string(attempt)}};
    r.outcome = run_job(script, *verdict.image_ref, worktree, build_path_for(pair.project),
                        opts.timeout, ctx.runtime, labels);
    write_text(opts.output_root / tag / ("attempt-" + std::to_string(attempt)) /
                   (std::string(to_string(side)) + ".log"),
               r.outcome.log_text);
    r.attributes = analyze(r.outcome.log_text, pair.project.primary_language);
    r.matched = compare(original, *r.attributes);
  } catch (const Error& e) {
    r.error = e.what();
    r.error_kind = e.kind();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  if (!r.matched) r.reason = classify_unreproducibility(r);
  return r;
}

}  // namespace

AttemptResult attempt_pair(const FilterVerdict& verdict, const OriginalLogs& originals,
                           ReproduceContext& ctx, int attempt) {
  if (verdict.stage_reached != PipelineStage::with_image || !verdict.image_ref) {
    throw Error(ErrorKind::invalid_argument, "pair did not reach with_image");
  }
  const auto& opts = ctx.options;
  const std::string tag = make_image_tag(verdict.pair.project.slug, verdict.pair.failed_job.job_id);
  const fs::path work = resolve_work_root(opts) / tag /
                        (opts.reuse_worktrees ? std::string("shared")
                                              : "attempt-" + std::to_string(attempt));
  AttemptResult result;
  result.failed = reproduce_side(Side::failed, verdict, originals.failed, ctx, work, tag, attempt);
  result.passed = reproduce_side(Side::passed, verdict, originals.passed, ctx, work, tag, attempt);
  if (!opts.reuse_worktrees) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return result;
}

void to_json(Json& j, const ReproductionRecord& v) {
  Json attempts = Json::array();
  for (const auto& a : v.attempts) {
    attempts.push_back({{"failed_matched", a.failed_matched}, {"passed_matched", a.passed_matched}});
  }
  j = Json{{"pair_id", v.pair_id},
           {"attempts", attempts},
           {"stability", to_string(v.stability)},
           {"category", v.category ? Json(to_string(*v.category)) : Json(nullptr)},
           {"unreproducibility_reason",
            v.unreproducibility_reason ? Json(to_string(*v.unreproducibility_reason)) : Json(nullptr)},
           {"errors", v.errors}};
}

void from_json(const Json& j, ReproductionRecord& v) {
  v.pair_id = j.at("pair_id").get<std::string>();
  v.attempts.clear();
  for (const auto& a : j.at("attempts")) {
    v.attempts.push_back({a.at("failed_matched").get<bool>(), a.at("passed_matched").get<bool>()});
  }
  v.stability = parse_stability(j.at("stability").get<std::string>());
  v.category.reset();
  v.unreproducibility_reason.reset();
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
    v.category = parse_category(it->get<std::string>());
  }
  if (auto it = j.find("unreproducibility_reason"); it != j.end() && !it->is_null()) {
    v.unreproducibility_reason = parse_unreproducibility_reason(it->get<std::string>());
  }
  v.errors = j.value("errors", std::vector<std::string>{});
}

// ================================================================ protocol

namespace {

SideMetadata side_metadata(const JobPair& pair, Side side, const LogAttributes& attrs) {
  SideMetadata m;
  const bool f = side == Side::failed;
  m.build_id = f ? pair.failed_build_id : pair.passed_build_id;
  m.job_id = f ? pair.failed_job.job_id : pair.passed_job.job_id;
  m.num_tests_run = attrs.num_tests_run;
  m.num_tests_failed = attrs.num_tests_failed;
  m.failed_test_names = attrs.failed_test_names;
  m.trigger_sha = f ? pair.failed_commits.trigger_sha : pair.passed_commits.trigger_sha;
  m.branch = pair.group_key.branch;
  return m;
}

// Both trees side by side under home/travis/build/{failed,passed}/, plus a
// run script per side in usr/local/bin.
void package_artifact(const FilterVerdict& verdict, const WorkTree& failed, const WorkTree& passed,
                      const std::string& tag, ReproduceContext& ctx) {
  const auto& pair = verdict.pair;
  const fs::path dir = ctx.options.output_root / tag / "artifact";
  fs::remove_all(dir);
  const auto opts = fs::copy_options::recursive | fs::copy_options::copy_symlinks;
  for (const auto& [side, tree] : {std::pair{Side::failed, &failed}, std::pair{Side::passed, &passed}}) {
    const std::string name(to_string(side));
    const fs::path rel = fs::path("home/travis/build") / name / pair.project.owner() / pair.project.name();
    fs::create_directories(dir / rel.parent_path());
    fs::copy(tree->root, dir / rel, opts);
    const auto& job = side == Side::failed ? pair.failed_job : pair.passed_job;
    auto script = generate_job_script(job.config, tree->sha, side);
    const std::string body = "#!/bin/bash\ncd \"${CONTAINER_ROOT:-}/" + rel.generic_string() +
                             "\" || exit 1\n" + script.script_text;
    const fs::path runner = dir / "usr/local/bin" / ("run_" + name + ".sh");
    write_text(runner, body);
    fs::permissions(runner, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                    fs::perm_options::add);
  }
  ctx.runtime.import_image(tag, verdict.image_ref->reference(), dir);
}

}  // namespace

PairReproduction stability_protocol(const FilterVerdict& verdict, ReproduceContext& ctx) {
  if (verdict.stage_reached != PipelineStage::with_image || !verdict.image_ref) {
    throw Error(ErrorKind::invalid_argument, "pair did not reach with_image");
  }
  if (ctx.options.repeats < 1) throw Error(ErrorKind::invalid_argument, "repeats must be >= 1");
  const auto& pair = verdict.pair;
  const std::string tag = make_image_tag(pair.project.slug, pair.failed_job.job_id);

  PairReproduction out;
  auto& rec = out.record;
  rec.pair_id = tag;

  OriginalLogs originals;
  try {
    originals = load_original_logs(pair, ctx.ci);
  } catch (const Error& e) {
    rec.attempts.assign(static_cast<std::size_t>(ctx.options.repeats), AttemptRecord{});
    rec.errors.push_back(e.what());
    rec.unreproducibility_reason = UnreproducibilityReason::project_specific;
    return out;
  }

  std::vector<bool> matched;
  std::optional<UnreproducibilityReason> first_reason;
  for (int k = 1; k <= ctx.options.repeats; ++k) {
    auto a = attempt_pair(verdict, originals, ctx, k);
    rec.attempts.push_back({a.failed.matched, a.passed.matched});
    matched.push_back(a.matched());
    for (const SideResult* s : {&a.failed, &a.passed}) {
      if (!s->error.empty()) {
        rec.errors.push_back("attempt " + std::to_string(k) + " " +
                             std::string(to_string(s->outcome.side)) + ": " + s->error);
      }
      if (!first_reason && !s->matched) first_reason = s->reason;
    }
  }
  if (ctx.options.reuse_worktrees) {
    std::error_code ec;
    fs::remove_all(resolve_work_root(ctx.options) / tag, ec);
  }

  rec.stability = classify_stability(matched);
  if (rec.stability != Stability::unreproducible) {
    try {
      rec.category = classify_reproduced(originals.failed);
    } catch (const Error& e) {
      rec.stability = Stability::unreproducible;
      rec.errors.push_back(e.what());
      first_reason = UnreproducibilityReason::project_specific;
    }
  }
  if (rec.stability == Stability::unreproducible) {
    rec.unreproducibility_reason = first_reason.value_or(UnreproducibilityReason::project_specific);
    return out;
  }

  ArtifactMetadata meta;
  meta.image_tag = tag;
  meta.slug = pair.project.slug;
  meta.language = pair.project.primary_language;
  meta.build_system = originals.failed.build_system;
  meta.test_framework = originals.failed.test_framework;
  meta.attempts = static_cast<std::int64_t>(matched.size());
  meta.successes = std::count(matched.begin(), matched.end(), true);
  meta.stability = rec.stability;
  meta.category = rec.category;
  meta.pr_number = pair.group_key.pr_number;
  meta.branch = pair.group_key.branch;
  meta.failed = side_metadata(pair, Side::failed, originals.failed);
  meta.passed = side_metadata(pair, Side::passed, originals.passed);
  meta.error_tags = extract_error_tags(originals.failed_text, pair.project.primary_language);
  meta.base_image = verdict.image_ref->reference();

  const fs::path scratch = resolve_work_root(ctx.options) / tag / "package";
  try {
    fs::remove_all(scratch);
    const auto f = revert_project(pair.failed_commits, pair.project, ctx.cache, ctx.archive,
                                  scratch / "failed");
    const auto p = revert_project(pair.passed_commits, pair.project, ctx.cache, ctx.archive,
                                  scratch / "passed");
    const auto diff = compute_diff_metrics(f.root, p.root);
    meta.num_changes = diff.num_changes;
    meta.num_files_changed = diff.num_files_changed;
    if (ctx.options.package_artifacts) package_artifact(verdict, f, p, tag, ctx);
    out.artifact = std::move(meta);
  } catch (const std::exception& e) {
    rec.errors.push_back(std::string("packaging: ") + e.what());
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  return out;
}

void reproduce_all(const std::vector<FilterVerdict>& verdicts, ReproduceContext& ctx,
                   const std::function<void(const PairReproduction&)>& sink) {
  std::vector<const FilterVerdict*> todo;
  for (const auto& v : verdicts) {
    if (v.stage_reached == PipelineStage::with_image && v.image_ref) todo.push_back(&v);
  }
  std::mutex sink_mutex;
  parallel_for(todo.size(), ctx.options.jobs, [&](std::size_t i) {
    PairReproduction result;
    try {
      result = stability_protocol(*todo[i], ctx);
    } catch (const std::exception& e) {
      const auto& p = todo[i]->pair;
      result.record.pair_id = make_image_tag(p.project.slug, p.failed_job.job_id);
      result.record.attempts.assign(static_cast<std::size_t>(std::max(ctx.options.repeats, 1)),
                                    AttemptRecord{});
      result.record.unreproducibility_reason = UnreproducibilityReason::project_specific;
      result.record.errors.push_back(e.what());
    }
    std::lock_guard lock(sink_mutex);
    sink(result);
  });
}

}  // namespace failpass
