#include "failpass/runtime.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>

#include <json.hpp>

#include "failpass/error.hpp"

namespace failpass {

namespace {

using Json = nlohmann::json;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
}

std::string random_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t seed = std::random_device{}();
  std::ostringstream os;
  os << std::hex << (seed ^ (static_cast<std::uint64_t>(::getpid()) << 32)) << "-" << counter++;
  return os.str();
}

std::string substitute_rootfs(std::string value, const std::string& rootfs) {
  static const std::string kVar = "${ROOTFS}";
  for (auto pos = value.find(kVar); pos != std::string::npos; pos = value.find(kVar, pos)) {
    value.replace(pos, kVar.size(), rootfs);
    pos += rootfs.size();
  }
  return value;
}

fs::path under(const fs::path& rootfs, const std::string& abs_path) {
  fs::path rel = fs::path(abs_path).relative_path();
  return rootfs / rel;
}

}  // namespace

fs::path default_local_runtime_root() {
  if (const char* d = std::getenv("FAILPASS_RUNTIME_DIR"); d && *d) return d;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) {
    return fs::path(x) / "failpass" / "runtime";
  }
  const char* home = std::getenv("HOME");
  return fs::path(home && *home ? home : "/tmp") / ".cache" / "failpass" / "runtime";
}

// ================================================================ docker

DockerRuntime::DockerRuntime(std::string binary) : binary_(std::move(binary)) {
  if (!available(binary_)) {
    throw Error(ErrorKind::configuration, "container runtime unavailable: '" + binary_ +
                                              "' not found or daemon not reachable");
  }
}

bool DockerRuntime::available(const std::string& binary) {
  if (!has_executable(binary)) return false;
  ProcessOptions o;
  o.timeout = std::chrono::seconds(20);
  return run_process({binary, "info", "--format", "{{.ServerVersion}}"}, o).ok();
}

bool DockerRuntime::has_image(const std::string& ref) {
  return run_process({binary_, "image", "inspect", ref}).ok();
}

ProcessResult DockerRuntime::run(const ContainerRun& r) {
  const std::string name = "failpass-" + random_id();
  std::vector<std::string> argv = {binary_, "run", "--rm", "--name", name};
  for (const auto& [k, v] : r.labels) {
    argv.push_back("--label");
    argv.push_back(k + "=" + v);
  }
  argv.insert(argv.end(), {"-v", fs::absolute(r.worktree).string() + ":" + r.build_path, "-w",
                           r.build_path, r.image, "bash", "-c", r.script});
  ProcessOptions o;
  if (r.timeout) o.timeout = *r.timeout;
  auto result = run_process(argv, o);
  if (result.timed_out) {
    run_process({binary_, "kill", name});
    run_process({binary_, "rm", "-f", name});
  }
  return result;
}

void DockerRuntime::import_image(const std::string& ref, const std::string& base,
                                 const fs::path& content) {
  write_file(content / "Dockerfile.failpass", "FROM " + base + "\nCOPY . /\n");
  auto r = run_process({binary_, "build", "-q", "-t", ref, "-f",
                        (content / "Dockerfile.failpass").string(), content.string()});
  fs::remove(content / "Dockerfile.failpass");
  if (!r.ok()) throw Error(ErrorKind::io, "docker build failed: " + r.output);
}

int DockerRuntime::shell(const std::string& ref, const Labels& labels, const std::string& command) {
  std::vector<std::string> argv = {binary_, "run"};
  if (command.empty()) argv.push_back("-it");
  for (const auto& [k, v] : labels) {
    argv.push_back("--label");
    argv.push_back(k + "=" + v);
  }
  argv.push_back(ref);
  argv.push_back("bash");
  if (!command.empty()) argv.insert(argv.end(), {"-c", command});
  ProcessOptions o;
  o.interactive = true;
  return run_process(argv, o).exit_code;
}

std::vector<std::string> DockerRuntime::containers(const std::string& key, const std::string& value) {
  auto r = run_process({binary_, "ps", "-a", "-q", "--filter", "label=" + key + "=" + value});
  if (!r.ok()) throw Error(ErrorKind::io, "docker ps failed: " + r.output);
  std::vector<std::string> ids;
  std::istringstream in(r.output);
  for (std::string id; in >> id;) ids.push_back(id);
  return ids;
}

std::size_t DockerRuntime::remove_containers(const std::string& key, const std::string& value) {
  auto ids = containers(key, value);
  if (ids.empty()) return 0;
  std::vector<std::string> argv = {binary_, "rm", "-f"};
  argv.insert(argv.end(), ids.begin(), ids.end());
  auto r = run_process(argv);
  if (!r.ok()) throw Error(ErrorKind::io, "docker rm failed: " + r.output);
  return ids.size();
}

void DockerRuntime::remove_image(const std::string& ref) {
  auto r = run_process({binary_, "rmi", "-f", ref});
  if (!r.ok()) throw Error(ErrorKind::io, "docker rmi failed: " + r.output);
}

// ================================================================ local

LocalRuntime::LocalRuntime(fs::path root) : root_(fs::absolute(std::move(root))) {
  fs::create_directories(root_ / "images");
  fs::create_directories(root_ / "containers");
}

fs::path LocalRuntime::image_dir(const std::string& ref) const {
  std::string safe;
  for (char c : ref) {
    safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  }
  return root_ / "images" / safe;
}

bool LocalRuntime::has_image(const std::string& ref) {
  return fs::exists(image_dir(ref) / "image.json");
}

void LocalRuntime::create_image(const std::string& ref,
                                const std::map<std::string, std::string>& env,
                                const std::map<std::string, std::string>& files) {
  const auto dir = image_dir(ref);
  fs::remove_all(dir);
  fs::create_directories(dir / "rootfs");
  for (const auto& [path, content] : files) {
    const auto target = under(dir / "rootfs", "/" + path);
    write_file(target, content);
    if (path.find("bin/") != std::string::npos) {
      fs::permissions(target, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                      fs::perm_options::add);
    }
  }
  write_file(dir / "image.json", Json{{"ref", ref}, {"env", env}}.dump(2) + "\n");
}

void LocalRuntime::import_image(const std::string& ref, const std::string& base,
                                const fs::path& content) {
  if (!has_image(base)) {
    throw Error(ErrorKind::configuration, "base image '" + base + "' is not present");
  }
  const auto base_dir = image_dir(base);
  const auto dir = image_dir(ref);
  const auto staging = dir.string() + ".tmp-" + random_id();
  fs::create_directories(fs::path(staging) / "rootfs");
  if (fs::exists(base_dir / "rootfs")) {
    fs::copy(base_dir / "rootfs", fs::path(staging) / "rootfs",
             fs::copy_options::recursive | fs::copy_options::copy_symlinks);
  }
  fs::copy(content, fs::path(staging) / "rootfs",
           fs::copy_options::recursive | fs::copy_options::overwrite_existing |
               fs::copy_options::copy_symlinks);
  Json meta = Json::parse(read_file(base_dir / "image.json"));
  meta["ref"] = ref;
  meta["base"] = base;
  write_file(fs::path(staging) / "image.json", meta.dump(2) + "\n");
  fs::remove_all(dir);
  fs::rename(staging, dir);
}

LocalRuntime::Container LocalRuntime::create_container(const std::string& ref, const Labels& labels) {
  if (!has_image(ref)) throw Error(ErrorKind::configuration, "image '" + ref + "' is not present");
  Container c;
  c.id = random_id();
  c.dir = root_ / "containers" / c.id;
  c.rootfs = c.dir / "rootfs";
  fs::create_directories(c.rootfs);
  const auto img = image_dir(ref);
  if (fs::exists(img / "rootfs")) {
    fs::copy(img / "rootfs", c.rootfs, fs::copy_options::recursive | fs::copy_options::copy_symlinks);
  }
  fs::create_directories(c.rootfs / "tmp");
  fs::create_directories(c.rootfs / "home" / "travis" / "build");
  write_file(c.dir / "labels.json", Json(labels).dump() + "\n");
  write_file(c.dir / "image", ref + "\n");

  const std::string rootfs = c.rootfs.string();
  c.env = {
      {"PATH", rootfs + "/usr/local/bin:" + rootfs + "/usr/bin:" + rootfs +
                   "/bin:/usr/local/bin:/usr/bin:/bin"},
      {"HOME", rootfs + "/home/travis"},
      {"TMPDIR", rootfs + "/tmp"},
      {"LANG", "C.UTF-8"},
      {"USER", "travis"},
      {"CONTAINER_ROOT", rootfs},
  };
  Json meta = Json::parse(read_file(img / "image.json"));
  const Json env = meta.value("env", Json::object());
  for (const auto& [k, v] : env.items()) {
    c.env[k] = substitute_rootfs(v.get<std::string>(), rootfs);
  }
  return c;
}

ProcessResult LocalRuntime::run(const ContainerRun& r) {
  auto c = create_container(r.image, r.labels);
  ProcessResult result;
  try {
    const auto mount = under(c.rootfs, r.build_path);
    fs::create_directories(mount.parent_path());
    fs::create_directory_symlink(fs::absolute(r.worktree), mount);
    const auto script = c.rootfs / "tmp" / "failpass-job.sh";
    write_file(script, r.script);
    ProcessOptions o;
    o.cwd = mount;
    o.clear_env = true;
    o.env = c.env;
    o.env["TRAVIS_BUILD_DIR"] = mount.string();
    o.env["PWD"] = mount.string();  // keeps bash's logical cwd on the link
    o.timeout = r.timeout;
    result = run_process({"bash", script.string()}, o);
  } catch (...) {
    fs::remove_all(c.dir);
    throw;
  }
  fs::remove_all(c.dir);  // the worktree link is removed, not followed
  return result;
}

int LocalRuntime::shell(const std::string& ref, const Labels& labels, const std::string& command) {
  auto c = create_container(ref, labels);
  ProcessOptions o;
  o.cwd = c.rootfs / "home" / "travis" / "build";
  o.clear_env = true;
  o.env = c.env;
  if (const char* term = std::getenv("TERM")) o.env["TERM"] = term;
  if (command.empty()) {
    o.interactive = true;
    return run_process({"bash", "-i"}, o).exit_code;
  }
  auto r = run_process({"bash", "-c", command}, o);
  std::cout << r.output << std::flush;
  return r.exit_code;
}

std::vector<std::string> LocalRuntime::containers(const std::string& key, const std::string& value) {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / "containers")) {
    const auto labels_file = entry.path() / "labels.json";
    if (!fs::exists(labels_file)) continue;
    Json labels = Json::parse(read_file(labels_file), nullptr, false);
    if (labels.is_object() && labels.value(key, "") == value) {
      ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::size_t LocalRuntime::remove_containers(const std::string& key, const std::string& value) {
  auto ids = containers(key, value);
  for (const auto& id : ids) fs::remove_all(root_ / "containers" / id);
  return ids.size();
}

void LocalRuntime::remove_image(const std::string& ref) { fs::remove_all(image_dir(ref)); }

// ================================================================ factory

std::unique_ptr<ContainerRuntime> make_runtime(const std::string& kind, const fs::path& local_root) {
  if (kind == "docker") return std::make_unique<DockerRuntime>();
  if (kind == "local") return std::make_unique<LocalRuntime>(local_root);
  if (kind == "auto") {
    if (DockerRuntime::available()) return std::make_unique<DockerRuntime>();
    return std::make_unique<LocalRuntime>(local_root);
  }
  throw Error(ErrorKind::configuration, "unknown container runtime '" + kind + "'");
}

}  // namespace failpass
