#pragma once

// Container runtimes. Jobs run in a fresh container per call with the
// worktree mounted at the conventional build path.
//
// Two backends:
//   DockerRuntime  drives the `docker` command-line client;
//   LocalRuntime   a directory-backed runtime for hosts without a container
//                  engine. An image is a directory holding image.json
//                  ({"env": {...}}) and an optional rootfs/ tree; a container
//                  is a scratch directory with a copy of that rootfs, a
//                  labels file, and the worktree linked at the build path.
//                  Processes run as the calling user in their own process
//                  group; the value "${ROOTFS}" in image env is replaced by
//                  the container's root directory.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "failpass/process.hpp"

namespace failpass {

namespace fs = std::filesystem;

using Labels = std::map<std::string, std::string>;

inline constexpr const char* kTagLabel = "failpass.image_tag";

struct ContainerRun {
  std::string image;       // image reference
  fs::path worktree;       // host directory mounted at build_path
  std::string build_path;  // e.g. /home/travis/build/owner/repo
  std::string script;      // bash script text
  std::optional<std::chrono::seconds> timeout;
  Labels labels;
};

class ContainerRuntime {
 public:
  virtual ~ContainerRuntime() = default;
  virtual std::string name() const = 0;
  virtual bool has_image(const std::string& ref) = 0;
  // Runs the script in a fresh container that is removed afterwards.
  virtual ProcessResult run(const ContainerRun& request) = 0;
  // Creates image `ref` from `base` with the contents of `content` copied
  // to the container root.
  virtual void import_image(const std::string& ref, const std::string& base,
                            const fs::path& content) = 0;
  // Starts a fresh, labeled container from `ref` and runs `command` in it,
  // or an interactive bash when `command` is empty. The container is kept
  // until remove_containers(). Returns the session's exit status.
  virtual int shell(const std::string& ref, const Labels& labels, const std::string& command) = 0;
  // Ids of containers carrying label key=value.
  virtual std::vector<std::string> containers(const std::string& key, const std::string& value) = 0;
  // Removes them; returns how many were removed.
  virtual std::size_t remove_containers(const std::string& key, const std::string& value) = 0;
  virtual void remove_image(const std::string& ref) = 0;
};

class DockerRuntime final : public ContainerRuntime {
 public:
  explicit DockerRuntime(std::string binary = "docker");
  // Whether the client binary exists and the daemon answers.
  static bool available(const std::string& binary = "docker");

  std::string name() const override { return "docker"; }
  bool has_image(const std::string& ref) override;
  ProcessResult run(const ContainerRun& request) override;
  void import_image(const std::string& ref, const std::string& base, const fs::path& content) override;
  int shell(const std::string& ref, const Labels& labels, const std::string& command) override;
  std::vector<std::string> containers(const std::string& key, const std::string& value) override;
  std::size_t remove_containers(const std::string& key, const std::string& value) override;
  void remove_image(const std::string& ref) override;

 private:
  std::string binary_;
};

class LocalRuntime final : public ContainerRuntime {
 public:
  explicit LocalRuntime(fs::path root);

  // Registers an image directly: env entries and files (path relative to
  // the container root -> content; executable when the path contains
  // "/bin/").
  void create_image(const std::string& ref, const std::map<std::string, std::string>& env,
                    const std::map<std::string, std::string>& files = {});

  std::string name() const override { return "local"; }
  bool has_image(const std::string& ref) override;
  ProcessResult run(const ContainerRun& request) override;
  void import_image(const std::string& ref, const std::string& base, const fs::path& content) override;
  int shell(const std::string& ref, const Labels& labels, const std::string& command) override;
  std::vector<std::string> containers(const std::string& key, const std::string& value) override;
  std::size_t remove_containers(const std::string& key, const std::string& value) override;
  void remove_image(const std::string& ref) override;

  const fs::path& root() const { return root_; }
  fs::path image_dir(const std::string& ref) const;

 private:
  struct Container {
    std::string id;
    fs::path dir;
    fs::path rootfs;
    std::map<std::string, std::string> env;
  };
  Container create_container(const std::string& ref, const Labels& labels);

  fs::path root_;
};

// "docker", "local", or "auto" (docker when reachable, else local).
// Error(configuration) when the requested runtime is unavailable.
std::unique_ptr<ContainerRuntime> make_runtime(const std::string& kind, const fs::path& local_root);

// Default LocalRuntime root: $FAILPASS_RUNTIME_DIR, else
// $XDG_CACHE_HOME/failpass/runtime, else ~/.cache/failpass/runtime.
fs::path default_local_runtime_root();

}  // namespace failpass
