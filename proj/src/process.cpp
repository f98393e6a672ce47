#include "failpass/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "failpass/error.hpp"

extern char** environ;

namespace failpass {

namespace {

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (pipe2(fds, O_CLOEXEC) != 0) {
      throw Error(ErrorKind::io, std::string("pipe: ") + std::strerror(errno));
    }
  }
  ~Pipe() { close_both(); }
  void close_read() { close_fd(fds[0]); }
  void close_write() { close_fd(fds[1]); }
  void close_both() { close_read(); close_write(); }
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

std::vector<std::string> build_env(const ProcessOptions& opt) {
  std::map<std::string, std::string> merged;
  if (!opt.clear_env) {
    for (char** e = environ; e && *e; ++e) {
      std::string entry(*e);
      auto eq = entry.find('=');
      if (eq == std::string::npos) continue;
      merged[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
  }
  for (const auto& [k, v] : opt.env) merged[k] = v;
  std::vector<std::string> out;
  out.reserve(merged.size());
  for (const auto& [k, v] : merged) out.push_back(k + "=" + v);
  return out;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opt) {
  if (argv.empty()) throw Error(ErrorKind::invalid_argument, "empty command line");

  // Everything the child touches is prepared before fork.
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const auto env_strings = build_env(opt);
  std::vector<char*> cenv;
  for (const auto& e : env_strings) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);
  const std::string cwd = opt.cwd.string();
  // PATH lookup uses the child's environment; resolved here since the
  // child may only make async-signal-safe calls before exec.
  std::string path_value = "/usr/local/bin:/usr/bin:/bin";
  for (const auto& e : env_strings) {
    if (e.rfind("PATH=", 0) == 0) path_value = e.substr(5);
  }
  std::string program = argv[0];
  if (program.find('/') == std::string::npos) {
    std::size_t start = 0;
    while (start <= path_value.size()) {
      auto end = path_value.find(':', start);
      if (end == std::string::npos) end = path_value.size();
      std::string candidate = path_value.substr(start, end - start) + "/" + program;
      if (end > start && access(candidate.c_str(), X_OK) == 0) {
        program = candidate;
        break;
      }
      start = end + 1;
    }
  }

  Pipe out_pipe, in_pipe, exec_err;
  const auto started = std::chrono::steady_clock::now();

  pid_t pid = fork();
  if (pid < 0) throw Error(ErrorKind::io, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);
    if (!opt.interactive) {
      dup2(in_pipe.fds[0], STDIN_FILENO);
      dup2(out_pipe.fds[1], STDOUT_FILENO);
      dup2(out_pipe.fds[1], STDERR_FILENO);
    }
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) {
      int err = errno;
      (void)!write(exec_err.fds[1], &err, sizeof err);
      _exit(127);
    }
    execve(program.c_str(), cargv.data(), cenv.data());
    int err = errno;
    (void)!write(exec_err.fds[1], &err, sizeof err);
    _exit(127);
  }
  setpgid(pid, pid);

  out_pipe.close_write();
  in_pipe.close_read();
  exec_err.close_write();

  int child_errno = 0;
  if (::read(exec_err.fds[0], &child_errno, sizeof child_errno) == sizeof child_errno) {
    waitpid(pid, nullptr, 0);
    throw Error(ErrorKind::io, "cannot run '" + argv[0] + "': " + std::strerror(child_errno));
  }

  ProcessResult result;
  std::size_t stdin_written = 0;
  if (opt.interactive || opt.stdin_data.empty()) in_pipe.close_write();

  bool exited = false;
  int status = 0;
  bool killed_for_timeout = false;
  char buf[65536];

  auto remaining_ms = [&]() -> int {
    if (!opt.timeout) return 100;
    auto elapsed = std::chrono::steady_clock::now() - started;
    auto left = *opt.timeout - std::chrono::duration_cast<std::chrono::milliseconds>(elapsed);
    return static_cast<int>(std::clamp<long long>(left.count(), 0, 100));
  };

  while (true) {
    if (!exited) {
      pid_t w = waitpid(pid, &status, WNOHANG);
      if (w == pid) {
        exited = true;
        // The leader is gone: nothing else in its group may keep running.
        kill(-pid, SIGKILL);
      }
    }
    if (opt.timeout && !exited && !killed_for_timeout &&
        std::chrono::steady_clock::now() - started >= *opt.timeout) {
      kill(-pid, SIGKILL);
      killed_for_timeout = true;
    }

    pollfd fds[2];
    int nfds = 0;
    if (out_pipe.fds[0] >= 0 && !opt.interactive) fds[nfds++] = {out_pipe.fds[0], POLLIN, 0};
    if (in_pipe.fds[1] >= 0) fds[nfds++] = {in_pipe.fds[1], POLLOUT, 0};
    if (nfds == 0) {
      if (exited) break;
      usleep(10000);
      continue;
    }
    int wait_ms = exited ? 50 : remaining_ms();
    int rc = poll(fds, nfds, wait_ms);
    if (rc < 0 && errno != EINTR) break;
    bool got_eof = false;
    for (int i = 0; i < nfds && rc > 0; ++i) {
      if (fds[i].fd == out_pipe.fds[0] && (fds[i].revents & (POLLIN | POLLHUP))) {
        ssize_t n = ::read(out_pipe.fds[0], buf, sizeof buf);
        if (n > 0) {
          result.output.append(buf, static_cast<std::size_t>(n));
        } else if (n == 0) {
          got_eof = true;
        }
      } else if (fds[i].fd == in_pipe.fds[1] && (fds[i].revents & (POLLOUT | POLLERR | POLLHUP))) {
        if (fds[i].revents & POLLOUT) {
          ssize_t n = ::write(in_pipe.fds[1], opt.stdin_data.data() + stdin_written,
                              opt.stdin_data.size() - stdin_written);
          if (n > 0) stdin_written += static_cast<std::size_t>(n);
        }
        if ((fds[i].revents & (POLLERR | POLLHUP)) || stdin_written >= opt.stdin_data.size()) {
          in_pipe.close_write();
        }
      }
    }
    if (got_eof) out_pipe.close_read();
    if (exited && rc == 0) break;  // drained
  }
  if (!exited) waitpid(pid, &status, 0);

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.timed_out = killed_for_timeout;
  if (killed_for_timeout) {
    result.exit_code = kKilledExitStatus;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

bool has_executable(const std::string& name) {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string p(path);
  std::size_t start = 0;
  while (start <= p.size()) {
    auto end = p.find(':', start);
    if (end == std::string::npos) end = p.size();
    std::string dir = p.substr(start, end - start);
    if (!dir.empty() && access((dir + "/" + name).c_str(), X_OK) == 0) return true;
    start = end + 1;
  }
  return false;
}

}  // namespace failpass
