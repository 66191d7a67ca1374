#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <thread>

#include "coverify/errors.hpp"
#include "coverify/executor.hpp"

extern char** environ;

namespace coverify {

namespace {

using Clock = std::chrono::steady_clock;

bool secret_name(std::string_view name, const std::vector<std::string>& extra) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const char* word : {"KEY", "TOKEN", "SECRET", "PASSWORD"})
    if (upper.find(word) != std::string::npos) return true;
  return std::find(extra.begin(), extra.end(), name) != extra.end();
}

std::vector<std::string> filtered_environment(const std::vector<std::string>& extra) {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq == std::string_view::npos || secret_name(entry.substr(0, eq), extra)) continue;
    auto name = entry.substr(0, eq);
    if (name == "LC_ALL" || name == "LANG" || name == "LANGUAGE") continue;
    env.emplace_back(entry);
  }
  env.emplace_back("LC_ALL=C");
  env.emplace_back("LANG=C");
  return env;
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

struct Pipe {
  int r = -1;
  int w = -1;
  Pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
    r = fds[0];
    w = fds[1];
  }
  ~Pipe() {
    close_fd(r);
    close_fd(w);
  }
};

}  // namespace

ProcessResult run_process(const ProcessOptions& options) {
  if (options.argv.empty()) throw ConfigError("empty command line");
  std::vector<std::string> env = filtered_environment(options.scrub_env);
  std::vector<char*> argv, envp;
  for (const auto& a : options.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  for (const auto& e : env) envp.push_back(const_cast<char*>(e.c_str()));
  envp.push_back(nullptr);

  Pipe out, err, status;
  auto start = Clock::now();
  pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(out.w, STDOUT_FILENO);
    ::dup2(err.w, STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!options.cwd.empty() && ::chdir(options.cwd.c_str()) != 0) {
      int e = errno;
      (void)!::write(status.w, &e, sizeof e);
      ::_exit(127);
    }
    if (options.address_space_limit) {
      rlimit lim{*options.address_space_limit, *options.address_space_limit};
      ::setrlimit(RLIMIT_AS, &lim);
    }
    ::execvpe(argv[0], argv.data(), envp.data());
    int e = errno;
    (void)!::write(status.w, &e, sizeof e);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  close_fd(out.w);
  close_fd(err.w);
  close_fd(status.w);

  int exec_errno = 0;
  if (::read(status.r, &exec_errno, sizeof exec_errno) == sizeof exec_errno) {
    ::waitpid(pid, nullptr, 0);
    throw ConfigError("cannot execute '" + options.argv[0] + "': " + std::strerror(exec_errno));
  }

  ProcessResult result;
  auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                              std::chrono::duration<double>(options.timeout));
  bool killed = false;
  auto kill_group = [&] {
    if (!killed) ::kill(-pid, SIGKILL);
    killed = true;
  };

  char buf[65536];
  pollfd fds[2] = {{out.r, POLLIN, 0}, {err.r, POLLIN, 0}};
  std::string* sinks[2] = {&result.stdout_text, &result.stderr_text};
  int open_streams = 2;
  while (open_streams > 0) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0 && !killed) {
      result.timed_out = true;
      kill_group();
    }
    int wait_ms = killed ? 100 : static_cast<int>(std::min<long long>(left.count() + 1, 1000));
    int n = ::poll(fds, 2, wait_ms);
    if (n < 0 && errno != EINTR) break;
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      if (got <= 0) {
        fds[i].fd = -1;
        --open_streams;
        continue;
      }
      auto& sink = *sinks[i];
      std::size_t room = options.max_output > sink.size() ? options.max_output - sink.size() : 0;
      sink.append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(got)));
      if (static_cast<std::size_t>(got) > room) {
        result.output_truncated = true;
        kill_group();
      }
    }
  }

  int wstatus = 0;
  for (;;) {
    pid_t r = ::waitpid(pid, &wstatus, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) break;
    if (Clock::now() >= deadline && !killed) {
      result.timed_out = true;
      kill_group();
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (!killed) ::kill(-pid, SIGKILL);  // stray grandchildren
  result.duration = std::chrono::duration<double>(Clock::now() - start).count();
  if (WIFEXITED(wstatus)) result.exit_code = WEXITSTATUS(wstatus);
  if (WIFSIGNALED(wstatus)) result.signal = WTERMSIG(wstatus);
  return result;
}

}  // namespace coverify
