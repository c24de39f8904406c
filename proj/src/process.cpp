#include "fwsec/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>

namespace fwsec {

namespace {

constexpr std::int64_t kKillEscalationMs = 500;

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void append_capped(std::string& log, bool& truncated, const char* data, std::size_t n,
                   std::size_t cap) {
  if (truncated) return;  // keep draining, stop storing
  if (log.size() + n <= cap) {
    log.append(data, n);
    return;
  }
  std::size_t room = cap > log.size() ? cap - log.size() : 0;
  log.append(data, room);
  log.append("\n[fwsec: log truncated at cap]\n");
  truncated = true;
}

void ignore_sigpipe_once() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

ExecResult run_process(const ExecSpec& spec) {
  ExecResult result;
  ignore_sigpipe_once();

  // O_CLOEXEC at creation: concurrent workers fork in parallel, and a pipe
  // end leaked into a sibling's child would hold this target's stdin/stdout
  // open past its exit.
  int in_pipe[2] = {-1, -1}, out_pipe[2] = {-1, -1}, err_pipe[2] = {-1, -1};
  int exec_pipe[2] = {-1, -1};
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0 ||
      pipe2(err_pipe, O_CLOEXEC) != 0 || pipe2(exec_pipe, O_CLOEXEC) != 0) {
    result.termination = ExecResult::Termination::launch_failure;
    result.error = std::string("pipe: ") + std::strerror(errno);
    return result;
  }

  pid_t child = fork();
  if (child < 0) {
    result.termination = ExecResult::Termination::launch_failure;
    result.error = std::string("fork: ") + std::strerror(errno);
    return result;
  }

  if (child == 0) {
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0],
                   err_pipe[1], exec_pipe[0]})
      close(fd);
    if (!spec.cwd.empty() && chdir(spec.cwd.c_str()) != 0) {
      int e = errno;
      ssize_t ignored = write(exec_pipe[1], &e, sizeof(e));
      (void)ignored;
      _exit(127);
    }
    signal(SIGPIPE, SIG_DFL);
    if (!spec.argv.empty()) {
      std::vector<char*> argv;
      for (const auto& a : spec.argv) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
    } else {
      execl("/bin/sh", "sh", "-c", spec.shell_command.c_str(), (char*)nullptr);
    }
    int e = errno;
    ssize_t ignored = write(exec_pipe[1], &e, sizeof(e));
    (void)ignored;
    _exit(127);
  }

  setpgid(child, child);  // mirror of the child's call; EACCES after exec is fine
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);
  close(exec_pipe[1]);

  // exec handshake: CLOEXEC makes a successful exec close the pipe (read 0);
  // a failed exec writes errno.
  int exec_errno = 0;
  ssize_t handshake = read(exec_pipe[0], &exec_errno, sizeof(exec_errno));
  close(exec_pipe[0]);
  if (handshake > 0) {
    waitpid(child, nullptr, 0);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(err_pipe[0]);
    result.termination = ExecResult::Termination::launch_failure;
    result.error = std::string("exec: ") + std::strerror(exec_errno);
    return result;
  }

  int stdin_fd = in_pipe[1];
  int stdout_fd = out_pipe[0];
  int stderr_fd = err_pipe[0];
  set_nonblocking(stdin_fd);
  set_nonblocking(stdout_fd);
  set_nonblocking(stderr_fd);

  const std::int64_t t0 = now_ms();
  const std::int64_t timeout_deadline = t0 + spec.run_timeout_ms;
  std::int64_t last_output = t0;

  std::size_t next_input = 0;
  std::string pending;
  std::size_t pending_off = 0;
  std::int64_t input_ready_at = t0 + spec.startup_grace_ms +
                                (spec.inputs.empty() ? 0 : spec.inputs[0].pace_before_ms);
  if (spec.inputs.empty()) {
    close(stdin_fd);
    stdin_fd = -1;
  } else {
    pending = spec.inputs[0].bytes + "\n";
  }

  bool child_reaped = false;
  int wait_status = 0;
  enum class Kill { none, timeout, freeze } killed = Kill::none;
  std::int64_t kill_sent_at = 0;
  bool sigkill_sent = false;

  char buf[8192];
  while (true) {
    std::int64_t now = now_ms();

    if (!child_reaped) {
      pid_t r = waitpid(child, &wait_status, WNOHANG);
      if (r == child) {
        child_reaped = true;
        if (result.duration_ms == 0) result.duration_ms = now - t0;
      }
    }

    // Watchdog: applies until every pipe is closed, so a process group that
    // outlives the direct child is still reaped. When a late wakeup finds
    // both deadlines expired, the one that expired first decides the status.
    std::int64_t freeze_base = std::max(last_output, t0 + spec.startup_grace_ms);
    std::int64_t freeze_deadline = freeze_base + spec.freeze_silence_ms;
    if (killed == Kill::none && !child_reaped) {
      bool timeout_hit = now >= timeout_deadline;
      bool freeze_hit = now >= freeze_deadline;
      if (timeout_hit && freeze_hit)
        killed = freeze_deadline < timeout_deadline ? Kill::freeze : Kill::timeout;
      else if (timeout_hit)
        killed = Kill::timeout;
      else if (freeze_hit)
        killed = Kill::freeze;
      if (killed != Kill::none) {
        kill_sent_at = now;
        ::kill(-child, SIGTERM);
      }
    }
    if (killed != Kill::none && !sigkill_sent && now - kill_sent_at >= kKillEscalationMs) {
      ::kill(-child, SIGKILL);
      sigkill_sent = true;
    }

    bool out_open = stdout_fd >= 0;
    bool err_open = stderr_fd >= 0;
    if (child_reaped && !out_open && !err_open) break;

    struct pollfd fds[3];
    int nfds = 0;
    int out_slot = -1, err_slot = -1, in_slot = -1;
    if (out_open) {
      out_slot = nfds;
      fds[nfds++] = {stdout_fd, POLLIN, 0};
    }
    if (err_open) {
      err_slot = nfds;
      fds[nfds++] = {stderr_fd, POLLIN, 0};
    }
    bool want_write = stdin_fd >= 0 && next_input < spec.inputs.size() &&
                      now >= input_ready_at && killed == Kill::none;
    if (want_write) {
      in_slot = nfds;
      fds[nfds++] = {stdin_fd, POLLOUT, 0};
    }

    std::int64_t next_event = timeout_deadline;
    if (killed == Kill::none) next_event = std::min(next_event, freeze_deadline);
    if (stdin_fd >= 0 && next_input < spec.inputs.size())
      next_event = std::min(next_event, input_ready_at);
    if (killed != Kill::none && !sigkill_sent)
      next_event = std::min(next_event, kill_sent_at + kKillEscalationMs);
    int wait = int(std::min<std::int64_t>(std::max<std::int64_t>(next_event - now, 1), 100));

    int pr = poll(fds, nfds, nfds == 0 ? 10 : wait);
    now = now_ms();
    if (pr > 0) {
      if (out_slot >= 0 && (fds[out_slot].revents & (POLLIN | POLLHUP))) {
        ssize_t n;
        while ((n = read(stdout_fd, buf, sizeof(buf))) > 0) {
          append_capped(result.stdout_log, result.stdout_truncated, buf, std::size_t(n),
                        spec.log_cap_bytes);
          last_output = now;
        }
        if (n == 0) {
          close(stdout_fd);
          stdout_fd = -1;
        }
      }
      if (err_slot >= 0 && (fds[err_slot].revents & (POLLIN | POLLHUP))) {
        ssize_t n;
        while ((n = read(stderr_fd, buf, sizeof(buf))) > 0) {
          append_capped(result.stderr_log, result.stderr_truncated, buf, std::size_t(n),
                        spec.log_cap_bytes);
          last_output = now;
        }
        if (n == 0) {
          close(stderr_fd);
          stderr_fd = -1;
        }
      }
      if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
        while (pending_off < pending.size()) {
          ssize_t n = write(stdin_fd, pending.data() + pending_off,
                            pending.size() - pending_off);
          if (n > 0) {
            pending_off += std::size_t(n);
          } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            break;
          } else {  // EPIPE or other write error: stop injecting
            close(stdin_fd);
            stdin_fd = -1;
            break;
          }
        }
        if (stdin_fd >= 0 && pending_off >= pending.size()) {
          result.injected.push_back(spec.inputs[next_input].bytes);
          ++next_input;
          pending_off = 0;
          if (next_input < spec.inputs.size()) {
            pending = spec.inputs[next_input].bytes + "\n";
            input_ready_at = now + spec.inputs[next_input].pace_before_ms;
          } else {
            pending.clear();
            close(stdin_fd);
            stdin_fd = -1;
          }
        }
      }
    }

    // Hard stop: never outlive the timeout by more than the escalation
    // margin plus drain slack.
    if (now > timeout_deadline + kKillEscalationMs + 1500) {
      if (!sigkill_sent) ::kill(-child, SIGKILL);
      if (stdout_fd >= 0) close(stdout_fd);
      if (stderr_fd >= 0) close(stderr_fd);
      stdout_fd = stderr_fd = -1;
      if (!child_reaped) {
        waitpid(child, &wait_status, 0);
        child_reaped = true;
      }
      break;
    }
  }

  if (stdin_fd >= 0) close(stdin_fd);
  if (result.duration_ms == 0) result.duration_ms = now_ms() - t0;
  ::kill(-child, SIGKILL);  // sweep any stragglers in the group

  if (killed == Kill::timeout) {
    result.termination = ExecResult::Termination::timeout_kill;
  } else if (killed == Kill::freeze) {
    result.termination = ExecResult::Termination::freeze_kill;
  } else if (WIFEXITED(wait_status)) {
    result.termination = ExecResult::Termination::exited;
    result.exit_code = WEXITSTATUS(wait_status);
  } else if (WIFSIGNALED(wait_status)) {
    result.termination = ExecResult::Termination::signaled;
    result.term_signal = WTERMSIG(wait_status);
  }
  return result;
}

}  // namespace fwsec
