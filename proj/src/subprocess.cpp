#include "stride/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <sstream>

#include "stride/json_io.hpp"

namespace stride {

namespace {

using Clock = std::chrono::steady_clock;

class Pipe {
 public:
  Pipe() {
    int fds[2];
    if (pipe2(fds, O_CLOEXEC) != 0) {
      throw TrainerError(TrainerError::Kind::launch,
                         std::string("pipe failed: ") + std::strerror(errno));
    }
    read_fd = fds[0];
    write_fd = fds[1];
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;

  void close_read() {
    if (read_fd >= 0) ::close(read_fd);
    read_fd = -1;
  }
  void close_write() {
    if (write_fd >= 0) ::close(write_fd);
    write_fd = -1;
  }

  int read_fd = -1;
  int write_fd = -1;
};

/// Writes everything, swallowing the SIGPIPE a dead reader would raise so a
/// crashed worker surfaces as a protocol error instead of killing us.
bool write_all(int fd, const std::string& data) {
  sigset_t block, old;
  sigemptyset(&block);
  sigaddset(&block, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &block, &old);
  bool ok = true;
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ok = false;
      break;
    }
    off += static_cast<std::size_t>(n);
  }
  // reap the pending SIGPIPE, if any, before restoring the mask
  sigset_t pending;
  sigpending(&pending);
  if (sigismember(&pending, SIGPIPE)) {
    timespec zero{0, 0};
    sigtimedwait(&block, nullptr, &zero);
  }
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  return ok;
}

struct Child {
  pid_t pid = -1;
  bool reaped = false;
  int status = 0;

  void kill_group() const {
    if (pid > 0 && !reaped) {
      ::kill(-pid, SIGKILL);  // no-op if the child has not called setpgid yet
      ::kill(pid, SIGKILL);
    }
  }

  /// Waits until the child exits or the deadline passes; returns false on
  /// deadline.
  bool reap(Clock::time_point deadline) {
    while (!reaped) {
      const pid_t r = ::waitpid(pid, &status, WNOHANG);
      if (r == pid) {
        reaped = true;
        return true;
      }
      if (r < 0 && errno != EINTR) {
        reaped = true;
        return true;
      }
      if (Clock::now() >= deadline) return false;
      ::usleep(2000);
    }
    return true;
  }

  ~Child() {
    if (pid > 0 && !reaped) {
      kill_group();
      ::waitpid(pid, &status, 0);
    }
  }
};

double json_number(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw std::invalid_argument(std::string("missing numeric field '") + key + "'");
  }
  return it->get<double>();
}

}  // namespace

std::string format_trial_request(const ArchitectureClass& arch, const Configuration& config,
                                 const FidelityLevel& fidelity,
                                 const CurriculumSchedule* curriculum, std::uint64_t seed) {
  nlohmann::json j;
  j["architecture"] = arch.name;
  j["assignments"] = config_to_json(config);
  j["epoch_budget"] = fidelity.epoch_budget;
  j["data_fraction"] = fidelity.data_fraction;
  j["seed"] = seed;
  if (curriculum) j["curriculum"] = curriculum_to_json(*curriculum);
  return j.dump() + "\n";
}

TrialRequest parse_trial_request(const SearchSpace& space, const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  TrialRequest req;
  req.architecture = j.at("architecture").get<std::string>();
  req.config = config_from_json(space, j.at("assignments"));
  req.epoch_budget = j.at("epoch_budget").get<int>();
  req.data_fraction = j.at("data_fraction").get<double>();
  req.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("curriculum") && !j.at("curriculum").is_null()) {
    req.curriculum = curriculum_from_json(j.at("curriculum"));
  }
  return req;
}

std::string format_epoch_record(const EpochRecord& e) {
  nlohmann::json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["batch_loss_variance"] = e.batch_loss_variance;
  if (e.val_metric) {
    j["val_metric"] = *e.val_metric;
  } else {
    j["val_metric"] = nullptr;
  }
  return j.dump() + "\n";
}

std::string format_terminal_record(const std::optional<double>& final_performance) {
  nlohmann::json j;
  if (final_performance) {
    j["final_performance"] = *final_performance;
  } else {
    j["final_performance"] = nullptr;
  }
  return j.dump() + "\n";
}

std::vector<std::string> SubprocessTrainer::split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> argv;
  std::string token;
  while (in >> token) argv.push_back(token);
  return argv;
}

SubprocessTrainer::SubprocessTrainer(std::vector<std::string> argv, int full_epochs,
                                     double timeout_seconds)
    : argv_(std::move(argv)), full_epochs_(full_epochs), timeout_seconds_(timeout_seconds) {
  if (argv_.empty()) throw std::invalid_argument("empty trainer command");
  if (full_epochs_ < 1) throw std::invalid_argument("full_epochs must be at least 1");
  if (!(timeout_seconds_ > 0.0)) throw std::invalid_argument("timeout must be positive");
}

TrialRecord SubprocessTrainer::run(const ArchitectureClass& arch, const Configuration& config,
                                   const FidelityLevel& fidelity,
                                   const CurriculumSchedule* curriculum, std::uint64_t seed) {
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(timeout_seconds_));

  Pipe to_child, from_child, child_err, exec_err;
  const pid_t pid = ::fork();
  if (pid < 0) {
    throw TrainerError(TrainerError::Kind::launch,
                       std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);  // own group, so a timeout kill reaps grandchildren too
    ::dup2(to_child.read_fd, STDIN_FILENO);
    ::dup2(from_child.write_fd, STDOUT_FILENO);
    ::dup2(child_err.write_fd, STDERR_FILENO);
    std::vector<char*> cargv;
    cargv.reserve(argv_.size() + 1);
    for (const auto& a : argv_) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    ::execvp(cargv[0], cargv.data());
    const int err = errno;  // exec failed: report it through the CLOEXEC pipe
    (void)!::write(exec_err.write_fd, &err, sizeof(err));
    ::_exit(127);
  }

  Child child;
  child.pid = pid;
  ::setpgid(pid, pid);  // mirror the child's call to close the race
  to_child.close_read();
  from_child.close_write();
  child_err.close_write();
  exec_err.close_write();

  TrainingLog log;
  log.budget = fidelity.epoch_budget;
  std::string stderr_text;
  auto fail = [&](TrainerError::Kind kind, const std::string& message) -> TrainerError {
    child.kill_group();
    child.reap(Clock::now() + std::chrono::seconds(5));
    std::string full = message;
    if (!stderr_text.empty()) {
      full += "; worker stderr: " + stderr_text.substr(0, 500);
    }
    return TrainerError(kind, full,
                        log.epochs.empty() ? std::nullopt : std::optional(log));
  };

  // a failed write means the worker died early; the read loop will see EOF
  (void)write_all(to_child.write_fd,
                  format_trial_request(arch, config, fidelity, curriculum, seed));
  to_child.close_write();

  std::optional<double> final_performance;
  bool terminal_seen = false;
  std::string buffer;
  bool stdout_open = true, stderr_open = true;

  auto handle_line = [&](const std::string& line) {
    if (line.empty()) return;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw fail(TrainerError::Kind::protocol,
                 std::string("malformed record from worker: ") + e.what());
    }
    if (!j.is_object()) {
      throw fail(TrainerError::Kind::protocol, "worker record is not an object");
    }
    if (j.contains("final_performance")) {
      if (!j.at("final_performance").is_null()) {
        final_performance = j.at("final_performance").get<double>();
      }
      terminal_seen = true;
      return;
    }
    EpochRecord rec;
    try {
      rec.epoch = j.at("epoch").get<int>();
      rec.train_loss = json_number(j, "train_loss");
      rec.batch_loss_variance = json_number(j, "batch_loss_variance");
      if (j.contains("val_metric") && !j.at("val_metric").is_null()) {
        rec.val_metric = j.at("val_metric").get<double>();
      }
    } catch (const std::exception& e) {
      throw fail(TrainerError::Kind::protocol,
                 std::string("bad epoch record from worker: ") + e.what());
    }
    const int expected = static_cast<int>(log.epochs.size()) + 1;
    if (rec.epoch != expected) {
      throw fail(TrainerError::Kind::protocol,
                 "epoch index " + std::to_string(rec.epoch) + " out of order, expected " +
                     std::to_string(expected));
    }
    if (rec.epoch > fidelity.epoch_budget) {
      throw fail(TrainerError::Kind::protocol, "worker sent more epochs than requested");
    }
    log.epochs.push_back(rec);
    log.completed = rec.epoch;
  };

  while (!terminal_seen && (stdout_open || stderr_open)) {
    pollfd fds[2];
    nfds_t nfds = 0;
    int stdout_slot = -1, stderr_slot = -1;
    if (stdout_open) {
      stdout_slot = static_cast<int>(nfds);
      fds[nfds++] = {from_child.read_fd, POLLIN, 0};
    }
    if (stderr_open) {
      stderr_slot = static_cast<int>(nfds);
      fds[nfds++] = {child_err.read_fd, POLLIN, 0};
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (remaining.count() <= 0) {
      throw fail(TrainerError::Kind::timeout,
                 "trial exceeded its " + std::to_string(timeout_seconds_) + "s deadline");
    }
    const int rc = ::poll(fds, nfds, static_cast<int>(std::min<long long>(
                                         remaining.count(), 60000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw fail(TrainerError::Kind::protocol,
                 std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;

    char chunk[4096];
    if (stderr_slot >= 0 && (fds[stderr_slot].revents & (POLLIN | POLLHUP))) {
      const ssize_t n = ::read(child_err.read_fd, chunk, sizeof(chunk));
      if (n > 0) {
        if (stderr_text.size() < 4096) stderr_text.append(chunk, static_cast<std::size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EINTR)) {
        stderr_open = false;
      }
    }
    if (stdout_slot >= 0 && (fds[stdout_slot].revents & (POLLIN | POLLHUP))) {
      const ssize_t n = ::read(from_child.read_fd, chunk, sizeof(chunk));
      if (n > 0) {
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while (!terminal_seen && (pos = buffer.find('\n')) != std::string::npos) {
          const std::string line = buffer.substr(0, pos);
          buffer.erase(0, pos + 1);
          handle_line(line);
        }
      } else if (n == 0 || (n < 0 && errno != EINTR)) {
        stdout_open = false;
      }
    }
  }

  // a launch failure leaves the reason in the exec pipe
  int exec_errno = 0;
  if (::read(exec_err.read_fd, &exec_errno, sizeof(exec_errno)) == sizeof(exec_errno)) {
    child.reap(deadline);
    throw TrainerError(TrainerError::Kind::launch, "cannot launch '" + argv_[0] +
                                                       "': " + std::strerror(exec_errno));
  }

  if (!terminal_seen) {
    if (!buffer.empty()) handle_line(buffer);  // final line without newline
  }
  if (!terminal_seen) {
    std::string message = "worker closed its stream without a terminal record after " +
                          std::to_string(log.completed) + " of " +
                          std::to_string(fidelity.epoch_budget) + " epochs";
    if (child.reap(Clock::now() + std::chrono::seconds(5)) && WIFEXITED(child.status) &&
        WEXITSTATUS(child.status) != 0) {
      message += " (exit status " + std::to_string(WEXITSTATUS(child.status)) + ")";
    }
    throw fail(TrainerError::Kind::protocol, message);
  }

  if (!child.reap(deadline)) {
    throw fail(TrainerError::Kind::timeout, "worker did not exit after its terminal record");
  }

  TrialRecord out;
  out.arch = arch;
  out.config = config;
  out.fidelity = fidelity;
  out.log = std::move(log);
  out.final_performance = final_performance;
  return out;
}

}  // namespace stride
