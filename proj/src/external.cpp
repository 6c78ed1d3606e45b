#include "cashlab/external.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

extern char** environ;

namespace cashlab {

std::string_view to_string(WorkerErrorKind kind) {
  switch (kind) {
    case WorkerErrorKind::kSpawn: return "worker spawn failed";
    case WorkerErrorKind::kHandshake: return "worker handshake failed";
    case WorkerErrorKind::kCrash: return "worker crashed";
    case WorkerErrorKind::kTimeout: return "worker timed out";
    case WorkerErrorKind::kMalformed: return "malformed worker response";
    case WorkerErrorKind::kIdMismatch: return "worker response id mismatch";
    case WorkerErrorKind::kNonFinite: return "worker returned a non-finite loss";
    case WorkerErrorKind::kWorkerError: return "worker reported an error";
  }
  return "worker error";
}

WorkerProcess::WorkerProcess(const std::string& command, std::chrono::milliseconds timeout) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw WorkerError(WorkerErrorKind::kSpawn, std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  std::string shell = "/bin/sh";
  std::string flag = "-c";
  std::string cmd = command;
  char* argv[] = {shell.data(), flag.data(), cmd.data(), nullptr};
  // Own process group, so terminate() also reaches children of the shell.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, environ);
  posix_spawnattr_destroy(&attr);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw WorkerError(WorkerErrorKind::kSpawn, std::strerror(rc));
  }
  fd_ = fds[0];
  pid_ = pid;

  std::string line;
  try {
    line = read_line(timeout);
  } catch (const WorkerError& e) {
    terminate();
    throw WorkerError(WorkerErrorKind::kHandshake, e.what());
  }
  try {
    const auto doc = nlohmann::json::parse(line);
    if (doc.at("protocol").get<int>() != 1) {
      throw WorkerError(WorkerErrorKind::kHandshake, "unsupported protocol version");
    }
    max_concurrency_ = doc.at("max_concurrency").get<int>();
    if (max_concurrency_ < 1) {
      throw WorkerError(WorkerErrorKind::kHandshake, "max_concurrency must be >= 1");
    }
  } catch (const WorkerError&) {
    terminate();
    throw;
  } catch (const std::exception& e) {
    terminate();
    throw WorkerError(WorkerErrorKind::kHandshake, "bad handshake line '" + line + "'");
  }
}

WorkerProcess::~WorkerProcess() {
  if (pid_ > 0) {
    ::shutdown(fd_, SHUT_WR);
    // Give a well-behaved worker a moment to exit on EOF.
    for (int i = 0; i < 50; ++i) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      ::usleep(2000);
    }
  }
  terminate();
}

void WorkerProcess::terminate() {
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  buffer_.clear();
}

std::string WorkerProcess::describe_exit() {
  if (pid_ <= 0) return "worker is not running";
  int status = 0;
  pid_t r = 0;
  for (int i = 0; i < 100 && r == 0; ++i) {
    r = ::waitpid(pid_, &status, WNOHANG);
    if (r == 0) ::usleep(1000);
  }
  if (r != pid_) return "worker closed its output";
  pid_ = -1;
  if (WIFEXITED(status)) return "worker exited with status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "worker killed by signal " + std::to_string(WTERMSIG(status));
  return "worker stopped";
}

void WorkerProcess::send_line(const std::string& line) {
  if (fd_ < 0) throw WorkerError(WorkerErrorKind::kCrash, "worker is not running");
  std::string data = line + '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = describe_exit();
      terminate();
      throw WorkerError(WorkerErrorKind::kCrash, why);
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string WorkerProcess::read_line(std::chrono::milliseconds timeout) {
  if (fd_ < 0) throw WorkerError(WorkerErrorKind::kCrash, "worker is not running");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      terminate();
      throw WorkerError(WorkerErrorKind::kTimeout,
                        "no response within " + std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      terminate();
      throw WorkerError(WorkerErrorKind::kCrash, std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      terminate();
      throw WorkerError(WorkerErrorKind::kCrash, std::strerror(errno));
    }
    if (n == 0) {
      const std::string why = describe_exit();
      terminate();
      throw WorkerError(WorkerErrorKind::kCrash, why);
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double external_evaluate(WorkerProcess& worker, const std::string& model,
                         const nlohmann::json& params, double resource, std::uint64_t trial_seed,
                         std::chrono::milliseconds timeout, std::uint64_t request_id) {
  nlohmann::json request = nlohmann::json::object();
  request["id"] = request_id;
  request["model"] = model;
  request["params"] = params;
  request["resource"] = resource;
  request["seed"] = trial_seed;
  worker.send_line(request.dump());
  const std::string line = worker.read_line(timeout);

  nlohmann::json response;
  try {
    response = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    worker.terminate();
    throw WorkerError(WorkerErrorKind::kMalformed, "unparsable line '" + line + "'");
  }
  if (!response.is_object() || !response.contains("id") || !response["id"].is_number_unsigned() ||
      !response.contains("status") || !response["status"].is_string()) {
    worker.terminate();
    throw WorkerError(WorkerErrorKind::kMalformed, "missing id or status in '" + line + "'");
  }
  if (response["id"].get<std::uint64_t>() != request_id) {
    worker.terminate();
    throw WorkerError(WorkerErrorKind::kIdMismatch,
                      "sent id " + std::to_string(request_id) + ", got " + response["id"].dump());
  }
  const auto status = response["status"].get<std::string>();
  if (status == "error") {
    throw WorkerError(WorkerErrorKind::kWorkerError, response.value("message", std::string("(no message)")));
  }
  if (status != "ok") {
    worker.terminate();
    throw WorkerError(WorkerErrorKind::kMalformed, "unknown status '" + status + "'");
  }
  const auto it = response.find("loss");
  if (it == response.end() || !(it->is_number() || it->is_null())) {
    worker.terminate();
    throw WorkerError(WorkerErrorKind::kMalformed, "missing numeric loss in '" + line + "'");
  }
  const double loss = it->is_null() ? std::nan("") : it->get<double>();
  if (!std::isfinite(loss)) {
    throw WorkerError(WorkerErrorKind::kNonFinite, "loss for request " + std::to_string(request_id));
  }
  return loss;
}

double external_evaluate(WorkerProcess& worker, const ConfigurationSpace& space,
                         const Configuration& config, double resource, std::uint64_t trial_seed,
                         std::chrono::milliseconds timeout, std::uint64_t request_id) {
  return external_evaluate(worker, space.model(config.model_index).name, params_to_json(config),
                           resource, trial_seed, timeout, request_id);
}

ExternalEvaluator::ExternalEvaluator(ConfigurationSpace space, std::string command, int processes,
                                     std::chrono::milliseconds timeout)
    : space_(std::move(space)), command_(std::move(command)), timeout_(timeout) {
  if (processes < 1) throw std::invalid_argument("external evaluator needs processes >= 1");
  for (int i = 0; i < processes; ++i) slots_.push_back(std::make_unique<Slot>());
}

ExternalEvaluator::~ExternalEvaluator() = default;

double ExternalEvaluator::evaluate(const Configuration& config, double resource,
                                   std::uint64_t trial_seed) const {
  std::uint64_t id = 0;
  {
    std::lock_guard lock(next_mutex_);
    id = next_id_++;
  }
  Slot* slot = nullptr;
  std::unique_lock<std::mutex> lock;
  for (const auto& s : slots_) {
    std::unique_lock<std::mutex> attempt(s->mutex, std::try_to_lock);
    if (attempt.owns_lock()) {
      slot = s.get();
      lock = std::move(attempt);
      break;
    }
  }
  if (slot == nullptr) {
    slot = slots_[id % slots_.size()].get();
    lock = std::unique_lock<std::mutex>(slot->mutex);
  }
  if (!slot->process || !slot->process->alive()) {
    slot->process = std::make_unique<WorkerProcess>(command_, timeout_);
  }
  return external_evaluate(*slot->process, space_, config, resource, trial_seed, timeout_, id);
}

}  // namespace cashlab
