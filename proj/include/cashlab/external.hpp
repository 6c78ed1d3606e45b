#ifndef CASHLAB_EXTERNAL_HPP
#define CASHLAB_EXTERNAL_HPP

// Client side of the line-delimited worker protocol. A worker is any command
// that reads requests on stdin and writes responses on stdout:
//
//   worker -> {"max_concurrency":1,"protocol":1}                  (once, at startup)
//   client -> {"id":7,"model":"svc","params":{...},"resource":0.33,"seed":42}
//   worker -> {"id":7,"loss":0.21,"status":"ok"}
//
// A response with "status":"error" may carry a "message" field.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "cashlab/engine.hpp"

namespace cashlab {

enum class WorkerErrorKind {
  kSpawn,
  kHandshake,
  kCrash,
  kTimeout,
  kMalformed,
  kIdMismatch,
  kNonFinite,
  kWorkerError,
};

std::string_view to_string(WorkerErrorKind kind);

class WorkerError : public std::runtime_error {
 public:
  WorkerError(WorkerErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  WorkerErrorKind kind() const { return kind_; }

 private:
  WorkerErrorKind kind_;
};

// One running worker process. Not thread-safe; callers serialize access.
class WorkerProcess {
 public:
  // Runs `command` through /bin/sh and waits up to `timeout` for the handshake.
  WorkerProcess(const std::string& command, std::chrono::milliseconds timeout);
  ~WorkerProcess();
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  int max_concurrency() const { return max_concurrency_; }
  bool alive() const { return pid_ > 0; }

  // Sends one line (a newline is appended).
  void send_line(const std::string& line);
  // Next line from the worker, without the newline.
  std::string read_line(std::chrono::milliseconds timeout);
  // Kills the process and reaps it.
  void terminate();

 private:
  std::string describe_exit();

  int fd_ = -1;
  int pid_ = -1;
  int max_concurrency_ = 1;
  std::string buffer_;
};

// Sends one request and returns the loss. Protocol failures leave `worker`
// terminated; an "error" status or a non-finite loss keeps it running.
double external_evaluate(WorkerProcess& worker, const std::string& model,
                         const nlohmann::json& params, double resource, std::uint64_t trial_seed,
                         std::chrono::milliseconds timeout, std::uint64_t request_id);
double external_evaluate(WorkerProcess& worker, const ConfigurationSpace& space,
                         const Configuration& config, double resource, std::uint64_t trial_seed,
                         std::chrono::milliseconds timeout, std::uint64_t request_id = 0);

// Evaluator backed by a pool of worker processes, each serving one request at
// a time. Processes start lazily and are restarted after a failure.
class ExternalEvaluator final : public Evaluator {
 public:
  ExternalEvaluator(ConfigurationSpace space, std::string command, int processes = 1,
                    std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~ExternalEvaluator() override;

  double evaluate(const Configuration& config, double resource,
                  std::uint64_t trial_seed) const override;
  int max_concurrency() const override { return static_cast<int>(slots_.size()); }

 private:
  struct Slot {
    std::mutex mutex;
    std::unique_ptr<WorkerProcess> process;
  };

  ConfigurationSpace space_;
  std::string command_;
  std::chrono::milliseconds timeout_;
  std::vector<std::unique_ptr<Slot>> slots_;
  mutable std::mutex next_mutex_;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace cashlab

#endif  // CASHLAB_EXTERNAL_HPP
