#ifndef CASHLAB_ENGINE_HPP
#define CASHLAB_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cashlab/configspace.hpp"

namespace cashlab {

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an evaluator throws or returns a non-finite loss. Carries the
// position of the failing trial inside the run.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::int64_t trial_id, int rung, int bracket)
      : std::runtime_error(what), trial_id_(trial_id), rung_(rung), bracket_(bracket) {}

  std::int64_t trial_id() const { return trial_id_; }
  int rung() const { return rung_; }
  int bracket() const { return bracket_; }

 private:
  std::int64_t trial_id_;
  int rung_;
  int bracket_;
};

// Validation loss of a configuration trained on a `resource` fraction of the
// data. Implementations must be pure in (configuration, resource, trial_seed).
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate(const Configuration& config, double resource,
                          std::uint64_t trial_seed) const = 0;
  // Number of evaluate() calls that may run at once.
  virtual int max_concurrency() const { return std::numeric_limits<int>::max(); }
};

// Adapts a callable; mostly for tests.
class FunctionEvaluator final : public Evaluator {
 public:
  using Fn = std::function<double(const Configuration&, double, std::uint64_t)>;
  explicit FunctionEvaluator(Fn fn, int max_concurrency = std::numeric_limits<int>::max())
      : fn_(std::move(fn)), max_concurrency_(max_concurrency) {}
  double evaluate(const Configuration& c, double r, std::uint64_t s) const override {
    return fn_(c, r, s);
  }
  int max_concurrency() const override { return max_concurrency_; }

 private:
  Fn fn_;
  int max_concurrency_;
};

struct TrialRecord {
  std::int64_t trial_id = 0;
  Configuration configuration;
  double resource = 1.0;
  double loss = 0.0;
  int rung = 0;
  int bracket = -1;  // -1 outside Hyperband
  std::uint64_t trial_seed = 0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct Rung {
  std::int64_t configurations = 0;  // n_i
  double resource = 1.0;            // r_i
};

struct Schedule {
  std::vector<Rung> rungs;
  double eta = 3.0;
  int s_max = 0;

  // Throws ScheduleError when the rung structure is inconsistent.
  void validate() const;
};

struct RunResult {
  Configuration winner;
  double winner_loss = 0.0;
  std::vector<TrialRecord> trials;
  double budget_spent = 0.0;
  int bracket_of_winner = -1;
};

struct EngineOptions {
  int worker_limit = 1;
};

Schedule make_schedule(std::int64_t n0, double r_min, double eta);

// Sum of n_i * r_i; evaluated as n_i / eta^(s_max - i) when the rungs follow
// the geometric resource ladder so that divisible cases are exact.
double budget_of(const Schedule& schedule);

// One schedule per s: n0(s) = round(n * eta^s / (s + 1)), r_min = eta^-s.
std::vector<Schedule> hyperband_brackets(std::int64_t n, double eta, const std::vector<int>& s_list);

// Seed handed to the successive-halving run of bracket position `index`.
std::uint64_t bracket_seed(std::uint64_t run_seed, std::size_t index);

RunResult random_search(const ConfigurationSpace& space, const ModelDistribution& dist,
                        std::int64_t n, const Evaluator& evaluator, std::uint64_t seed,
                        const EngineOptions& options = {});

RunResult successive_halving(const ConfigurationSpace& space, const ModelDistribution& dist,
                             const Schedule& schedule, const Evaluator& evaluator,
                             std::uint64_t seed, const EngineOptions& options = {});

RunResult hyperband(const ConfigurationSpace& space, const ModelDistribution& dist,
                    std::int64_t n, double eta, const std::vector<int>& s_list,
                    const Evaluator& evaluator, std::uint64_t seed,
                    const EngineOptions& options = {});

// Line-delimited run log: one flat JSON object per trial, then a summary.
void write_run_log(std::ostream& out, const ConfigurationSpace& space, const RunResult& result);

}  // namespace cashlab

#endif  // CASHLAB_ENGINE_HPP
