#ifndef CASHLAB_WORSTCASE_HPP
#define CASHLAB_WORSTCASE_HPP

// Worst-case CASH laboratory. The optimal model is uniform over the M models
// and its optimal configuration is uniform over the hyperparameter box. Each
// box is split into unit cells; a random-search draw succeeds when it lands in
// the optimum's model and cell, which happens with probability p / theta.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cashlab/configspace.hpp"

namespace cashlab {

class WorstCaseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WorstCaseSpec {
  // range_lengths[m][n] = u - l of hyperparameter n of model m; integers >= 1.
  std::vector<std::vector<std::int64_t>> range_lengths;
  std::int64_t budget = 1;  // K

  int model_count() const { return static_cast<int>(range_lengths.size()); }
  void validate() const;

  // One hyperparameter per model with range length theta[m].
  static WorstCaseSpec from_volumes(const std::vector<std::int64_t>& theta, std::int64_t budget);
};

// theta_lambda per model.
Eigen::VectorXd volumes(const WorstCaseSpec& spec);

// (1/M) * sum_m (1 - p_m / theta_m)^K with each power taken as
// exp(K * log1p(-x)).
template <typename DerivedP, typename DerivedT>
typename DerivedP::Scalar failure_probability(const Eigen::ArrayBase<DerivedP>& p,
                                              const Eigen::ArrayBase<DerivedT>& theta,
                                              std::int64_t budget) {
  using Scalar = typename DerivedP::Scalar;
  using std::exp;
  using std::log1p;
  const auto ratio = (p.derived() / theta.derived().template cast<Scalar>()).eval();
  if ((ratio > Scalar(1) + Scalar(1e-12)).any()) {
    throw WorstCaseError("p/theta exceeds 1 for some model");
  }
  const Scalar k = static_cast<Scalar>(budget);
  Scalar total(0);
  for (Eigen::Index i = 0; i < ratio.size(); ++i) {
    const Scalar x = std::min(ratio(i), Scalar(1));
    total += x >= Scalar(1) ? Scalar(0) : exp(k * log1p(-x));
  }
  return total / static_cast<Scalar>(ratio.size());
}

double failure_prob_closed(const WorstCaseSpec& spec, const ModelDistribution& dist);
double failure_prob_uniform(const WorstCaseSpec& spec);
// (1 - 1 / sum(theta))^K; optimal for p proportional to theta.
double failure_prob_weighted(const WorstCaseSpec& spec);
// Uniform minus weighted. Signed: small budgets can make it negative.
double theorem_gap(const WorstCaseSpec& spec);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t samples = 0;
  std::int64_t failures = 0;
};

// Simulates the scenario directly. Samples are split into fixed-size chunks
// with their own seed streams, so the result depends only on (spec, dist,
// samples, seed) and not on `workers`.
MonteCarloEstimate failure_prob_monte_carlo(const WorstCaseSpec& spec, const ModelDistribution& dist,
                                            std::int64_t samples, std::uint64_t seed,
                                            int workers = 1);

struct FailureReport {
  double p_fail_uniform = 0.0;
  double p_fail_weighted = 0.0;
  std::optional<double> p_fail_custom;
  std::optional<double> mc_estimate;
  std::optional<double> mc_stderr;
  std::optional<std::int64_t> samples;
};

nlohmann::json to_json(const FailureReport& report);

// Parses {"range_lengths": [[...], ...], "K": k} or {"theta": [...], "K": k}.
WorstCaseSpec parse_worstcase_spec(const nlohmann::json& node);

// Which distribution a lab document asks the Monte Carlo run to use:
// "uniform" (default), "weighted", or {"custom": [w...]}.
ModelDistribution lab_distribution(const nlohmann::json& node, const WorstCaseSpec& spec,
                                   bool* is_custom = nullptr);

struct SweepRow {
  WorstCaseSpec spec;
  double p_uniform = 0.0;
  double p_weighted = 0.0;
  double gap = 0.0;
  std::optional<MonteCarloEstimate> mc;
};

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace cashlab

#endif  // CASHLAB_WORSTCASE_HPP
