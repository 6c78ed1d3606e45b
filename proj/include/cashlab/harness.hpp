#ifndef CASHLAB_HARNESS_HPP
#define CASHLAB_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cashlab/configspace.hpp"
#include "cashlab/engine.hpp"
#include "cashlab/stats.hpp"

namespace cashlab {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape of the random loss landscapes. Every model gets a base level
//   base + spread * U - capacity_gain * N / N_max
// plus, per hyperparameter, a quadratic bowl w * (u - u*)^2 in normalized
// coordinates (log-transformed for log scale) or a per-category offset.
struct LandscapeParams {
  double base = 0.45;
  double spread = 0.10;
  double capacity_gain = 0.30;
  double curvature_min = 0.01;
  double curvature_max = 0.10;
  double category_penalty = 0.05;

  friend bool operator==(const LandscapeParams&, const LandscapeParams&) = default;
};

struct HyperparameterLandscape {
  double curvature = 0.0;          // continuous / integer
  double target = 0.0;             // optimum in normalized coordinates
  std::vector<double> categories;  // categorical offsets, best is 0
};

struct ModelLandscape {
  double level = 0.0;
  std::vector<HyperparameterLandscape> hyperparameters;
};

class SyntheticProblem {
 public:
  SyntheticProblem(std::string problem_id, ConfigurationSpace space, std::uint64_t landscape_seed,
                   double noise_scale, int inner_splits = 10, const LandscapeParams& params = {});

  const std::string& problem_id() const { return problem_id_; }
  const ConfigurationSpace& space() const { return space_; }
  std::uint64_t landscape_seed() const { return landscape_seed_; }
  double noise_scale() const { return noise_scale_; }
  int inner_splits() const { return inner_splits_; }
  const Configuration& optimum() const { return optimum_; }
  double optimum_loss() const { return optimum_loss_; }
  const std::vector<ModelLandscape>& landscapes() const { return landscapes_; }

  // Noise-free loss of a configuration.
  double true_loss(const Configuration& config) const;

 private:
  std::string problem_id_;
  ConfigurationSpace space_;
  std::uint64_t landscape_seed_;
  double noise_scale_;
  int inner_splits_;
  std::vector<ModelLandscape> landscapes_;
  Configuration optimum_;
  double optimum_loss_ = 0.0;
};

SyntheticProblem generate_problem(const ConfigurationSpace& space, std::uint64_t landscape_seed,
                                  double noise_scale, int inner_splits = 10,
                                  const LandscapeParams& params = {});

// true_loss + mean of inner_splits draws of N(0, noise_scale * sqrt((1-r)/r)).
double synthetic_evaluate(const SyntheticProblem& problem, const Configuration& config,
                          double resource, std::uint64_t trial_seed);

class SyntheticEvaluator final : public Evaluator {
 public:
  explicit SyntheticEvaluator(const SyntheticProblem& problem) : problem_(problem) {}
  double evaluate(const Configuration& c, double r, std::uint64_t s) const override {
    return synthetic_evaluate(problem_, c, r, s);
  }

 private:
  const SyntheticProblem& problem_;
};

struct Suite {
  std::vector<SyntheticProblem> problems;
  int reps = 1;
  int inner_splits = 10;
  std::uint64_t seed = 0;  // run seeds derive from this
  void validate() const;
};

// Suite document:
//   {"format": 1, "space": <path or inline space>, "problems": P,
//    "landscape_seed": s, "noise_scale": x | [lo, hi] (uniform per problem),
//    "inner_splits": n,
//    "reps": r, "seed": s, "landscape": {LandscapeParams fields}}
// A relative space path resolves against `base_dir`.
Suite parse_suite(const nlohmann::json& doc, const std::filesystem::path& base_dir);

enum class Optimizer { kRandomSearch, kSuccessiveHalving, kHyperband };

struct MethodSpec {
  std::string name;
  Optimizer optimizer = Optimizer::kRandomSearch;
  std::string sampling = "uniform";  // uniform | weighted | theta | custom
  Eigen::VectorXd weights;           // custom only
  std::int64_t n = 1;                // RS count, SH/HB per-bracket budget
  double eta = 3.0;
  std::vector<int> s_list{0};        // SH uses s_list[0]

  // Budget the method is designed to spend: n, or n * |s_list| for Hyperband.
  double nominal_budget() const;
  void validate() const;
};

std::vector<MethodSpec> parse_methods(const nlohmann::json& doc);
nlohmann::json to_json(const MethodSpec& method);

ModelDistribution method_distribution(const ConfigurationSpace& space, const MethodSpec& method);
RunResult run_method(const MethodSpec& method, const ConfigurationSpace& space,
                     const Evaluator& evaluator, std::uint64_t seed, const EngineOptions& options);

// Six-scheme designs: {SH0,SH1,SH2} x {uniform,weighted} at budget n, and
// {RS,SH2,HB} x {uniform,weighted} with HB at n per bracket.
std::vector<MethodSpec> schedule_study_methods(std::int64_t n, double eta = 3.0);
std::vector<MethodSpec> hyperband_study_methods(std::int64_t n, double eta = 3.0);

struct ResultRecord {
  int problem = 0;
  int rep = 0;
  int method = 0;
  std::uint64_t run_seed = 0;
  Configuration winner;
  double validation_loss = 0.0;
  double generalization_loss = 0.0;
  double budget_spent = 0.0;
  int bracket_of_winner = -1;
  std::int64_t trial_count = 0;
  std::uint64_t trials_digest = 0;
  std::string error;  // non-empty when the run failed
};

struct ResultsStore {
  std::vector<std::string> problem_ids;
  std::vector<MethodSpec> methods;
  int reps = 0;
  std::uint64_t suite_seed = 0;
  std::vector<ResultRecord> records;  // ordered by (problem, rep, method)

  // Throws HarnessError unless every (problem, rep, method) appears once.
  void check_complete() const;
};

std::uint64_t digest(const std::vector<TrialRecord>& trials);

ResultsStore run_suite(const Suite& suite, const std::vector<MethodSpec>& methods,
                       int worker_limit);

void write_results_store(std::ostream& out, const ConfigurationSpace& space,
                         const ResultsStore& store);
ResultsStore read_results_store(std::istream& in, const ConfigurationSpace& space);

enum class LossSplit { kValidation, kGeneralization };

// One row per problem (losses averaged over reps), one column per method.
LossMatrix export_loss_matrix(const ResultsStore& store, LossSplit split);

struct BracketWinCounts {
  // Hyperband method name -> bracket s -> wins.
  std::map<std::string, std::map<int, std::int64_t>> counts;
};

BracketWinCounts bracket_win_counts(const ResultsStore& store);
// Shannon entropy (nats) of a win-count distribution.
double win_entropy(const std::map<int, std::int64_t>& counts);
void write_bracket_counts_csv(std::ostream& out, const BracketWinCounts& counts);

// SVG bar chart of average ranks, ascending, with a connector over every pair
// whose adjusted p exceeds alpha. An empty matrix (halted pipeline) connects
// every pair.
std::string render_rank_chart(const RankSummary& summary, const PValueMatrix& adjusted,
                              double alpha, const std::vector<std::string>& method_names);

}  // namespace cashlab

#endif  // CASHLAB_HARNESS_HPP
