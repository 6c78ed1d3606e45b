#ifndef CASHLAB_STATS_HPP
#define CASHLAB_STATS_HPP

// Comparison of k tuning methods over N datasets: Friedman omnibus with the
// Iman-Davenport F statistic, then pairwise Wilcoxon signed-rank tests with a
// multiple-testing correction.

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cashlab {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossMatrix {
  std::vector<std::string> dataset_ids;
  std::vector<std::string> method_names;
  Eigen::MatrixXd losses;  // N x k

  int datasets() const { return static_cast<int>(losses.rows()); }
  int methods() const { return static_cast<int>(losses.cols()); }
  void validate() const;
};

struct RankSummary {
  Eigen::VectorXd average_ranks;      // k
  Eigen::MatrixXd per_dataset_ranks;  // N x k
};

struct OmnibusReport {
  double chi2_stat = 0.0;
  double imandavenport_stat = 0.0;
  int dof_numerator = 0;    // k - 1
  int dof_denominator = 0;  // (k - 1)(N - 1)
  double p_value = 1.0;
  bool rejected = false;
  // chi2 equals N(k - 1): every dataset ranks the methods identically and the
  // F statistic is unbounded. p_value is reported as 0.
  bool degenerate = false;
};

struct PValueMatrix {
  std::vector<std::string> method_names;
  Eigen::MatrixXd raw;       // k x k, symmetric, NaN diagonal
  Eigen::MatrixXd adjusted;  // k x k, symmetric, NaN diagonal

  bool empty() const { return raw.size() == 0; }
};

enum class Correction { kFinner, kBonferroni };

struct Comparison {
  OmnibusReport omnibus;
  RankSummary ranks;
  PValueMatrix pvalues;  // empty when halted
  bool halted = false;
};

// Midranks (1-based, ties share the mean position) of one row of losses;
// lower loss gets the lower rank.
template <typename Derived>
Eigen::VectorXd midranks(const Eigen::DenseBase<Derived>& values) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  Eigen::VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && values(order[static_cast<std::size_t>(j + 1)]) ==
                            values(order[static_cast<std::size_t>(i)])) {
      ++j;
    }
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) ranks(order[static_cast<std::size_t>(t)]) = mid;
    i = j + 1;
  }
  return ranks;
}

RankSummary average_ranks(const LossMatrix& matrix);

OmnibusReport friedman_imandavenport(const LossMatrix& matrix, double alpha);

struct WilcoxonResult {
  double p_value = 1.0;
  double statistic = 0.0;  // T = min(R+, R-)
  int effective_n = 0;     // pairs with nonzero difference
  bool exact = true;
};

// Two-sided signed-rank test on paired samples. Zero differences are dropped;
// exact null distribution up to 25 nonzero pairs, normal approximation with
// tie and continuity correction above.
WilcoxonResult wilcoxon_signed_rank_test(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const Eigen::Ref<const Eigen::VectorXd>& y);
double wilcoxon_signed_rank(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y);

Eigen::VectorXd finner_adjust(const Eigen::Ref<const Eigen::VectorXd>& p);
Eigen::VectorXd bonferroni_adjust(const Eigen::Ref<const Eigen::VectorXd>& p);

// force = true runs the pairwise tests even when the omnibus does not reject.
Comparison compare_pipeline(const LossMatrix& matrix, double alpha, Correction correction,
                            bool force = false);

LossMatrix read_loss_matrix_csv(std::istream& in);
void write_loss_matrix_csv(std::ostream& out, const LossMatrix& matrix);
// Lower triangle of `adjusted` (or `raw`) with NA on the diagonal.
void write_pvalue_csv(std::ostream& out, const PValueMatrix& matrix, bool adjusted = true);

}  // namespace cashlab

#endif  // CASHLAB_STATS_HPP
