#include "cashlab/stats.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "cashlab/distributions.hpp"

namespace cashlab {

namespace {

constexpr int kExactLimit = 25;
constexpr double kPFloor = 1e-300;

std::string shortest(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

void check_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw StatsError(std::string("duplicate ") + what + " '" + n + "'");
  }
}

// Number of sign assignments whose positive-rank sum (in doubled ranks) is
// <= limit. Shift-and-add over subset sums.
std::uint64_t count_lower_tail(const std::vector<int>& doubled_ranks, int limit) {
  const int total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0);
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(total) + 1, 0);
  ways[0] = 1;
  int reach = 0;
  for (int r : doubled_ranks) {
    for (int s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + r)] += ways[static_cast<std::size_t>(s)];
    reach += r;
  }
  std::uint64_t count = 0;
  for (int s = 0; s <= std::min(limit, total); ++s) count += ways[static_cast<std::size_t>(s)];
  return count;
}

}  // namespace

void LossMatrix::validate() const {
  if (losses.rows() < 2) throw StatsError("loss matrix needs N >= 2 datasets");
  if (losses.cols() < 2) throw StatsError("loss matrix needs k >= 2 methods");
  if (static_cast<Eigen::Index>(dataset_ids.size()) != losses.rows() ||
      static_cast<Eigen::Index>(method_names.size()) != losses.cols()) {
    throw StatsError("loss matrix labels do not match its shape");
  }
  if (!losses.allFinite()) throw StatsError("loss matrix contains non-finite losses");
  check_unique(dataset_ids, "dataset id");
  check_unique(method_names, "method name");
}

RankSummary average_ranks(const LossMatrix& matrix) {
  matrix.validate();
  RankSummary summary;
  summary.per_dataset_ranks.resize(matrix.losses.rows(), matrix.losses.cols());
  for (Eigen::Index i = 0; i < matrix.losses.rows(); ++i) {
    summary.per_dataset_ranks.row(i) = midranks(matrix.losses.row(i)).transpose();
  }
  summary.average_ranks = summary.per_dataset_ranks.colwise().mean().transpose();
  return summary;
}

OmnibusReport friedman_imandavenport(const LossMatrix& matrix, double alpha) {
  const RankSummary ranks = average_ranks(matrix);
  const double n = matrix.datasets();
  const double k = matrix.methods();
  OmnibusReport report;
  report.dof_numerator = matrix.methods() - 1;
  report.dof_denominator = (matrix.methods() - 1) * (matrix.datasets() - 1);
  report.chi2_stat = 12.0 * n / (k * (k + 1.0)) *
                     (ranks.average_ranks.squaredNorm() - k * (k + 1.0) * (k + 1.0) / 4.0);
  // Midranks keep the bracket nonnegative; clear rounding noise around 0.
  if (std::abs(report.chi2_stat) < 1e-12) report.chi2_stat = 0.0;
  const double denominator = n * (k - 1.0) - report.chi2_stat;
  if (denominator <= 1e-12 * n * (k - 1.0)) {
    report.degenerate = true;
    report.imandavenport_stat = std::numeric_limits<double>::infinity();
    report.p_value = 0.0;
  } else {
    report.imandavenport_stat = (n - 1.0) * report.chi2_stat / denominator;
    report.p_value = std::max(kPFloor, f_tail(report.imandavenport_stat, report.dof_numerator,
                                              report.dof_denominator));
  }
  report.rejected = report.p_value < alpha;
  return report;
}

WilcoxonResult wilcoxon_signed_rank_test(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw StatsError("wilcoxon needs equal-length samples");
  if (x.size() < 1) throw StatsError("wilcoxon needs at least one pair");
  if (!x.allFinite() || !y.allFinite()) throw StatsError("wilcoxon input is not finite");

  std::vector<double> diffs;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult result;
  result.effective_n = static_cast<int>(diffs.size());
  if (diffs.empty()) return result;

  const Eigen::Map<const Eigen::VectorXd> d(diffs.data(), static_cast<Eigen::Index>(diffs.size()));
  const Eigen::VectorXd ranks = midranks(d.cwiseAbs());
  double positive = 0.0;
  double negative = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) (d[i] > 0 ? positive : negative) += ranks[i];
  result.statistic = std::min(positive, negative);
  const int n = result.effective_n;

  if (n <= kExactLimit) {
    std::vector<int> doubled(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) doubled[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(2.0 * ranks[i]));
    const auto limit = static_cast<int>(std::lround(2.0 * result.statistic));
    const double tail = std::ldexp(static_cast<double>(count_lower_tail(doubled, limit)), -n);
    result.p_value = std::min(1.0, 2.0 * tail);
    result.exact = true;
    return result;
  }

  // Tie correction from groups of equal |d|.
  std::vector<double> sorted(ranks.data(), ranks.data() + ranks.size());
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double nn = n;
  const double mean = nn * (nn + 1.0) / 4.0;
  const double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double z = std::max(0.0, std::abs(result.statistic - mean) - 0.5) / std::sqrt(variance);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  result.exact = false;
  return result;
}

double wilcoxon_signed_rank(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y) {
  return wilcoxon_signed_rank_test(x, y).p_value;
}

namespace {

void check_pvalues(const Eigen::Ref<const Eigen::VectorXd>& p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw StatsError("p-values must lie in [0,1]");
  }
}

}  // namespace

Eigen::VectorXd finner_adjust(const Eigen::Ref<const Eigen::VectorXd>& p) {
  check_pvalues(p);
  const Eigen::Index m = p.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return p[a] < p[b]; });
  Eigen::VectorXd adjusted(m);
  double running = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double pj = p[order[static_cast<std::size_t>(j)]];
    const double exponent = static_cast<double>(m) / static_cast<double>(j + 1);
    const double step = std::min(1.0, -std::expm1(exponent * std::log1p(-pj)));
    running = std::max(running, step);
    adjusted[order[static_cast<std::size_t>(j)]] = running;
  }
  return adjusted;
}

Eigen::VectorXd bonferroni_adjust(const Eigen::Ref<const Eigen::VectorXd>& p) {
  check_pvalues(p);
  return (p * static_cast<double>(p.size())).cwiseMin(1.0);
}

Comparison compare_pipeline(const LossMatrix& matrix, double alpha, Correction correction,
                            bool force) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError("alpha must lie in (0,1)");
  Comparison out;
  out.ranks = average_ranks(matrix);
  out.omnibus = friedman_imandavenport(matrix, alpha);
  if (!out.omnibus.rejected && !force) {
    out.halted = true;
    return out;
  }
  const int k = matrix.methods();
  const int m = k * (k - 1) / 2;
  Eigen::VectorXd raw(m);
  for (int i = 1, h = 0; i < k; ++i) {
    for (int j = 0; j < i; ++j, ++h) {
      raw[h] = wilcoxon_signed_rank(matrix.losses.col(i), matrix.losses.col(j));
    }
  }
  const Eigen::VectorXd adjusted =
      correction == Correction::kFinner ? finner_adjust(raw) : bonferroni_adjust(raw);

  PValueMatrix& pv = out.pvalues;
  pv.method_names = matrix.method_names;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  pv.raw = Eigen::MatrixXd::Constant(k, k, nan);
  pv.adjusted = Eigen::MatrixXd::Constant(k, k, nan);
  for (int i = 1, h = 0; i < k; ++i) {
    for (int j = 0; j < i; ++j, ++h) {
      pv.raw(i, j) = pv.raw(j, i) = raw[h];
      pv.adjusted(i, j) = pv.adjusted(j, i) = adjusted[h];
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

LossMatrix read_loss_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw StatsError("loss matrix CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "dataset") {
    throw StatsError("loss matrix CSV header must start with 'dataset'");
  }
  LossMatrix matrix;
  matrix.method_names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw StatsError("row '" + (cells.empty() ? std::string() : cells[0]) + "' has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    matrix.dataset_ids.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) {
        throw StatsError("row '" + cells[0] + "' has a non-numeric loss '" + cells[c] + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  matrix.losses.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(matrix.method_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      matrix.losses(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  matrix.validate();
  return matrix;
}

void write_loss_matrix_csv(std::ostream& out, const LossMatrix& matrix) {
  out << "dataset";
  for (const auto& m : matrix.method_names) out << ',' << m;
  out << '\n';
  for (Eigen::Index i = 0; i < matrix.losses.rows(); ++i) {
    out << matrix.dataset_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.losses.cols(); ++j) out << ',' << shortest(matrix.losses(i, j));
    out << '\n';
  }
}

void write_pvalue_csv(std::ostream& out, const PValueMatrix& matrix, bool adjusted) {
  const Eigen::MatrixXd& values = adjusted ? matrix.adjusted : matrix.raw;
  for (const auto& m : matrix.method_names) out << ',' << m;
  out << '\n';
  const auto k = static_cast<Eigen::Index>(matrix.method_names.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    out << matrix.method_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      out << ',';
      if (j < i) out << shortest(values(i, j));
      else if (j == i) out << "NA";
    }
    out << '\n';
  }
}

}  // namespace cashlab
