#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cashlab/worstcase.hpp"
#include "oracle_values.hpp"

using namespace cashlab;

namespace {

ModelDistribution uniform_over(int m) { return ModelDistribution(Eigen::VectorXd::Constant(m, 1.0 / m)); }

}  // namespace

TEST_CASE("closed form on hand-checked cases") {
  CHECK(failure_prob_uniform(WorstCaseSpec::from_volumes({1}, 5)) == 0.0);
  CHECK(failure_prob_uniform(WorstCaseSpec::from_volumes({1, 1}, 1)) == doctest::Approx(0.5));
  const auto spec = WorstCaseSpec::from_volumes({1, 3}, 10);
  CHECK(failure_prob_uniform(spec) == doctest::Approx(oracle::kUniform13K10).epsilon(1e-14));
  CHECK(failure_prob_weighted(spec) == doctest::Approx(oracle::kWeighted13K10).epsilon(1e-14));
  CHECK(theorem_gap(spec) == doctest::Approx(oracle::kGap13K10).epsilon(1e-13));

  const auto k1 = WorstCaseSpec::from_volumes({1, 3}, 1);
  CHECK(failure_prob_uniform(k1) == doctest::Approx(2.0 / 3.0));
  CHECK(failure_prob_weighted(k1) == doctest::Approx(0.75));
  CHECK(theorem_gap(k1) == doctest::Approx(oracle::kGap13K1).epsilon(1e-13));
}

TEST_CASE("range lengths multiply into volumes") {
  WorstCaseSpec spec{{{2, 3}, {4}}, 7};
  const Eigen::VectorXd v = volumes(spec);
  CHECK(v[0] == 6.0);
  CHECK(v[1] == 4.0);
  CHECK_THROWS_AS(WorstCaseSpec({{{0}}, 1}).validate(), WorstCaseError);
  CHECK_THROWS_AS(WorstCaseSpec({{{1}}, 0}).validate(), WorstCaseError);
  CHECK_THROWS_AS(WorstCaseSpec({{}, 1}).validate(), WorstCaseError);
}

TEST_CASE("uniform and weighted agree with the general closed form") {
  for (const auto& c : oracle::gap_grid()) {
    const auto spec = WorstCaseSpec::from_volumes(c.theta, c.budget);
    const int m = spec.model_count();
    CHECK(std::abs(failure_prob_uniform(spec) - failure_prob_closed(spec, uniform_over(m))) <= 1e-12);
    const Eigen::VectorXd theta = volumes(spec);
    const double weighted_closed = failure_prob_closed(spec, normalized(theta));
    CHECK(std::abs(failure_prob_weighted(spec) - weighted_closed) <= 1e-12);
    CHECK(theorem_gap(spec) == doctest::Approx(c.gap).epsilon(1e-10));
  }
}

TEST_CASE("failure probability strictly decreases in K") {
  const Eigen::VectorXd p = (Eigen::VectorXd(3) << 0.5, 0.3, 0.2).finished();
  const ModelDistribution dist(p);
  double previous = 1.0;
  for (std::int64_t k = 1; k <= 200; ++k) {
    const double now = failure_prob_closed(WorstCaseSpec::from_volumes({2, 5, 9}, k), dist);
    CHECK(now < previous);
    previous = now;
  }
  CHECK(failure_prob_uniform(WorstCaseSpec::from_volumes({2, 5, 9}, 100000)) < 1e-12);
}

TEST_CASE("equal volumes make the gap vanish") {
  for (int m : {2, 5, 11}) {
    for (std::int64_t k : {1, 10, 100}) {
      const auto spec = WorstCaseSpec::from_volumes(std::vector<std::int64_t>(static_cast<std::size_t>(m), 4), k);
      CHECK(std::abs(theorem_gap(spec)) <= 1e-12);
    }
  }
}

TEST_CASE("a distribution putting more than theta mass is rejected") {
  // p/theta > 1 cannot be a probability.
  const Eigen::ArrayXd p = (Eigen::ArrayXd(2) << 0.9, 0.1).finished();
  const Eigen::ArrayXd theta = (Eigen::ArrayXd(2) << 0.5, 1.0).finished();
  CHECK_THROWS_AS(failure_probability(p, theta, 3), WorstCaseError);
}

TEST_CASE("Monte Carlo trivial cases") {
  const auto certain = failure_prob_monte_carlo(WorstCaseSpec::from_volumes({1}, 1), uniform_over(1), 1000, 3);
  CHECK(certain.estimate == 0.0);
  CHECK(certain.failures == 0);
  const auto coin = failure_prob_monte_carlo(WorstCaseSpec::from_volumes({1, 1}, 1), uniform_over(2), 200000, 5);
  CHECK(std::abs(coin.estimate - 0.5) <= 3.0 * coin.stderr_);
}

TEST_CASE("Monte Carlo is independent of the worker count") {
  const auto spec = WorstCaseSpec::from_volumes({1, 3}, 10);
  const auto a = failure_prob_monte_carlo(spec, uniform_over(2), 300000, 11, 1);
  const auto b = failure_prob_monte_carlo(spec, uniform_over(2), 300000, 11, 3);
  CHECK(a.failures == b.failures);
  CHECK(a.estimate == b.estimate);
}

TEST_CASE("Monte Carlo covers the closed form in nearly every seeded run") {
  WorstCaseSpec spec{{{1, 2}, {3}, {1}}, 6};
  const Eigen::VectorXd p = (Eigen::VectorXd(3) << 0.5, 0.3, 0.2).finished();
  const ModelDistribution dist(p);
  const double exact = failure_prob_closed(spec, dist);
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto mc = failure_prob_monte_carlo(spec, dist, 100000, seed);
    if (std::abs(mc.estimate - exact) <= 3.0 * mc.stderr_) ++inside;
  }
  CHECK(inside >= 99);
}

TEST_CASE("Monte Carlo rejects unusable sample counts") {
  const auto spec = WorstCaseSpec::from_volumes({1, 3}, 10);
  CHECK_THROWS_AS(failure_prob_monte_carlo(spec, uniform_over(2), 0, 1), WorstCaseError);
  CHECK_THROWS_AS(failure_prob_monte_carlo(spec, uniform_over(2), std::int64_t{1} << 62, 1), WorstCaseError);
  CHECK_THROWS_AS(failure_prob_monte_carlo(spec, uniform_over(3), 10, 1), WorstCaseError);
}

TEST_CASE("lab documents and reports") {
  const auto spec = parse_worstcase_spec(nlohmann::json::parse(R"({"theta":[1,3],"K":10})"));
  CHECK(spec.budget == 10);
  CHECK(volumes(spec)[1] == 3.0);
  const auto ranged = parse_worstcase_spec(nlohmann::json::parse(R"({"range_lengths":[[2,2],[1]],"K":2})"));
  CHECK(volumes(ranged)[0] == 4.0);
  CHECK_THROWS_AS(parse_worstcase_spec(nlohmann::json::parse(R"({"theta":[1.5],"K":1})")), WorstCaseError);
  CHECK_THROWS_AS(parse_worstcase_spec(nlohmann::json::parse(R"({"theta":[1]})")), WorstCaseError);

  bool custom = false;
  const auto w = lab_distribution(nlohmann::json::parse(R"({"sampling":"weighted"})"), spec, &custom);
  CHECK_FALSE(custom);
  CHECK(w[1] == doctest::Approx(0.75));
  const auto c = lab_distribution(nlohmann::json::parse(R"({"sampling":{"custom":[1,1]}})"), spec, &custom);
  CHECK(custom);
  CHECK(c[0] == doctest::Approx(0.5));

  FailureReport report;
  report.p_fail_uniform = 0.25;
  report.p_fail_weighted = 0.125;
  const auto j = to_json(report);
  CHECK(j["p_fail_uniform"] == 0.25);
  CHECK(j["mc_estimate"].is_null());
}

TEST_CASE("sweep CSV has the documented columns") {
  SweepRow row;
  row.spec = WorstCaseSpec::from_volumes({1, 3}, 10);
  row.p_uniform = failure_prob_uniform(row.spec);
  row.p_weighted = failure_prob_weighted(row.spec);
  row.gap = theorem_gap(row.spec);
  std::ostringstream out;
  write_sweep_csv(out, {row});
  std::istringstream in(out.str());
  std::string header;
  std::string line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "M,K,theta_spec,p_uniform,p_weighted,gap,mc_estimate,mc_stderr");
  CHECK(line.rfind("2,10,1;3,", 0) == 0);
  CHECK(line.back() == ',');
}
