#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <sstream>

#include "cashlab/engine.hpp"

using namespace cashlab;

namespace {

ConfigurationSpace toy_space() {
  return ConfigurationSpace({
      {"a", {HyperparameterSpec::continuous("x", 0.0, 1.0)}},
      {"b", {HyperparameterSpec::continuous("x", 0.0, 1.0), HyperparameterSpec::integer("n", 1, 9)}},
  });
}

// Deterministic noisy loss: shrinking noise with resource.
double toy_loss(const Configuration& c, double r, std::uint64_t seed) {
  const double x = std::get<double>(c.values.at("x"));
  SplitMix64 rng(seed);
  return (x - 0.3) * (x - 0.3) + c.model_index * 0.05 + (1.0 - r) * 0.1 * rng.uniform();
}

const FunctionEvaluator kToy(toy_loss);

}  // namespace

TEST_CASE("make_schedule follows the rung formulas") {
  const Schedule s = make_schedule(99, 1.0 / 9.0, 3.0);
  REQUIRE(s.rungs.size() == 3);
  CHECK(s.s_max == 2);
  CHECK(s.rungs[0].configurations == 99);
  CHECK(s.rungs[1].configurations == 33);
  CHECK(s.rungs[2].configurations == 11);
  CHECK(s.rungs[0].resource == doctest::Approx(1.0 / 9.0));
  CHECK(s.rungs[1].resource == doctest::Approx(1.0 / 3.0));
  CHECK(s.rungs[2].resource == 1.0);
  CHECK(budget_of(s) == 33.0);
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("s_max floors the log of r_min") {
  CHECK(make_schedule(9, 0.1, 3.0).s_max == 2);
  CHECK(make_schedule(27, 1.0 / 27.0, 3.0).s_max == 3);
  CHECK(make_schedule(5, 1.0, 3.0).s_max == 0);
  CHECK(make_schedule(4, 0.25, 2.0).s_max == 2);
}

TEST_CASE("bad schedules are rejected") {
  CHECK_THROWS_AS(make_schedule(8, 1.0 / 9.0, 3.0), ScheduleError);
  CHECK_THROWS_AS(make_schedule(9, 0.0, 3.0), ScheduleError);
  CHECK_THROWS_AS(make_schedule(9, 1.5, 3.0), ScheduleError);
  CHECK_THROWS_AS(make_schedule(9, 0.5, 1.0), ScheduleError);
  CHECK_THROWS_AS(make_schedule(0, 1.0, 3.0), ScheduleError);
  Schedule s = make_schedule(9, 1.0 / 9.0, 3.0);
  s.rungs[2].resource = 0.5;
  CHECK_THROWS_AS(s.validate(), ScheduleError);
}

TEST_CASE("Hyperband brackets at n = 66 each spend 66") {
  const auto brackets = hyperband_brackets(66, 3.0, {0, 1, 2});
  REQUIRE(brackets.size() == 3);
  CHECK(brackets[0].rungs[0].configurations == 66);
  CHECK(brackets[1].rungs[0].configurations == 99);
  CHECK(brackets[2].rungs[0].configurations == 198);
  for (const auto& b : brackets) CHECK(budget_of(b) == 66.0);
}

TEST_CASE("random search evaluates n configurations at full resource") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  const RunResult r = random_search(space, dist, 25, kToy, 1);
  REQUIRE(r.trials.size() == 25);
  CHECK(r.budget_spent == 25.0);
  double best = 1e9;
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    CHECK(r.trials[i].trial_id == static_cast<std::int64_t>(i));
    CHECK(r.trials[i].resource == 1.0);
    best = std::min(best, r.trials[i].loss);
  }
  CHECK(r.winner_loss == best);
  CHECK_THROWS_AS(random_search(space, dist, 0, kToy, 1), ScheduleError);
}

TEST_CASE("successive halving keeps the best survivors per rung") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  const Schedule schedule = make_schedule(27, 1.0 / 9.0, 3.0);
  const RunResult r = successive_halving(space, dist, schedule, kToy, 5);
  REQUIRE(r.trials.size() == 27 + 9 + 3);
  CHECK(r.budget_spent == doctest::Approx(budget_of(schedule)));

  std::vector<std::vector<TrialRecord>> rungs(3);
  for (const auto& t : r.trials) rungs[static_cast<std::size_t>(t.rung)].push_back(t);
  for (int i = 1; i < 3; ++i) {
    // Survivors are exactly the lowest-loss configurations of the previous rung.
    auto prev = rungs[static_cast<std::size_t>(i - 1)];
    std::sort(prev.begin(), prev.end(), [](const auto& a, const auto& b) {
      return a.loss < b.loss || (a.loss == b.loss && a.trial_id < b.trial_id);
    });
    std::set<std::uint64_t> expected;
    for (std::size_t j = 0; j < rungs[static_cast<std::size_t>(i)].size(); ++j) {
      expected.insert(digest(prev[j].configuration));
    }
    for (const auto& t : rungs[static_cast<std::size_t>(i)]) {
      CHECK(expected.count(digest(t.configuration)) == 1);
      CHECK(t.resource > rungs[static_cast<std::size_t>(i - 1)].front().resource);
    }
  }
  double best = 1e9;
  for (const auto& t : rungs[2]) best = std::min(best, t.loss);
  CHECK(r.winner_loss == best);
}

TEST_CASE("engine output does not depend on the worker limit") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::hp_count_weighted());
  const RunResult a = hyperband(space, dist, 9, 3.0, {0, 1, 2}, kToy, 17, {1});
  const RunResult b = hyperband(space, dist, 9, 3.0, {0, 1, 2}, kToy, 17, {4});
  CHECK(a.trials == b.trials);
  CHECK(a.winner == b.winner);
  CHECK(a.bracket_of_winner == b.bracket_of_winner);
}

TEST_CASE("max_concurrency bounds in-flight evaluations") {
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  const FunctionEvaluator serial(
      [&](const Configuration& c, double r, std::uint64_t s) {
        const int now = ++active;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        const double loss = toy_loss(c, r, s);
        --active;
        return loss;
      },
      1);
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  random_search(space, dist, 50, serial, 3, {8});
  CHECK(peak.load() == 1);
}

TEST_CASE("Hyperband with one s = 0 bracket is random search on the bracket seed") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  const RunResult hb = hyperband(space, dist, 12, 3.0, {0}, kToy, 99);
  const RunResult rs = random_search(space, dist, 12, kToy, bracket_seed(99, 0));
  REQUIRE(hb.trials.size() == rs.trials.size());
  for (std::size_t i = 0; i < hb.trials.size(); ++i) {
    CHECK(hb.trials[i].configuration == rs.trials[i].configuration);
    CHECK(hb.trials[i].loss == rs.trials[i].loss);
    CHECK(hb.trials[i].bracket == 0);
  }
  CHECK(hb.winner == rs.winner);
  CHECK(hb.bracket_of_winner == 0);
}

TEST_CASE("Hyperband trial ids are unique and brackets labelled by s") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  const RunResult r = hyperband(space, dist, 33, 3.0, {0, 1, 2}, kToy, 4);
  std::set<std::int64_t> ids;
  std::set<int> labels;
  for (const auto& t : r.trials) {
    ids.insert(t.trial_id);
    labels.insert(t.bracket);
  }
  CHECK(ids.size() == r.trials.size());
  CHECK(labels == std::set<int>{0, 1, 2});
  CHECK(r.budget_spent == doctest::Approx(33.0 + 98.0 / 3.0 + 33.0));
  double best = 1e9;
  for (const auto& t : r.trials) {
    if (t.resource == 1.0) best = std::min(best, t.loss);
  }
  CHECK(r.winner_loss == best);
}

TEST_CASE("evaluation failures carry the trial position") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  const FunctionEvaluator nan_at_3([](const Configuration&, double, std::uint64_t) {
    return std::nan("");
  });
  CHECK_THROWS_AS(random_search(space, dist, 5, nan_at_3, 1), EvaluationError);

  std::atomic<int> calls{0};
  const FunctionEvaluator throws_late([&](const Configuration& c, double r, std::uint64_t s) {
    if (r == 1.0) throw std::runtime_error("boom");
    ++calls;
    return toy_loss(c, r, s);
  });
  try {
    successive_halving(space, dist, make_schedule(9, 1.0 / 3.0, 3.0), throws_late, 2);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.rung() == 1);
    CHECK(e.trial_id() == 9);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("run log has one line per trial plus a summary") {
  const ConfigurationSpace space = toy_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  const RunResult r = successive_halving(space, dist, make_schedule(9, 1.0 / 3.0, 3.0), kToy, 8);
  std::ostringstream out;
  write_run_log(out, space, r);
  std::istringstream in(out.str());
  std::string line;
  std::size_t trials = 0;
  nlohmann::json last;
  while (std::getline(in, line)) {
    last = nlohmann::json::parse(line);
    if (last["type"] == "trial") ++trials;
  }
  CHECK(trials == r.trials.size());
  CHECK(last["type"] == "summary");
  CHECK(last["winner_loss"].get<double>() == r.winner_loss);
  CHECK(last.contains("hp.x"));
}
