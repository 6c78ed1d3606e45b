#include "cashlab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cashlab/parallel.hpp"

namespace cashlab {

namespace {

constexpr double kFloorSlack = 1e-9;

// floor() that absorbs representation error of exact quotients like 99/9.
std::int64_t stable_floor(double x) {
  return static_cast<std::int64_t>(std::floor(x + kFloorSlack * std::max(1.0, std::abs(x))));
}

int derive_s_max(double r_min, double eta) {
  return static_cast<int>(stable_floor(-std::log(r_min) / std::log(eta)));
}

void check_eta(double eta) {
  if (!std::isfinite(eta) || !(eta > 1.0)) throw ScheduleError("eta must be a finite real > 1");
}

int effective_workers(const EngineOptions& options, const Evaluator& evaluator) {
  return std::max(1, std::min(options.worker_limit, evaluator.max_concurrency()));
}

// Evaluates the pending records in place. Records are pre-filled except for
// `loss`; completion order does not matter.
void evaluate_batch(std::vector<TrialRecord>& batch, const Evaluator& evaluator,
                    const EngineOptions& options) {
  parallel_for(batch.size(), effective_workers(options, evaluator), [&](std::size_t i) {
    TrialRecord& t = batch[i];
    double loss;
    try {
      loss = evaluator.evaluate(t.configuration, t.resource, t.trial_seed);
    } catch (const EvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationError("trial " + std::to_string(t.trial_id) + " (rung " +
                                std::to_string(t.rung) + ", bracket " + std::to_string(t.bracket) +
                                ") failed: " + e.what(),
                            t.trial_id, t.rung, t.bracket);
    }
    if (!std::isfinite(loss)) {
      throw EvaluationError("trial " + std::to_string(t.trial_id) + " (rung " +
                                std::to_string(t.rung) + ", bracket " + std::to_string(t.bracket) +
                                ") returned a non-finite loss",
                            t.trial_id, t.rung, t.bracket);
    }
    t.loss = loss;
  });
}

bool loss_order(const TrialRecord& a, const TrialRecord& b) {
  return a.loss != b.loss ? a.loss < b.loss : a.trial_id < b.trial_id;
}

Configuration draw_configuration(const ConfigurationSpace& space, const ModelDistribution& dist,
                                 std::uint64_t seed, std::int64_t index) {
  SplitMix64 rng(derive_seed(seed, SeedStream::kSample, static_cast<std::uint64_t>(index)));
  return sample_configuration(space, dist, rng);
}

TrialRecord pending_trial(std::int64_t id, Configuration config, double resource, int rung,
                          int bracket, std::uint64_t seed) {
  TrialRecord t;
  t.trial_id = id;
  t.configuration = std::move(config);
  t.resource = resource;
  t.rung = rung;
  t.bracket = bracket;
  t.trial_seed = derive_seed(seed, SeedStream::kTrial, static_cast<std::uint64_t>(id));
  return t;
}

double resource_sum(const std::vector<TrialRecord>& trials) {
  return std::accumulate(trials.begin(), trials.end(), 0.0,
                         [](double acc, const TrialRecord& t) { return acc + t.resource; });
}

RunResult run_successive_halving(const ConfigurationSpace& space, const ModelDistribution& dist,
                                 const Schedule& schedule, const Evaluator& evaluator,
                                 std::uint64_t seed, const EngineOptions& options, int bracket) {
  schedule.validate();
  RunResult result;
  result.bracket_of_winner = bracket;

  const std::int64_t n0 = schedule.rungs.front().configurations;
  std::vector<Configuration> survivors;
  survivors.reserve(static_cast<std::size_t>(n0));
  for (std::int64_t k = 0; k < n0; ++k) survivors.push_back(draw_configuration(space, dist, seed, k));

  std::int64_t next_id = 0;
  std::vector<TrialRecord> rung_trials;
  for (std::size_t i = 0; i < schedule.rungs.size(); ++i) {
    const double resource = schedule.rungs[i].resource;
    rung_trials.clear();
    for (auto& config : survivors) {
      rung_trials.push_back(
          pending_trial(next_id++, std::move(config), resource, static_cast<int>(i), bracket, seed));
    }
    evaluate_batch(rung_trials, evaluator, options);
    result.trials.insert(result.trials.end(), rung_trials.begin(), rung_trials.end());

    if (i + 1 == schedule.rungs.size()) break;
    auto keep = stable_floor(static_cast<double>(rung_trials.size()) / schedule.eta);
    keep = std::clamp<std::int64_t>(keep, 1, static_cast<std::int64_t>(rung_trials.size()));
    std::sort(rung_trials.begin(), rung_trials.end(), loss_order);
    survivors.clear();
    for (std::int64_t k = 0; k < keep; ++k) {
      survivors.push_back(rung_trials[static_cast<std::size_t>(k)].configuration);
    }
  }

  const auto best = std::min_element(rung_trials.begin(), rung_trials.end(), loss_order);
  result.winner = best->configuration;
  result.winner_loss = best->loss;
  result.budget_spent = resource_sum(result.trials);
  return result;
}

}  // namespace

void Schedule::validate() const {
  check_eta(eta);
  if (s_max < 0) throw ScheduleError("s_max must be nonnegative");
  if (rungs.size() != static_cast<std::size_t>(s_max) + 1) {
    throw ScheduleError("schedule needs s_max + 1 rungs");
  }
  for (std::size_t i = 0; i < rungs.size(); ++i) {
    const Rung& r = rungs[i];
    if (r.configurations < 1) throw ScheduleError("every rung needs at least one configuration");
    if (!(r.resource > 0.0) || r.resource > 1.0) throw ScheduleError("rung resource must be in (0,1]");
    if (i > 0) {
      if (r.configurations > rungs[i - 1].configurations) {
        throw ScheduleError("rung sizes must be nonincreasing");
      }
      if (!(r.resource > rungs[i - 1].resource)) {
        throw ScheduleError("rung resources must be strictly increasing");
      }
    }
  }
  if (rungs.back().resource != 1.0) throw ScheduleError("final rung must use the full resource");
  const double need = std::pow(eta, s_max);
  if (static_cast<double>(rungs.front().configurations) < need * (1.0 - kFloorSlack)) {
    throw ScheduleError("n0 = " + std::to_string(rungs.front().configurations) +
                        " is below eta^s_max = " + std::to_string(need));
  }
}

Schedule make_schedule(std::int64_t n0, double r_min, double eta) {
  check_eta(eta);
  if (n0 < 1) throw ScheduleError("n0 must be positive");
  if (!(r_min > 0.0) || r_min > 1.0) throw ScheduleError("r_min must be in (0,1]");
  Schedule schedule;
  schedule.eta = eta;
  schedule.s_max = derive_s_max(r_min, eta);
  const double need = std::pow(eta, schedule.s_max);
  if (static_cast<double>(n0) < need * (1.0 - kFloorSlack)) {
    throw ScheduleError("n0 = " + std::to_string(n0) + " violates n0 >= eta^s_max = " +
                        std::to_string(need));
  }
  for (int i = 0; i <= schedule.s_max; ++i) {
    Rung rung;
    rung.configurations = stable_floor(static_cast<double>(n0) / std::pow(eta, i));
    rung.resource = 1.0 / std::pow(eta, schedule.s_max - i);
    schedule.rungs.push_back(rung);
  }
  return schedule;
}

double budget_of(const Schedule& schedule) {
  double total = 0.0;
  for (std::size_t i = 0; i < schedule.rungs.size(); ++i) {
    const Rung& r = schedule.rungs[i];
    const double divisor = std::pow(schedule.eta, schedule.s_max - static_cast<int>(i));
    const auto n = static_cast<double>(r.configurations);
    total += (1.0 / divisor == r.resource) ? n / divisor : n * r.resource;
  }
  return total;
}

std::vector<Schedule> hyperband_brackets(std::int64_t n, double eta, const std::vector<int>& s_list) {
  check_eta(eta);
  if (n < 1) throw ScheduleError("n must be positive");
  if (s_list.empty()) throw ScheduleError("hyperband needs at least one bracket");
  std::vector<Schedule> brackets;
  for (int s : s_list) {
    if (s < 0) throw ScheduleError("bracket depth s must be nonnegative");
    const double scale = std::pow(eta, s);
    const auto n0 = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * scale / (s + 1)));
    try {
      Schedule schedule = make_schedule(n0, 1.0 / scale, eta);
      if (schedule.s_max != s) throw ScheduleError("derived depth differs from s");
      brackets.push_back(std::move(schedule));
    } catch (const ScheduleError& e) {
      throw ScheduleError("bracket s=" + std::to_string(s) + ": " + e.what());
    }
  }
  return brackets;
}

std::uint64_t bracket_seed(std::uint64_t run_seed, std::size_t index) {
  return derive_seed(run_seed, SeedStream::kBracket, index);
}

RunResult random_search(const ConfigurationSpace& space, const ModelDistribution& dist,
                        std::int64_t n, const Evaluator& evaluator, std::uint64_t seed,
                        const EngineOptions& options) {
  if (n < 1) throw ScheduleError("random search needs n >= 1");
  RunResult result;
  result.trials.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    result.trials.push_back(
        pending_trial(k, draw_configuration(space, dist, seed, k), 1.0, 0, -1, seed));
  }
  evaluate_batch(result.trials, evaluator, options);
  const auto best = std::min_element(result.trials.begin(), result.trials.end(), loss_order);
  result.winner = best->configuration;
  result.winner_loss = best->loss;
  result.budget_spent = resource_sum(result.trials);
  return result;
}

RunResult successive_halving(const ConfigurationSpace& space, const ModelDistribution& dist,
                             const Schedule& schedule, const Evaluator& evaluator,
                             std::uint64_t seed, const EngineOptions& options) {
  return run_successive_halving(space, dist, schedule, evaluator, seed, options, -1);
}

RunResult hyperband(const ConfigurationSpace& space, const ModelDistribution& dist,
                    std::int64_t n, double eta, const std::vector<int>& s_list,
                    const Evaluator& evaluator, std::uint64_t seed, const EngineOptions& options) {
  const auto brackets = hyperband_brackets(n, eta, s_list);
  RunResult result;
  bool have_winner = false;
  std::int64_t id_offset = 0;
  for (std::size_t b = 0; b < brackets.size(); ++b) {
    RunResult run;
    try {
      run = run_successive_halving(space, dist, brackets[b], evaluator, bracket_seed(seed, b),
                                   options, s_list[b]);
    } catch (const EvaluationError& e) {
      throw EvaluationError("bracket " + std::to_string(b) + ": " + e.what(), e.trial_id() + id_offset,
                            e.rung(), e.bracket());
    }
    for (auto& t : run.trials) t.trial_id += id_offset;
    id_offset += static_cast<std::int64_t>(run.trials.size());
    // Strict improvement keeps the earlier bracket on ties.
    if (!have_winner || run.winner_loss < result.winner_loss) {
      result.winner = run.winner;
      result.winner_loss = run.winner_loss;
      result.bracket_of_winner = s_list[b];
      have_winner = true;
    }
    result.trials.insert(result.trials.end(), std::make_move_iterator(run.trials.begin()),
                         std::make_move_iterator(run.trials.end()));
  }
  result.budget_spent = resource_sum(result.trials);
  return result;
}

void write_run_log(std::ostream& out, const ConfigurationSpace& space, const RunResult& result) {
  auto flatten = [&](nlohmann::json& line, const Configuration& config) {
    line["model"] = space.model(config.model_index).name;
    line["model_index"] = config.model_index;
    const nlohmann::json params = params_to_json(config);
    for (const auto& [name, value] : params.items()) line["hp." + name] = value;
  };
  for (const auto& t : result.trials) {
    nlohmann::json line = nlohmann::json::object();
    line["type"] = "trial";
    line["trial_id"] = t.trial_id;
    flatten(line, t.configuration);
    line["resource"] = t.resource;
    line["loss"] = t.loss;
    line["rung"] = t.rung;
    line["bracket"] = t.bracket;
    line["trial_seed"] = t.trial_seed;
    out << line.dump() << '\n';
  }
  nlohmann::json summary = nlohmann::json::object();
  summary["type"] = "summary";
  flatten(summary, result.winner);
  summary["winner_loss"] = result.winner_loss;
  summary["budget_spent"] = result.budget_spent;
  summary["bracket_of_winner"] = result.bracket_of_winner;
  summary["trials"] = result.trials.size();
  out << summary.dump() << '\n';
}

}  // namespace cashlab
