#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "cashlab/harness.hpp"
#include "cashlab/random.hpp"

namespace cashlab {

namespace {

double normalize(const HyperparameterSpec& hp, double value) {
  if (hp.scale == Scale::kLog) {
    const double lo = std::log(hp.lower);
    return (std::log(value) - lo) / (std::log(hp.upper) - lo);
  }
  return (value - hp.lower) / (hp.upper - hp.lower);
}

double denormalize(const HyperparameterSpec& hp, double u) {
  if (hp.scale == Scale::kLog) {
    const double lo = std::log(hp.lower);
    return std::clamp(std::exp(lo + u * (std::log(hp.upper) - lo)), hp.lower, hp.upper);
  }
  return std::clamp(hp.lower + u * (hp.upper - hp.lower), hp.lower, hp.upper);
}

}  // namespace

SyntheticProblem::SyntheticProblem(std::string problem_id, ConfigurationSpace space,
                                   std::uint64_t landscape_seed, double noise_scale,
                                   int inner_splits, const LandscapeParams& params)
    : problem_id_(std::move(problem_id)),
      space_(std::move(space)),
      landscape_seed_(landscape_seed),
      noise_scale_(noise_scale),
      inner_splits_(inner_splits) {
  if (!(noise_scale_ >= 0.0) || !std::isfinite(noise_scale_)) {
    throw HarnessError("noise_scale must be finite and >= 0");
  }
  if (inner_splits_ < 1) throw HarnessError("inner_splits must be >= 1");

  const int widest = std::max(1, space_.hyperparameter_counts().maxCoeff());
  int best_model = 0;
  for (int m = 0; m < space_.model_count(); ++m) {
    SplitMix64 rng(derive_seed(landscape_seed_, SeedStream::kLandscape, static_cast<std::uint64_t>(m)));
    const ModelSpec& model = space_.model(m);
    ModelLandscape land;
    land.level = params.base + params.spread * rng.uniform() -
                 params.capacity_gain * model.hyperparameter_count() / widest;
    for (const auto& hp : model.hyperparameters) {
      HyperparameterLandscape h;
      switch (hp.kind) {
        case HyperparameterKind::kContinuous:
          h.curvature = params.curvature_min + (params.curvature_max - params.curvature_min) * rng.uniform();
          h.target = rng.uniform();
          break;
        case HyperparameterKind::kInteger: {
          h.curvature = params.curvature_min + (params.curvature_max - params.curvature_min) * rng.uniform();
          const auto lo = static_cast<std::int64_t>(hp.lower);
          const auto span = static_cast<std::uint64_t>(hp.upper - hp.lower) + 1;
          h.target = normalize(hp, static_cast<double>(lo + static_cast<std::int64_t>(rng.below(span))));
          break;
        }
        case HyperparameterKind::kCategorical: {
          h.categories.resize(hp.categories.size());
          for (auto& c : h.categories) c = params.category_penalty * rng.uniform();
          h.categories[rng.below(h.categories.size())] = 0.0;
          break;
        }
      }
      land.hyperparameters.push_back(std::move(h));
    }
    if (m == 0 || land.level < landscapes_[static_cast<std::size_t>(best_model)].level) best_model = m;
    landscapes_.push_back(std::move(land));
  }

  optimum_.model_index = best_model;
  const ModelSpec& model = space_.model(best_model);
  const ModelLandscape& land = landscapes_[static_cast<std::size_t>(best_model)];
  for (std::size_t n = 0; n < model.hyperparameters.size(); ++n) {
    const HyperparameterSpec& hp = model.hyperparameters[n];
    const HyperparameterLandscape& h = land.hyperparameters[n];
    switch (hp.kind) {
      case HyperparameterKind::kContinuous:
        optimum_.values.emplace(hp.name, denormalize(hp, h.target));
        break;
      case HyperparameterKind::kInteger:
        optimum_.values.emplace(hp.name, static_cast<std::int64_t>(std::llround(denormalize(hp, h.target))));
        break;
      case HyperparameterKind::kCategorical: {
        const auto best = std::min_element(h.categories.begin(), h.categories.end()) - h.categories.begin();
        optimum_.values.emplace(hp.name, hp.categories[static_cast<std::size_t>(best)]);
        break;
      }
    }
  }
  optimum_loss_ = true_loss(optimum_);
}

double SyntheticProblem::true_loss(const Configuration& config) const {
  const ModelSpec& model = space_.model(config.model_index);
  const ModelLandscape& land = landscapes_[static_cast<std::size_t>(config.model_index)];
  double loss = land.level;
  for (std::size_t n = 0; n < model.hyperparameters.size(); ++n) {
    const HyperparameterSpec& hp = model.hyperparameters[n];
    const HyperparameterLandscape& h = land.hyperparameters[n];
    const HyperparameterValue& v = config.values.at(hp.name);
    switch (hp.kind) {
      case HyperparameterKind::kContinuous: {
        const double d = normalize(hp, std::get<double>(v)) - h.target;
        loss += h.curvature * d * d;
        break;
      }
      case HyperparameterKind::kInteger: {
        const double d = normalize(hp, static_cast<double>(std::get<std::int64_t>(v))) - h.target;
        loss += h.curvature * d * d;
        break;
      }
      case HyperparameterKind::kCategorical: {
        const auto& label = std::get<std::string>(v);
        const auto idx = std::find(hp.categories.begin(), hp.categories.end(), label) - hp.categories.begin();
        loss += h.categories.at(static_cast<std::size_t>(idx));
        break;
      }
    }
  }
  return loss;
}

SyntheticProblem generate_problem(const ConfigurationSpace& space, std::uint64_t landscape_seed,
                                  double noise_scale, int inner_splits,
                                  const LandscapeParams& params) {
  return SyntheticProblem("seed-" + std::to_string(landscape_seed), space, landscape_seed,
                          noise_scale, inner_splits, params);
}

double synthetic_evaluate(const SyntheticProblem& problem, const Configuration& config,
                          double resource, std::uint64_t trial_seed) {
  if (!(resource > 0.0) || resource > 1.0) throw HarnessError("resource must lie in (0,1]");
  const double truth = problem.true_loss(config);
  const double sigma = problem.noise_scale() * std::sqrt((1.0 - resource) / resource);
  if (sigma == 0.0) return truth;
  SplitMix64 rng(derive_seed(fnv1a(problem.problem_id()) ^ digest(config), SeedStream::kNoise,
                             trial_seed));
  std::normal_distribution<double> normal(0.0, sigma);
  double sum = 0.0;
  for (int s = 0; s < problem.inner_splits(); ++s) sum += normal(rng);
  return truth + sum / problem.inner_splits();
}

// ---------------------------------------------------------------------------

void Suite::validate() const {
  if (reps < 1) throw HarnessError("suite reps must be >= 1");
  if (problems.empty()) throw HarnessError("suite has no problems");
  std::vector<std::string> ids;
  for (const auto& p : problems) ids.push_back(p.problem_id());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw HarnessError("suite problem ids must be unique");
  }
}

Suite parse_suite(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw HarnessError("suite document must be an object");
  if (doc.value("format", 1) != 1) throw HarnessError("unsupported suite format");
  if (!doc.contains("space")) throw HarnessError("suite needs 'space'");

  const auto& space_node = doc["space"];
  std::optional<ConfigurationSpace> space;
  if (space_node.is_string()) {
    std::filesystem::path p = space_node.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    space = load_space(p.string());
  } else {
    space = parse_space(space_node.dump());
  }

  LandscapeParams params;
  if (auto it = doc.find("landscape"); it != doc.end()) {
    params.base = it->value("base", params.base);
    params.spread = it->value("spread", params.spread);
    params.capacity_gain = it->value("capacity_gain", params.capacity_gain);
    params.curvature_min = it->value("curvature_min", params.curvature_min);
    params.curvature_max = it->value("curvature_max", params.curvature_max);
    params.category_penalty = it->value("category_penalty", params.category_penalty);
  }

  Suite suite;
  suite.reps = doc.value("reps", 1);
  suite.inner_splits = doc.value("inner_splits", 10);
  suite.seed = doc.value("seed", std::uint64_t{0});
  const int count = doc.value("problems", 1);
  const auto landscape_seed = doc.value("landscape_seed", std::uint64_t{0});
  double noise_lo = 0.0;
  double noise_hi = 0.0;
  if (auto it = doc.find("noise_scale"); it != doc.end()) {
    if (it->is_array() && it->size() == 2) {
      noise_lo = (*it)[0].get<double>();
      noise_hi = (*it)[1].get<double>();
    } else if (it->is_number()) {
      noise_lo = noise_hi = it->get<double>();
    } else {
      throw HarnessError("noise_scale must be a number or [lo, hi]");
    }
  }
  if (noise_lo < 0.0 || noise_hi < noise_lo) {
    throw HarnessError("noise_scale range is invalid");
  }
  if (count < 1) throw HarnessError("suite needs problems >= 1");
  for (int p = 0; p < count; ++p) {
    const std::uint64_t problem_seed =
        derive_seed(landscape_seed, SeedStream::kLandscape, static_cast<std::uint64_t>(p));
    SplitMix64 rng(derive_seed(problem_seed, SeedStream::kNoise, 0));
    const double noise = noise_lo + (noise_hi - noise_lo) * rng.uniform();
    char id[32];
    std::snprintf(id, sizeof id, "p%03d", p);
    suite.problems.emplace_back(id, *space, problem_seed, noise, suite.inner_splits, params);
  }
  suite.validate();
  return suite;
}

}  // namespace cashlab
