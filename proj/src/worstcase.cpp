#include "cashlab/worstcase.hpp"

#include <charconv>
#include <numeric>

#include "cashlab/parallel.hpp"
#include "cashlab/random.hpp"

namespace cashlab {

namespace {

constexpr std::int64_t kChunk = 1 << 16;
constexpr std::int64_t kMaxSamples = std::int64_t{1} << 53;

std::string shortest(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

}  // namespace

void WorstCaseSpec::validate() const {
  if (range_lengths.empty()) throw WorstCaseError("worst-case spec needs M >= 1 models");
  if (budget < 1) throw WorstCaseError("budget K must be >= 1");
  for (const auto& lengths : range_lengths) {
    for (auto len : lengths) {
      if (len < 1) throw WorstCaseError("range lengths must be integers >= 1");
    }
  }
}

WorstCaseSpec WorstCaseSpec::from_volumes(const std::vector<std::int64_t>& theta,
                                          std::int64_t budget) {
  WorstCaseSpec spec;
  for (auto t : theta) spec.range_lengths.push_back({t});
  spec.budget = budget;
  spec.validate();
  return spec;
}

Eigen::VectorXd volumes(const WorstCaseSpec& spec) {
  Eigen::VectorXd theta(spec.model_count());
  for (int m = 0; m < spec.model_count(); ++m) {
    const auto& lengths = spec.range_lengths[static_cast<std::size_t>(m)];
    theta[m] = std::accumulate(lengths.begin(), lengths.end(), 1.0,
                               [](double acc, std::int64_t len) { return acc * static_cast<double>(len); });
  }
  return theta;
}

double failure_prob_closed(const WorstCaseSpec& spec, const ModelDistribution& dist) {
  spec.validate();
  if (dist.size() != spec.model_count()) {
    throw WorstCaseError("distribution has " + std::to_string(dist.size()) + " entries for " +
                         std::to_string(spec.model_count()) + " models");
  }
  return failure_probability(dist.probabilities().array(), volumes(spec).array(), spec.budget);
}

double failure_prob_uniform(const WorstCaseSpec& spec) {
  spec.validate();
  const int m = spec.model_count();
  return failure_probability(Eigen::ArrayXd::Constant(m, 1.0 / m), volumes(spec).array(),
                             spec.budget);
}

double failure_prob_weighted(const WorstCaseSpec& spec) {
  spec.validate();
  const double total = volumes(spec).sum();
  return std::exp(static_cast<double>(spec.budget) * std::log1p(-1.0 / total));
}

double theorem_gap(const WorstCaseSpec& spec) {
  return failure_prob_uniform(spec) - failure_prob_weighted(spec);
}

MonteCarloEstimate failure_prob_monte_carlo(const WorstCaseSpec& spec, const ModelDistribution& dist,
                                            std::int64_t samples, std::uint64_t seed, int workers) {
  spec.validate();
  if (samples < 1) throw WorstCaseError("samples must be >= 1");
  if (samples > kMaxSamples) throw WorstCaseError("sample count overflows the failure counter");
  if (dist.size() != spec.model_count()) throw WorstCaseError("distribution size mismatch");

  const auto models = static_cast<std::uint64_t>(spec.model_count());
  const auto chunks = static_cast<std::size_t>((samples + kChunk - 1) / kChunk);
  std::vector<std::int64_t> failures(chunks, 0);

  parallel_for(chunks, workers, [&](std::size_t c) {
    SplitMix64 rng(derive_seed(seed, SeedStream::kMonteCarlo, c));
    const std::int64_t begin = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t end = std::min(samples, begin + kChunk);
    std::vector<std::uint64_t> cell;
    std::int64_t failed = 0;
    for (std::int64_t s = begin; s < end; ++s) {
      const auto best_model = static_cast<int>(rng.below(models));
      const auto& lengths = spec.range_lengths[static_cast<std::size_t>(best_model)];
      cell.resize(lengths.size());
      for (std::size_t n = 0; n < lengths.size(); ++n) {
        cell[n] = rng.below(static_cast<std::uint64_t>(lengths[n]));
      }
      bool found = false;
      for (std::int64_t k = 0; k < spec.budget && !found; ++k) {
        if (dist.draw(rng) != best_model) continue;
        bool match = true;
        for (std::size_t n = 0; n < lengths.size(); ++n) {
          match = (rng.below(static_cast<std::uint64_t>(lengths[n])) == cell[n]) && match;
        }
        found = match;
      }
      failed += found ? 0 : 1;
    }
    failures[c] = failed;
  });

  MonteCarloEstimate out;
  out.samples = samples;
  out.failures = std::accumulate(failures.begin(), failures.end(), std::int64_t{0});
  out.estimate = static_cast<double>(out.failures) / static_cast<double>(samples);
  out.stderr_ = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(samples));
  return out;
}

nlohmann::json to_json(const FailureReport& report) {
  nlohmann::json node = nlohmann::json::object();
  node["p_fail_uniform"] = report.p_fail_uniform;
  node["p_fail_weighted"] = report.p_fail_weighted;
  node["p_fail_custom"] = report.p_fail_custom ? nlohmann::json(*report.p_fail_custom) : nullptr;
  node["mc_estimate"] = report.mc_estimate ? nlohmann::json(*report.mc_estimate) : nullptr;
  node["mc_stderr"] = report.mc_stderr ? nlohmann::json(*report.mc_stderr) : nullptr;
  node["samples"] = report.samples ? nlohmann::json(*report.samples) : nullptr;
  return node;
}

WorstCaseSpec parse_worstcase_spec(const nlohmann::json& node) {
  if (!node.is_object()) throw WorstCaseError("worst-case spec must be an object");
  WorstCaseSpec spec;
  auto k = node.find("K");
  if (k == node.end() || !k->is_number_integer()) throw WorstCaseError("spec needs integer 'K'");
  spec.budget = k->get<std::int64_t>();
  if (auto it = node.find("range_lengths"); it != node.end()) {
    if (!it->is_array()) throw WorstCaseError("'range_lengths' must be a list of lists");
    for (const auto& model : *it) {
      if (!model.is_array()) throw WorstCaseError("'range_lengths' must be a list of lists");
      std::vector<std::int64_t> lengths;
      for (const auto& len : model) {
        if (!len.is_number_integer()) throw WorstCaseError("range lengths must be integers");
        lengths.push_back(len.get<std::int64_t>());
      }
      spec.range_lengths.push_back(std::move(lengths));
    }
  } else if (auto th = node.find("theta"); th != node.end() && th->is_array()) {
    for (const auto& t : *th) {
      if (!t.is_number_integer()) throw WorstCaseError("theta entries must be integers");
      spec.range_lengths.push_back({t.get<std::int64_t>()});
    }
  } else {
    throw WorstCaseError("spec needs 'range_lengths' or 'theta'");
  }
  spec.validate();
  return spec;
}

ModelDistribution lab_distribution(const nlohmann::json& node, const WorstCaseSpec& spec,
                                   bool* is_custom) {
  if (is_custom) *is_custom = false;
  const int m = spec.model_count();
  auto it = node.find("sampling");
  if (it == node.end() || *it == "uniform") {
    return ModelDistribution(Eigen::VectorXd::Constant(m, 1.0 / m));
  }
  if (*it == "weighted") return normalized(volumes(spec));
  if (it->is_object() && it->contains("custom") && (*it)["custom"].is_array()) {
    const auto& w = (*it)["custom"];
    if (static_cast<int>(w.size()) != m) throw WorstCaseError("custom weights need M entries");
    Eigen::VectorXd weights(m);
    for (int i = 0; i < m; ++i) weights[i] = w[static_cast<std::size_t>(i)].get<double>();
    if (is_custom) *is_custom = true;
    return normalized(weights);
  }
  throw WorstCaseError("unknown sampling; use \"uniform\", \"weighted\" or {\"custom\": [...]}");
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "M,K,theta_spec,p_uniform,p_weighted,gap,mc_estimate,mc_stderr\n";
  for (const auto& row : rows) {
    std::string theta;
    const Eigen::VectorXd th = volumes(row.spec);
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      if (i) theta += ';';
      theta += shortest(th[i]);
    }
    out << row.spec.model_count() << ',' << row.spec.budget << ',' << theta << ','
        << shortest(row.p_uniform) << ',' << shortest(row.p_weighted) << ',' << shortest(row.gap)
        << ',' << (row.mc ? shortest(row.mc->estimate) : "") << ','
        << (row.mc ? shortest(row.mc->stderr_) : "") << '\n';
  }
}

}  // namespace cashlab
