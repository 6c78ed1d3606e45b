#ifndef CASHLAB_CONFIGSPACE_HPP
#define CASHLAB_CONFIGSPACE_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cashlab/random.hpp"

namespace cashlab {

class SpaceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class HyperparameterKind { kContinuous, kInteger, kCategorical };
enum class Scale { kLinear, kLog };

std::string_view to_string(HyperparameterKind kind);
std::string_view to_string(Scale scale);

struct HyperparameterSpec {
  std::string name;
  HyperparameterKind kind = HyperparameterKind::kContinuous;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::kLinear;
  std::vector<std::string> categories;

  static HyperparameterSpec continuous(std::string name, double lower, double upper,
                                       Scale scale = Scale::kLinear);
  static HyperparameterSpec integer(std::string name, std::int64_t lower, std::int64_t upper,
                                    Scale scale = Scale::kLinear);
  static HyperparameterSpec categorical(std::string name, std::vector<std::string> categories);

  // Throws SpaceError when a range or category invariant is broken.
  void validate() const;

  friend bool operator==(const HyperparameterSpec&, const HyperparameterSpec&) = default;
};

struct ModelSpec {
  std::string name;
  std::vector<HyperparameterSpec> hyperparameters;

  int hyperparameter_count() const { return static_cast<int>(hyperparameters.size()); }
  const HyperparameterSpec* find(std::string_view hp_name) const;
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

class ConfigurationSpace {
 public:
  explicit ConfigurationSpace(std::vector<ModelSpec> models);

  const std::vector<ModelSpec>& models() const { return models_; }
  const ModelSpec& model(int index) const { return models_.at(static_cast<std::size_t>(index)); }
  int model_count() const { return static_cast<int>(models_.size()); }
  std::optional<int> model_index(std::string_view name) const;

  // N_lambda for every model, in document order.
  Eigen::VectorXi hyperparameter_counts() const;

  friend bool operator==(const ConfigurationSpace&, const ConfigurationSpace&) = default;

 private:
  std::vector<ModelSpec> models_;
};

using HyperparameterValue = std::variant<double, std::int64_t, std::string>;

struct Configuration {
  int model_index = 0;
  std::map<std::string, HyperparameterValue> values;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

// Throws SpaceError unless the configuration covers exactly its model's
// hyperparameters with in-range values.
void validate_configuration(const ConfigurationSpace& space, const Configuration& config);

// Stable 64-bit digest over model index and exact value bits.
std::uint64_t digest(const Configuration& config);

// Model-selection probabilities p_lambda.
class ModelDistribution {
 public:
  // Throws SpaceError unless entries are nonnegative and sum to 1 within 1e-12.
  explicit ModelDistribution(Eigen::VectorXd probabilities);

  const Eigen::VectorXd& probabilities() const { return probabilities_; }
  double operator[](int i) const { return probabilities_[i]; }
  int size() const { return static_cast<int>(probabilities_.size()); }

  // Inverse-CDF draw of a model index from one uniform variate.
  int draw(SplitMix64& rng) const;

 private:
  Eigen::VectorXd probabilities_;
  Eigen::VectorXd cumulative_;
};

struct SamplingScheme {
  enum class Kind { kUniform, kHpCountWeighted, kVolumeWeighted, kCustom };
  Kind kind = Kind::kUniform;
  Eigen::VectorXd weights;  // theta for kVolumeWeighted, w for kCustom

  static SamplingScheme uniform() { return {}; }
  static SamplingScheme hp_count_weighted() { return {Kind::kHpCountWeighted, {}}; }
  static SamplingScheme volume_weighted(Eigen::VectorXd theta) {
    return {Kind::kVolumeWeighted, std::move(theta)};
  }
  static SamplingScheme custom(Eigen::VectorXd w) { return {Kind::kCustom, std::move(w)}; }
};

// Normalizes a strictly positive weight vector into a distribution.
template <typename Derived>
ModelDistribution normalized(const Eigen::MatrixBase<Derived>& weights) {
  if (weights.size() == 0) throw SpaceError("empty weight vector");
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) > 0.0) || !std::isfinite(static_cast<double>(weights(i)))) {
      throw SpaceError("model weight " + std::to_string(i) + " must be finite and > 0");
    }
  }
  const double total = weights.template cast<double>().sum();
  return ModelDistribution(weights.template cast<double>() / total);
}

ModelDistribution model_probabilities(const ConfigurationSpace& space,
                                      const SamplingScheme& scheme);

// Draws a model from dist, then every hyperparameter uniformly (log-uniform
// for scale=log, inclusive for integers).
Configuration sample_configuration(const ConfigurationSpace& space,
                                   const ModelDistribution& dist, SplitMix64& rng);

// theta_lambda: product of range lengths over continuous hyperparameters.
double hyperparameter_volume(const ModelSpec& model);

// {"<hp name>": value, ...}; integers stay integers, categories strings.
nlohmann::json params_to_json(const Configuration& config);
// Inverse of params_to_json for a named model; validates the result.
Configuration configuration_from_json(const ConfigurationSpace& space, std::string_view model,
                                      const nlohmann::json& params);

ConfigurationSpace parse_space(std::string_view text);
ConfigurationSpace load_space(const std::string& path);
std::string serialize_space(const ConfigurationSpace& space);

}  // namespace cashlab

#endif  // CASHLAB_CONFIGSPACE_HPP
