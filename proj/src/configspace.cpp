#include "cashlab/configspace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cashlab {

using nlohmann::json;

std::string_view to_string(HyperparameterKind kind) {
  switch (kind) {
    case HyperparameterKind::kContinuous: return "continuous";
    case HyperparameterKind::kInteger: return "integer";
    case HyperparameterKind::kCategorical: return "categorical";
  }
  return "?";
}

std::string_view to_string(Scale scale) {
  return scale == Scale::kLog ? "log" : "linear";
}

HyperparameterSpec HyperparameterSpec::continuous(std::string name, double lower, double upper,
                                                  Scale scale) {
  return {std::move(name), HyperparameterKind::kContinuous, lower, upper, scale, {}};
}

HyperparameterSpec HyperparameterSpec::integer(std::string name, std::int64_t lower,
                                               std::int64_t upper, Scale scale) {
  return {std::move(name), HyperparameterKind::kInteger, static_cast<double>(lower),
          static_cast<double>(upper), scale, {}};
}

HyperparameterSpec HyperparameterSpec::categorical(std::string name,
                                                   std::vector<std::string> categories) {
  return {std::move(name), HyperparameterKind::kCategorical, 0.0, 1.0, Scale::kLinear,
          std::move(categories)};
}

void HyperparameterSpec::validate() const {
  if (name.empty()) throw SpaceError("hyperparameter with empty name");
  if (kind == HyperparameterKind::kCategorical) {
    if (categories.empty()) {
      throw SpaceError("categorical hyperparameter '" + name + "' has no categories");
    }
    std::set<std::string> seen;
    for (const auto& c : categories) {
      if (!seen.insert(c).second) {
        throw SpaceError("hyperparameter '" + name + "' repeats category '" + c + "'");
      }
    }
    return;
  }
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw SpaceError("hyperparameter '" + name + "' has invalid range: lower must be < upper");
  }
  if (scale == Scale::kLog && !(lower > 0.0)) {
    throw SpaceError("log-scale hyperparameter '" + name + "' needs lower > 0");
  }
  if (kind == HyperparameterKind::kInteger &&
      (lower != std::floor(lower) || upper != std::floor(upper))) {
    throw SpaceError("integer hyperparameter '" + name + "' needs integral bounds");
  }
}

const HyperparameterSpec* ModelSpec::find(std::string_view hp_name) const {
  auto it = std::find_if(hyperparameters.begin(), hyperparameters.end(),
                         [&](const HyperparameterSpec& h) { return h.name == hp_name; });
  return it == hyperparameters.end() ? nullptr : &*it;
}

void ModelSpec::validate() const {
  if (name.empty()) throw SpaceError("model with empty name");
  std::set<std::string_view> seen;
  for (const auto& hp : hyperparameters) {
    hp.validate();
    if (!seen.insert(hp.name).second) {
      throw SpaceError("model '" + name + "' has duplicate hyperparameter '" + hp.name + "'");
    }
  }
}

ConfigurationSpace::ConfigurationSpace(std::vector<ModelSpec> models) : models_(std::move(models)) {
  if (models_.empty()) throw SpaceError("configuration space needs at least one model");
  std::set<std::string_view> seen;
  for (const auto& m : models_) {
    m.validate();
    if (!seen.insert(m.name).second) throw SpaceError("duplicate model name '" + m.name + "'");
  }
}

std::optional<int> ConfigurationSpace::model_index(std::string_view name) const {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

Eigen::VectorXi ConfigurationSpace::hyperparameter_counts() const {
  Eigen::VectorXi counts(model_count());
  for (int i = 0; i < model_count(); ++i) counts[i] = models_[i].hyperparameter_count();
  return counts;
}

void validate_configuration(const ConfigurationSpace& space, const Configuration& config) {
  if (config.model_index < 0 || config.model_index >= space.model_count()) {
    throw SpaceError("model index " + std::to_string(config.model_index) + " out of range");
  }
  const ModelSpec& model = space.model(config.model_index);
  if (config.values.size() != model.hyperparameters.size()) {
    throw SpaceError("configuration for '" + model.name + "' has " +
                     std::to_string(config.values.size()) + " values, expected " +
                     std::to_string(model.hyperparameters.size()));
  }
  for (const auto& hp : model.hyperparameters) {
    auto it = config.values.find(hp.name);
    if (it == config.values.end()) {
      throw SpaceError("configuration misses hyperparameter '" + hp.name + "'");
    }
    const auto& v = it->second;
    bool ok = false;
    switch (hp.kind) {
      case HyperparameterKind::kContinuous:
        if (const double* d = std::get_if<double>(&v)) ok = *d >= hp.lower && *d <= hp.upper;
        break;
      case HyperparameterKind::kInteger:
        if (const auto* i = std::get_if<std::int64_t>(&v)) {
          ok = static_cast<double>(*i) >= hp.lower && static_cast<double>(*i) <= hp.upper;
        }
        break;
      case HyperparameterKind::kCategorical:
        if (const auto* s = std::get_if<std::string>(&v)) {
          ok = std::find(hp.categories.begin(), hp.categories.end(), *s) != hp.categories.end();
        }
        break;
    }
    if (!ok) throw SpaceError("value of '" + hp.name + "' is out of its range or category set");
  }
}

std::uint64_t digest(const Configuration& config) {
  std::uint64_t h = fnv1a(std::to_string(config.model_index));
  for (const auto& [name, value] : config.values) {
    h = fnv1a(name, h ^ 0x1f);
    std::visit(
        [&h](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) {
            h = fnv1a("s" + v, h);
          } else {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            char buf[9];
            buf[0] = std::is_same_v<T, double> ? 'd' : 'i';
            for (int b = 0; b < 8; ++b) buf[b + 1] = static_cast<char>((bits >> (8 * b)) & 0xff);
            h = fnv1a(std::string_view(buf, 9), h);
          }
        },
        value);
  }
  return h;
}

ModelDistribution::ModelDistribution(Eigen::VectorXd probabilities)
    : probabilities_(std::move(probabilities)) {
  if (probabilities_.size() == 0) throw SpaceError("model distribution is empty");
  if (!probabilities_.allFinite() || (probabilities_.array() < 0.0).any()) {
    throw SpaceError("model probabilities must be finite and nonnegative");
  }
  if (std::abs(probabilities_.sum() - 1.0) > 1e-12) {
    throw SpaceError("model probabilities must sum to 1");
  }
  cumulative_.resize(probabilities_.size());
  double acc = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < probabilities_.size(); ++i) {
    acc += probabilities_[i];
    cumulative_[i] = acc;
    if (probabilities_[i] > 0.0) last_positive = i;
  }
  cumulative_.tail(cumulative_.size() - last_positive).setConstant(
      std::numeric_limits<double>::infinity());
}

int ModelDistribution::draw(SplitMix64& rng) const {
  const double u = rng.uniform();
  const auto* begin = cumulative_.data();
  const auto* it = std::upper_bound(begin, begin + cumulative_.size(), u);
  return static_cast<int>(it - begin);
}

ModelDistribution model_probabilities(const ConfigurationSpace& space,
                                      const SamplingScheme& scheme) {
  const int m = space.model_count();
  switch (scheme.kind) {
    case SamplingScheme::Kind::kUniform:
      return ModelDistribution(Eigen::VectorXd::Constant(m, 1.0 / m));
    case SamplingScheme::Kind::kHpCountWeighted: {
      Eigen::VectorXd w(m);
      for (int i = 0; i < m; ++i) {
        const int n = space.model(i).hyperparameter_count();
        if (n > 64) {
          throw SpaceError("model '" + space.model(i).name +
                           "' has more than 64 hyperparameters; 2^N weight overflows");
        }
        w[i] = std::ldexp(1.0, n);
      }
      return normalized(w);
    }
    case SamplingScheme::Kind::kVolumeWeighted:
    case SamplingScheme::Kind::kCustom:
      if (scheme.weights.size() != m) {
        throw SpaceError("weight vector has " + std::to_string(scheme.weights.size()) +
                         " entries for " + std::to_string(m) + " models");
      }
      return normalized(scheme.weights);
  }
  throw SpaceError("unknown sampling scheme");
}

namespace {

HyperparameterValue sample_value(const HyperparameterSpec& hp, SplitMix64& rng) {
  switch (hp.kind) {
    case HyperparameterKind::kContinuous: {
      const double u = rng.uniform();
      double x;
      if (hp.scale == Scale::kLog) {
        const double lo = std::log(hp.lower);
        x = std::exp(lo + u * (std::log(hp.upper) - lo));
      } else {
        x = hp.lower + u * (hp.upper - hp.lower);
      }
      return std::clamp(x, hp.lower, hp.upper);
    }
    case HyperparameterKind::kInteger: {
      const auto lo = static_cast<std::int64_t>(hp.lower);
      const auto hi = static_cast<std::int64_t>(hp.upper);
      if (hp.scale == Scale::kLog) {
        // Log-uniform over [lo, hi + 1), floored.
        const double a = std::log(hp.lower);
        const double b = std::log(hp.upper + 1.0);
        const double x = std::exp(a + rng.uniform() * (b - a));
        return std::clamp(static_cast<std::int64_t>(std::floor(x)), lo, hi);
      }
      return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo) + 1));
    }
    case HyperparameterKind::kCategorical:
      return hp.categories[rng.below(hp.categories.size())];
  }
  return 0.0;
}

}  // namespace

Configuration sample_configuration(const ConfigurationSpace& space,
                                   const ModelDistribution& dist, SplitMix64& rng) {
  if (dist.size() != space.model_count()) {
    throw SpaceError("distribution size does not match model count");
  }
  Configuration config;
  config.model_index = dist.draw(rng);
  for (const auto& hp : space.model(config.model_index).hyperparameters) {
    config.values.emplace(hp.name, sample_value(hp, rng));
  }
  return config;
}

double hyperparameter_volume(const ModelSpec& model) {
  double volume = 1.0;
  for (const auto& hp : model.hyperparameters) {
    if (hp.kind != HyperparameterKind::kContinuous) {
      throw SpaceError("volume of model '" + model.name + "' is undefined: '" + hp.name +
                       "' is " + std::string(to_string(hp.kind)));
    }
    volume *= hp.upper - hp.lower;
  }
  return volume;
}

nlohmann::json params_to_json(const Configuration& config) {
  json params = json::object();
  for (const auto& [name, value] : config.values) {
    std::visit([&](const auto& v) { params[name] = v; }, value);
  }
  return params;
}

Configuration configuration_from_json(const ConfigurationSpace& space, std::string_view model,
                                      const json& params) {
  const auto index = space.model_index(model);
  if (!index) throw SpaceError("unknown model '" + std::string(model) + "'");
  if (!params.is_object()) throw SpaceError("params must be an object");
  Configuration config;
  config.model_index = *index;
  for (const auto& hp : space.model(*index).hyperparameters) {
    auto it = params.find(hp.name);
    if (it == params.end()) throw SpaceError("params miss '" + hp.name + "'");
    switch (hp.kind) {
      case HyperparameterKind::kContinuous:
        if (!it->is_number()) throw SpaceError("'" + hp.name + "' must be a number");
        config.values.emplace(hp.name, it->get<double>());
        break;
      case HyperparameterKind::kInteger:
        if (!it->is_number_integer()) throw SpaceError("'" + hp.name + "' must be an integer");
        config.values.emplace(hp.name, it->get<std::int64_t>());
        break;
      case HyperparameterKind::kCategorical:
        if (!it->is_string()) throw SpaceError("'" + hp.name + "' must be a string");
        config.values.emplace(hp.name, it->get<std::string>());
        break;
    }
  }
  validate_configuration(space, config);
  return config;
}

// ---------------------------------------------------------------------------
// Space definition documents (JSON, format 1).

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw SpaceError("malformed space document: " + what);
}

const json& require(const json& node, const char* key, const std::string& where) {
  auto it = node.find(key);
  if (it == node.end()) malformed(where + " is missing '" + key + "'");
  return *it;
}

HyperparameterSpec parse_hyperparameter(const json& node, const std::string& where) {
  if (!node.is_object()) malformed(where + " is not an object");
  HyperparameterSpec hp;
  const json& name = require(node, "name", where);
  if (!name.is_string()) malformed(where + ".name is not a string");
  hp.name = name.get<std::string>();
  const std::string here = where + " '" + hp.name + "'";

  const json& kind = require(node, "kind", here);
  if (!kind.is_string()) malformed(here + ".kind is not a string");
  const auto k = kind.get<std::string>();
  if (k == "continuous") hp.kind = HyperparameterKind::kContinuous;
  else if (k == "integer") hp.kind = HyperparameterKind::kInteger;
  else if (k == "categorical") hp.kind = HyperparameterKind::kCategorical;
  else malformed(here + " has unknown kind '" + k + "'");

  if (hp.kind == HyperparameterKind::kCategorical) {
    if (node.contains("lower") || node.contains("upper") || node.contains("scale")) {
      malformed(here + " is categorical but has a range");
    }
    const json& cats = require(node, "categories", here);
    if (!cats.is_array()) malformed(here + ".categories is not a list");
    for (const auto& c : cats) {
      if (!c.is_string()) malformed(here + " has a non-string category");
      hp.categories.push_back(c.get<std::string>());
    }
    return hp;
  }
  if (node.contains("categories")) malformed(here + " has categories but is not categorical");
  const json& lower = require(node, "lower", here);
  const json& upper = require(node, "upper", here);
  if (!lower.is_number() || !upper.is_number()) malformed(here + " bounds must be numbers");
  hp.lower = lower.get<double>();
  hp.upper = upper.get<double>();
  if (auto it = node.find("scale"); it != node.end()) {
    if (*it == "log") hp.scale = Scale::kLog;
    else if (*it == "linear") hp.scale = Scale::kLinear;
    else malformed(here + " has unknown scale");
  }
  return hp;
}

}  // namespace

ConfigurationSpace parse_space(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
  if (!doc.is_object()) malformed("top level is not an object");
  if (auto it = doc.find("format"); it != doc.end() && *it != 1) {
    malformed("unsupported format version " + it->dump());
  }
  const json& models = require(doc, "models", "document");
  if (!models.is_array()) malformed("'models' is not a list");

  std::vector<ModelSpec> specs;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const json& node = models[i];
    const std::string where = "models[" + std::to_string(i) + "]";
    if (!node.is_object()) malformed(where + " is not an object");
    ModelSpec spec;
    const json& name = require(node, "name", where);
    if (!name.is_string()) malformed(where + ".name is not a string");
    spec.name = name.get<std::string>();
    if (auto it = node.find("hyperparameters"); it != node.end()) {
      if (!it->is_array()) malformed(where + ".hyperparameters is not a list");
      for (std::size_t j = 0; j < it->size(); ++j) {
        spec.hyperparameters.push_back(
            parse_hyperparameter((*it)[j], where + ".hyperparameters[" + std::to_string(j) + "]"));
      }
    }
    specs.push_back(std::move(spec));
  }
  return ConfigurationSpace(std::move(specs));
}

ConfigurationSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot open space file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_space(buffer.str());
}

std::string serialize_space(const ConfigurationSpace& space) {
  json models = json::array();
  for (const auto& m : space.models()) {
    json hps = json::array();
    for (const auto& hp : m.hyperparameters) {
      json node = json::object();
      node["name"] = hp.name;
      node["kind"] = std::string(to_string(hp.kind));
      if (hp.kind == HyperparameterKind::kCategorical) {
        node["categories"] = hp.categories;
      } else if (hp.kind == HyperparameterKind::kInteger) {
        node["lower"] = static_cast<std::int64_t>(hp.lower);
        node["upper"] = static_cast<std::int64_t>(hp.upper);
        node["scale"] = std::string(to_string(hp.scale));
      } else {
        node["lower"] = hp.lower;
        node["upper"] = hp.upper;
        node["scale"] = std::string(to_string(hp.scale));
      }
      hps.push_back(std::move(node));
    }
    models.push_back(json{{"name", m.name}, {"hyperparameters", std::move(hps)}});
  }
  json doc = json::object();
  doc["format"] = 1;
  doc["models"] = std::move(models);
  return doc.dump(2) + "\n";
}

}  // namespace cashlab
