#include <doctest.h>

#include <cmath>

#include "cashlab/configspace.hpp"

using namespace cashlab;

namespace {

ConfigurationSpace small_space() {
  return ConfigurationSpace({
      {"svm",
       {HyperparameterSpec::continuous("C", 1e-3, 1e3, Scale::kLog),
        HyperparameterSpec::categorical("kernel", {"rbf", "linear", "poly"})}},
      {"knn", {HyperparameterSpec::integer("k", 1, 5)}},
      {"nb", {}},
  });
}

// Per-model hyperparameter counts of the classifier roster.
ConfigurationSpace roster_space() {
  const std::vector<std::pair<std::string, int>> roster = {
      {"RandomForestClassifier", 8}, {"LogisticRegression", 6},
      {"XGBoost", 11},               {"GradientBoostingClassifier", 10},
      {"AdaBoostClassifier", 2},     {"BernoulliNB", 3},
      {"GaussianNB", 1},             {"ExtraTreesClassifier", 8},
      {"KNeighborsClassifier", 3},   {"LinearDiscriminantAnalysis", 4},
      {"QuadraticDiscriminantAnalysis", 1}};
  std::vector<ModelSpec> models;
  for (const auto& [name, count] : roster) {
    ModelSpec m{name, {}};
    for (int i = 0; i < count; ++i) {
      m.hyperparameters.push_back(HyperparameterSpec::continuous("h" + std::to_string(i), 0.0, 1.0));
    }
    models.push_back(std::move(m));
  }
  return ConfigurationSpace(std::move(models));
}

}  // namespace

TEST_CASE("space construction rejects broken invariants") {
  CHECK_THROWS_AS(ConfigurationSpace({}), SpaceError);
  CHECK_THROWS_AS(ConfigurationSpace({{"a", {}}, {"a", {}}}), SpaceError);
  CHECK_THROWS_AS(HyperparameterSpec::continuous("x", 1.0, 1.0).validate(), SpaceError);
  CHECK_THROWS_AS(HyperparameterSpec::continuous("x", 0.0, 1.0, Scale::kLog).validate(), SpaceError);
  CHECK_THROWS_AS(HyperparameterSpec::categorical("c", {}).validate(), SpaceError);
  CHECK_THROWS_AS(HyperparameterSpec::categorical("c", {"a", "a"}).validate(), SpaceError);
  CHECK_THROWS_AS(ConfigurationSpace({{"m",
                                       {HyperparameterSpec::continuous("x", 0, 1),
                                        HyperparameterSpec::continuous("x", 0, 2)}}}),
                  SpaceError);
}

TEST_CASE("weighted sampling follows 2^N") {
  const ConfigurationSpace space = roster_space();
  const ModelDistribution w = model_probabilities(space, SamplingScheme::hp_count_weighted());
  CHECK(w.probabilities().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(2048.0 / 3688.0).epsilon(1e-14));
  CHECK(w[6] == doctest::Approx(2.0 / 3688.0).epsilon(1e-14));
  // Ordering follows hyperparameter counts.
  CHECK(w[2] > w[3]);
  CHECK(w[3] > w[0]);
  CHECK(w[0] == w[7]);

  const ModelDistribution u = model_probabilities(space, SamplingScheme::uniform());
  for (int m = 0; m < 11; ++m) CHECK(u[m] == doctest::Approx(1.0 / 11.0));
}

TEST_CASE("weighted sampling of a single model is certain") {
  const ConfigurationSpace space({{"only", {HyperparameterSpec::continuous("x", 0, 1)}}});
  const ModelDistribution w = model_probabilities(space, SamplingScheme::hp_count_weighted());
  CHECK(w[0] == 1.0);
}

TEST_CASE("volume and custom weights") {
  const ConfigurationSpace space({
      {"a", {HyperparameterSpec::continuous("x", 0, 2), HyperparameterSpec::continuous("y", 0, 3)}},
      {"b", {HyperparameterSpec::continuous("x", 0, 2)}},
  });
  CHECK(hyperparameter_volume(space.model(0)) == 6.0);
  Eigen::VectorXd theta(2);
  theta << 6.0, 2.0;
  const auto v = model_probabilities(space, SamplingScheme::volume_weighted(theta));
  CHECK(v[0] == doctest::Approx(0.75));
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  CHECK_THROWS_AS(model_probabilities(space, SamplingScheme::custom(w)), SpaceError);
  Eigen::VectorXd short_w(1);
  short_w << 1.0;
  CHECK_THROWS_AS(model_probabilities(space, SamplingScheme::custom(short_w)), SpaceError);
  CHECK_THROWS_AS(hyperparameter_volume(small_space().model(0)), SpaceError);
}

TEST_CASE("ModelDistribution validates and draws proportionally") {
  Eigen::VectorXd bad(2);
  bad << 0.6, 0.6;
  CHECK_THROWS_AS(ModelDistribution{bad}, SpaceError);
  Eigen::VectorXd p(3);
  p << 0.2, 0.0, 0.8;
  const ModelDistribution dist(p);
  SplitMix64 rng(5);
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(dist.draw(rng))];
  CHECK(counts[1] == 0);
  CHECK(counts[0] / double(n) == doctest::Approx(0.2).epsilon(0.03));
}

TEST_CASE("sampled configurations are always valid") {
  const ConfigurationSpace space = small_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  SplitMix64 rng(9);
  std::vector<int> k_seen(6, 0);
  int below_one = 0;
  int svm = 0;
  for (int i = 0; i < 20000; ++i) {
    const Configuration c = sample_configuration(space, dist, rng);
    REQUIRE_NOTHROW(validate_configuration(space, c));
    if (c.model_index == 1) ++k_seen[static_cast<std::size_t>(std::get<std::int64_t>(c.values.at("k")))];
    if (c.model_index == 0) {
      ++svm;
      if (std::get<double>(c.values.at("C")) < 1.0) ++below_one;
    }
  }
  // Integer bounds are inclusive.
  CHECK(k_seen[1] > 0);
  CHECK(k_seen[5] > 0);
  CHECK(k_seen[0] == 0);
  // Log-uniform on [1e-3, 1e3] puts half the mass below 1.
  CHECK(below_one / double(svm) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("log-scale integers stay inside their bounds") {
  const ConfigurationSpace space({{"m", {HyperparameterSpec::integer("n", 10, 500, Scale::kLog)}}});
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  SplitMix64 rng(1);
  std::int64_t lo = 1000;
  std::int64_t hi = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto v = std::get<std::int64_t>(sample_configuration(space, dist, rng).values.at("n"));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 10);
  CHECK(hi == 500);
}

TEST_CASE("validate_configuration catches mismatches") {
  const ConfigurationSpace space = small_space();
  Configuration c{1, {{"k", std::int64_t{9}}}};
  CHECK_THROWS_AS(validate_configuration(space, c), SpaceError);
  c.values["k"] = 2.0;
  CHECK_THROWS_AS(validate_configuration(space, c), SpaceError);
  c.values["k"] = std::int64_t{2};
  CHECK_NOTHROW(validate_configuration(space, c));
  c.values["extra"] = 1.0;
  CHECK_THROWS_AS(validate_configuration(space, c), SpaceError);
  CHECK_THROWS_AS(validate_configuration(space, Configuration{7, {}}), SpaceError);
}

TEST_CASE("space documents round-trip") {
  const ConfigurationSpace space = small_space();
  const std::string text = serialize_space(space);
  CHECK(parse_space(text) == space);
  CHECK(serialize_space(parse_space(text)) == text);
}

TEST_CASE("malformed space documents are reported") {
  CHECK_THROWS_AS(parse_space("{"), SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"format":1})"), SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"format":1,"models":[{"name":"m","hyperparameters":[
      {"name":"x","kind":"categorical","categories":["a"],"lower":0,"upper":1}]}]})"),
                  SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"format":1,"models":[{"name":"m","hyperparameters":[
      {"name":"x","kind":"weird","lower":0,"upper":1}]}]})"),
                  SpaceError);
}

TEST_CASE("the bundled classifier space matches the roster") {
  const ConfigurationSpace space = load_space(CASHLAB_DATA_DIR "/classifier_space.json");
  REQUIRE(space.model_count() == 11);
  Eigen::VectorXi expected(11);
  expected << 8, 6, 11, 10, 2, 3, 1, 8, 3, 4, 1;
  CHECK(space.hyperparameter_counts() == expected);
  const auto w = model_probabilities(space, SamplingScheme::hp_count_weighted());
  CHECK(w[*space.model_index("XGBoost")] == doctest::Approx(2048.0 / 3688.0));
}

TEST_CASE("params JSON round-trips and digests distinguish configurations") {
  const ConfigurationSpace space = small_space();
  const auto dist = model_probabilities(space, SamplingScheme::uniform());
  SplitMix64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Configuration c = sample_configuration(space, dist, rng);
    const auto params = nlohmann::json::parse(params_to_json(c).dump());
    const Configuration back = configuration_from_json(space, space.model(c.model_index).name, params);
    CHECK(back == c);
    CHECK(digest(back) == digest(c));
  }
  Configuration a{1, {{"k", std::int64_t{1}}}};
  Configuration b{1, {{"k", std::int64_t{2}}}};
  CHECK(digest(a) != digest(b));
  CHECK_THROWS_AS(configuration_from_json(space, "nope", nlohmann::json::object()), SpaceError);
  CHECK_THROWS_AS(configuration_from_json(space, "knn", nlohmann::json{{"k", 1.5}}), SpaceError);
}
