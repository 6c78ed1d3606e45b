#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cashlab/harness.hpp"
#include "cashlab/parallel.hpp"
#include "cashlab/random.hpp"

namespace cashlab {

namespace {

std::string_view optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::kRandomSearch: return "rs";
    case Optimizer::kSuccessiveHalving: return "sh";
    case Optimizer::kHyperband: return "hyperband";
  }
  return "?";
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "rs") return Optimizer::kRandomSearch;
  if (s == "sh") return Optimizer::kSuccessiveHalving;
  if (s == "hyperband" || s == "hb") return Optimizer::kHyperband;
  throw HarnessError("unknown optimizer '" + s + "'");
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t mix_bits(std::uint64_t h, std::uint64_t v) { return mix64(h ^ v); }

}  // namespace

double MethodSpec::nominal_budget() const {
  if (optimizer == Optimizer::kHyperband) return static_cast<double>(n) * static_cast<double>(s_list.size());
  return static_cast<double>(n);
}

void MethodSpec::validate() const {
  if (name.empty()) throw HarnessError("method needs a name");
  if (n < 1) throw HarnessError("method '" + name + "' needs n >= 1");
  if (sampling != "uniform" && sampling != "weighted" && sampling != "theta" && sampling != "custom") {
    throw HarnessError("method '" + name + "' has unknown sampling '" + sampling + "'");
  }
  if (optimizer != Optimizer::kRandomSearch) {
    try {
      hyperband_brackets(n, eta, optimizer == Optimizer::kHyperband ? s_list
                                                                    : std::vector<int>{s_list.at(0)});
    } catch (const std::exception& e) {
      throw HarnessError("method '" + name + "' has an invalid budget: " + e.what());
    }
  }
}

std::vector<MethodSpec> parse_methods(const nlohmann::json& doc) {
  const nlohmann::json& list = doc.is_object() && doc.contains("methods") ? doc["methods"] : doc;
  if (!list.is_array()) throw HarnessError("methods document must be a list");
  std::vector<MethodSpec> methods;
  std::set<std::string> names;
  for (const auto& node : list) {
    MethodSpec m;
    m.name = node.at("name").get<std::string>();
    m.optimizer = parse_optimizer(node.at("optimizer").get<std::string>());
    m.sampling = node.value("sampling", std::string("uniform"));
    m.n = node.at("n").get<std::int64_t>();
    m.eta = node.value("eta", 3.0);
    if (node.contains("s")) m.s_list = {node["s"].get<int>()};
    if (node.contains("s_list")) m.s_list = node["s_list"].get<std::vector<int>>();
    if (node.contains("weights")) {
      const auto w = node["weights"].get<std::vector<double>>();
      m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    }
    m.validate();
    if (!names.insert(m.name).second) throw HarnessError("duplicate method name '" + m.name + "'");
    methods.push_back(std::move(m));
  }
  if (methods.empty()) throw HarnessError("methods document lists no methods");
  return methods;
}

nlohmann::json to_json(const MethodSpec& m) {
  nlohmann::json node = {{"name", m.name},
                         {"optimizer", std::string(optimizer_name(m.optimizer))},
                         {"sampling", m.sampling},
                         {"n", m.n},
                         {"eta", m.eta},
                         {"s_list", m.s_list}};
  if (m.weights.size() > 0) {
    node["weights"] = std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size());
  }
  return node;
}

ModelDistribution method_distribution(const ConfigurationSpace& space, const MethodSpec& method) {
  if (method.sampling == "uniform") return model_probabilities(space, SamplingScheme::uniform());
  if (method.sampling == "weighted") return model_probabilities(space, SamplingScheme::hp_count_weighted());
  if (method.sampling == "theta") {
    Eigen::VectorXd theta(space.model_count());
    for (int m = 0; m < space.model_count(); ++m) theta[m] = hyperparameter_volume(space.model(m));
    return model_probabilities(space, SamplingScheme::volume_weighted(theta));
  }
  return model_probabilities(space, SamplingScheme::custom(method.weights));
}

RunResult run_method(const MethodSpec& method, const ConfigurationSpace& space,
                     const Evaluator& evaluator, std::uint64_t seed, const EngineOptions& options) {
  const ModelDistribution dist = method_distribution(space, method);
  switch (method.optimizer) {
    case Optimizer::kRandomSearch:
      return random_search(space, dist, method.n, evaluator, seed, options);
    case Optimizer::kSuccessiveHalving: {
      const auto brackets = hyperband_brackets(method.n, method.eta, {method.s_list.at(0)});
      return successive_halving(space, dist, brackets.front(), evaluator, seed, options);
    }
    case Optimizer::kHyperband:
      return hyperband(space, dist, method.n, method.eta, method.s_list, evaluator, seed, options);
  }
  throw HarnessError("unknown optimizer");
}

std::vector<MethodSpec> schedule_study_methods(std::int64_t n, double eta) {
  std::vector<MethodSpec> methods;
  for (int s = 0; s <= 2; ++s) {
    for (const char* sampling : {"uniform", "weighted"}) {
      MethodSpec m;
      m.name = "SH" + std::to_string(s) + (std::string(sampling) == "weighted" ? ".W" : "");
      m.optimizer = Optimizer::kSuccessiveHalving;
      m.sampling = sampling;
      m.n = n;
      m.eta = eta;
      m.s_list = {s};
      methods.push_back(std::move(m));
    }
  }
  return methods;
}

std::vector<MethodSpec> hyperband_study_methods(std::int64_t n, double eta) {
  std::vector<MethodSpec> methods;
  const std::int64_t total = 3 * n;
  for (const char* sampling : {"uniform", "weighted"}) {
    const std::string suffix = std::string(sampling) == "weighted" ? ".W" : "";
    methods.push_back({"RS" + suffix, Optimizer::kRandomSearch, sampling, {}, total, eta, {0}});
    methods.push_back({"SH2" + suffix, Optimizer::kSuccessiveHalving, sampling, {}, total, eta, {2}});
    methods.push_back({"HB" + suffix, Optimizer::kHyperband, sampling, {}, n, eta, {0, 1, 2}});
  }
  // Order: RS, RS.W, SH2, SH2.W, HB, HB.W
  std::vector<MethodSpec> ordered;
  for (int i : {0, 3, 1, 4, 2, 5}) ordered.push_back(methods[static_cast<std::size_t>(i)]);
  return ordered;
}

std::uint64_t digest(const std::vector<TrialRecord>& trials) {
  std::uint64_t h = 0x5851f42d4c957f2dULL;
  for (const auto& t : trials) {
    h = mix_bits(h, static_cast<std::uint64_t>(t.trial_id));
    h = mix_bits(h, digest(t.configuration));
    h = mix_bits(h, std::bit_cast<std::uint64_t>(t.resource));
    h = mix_bits(h, std::bit_cast<std::uint64_t>(t.loss));
    h = mix_bits(h, static_cast<std::uint64_t>(t.rung));
    h = mix_bits(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(t.bracket)));
    h = mix_bits(h, t.trial_seed);
  }
  return h;
}

void ResultsStore::check_complete() const {
  const std::size_t expected = problem_ids.size() * static_cast<std::size_t>(reps) * methods.size();
  std::vector<int> seen(expected, 0);
  for (const auto& r : records) {
    if (r.problem < 0 || r.problem >= static_cast<int>(problem_ids.size()) || r.rep < 0 ||
        r.rep >= reps || r.method < 0 || r.method >= static_cast<int>(methods.size())) {
      throw HarnessError("results store has a record outside the grid");
    }
    const auto idx = (static_cast<std::size_t>(r.problem) * static_cast<std::size_t>(reps) +
                      static_cast<std::size_t>(r.rep)) * methods.size() + static_cast<std::size_t>(r.method);
    if (!r.error.empty()) continue;
    if (seen[idx]++) throw HarnessError("results store has a duplicate record");
  }
  for (std::size_t idx = 0; idx < expected; ++idx) {
    if (seen[idx] == 0) {
      const std::size_t m = idx % methods.size();
      const std::size_t rep = (idx / methods.size()) % static_cast<std::size_t>(reps);
      const std::size_t p = idx / methods.size() / static_cast<std::size_t>(reps);
      throw HarnessError("results store is incomplete: no successful run for problem '" +
                         problem_ids[p] + "', rep " + std::to_string(rep) + ", method '" +
                         methods[m].name + "'");
    }
  }
}

ResultsStore run_suite(const Suite& suite, const std::vector<MethodSpec>& methods, int worker_limit) {
  suite.validate();
  if (methods.empty()) throw HarnessError("no methods to run");
  for (const auto& m : methods) m.validate();

  ResultsStore store;
  for (const auto& p : suite.problems) store.problem_ids.push_back(p.problem_id());
  store.methods = methods;
  store.reps = suite.reps;
  store.suite_seed = suite.seed;

  const std::size_t reps = static_cast<std::size_t>(suite.reps);
  const std::size_t tasks = suite.problems.size() * reps * methods.size();
  store.records.resize(tasks);
  parallel_for(tasks, worker_limit, [&](std::size_t idx) {
    const std::size_t m = idx % methods.size();
    const std::size_t rep = (idx / methods.size()) % reps;
    const std::size_t p = idx / methods.size() / reps;
    const SyntheticProblem& problem = suite.problems[p];
    ResultRecord& rec = store.records[idx];
    rec.problem = static_cast<int>(p);
    rec.rep = static_cast<int>(rep);
    rec.method = static_cast<int>(m);
    rec.run_seed = derive_seed(derive_seed(suite.seed, SeedStream::kRep, p * reps + rep),
                               fnv1a(methods[m].name), 0);
    try {
      const SyntheticEvaluator evaluator(problem);
      const RunResult run = run_method(methods[m], problem.space(), evaluator, rec.run_seed, {1});
      rec.winner = run.winner;
      rec.validation_loss = run.winner_loss;
      rec.generalization_loss = problem.true_loss(run.winner);
      rec.budget_spent = run.budget_spent;
      rec.bracket_of_winner = run.bracket_of_winner;
      rec.trial_count = static_cast<std::int64_t>(run.trials.size());
      rec.trials_digest = digest(run.trials);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });
  return store;
}

void write_results_store(std::ostream& out, const ConfigurationSpace& space,
                         const ResultsStore& store) {
  nlohmann::json manifest = nlohmann::json::object();
  manifest["type"] = "manifest";
  manifest["format"] = 1;
  manifest["suite_seed"] = store.suite_seed;
  manifest["reps"] = store.reps;
  manifest["problems"] = store.problem_ids;
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : store.methods) methods.push_back(to_json(m));
  manifest["methods"] = std::move(methods);
  out << manifest.dump() << '\n';
  for (const auto& r : store.records) {
    nlohmann::json line = nlohmann::json::object();
    line["type"] = "run";
    line["problem"] = store.problem_ids[static_cast<std::size_t>(r.problem)];
    line["rep"] = r.rep;
    line["method"] = store.methods[static_cast<std::size_t>(r.method)].name;
    line["run_seed"] = r.run_seed;
    if (!r.error.empty()) {
      line["error"] = r.error;
    } else {
      line["model"] = space.model(r.winner.model_index).name;
      line["params"] = params_to_json(r.winner);
      line["validation_loss"] = r.validation_loss;
      line["generalization_loss"] = r.generalization_loss;
      line["budget_spent"] = r.budget_spent;
      line["bracket_of_winner"] = r.bracket_of_winner;
      line["trials"] = r.trial_count;
      line["trials_digest"] = hex(r.trials_digest);
    }
    out << line.dump() << '\n';
  }
}

ResultsStore read_results_store(std::istream& in, const ConfigurationSpace& space) {
  std::string text;
  if (!std::getline(in, text)) throw HarnessError("results store is empty");
  const auto manifest = nlohmann::json::parse(text);
  if (manifest.value("type", "") != "manifest") throw HarnessError("results store lacks a manifest");
  ResultsStore store;
  store.suite_seed = manifest.at("suite_seed").get<std::uint64_t>();
  store.reps = manifest.at("reps").get<int>();
  store.problem_ids = manifest.at("problems").get<std::vector<std::string>>();
  store.methods = parse_methods(manifest.at("methods"));

  auto index_of = [](const auto& list, const std::string& name, auto key) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (key(list[i]) == name) return static_cast<int>(i);
    }
    throw HarnessError("results store references unknown entry '" + name + "'");
  };
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    const auto line = nlohmann::json::parse(text);
    ResultRecord r;
    r.problem = index_of(store.problem_ids, line.at("problem").get<std::string>(),
                         [](const std::string& s) { return s; });
    r.method = index_of(store.methods, line.at("method").get<std::string>(),
                        [](const MethodSpec& m) { return m.name; });
    r.rep = line.at("rep").get<int>();
    r.run_seed = line.at("run_seed").get<std::uint64_t>();
    if (line.contains("error")) {
      r.error = line["error"].get<std::string>();
    } else {
      r.winner = configuration_from_json(space, line.at("model").get<std::string>(), line.at("params"));
      r.validation_loss = line.at("validation_loss").get<double>();
      r.generalization_loss = line.at("generalization_loss").get<double>();
      r.budget_spent = line.at("budget_spent").get<double>();
      r.bracket_of_winner = line.at("bracket_of_winner").get<int>();
      r.trial_count = line.at("trials").get<std::int64_t>();
      r.trials_digest = std::stoull(line.at("trials_digest").get<std::string>(), nullptr, 16);
    }
    store.records.push_back(std::move(r));
  }
  return store;
}

LossMatrix export_loss_matrix(const ResultsStore& store, LossSplit split) {
  store.check_complete();
  const auto problems = static_cast<Eigen::Index>(store.problem_ids.size());
  const auto methods = static_cast<Eigen::Index>(store.methods.size());
  LossMatrix matrix;
  matrix.dataset_ids = store.problem_ids;
  for (const auto& m : store.methods) matrix.method_names.push_back(m.name);
  matrix.losses = Eigen::MatrixXd::Zero(problems, methods);
  for (const auto& r : store.records) {
    if (!r.error.empty()) continue;
    matrix.losses(r.problem, r.method) +=
        split == LossSplit::kValidation ? r.validation_loss : r.generalization_loss;
  }
  matrix.losses /= static_cast<double>(store.reps);
  try {
    matrix.validate();
  } catch (const StatsError& e) {
    throw HarnessError(std::string("exported loss matrix cannot be compared: ") + e.what());
  }
  return matrix;
}

BracketWinCounts bracket_win_counts(const ResultsStore& store) {
  BracketWinCounts out;
  for (const auto& m : store.methods) {
    if (m.optimizer != Optimizer::kHyperband) continue;
    auto& counts = out.counts[m.name];
    for (int s : m.s_list) counts[s] = 0;
  }
  if (out.counts.empty()) throw HarnessError("results store contains no Hyperband runs");
  for (const auto& r : store.records) {
    const MethodSpec& m = store.methods[static_cast<std::size_t>(r.method)];
    if (m.optimizer != Optimizer::kHyperband || !r.error.empty()) continue;
    ++out.counts[m.name][r.bracket_of_winner];
  }
  return out;
}

double win_entropy(const std::map<int, std::int64_t>& counts) {
  double total = 0.0;
  for (const auto& [s, c] : counts) total += static_cast<double>(c);
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (const auto& [s, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

void write_bracket_counts_csv(std::ostream& out, const BracketWinCounts& counts) {
  out << "method,bracket,wins\n";
  for (const auto& [name, per_bracket] : counts.counts) {
    for (const auto& [s, c] : per_bracket) out << name << ',' << s << ',' << c << '\n';
  }
}

}  // namespace cashlab
