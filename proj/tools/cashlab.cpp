// cashlab command-line front end.
//
//   cashlab space check <file>
//   cashlab tune --space F --method rs|sh|hyperband --sampling ... --budget N ...
//   cashlab worstcase --spec F [--mc-samples N --seed S] --out F
//   cashlab bench --suite F --methods F [--reps N] --out DIR
//   cashlab compare --matrix F.csv --alpha 0.05 --correction finner --out F --svg F
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cashlab/external.hpp"
#include "cashlab/harness.hpp"
#include "cashlab/stats.hpp"
#include "cashlab/worstcase.hpp"

namespace fs = std::filesystem;
using namespace cashlab;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return nlohmann::json::parse(in);
}

// Writes via `fn` to `path`, or to stdout when path is empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  fn(out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> w;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      w.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad weight '" + item + "'");
    }
  }
  return w;
}

// --- space check -------------------------------------------------------------

int cmd_space_check(const std::string& file) {
  const ConfigurationSpace space = load_space(file);
  const Eigen::VectorXi counts = space.hyperparameter_counts();
  const ModelDistribution weighted = model_probabilities(space, SamplingScheme::hp_count_weighted());
  std::cout << "ok: " << space.model_count() << " models\n";
  for (int m = 0; m < space.model_count(); ++m) {
    std::cout << "  " << space.model(m).name << "  hp=" << counts[m]
              << "  p_weighted=" << weighted.probabilities()[m] << '\n';
  }
  return 0;
}

// --- tune --------------------------------------------------------------------

struct TuneArgs {
  std::string space;
  std::string method = "rs";
  std::string sampling = "uniform";
  std::string weights;
  std::int64_t budget = 0;
  double eta = 3.0;
  double rmin = 1.0;
  std::uint64_t seed = 0;
  std::string evaluator;
  double noise = 0.05;
  int inner_splits = 10;
  int processes = 1;
  double timeout = 60.0;
  int workers = 1;
  std::string out;
};

int cmd_tune(const TuneArgs& a) {
  const ConfigurationSpace space = load_space(a.space);
  MethodSpec method;
  method.name = a.method;
  method.sampling = a.sampling;
  method.eta = a.eta;
  if (a.sampling == "custom") {
    const auto w = parse_weights(a.weights);
    method.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  int s_max = 0;
  if (a.method != "rs") {
    if (!(a.rmin > 0.0) || a.rmin > 1.0) throw UsageError("--rmin must lie in (0,1]");
    s_max = static_cast<int>(std::floor(-std::log(a.rmin) / std::log(a.eta) + 1e-9));
  }
  if (a.method == "rs") {
    method.optimizer = Optimizer::kRandomSearch;
    method.n = a.budget;
  } else if (a.method == "sh") {
    method.optimizer = Optimizer::kSuccessiveHalving;
    method.n = a.budget;
    method.s_list = {s_max};
  } else {
    method.optimizer = Optimizer::kHyperband;
    method.s_list.clear();
    for (int s = 0; s <= s_max; ++s) method.s_list.push_back(s);
    if (a.budget % (s_max + 1) != 0) {
      throw UsageError("hyperband --budget must be a multiple of the bracket count " +
                       std::to_string(s_max + 1));
    }
    method.n = a.budget / (s_max + 1);
  }
  try {
    method.validate();
  } catch (const HarnessError& e) {
    throw UsageError(e.what());
  }

  std::unique_ptr<Evaluator> evaluator;
  std::unique_ptr<SyntheticProblem> problem;
  if (a.evaluator.rfind("synthetic:", 0) == 0) {
    const std::string id = a.evaluator.substr(10);
    std::uint64_t landscape_seed = 0;
    try {
      landscape_seed = std::stoull(id);
    } catch (const std::exception&) {
      throw UsageError("synthetic evaluator id must be an integer landscape seed");
    }
    problem = std::make_unique<SyntheticProblem>(generate_problem(space, landscape_seed, a.noise,
                                                                  a.inner_splits));
    evaluator = std::make_unique<SyntheticEvaluator>(*problem);
  } else if (a.evaluator.rfind("exec:", 0) == 0) {
    evaluator = std::make_unique<ExternalEvaluator>(
        space, a.evaluator.substr(5), a.processes,
        std::chrono::milliseconds(static_cast<std::int64_t>(a.timeout * 1000.0)));
  } else {
    throw UsageError("--evaluator must be synthetic:<seed> or exec:<command>");
  }

  const RunResult result = run_method(method, space, *evaluator, a.seed, {a.workers});
  with_output(a.out, [&](std::ostream& out) { write_run_log(out, space, result); });
  std::cerr << "winner: " << space.model(result.winner.model_index).name
            << " loss=" << result.winner_loss << " budget=" << result.budget_spent << '\n';
  return 0;
}

// --- worstcase ---------------------------------------------------------------

int cmd_worstcase(const std::string& spec_path, std::int64_t samples, std::uint64_t seed,
                  int workers, const std::string& out_path) {
  const nlohmann::json doc = read_json(spec_path);
  if (doc.contains("sweep")) {
    std::vector<SweepRow> rows;
    for (const auto& node : doc["sweep"]) {
      SweepRow row;
      row.spec = parse_worstcase_spec(node);
      row.p_uniform = failure_prob_uniform(row.spec);
      row.p_weighted = failure_prob_weighted(row.spec);
      row.gap = theorem_gap(row.spec);
      if (samples > 0) {
        row.mc = failure_prob_monte_carlo(row.spec, lab_distribution(node, row.spec), samples,
                                          seed, workers);
      }
      rows.push_back(std::move(row));
    }
    with_output(out_path, [&](std::ostream& out) { write_sweep_csv(out, rows); });
    return 0;
  }
  const WorstCaseSpec spec = parse_worstcase_spec(doc);
  bool custom = false;
  const ModelDistribution dist = lab_distribution(doc, spec, &custom);
  FailureReport report;
  report.p_fail_uniform = failure_prob_uniform(spec);
  report.p_fail_weighted = failure_prob_weighted(spec);
  if (custom) report.p_fail_custom = failure_prob_closed(spec, dist);
  if (samples > 0) {
    const auto mc = failure_prob_monte_carlo(spec, dist, samples, seed, workers);
    report.mc_estimate = mc.estimate;
    report.mc_stderr = mc.stderr_;
    report.samples = mc.samples;
  }
  with_output(out_path, [&](std::ostream& out) { out << to_json(report).dump(2) << '\n'; });
  return 0;
}

// --- bench -------------------------------------------------------------------

int cmd_bench(const std::string& suite_path, const std::string& methods_path, int reps,
              int workers, const std::string& out_dir) {
  const nlohmann::json suite_doc = read_json(suite_path);
  Suite suite = parse_suite(suite_doc, fs::path(suite_path).parent_path());
  if (reps > 0) suite.reps = reps;
  const auto methods = parse_methods(read_json(methods_path));

  const auto start = std::chrono::steady_clock::now();
  const ResultsStore store = run_suite(suite, methods, workers);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(out_dir);
  const ConfigurationSpace& space = suite.problems.front().space();
  with_output((fs::path(out_dir) / "results.jsonl").string(),
              [&](std::ostream& out) { write_results_store(out, space, store); });

  std::size_t failed = 0;
  for (const auto& r : store.records) {
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "run failed: problem " << store.problem_ids[static_cast<std::size_t>(r.problem)]
                << " rep " << r.rep << " method " << store.methods[static_cast<std::size_t>(r.method)].name
                << ": " << r.error << '\n';
    }
  }
  std::cerr << store.records.size() << " runs in " << seconds << " s\n";
  if (failed > 0) return 2;

  with_output((fs::path(out_dir) / "validation.csv").string(), [&](std::ostream& out) {
    write_loss_matrix_csv(out, export_loss_matrix(store, LossSplit::kValidation));
  });
  with_output((fs::path(out_dir) / "generalization.csv").string(), [&](std::ostream& out) {
    write_loss_matrix_csv(out, export_loss_matrix(store, LossSplit::kGeneralization));
  });
  const bool has_hyperband = std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) {
    return m.optimizer == Optimizer::kHyperband;
  });
  if (has_hyperband) {
    const BracketWinCounts counts = bracket_win_counts(store);
    with_output((fs::path(out_dir) / "brackets.csv").string(),
                [&](std::ostream& out) { write_bracket_counts_csv(out, counts); });
    for (const auto& [name, per_bracket] : counts.counts) {
      std::cerr << name << " bracket-win entropy " << win_entropy(per_bracket) << '\n';
    }
  }
  return 0;
}

// --- compare -----------------------------------------------------------------

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j))) {
        row.push_back(nullptr);
      } else {
        row.push_back(m(i, j));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_compare(const std::string& matrix_path, double alpha, const std::string& correction,
                bool force, const std::string& out_path, const std::string& svg_path) {
  std::ifstream in(matrix_path);
  if (!in) throw std::runtime_error("cannot open '" + matrix_path + "'");
  const LossMatrix matrix = read_loss_matrix_csv(in);
  const Comparison cmp = compare_pipeline(
      matrix, alpha, correction == "bonferroni" ? Correction::kBonferroni : Correction::kFinner, force);

  nlohmann::json doc = nlohmann::json::object();
  doc["methods"] = matrix.method_names;
  doc["datasets"] = matrix.datasets();
  doc["alpha"] = alpha;
  doc["correction"] = correction;
  doc["omnibus"] = {{"chi2", cmp.omnibus.chi2_stat},
                    {"f", std::isfinite(cmp.omnibus.imandavenport_stat)
                              ? nlohmann::json(cmp.omnibus.imandavenport_stat)
                              : nlohmann::json(nullptr)},
                    {"dof", {cmp.omnibus.dof_numerator, cmp.omnibus.dof_denominator}},
                    {"p_value", cmp.omnibus.p_value},
                    {"rejected", cmp.omnibus.rejected},
                    {"degenerate", cmp.omnibus.degenerate}};
  doc["average_ranks"] = std::vector<double>(cmp.ranks.average_ranks.data(),
                                             cmp.ranks.average_ranks.data() + cmp.ranks.average_ranks.size());
  doc["halted"] = cmp.halted;
  if (!cmp.pvalues.empty()) {
    doc["raw_p"] = matrix_json(cmp.pvalues.raw);
    doc["adjusted_p"] = matrix_json(cmp.pvalues.adjusted);
  }
  with_output(out_path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
  if (!svg_path.empty()) {
    with_output(svg_path, [&](std::ostream& out) {
      out << render_rank_chart(cmp.ranks, cmp.pvalues, alpha, matrix.method_names);
    });
  }
  if (cmp.halted) std::cerr << "omnibus test did not reject; pairwise tests skipped (use --force)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CASH tuning lab: samplers, schedules, worst-case analysis and benchmarks"};
  app.require_subcommand(1);

  auto* space_cmd = app.add_subcommand("space", "configuration space utilities");
  space_cmd->require_subcommand(1);
  std::string space_file;
  auto* check_cmd = space_cmd->add_subcommand("check", "validate a space file");
  check_cmd->add_option("file", space_file, "space JSON")->required();

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "run one tuning job");
  tune_cmd->add_option("--space", tune.space, "space JSON")->required();
  tune_cmd->add_option("--method", tune.method)->check(CLI::IsMember({"rs", "sh", "hyperband"}));
  tune_cmd->add_option("--sampling", tune.sampling)
      ->check(CLI::IsMember({"uniform", "weighted", "theta", "custom"}));
  tune_cmd->add_option("--weights", tune.weights, "comma-separated weights for custom sampling");
  tune_cmd->add_option("--budget", tune.budget, "total budget in full-data evaluations")->required();
  tune_cmd->add_option("--eta", tune.eta);
  tune_cmd->add_option("--rmin", tune.rmin, "smallest resource fraction");
  tune_cmd->add_option("--seed", tune.seed);
  tune_cmd->add_option("--evaluator", tune.evaluator, "synthetic:<seed> or exec:<command>")->required();
  tune_cmd->add_option("--noise", tune.noise, "noise scale of the synthetic evaluator");
  tune_cmd->add_option("--inner-splits", tune.inner_splits);
  tune_cmd->add_option("--processes", tune.processes, "worker processes for exec:");
  tune_cmd->add_option("--timeout", tune.timeout, "seconds per external evaluation");
  tune_cmd->add_option("--workers", tune.workers, "concurrent evaluations");
  tune_cmd->add_option("--out", tune.out, "run log (JSON lines)");

  std::string wc_spec;
  std::string wc_out;
  std::int64_t wc_samples = 0;
  std::uint64_t wc_seed = 0;
  int wc_workers = 1;
  auto* wc_cmd = app.add_subcommand("worstcase", "failure probability of random search");
  wc_cmd->add_option("--spec", wc_spec, "lab JSON")->required();
  wc_cmd->add_option("--mc-samples", wc_samples, "Monte Carlo samples (0 skips)");
  wc_cmd->add_option("--seed", wc_seed);
  wc_cmd->add_option("--workers", wc_workers);
  wc_cmd->add_option("--out", wc_out);

  std::string suite_file;
  std::string methods_file;
  std::string bench_out;
  int bench_reps = 0;
  int bench_workers = 1;
  auto* bench_cmd = app.add_subcommand("bench", "run a benchmark suite");
  bench_cmd->add_option("--suite", suite_file)->required();
  bench_cmd->add_option("--methods", methods_file)->required();
  bench_cmd->add_option("--reps", bench_reps, "override the suite's reps");
  bench_cmd->add_option("--workers", bench_workers);
  bench_cmd->add_option("--out", bench_out, "output directory")->required();

  std::string matrix_file;
  double alpha = 0.05;
  std::string correction = "finner";
  bool force = false;
  std::string cmp_out;
  std::string svg_out;
  auto* cmp_cmd = app.add_subcommand("compare", "rank-based comparison of methods");
  cmp_cmd->add_option("--matrix", matrix_file, "loss matrix CSV")->required();
  cmp_cmd->add_option("--alpha", alpha);
  cmp_cmd->add_option("--correction", correction)->check(CLI::IsMember({"finner", "bonferroni"}));
  cmp_cmd->add_flag("--force", force, "run pairwise tests even if the omnibus does not reject");
  cmp_cmd->add_option("--out", cmp_out);
  cmp_cmd->add_option("--svg", svg_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*space_cmd) return cmd_space_check(space_file);
    if (*tune_cmd) return cmd_tune(tune);
    if (*wc_cmd) return cmd_worstcase(wc_spec, wc_samples, wc_seed, wc_workers, wc_out);
    if (*bench_cmd) return cmd_bench(suite_file, methods_file, bench_reps, bench_workers, bench_out);
    if (*cmp_cmd) return cmd_compare(matrix_file, alpha, correction, force, cmp_out, svg_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
