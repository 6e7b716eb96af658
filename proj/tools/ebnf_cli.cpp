#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebnf/core.hpp"
#include "ebnf/density.hpp"
#include "ebnf/ingest.hpp"
#include "ebnf/mgf.hpp"
#include "ebnf/posterior.hpp"
#include "ebnf/shrinkage.hpp"
#include "ebnf/simulate.hpp"
#include "ebnf/testing.hpp"

namespace {

using namespace ebnf;

struct CommonOpts {
  std::string input, output, model_path, config_path;
  std::vector<std::string> overrides;  // key=value
  int threads = 1;
  // flag-level config overrides; NaN/empty means "not given"
  double rho = -1, cw = -1, alpha = -1, delta = -1;
  int grid_size = -1;
  long long seed = -1;
  std::string mgf_points;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_model) {
  cmd->add_option("--input,-i", o.input, "input CSV");
  cmd->add_option("--output,-o", o.output, "output path")->required();
  if (needs_model) cmd->add_option("--model,-m", o.model_path, "density model JSON")->required();
  cmd->add_option("--config,-c", o.config_path, "config file (key = value)");
  cmd->add_option("--set", o.overrides, "config override key=value (repeatable)");
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_option("--rho", o.rho, "tempering floor");
  cmd->add_option("--grid-size", o.grid_size, "posterior grid size S");
  cmd->add_option("--cw", o.cw, "grid halfwidth multiplier");
  cmd->add_option("--mgf-points", o.mgf_points, "comma-separated MGF evaluation points");
  cmd->add_option("--alpha", o.alpha, "level alpha");
  cmd->add_option("--delta", o.delta, "null half-width delta");
  cmd->add_option("--seed", o.seed, "RNG seed");
}

// precedence: CLI flag > config file > built-in default
EngineConfig build_config(const CommonOpts& o) {
  EngineConfig cfg;
  if (!o.config_path.empty()) cfg = parse_config_file(o.config_path);
  for (const auto& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--set expects key=value, got '" + kv + "'", errc::bad_config);
    apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.rho >= 0) cfg.rho = o.rho;
  if (o.grid_size >= 0) cfg.grid_size_S = o.grid_size;
  if (o.cw >= 0) cfg.grid_halfwidth_cw = o.cw;
  if (!o.mgf_points.empty()) apply_config_override(cfg, "mgf_points", o.mgf_points);
  if (o.alpha >= 0) cfg.alpha = o.alpha;
  if (o.delta >= 0) cfg.delta = o.delta;
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  cfg.validate();
  return cfg;
}

DensityFn density_for(const DensityModel& model, const Observation& obs) {
  return [&model, k = obs.k](double x, double s2) { return model.eval_f(x, s2, k); };
}

void run_fit(const CommonOpts& o) {
  Dataset data = read_dataset_csv(o.input);
  DensityModel model = DensityModel::fit(data);
  model.save(o.output);
}

void run_estimate(const CommonOpts& o, const EngineConfig& cfg) {
  Dataset data = read_dataset_csv(o.input);
  DensityModel model = DensityModel::load(o.model_path);
  auto results = ebt_estimate_all(model, data, cfg, o.threads);
  write_shrinkage_csv(results, data.observations, o.output);
}

void run_interval(const CommonOpts& o, const EngineConfig& cfg) {
  Dataset data = read_dataset_csv(o.input);
  require_k_above_two(data);
  DensityModel model = DensityModel::load(o.model_path);
  auto estimates = ebt_estimate_all(model, data, cfg, o.threads);

  struct Row { double lo, hi; bool flagged; };
  std::vector<Row> rows(data.size());
  auto work = [&](std::size_t i) {
    const Observation& obs = data.observations[i];
    MgfEvaluator ev(obs, density_for(model, obs), cfg.rho);
    PosteriorCdf pc(&ev, &cfg);
    auto [lo, hi] = pc.quantile_interval(cfg.alpha);
    rows[i] = {lo, hi, pc.any_infeasible()};
  };
  if (o.threads <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < o.threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < data.size(); i += o.threads) work(i);
      });
    for (auto& th : pool) th.join();
  }

  std::ofstream out(o.output, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + o.output, errc::parse);
  out << "# ebnf-schema v1\n";
  out << "id,theta_hat,lo,hi,alpha,flags\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i)
    out << csv_escape(data.observations[i].id) << ',' << estimates[i].theta_hat << ','
        << rows[i].lo << ',' << rows[i].hi << ',' << cfg.alpha << ','
        << (rows[i].flagged ? "infeasible" : "") << '\n';
}

void run_test(const CommonOpts& o, const EngineConfig& cfg) {
  Dataset data = read_dataset_csv(o.input);
  DensityModel model = DensityModel::load(o.model_path);
  std::size_t n = data.size();
  std::vector<TestResult> results(n);
  auto work = [&](std::size_t i) {
    const Observation& obs = data.observations[i];
    MgfEvaluator ev(obs, density_for(model, obs), cfg.rho);
    PosteriorCdf pc(&ev, &cfg);
    results[i].id = obs.id;
    results[i].pn = posterior_null_prob(pc, cfg.delta);
    results[i].p_value = ttest_pvalue(obs, cfg.delta);
  };
  if (o.threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < o.threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += o.threads) work(i);
      });
    for (auto& th : pool) th.join();
  }
  std::vector<double> pns(n), pvals(n);
  for (std::size_t i = 0; i < n; ++i) {
    pns[i] = results[i].pn;
    pvals[i] = results[i].p_value;
  }
  auto nf = fdr_reject(pns, cfg.alpha);
  auto bh = bh_reject(pvals, cfg.alpha);
  for (std::size_t i = 0; i < n; ++i) {
    results[i].rejected_nf = nf.count(i) > 0;
    results[i].rejected_bh = bh.count(i) > 0;
  }
  write_testing_csv(results, o.output);
}

void append_metric(std::ofstream& csv, nlohmann::json& summary, const ScenarioSpec& spec,
                   const std::string& method, const std::string& metric, double value) {
  csv << scenario_name(spec.scenario) << ',' << spec.eta << ',' << spec.n << ',' << spec.k << ','
      << method << ',' << metric << ',' << value << '\n';
  summary[method][metric] = value;
}

void run_simulate(const CommonOpts& o, const EngineConfig& cfg, const std::string& scenario,
                  double eta, int n, int k, int reps, const std::string& study,
                  bool emit_plot_data) {
  ScenarioSpec spec{parse_scenario(scenario), eta, n, k, cfg.seed};
  std::ofstream csv(o.output, std::ios::binary);
  if (!csv) throw ValidationError("cannot write " + o.output, errc::parse);
  csv << "# ebnf-schema v1\n";
  csv << "scenario,eta,n,k,method,metric,value\n";
  csv.precision(17);
  nlohmann::json summary;
  summary["scenario"] = scenario_name(spec.scenario);
  summary["eta"] = eta;
  summary["n"] = n;
  summary["k"] = k;
  summary["reps"] = reps;
  summary["study"] = study;

  if (study == "estimation") {
    StudyResult res = run_estimation_study(spec, reps, cfg, o.threads);
    append_metric(csv, summary, spec, "ML", "weighted_loss", res.ml.weighted_loss);
    append_metric(csv, summary, spec, "NF", "weighted_loss", res.nf.weighted_loss);
    if (emit_plot_data) {
      std::ofstream plot(o.output + ".plot.csv", std::ios::binary);
      plot << "# ebnf-schema v1\n";
      plot << "eta,method,weighted_loss\n";
      plot.precision(17);
      for (int e = 0; e <= 10; e += 2) {
        ScenarioSpec pspec = spec;
        pspec.eta = e;
        StudyResult pres = run_estimation_study(pspec, reps, cfg, o.threads);
        plot << e << ",ML," << pres.ml.weighted_loss << '\n';
        plot << e << ",NF," << pres.nf.weighted_loss << '\n';
      }
    }
  } else if (study == "interval") {
    StudyResult res = run_interval_study(spec, reps, cfg.alpha, cfg, o.threads);
    append_metric(csv, summary, spec, "ML", "cp", res.ml.cp);
    append_metric(csv, summary, spec, "ML", "al", res.ml.al);
    append_metric(csv, summary, spec, "NF", "cp", res.nf.cp);
    append_metric(csv, summary, spec, "NF", "al", res.nf.al);
  } else if (study == "testing") {
    TestingStudyResult res = run_testing_study(spec, reps, cfg.alpha, cfg.delta, cfg, o.threads);
    const MetricsReport* reports[3] = {&res.nf, &res.ttest, &res.bh};
    const char* names[3] = {"NF", "TTEST", "BH"};
    for (int m = 0; m < 3; ++m) {
      append_metric(csv, summary, spec, names[m], "fdr", reports[m]->fdr);
      append_metric(csv, summary, spec, names[m], "tpr", reports[m]->tpr);
      append_metric(csv, summary, spec, names[m], "f1", reports[m]->f1);
    }
  } else {
    throw ValidationError("unknown study '" + study + "'", errc::bad_config);
  }
  std::ofstream js(o.output + ".json", std::ios::binary);
  js << summary.dump(2) << '\n';
}

void run_ingest(const CommonOpts& o, double min_k, bool train_split) {
  IngestReport rep;
  if (train_split) {
    auto rows = read_csv(o.input);
    if (rows.empty() || rows[0] != std::vector<std::string>{"unit_id", "successes", "trials"})
      throw ValidationError("--train-split requires header unit_id,successes,trials",
                            errc::parse);
    std::vector<CountRecord> recs;
    for (std::size_t i = 1; i < rows.size(); ++i)
      recs.push_back({rows[i][0], std::stoll(rows[i][1]), std::stoll(rows[i][2])});
    rep = ingest_counts(training_split(recs), min_k);
  } else {
    rep = ingest_csv(o.input, min_k);
  }
  for (const auto& id : rep.dropped_units)
    std::cerr << "EBNF-W: dropped unit '" << id << "' (too few records)\n";
  for (const auto& id : rep.degenerate_units)
    std::cerr << "EBNF-W: dropped unit '" << id << "' (zero variance)\n";
  write_dataset_csv(rep.dataset, o.output);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric empirical Bayes inference for heteroscedastic normal means"};
  app.require_subcommand(1);

  CommonOpts fit_o, est_o, iv_o, test_o, sim_o, ing_o;
  std::string scenario = "S1", study = "estimation";
  double eta = 0.0;
  int n = 500, k = 10, reps = 10;
  bool emit_plot_data = false;
  double min_k = 0.0;
  bool train_split = false;

  auto* fit = app.add_subcommand("fit", "fit the density model from a dataset CSV");
  add_common(fit, fit_o, false);
  fit->get_option("--input")->required();

  auto* est = app.add_subcommand("estimate", "tempered empirical Bayes point estimates");
  add_common(est, est_o, true);
  est->get_option("--input")->required();

  auto* iv = app.add_subcommand("interval", "posterior quantile confidence intervals");
  add_common(iv, iv_o, true);
  iv->get_option("--input")->required();

  auto* tst = app.add_subcommand("test", "posterior null probabilities and FDR decisions");
  add_common(tst, test_o, true);
  tst->get_option("--input")->required();

  auto* sim = app.add_subcommand("simulate", "Monte Carlo scenario studies");
  add_common(sim, sim_o, false);
  sim->add_option("--scenario", scenario, "S1, S2 or S3");
  sim->add_option("--eta", eta, "shift parameter");
  sim->add_option("--n", n, "sample size per replication");
  sim->add_option("--k", k, "degrees of freedom");
  sim->add_option("--reps", reps, "Monte Carlo replications");
  sim->add_option("--study", study, "estimation, interval or testing");
  sim->add_flag("--emit-plot-data", emit_plot_data, "write per-eta loss curves");

  auto* ing = app.add_subcommand("ingest", "aggregate raw count/replicate records");
  add_common(ing, ing_o, false);
  ing->get_option("--input")->required();
  ing->add_option("--min-k", min_k, "drop units with k <= min-k");
  ing->add_flag("--train-split", train_split, "keep first floor(n/2) records per unit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) run_fit(fit_o);
    else if (*est) run_estimate(est_o, build_config(est_o));
    else if (*iv) run_interval(iv_o, build_config(iv_o));
    else if (*tst) run_test(test_o, build_config(test_o));
    else if (*sim) run_simulate(sim_o, build_config(sim_o), scenario, eta, n, k, reps, study,
                                emit_plot_data);
    else if (*ing) run_ingest(ing_o, min_k, train_split);
  } catch (const Error& e) {
    std::cerr << "EBNF-E" << e.code_int() << ": " << e.what() << '\n';
    return e.code_int() < 200 ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "EBNF-E200: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
