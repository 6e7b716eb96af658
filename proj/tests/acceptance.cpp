// End-to-end acceptance suite.  Each criterion prints one PASS/FAIL line;
// the exit code is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "conjugate_oracle.hpp"
#include "ebnf/density.hpp"
#include "ebnf/ingest.hpp"
#include "ebnf/mgf.hpp"
#include "ebnf/posterior.hpp"
#include "ebnf/shrinkage.hpp"
#include "ebnf/simulate.hpp"
#include "ebnf/testing.hpp"

using namespace ebnf;

namespace {

int failures = 0;

void report(int num, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << num << " (" << name << "): " << detail
            << std::endl;
  if (!ok) ++failures;
}

int hw_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 4 : static_cast<int>(n);
}

MgfEvaluator oracle_evaluator(const oracle::Prior& pr, const Observation& obs) {
  double k = obs.k;
  DensityFn d = [pr, k](double x, double s2) { return oracle::marginal_f(pr, x, s2, k); };
  return MgfEvaluator(obs, d, 1e-3);
}

// 1. Point estimator from exact density inputs equals the closed-form
//    conjugate posterior mean on a 20x20 grid.
void criterion1() {
  oracle::Prior pr{0.5, 2.0, 4.0, 3.0};
  double k = 10.0, worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      double x = -3.0 + 6.0 * i / 19.0;
      double s2 = 0.2 + 2.8 * j / 19.0;
      double f, f_x, f_s2;
      oracle::marginal_partials(pr, x, s2, k, f, f_x, f_s2);
      double got = bayes_estimate(f, f_x, f_s2, {"u", x, s2, k});
      double want = (pr.kappa0 * pr.mu0 + x) / (pr.kappa0 + 1.0);
      worst = std::max(worst, std::fabs(got - want));
    }
  }
  std::ostringstream d;
  d << "max |error| = " << worst << " (tol 1e-6)";
  report(1, "posterior-mean identity on conjugate oracle", worst <= 1e-6, d.str());
}

// 2. Density-ratio MGFs match the conjugate closed forms.
void criterion2() {
  oracle::Prior pr{-0.3, 1.5, 5.0, 4.0};
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> ux(-2, 2), us(0.4, 2.5), ut(-0.25, 0.25);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    double kk = 5.0 + static_cast<double>(gen() % 20);
    Observation obs{"u", ux(gen), us(gen), kk};
    oracle::Posterior po = oracle::posterior(pr, obs.x, obs.s2, obs.k);
    MgfEvaluator ev = oracle_evaluator(pr, obs);
    double t1 = ut(gen), t2 = ut(gen);
    auto rel = [](double a, double b) { return std::fabs(a - b) / std::fabs(b); };
    worst = std::max(worst, rel(ev.mgf_u(t1), oracle::mgf_u(po, t1)));
    worst = std::max(worst, rel(ev.mgf_v(t1), oracle::mgf_v(po, t1)));
    worst = std::max(worst, rel(ev.mgf_uv(t1, t2), oracle::mgf_uv(po, t1, t2)));
  }
  std::ostringstream d;
  d << "max relative error = " << worst << " (tol 1e-6)";
  report(2, "MGF density-ratio identity", worst <= 1e-6, d.str());
}

// 3. Max-entropy discretization recovers a two-point law; L = 0 is uniform.
void criterion3() {
  EngineConfig cfg;
  std::vector<double> knots(41);
  for (int i = 0; i < 41; ++i) knots[i] = -2.0 + 4.0 * i / 40.0;
  std::vector<std::pair<double, double>> targets;
  for (double t : cfg.mgf_points) targets.emplace_back(t, 0.3 * std::exp(-t) + 0.7 * std::exp(t));
  auto dp = maxent_solve(knots, targets, cfg);
  double mass = 0;
  for (int i = 0; i < 41; ++i)
    if (knots[i] <= 0.0) mass += dp.probs[i];
  bool ok = dp.feasible && std::fabs(mass - 0.3) <= 0.02;

  auto uniform = maxent_solve(knots, {}, cfg);
  for (double p : uniform.probs) ok = ok && p == 1.0 / 41.0;
  std::ostringstream d;
  d << "CDF(0) = " << mass << " vs 0.3 (tol 0.02); L=0 uniform exact";
  report(3, "max-entropy two-point recovery", ok, d.str());
}

// 4. Posterior CDF vs the closed-form posterior-t CDF at its own quantiles.
void criterion4() {
  oracle::Prior pr{0.2, 1.8, 4.0, 3.5};
  EngineConfig cfg;
  Rng rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    oracle::Draw dr = oracle::draw(pr, 10.0, rng);
    Observation obs{"u", dr.x, dr.s2, 10.0};
    oracle::Posterior po = oracle::posterior(pr, obs.x, obs.s2, obs.k);
    MgfEvaluator ev = oracle_evaluator(pr, obs);
    PosteriorCdf pc(&ev, &cfg);
    for (double p : {0.1, 0.5, 0.9}) {
      double z = oracle::theta_quantile(po, p);
      worst = std::max(worst, std::fabs(pc.cdf_at(z) - p));
    }
  }
  std::ostringstream d;
  d << "max |CDF error| over 100 draws = " << worst << " (tol 0.02)";
  report(4, "posterior CDF vs conjugate oracle", worst <= 0.02, d.str());
}

// 5. Estimation study: ML weighted loss ~ 1, shrinkage strictly better.
void criterion5() {
  ScenarioSpec spec{Scenario::S1, 4.0, 500, 10, 31};
  EngineConfig cfg;
  StudyResult r = run_estimation_study(spec, 50, cfg, hw_threads());
  bool ok = r.ml.weighted_loss >= 0.95 && r.ml.weighted_loss <= 1.05 &&
            r.nf.weighted_loss < r.ml.weighted_loss && r.nf.weighted_loss < 0.9;
  std::ostringstream d;
  d << "ML loss = " << r.ml.weighted_loss << " (in [0.95,1.05]), NF loss = "
    << r.nf.weighted_loss << " (< ML and < 0.9)";
  report(5, "estimation study ordering", ok, d.str());
}

// 6. Interval study: CP near nominal, NF intervals shorter than ML.
void criterion6() {
  ScenarioSpec spec{Scenario::S1, 7.0, 500, 10, 47};
  EngineConfig cfg;
  StudyResult r = run_interval_study(spec, 50, 0.05, cfg, hw_threads());
  double ml_cp = 100.0 * r.ml.cp, nf_cp = 100.0 * r.nf.cp;
  bool ok = ml_cp >= 94.0 && ml_cp <= 96.2 && std::fabs(r.ml.al - 6.55) <= 0.05 * 6.55 &&
            nf_cp >= 93.5 && nf_cp <= 98.5 && std::fabs(r.nf.al - 5.57) <= 0.15 * 5.57 &&
            r.nf.al < r.ml.al;
  std::ostringstream d;
  d << "ML CP = " << ml_cp << "%, ML AL = " << r.ml.al << "; NF CP = " << nf_cp
    << "%, NF AL = " << r.nf.al;
  report(6, "interval study coverage/length", ok, d.str());
}

// 7. Testing study: FDR controlled, higher power than the t-test comparator.
void criterion7() {
  ScenarioSpec spec{Scenario::S1, 7.0, 1000, 10, 59};
  EngineConfig cfg;
  TestingStudyResult r = run_testing_study(spec, 30, 0.1, 1.0, cfg, hw_threads());
  bool ok = r.nf.fdr <= 0.13 && r.nf.tpr > r.ttest.tpr;
  std::ostringstream d;
  d << "NF FDR = " << r.nf.fdr << " (<= 0.13), NF TPR = " << r.nf.tpr << " > T-test TPR = "
    << r.ttest.tpr;
  report(7, "testing study FDR/power", ok, d.str());
}

// 8. Regret identity: empirical loss gap equals the regret diagnostic.
void criterion8() {
  oracle::Prior pr;
  const int N = 20000, M = 2000;
  Rng rng(77);
  std::vector<RawRow> raw;
  std::vector<double> theta(N), sigma2(N), theta_b(N);
  for (int i = 0; i < N; ++i) {
    oracle::Draw dr = oracle::draw(pr, 10.0, rng);
    raw.emplace_back("u" + std::to_string(i), dr.x, dr.s2, 10.0);
    theta[i] = dr.theta;
    sigma2[i] = dr.sigma2;
    theta_b[i] = (pr.kappa0 * pr.mu0 + dr.x) / (pr.kappa0 + 1.0);
  }
  Dataset full = validate_dataset(raw);
  Dataset sub = validate_dataset({raw.begin(), raw.begin() + M});
  DensityModel model = DensityModel::fit(sub);
  EngineConfig cfg;
  auto est = ebt_estimate_all(model, full, cfg, hw_threads());

  std::vector<double> theta_hat(N);
  for (int i = 0; i < N; ++i) theta_hat[i] = est[i].theta_hat;
  double regret = regret_diagnostic(theta_hat, theta_b, sigma2);
  // D_i has conditional mean zero given the data; 3-sigma band on its average
  double mean = 0, m2 = 0;
  std::vector<double> D(N);
  for (int i = 0; i < N; ++i) {
    double a = theta_hat[i] - theta[i], b = theta_b[i] - theta[i], c = theta_hat[i] - theta_b[i];
    D[i] = (a * a - b * b - c * c) / sigma2[i];
    mean += D[i];
  }
  mean /= N;
  for (int i = 0; i < N; ++i) m2 += (D[i] - mean) * (D[i] - mean);
  double se = std::sqrt(m2 / (N - 1.0) / N);
  double loss_gap = 0;
  for (int i = 0; i < N; ++i) {
    double a = theta_hat[i] - theta[i], b = theta_b[i] - theta[i];
    loss_gap += (a * a - b * b) / sigma2[i];
  }
  loss_gap /= N;
  bool ok = std::fabs(loss_gap - regret) <= 3.0 * se;
  std::ostringstream d;
  d << "loss gap = " << loss_gap << ", regret = " << regret << ", |diff| = "
    << std::fabs(loss_gap - regret) << " <= 3 SE = " << 3.0 * se;
  report(8, "regret identity", ok, d.str());
}

// 9. Fast invariants, timed.
void criterion9() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream why;

  // M(0) = 1
  oracle::Prior pr;
  std::mt19937_64 gen(909);
  std::uniform_real_distribution<double> ux(-2, 2), us(0.3, 3.0), u01(0, 1);
  for (int i = 0; i < 20; ++i) {
    Observation obs{"u", ux(gen), us(gen), 6.0 + static_cast<double>(gen() % 15)};
    MgfEvaluator ev = oracle_evaluator(pr, obs);
    if (std::fabs(ev.mgf_w(ux(gen), 0.0) - 1.0) > 1e-12) { ok = false; why << "M(0)!=1; "; break; }
  }

  // maxent simplex + residual bound
  EngineConfig cfg;
  Observation obs{"u", 0.4, 1.1, 10.0};
  MgfEvaluator ev = oracle_evaluator(pr, obs);
  for (double z : {-1.0, 0.2, 1.5}) {
    auto knots = build_grid(ev, z, cfg);
    double c = mgf_point_scale(ev, z, cfg.mgf_points);
    std::vector<std::pair<double, double>> targets;
    for (double t : cfg.mgf_points) targets.emplace_back(c * t, ev.mgf_w(z, c * t));
    auto dp = maxent_solve(knots, targets, cfg);
    double tot = std::accumulate(dp.probs.begin(), dp.probs.end(), 0.0);
    bool neg = false;
    for (double p : dp.probs) neg = neg || p < 0.0;
    if (!dp.feasible || neg || std::fabs(tot - 1.0) > 1e-9) { ok = false; why << "maxent simplex; "; }
  }

  // monotone repaired CDF
  {
    PosteriorCdf pc(&ev, &cfg);
    double prev = -1;
    for (double z = -6; z <= 6; z += 0.4) {
      double F = pc.cdf_at(z);
      if (F < prev - 1e-12 || F < 0 || F > 1) { ok = false; why << "CDF monotone; "; break; }
      prev = F;
    }
  }

  // step-up rules vs brute force on 1000 random inputs
  for (int rep = 0; rep < 1000 && ok; ++rep) {
    std::size_t n = 1 + gen() % 20;
    std::vector<double> v(n);
    for (auto& x : v) x = u01(gen);
    double alpha = 0.5 * u01(gen);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::size_t m_up = 0, m_bh = 0;
    for (std::size_t m = n; m >= 1; --m) {
      double sum = 0;
      for (std::size_t i = 0; i < m; ++i) sum += v[idx[i]];
      if (sum / m <= alpha) { m_up = m; break; }
    }
    for (std::size_t m = n; m >= 1; --m)
      if (v[idx[m - 1]] <= alpha * m / n) { m_bh = m; break; }
    std::set<std::size_t> want_up(idx.begin(), idx.begin() + m_up);
    std::set<std::size_t> want_bh(idx.begin(), idx.begin() + m_bh);
    if (fdr_reject(v, alpha) != want_up) { ok = false; why << "step-up mismatch; "; }
    if (bh_reject(v, alpha) != want_bh) { ok = false; why << "BH mismatch; "; }
  }

  // ingest equivariance: weight rescaling and record permutation
  {
    std::vector<ReplicateRecord> recs = {
        {"u", 1.0, 2.0}, {"u", -0.5, 1.0}, {"u", 2.5, 0.3}, {"u", 0.0, 4.0}};
    Observation a = aggregate_unit("u", recs);
    auto scaled = recs;
    for (auto& r : scaled) r.weight *= 7.5;
    Observation b = aggregate_unit("u", scaled);
    std::reverse(recs.begin(), recs.end());
    Observation cthird = aggregate_unit("u", recs);
    if (std::fabs(a.x - b.x) > 1e-10 || std::fabs(a.s2 - b.s2) > 1e-10 ||
        std::fabs(a.x - cthird.x) > 1e-10) { ok = false; why << "ingest equivariance; "; }
  }

  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 60.0) { ok = false; why << "too slow; "; }
  std::ostringstream d;
  d << "all invariants hold in " << secs << " s (< 60 s)" << (why.str().empty() ? "" : ": " + why.str());
  report(9, "invariant suites", ok, d.str());
}

// 10. CLI byte-determinism across runs and thread counts.
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10() {
#ifndef EBNF_CLI_PATH
  report(10, "CLI determinism", false, "CLI path not configured");
#else
  const std::string cli = EBNF_CLI_PATH;
  // shared inputs
  {
    ScenarioSpec spec{Scenario::S1, 4.0, 60, 10, 42};
    TruthedSample ts = draw_scenario(spec);
    write_dataset_csv(ts.dataset, "acc_data.csv");
    std::ofstream counts("acc_counts.csv", std::ios::binary);
    counts << "unit_id,successes,trials\n";
    Rng rng(8);
    for (int u = 0; u < 12; ++u)
      for (int r = 0; r < 4; ++r)
        counts << "g" << u << ',' << (5 + static_cast<int>(rng.uniform01() * 20)) << ",40\n";
  }
  bool ok = true;
  std::ostringstream why;
  auto run = [&](const std::string& args) {
    int rc = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    if (rc != 0) { ok = false; why << "nonzero exit for: " << args << "; "; }
  };
  auto pass = [&](int threads, const std::string& tag) {
    std::string t = " --threads " + std::to_string(threads);
    run("fit -i acc_data.csv -o acc_model_" + tag + ".json");
    run("estimate -i acc_data.csv -m acc_model_" + tag + ".json -o acc_est_" + tag + ".csv" + t);
    run("interval -i acc_data.csv -m acc_model_" + tag + ".json -o acc_iv_" + tag + ".csv" + t +
        " --alpha 0.05");
    run("test -i acc_data.csv -m acc_model_" + tag + ".json -o acc_test_" + tag + ".csv" + t +
        " --alpha 0.1 --delta 1");
    run("simulate --scenario S1 --eta 4 --n 80 --k 10 --reps 2 --study estimation --seed 7 -o "
        "acc_sim_" + tag + ".csv" + t);
    run("ingest -i acc_counts.csv -o acc_ing_" + tag + ".csv");
  };
  pass(1, "a");
  pass(8, "b");
  for (const std::string stem : {"model", "est", "iv", "test", "sim", "ing"}) {
    std::string ext = stem == "model" ? ".json" : ".csv";
    if (slurp("acc_" + stem + "_a" + ext) != slurp("acc_" + stem + "_b" + ext)) {
      ok = false;
      why << stem << " differs across thread counts; ";
    }
  }
  report(10, "CLI determinism", ok,
         ok ? "all six verbs byte-identical for threads 1 vs 8" : why.str());
#endif
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion9();
  criterion8();
  criterion10();
  criterion5();
  criterion6();
  criterion7();
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures))
            << std::endl;
  return failures;
}
