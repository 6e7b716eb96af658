#include "ebnf/simulate.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <thread>

#include "ebnf/density.hpp"
#include "ebnf/mgf.hpp"
#include "ebnf/posterior.hpp"
#include "ebnf/shrinkage.hpp"
#include "ebnf/testing.hpp"

namespace ebnf {

double Rng::uniform01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
  if (!(b > a)) throw ValidationError("uniform requires a < b", errc::bad_value);
  return a + (b - a) * uniform01();
}

double Rng::normal(double mean, double sd) {
  // basic Box-Muller; the second variate is discarded to keep calls stateless
  double u1 = uniform01(), u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + sd * z;
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0) || !(rate > 0))
    throw ValidationError("gamma requires shape > 0 and rate > 0", errc::bad_value);
  if (shape < 1.0) {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal(0.0, 1.0);
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double Rng::chisq(double df) { return gamma(df / 2.0, 0.5); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Scenario parse_scenario(const std::string& name) {
  if (name == "S1" || name == "s1") return Scenario::S1;
  if (name == "S2" || name == "s2") return Scenario::S2;
  if (name == "S3" || name == "s3") return Scenario::S3;
  throw ValidationError("unknown scenario '" + name + "'", errc::bad_config);
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    default: return "S3";
  }
}

TruthedSample draw_scenario(const ScenarioSpec& spec) {
  if (spec.n < 10) throw ValidationError("scenario needs n >= 10", errc::bad_config);
  if (spec.k <= 2) throw ValidationError("scenario needs k > 2", errc::bad_config);
  Rng rng(spec.seed);
  TruthedSample out;
  out.theta.reserve(spec.n);
  out.sigma2.reserve(spec.n);
  std::vector<RawRow> raw;
  raw.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    double theta = 0.0, sigma2 = 1.0;
    switch (spec.scenario) {
      case Scenario::S1: {
        bool z = rng.uniform01() < 0.3;
        theta = z ? rng.normal(-1.0, 0.7) : rng.normal(-1.0 + spec.eta / 2.0, 0.7);
        double star = z ? rng.gamma(1.0, 1.0) : rng.gamma(1.0 + spec.eta / 3.0, 1.0);
        sigma2 = std::max(0.2, star);
        break;
      }
      case Scenario::S2: {
        bool z = rng.uniform01() < 0.4;
        theta = z ? 0.0 : rng.uniform(spec.eta / 3.0, 2.0 + spec.eta / 3.0);
        sigma2 = z ? rng.uniform(0.2, 0.5) : rng.uniform(3.0, 7.0);
        break;
      }
      case Scenario::S3: {
        theta = rng.uniform01() < 0.5 ? rng.normal(0.0, 0.5)
                                      : rng.gamma(2.0 + spec.eta / 3.0, 2.0);
        sigma2 = std::exp(rng.normal(theta / 2.0, 0.2));
        break;
      }
    }
    double x = rng.normal(theta, std::sqrt(sigma2));
    double s2 = sigma2 * rng.chisq(spec.k) / static_cast<double>(spec.k);
    out.theta.push_back(theta);
    out.sigma2.push_back(sigma2);
    raw.emplace_back("u" + std::to_string(i + 1), x, s2, static_cast<double>(spec.k));
  }
  out.dataset = validate_dataset(raw);
  return out;
}

namespace {

// Runs reps independent replications with per-rep derived seeds; results are
// merged in rep order regardless of scheduling.
template <typename T>
std::vector<T> parallel_reps(int reps, int threads, const std::function<T(int)>& body) {
  std::vector<T> out(reps);
  if (threads <= 1) {
    for (int r = 0; r < reps; ++r) out[r] = body(r);
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int r = t; r < reps; r += threads) out[r] = body(r);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

ScenarioSpec derived(const ScenarioSpec& spec, int rep) {
  ScenarioSpec s = spec;
  s.seed = splitmix64(spec.seed ^ static_cast<std::uint64_t>(rep));
  return s;
}

DensityFn density_for(const DensityModel& model, const Observation& o) {
  return [&model, k = o.k](double x, double s2) { return model.eval_f(x, s2, k); };
}

}  // namespace

StudyResult run_estimation_study(const ScenarioSpec& spec, int reps, const EngineConfig& cfg,
                                 int threads) {
  if (reps < 1) throw ValidationError("reps must be >= 1", errc::bad_config);
  struct RepLoss { double ml = 0.0, nf = 0.0; };
  auto per_rep = parallel_reps<RepLoss>(reps, threads, [&](int r) {
    TruthedSample sample = draw_scenario(derived(spec, r));
    DensityModel model = DensityModel::fit(sample.dataset);
    auto results = ebt_estimate_all(model, sample.dataset, cfg);
    RepLoss loss;
    double n = static_cast<double>(sample.dataset.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
      double dm = sample.dataset.observations[i].x - sample.theta[i];
      double dn = results[i].theta_hat - sample.theta[i];
      loss.ml += dm * dm / sample.sigma2[i] / n;
      loss.nf += dn * dn / sample.sigma2[i] / n;
    }
    return loss;
  });
  StudyResult out;
  out.ml.reps = out.nf.reps = reps;
  for (const auto& l : per_rep) {
    out.ml.weighted_loss += l.ml / reps;
    out.nf.weighted_loss += l.nf / reps;
  }
  return out;
}

StudyResult run_interval_study(const ScenarioSpec& spec, int reps, double alpha,
                               const EngineConfig& cfg, int threads) {
  if (reps < 1) throw ValidationError("reps must be >= 1", errc::bad_config);
  struct RepIv { double cp_ml = 0, al_ml = 0, cp_nf = 0, al_nf = 0; };
  auto per_rep = parallel_reps<RepIv>(reps, threads, [&](int r) {
    TruthedSample sample = draw_scenario(derived(spec, r));
    DensityModel model = DensityModel::fit(sample.dataset);
    require_k_above_two(sample.dataset);
    RepIv iv;
    double n = static_cast<double>(sample.dataset.size());
    for (std::size_t i = 0; i < sample.dataset.size(); ++i) {
      const Observation& o = sample.dataset.observations[i];
      double s = std::sqrt(o.s2);
      double tq = t_quantile(1.0 - alpha / 2.0, o.k);
      double ml_lo = o.x - tq * s, ml_hi = o.x + tq * s;
      iv.cp_ml += (sample.theta[i] >= ml_lo && sample.theta[i] <= ml_hi) / n;
      iv.al_ml += (ml_hi - ml_lo) / n;

      MgfEvaluator ev(o, density_for(model, o), cfg.rho);
      PosteriorCdf pc(&ev, &cfg);
      auto [nf_lo, nf_hi] = pc.quantile_interval(alpha);
      iv.cp_nf += (sample.theta[i] >= nf_lo && sample.theta[i] <= nf_hi) / n;
      iv.al_nf += (nf_hi - nf_lo) / n;
    }
    return iv;
  });
  StudyResult out;
  out.ml.reps = out.nf.reps = reps;
  for (const auto& iv : per_rep) {
    out.ml.cp += iv.cp_ml / reps;
    out.ml.al += iv.al_ml / reps;
    out.nf.cp += iv.cp_nf / reps;
    out.nf.al += iv.al_nf / reps;
  }
  return out;
}

TestingStudyResult run_testing_study(const ScenarioSpec& spec, int reps, double alpha,
                                     double delta, const EngineConfig& cfg, int threads) {
  if (reps < 1) throw ValidationError("reps must be >= 1", errc::bad_config);
  struct RepTest { double fdr[3] = {0, 0, 0}, tpr[3] = {0, 0, 0}, f1[3] = {0, 0, 0}; };
  auto per_rep = parallel_reps<RepTest>(reps, threads, [&](int r) {
    TruthedSample sample = draw_scenario(derived(spec, r));
    DensityModel model = DensityModel::fit(sample.dataset);
    std::size_t n = sample.dataset.size();

    std::vector<double> pns(n), pvals(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Observation& o = sample.dataset.observations[i];
      MgfEvaluator ev(o, density_for(model, o), cfg.rho);
      PosteriorCdf pc(&ev, &cfg);
      pns[i] = posterior_null_prob(pc, delta);
      pvals[i] = ttest_pvalue(o, delta);
    }
    std::set<std::size_t> rejected[3] = {fdr_reject(pns, alpha), fdr_reject(pvals, alpha),
                                         bh_reject(pvals, alpha)};
    RepTest rt;
    double positives = 0.0;
    for (std::size_t i = 0; i < n; ++i) positives += std::fabs(sample.theta[i]) > delta;
    for (int m = 0; m < 3; ++m) {
      double tp = 0.0, fp = 0.0;
      for (std::size_t idx : rejected[m]) {
        if (std::fabs(sample.theta[idx]) > delta) tp += 1.0;
        else fp += 1.0;
      }
      double rejections = static_cast<double>(rejected[m].size());
      rt.fdr[m] = fp / std::max(1.0, rejections);
      rt.tpr[m] = positives > 0 ? tp / positives : 0.0;
      double denom = rejections + positives;
      rt.f1[m] = denom > 0 ? 2.0 * tp / denom : 0.0;
    }
    return rt;
  });
  TestingStudyResult out;
  MetricsReport* reports[3] = {&out.nf, &out.ttest, &out.bh};
  for (int m = 0; m < 3; ++m) reports[m]->reps = reps;
  for (const auto& rt : per_rep) {
    for (int m = 0; m < 3; ++m) {
      reports[m]->fdr += rt.fdr[m] / reps;
      reports[m]->tpr += rt.tpr[m] / reps;
      reports[m]->f1 += rt.f1[m] / reps;
    }
  }
  return out;
}

}  // namespace ebnf
