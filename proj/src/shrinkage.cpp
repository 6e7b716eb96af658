#include "ebnf/shrinkage.hpp"

#include <cmath>
#include <fstream>
#include <thread>

namespace ebnf {

double bayes_estimate(double f, double f_x, double f_s2, const Observation& obs) {
  if (!(obs.k > 2))
    throw ValidationError("bayes_estimate requires k > 2 (id '" + obs.id + "')", errc::bad_value);
  double denom = (obs.k - 2.0) * f - 2.0 * obs.s2 * f_s2;
  if (denom == 0.0)
    throw NumericalError("zero denominator in bayes_estimate (id '" + obs.id + "')");
  return obs.x + obs.k * obs.s2 * f_x / denom;
}

ShrinkageResult ebt_estimate(const DensityModel& model, const Observation& obs,
                             const EngineConfig& cfg) {
  if (!(obs.k > 2))
    throw ValidationError("ebt_estimate requires k > 2 (id '" + obs.id + "')", errc::bad_value);
  Partials p = model.eval_partials(obs.x, obs.s2, obs.k, cfg);
  double denom = (obs.k - 2.0) * p.f - 2.0 * obs.s2 * p.f_s2;
  ShrinkageResult r;
  r.id = obs.id;
  r.raw_x = obs.x;
  r.denominator = denom;
  r.floored = denom < cfg.rho;
  r.theta_hat = obs.x + obs.k * obs.s2 * p.f_x / std::max(denom, cfg.rho);
  return r;
}

std::vector<ShrinkageResult> ebt_estimate_all(const DensityModel& model, const Dataset& data,
                                              const EngineConfig& cfg, int threads) {
  require_k_above_two(data);
  std::size_t n = data.size();
  std::vector<ShrinkageResult> out(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = ebt_estimate(model, data.observations[i], cfg);
    return out;
  }
  std::vector<std::thread> pool;
  std::size_t nthreads = static_cast<std::size_t>(threads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nthreads)
        out[i] = ebt_estimate(model, data.observations[i], cfg);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

double regret_diagnostic(const std::vector<double>& theta_hat,
                         const std::vector<double>& theta_bayes,
                         const std::vector<double>& sigma2) {
  if (theta_hat.size() != theta_bayes.size() || theta_hat.size() != sigma2.size())
    throw ValidationError("regret_diagnostic: length mismatch", errc::validation);
  if (theta_hat.empty()) throw ValidationError("regret_diagnostic: empty input", errc::validation);
  double acc = 0.0;
  for (std::size_t i = 0; i < theta_hat.size(); ++i) {
    if (!(sigma2[i] > 0))
      throw ValidationError("regret_diagnostic: sigma2 must be > 0", errc::bad_value);
    double d = theta_hat[i] - theta_bayes[i];
    acc += d * d / sigma2[i];
  }
  return acc / static_cast<double>(theta_hat.size());
}

void write_shrinkage_csv(const std::vector<ShrinkageResult>& results,
                         const std::vector<Observation>& obs, const std::string& path) {
  if (results.size() != obs.size())
    throw ValidationError("shrinkage output: length mismatch", errc::validation);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path, errc::parse);
  out << "# ebnf-schema v1\n";
  out << "id,x,s2,k,theta_hat,floored\n";
  out.precision(17);
  for (std::size_t i = 0; i < results.size(); ++i) {
    out << csv_escape(results[i].id) << ',' << obs[i].x << ',' << obs[i].s2 << ',' << obs[i].k
        << ',' << results[i].theta_hat << ',' << (results[i].floored ? 1 : 0) << '\n';
  }
}

}  // namespace ebnf
