#ifndef EBNF_SHRINKAGE_HPP
#define EBNF_SHRINKAGE_HPP

#include <string>
#include <vector>

#include "ebnf/core.hpp"
#include "ebnf/density.hpp"

namespace ebnf {

struct ShrinkageResult {
  std::string id;
  double theta_hat = 0.0;
  double raw_x = 0.0;
  double denominator = 0.0;  // D_k before flooring
  bool floored = false;
};

// Generalized Tweedie estimator from exact density inputs:
//   theta_B = x + k s2 f_x / ((k-2) f - 2 s2 f_s2).
// Separated from the KDE so closed-form oracles can drive it directly.
double bayes_estimate(double f, double f_x, double f_s2, const Observation& obs);

// Tempered empirical version: denominator replaced by max(D_k, rho).
ShrinkageResult ebt_estimate(const DensityModel& model, const Observation& obs,
                             const EngineConfig& cfg);

std::vector<ShrinkageResult> ebt_estimate_all(const DensityModel& model, const Dataset& data,
                                              const EngineConfig& cfg, int threads = 1);

// Empirical regret n^-1 sum (theta_hat - theta_bayes)^2 / sigma2.
// Simulation-only: sigma2 is never observed in real data.
double regret_diagnostic(const std::vector<double>& theta_hat,
                         const std::vector<double>& theta_bayes,
                         const std::vector<double>& sigma2);

void write_shrinkage_csv(const std::vector<ShrinkageResult>& results,
                         const std::vector<Observation>& obs, const std::string& path);

}  // namespace ebnf

#endif  // EBNF_SHRINKAGE_HPP
