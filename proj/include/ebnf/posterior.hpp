#ifndef EBNF_POSTERIOR_HPP
#define EBNF_POSTERIOR_HPP

#include <map>
#include <utility>
#include <vector>

#include "ebnf/core.hpp"
#include "ebnf/mgf.hpp"

namespace ebnf {

struct DiscretePosterior {
  std::vector<double> knots;        // a_1..a_S, equally spaced
  std::vector<double> probs;        // simplex weights
  std::vector<double> multipliers;  // lambda_1..lambda_L
  double constraint_residual = 0.0;
  bool feasible = true;
  int iterations = 0;
  bool ridged = false;
};

// S equally spaced knots over [mean - c_w sd, mean + c_w sd] of W(z).
std::vector<double> build_grid(const MgfEvaluator& ev, double z, const EngineConfig& cfg);

// Same span, widened so every constraint's exp(t a) = M crossing point
// log(M)/t lies strictly inside the grid; otherwise the moment-matching
// problem has no solution supported on the knots.
std::vector<double> build_grid(const WMoments& m,
                               const std::vector<std::pair<double, double>>& targets,
                               const EngineConfig& cfg);

// Maximum-entropy weights on the knots matching the MGF targets
//   sum_s p_s exp(t_l a_s) = M_l,   l = 1..L,
// via damped Newton-Raphson on the Lagrange multipliers.  L = 0 returns the
// uniform distribution.  Non-convergence returns the best iterate with
// feasible = false.
DiscretePosterior maxent_solve(const std::vector<double>& knots,
                               const std::vector<std::pair<double, double>>& targets,
                               const EngineConfig& cfg);

// Posterior CDF of theta for one observation: F(z) = P(W(z) <= 0 | D),
// estimated by discretizing W(z).  Queried values are cached and clamped so
// the recorded CDF is nondecreasing in z.
class PosteriorCdf {
 public:
  PosteriorCdf(const MgfEvaluator* ev, const EngineConfig* cfg) : ev_(ev), cfg_(cfg) {}

  double cdf_at(double z);

  // Quantile interval (z_L, z_U) with F(z_L) = alpha/2, F(z_U) = 1 - alpha/2,
  // located by bracket expansion plus bisection on the repaired CDF.
  std::pair<double, double> quantile_interval(double alpha);

  bool any_infeasible() const { return any_infeasible_; }
  const std::map<double, double>& cache() const { return cache_; }

 private:
  double quantile(double target);

  const MgfEvaluator* ev_;
  const EngineConfig* cfg_;
  std::map<double, double> cache_;
  bool any_infeasible_ = false;
};

// Per-observation scale factor c <= 1 applied to cfg.mgf_points so every
// point lies strictly inside the W(z) MGF domain.
double mgf_point_scale(const MgfEvaluator& ev, double z, const std::vector<double>& points);

}  // namespace ebnf

#endif  // EBNF_POSTERIOR_HPP
