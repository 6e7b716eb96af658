#ifndef EBNF_MGF_HPP
#define EBNF_MGF_HPP

#include <functional>
#include <utility>

#include "ebnf/core.hpp"

namespace ebnf {

// Joint marginal density of (x, s2), already conditioned on the observation's
// k where that applies.  Implementations: the fitted KDE, the conditional KDE
// with k pinned, or a closed-form density in tests.
using DensityFn = std::function<double(double x, double s2)>;

struct WMoments {
  double mean = 0.0;
  double variance = 0.0;
  bool variance_floored = false;
};

// Posterior MGFs of U = theta/sigma^2 | D, V = 1/sigma^2 | D and
// W(z) = U - zV, expressed as prefactor * density ratio.  The denominator
// f(x, s2) is tempered at rho so tail observations stay finite.
class MgfEvaluator {
 public:
  MgfEvaluator(Observation obs, DensityFn density, double rho);

  double mgf_u(double t) const;
  double mgf_v(double t) const;
  double mgf_uv(double t1, double t2) const;
  double mgf_w(double z, double t) const;

  // Valid open t-interval (lo, hi) with lo < 0 < hi for the W(z) family.
  std::pair<double, double> w_domain(double z) const;

  // Subinterval where the shifted variance argument keeps a fixed fraction
  // of s2, so density-ratio targets stay numerically trustworthy.
  std::pair<double, double> w_trust_domain(double z) const;

  // Mean/variance of W(z) by symmetric differencing of log M_{W(z)}:
  //   mean = (log M(h) - log M(-h)) / 2h
  //   var  = (log M(h) + log M(-h)) / h^2     (log M(0) = 0)
  // A non-positive variance estimate is floored and flagged.
  WMoments mgf_w_moments(double z) const;

  const Observation& obs() const { return obs_; }
  double f0() const { return f0_; }

  // Ratio at t = 0: f(x, s2) / max(f(x, s2), rho).  Equal to 1 unless the
  // denominator was tempered; MGF targets are normalized by this value so a
  // floored denominator rescales the whole family instead of breaking the
  // M(0) = 1 normalization the moment matching relies on.
  double m0() const { return m0_; }

 private:
  double ratio(double x_shift, double s2_shifted, double t_max) const;

  Observation obs_;
  DensityFn density_;
  double rho_;
  double f0_;  // max(f(x, s2), rho)
  double m0_ = 1.0;
};

}  // namespace ebnf

#endif  // EBNF_MGF_HPP
