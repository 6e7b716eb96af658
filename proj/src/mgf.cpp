#include "ebnf/mgf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ebnf {

MgfEvaluator::MgfEvaluator(Observation obs, DensityFn density, double rho)
    : obs_(std::move(obs)), density_(std::move(density)), rho_(rho) {
  if (!(rho_ > 0)) throw ValidationError("rho must be > 0", errc::bad_config);
  if (!(obs_.s2 > 0)) throw ValidationError("s2 must be > 0", errc::bad_value);
  if (!(obs_.k > 0)) throw ValidationError("k must be > 0", errc::bad_value);
  double f = density_(obs_.x, obs_.s2);
  f0_ = std::max(f, rho_);
  m0_ = f / f0_;
  if (!(m0_ > 0))
    throw NumericalError("marginal density vanishes at the observation", errc::degenerate);
}

double MgfEvaluator::ratio(double x_shift, double s2_shifted, double t_max) const {
  if (!(s2_shifted > 0))
    throw DomainError("shifted variance argument is nonpositive", t_max);
  double pre = std::pow(obs_.s2 / s2_shifted, obs_.k / 2.0 - 1.0);
  return pre * density_(x_shift, s2_shifted) / f0_;
}

double MgfEvaluator::mgf_u(double t) const {
  // valid iff t^2 + 2xt - k s2 < 0
  double disc = std::sqrt(obs_.x * obs_.x + obs_.k * obs_.s2);
  double t_max = std::min(disc - obs_.x, disc + obs_.x);
  double s2s = obs_.s2 - (2.0 * t * obs_.x + t * t) / obs_.k;
  return ratio(obs_.x + t, s2s, t_max);
}

double MgfEvaluator::mgf_v(double t) const {
  double t_max = obs_.k * obs_.s2 / 2.0;
  double s2s = obs_.s2 - 2.0 * t / obs_.k;
  return ratio(obs_.x, s2s, t_max);
}

double MgfEvaluator::mgf_uv(double t1, double t2) const {
  // max scale c with (c t1, c t2) still valid: t1^2 c^2 + 2(t1 x + t2) c < k s2
  double a = t1 * t1;
  double b = t1 * obs_.x + t2;
  double c_max;
  if (a == 0.0) {
    c_max = b > 0 ? obs_.k * obs_.s2 / (2.0 * b) : std::numeric_limits<double>::infinity();
  } else {
    c_max = (-b + std::sqrt(b * b + a * obs_.k * obs_.s2)) / a;
  }
  double s2s = obs_.s2 - (2.0 * t1 * obs_.x + t1 * t1 + 2.0 * t2) / obs_.k;
  return ratio(obs_.x + t1, s2s, c_max);
}

namespace {

// Roots of t^2 + 2bt - m = 0 (m > 0), computed without cancellation: the
// small-magnitude root comes from the product lo*hi = -m.
std::pair<double, double> stable_roots(double b, double m) {
  double disc = std::sqrt(b * b + m);
  if (b >= 0) {
    double lo = -b - disc;
    return {lo, -m / lo};
  }
  double hi = -b + disc;
  return {-m / hi, hi};
}

}  // namespace

std::pair<double, double> MgfEvaluator::w_domain(double z) const {
  // W(z) = U - zV, M_{W(z)}(t) = M_{U,V}(t, -zt); valid iff
  // t^2 + 2(x - z)t - k s2 < 0.
  return stable_roots(obs_.x - z, obs_.k * obs_.s2);
}

std::pair<double, double> MgfEvaluator::w_trust_domain(double z) const {
  // Tighter interval keeping the shifted variance above (1 - gamma) s2.  The
  // prefactor (s2/s2')^{k/2-1} amplifies density-estimation error as s2'
  // approaches 0, so MGF evaluation points are confined to this region.
  constexpr double gamma = 0.75;
  return stable_roots(obs_.x - z, gamma * obs_.k * obs_.s2);
}

double MgfEvaluator::mgf_w(double z, double t) const {
  auto [lo, hi] = w_domain(z);
  double t_max = std::min(-lo, hi);
  double s2s = obs_.s2 - (2.0 * t * obs_.x + t * t - 2.0 * z * t) / obs_.k;
  return ratio(obs_.x + t, s2s, t_max);
}

WMoments MgfEvaluator::mgf_w_moments(double z) const {
  auto [lo, hi] = w_domain(z);
  double t_sym = std::min(-lo, hi);
  if (!(t_sym > 0))
    throw NumericalError("no valid symmetric MGF step for this observation", errc::mgf_domain);
  double l0 = std::log(m0_);
  WMoments m;
  // mean from an infinitesimal symmetric step
  double h = std::min(1e-3, t_sym / 2.0);
  double lp = std::log(mgf_w(z, h)) - l0;
  double lm = std::log(mgf_w(z, -h)) - l0;
  m.mean = (lp - lm) / (2.0 * h);
  // spread from the curvature averaged over the scale the moment constraints
  // actually probe: the infinitesimal curvature of the estimated log M badly
  // understates the spread when the density estimate is smooth, and the grid
  // built from it would truncate real mass
  double hv = std::min(0.3, t_sym / 2.0);
  double lpv = std::log(mgf_w(z, hv)) - l0;
  double lmv = std::log(mgf_w(z, -hv)) - l0;
  m.variance = (lpv + lmv) / (hv * hv);  // log(M(0)/m0) = 0
  // Floor at a fraction of the sampling-model variance of W(z) (obtained by
  // dropping the prior:  V ~ Ga(k/2, k s2/2),  theta | sigma2 ~ N(x, sigma2)),
  // so a degenerate curvature estimate cannot collapse the support grid.
  double dz = obs_.x - z;
  double pivotal = 1.0 / obs_.s2 + 2.0 * dz * dz / (obs_.k * obs_.s2 * obs_.s2);
  if (!(m.variance >= 0.25 * pivotal)) {
    m.variance = 0.25 * pivotal;
    m.variance_floored = true;
  }
  return m;
}

}  // namespace ebnf
