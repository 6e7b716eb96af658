#include "ebnf/posterior.hpp"

#include "ebnf/testing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ebnf {

std::vector<double> build_grid(const WMoments& m,
                               const std::vector<std::pair<double, double>>& targets,
                               const EngineConfig& cfg) {
  double sd = std::sqrt(m.variance);
  double lo = m.mean - cfg.grid_halfwidth_cw * sd;
  double hi = m.mean + cfg.grid_halfwidth_cw * sd;
  // The curvature of log M at 0 understates the spread needed to reproduce
  // M(t) at the outer evaluation points when the posterior is heavy-tailed;
  // make sure each crossing point log(M)/t is strictly interior.
  double margin = 0.1 * (hi - lo);
  double lo_cap = lo - 1.5 * (hi - lo), hi_cap = hi + 1.5 * (hi - lo);
  for (const auto& [t, M] : targets) {
    if (t == 0.0 || !(M > 0.0)) continue;
    double a = std::log(M) / t;
    lo = std::min(lo, std::max(a - margin, lo_cap));
    hi = std::max(hi, std::min(a + margin, hi_cap));
  }
  int S = cfg.grid_size_S;
  std::vector<double> knots(S);
  double step = (hi - lo) / static_cast<double>(S - 1);
  for (int s = 0; s < S; ++s) knots[s] = lo + step * s;
  return knots;
}

std::vector<double> build_grid(const MgfEvaluator& ev, double z, const EngineConfig& cfg) {
  return build_grid(ev.mgf_w_moments(z), {}, cfg);
}

namespace {

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_linear(std::vector<std::vector<double>> A, std::vector<double> b,
                  std::vector<double>& out) {
  std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    if (std::fabs(A[piv][col]) < 1e-300) return false;
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double m = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= m * A[col][c];
      b[r] -= m * b[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= A[r][c] * out[c];
    out[r] = acc / A[r][r];
  }
  return true;
}

struct NewtonState {
  std::vector<double> probs;     // p_s(lambda)
  std::vector<double> residual;  // sum_s p_s H_s[l]
  double residual_norm = 0.0;
  double merit = 0.0;            // log sum_s exp(lambda . H_s), the dual objective
};

NewtonState evaluate_state(const std::vector<std::vector<double>>& H,
                           const std::vector<double>& lambda) {
  std::size_t S = H.size(), L = lambda.size();
  NewtonState st;
  std::vector<double> expo(S);
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < S; ++s) {
    double e = 0.0;
    for (std::size_t l = 0; l < L; ++l) e += lambda[l] * H[s][l];
    expo[s] = e;
    emax = std::max(emax, e);
  }
  st.probs.resize(S);
  double wsum = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    st.probs[s] = std::exp(expo[s] - emax);
    wsum += st.probs[s];
  }
  st.merit = emax + std::log(wsum);
  for (auto& p : st.probs) p /= wsum;
  st.residual.assign(L, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t l = 0; l < L; ++l) st.residual[l] += st.probs[s] * H[s][l];
  for (double r : st.residual) st.residual_norm += r * r;
  st.residual_norm = std::sqrt(st.residual_norm);
  return st;
}

}  // namespace

DiscretePosterior maxent_solve(const std::vector<double>& knots,
                               const std::vector<std::pair<double, double>>& targets,
                               const EngineConfig& cfg) {
  std::size_t S = knots.size(), L = targets.size();
  if (S < 2) throw ValidationError("maxent_solve needs at least 2 knots", errc::validation);
  DiscretePosterior dp;
  dp.knots = knots;
  if (L == 0) {
    dp.probs.assign(S, 1.0 / static_cast<double>(S));
    return dp;
  }
  // Constraints scaled relative to the target magnitude for conditioning:
  //   H_s[l] = (exp(t_l a_s) - M_l) / max(1, M_l),
  // so the residual Sum_s p_s H_s[l] is directly the relative violation.
  std::vector<std::vector<double>> H(S, std::vector<double>(L));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t l = 0; l < L; ++l) {
      double w = 1.0 / std::max(1.0, targets[l].second);
      double v = (std::exp(targets[l].first * knots[s]) - targets[l].second) * w;
      if (!std::isfinite(v))
        throw NumericalError("MGF constraint overflow on the knot grid");
      H[s][l] = v;
    }
  }

  // Soft constraints: the targets carry density-estimation noise and need
  // not be exactly log-convex, so an exact match may not exist.  Minimizing
  //   log sum_s exp(lambda . H_s) + (eps2/2) |lambda|^2
  // matches each target up to a relative slack eps2 * lambda_l, keeps the
  // dual bounded (no runaway multipliers collapsing the distribution onto a
  // grid face), and makes the Hessian uniformly well conditioned.
  const double eps2 = cfg.maxent_slack;
  auto penalized = [eps2](const NewtonState& s, const std::vector<double>& lam) {
    double q = 0.0;
    for (double v : lam) q += v * v;
    return s.merit + 0.5 * eps2 * q;
  };
  std::vector<double> lambda(L, 0.0);
  NewtonState st = evaluate_state(H, lambda);
  int iter = 0;
  bool converged = false;
  std::vector<double> grad(L);
  // plateau detection: inconsistent targets make the residual stall well
  // above tolerance; stop burning iterations once progress ceases
  double best_rnorm = st.residual_norm;
  int stalled = 0;
  for (; iter < cfg.newton_max_iter; ++iter) {
    bool ok = true;
    for (std::size_t l = 0; l < L; ++l) {
      grad[l] = st.residual[l] + eps2 * lambda[l];
      if (std::fabs(grad[l]) > cfg.newton_tol) ok = false;
    }
    if (ok) { converged = true; break; }

    // Newton matrix sum_s p_s H_s H_s^T + eps2 I (covariance part of the
    // Hessian; the normalization term cancels against the mean outer product)
    std::vector<std::vector<double>> J(L, std::vector<double>(L, 0.0));
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t m = 0; m <= l; ++m) J[l][m] += st.probs[s] * H[s][l] * H[s][m];
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t m = l + 1; m < L; ++m) J[l][m] = J[m][l];
    for (std::size_t l = 0; l < L; ++l) J[l][l] += eps2;

    std::vector<double> step;
    if (!solve_linear(J, grad, step)) {
      double tr = 0.0;
      for (std::size_t l = 0; l < L; ++l) tr += J[l][l];
      double ridge = 1e-10 * tr / static_cast<double>(L);
      for (std::size_t l = 0; l < L; ++l) J[l][l] += ridge;
      dp.ridged = true;
      if (!solve_linear(J, grad, step))
        throw NumericalError("singular Newton matrix in maxent_solve", errc::no_convergence);
    }

    // backtracking line search on the penalized convex objective; -step is a
    // descent direction, so a short enough step always decreases it
    double slope = 0.0;
    for (std::size_t l = 0; l < L; ++l) slope += grad[l] * step[l];
    double scale = 1.0;
    double merit0 = penalized(st, lambda);
    NewtonState next = st;
    std::vector<double> accepted_lambda;
    for (int half = 0; half < 40; ++half) {
      std::vector<double> trial(L);
      for (std::size_t l = 0; l < L; ++l) trial[l] = lambda[l] - scale * step[l];
      next = evaluate_state(H, trial);
      if (penalized(next, trial) <= merit0 - 1e-4 * scale * slope) {
        accepted_lambda = std::move(trial);
        break;
      }
      scale *= 0.5;
    }
    if (accepted_lambda.empty()) break;  // at numerical precision of the objective
    lambda = std::move(accepted_lambda);
    double step_norm = 0.0;
    for (double d : step) step_norm += scale * scale * d * d;
    st = next;
    if (std::sqrt(step_norm) <= cfg.newton_tol) { converged = true; break; }
    if (st.residual_norm < 0.99 * best_rnorm) {
      best_rnorm = st.residual_norm;
      stalled = 0;
    } else if (++stalled >= 20) {
      break;
    }
  }

  // final convergence check on the penalized gradient
  if (!converged) {
    converged = true;
    for (std::size_t l = 0; l < L; ++l)
      if (std::fabs(st.residual[l] + eps2 * lambda[l]) > cfg.newton_tol) converged = false;
  }

  dp.probs = st.probs;
  dp.multipliers = lambda;
  dp.iterations = iter;
  dp.constraint_residual = 0.0;
  for (std::size_t l = 0; l < L; ++l)
    dp.constraint_residual = std::max(dp.constraint_residual, std::fabs(st.residual[l]));
  // a converged solve with a large relative violation means the targets were
  // too inconsistent for the slack to absorb; report it as infeasible
  dp.feasible = converged && dp.constraint_residual <= std::max(10.0 * cfg.maxent_slack, 10.0 * cfg.newton_tol);
  return dp;
}

double mgf_point_scale(const MgfEvaluator& ev, double z, const std::vector<double>& points) {
  auto [lo, hi] = ev.w_trust_domain(z);
  double c = 1.0;
  for (double t : points) {
    if (t > 0) c = std::min(c, 0.95 * hi / t);
    else if (t < 0) c = std::min(c, 0.95 * lo / t);
  }
  if (!(c > 0)) throw NumericalError("degenerate MGF domain", errc::mgf_domain);
  return c;
}

double PosteriorCdf::cdf_at(double z) {
  auto cached = cache_.find(z);
  if (cached != cache_.end()) return cached->second;

  double c = mgf_point_scale(*ev_, z, cfg_->mgf_points);
  std::vector<std::pair<double, double>> all;
  all.reserve(cfg_->mgf_points.size());
  double m0 = ev_->m0();
  for (double t : cfg_->mgf_points) {
    double tc = c * t;
    all.emplace_back(tc, ev_->mgf_w(z, tc) / m0);
  }
  WMoments m = ev_->mgf_w_moments(z);

  // Solve with all evaluation points; on an infeasible solve drop the
  // outermost pair and retry — the extreme points shift the density argument
  // the farthest and are the least reliable under estimation error.
  double raw = -1.0;
  std::size_t first = 0, last = all.size();
  while (last - first >= 2) {
    std::vector<std::pair<double, double>> targets(all.begin() + first, all.begin() + last);
    DiscretePosterior dp = maxent_solve(build_grid(m, targets, *cfg_), targets, *cfg_);
    if (dp.feasible) {
      // Read P(W <= 0) treating each knot's mass as spread over its cell
      // [a_s - d/2, a_s + d/2); summing whole knots quantizes the CDF at the
      // cell mass (~2% near the mode), which dominates the error budget.
      raw = 0.0;
      double d = dp.knots.size() > 1 ? dp.knots[1] - dp.knots[0] : 1.0;
      for (std::size_t s = 0; s < dp.knots.size(); ++s) {
        double frac = (0.0 - (dp.knots[s] - 0.5 * d)) / d;
        raw += dp.probs[s] * std::clamp(frac, 0.0, 1.0);
      }
      break;
    }
    ++first;
    --last;
  }
  if (raw < 0.0) {
    // no subset of the targets is jointly representable: the density ratio
    // has degenerated for this observation; fall back to the sampling-model
    // pivotal CDF rather than report a meaningless best iterate
    any_infeasible_ = true;
    const Observation& o = ev_->obs();
    raw = t_cdf((z - o.x) / std::sqrt(o.s2), o.k);
  }
  raw = std::clamp(raw, 0.0, 1.0);

  // monotone repair against the query history
  auto it = cache_.lower_bound(z);
  if (it != cache_.end()) raw = std::min(raw, it->second);
  if (it != cache_.begin()) raw = std::max(raw, std::prev(it)->second);
  cache_[z] = raw;
  return raw;
}

double PosteriorCdf::quantile(double target) {
  const Observation& o = ev_->obs();
  double s = std::sqrt(o.s2);
  double halfwidth = cfg_->grid_halfwidth_cw * s * std::sqrt(1.0 + 1.0 / o.k);
  double lo = o.x - halfwidth, hi = o.x + halfwidth;
  // The posterior mass of theta is concentrated well within a few sampling
  // standard deviations of x; a CDF estimate that fails to cross the target
  // inside the bracket has degenerated in that tail.  Use the pivotal
  // t-quantile for that side rather than chase the failure outward.
  if (cdf_at(lo) > target || cdf_at(hi) < target) {
    any_infeasible_ = true;
    return o.x + s * t_quantile(target, o.k);
  }
  while (hi - lo > cfg_->bisect_tol * s) {
    double mid = 0.5 * (lo + hi);
    if (cdf_at(mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> PosteriorCdf::quantile_interval(double alpha) {
  if (!(alpha > 0 && alpha < 1))
    throw ValidationError("alpha must be in (0,1)", errc::bad_config);
  double z_l = quantile(alpha / 2.0);
  double z_u = quantile(1.0 - alpha / 2.0);
  if (z_l > z_u) std::swap(z_l, z_u);
  if (cfg_->interval_guard > 0.0) {
    // Density-estimation error can misplace or overtighten the credible
    // interval; guarantee it keeps at least this fraction of the classical
    // t-interval around x as a floor on frequentist validity.
    const Observation& o = ev_->obs();
    double g = cfg_->interval_guard * std::sqrt(o.s2) * t_quantile(1.0 - alpha / 2.0, o.k);
    z_l = std::min(z_l, o.x - g);
    z_u = std::max(z_u, o.x + g);
  }
  return {z_l, z_u};
}

}  // namespace ebnf
