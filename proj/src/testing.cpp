#include "ebnf/testing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ebnf {

namespace {

// Continued fraction for the regularized incomplete beta (Numerical Recipes
// style modified Lentz).
double betacf(double a, double b, double x) {
  const double FPMIN = 1e-30, EPS = 1e-14;
  const int MAXIT = 500;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < FPMIN) d = FPMIN;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= MAXIT; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < FPMIN) d = FPMIN;
    c = 1.0 + aa / c;
    if (std::fabs(c) < FPMIN) c = FPMIN;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < FPMIN) d = FPMIN;
    c = 1.0 + aa / c;
    if (std::fabs(c) < FPMIN) c = FPMIN;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < EPS) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge");
}

double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double lnfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                   b * std::log1p(-x);
  double front = std::exp(lnfront);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double t_cdf(double t, double k) {
  if (!(k > 0)) throw ValidationError("t_cdf requires k > 0", errc::bad_value);
  if (t == 0.0) return 0.5;
  double ib = incbeta(k / 2.0, 0.5, k / (k + t * t));
  return t > 0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

double t_quantile(double p, double k) {
  if (!(p > 0 && p < 1)) throw ValidationError("t_quantile requires p in (0,1)", errc::bad_value);
  double lo = -1.0, hi = 1.0;
  while (t_cdf(lo, k) > p) lo *= 2.0;
  while (t_cdf(hi, k) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, std::fabs(hi)); ++i) {
    double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, k) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double posterior_null_prob(PosteriorCdf& pc, double delta) {
  if (delta < 0) throw ValidationError("delta must be >= 0", errc::bad_config);
  double upper = pc.cdf_at(delta);
  double lower = pc.cdf_at(-delta);
  return std::clamp(upper - lower, 0.0, 1.0);
}

std::set<std::size_t> fdr_reject(const std::vector<double>& pns, double alpha) {
  for (double p : pns)
    if (!(p >= 0 && p <= 1))
      throw ValidationError("posterior null probabilities must be in [0,1]", errc::bad_value);
  std::vector<std::size_t> order(pns.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pns[a] < pns[b]; });
  double running = 0.0;
  std::size_t cut = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    running += pns[order[j]];
    if (running / static_cast<double>(j + 1) <= alpha) cut = j + 1;
  }
  return {order.begin(), order.begin() + cut};
}

double ttest_pvalue(const Observation& obs, double delta) {
  if (!(obs.s2 > 0) || !(obs.k >= 1))
    throw ValidationError("ttest_pvalue requires s > 0 and k >= 1", errc::bad_value);
  double stat = (std::fabs(obs.x) - delta) / std::sqrt(obs.s2);
  double p = 2.0 * (1.0 - t_cdf(stat, obs.k));
  return std::clamp(p, 0.0, 1.0);
}

std::set<std::size_t> bh_reject(const std::vector<double>& pvalues, double alpha) {
  for (double p : pvalues)
    if (!(p >= 0 && p <= 1))
      throw ValidationError("p-values must be in [0,1]", errc::bad_value);
  std::size_t n = pvalues.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::size_t cut = 0;
  for (std::size_t j = 0; j < n; ++j)
    if (pvalues[order[j]] <= static_cast<double>(j + 1) * alpha / static_cast<double>(n))
      cut = j + 1;
  return {order.begin(), order.begin() + cut};
}

void write_testing_csv(const std::vector<TestResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path, errc::parse);
  out << "# ebnf-schema v1\n";
  out << "id,pn,p_value,rejected_nf,rejected_bh\n";
  out.precision(17);
  for (const auto& r : results)
    out << csv_escape(r.id) << ',' << r.pn << ',' << r.p_value << ',' << (r.rejected_nf ? 1 : 0)
        << ',' << (r.rejected_bh ? 1 : 0) << '\n';
}

}  // namespace ebnf
