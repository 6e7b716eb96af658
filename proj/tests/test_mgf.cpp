#include <doctest.h>

#include <cmath>
#include <random>

#include "conjugate_oracle.hpp"
#include "ebnf/mgf.hpp"

using namespace ebnf;

namespace {

MgfEvaluator make_oracle_evaluator(const oracle::Prior& pr, const Observation& obs,
                                   double rho = 1e-3) {
  double k = obs.k;
  DensityFn d = [pr, k](double x, double s2) { return oracle::marginal_f(pr, x, s2, k); };
  return MgfEvaluator(obs, d, rho);
}

}  // namespace

TEST_CASE("all MGFs equal one at t = 0") {
  oracle::Prior pr;
  Observation obs{"u", 0.7, 1.3, 10.0};
  MgfEvaluator ev = make_oracle_evaluator(pr, obs);
  CHECK(ev.mgf_u(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev.mgf_v(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev.mgf_uv(0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev.mgf_w(2.5, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("density-ratio MGFs match the conjugate closed forms") {
  oracle::Prior pr{0.5, 2.0, 4.0, 3.0};
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> ux(-2, 2), us(0.4, 2.5), ut(-0.25, 0.25);
  for (int rep = 0; rep < 50; ++rep) {
    double k = 5.0 + static_cast<double>(gen() % 20);
    Observation obs{"u", ux(gen), us(gen), k};
    oracle::Posterior po = oracle::posterior(pr, obs.x, obs.s2, obs.k);
    MgfEvaluator ev = make_oracle_evaluator(pr, obs);
    double t = ut(gen);
    if (t == 0.0) t = 0.1;
    CHECK(ev.mgf_u(t) == doctest::Approx(oracle::mgf_u(po, t)).epsilon(1e-9));
    CHECK(ev.mgf_v(t) == doctest::Approx(oracle::mgf_v(po, t)).epsilon(1e-9));
    CHECK(ev.mgf_uv(t, -t / 2) ==
          doctest::Approx(oracle::mgf_uv(po, t, -t / 2)).epsilon(1e-9));
    double z = ux(gen);
    CHECK(ev.mgf_w(z, t) == doctest::Approx(oracle::mgf_w(po, z, t)).epsilon(1e-9));
  }
}

TEST_CASE("reduction identities between the MGF families") {
  oracle::Prior pr;
  Observation obs{"u", -0.8, 0.9, 12.0};
  MgfEvaluator ev = make_oracle_evaluator(pr, obs);
  for (double t : {-0.2, -0.05, 0.05, 0.3}) {
    CHECK(ev.mgf_uv(t, 0.0) == doctest::Approx(ev.mgf_u(t)).epsilon(1e-12));
    CHECK(ev.mgf_uv(0.0, t) == doctest::Approx(ev.mgf_v(t)).epsilon(1e-12));
    for (double z : {-1.5, 0.0, 2.0})
      CHECK(ev.mgf_w(z, t) == doctest::Approx(ev.mgf_uv(t, -z * t)).epsilon(1e-12));
  }
}

TEST_CASE("domain guards throw with a usable bound") {
  oracle::Prior pr;
  Observation obs{"u", 1.0, 0.8, 8.0};  // k s2 = 6.4
  MgfEvaluator ev = make_oracle_evaluator(pr, obs);

  // V family: s2 - 2t/k > 0 requires t < k s2 / 2 = 3.2
  CHECK_NOTHROW(ev.mgf_v(3.1));
  CHECK_THROWS_AS(ev.mgf_v(3.3), DomainError);
  try {
    ev.mgf_v(10.0);
  } catch (const DomainError& e) {
    CHECK(e.max_valid_t() == doctest::Approx(3.2).epsilon(1e-9));
  }

  // U family: 2tx + t^2 < k s2, i.e. t in (-1 - sqrt(1+6.4), -1 + sqrt(1+6.4))
  double hi = -obs.x + std::sqrt(obs.x * obs.x + obs.k * obs.s2);
  CHECK_NOTHROW(ev.mgf_u(hi * 0.999));
  CHECK_THROWS_AS(ev.mgf_u(hi * 1.001), DomainError);
}

TEST_CASE("w_domain brackets the valid interval exactly") {
  oracle::Prior pr;
  Observation obs{"u", 0.4, 1.7, 9.0};
  MgfEvaluator ev = make_oracle_evaluator(pr, obs);
  for (double z : {-2.0, 0.0, 0.4, 3.0}) {
    auto [lo, hi] = ev.w_domain(z);
    CHECK(lo < 0.0);
    CHECK(hi > 0.0);
    // endpoints solve t^2 + 2(x - z) t - k s2 = 0
    double b = obs.x - z;
    for (double t : {lo, hi})
      CHECK(t * t + 2 * b * t - obs.k * obs.s2 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_NOTHROW(ev.mgf_w(z, 0.999 * hi));
    CHECK_THROWS_AS(ev.mgf_w(z, 1.001 * hi), DomainError);
    CHECK_NOTHROW(ev.mgf_w(z, 0.999 * lo));
    CHECK_THROWS_AS(ev.mgf_w(z, 1.001 * lo), DomainError);
  }
}

TEST_CASE("W moments match the conjugate closed forms") {
  oracle::Prior pr{-0.3, 1.5, 5.0, 4.0};
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> ux(-1.5, 1.5), us(0.5, 2.0), uz(-2, 2);
  for (int rep = 0; rep < 20; ++rep) {
    Observation obs{"u", ux(gen), us(gen), 10.0};
    oracle::Posterior po = oracle::posterior(pr, obs.x, obs.s2, obs.k);
    MgfEvaluator ev = make_oracle_evaluator(pr, obs);
    double z = uz(gen);
    // W(z) = lambda (theta - z) with lambda ~ Ga(a_n, b_n), theta | lambda
    // normal: E W = (a_n/b_n)(mu_n - z), Var W = a_n/(b_n kappa_n)
    //   + (mu_n - z)^2 a_n / b_n^2.
    double m = (po.a_n / po.b_n) * (po.mu_n - z);
    double v = po.a_n / (po.b_n * po.kappa_n) +
               (po.mu_n - z) * (po.mu_n - z) * po.a_n / (po.b_n * po.b_n);
    WMoments wm = ev.mgf_w_moments(z);
    CHECK(wm.mean == doctest::Approx(m).epsilon(1e-4));
    // The spread is measured as the curvature of log M over the finite
    // symmetric step the moment constraints probe, floored at a quarter of
    // the sampling-model variance; reproduce both from the closed forms.
    auto [wlo, whi] = ev.w_domain(z);
    double hv = std::min(0.3, std::min(-wlo, whi) / 2.0);
    double vh = (std::log(oracle::mgf_uv(po, hv, -z * hv)) +
                 std::log(oracle::mgf_uv(po, -hv, z * hv))) /
                (hv * hv);
    double dz = obs.x - z;
    double vfloor = 0.25 * (1.0 / obs.s2 + 2.0 * dz * dz / (obs.k * obs.s2 * obs.s2));
    CHECK(wm.variance == doctest::Approx(std::max(vh, vfloor)).epsilon(1e-6));
    CHECK(wm.variance_floored == (vh < vfloor));
    // and it stays a usable proxy for the exact variance
    CHECK(wm.variance == doctest::Approx(v).epsilon(0.5));
  }
}

TEST_CASE("log M_W is convex on a genuine density") {
  oracle::Prior pr;
  Observation obs{"u", 0.2, 1.0, 10.0};
  MgfEvaluator ev = make_oracle_evaluator(pr, obs);
  for (double h : {0.05, 0.1, 0.2})
    CHECK(ev.mgf_w(0.5, h) * ev.mgf_w(0.5, -h) >= 1.0 - 1e-12);
}

TEST_CASE("variance floor fires on the degenerate flat family") {
  // d(x, s2) = s2^(k/2 - 1) cancels the MGF prefactor exactly, so every
  // M is identically 1 and the differenced variance collapses to zero.
  double k = 10.0;
  Observation obs{"u", 0.5, 1.2, k};
  DensityFn d = [k](double, double s2) { return std::pow(s2, k / 2.0 - 1.0); };
  MgfEvaluator ev(obs, d, 1e-3);
  CHECK(ev.mgf_w(0.3, 0.1) == doctest::Approx(1.0).epsilon(1e-12));
  WMoments wm = ev.mgf_w_moments(0.3);
  CHECK(wm.variance_floored);
  CHECK(wm.variance > 0.0);
}

TEST_CASE("denominator tempering kicks in for tail observations") {
  Observation obs{"u", 0.0, 1.0, 10.0};
  DensityFn tiny = [](double, double) { return 1e-12; };
  MgfEvaluator ev(obs, tiny, 1e-3);
  CHECK(ev.f0() == 1e-3);
  DensityFn big = [](double, double) { return 0.5; };
  MgfEvaluator ev2(obs, big, 1e-3);
  CHECK(ev2.f0() == 0.5);
}
