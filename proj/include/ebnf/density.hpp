#ifndef EBNF_DENSITY_HPP
#define EBNF_DENSITY_HPP

#include <string>
#include <vector>

#include "ebnf/core.hpp"

namespace ebnf {

// Silverman rule-of-thumb bandwidth:
//   h = 1.06 * min(sd, IQR/1.349) * n^(-1/5),
// falling back to sd alone when the IQR is zero.  Errors on constant samples.
double silverman_bandwidth(const std::vector<double>& values);

struct Partials {
  double f = 0.0;
  double f_x = 0.0;
  double f_s2 = 0.0;
};

// Product-Gaussian KDE of (x, log s2) with diagonal Silverman bandwidths.
// Densities on the original scale carry the 1/s2 Jacobian:
//   f(x, s2) = f_kde(x, log s2) / s2.
class MarginalDensityModel {
 public:
  MarginalDensityModel() = default;
  MarginalDensityModel(std::vector<double> xs, std::vector<double> log_s2s,
                       double bandwidth_x, double bandwidth_s);

  static MarginalDensityModel fit(const Dataset& data, std::size_t min_n = 10);

  double eval_f(double x, double s2) const;

  // Symmetric finite differences with step e = min(fd_step_cap, s2/2),
  // the same e on both axes.
  Partials eval_partials(double x, double s2, const EngineConfig& cfg) const;

  double bandwidth_x() const { return h_x_; }
  double bandwidth_s() const { return h_s_; }
  std::size_t size() const { return xs_.size(); }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& log_s2s() const { return log_s2s_; }

  std::string to_json() const;
  static MarginalDensityModel from_json(const std::string& text);

 private:
  std::vector<double> xs_;
  std::vector<double> log_s2s_;
  double h_x_ = 0.0;
  double h_s_ = 0.0;
};

// Conditional-on-k density for heterogeneous degrees of freedom:
//   f(x, s2 | k) = f_J(x, log s2, k) / (s2 * f_M(k)),
// with f_J a trivariate product-Gaussian KDE and f_M the univariate KDE of k.
class ConditionalDensityModel {
 public:
  static ConditionalDensityModel fit(const Dataset& data, std::size_t min_n = 10);

  double eval_f(double x, double s2, double k) const;
  Partials eval_partials(double x, double s2, double k, const EngineConfig& cfg) const;

  double bandwidth_x() const { return h_x_; }
  double bandwidth_s() const { return h_s_; }
  double bandwidth_k() const { return h_k_; }
  std::size_t size() const { return xs_.size(); }

  std::string to_json() const;
  static ConditionalDensityModel from_json(const std::string& text);

 private:
  double marginal_k(double k) const;

  std::vector<double> xs_;
  std::vector<double> log_s2s_;
  std::vector<double> ks_;
  double h_x_ = 0.0;
  double h_s_ = 0.0;
  double h_k_ = 0.0;
  double k_min_ = 0.0;
  double k_max_ = 0.0;
};

// Serialized model container: either variant, tagged.  Used by the CLI so
// `fit` and `estimate` can be separate invocations.
struct DensityModel {
  bool conditional = false;
  MarginalDensityModel marginal;
  ConditionalDensityModel cond;

  static DensityModel fit(const Dataset& data, std::size_t min_n = 10);
  double eval_f(double x, double s2, double k) const;
  Partials eval_partials(double x, double s2, double k, const EngineConfig& cfg) const;

  void save(const std::string& path) const;
  static DensityModel load(const std::string& path);
};

}  // namespace ebnf

#endif  // EBNF_DENSITY_HPP
