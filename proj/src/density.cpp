#include "ebnf/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace ebnf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sample_sd(const std::vector<double>& v) {
  double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

double interquartile_range(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    // R type-7 quantile
    double h = p * (static_cast<double>(v.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace

double silverman_bandwidth(const std::vector<double>& values) {
  if (values.size() < 2)
    throw ValidationError("bandwidth selection needs at least 2 values", errc::degenerate);
  double sd = sample_sd(values);
  if (!(sd > 0))
    throw ValidationError("bandwidth selection on a constant sample", errc::degenerate);
  double iqr = interquartile_range(values);
  double spread = iqr > 0 ? std::min(sd, iqr / 1.349) : sd;
  return 1.06 * spread * std::pow(static_cast<double>(values.size()), -0.2);
}

// ---- MarginalDensityModel --------------------------------------------------

MarginalDensityModel::MarginalDensityModel(std::vector<double> xs, std::vector<double> log_s2s,
                                           double bandwidth_x, double bandwidth_s)
    : xs_(std::move(xs)), log_s2s_(std::move(log_s2s)), h_x_(bandwidth_x), h_s_(bandwidth_s) {
  if (xs_.size() != log_s2s_.size() || xs_.empty())
    throw ValidationError("inconsistent training sample", errc::validation);
  if (!(h_x_ > 0) || !(h_s_ > 0))
    throw ValidationError("bandwidths must be > 0", errc::validation);
}

MarginalDensityModel MarginalDensityModel::fit(const Dataset& data, std::size_t min_n) {
  if (data.size() < min_n)
    throw ValidationError("density fit needs at least " + std::to_string(min_n) + " observations",
                          errc::degenerate);
  std::vector<double> xs, ls;
  xs.reserve(data.size());
  ls.reserve(data.size());
  for (const auto& o : data.observations) {
    xs.push_back(o.x);
    ls.push_back(std::log(o.s2));
  }
  double h_x = silverman_bandwidth(xs);
  double h_s = silverman_bandwidth(ls);
  return MarginalDensityModel(std::move(xs), std::move(ls), h_x, h_s);
}

double MarginalDensityModel::eval_f(double x, double s2) const {
  if (!(s2 > 0)) throw ValidationError("eval_f requires s2 > 0", errc::bad_value);
  double ls = std::log(s2);
  double sum = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    double dx = (x - xs_[i]) / h_x_;
    double dl = (ls - log_s2s_[i]) / h_s_;
    sum += std::exp(-0.5 * (dx * dx + dl * dl));
  }
  double n = static_cast<double>(xs_.size());
  return sum / (n * h_x_ * h_s_ * kTwoPi * s2);
}

Partials MarginalDensityModel::eval_partials(double x, double s2, const EngineConfig& cfg) const {
  if (!(s2 > 0)) throw ValidationError("eval_partials requires s2 > 0", errc::bad_value);
  double e = std::min(cfg.fd_step_cap, s2 / 2.0);
  Partials p;
  p.f = eval_f(x, s2);
  p.f_x = (eval_f(x + e, s2) - eval_f(x - e, s2)) / (2.0 * e);
  p.f_s2 = (eval_f(x, s2 + e) - eval_f(x, s2 - e)) / (2.0 * e);
  return p;
}

std::string MarginalDensityModel::to_json() const {
  nlohmann::json j;
  j["schema"] = "ebnf-density v1";
  j["type"] = "marginal";
  j["h_x"] = h_x_;
  j["h_s"] = h_s_;
  j["x"] = xs_;
  j["log_s2"] = log_s2s_;
  return j.dump();
}

MarginalDensityModel MarginalDensityModel::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "ebnf-density v1" || j.value("type", "") != "marginal")
    throw ValidationError("not a marginal density model blob", errc::parse);
  return MarginalDensityModel(j["x"].get<std::vector<double>>(),
                              j["log_s2"].get<std::vector<double>>(), j["h_x"].get<double>(),
                              j["h_s"].get<double>());
}

// ---- ConditionalDensityModel -----------------------------------------------

ConditionalDensityModel ConditionalDensityModel::fit(const Dataset& data, std::size_t min_n) {
  if (data.size() < min_n)
    throw ValidationError("density fit needs at least " + std::to_string(min_n) + " observations",
                          errc::degenerate);
  ConditionalDensityModel m;
  for (const auto& o : data.observations) {
    m.xs_.push_back(o.x);
    m.log_s2s_.push_back(std::log(o.s2));
    m.ks_.push_back(o.k);
  }
  m.h_x_ = silverman_bandwidth(m.xs_);
  m.h_s_ = silverman_bandwidth(m.log_s2s_);
  auto [lo, hi] = std::minmax_element(m.ks_.begin(), m.ks_.end());
  m.k_min_ = *lo;
  m.k_max_ = *hi;
  // With a single k level the k-kernel cancels from the ratio, so any
  // bandwidth gives the same conditional density; 1 keeps the support
  // window k +- 3 h_k meaningful.
  m.h_k_ = (m.k_min_ == m.k_max_) ? 1.0 : silverman_bandwidth(m.ks_);
  return m;
}

double ConditionalDensityModel::marginal_k(double k) const {
  double sum = 0.0;
  for (double ki : ks_) {
    double d = (k - ki) / h_k_;
    sum += std::exp(-0.5 * d * d);
  }
  double n = static_cast<double>(ks_.size());
  return sum / (n * h_k_ * std::sqrt(kTwoPi));
}

double ConditionalDensityModel::eval_f(double x, double s2, double k) const {
  if (!(s2 > 0)) throw ValidationError("eval_f requires s2 > 0", errc::bad_value);
  if (k < k_min_ - 3.0 * h_k_ || k > k_max_ + 3.0 * h_k_)
    throw NumericalError("query k=" + std::to_string(k) + " outside the supported range",
                         errc::support);
  double fm = marginal_k(k);
  if (fm < 1e-300)
    throw NumericalError("marginal density of k vanishes at k=" + std::to_string(k),
                         errc::support);
  double ls = std::log(s2);
  double sum = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    double dx = (x - xs_[i]) / h_x_;
    double dl = (ls - log_s2s_[i]) / h_s_;
    double dk = (k - ks_[i]) / h_k_;
    sum += std::exp(-0.5 * (dx * dx + dl * dl + dk * dk));
  }
  double n = static_cast<double>(xs_.size());
  double joint = sum / (n * h_x_ * h_s_ * h_k_ * kTwoPi * std::sqrt(kTwoPi) * s2);
  return joint / fm;
}

Partials ConditionalDensityModel::eval_partials(double x, double s2, double k,
                                                const EngineConfig& cfg) const {
  if (!(s2 > 0)) throw ValidationError("eval_partials requires s2 > 0", errc::bad_value);
  double e = std::min(cfg.fd_step_cap, s2 / 2.0);
  Partials p;
  p.f = eval_f(x, s2, k);
  p.f_x = (eval_f(x + e, s2, k) - eval_f(x - e, s2, k)) / (2.0 * e);
  p.f_s2 = (eval_f(x, s2 + e, k) - eval_f(x, s2 - e, k)) / (2.0 * e);
  return p;
}

std::string ConditionalDensityModel::to_json() const {
  nlohmann::json j;
  j["schema"] = "ebnf-density v1";
  j["type"] = "conditional";
  j["h_x"] = h_x_;
  j["h_s"] = h_s_;
  j["h_k"] = h_k_;
  j["x"] = xs_;
  j["log_s2"] = log_s2s_;
  j["k"] = ks_;
  return j.dump();
}

ConditionalDensityModel ConditionalDensityModel::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "ebnf-density v1" || j.value("type", "") != "conditional")
    throw ValidationError("not a conditional density model blob", errc::parse);
  ConditionalDensityModel m;
  m.xs_ = j["x"].get<std::vector<double>>();
  m.log_s2s_ = j["log_s2"].get<std::vector<double>>();
  m.ks_ = j["k"].get<std::vector<double>>();
  m.h_x_ = j["h_x"].get<double>();
  m.h_s_ = j["h_s"].get<double>();
  m.h_k_ = j["h_k"].get<double>();
  if (m.xs_.empty() || m.xs_.size() != m.log_s2s_.size() || m.xs_.size() != m.ks_.size())
    throw ValidationError("inconsistent conditional model blob", errc::parse);
  auto [lo, hi] = std::minmax_element(m.ks_.begin(), m.ks_.end());
  m.k_min_ = *lo;
  m.k_max_ = *hi;
  return m;
}

// ---- DensityModel ----------------------------------------------------------

DensityModel DensityModel::fit(const Dataset& data, std::size_t min_n) {
  DensityModel m;
  m.conditional = !data.homogeneous_k;
  if (m.conditional)
    m.cond = ConditionalDensityModel::fit(data, min_n);
  else
    m.marginal = MarginalDensityModel::fit(data, min_n);
  return m;
}

double DensityModel::eval_f(double x, double s2, double k) const {
  return conditional ? cond.eval_f(x, s2, k) : marginal.eval_f(x, s2);
}

Partials DensityModel::eval_partials(double x, double s2, double k,
                                     const EngineConfig& cfg) const {
  return conditional ? cond.eval_partials(x, s2, k, cfg) : marginal.eval_partials(x, s2, cfg);
}

void DensityModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path, errc::parse);
  out << (conditional ? cond.to_json() : marginal.to_json());
}

DensityModel DensityModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path, errc::parse);
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ValidationError("cannot parse model file " + path, errc::parse);
  DensityModel m;
  m.conditional = j.value("type", "") == "conditional";
  if (m.conditional)
    m.cond = ConditionalDensityModel::from_json(buf.str());
  else
    m.marginal = MarginalDensityModel::from_json(buf.str());
  return m;
}

}  // namespace ebnf
