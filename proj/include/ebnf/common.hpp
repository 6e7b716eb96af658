#ifndef EBNF_COMMON_HPP
#define EBNF_COMMON_HPP

#include <stdexcept>
#include <string>

namespace ebnf {

// Error codes surfaced by the CLI as "EBNF-E<code>: ...".
// 1xx: input/validation problems, 2xx: numerical failures.
enum class errc : int {
  validation = 100,
  duplicate_id = 101,
  bad_value = 102,
  bad_config = 103,
  parse = 104,
  degenerate = 110,
  numerical = 200,
  mgf_domain = 201,
  no_convergence = 202,
  bracket = 203,
  support = 204,
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const { return code_; }
  int code_int() const { return static_cast<int>(code_); }

 private:
  errc code_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& msg, errc code = errc::validation) : Error(code, msg) {}
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& msg, errc code = errc::numerical) : Error(code, msg) {}
};

// Raised when an MGF is requested outside the interval on which the shifted
// variance argument stays positive.  t_max is the largest |t| still valid for
// the offending one-parameter family, so callers can rescale their t-points.
class DomainError : public NumericalError {
 public:
  DomainError(const std::string& msg, double t_max)
      : NumericalError(msg, errc::mgf_domain), t_max_(t_max) {}
  double max_valid_t() const { return t_max_; }

 private:
  double t_max_;
};

}  // namespace ebnf

#endif  // EBNF_COMMON_HPP
