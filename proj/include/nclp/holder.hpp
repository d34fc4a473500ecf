#pragma once

// Hoelder inequality ||ab||_1 <= ||a||_p ||b||_p' with classification of
// the equality case:
//   1 < p < inf : (b b^*)^{p'/2} = C (a^* a)^{p/2}
//   p = 1       : q b b^* q = ||b||^2 q,    q = supp(a)
//   p = inf     : Q a^* a Q = ||a||^2 Q,    Q = supp(b^*)

#include <cmath>
#include <optional>

#include "nclp/algebra.hpp"

namespace nclp {

enum class HolderCase { interior, p_one, p_infinity };

inline const char* to_string(HolderCase c) {
  switch (c) {
    case HolderCase::interior: return "interior";
    case HolderCase::p_one: return "p_one";
    case HolderCase::p_infinity: return "p_infinity";
  }
  return "?";
}

struct HolderReport {
  double p = 0.0;
  double p_conj = 0.0;
  double lhs = 0.0;  ///< ||ab||_1
  double rhs = 0.0;  ///< ||a||_p ||b||_p'
  double gap = 0.0;  ///< rhs - lhs
  bool equality = false;
  HolderCase which = HolderCase::interior;
  /// Fitted constant C (interior case only, when equality holds).
  std::optional<double> constant;
  /// Relative residual of the structural identity for the applicable case
  /// (only meaningful when equality holds).
  double residual = 0.0;
  /// a = 0 or b = 0: equality holds trivially and C is undefined.
  bool trivial = false;
};

inline HolderReport holder_check(const TracialAlgebra& alg, const Op& a, const Op& b, double p,
                                 double eq_tol = 1e-9) {
  if (std::isnan(p) || p < 1.0) throw DomainError("holder_check needs p in [1, inf]");
  check_shape(alg, a);
  check_shape(alg, b);
  HolderReport rep;
  rep.p = p;
  rep.p_conj = conjugate_exponent(p);
  rep.which = p == 1.0 ? HolderCase::p_one : std::isinf(p) ? HolderCase::p_infinity : HolderCase::interior;
  rep.lhs = schatten_norm(alg, a * b, 1.0);
  rep.rhs = schatten_norm(alg, a, p) * schatten_norm(alg, b, rep.p_conj);
  rep.gap = rep.rhs - rep.lhs;

  if (a.max_abs() == 0.0 || b.max_abs() == 0.0) {
    rep.trivial = true;
    rep.equality = true;
    return rep;
  }
  rep.equality = std::abs(rep.lhs - rep.rhs) <= eq_tol * rep.rhs;
  if (!rep.equality) return rep;

  switch (rep.which) {
    case HolderCase::interior: {
      // M1 = (bb^*)^{p'/2}, M2 = (a^*a)^{p/2}, C = tau(M1 M2) / tau(M2^2).
      const Op m1 = power_on_support(alg, b * b.adjoint(), rep.p_conj / 2.0);
      const Op m2 = power_on_support(alg, a.adjoint() * a, p / 2.0);
      const double c = trace(alg, m1 * m2).real() / trace(alg, m2 * m2).real();
      rep.constant = c;
      rep.residual = operator_norm(alg, m1 - c * m2) / operator_norm(alg, m1);
      break;
    }
    case HolderCase::p_one: {
      const Op q = support(alg, a);
      const double bn = operator_norm(alg, b);
      rep.residual = operator_norm(alg, q * b * b.adjoint() * q - (bn * bn) * q) / (bn * bn);
      break;
    }
    case HolderCase::p_infinity: {
      const Op bq = support(alg, b.adjoint());
      const double an = operator_norm(alg, a);
      rep.residual = operator_norm(alg, bq * a.adjoint() * a * bq - (an * an) * bq) / (an * an);
      break;
    }
  }
  return rep;
}

}  // namespace nclp
