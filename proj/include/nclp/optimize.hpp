#pragma once

// Barzilai-Borwein gradient descent with a nonmonotone Armijo line search
// over real parameter vectors, plus packing between coefficient families
// and real vectors.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "nclp/algebra.hpp"

namespace nclp {

/// Coefficient family (alpha_1, ..., alpha_n) of k x k matrices.
using Family = std::vector<Matrix>;

namespace detail {

inline RVector pack(const Family& f) {
  Eigen::Index n = 0;
  for (const auto& m : f) n += 2 * m.size();
  RVector v(n);
  Eigen::Index at = 0;
  for (const auto& m : f)
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      v(at++) = m.data()[j].real();
      v(at++) = m.data()[j].imag();
    }
  return v;
}

inline Family unpack(const RVector& v, int n, Eigen::Index rows, Eigen::Index cols) {
  Family f(n, Matrix(rows, cols));
  Eigen::Index at = 0;
  for (auto& m : f)
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      m.data()[j] = cplx(v(at), v(at + 1));
      at += 2;
    }
  return f;
}

inline double family_frobenius(const Family& f) {
  double s = 0.0;
  for (const auto& m : f) s += m.squaredNorm();
  return std::sqrt(s);
}

inline Family scaled(Family f, double s) {
  for (auto& m : f) m *= s;
  return f;
}

/// Embeds a level-k family into level k+1 (top-left corner, zero padding).
inline Family lift(const Family& f, Eigen::Index k_new) {
  Family out;
  out.reserve(f.size());
  for (const auto& m : f) {
    Matrix z = Matrix::Zero(k_new, k_new);
    z.topLeftCorner(m.rows(), m.cols()) = m;
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace detail

struct MinimizeOptions {
  int max_iter = 5000;
  /// Stop when the best value improved by less than ftol (relative) over
  /// the last `window` iterations.
  double ftol = 1e-13;
  int window = 30;
  int nonmonotone_memory = 8;
};

struct MinimizeResult {
  RVector x;
  double value = 0.0;
  int iterations = 0;
  bool stopped_by_callback = false;
};

/// Minimizes f(x, grad*) -> value. `stop(x, fx, g)` may end the run early
/// (e.g. on a certified duality gap). The returned point is the best seen,
/// including the start.
template <class F>
MinimizeResult minimize_bb(
    F&& f, RVector x, const MinimizeOptions& opt,
    const std::function<bool(const RVector&, double, const RVector&)>& stop = {}) {
  RVector g;
  double fx = f(x, &g);
  MinimizeResult best{x, fx, 0, false};
  std::deque<double> recent{fx};
  std::deque<double> history{fx};
  double step = 1.0 / std::max(1e-12, g.norm());

  for (int it = 1; it <= opt.max_iter; ++it) {
    best.iterations = it;
    if (stop && stop(x, fx, g)) {
      best.stopped_by_callback = true;
      break;
    }
    const double gg = g.squaredNorm();
    if (!(gg > 0.0) || !std::isfinite(gg)) break;
    const double ref = *std::max_element(recent.begin(), recent.end());
    double t = step;
    RVector xn, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      xn = x - t * g;
      fn = f(xn, &gn);
      if (std::isfinite(fn) && fn <= ref - 1e-4 * t * gg) {
        accepted = true;
        break;
      }
      t *= 0.25;
    }
    if (!accepted) break;
    const RVector s = xn - x;
    const RVector y = gn - g;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-14, 1e14) : std::min(1e14, 4.0 * t);
    x = std::move(xn);
    g = std::move(gn);
    fx = fn;
    if (fx < best.value) {
      best.value = fx;
      best.x = x;
    }
    recent.push_back(fx);
    if (int(recent.size()) > opt.nonmonotone_memory) recent.pop_front();
    history.push_back(best.value);
    if (int(history.size()) > opt.window) {
      history.pop_front();
      const double old = history.front();
      if (old - best.value <= opt.ftol * std::max(1e-300, std::abs(best.value))) break;
    }
  }
  return best;
}

}  // namespace nclp
