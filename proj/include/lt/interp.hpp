#pragma once

#include <cmath>

#include "lt/grid.hpp"
#include "lt/linalg.hpp"

namespace lt {

// Periodic tensor-product cubic interpolation (Catmull-Rom, 4 points per
// axis). Globally C^1, which keeps Newton paths smooth; the gradient comes
// from the analytically differentiated interpolant, not from differencing.
class CubicInterpolant {
 public:
  CubicInterpolant() = default;
  explicit CubicInterpolant(const ScalarField& f) : g_(f.grid()), v_(f.values().begin(), f.values().end()) {}

  double value(const Vec& p) const {
    double w[3][4];
    int base[3] = {0, 0, 0};
    weights(p, w, base, nullptr);
    return accumulate(w, base);
  }

  // Value and gradient with respect to the torus coordinates.
  double value_and_gradient(const Vec& p, Vec& grad) const {
    double w[3][4], dw[3][4];
    int base[3] = {0, 0, 0};
    weights(p, w, base, dw);
    const int n = g_.dim();
    for (int a = 0; a < n; ++a) {
      double wa[3][4];
      for (int b = 0; b < n; ++b)
        for (int t = 0; t < 4; ++t) wa[b][t] = (b == a) ? dw[b][t] : w[b][t];
      grad[a] = accumulate(wa, base) / g_.spacing(a);
    }
    return accumulate(w, base);
  }

 private:
  static void cr_weights(double t, double out[4]) {
    const double t2 = t * t, t3 = t2 * t;
    out[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    out[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    out[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    out[3] = 0.5 * (t3 - t2);
  }

  static void cr_dweights(double t, double out[4]) {
    const double t2 = t * t;
    out[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
    out[1] = 0.5 * (9.0 * t2 - 10.0 * t);
    out[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
    out[3] = 0.5 * (3.0 * t2 - 2.0 * t);
  }

  void weights(const Vec& p, double w[3][4], int base[3], double (*dw)[4]) const {
    const int n = g_.dim();
    for (int a = 0; a < n; ++a) {
      const double s = wrap_unit(p[a]) * g_.size(a);
      double fi = std::floor(s);
      double t = s - fi;
      int i = static_cast<int>(fi) % g_.size(a);
      cr_weights(t, w[a]);
      if (dw) cr_dweights(t, dw[a]);
      base[a] = i;
    }
  }

  double accumulate(const double w[3][4], const int base[3]) const {
    const int n = g_.dim();
    double sum = 0.0;
    const int k3 = (n == 3) ? 4 : 1;
    for (int t3 = 0; t3 < k3; ++t3) {
      const int i3 = (n == 3) ? mod(base[2] + t3 - 1, g_.size(2)) : 0;
      const double w3 = (n == 3) ? w[2][t3] : 1.0;
      for (int t2 = 0; t2 < 4; ++t2) {
        const int i2 = mod(base[1] + t2 - 1, g_.size(1));
        const double w23 = w3 * w[1][t2];
        for (int t1 = 0; t1 < 4; ++t1) {
          const int i1 = mod(base[0] + t1 - 1, g_.size(0));
          sum += w23 * w[0][t1] * v_[static_cast<size_t>(g_.index(i1, i2, i3))];
        }
      }
    }
    return sum;
  }

  static int mod(int a, int n) {
    const int r = a % n;
    return r < 0 ? r + n : r;
  }

  PeriodicGrid g_;
  std::vector<double> v_;
};

}  // namespace lt
