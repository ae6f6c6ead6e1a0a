#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lt/errors.hpp"
#include "lt/linalg.hpp"
#include "lt/parallel.hpp"
#include "lt/util.hpp"

namespace lt {

using index_t = std::int64_t;

// Minimal periodic representative of y - x on the unit circle, in (-1/2, 1/2].
// The half-period tie is broken toward +1/2.
inline double torus_displacement(double x, double y) {
  double d = y - x;
  d -= std::floor(d + 0.5);  // now in [-1/2, 1/2)
  if (d == -0.5) d = 0.5;
  return d;
}

inline Vec torus_displacement(const Vec& x, const Vec& y, int dim) {
  Vec d;
  for (int a = 0; a < dim; ++a) d[a] = torus_displacement(x[a], y[a]);
  return d;
}

inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r -= 1.0;  // guards against floor rounding at the seam
  return r;
}

// Uniform lattice on the flat torus T^n, n in {2,3}, side length 1 per axis.
// Node counts must be even and >= 8 so that centered differences and the
// cut-locus windows align with the half-period structure.
class PeriodicGrid {
 public:
  PeriodicGrid() = default;

  PeriodicGrid(int dim, std::array<int, 3> sizes) : dim_(dim), sizes_(sizes) {
    if (dim != 2 && dim != 3) throw ConfigError("grid dim must be 2 or 3");
    nodes_ = 1;
    for (int a = 0; a < dim; ++a) {
      if (sizes_[static_cast<size_t>(a)] < 8 || sizes_[static_cast<size_t>(a)] % 2 != 0)
        throw ConfigError("grid sizes must be even and >= 8");
      h_[static_cast<size_t>(a)] = 1.0 / sizes_[static_cast<size_t>(a)];
      nodes_ *= sizes_[static_cast<size_t>(a)];
    }
    for (int a = dim; a < 3; ++a) {
      sizes_[static_cast<size_t>(a)] = 1;
      h_[static_cast<size_t>(a)] = 0.0;
    }
  }

  static PeriodicGrid cube(int dim, int n) {
    return PeriodicGrid(dim, {n, n, n});
  }

  int dim() const { return dim_; }
  int size(int a) const { return sizes_[static_cast<size_t>(a)]; }
  double spacing(int a) const { return h_[static_cast<size_t>(a)]; }
  index_t num_nodes() const { return nodes_; }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= h_[static_cast<size_t>(a)];
    return v;
  }

  // Flat index; axis 1 fastest (matches the dump formats).
  index_t index(int i1, int i2, int i3 = 0) const {
    return i1 + static_cast<index_t>(sizes_[0]) * (i2 + static_cast<index_t>(sizes_[1]) * i3);
  }

  void coords(index_t idx, int out[3]) const {
    out[0] = static_cast<int>(idx % sizes_[0]);
    idx /= sizes_[0];
    out[1] = static_cast<int>(idx % sizes_[1]);
    out[2] = static_cast<int>(idx / sizes_[1]);
  }

  Vec position(index_t idx) const {
    int c[3];
    coords(idx, c);
    Vec x;
    for (int a = 0; a < dim_; ++a) x[a] = c[a] * h_[static_cast<size_t>(a)];
    return x;
  }

  // Neighbor along axis `a`, offset +/-1 or any step, with periodic wrap.
  index_t neighbor(index_t idx, int a, int step) const {
    int c[3];
    coords(idx, c);
    const int n = sizes_[static_cast<size_t>(a)];
    c[a] = (c[a] + step) % n;
    if (c[a] < 0) c[a] += n;
    return index(c[0], c[1], c[2]);
  }

  bool operator==(const PeriodicGrid& o) const {
    return dim_ == o.dim_ && sizes_ == o.sizes_;
  }
  bool operator!=(const PeriodicGrid& o) const { return !(*this == o); }

 private:
  int dim_ = 0;
  std::array<int, 3> sizes_{1, 1, 1};
  std::array<double, 3> h_{0.0, 0.0, 0.0};
  index_t nodes_ = 0;
};

inline void check_same_grid(const PeriodicGrid& a, const PeriodicGrid& b) {
  if (a != b) throw ConfigError("fields live on different grids");
}

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ConfigError(std::string(what) + ": non-finite value");
}

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const PeriodicGrid& g, double fill = 0.0)
      : g_(g), v_(static_cast<size_t>(g.num_nodes()), fill) {}

  // Samples fn on the lattice. With check_periodic set, fn is probed across
  // the period on each axis and rejected if it fails to wrap.
  static ScalarField sample(const PeriodicGrid& g,
                            const std::function<double(const Vec&)>& fn,
                            bool check_periodic = true) {
    ScalarField f(g);
    if (check_periodic) {
      for (int a = 0; a < g.dim(); ++a) {
        for (int probe = 0; probe < 3; ++probe) {
          Vec x;
          for (int b = 0; b < g.dim(); ++b) x[b] = 0.17 + 0.23 * probe + 0.11 * b;
          Vec xs = x;
          xs[a] += 1.0;
          const double f0 = fn(x), f1 = fn(xs);
          if (std::abs(f1 - f0) > 1e-9 * (1.0 + std::abs(f0)))
            throw ConfigError("sampler is not 1-periodic along axis " + std::to_string(a + 1));
        }
      }
    }
    for (index_t i = 0; i < g.num_nodes(); ++i) f.v_[static_cast<size_t>(i)] = fn(g.position(i));
    check_finite(f.v_, "ScalarField");
    return f;
  }

  static ScalarField from_values(const PeriodicGrid& g, std::vector<double> values) {
    if (static_cast<index_t>(values.size()) != g.num_nodes())
      throw ConfigError("value count does not match grid");
    check_finite(values, "ScalarField");
    ScalarField f(g);
    f.v_ = std::move(values);
    return f;
  }

  const PeriodicGrid& grid() const { return g_; }
  double& operator[](index_t i) { return v_[static_cast<size_t>(i)]; }
  double operator[](index_t i) const { return v_[static_cast<size_t>(i)]; }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

 private:
  PeriodicGrid g_;
  std::vector<double> v_;
};

// 1-form: n covariant components per node, stored component-major.
class OneFormField {
 public:
  OneFormField() = default;
  explicit OneFormField(const PeriodicGrid& g)
      : g_(g), v_(static_cast<size_t>(g.num_nodes()) * g.dim(), 0.0) {}

  static OneFormField sample(const PeriodicGrid& g,
                             const std::function<Vec(const Vec&)>& fn) {
    OneFormField f(g);
    for (index_t i = 0; i < g.num_nodes(); ++i) {
      const Vec x = g.position(i);
      const Vec val = fn(x);
      for (int c = 0; c < g.dim(); ++c) f.at(c, i) = val[c];
    }
    check_finite(f.v_, "OneFormField");
    return f;
  }

  const PeriodicGrid& grid() const { return g_; }
  double& at(int comp, index_t i) {
    return v_[static_cast<size_t>(comp) * static_cast<size_t>(g_.num_nodes()) +
              static_cast<size_t>(i)];
  }
  double at(int comp, index_t i) const {
    return v_[static_cast<size_t>(comp) * static_cast<size_t>(g_.num_nodes()) +
              static_cast<size_t>(i)];
  }
  std::span<double> component(int c) {
    return {v_.data() + static_cast<size_t>(c) * static_cast<size_t>(g_.num_nodes()),
            static_cast<size_t>(g_.num_nodes())};
  }
  std::span<const double> component(int c) const {
    return {v_.data() + static_cast<size_t>(c) * static_cast<size_t>(g_.num_nodes()),
            static_cast<size_t>(g_.num_nodes())};
  }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

 private:
  PeriodicGrid g_;
  std::vector<double> v_;
};

// 2-form: one component per ordered pair a<b (1 for n=2, 3 for n=3).
class TwoFormField {
 public:
  TwoFormField() = default;
  explicit TwoFormField(const PeriodicGrid& g)
      : g_(g),
        ncomp_(g.dim() * (g.dim() - 1) / 2),
        v_(static_cast<size_t>(g.num_nodes()) * static_cast<size_t>(ncomp_), 0.0) {}

  static int pair_index(int a, int b, int dim) {
    // (0,1)->0, (0,2)->1, (1,2)->2 for dim 3; (0,1)->0 for dim 2
    return a * (2 * dim - a - 3) / 2 + b - 1;
  }

  const PeriodicGrid& grid() const { return g_; }
  int num_components() const { return ncomp_; }
  double& at(int pair, index_t i) {
    return v_[static_cast<size_t>(pair) * static_cast<size_t>(g_.num_nodes()) +
              static_cast<size_t>(i)];
  }
  double at(int pair, index_t i) const {
    return v_[static_cast<size_t>(pair) * static_cast<size_t>(g_.num_nodes()) +
              static_cast<size_t>(i)];
  }
  std::span<double> component(int p) {
    return {v_.data() + static_cast<size_t>(p) * static_cast<size_t>(g_.num_nodes()),
            static_cast<size_t>(g_.num_nodes())};
  }
  std::span<const double> component(int p) const {
    return {v_.data() + static_cast<size_t>(p) * static_cast<size_t>(g_.num_nodes()),
            static_cast<size_t>(g_.num_nodes())};
  }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

 private:
  PeriodicGrid g_;
  int ncomp_ = 0;
  std::vector<double> v_;
};

// Centered difference along one axis: (f(x+h e_a) - f(x-h e_a)) / (2 h_a).
inline void centered_diff(const PeriodicGrid& g, std::span<const double> in,
                          std::span<double> out, int axis) {
  const double scale = 1.0 / (2.0 * g.spacing(axis));
  // Neighbor indices along an axis follow a fixed stride pattern; walk lines.
  parallel_for(g.num_nodes(), [&](index_t i) {
    const index_t ip = g.neighbor(i, axis, +1);
    const index_t im = g.neighbor(i, axis, -1);
    out[static_cast<size_t>(i)] =
        (in[static_cast<size_t>(ip)] - in[static_cast<size_t>(im)]) * scale;
  });
}

inline OneFormField d0(const ScalarField& u) {
  const PeriodicGrid& g = u.grid();
  OneFormField out(g);
  for (int a = 0; a < g.dim(); ++a) centered_diff(g, u.values(), out.component(a), a);
  return out;
}

inline TwoFormField d1(const OneFormField& eta) {
  const PeriodicGrid& g = eta.grid();
  TwoFormField out(g);
  std::vector<double> tmp(static_cast<size_t>(g.num_nodes()));
  for (int a = 0; a < g.dim(); ++a) {
    for (int b = a + 1; b < g.dim(); ++b) {
      const int p = TwoFormField::pair_index(a, b, g.dim());
      centered_diff(g, eta.component(b), out.component(p), a);
      centered_diff(g, eta.component(a), tmp, b);
      auto o = out.component(p);
      for (index_t i = 0; i < g.num_nodes(); ++i)
        o[static_cast<size_t>(i)] -= tmp[static_cast<size_t>(i)];
    }
  }
  return out;
}

// Scaled lattice sum (trapezoid on the periodic grid), compensated, fixed order.
inline double integrate(const ScalarField& f, const ScalarField& weight) {
  check_same_grid(f.grid(), weight.grid());
  KahanSum s;
  const index_t n = f.grid().num_nodes();
  for (index_t i = 0; i < n; ++i) s.add(f[i] * weight[i]);
  return s.value() * f.grid().cell_volume();
}

inline double integrate(const ScalarField& f) {
  KahanSum s;
  for (index_t i = 0; i < f.grid().num_nodes(); ++i) s.add(f[i]);
  return s.value() * f.grid().cell_volume();
}

inline double mean(const ScalarField& f) { return integrate(f); }

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double l2_norm(const ScalarField& f) {
  KahanSum s;
  for (index_t i = 0; i < f.grid().num_nodes(); ++i) s.add(f[i] * f[i]);
  return std::sqrt(s.value() * f.grid().cell_volume());
}

}  // namespace lt
