#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "lt/errors.hpp"
#include "lt/grid.hpp"
#include "lt/linalg.hpp"
#include "lt/util.hpp"

namespace lt {

using DVec = std::vector<double>;
using LinOp = std::function<void(const DVec&, DVec&)>;
using Inner = std::function<double(const DVec&, const DVec&)>;

inline double dot_flat(const DVec& a, const DVec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double a, const DVec& x, DVec& y) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline void scale(DVec& x, double a) {
  for (double& v : x) v *= a;
}

// On an even periodic lattice the centered difference annihilates, besides
// constants, every per-axis alternating (Nyquist) mode. The span of all
// these modes is exactly the functions that are constant on the 2^n parity
// classes of the lattice, which makes the flat-orthogonal projector a
// class-mean subtraction. Kernel computations deflate this subspace; exact
// forms and constants are flat-orthogonal to the alternating part, so true
// harmonic representatives are untouched.
class FlatModeProjector {
 public:
  explicit FlatModeProjector(const PeriodicGrid& g) : g_(g) {
    classes_.resize(static_cast<size_t>(g.num_nodes()));
    counts_.assign(8, 0);
    for (index_t i = 0; i < g.num_nodes(); ++i) {
      int c[3];
      g.coords(i, c);
      const int p = (c[0] & 1) | ((c[1] & 1) << 1) | ((c[2] & 1) << 2);
      classes_[static_cast<size_t>(i)] = static_cast<std::uint8_t>(p);
      ++counts_[static_cast<size_t>(p)];
    }
  }

  // Removes all 2^n flat zero modes (class means). With keep_mean, the
  // global mean is restored, i.e. only the alternating modes are removed.
  void remove_scalar_modes(std::span<double> v, bool keep_mean) const {
    double sums[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (size_t i = 0; i < v.size(); ++i) sums[classes_[i]] += v[i];
    double total = 0.0;
    for (int p = 0; p < 8; ++p) total += sums[p];
    const double global_mean = total / static_cast<double>(v.size());
    double means[8];
    for (int p = 0; p < 8; ++p)
      means[p] = counts_[static_cast<size_t>(p)] > 0
                     ? sums[p] / static_cast<double>(counts_[static_cast<size_t>(p)])
                     : 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      v[i] -= means[classes_[i]];
      if (keep_mean) v[i] += global_mean;
    }
  }

  // Writes the flat-orthogonal projection onto the alternating modes
  // (class-mean part minus global mean) into `out`.
  void alternating_part(std::span<const double> v, std::span<double> out) const {
    double sums[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (size_t i = 0; i < v.size(); ++i) sums[classes_[i]] += v[i];
    double total = 0.0;
    for (int p = 0; p < 8; ++p) total += sums[p];
    const double global_mean = total / static_cast<double>(v.size());
    double means[8];
    for (int p = 0; p < 8; ++p)
      means[p] = counts_[static_cast<size_t>(p)] > 0
                     ? sums[p] / static_cast<double>(counts_[static_cast<size_t>(p)])
                     : 0.0;
    for (size_t i = 0; i < v.size(); ++i) out[i] = means[classes_[i]] - global_mean;
  }

  const PeriodicGrid& grid() const { return g_; }

 private:
  PeriodicGrid g_;
  std::vector<std::uint8_t> classes_;
  std::vector<index_t> counts_;
};

struct IterOutcome {
  bool converged = false;
  int iters = 0;
  double rel_residual = 0.0;
};

// Conjugate gradients for an operator self-adjoint and positive
// (semi-)definite in the given inner product. x holds the initial guess.
inline IterOutcome cg_solve(const LinOp& A, const DVec& b, DVec& x, const Inner& ip,
                            double rel_tol, int max_iter) {
  const size_t n = b.size();
  DVec r(n), p(n), Ap(n);
  A(x, Ap);
  for (size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  p = r;
  const double b_norm = std::sqrt(std::max(ip(b, b), 1e-300));
  double rr = ip(r, r);
  IterOutcome out;
  for (int it = 0; it < max_iter; ++it) {
    if (std::sqrt(rr) <= rel_tol * b_norm) {
      out.converged = true;
      break;
    }
    A(p, Ap);
    const double pAp = ip(p, Ap);
    if (!(pAp > 0.0)) break;  // hit the kernel or lost positivity
    const double alpha = rr / pAp;
    axpy(alpha, p, x);
    axpy(-alpha, Ap, r);
    const double rr_new = ip(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    out.iters = it + 1;
  }
  out.rel_residual = std::sqrt(rr) / b_norm;
  if (!out.converged) out.converged = out.rel_residual <= rel_tol;
  return out;
}

// BiCGStab with the flat inner product (for the nonsymmetric Newton systems).
inline IterOutcome bicgstab_solve(const LinOp& A, const DVec& b, DVec& x, double rel_tol,
                                  int max_iter) {
  const size_t n = b.size();
  DVec r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n);
  A(x, t);
  for (size_t i = 0; i < n; ++i) r[i] = b[i] - t[i];
  r0 = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  const double b_norm = std::sqrt(std::max(dot_flat(b, b), 1e-300));
  IterOutcome out;
  for (int it = 0; it < max_iter; ++it) {
    const double rn = std::sqrt(dot_flat(r, r));
    if (rn <= rel_tol * b_norm) {
      out.converged = true;
      break;
    }
    const double rho_new = dot_flat(r0, r);
    if (std::abs(rho_new) < 1e-280) break;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    A(p, v);
    alpha = rho / dot_flat(r0, v);
    for (size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    A(s, t);
    const double tt = dot_flat(t, t);
    omega = tt > 0.0 ? dot_flat(t, s) / tt : 0.0;
    for (size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i] + omega * s[i];
      r[i] = s[i] - omega * t[i];
    }
    out.iters = it + 1;
    if (omega == 0.0) break;
  }
  out.rel_residual = std::sqrt(dot_flat(r, r)) / b_norm;
  if (!out.converged) out.converged = out.rel_residual <= rel_tol;
  return out;
}

struct EigOptions {
  int block = 4;
  double shift = 1e-6;
  double tol_abs = 1e-9;   // residual target for near-kernel pairs
  double tol_rel = 1e-3;   // residual target relative to the eigenvalue
  int max_outer = 500;
  int max_inner = 400;
  std::uint64_t seed = 0x5eedULL;
};

struct EigResult {
  std::vector<double> eigenvalues;
  std::vector<DVec> vectors;
  std::vector<double> residuals;
  int outer_iters = 0;
  bool converged = false;
  double op_norm_est = 0.0;
};

namespace solver_detail {

inline void orthonormalize(std::vector<DVec>& X, const Inner& ip) {
  for (size_t i = 0; i < X.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (size_t j = 0; j < i; ++j) {
        const double c = ip(X[j], X[i]);
        axpy(-c, X[j], X[i]);
      }
    const double nrm = std::sqrt(ip(X[i], X[i]));
    if (nrm < 1e-150) throw NoConvergenceError("eigensolver block became degenerate");
    scale(X[i], 1.0 / nrm);
  }
}

}  // namespace solver_detail

// Deflated block inverse power iteration with CG inner solves and a
// Rayleigh-Ritz projection each sweep. The inner solves are run inexactly
// (capped iterations); convergence is certified by explicit eigenresiduals,
// so inner accuracy only affects the iteration count.
inline EigResult smallest_eigenpairs(const LinOp& A, const Inner& ip, size_t n,
                                     const EigOptions& opt) {
  EigResult res;
  const int m = opt.block;

  {  // crude operator norm estimate (power iteration)
    Rng rng(opt.seed ^ 0x9e3779b9ULL);
    DVec v(n), Av(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    double nv = std::sqrt(ip(v, v));
    scale(v, 1.0 / nv);
    for (int it = 0; it < 25; ++it) {
      A(v, Av);
      nv = std::sqrt(ip(Av, Av));
      if (nv < 1e-290) break;
      v = Av;
      scale(v, 1.0 / nv);
    }
    res.op_norm_est = nv;
  }

  std::vector<DVec> X(static_cast<size_t>(m));
  Rng rng(opt.seed);
  for (auto& col : X) {
    col.resize(n);
    for (auto& x : col) x = rng.uniform(-1.0, 1.0);
  }
  solver_detail::orthonormalize(X, ip);

  const LinOp A_shift = [&](const DVec& in, DVec& out) {
    A(in, out);
    axpy(opt.shift, in, out);
  };

  std::vector<double> evals(static_cast<size_t>(m), 0.0);
  DVec tmp;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    res.outer_iters = outer + 1;
    std::vector<DVec> Y(static_cast<size_t>(m));
    for (int c = 0; c < m; ++c) {
      Y[static_cast<size_t>(c)].assign(n, 0.0);
      cg_solve(A_shift, X[static_cast<size_t>(c)], Y[static_cast<size_t>(c)], ip, 1e-12,
               opt.max_inner);
    }
    solver_detail::orthonormalize(Y, ip);

    // Rayleigh-Ritz on span(Y)
    std::vector<DVec> AY(static_cast<size_t>(m));
    for (int c = 0; c < m; ++c) {
      AY[static_cast<size_t>(c)].resize(n);
      A(Y[static_cast<size_t>(c)], AY[static_cast<size_t>(c)]);
    }
    std::vector<double> S(static_cast<size_t>(m) * static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double v = ip(Y[static_cast<size_t>(i)], AY[static_cast<size_t>(j)]);
        S[static_cast<size_t>(i) * static_cast<size_t>(m) + static_cast<size_t>(j)] = v;
      }
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const double sym = 0.5 * (S[static_cast<size_t>(i) * m + j] + S[static_cast<size_t>(j) * m + i]);
        S[static_cast<size_t>(i) * m + j] = S[static_cast<size_t>(j) * m + i] = sym;
      }
    std::vector<double> ev, V;
    jacobi_eigh(S, m, ev, &V);
    std::vector<DVec> Xn(static_cast<size_t>(m));
    for (int c = 0; c < m; ++c) {
      Xn[static_cast<size_t>(c)].assign(n, 0.0);
      for (int k = 0; k < m; ++k)
        axpy(V[static_cast<size_t>(k) * m + c], Y[static_cast<size_t>(k)], Xn[static_cast<size_t>(c)]);
    }
    X = std::move(Xn);
    evals = ev;

    // explicit residual certification
    res.residuals.assign(static_cast<size_t>(m), 0.0);
    bool all_ok = true;
    tmp.resize(n);
    for (int c = 0; c < m; ++c) {
      A(X[static_cast<size_t>(c)], tmp);
      axpy(-evals[static_cast<size_t>(c)], X[static_cast<size_t>(c)], tmp);
      const double r = std::sqrt(ip(tmp, tmp));
      res.residuals[static_cast<size_t>(c)] = r;
      if (r > std::max(opt.tol_abs, opt.tol_rel * std::abs(evals[static_cast<size_t>(c)])))
        all_ok = false;
    }
    if (all_ok) {
      res.converged = true;
      break;
    }
  }
  res.eigenvalues = evals;
  res.vectors = std::move(X);
  return res;
}

}  // namespace lt
