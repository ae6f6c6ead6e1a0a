#pragma once

#include <cmath>
#include <vector>

#include "lt/errors.hpp"
#include "lt/grid.hpp"
#include "lt/linalg.hpp"
#include "lt/solver.hpp"
#include "lt/transport_state.hpp"

namespace lt {

// Per-node SPD metric with cached inverse and volume density.
class MetricField {
 public:
  MetricField() = default;

  static MetricField flat(const PeriodicGrid& g) {
    MetricField m;
    m.init(g, [&](index_t, Mat& out) { out = identity(g.dim()); });
    return m;
  }

  static MetricField conformal(const PeriodicGrid& g, const ScalarField& lambda) {
    check_same_grid(g, lambda.grid());
    MetricField m;
    m.init(g, [&](index_t i, Mat& out) {
      out = Mat{};
      for (int a = 0; a < g.dim(); ++a) out(a, a) = lambda[i];
    });
    return m;
  }

  static MetricField from_blocks(const PeriodicGrid& g, const std::vector<double>& blocks) {
    MetricField m;
    const int n = g.dim();
    m.init(g, [&](index_t i, Mat& out) {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          out(a, b) = blocks[static_cast<size_t>(i) * static_cast<size_t>(n * n) +
                             static_cast<size_t>(a * n + b)];
    });
    return m;
  }

  // The state metric g = lam * w (defined for n >= 3).
  static MetricField from_state(const TransportState& st) {
    if (st.dim() < 3) throw DimensionError("state metric requires n >= 3");
    return from_blocks(st.grid, st.g);
  }

  const PeriodicGrid& grid() const { return g_; }

  Mat metric_at(index_t i) const { return load(met_, i); }
  Mat inverse_at(index_t i) const { return load(met_inv_, i); }
  double sqrt_det(index_t i) const { return sqrt_det_[static_cast<size_t>(i)]; }

 private:
  template <typename Fill>
  void init(const PeriodicGrid& g, Fill&& fill) {
    g_ = g;
    const int n = g.dim();
    const index_t N = g.num_nodes();
    met_.resize(static_cast<size_t>(N) * static_cast<size_t>(n * n));
    met_inv_.resize(met_.size());
    sqrt_det_.resize(static_cast<size_t>(N));
    for (index_t i = 0; i < N; ++i) {
      Mat m;
      fill(i, m);
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
          if (std::abs(m(a, b) - m(b, a)) > 1e-12 * (1.0 + std::abs(m(a, b))))
            throw ConfigError("metric is not symmetric");
      const double mineig = min_sym_eigenvalue(m, n);
      if (mineig < 1e-8)
        throw ConfigError("metric eigenvalue " + format_double(mineig) + " below 1e-8");
      const double d = det(m, n);
      const Mat mi = inverse(m, n, d);
      const size_t base = static_cast<size_t>(i) * static_cast<size_t>(n * n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          met_[base + static_cast<size_t>(a * n + b)] = m(a, b);
          met_inv_[base + static_cast<size_t>(a * n + b)] = mi(a, b);
        }
      sqrt_det_[static_cast<size_t>(i)] = std::sqrt(d);
    }
  }

  Mat load(const std::vector<double>& v, index_t i) const {
    const int n = g_.dim();
    Mat m;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        m(a, b) = v[static_cast<size_t>(i) * static_cast<size_t>(n * n) +
                    static_cast<size_t>(a * n + b)];
    return m;
  }

  PeriodicGrid g_;
  std::vector<double> met_, met_inv_;
  std::vector<double> sqrt_det_;
};

// Weighted L^2 pairings. k = 0 uses no index raising, k = 1 uses g^{ij},
// k = 2 uses the antisymmetrized double raising over ordered pairs.
inline double inner_product_0(const MetricField& m, const ScalarField& a, const ScalarField& b) {
  check_same_grid(m.grid(), a.grid());
  check_same_grid(a.grid(), b.grid());
  KahanSum s;
  for (index_t i = 0; i < a.grid().num_nodes(); ++i) s.add(a[i] * b[i] * m.sqrt_det(i));
  return s.value() * a.grid().cell_volume();
}

inline double inner_product_1(const MetricField& m, const OneFormField& a, const OneFormField& b) {
  check_same_grid(m.grid(), a.grid());
  check_same_grid(a.grid(), b.grid());
  const int n = a.grid().dim();
  KahanSum s;
  for (index_t i = 0; i < a.grid().num_nodes(); ++i) {
    const Mat gi = m.inverse_at(i);
    double acc = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) acc += gi(p, q) * a.at(p, i) * b.at(q, i);
    s.add(acc * m.sqrt_det(i));
  }
  return s.value() * a.grid().cell_volume();
}

inline double inner_product_2(const MetricField& m, const TwoFormField& a, const TwoFormField& b) {
  check_same_grid(m.grid(), a.grid());
  check_same_grid(a.grid(), b.grid());
  const int n = a.grid().dim();
  KahanSum s;
  for (index_t i = 0; i < a.grid().num_nodes(); ++i) {
    const Mat gi = m.inverse_at(i);
    double acc = 0.0;
    for (int ai = 0; ai < n; ++ai)
      for (int aj = ai + 1; aj < n; ++aj)
        for (int bi = 0; bi < n; ++bi)
          for (int bj = bi + 1; bj < n; ++bj) {
            const double coeff = gi(ai, bi) * gi(aj, bj) - gi(ai, bj) * gi(aj, bi);
            acc += coeff * a.at(TwoFormField::pair_index(ai, aj, n), i) *
                   b.at(TwoFormField::pair_index(bi, bj, n), i);
          }
    s.add(acc * m.sqrt_det(i));
  }
  return s.value() * a.grid().cell_volume();
}

// Exact discrete adjoint of d0 under the weighted pairings:
//   codiff_1(eta) = -(1/sqrt g) D_a( sqrt g g^{aj} eta_j ).
inline ScalarField codiff_1(const MetricField& m, const OneFormField& eta) {
  check_same_grid(m.grid(), eta.grid());
  const PeriodicGrid& g = eta.grid();
  const int n = g.dim();
  const index_t N = g.num_nodes();
  std::vector<std::vector<double>> flux(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) flux[static_cast<size_t>(a)].resize(static_cast<size_t>(N));
  for (index_t i = 0; i < N; ++i) {
    const Mat gi = m.inverse_at(i);
    const double sd = m.sqrt_det(i);
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += gi(a, j) * eta.at(j, i);
      flux[static_cast<size_t>(a)][static_cast<size_t>(i)] = sd * s;
    }
  }
  ScalarField out(g);
  std::vector<double> tmp(static_cast<size_t>(N));
  for (int a = 0; a < n; ++a) {
    centered_diff(g, flux[static_cast<size_t>(a)], tmp, a);
    for (index_t i = 0; i < N; ++i) out[i] += tmp[static_cast<size_t>(i)];
  }
  for (index_t i = 0; i < N; ++i) out[i] = -out[i] / m.sqrt_det(i);
  return out;
}

// Exact discrete adjoint of d1: codiff_2 = M1^{-1} d1^T M2.
inline OneFormField codiff_2(const MetricField& m, const TwoFormField& om) {
  check_same_grid(m.grid(), om.grid());
  const PeriodicGrid& g = om.grid();
  const int n = g.dim();
  const index_t N = g.num_nodes();
  const int np = om.num_components();

  // z = M2 om (per node, over ordered pairs), volume factor included
  std::vector<std::vector<double>> z(static_cast<size_t>(np));
  for (int p = 0; p < np; ++p) z[static_cast<size_t>(p)].resize(static_cast<size_t>(N));
  for (index_t i = 0; i < N; ++i) {
    const Mat gi = m.inverse_at(i);
    const double sd = m.sqrt_det(i);
    for (int ai = 0; ai < n; ++ai)
      for (int aj = ai + 1; aj < n; ++aj) {
        double acc = 0.0;
        for (int bi = 0; bi < n; ++bi)
          for (int bj = bi + 1; bj < n; ++bj) {
            const double coeff = gi(ai, bi) * gi(aj, bj) - gi(ai, bj) * gi(aj, bi);
            acc += coeff * om.at(TwoFormField::pair_index(bi, bj, n), i);
          }
        z[static_cast<size_t>(TwoFormField::pair_index(ai, aj, n))][static_cast<size_t>(i)] =
            sd * acc;
      }
  }

  // (d1^T z)_m = sum_{b>m} D_b z_{mb} - sum_{a<m} D_a z_{am}
  std::vector<std::vector<double>> dt(static_cast<size_t>(n));
  for (int c = 0; c < n; ++c) dt[static_cast<size_t>(c)].assign(static_cast<size_t>(N), 0.0);
  std::vector<double> tmp(static_cast<size_t>(N));
  for (int c = 0; c < n; ++c) {
    for (int b = c + 1; b < n; ++b) {
      centered_diff(g, z[static_cast<size_t>(TwoFormField::pair_index(c, b, n))], tmp, b);
      for (index_t i = 0; i < N; ++i) dt[static_cast<size_t>(c)][static_cast<size_t>(i)] += tmp[static_cast<size_t>(i)];
    }
    for (int a = 0; a < c; ++a) {
      centered_diff(g, z[static_cast<size_t>(TwoFormField::pair_index(a, c, n))], tmp, a);
      for (index_t i = 0; i < N; ++i) dt[static_cast<size_t>(c)][static_cast<size_t>(i)] -= tmp[static_cast<size_t>(i)];
    }
  }

  // apply M1^{-1} (per-node block g_{ij} / sqrt det g)
  OneFormField out(g);
  for (index_t i = 0; i < N; ++i) {
    const Mat gl = m.metric_at(i);
    const double isd = 1.0 / m.sqrt_det(i);
    for (int c = 0; c < n; ++c) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += gl(c, j) * dt[static_cast<size_t>(j)][static_cast<size_t>(i)];
      out.at(c, i) = s * isd;
    }
  }
  return out;
}

inline OneFormField hodge_laplacian_1(const MetricField& m, const OneFormField& eta) {
  const OneFormField a = codiff_2(m, d1(eta));
  const OneFormField b = d0(codiff_1(m, eta));
  OneFormField out = a;
  auto vo = out.values();
  auto vb = b.values();
  for (size_t i = 0; i < vo.size(); ++i) vo[i] += vb[i];
  return out;
}

inline ScalarField laplacian_0(const MetricField& m, const ScalarField& u) {
  return codiff_1(m, d0(u));
}

namespace hodge_detail {

inline OneFormField unflatten_1(const PeriodicGrid& g, const DVec& v) {
  OneFormField f(g);
  std::copy(v.begin(), v.end(), f.values().begin());
  return f;
}

inline DVec flatten(std::span<const double> v) { return DVec(v.begin(), v.end()); }

// M1-weighted inner product on flattened 1-forms.
struct Weighted1Inner {
  const MetricField* m;
  double operator()(const DVec& a, const DVec& b) const {
    const PeriodicGrid& g = m->grid();
    const int n = g.dim();
    const index_t N = g.num_nodes();
    double s = 0.0;
    for (index_t i = 0; i < N; ++i) {
      const Mat gi = m->inverse_at(i);
      double acc = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          acc += gi(p, q) * a[static_cast<size_t>(p) * static_cast<size_t>(N) + static_cast<size_t>(i)] *
                 b[static_cast<size_t>(q) * static_cast<size_t>(N) + static_cast<size_t>(i)];
      s += acc * m->sqrt_det(i);
    }
    return s * g.cell_volume();
  }
};

}  // namespace hodge_detail

struct HarmonicBasis {
  std::vector<OneFormField> forms;
  std::vector<double> eigenvalues;  // one per returned form
  double gap_ratio = 0.0;
  double first_rejected = 0.0;
};

// g-harmonic 1-forms by deflated block inverse power iteration on the Hodge
// Laplacian. The per-axis alternating zero modes of the centered complex are
// pushed out of the kernel by a penalty that acts on their flat projection
// only; exact forms and constants are flat-orthogonal to that subspace, so
// the paper-relevant kernel passes through unchanged.
inline HarmonicBasis harmonic_basis(const MetricField& metric, int expected_dim,
                                    std::uint64_t seed = 0x5eedULL) {
  const PeriodicGrid& g = metric.grid();
  const int n = g.dim();
  const index_t N = g.num_nodes();
  if (expected_dim < 1 || expected_dim > 2 * n)
    throw ConfigError("harmonic_basis: unreasonable expected_dim");

  const FlatModeProjector proj(g);

  // Penalty scale: lands the deflated modes at the order of the first
  // nonzero Laplacian eigenvalue.
  double gbar = 0.0;
  for (index_t i = 0; i < N; ++i) {
    const Mat gi = metric.inverse_at(i);
    double tr = 0.0;
    for (int a = 0; a < n; ++a) tr += gi(a, a);
    gbar += metric.sqrt_det(i) * tr / n;
  }
  gbar /= static_cast<double>(N);
  const double kappa = 100.0 * gbar * g.cell_volume();

  const LinOp A = [&](const DVec& in, DVec& out) {
    const OneFormField eta = hodge_detail::unflatten_1(g, in);
    const OneFormField lap = hodge_laplacian_1(metric, eta);
    out.assign(lap.values().begin(), lap.values().end());
    // penalty: kappa * M1^{-1} (alternating flat projection)
    DVec spur(in.size());
    for (int c = 0; c < n; ++c) {
      std::span<const double> comp{in.data() + static_cast<size_t>(c) * static_cast<size_t>(N),
                                   static_cast<size_t>(N)};
      std::span<double> s{spur.data() + static_cast<size_t>(c) * static_cast<size_t>(N),
                          static_cast<size_t>(N)};
      proj.alternating_part(comp, s);
    }
    const double ivol = 1.0 / g.cell_volume();
    for (index_t i = 0; i < N; ++i) {
      const Mat gl = metric.metric_at(i);
      const double f = kappa * ivol / metric.sqrt_det(i);
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          s += gl(c, j) * spur[static_cast<size_t>(j) * static_cast<size_t>(N) + static_cast<size_t>(i)];
        out[static_cast<size_t>(c) * static_cast<size_t>(N) + static_cast<size_t>(i)] += f * s;
      }
    }
  };

  EigOptions opt;
  opt.block = expected_dim + 2;
  opt.shift = 1e-6;
  opt.seed = seed;
  opt.max_outer = 500;
  const hodge_detail::Weighted1Inner ip{&metric};
  const EigResult eig =
      smallest_eigenpairs(A, ip, static_cast<size_t>(N) * static_cast<size_t>(n), opt);
  if (!eig.converged)
    throw NoConvergenceError("harmonic_basis: eigensolver did not certify residuals");

  const double lam_m = eig.eigenvalues[static_cast<size_t>(expected_dim - 1)];
  const double lam_next = eig.eigenvalues[static_cast<size_t>(expected_dim)];
  HarmonicBasis basis;
  basis.gap_ratio = lam_next / std::max(lam_m, 1e-14);
  basis.first_rejected = lam_next;
  if (basis.gap_ratio < 100.0)
    throw SpectralGapError("harmonic_basis: gap ratio " + format_double(basis.gap_ratio) +
                           " < 100; kernel dimension ambiguous");
  for (int k = 0; k < expected_dim; ++k) {
    OneFormField f = hodge_detail::unflatten_1(g, eig.vectors[static_cast<size_t>(k)]);
    // deterministic sign: the component with the largest-magnitude mean is
    // made positive
    int best = 0;
    double best_mean = 0.0;
    for (int c = 0; c < n; ++c) {
      double mcomp = 0.0;
      for (index_t i = 0; i < N; ++i) mcomp += f.at(c, i);
      mcomp /= static_cast<double>(N);
      if (std::abs(mcomp) > std::abs(best_mean)) {
        best_mean = mcomp;
        best = c;
      }
    }
    (void)best;
    if (best_mean < 0.0)
      for (double& v : f.values()) v = -v;
    basis.forms.push_back(std::move(f));
    basis.eigenvalues.push_back(eig.eigenvalues[static_cast<size_t>(k)]);
  }
  return basis;
}

struct HodgeDecomposition {
  OneFormField harmonic;
  ScalarField exact_potential;      // alpha, flat mean zero
  TwoFormField coexact_potential;   // beta
};

// Three-part splitting eta = harmonic + d alpha + delta beta with respect to
// the metric. alpha solves Lap_0 alpha = codiff_1 eta; beta solves the
// normal equations d1 codiff_2 beta = d1 eta; the harmonic part is the
// remainder re-projected onto the computed basis.
inline HodgeDecomposition hodge_decompose(const MetricField& metric, const OneFormField& eta,
                                          const HarmonicBasis& basis, double tol = 1e-11,
                                          int max_iter = 20000) {
  const PeriodicGrid& g = eta.grid();
  check_same_grid(metric.grid(), g);
  const index_t N = g.num_nodes();
  const FlatModeProjector proj(g);

  // rounding floor: d1/codiff of an O(1) field carry ~eps/h of noise, so an
  // RHS below this level is treated as exactly zero
  const double eta_scale = std::sqrt(inner_product_1(metric, eta, eta));
  const double rhs_floor = 1e-10 * eta_scale / g.spacing(0);

  // alpha
  ScalarField rhs0 = codiff_1(metric, eta);
  DVec b0 = hodge_detail::flatten(rhs0.values());
  const Inner ip0 = [&](const DVec& a, const DVec& b) {
    double s = 0.0;
    for (index_t i = 0; i < N; ++i)
      s += a[static_cast<size_t>(i)] * b[static_cast<size_t>(i)] * metric.sqrt_det(i);
    return s * g.cell_volume();
  };
  const LinOp A0 = [&](const DVec& in, DVec& out) {
    ScalarField u = ScalarField(g);
    std::copy(in.begin(), in.end(), u.values().begin());
    ScalarField r = laplacian_0(metric, u);
    out.assign(r.values().begin(), r.values().end());
  };
  DVec alpha_v(static_cast<size_t>(N), 0.0);
  if (std::sqrt(ip0(b0, b0)) > rhs_floor) {
    const IterOutcome o0 = cg_solve(A0, b0, alpha_v, ip0, tol, max_iter);
    if (!o0.converged)
      throw NoConvergenceError("hodge_decompose: 0-form solve stalled at rel residual " +
                               format_double(o0.rel_residual));
  }
  proj.remove_scalar_modes(alpha_v, /*keep_mean=*/false);  // mean-zero gauge
  ScalarField alpha(g);
  std::copy(alpha_v.begin(), alpha_v.end(), alpha.values().begin());

  // beta
  const TwoFormField d_eta = d1(eta);
  DVec b2 = hodge_detail::flatten(d_eta.values());
  const int np = d_eta.num_components();
  const Inner ip2 = [&](const DVec& a, const DVec& b) {
    TwoFormField fa(g), fb(g);
    std::copy(a.begin(), a.end(), fa.values().begin());
    std::copy(b.begin(), b.end(), fb.values().begin());
    return inner_product_2(metric, fa, fb);
  };
  const LinOp A2 = [&](const DVec& in, DVec& out) {
    TwoFormField beta(g);
    std::copy(in.begin(), in.end(), beta.values().begin());
    const TwoFormField r = d1(codiff_2(metric, beta));
    out.assign(r.values().begin(), r.values().end());
  };
  DVec beta_v(static_cast<size_t>(N) * static_cast<size_t>(np), 0.0);
  if (std::sqrt(ip2(b2, b2)) > rhs_floor) {
    const IterOutcome o2 = cg_solve(A2, b2, beta_v, ip2, tol, max_iter);
    if (!o2.converged)
      throw NoConvergenceError("hodge_decompose: 2-form solve stalled at rel residual " +
                               format_double(o2.rel_residual));
  }
  TwoFormField beta(g);
  std::copy(beta_v.begin(), beta_v.end(), beta.values().begin());

  // remainder, re-projected onto the certified kernel
  const OneFormField da = d0(alpha);
  const OneFormField db = codiff_2(metric, beta);
  OneFormField rem(g);
  {
    auto vr = rem.values();
    auto ve = eta.values();
    auto va = da.values();
    auto vb = db.values();
    for (size_t i = 0; i < vr.size(); ++i) vr[i] = ve[i] - va[i] - vb[i];
  }
  OneFormField harm(g);
  for (const OneFormField& bf : basis.forms) {
    const double c = inner_product_1(metric, bf, rem);
    auto vh = harm.values();
    auto vb = bf.values();
    for (size_t i = 0; i < vh.size(); ++i) vh[i] += c * vb[i];
  }

  HodgeDecomposition dec;
  dec.harmonic = std::move(harm);
  dec.exact_potential = std::move(alpha);
  dec.coexact_potential = std::move(beta);
  return dec;
}

inline HodgeDecomposition hodge_decompose(const MetricField& metric, const OneFormField& eta) {
  const HarmonicBasis basis = harmonic_basis(metric, metric.grid().dim());
  return hodge_decompose(metric, eta, basis);
}

}  // namespace lt
