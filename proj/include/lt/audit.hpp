#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>
#include <vector>

#include "lt/cost.hpp"
#include "lt/interp.hpp"
#include "lt/transport_state.hpp"
#include "lt/util.hpp"

namespace lt {

// integral of c(x, T(x)) against rho
inline double transport_cost(const TransportState& st) {
  const PeriodicGrid& g = st.grid;
  KahanSum s;
  for (index_t i = 0; i < g.num_nodes(); ++i) {
    const double c = cost_value(st.cost, g.position(i), st.map_point(i), g.dim());
    s.add(c * st.dens.rho[i]);
  }
  return s.value() * g.cell_volume();
}

// A finite point set witnessing (or failing to witness) c-cyclical
// monotonicity. Costs are always recomputed from the cost model on minimal
// periodic representatives; reassignment pairs that leave the admissible
// window are skipped and counted.
struct CycleViolation {
  std::vector<Vec> points;
  std::vector<Vec> images;
  double plan_cost = 0.0;
  double best_reassignment_cost = 0.0;
  double gain = 0.0;  // plan - best reassignment; > 0 certifies non-optimality
  int shift = 0;      // the optimal cyclic shift sigma(i) = i + shift mod k
  int skipped_shifts = 0;
};

namespace audit_detail {

inline CycleViolation cycle_gain_impl(const CostModel& cost, const std::vector<Vec>& points,
                                      const std::vector<Vec>& images, int dim) {
  const int k = static_cast<int>(points.size());
  CycleViolation rec;
  rec.points = points;
  rec.images = images;
  KahanSum plan;
  for (int i = 0; i < k; ++i) plan.add(cost_value(cost, points[static_cast<size_t>(i)],
                                                  images[static_cast<size_t>(i)], dim));
  rec.plan_cost = plan.value();
  // minimum over the nontrivial cyclic shifts; inadmissible shifts are
  // skipped and counted
  double best = std::numeric_limits<double>::infinity();
  rec.shift = 0;
  for (int m = 1; m < k; ++m) {
    KahanSum sum;
    bool ok = true;
    for (int i = 0; i < k && ok; ++i) {
      try {
        sum.add(cost_value(cost, points[static_cast<size_t>(i)],
                           images[static_cast<size_t>((i + m) % k)], dim));
      } catch (const CutLocusError&) {
        ok = false;
      }
    }
    if (!ok) {
      ++rec.skipped_shifts;
      continue;
    }
    if (sum.value() < best) {
      best = sum.value();
      rec.shift = m;
    }
  }
  rec.best_reassignment_cost = std::isfinite(best) ? best : rec.plan_cost;
  rec.gain = rec.plan_cost - rec.best_reassignment_cost;
  return rec;
}

inline bool better_violation(const CycleViolation& a, const CycleViolation& b) {
  // deterministic merge order: gain first, then lexicographic points
  if (a.gain != b.gain) return a.gain > b.gain;
  const size_t n = std::min(a.points.size(), b.points.size());
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      if (a.points[i][c] != b.points[i][c]) return a.points[i][c] < b.points[i][c];
    }
  return a.points.size() < b.points.size();
}

}  // namespace audit_detail

// Full cyclic enumeration; the spec contract caps k so the enumeration stays
// trivial (longer witnesses come from orbit tracing, which brings its own
// ordering).
inline CycleViolation cycle_gain(const CostModel& cost, const std::vector<Vec>& points,
                                 const std::vector<Vec>& images, int dim) {
  if (points.size() < 2 || points.size() > 8 || points.size() != images.size())
    throw ConfigError("cycle_gain: need 2 <= k <= 8 matched points/images");
  return audit_detail::cycle_gain_impl(cost, points, images, dim);
}

enum class AuditStrategy { Random, Orbit, Both };

struct AuditReport {
  double total_cost = 0.0;
  int violations_found = 0;
  bool has_best = false;
  CycleViolation best;
  long samples_checked = 0;
  long skipped = 0;
  std::uint64_t seed = 0;
};

// Two search strategies over finite witnesses:
//  (i) seeded random k-tuples,
//  (ii) orbit tracing x -> T(x) -> ..., closing the cycle when the orbit
//       returns within 2 max(h) of its start. Random sampling provably
//       struggles here; wrap-around cycles live on the map's own orbits.
inline AuditReport cyclical_monotonicity_audit(const TransportState& st, int k_max,
                                               int num_random, std::uint64_t seed,
                                               AuditStrategy strategy = AuditStrategy::Both,
                                               int max_hops = 64) {
  if (k_max < 2 || k_max > 8) throw ConfigError("audit: k_max must be in 2..8");
  const PeriodicGrid& g = st.grid;
  const int n = g.dim();
  AuditReport rep;
  rep.seed = seed;
  rep.total_cost = transport_cost(st);
  const auto eta_interp = st.make_eta_interpolants();

  double close_radius = 0.0;
  for (int a = 0; a < n; ++a) close_radius = std::max(close_radius, g.spacing(a));
  close_radius *= 2.0;

  auto consider = [&](const CycleViolation& v) {
    if (v.gain > 0.0) {
      ++rep.violations_found;
      if (!rep.has_best || audit_detail::better_violation(v, rep.best)) {
        rep.best = v;
        rep.has_best = true;
      }
    }
  };

  if (strategy == AuditStrategy::Random || strategy == AuditStrategy::Both) {
    Rng rng(seed);
    for (int t = 0; t < num_random; ++t) {
      const int k = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(k_max - 1));
      std::vector<Vec> pts, imgs;
      bool ok = true;
      for (int i = 0; i < k && ok; ++i) {
        Vec x;
        for (int a = 0; a < n; ++a) x[a] = rng.next_double();
        try {
          const Vec y = st.map_at_point(x, eta_interp);
          pts.push_back(x);
          imgs.push_back(y);
        } catch (const CutLocusError&) {
          ok = false;
        }
      }
      if (!ok) {
        ++rep.skipped;
        continue;
      }
      consider(audit_detail::cycle_gain_impl(st.cost, pts, imgs, n));
      ++rep.samples_checked;
    }
  }

  if (strategy == AuditStrategy::Orbit || strategy == AuditStrategy::Both) {
    Rng rng(seed ^ 0x6f72626974ULL);
    for (int t = 0; t < num_random; ++t) {
      Vec x0;
      for (int a = 0; a < n; ++a) x0[a] = rng.next_double();
      std::vector<Vec> pts;
      std::vector<Vec> imgs;
      Vec x = x0;
      bool closed = false, ok = true;
      for (int hop = 0; hop < max_hops && ok; ++hop) {
        Vec y;
        try {
          y = st.map_at_point(x, eta_interp);
        } catch (const CutLocusError&) {
          ok = false;
          break;
        }
        pts.push_back(x);
        imgs.push_back(y);
        double dist = 0.0;
        const Vec d = torus_displacement(y, x0, n);
        for (int a = 0; a < n; ++a) dist = std::max(dist, std::abs(d[a]));
        if (dist <= close_radius && hop >= 1) {
          closed = true;
          break;
        }
        x = y;
      }
      if (!ok || !closed || pts.size() < 2) {
        ++rep.skipped;
        continue;
      }
      consider(audit_detail::cycle_gain_impl(st.cost, pts, imgs, n));
      ++rep.samples_checked;
    }
  }
  return rep;
}

// Cost above the do-nothing plan, defined when source and target agree and
// the cost vanishes on the diagonal.
inline double optimality_gap(const TransportState& st) {
  const PeriodicGrid& g = st.grid;
  for (index_t i = 0; i < g.num_nodes(); ++i)
    if (std::abs(st.dens.rho[i] - st.dens.rhobar[i]) > 1e-12)
      throw DensityMismatchError("optimality_gap requires rho = rhobar pointwise");
  for (int probe = 0; probe < 8; ++probe) {
    Vec x;
    for (int a = 0; a < g.dim(); ++a) x[a] = halton(static_cast<std::uint64_t>(probe), a);
    if (std::abs(cost_value(st.cost, x, x, g.dim())) > 1e-14)
      throw ConfigError("optimality_gap requires c(x,x) = 0");
  }
  return transport_cost(st);
}

}  // namespace lt
