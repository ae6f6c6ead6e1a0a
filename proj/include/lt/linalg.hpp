#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "lt/errors.hpp"

namespace lt {

// Fixed-capacity vector/matrix/3-tensor for dimensions 2 and 3. The active
// dimension travels with the call sites (grid.dim()); unused slots stay zero.

struct Vec {
  std::array<double, 3> v{0.0, 0.0, 0.0};
  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }
};

struct Mat {
  std::array<double, 9> m{};  // row-major
  double& operator()(int i, int j) { return m[static_cast<size_t>(3 * i + j)]; }
  double operator()(int i, int j) const { return m[static_cast<size_t>(3 * i + j)]; }
};

struct Ten3 {
  std::array<double, 27> t{};
  double& operator()(int i, int j, int k) {
    return t[static_cast<size_t>(9 * i + 3 * j + k)];
  }
  double operator()(int i, int j, int k) const {
    return t[static_cast<size_t>(9 * i + 3 * j + k)];
  }
};

inline Mat identity(int n) {
  Mat I;
  for (int i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

inline double det(const Mat& a, int n) {
  if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

inline Mat inverse(const Mat& a, int n, double d) {
  Mat r;
  const double id = 1.0 / d;
  if (n == 2) {
    r(0, 0) = a(1, 1) * id;
    r(0, 1) = -a(0, 1) * id;
    r(1, 0) = -a(1, 0) * id;
    r(1, 1) = a(0, 0) * id;
    return r;
  }
  r(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) * id;
  r(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) * id;
  r(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) * id;
  r(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) * id;
  r(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) * id;
  r(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) * id;
  r(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) * id;
  r(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) * id;
  r(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) * id;
  return r;
}

inline Mat inverse(const Mat& a, int n) { return inverse(a, n, det(a, n)); }

inline Vec matvec(const Mat& a, const Vec& x, int n) {
  Vec y;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

// Cyclic Jacobi eigen-decomposition of a small symmetric matrix (row-major,
// n x n, n <= 16). Eigenvalues ascending; optional eigenvectors in columns.
inline void jacobi_eigh(std::vector<double> a, int n, std::vector<double>& evals,
                        std::vector<double>* evecs = nullptr) {
  std::vector<double> v;
  if (evecs) {
    v.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
  }
  auto A = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-300) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        if (evecs) {
          for (int k = 0; k < n; ++k) {
            const double vkp = v[static_cast<size_t>(k) * n + p];
            const double vkq = v[static_cast<size_t>(k) * n + q];
            v[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
            v[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  evals.resize(static_cast<size_t>(n));
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n; ++i) evals[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * n + i];
  // insertion sort by eigenvalue, reordering eigenvector columns alongside
  for (int i = 1; i < n; ++i) {
    const double key = evals[static_cast<size_t>(i)];
    const int keyo = order[static_cast<size_t>(i)];
    int j = i - 1;
    while (j >= 0 && evals[static_cast<size_t>(j)] > key) {
      evals[static_cast<size_t>(j + 1)] = evals[static_cast<size_t>(j)];
      order[static_cast<size_t>(j + 1)] = order[static_cast<size_t>(j)];
      --j;
    }
    evals[static_cast<size_t>(j + 1)] = key;
    order[static_cast<size_t>(j + 1)] = keyo;
  }
  if (evecs) {
    evecs->assign(static_cast<size_t>(n) * n, 0.0);
    for (int col = 0; col < n; ++col)
      for (int k = 0; k < n; ++k)
        (*evecs)[static_cast<size_t>(k) * n + col] =
            v[static_cast<size_t>(k) * n + order[static_cast<size_t>(col)]];
  }
}

// Smallest eigenvalue of a symmetric 2x2/3x3 (positivity checks).
inline double min_sym_eigenvalue(const Mat& a, int n) {
  std::vector<double> flat(static_cast<size_t>(n) * n), ev;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      flat[static_cast<size_t>(i) * n + j] = 0.5 * (a(i, j) + a(j, i));
  jacobi_eigh(std::move(flat), n, ev);
  return ev[0];
}

}  // namespace lt
