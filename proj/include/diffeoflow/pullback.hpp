#pragma once

#include <cmath>
#include <vector>

#include "diffeoflow/manifold.hpp"

namespace diffeoflow {

// Checks that xi is a valid tangent at a point of the given manifold:
// matching dimension, and zero diagonal for correlation base points.
inline void check_tangent(const SymMatrix& x, const SymMatrix& xi, Manifold m) {
  if (xi.dim() != x.dim()) throw InvalidInput("tangent dimension does not match base point");
  if (m == Manifold::Corr) {
    for (int i = 0; i < xi.dim(); ++i)
      if (std::abs(xi(i, i)) > 1e-10)
        throw InvalidInput("correlation tangents must have zero diagonal");
  }
}

// Retraction used by the finite-difference differential. For SPD it is the
// plain symmetric step x + t*xi (valid for small t); for correlation the step
// is followed by exact diagonal renormalization.
inline SymMatrix retract(const SymMatrix& x, const SymMatrix& xi, Manifold m, double t) {
  const int d = x.dim();
  SymMatrix y(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) y.set(i, j, x(i, j) + t * xi(i, j));
  if (m == Manifold::Corr) {
    Vec inv_sqrt(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) inv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(y(i, i));
    SymMatrix r(d);
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j)
        r.set(i, j, y(i, j) * inv_sqrt[static_cast<std::size_t>(i)] *
                        inv_sqrt[static_cast<std::size_t>(j)]);
      r.set(i, i, 1.0);
    }
    return r;
  }
  return y;
}

// Directional derivative of phi at x along xi, by central finite differences:
// (phi(retract(x, h xi)) - phi(retract(x, -h xi))) / (2h), with
// h = 1e-5 (1 + ||x||_F) / (1 + ||xi||_F). If a step leaves the manifold the
// step size is reduced once by a factor 10 before giving up.
inline Vec diffeo_jvp(const SymMatrix& x, const SymMatrix& xi, Manifold m) {
  check_tangent(x, xi, m);
  double h = 1e-5 * (1.0 + x.frobenius_norm()) / (1.0 + xi.frobenius_norm());
  for (int attempt = 0; attempt < 2; ++attempt, h /= 10.0) {
    try {
      const Vec plus = embed(retract(x, xi, m, h), m).values;
      const Vec minus = embed(retract(x, xi, m, -h), m).values;
      Vec out(plus.size());
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = (plus[k] - minus[k]) / (2.0 * h);
      return out;
    } catch (const NotPositiveDefinite&) {
      // retry with the smaller step
    }
  }
  throw StepFailure("diffeo_jvp: finite-difference step leaves the manifold");
}

// Orthogonal-style basis of the tangent space at any point, ordered to match
// veclt/vecl. For SPD the coordinates of a tangent in this basis are exactly
// veclt(xi); for correlation they are vecl(xi).
inline std::vector<SymMatrix> tangent_basis(Manifold m, int d) {
  std::vector<SymMatrix> basis;
  basis.reserve(static_cast<std::size_t>(embedded_dim(m, d)));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < d; ++j) {
    if (m == Manifold::Spd) {
      SymMatrix b(d);
      b.set(j, j, 1.0);
      basis.push_back(b);
    }
    for (int i = j + 1; i < d; ++i) {
      SymMatrix b(d);
      b.set(i, j, m == Manifold::Spd ? inv_sqrt2 : 1.0);
      basis.push_back(b);
    }
  }
  return basis;
}

inline Vec tangent_coords(const SymMatrix& xi, Manifold m) {
  return m == Manifold::Spd ? veclt(xi) : vecl(xi.matrix());
}

inline SymMatrix tangent_from_coords(const Vec& coords, Manifold m, int d) {
  if (m == Manifold::Spd) return veclt_inv(coords, d);
  const UnitLowerTriangular l = vecl_inv(coords, d);
  SymMatrix xi(d);
  std::size_t k = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j + 1; i < d; ++i) xi.set(i, j, l.strict_lower[k++]);
  return xi;
}

// The differential of phi at a fixed point, materialized as a matrix over the
// tangent basis. Built from dim(E) finite-difference columns; used to solve
// D phi(x)[xi] = v for xi, which is the numerical (D phi)^{-1}.
class DiffeoJacobian {
 public:
  DiffeoJacobian(const SymMatrix& x, Manifold m) : x_(x), manifold_(m) {
    const int de = embedded_dim(m, x.dim());
    jac_ = Matrix(de, de);
    const std::vector<SymMatrix> basis = tangent_basis(m, x.dim());
    for (int col = 0; col < de; ++col) {
      const Vec jv = diffeo_jvp(x, basis[static_cast<std::size_t>(col)], m);
      for (int row = 0; row < de; ++row) jac_(row, col) = jv[static_cast<std::size_t>(row)];
    }
  }

  Vec apply_coords(const Vec& coords) const { return matvec(jac_, coords); }

  Vec apply(const SymMatrix& xi) const { return matvec(jac_, tangent_coords(xi, manifold_)); }

  // xi such that D phi(x)[xi] = v.
  SymMatrix solve(const Vec& v) const {
    return tangent_from_coords(diffeoflow::solve(jac_, v), manifold_, x_.dim());
  }

  const Matrix& matrix() const { return jac_; }

 private:
  SymMatrix x_;
  Manifold manifold_;
  Matrix jac_;
};

// Pullback exponential map: exp_x(xi) = phi^{-1}(phi(x) + D phi(x)[xi]).
inline SymMatrix pullback_exp(const SymMatrix& x, const SymMatrix& xi, Manifold m) {
  const Vec step = diffeo_jvp(x, xi, m);
  Vec z = embed(x, m).values;
  axpy(1.0, step, z);
  return unembed(EmbeddedVec{m, x.dim(), std::move(z)});
}

// Pullback logarithm in embedded coordinates:
// D phi(x)[log_x(y)] = phi(y) - phi(x), which is exact.
inline Vec pullback_log(const SymMatrix& x, const SymMatrix& y, Manifold m) {
  return embed(y, m).values - embed(x, m).values;
}

// Parallel transport in embedded coordinates: the transported tangent
// satisfies D phi(y)[PT(xi)] = D phi(x)[xi], so the embedded representation
// is carried over unchanged.
inline Vec pullback_pt(const SymMatrix& x, const SymMatrix& /*y*/, const SymMatrix& xi,
                       Manifold m) {
  return diffeo_jvp(x, xi, m);
}

}  // namespace diffeoflow
