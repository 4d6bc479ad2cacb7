#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffeoflow/errors.hpp"
#include "diffeoflow/matrix.hpp"

namespace diffeoflow {

// The two matrix manifolds handled by this library.
enum class Manifold { Spd, Corr };

inline std::string to_string(Manifold m) { return m == Manifold::Spd ? "spd" : "corr"; }

inline Manifold manifold_from_string(const std::string& s) {
  if (s == "spd") return Manifold::Spd;
  if (s == "corr") return Manifold::Corr;
  throw InvalidInput("unknown manifold tag: " + s);
}

// Dimension of the flat space E the manifold maps into:
// d(d+1)/2 for SPD (full lower triangle), d(d-1)/2 for correlation
// (strict lower triangle).
inline int embedded_dim(Manifold m, int d) {
  return m == Manifold::Spd ? d * (d + 1) / 2 : d * (d - 1) / 2;
}

// Smallest and largest eigenvalue without keeping the basis around.
inline std::pair<double, double> eig_range(const SymMatrix& a) {
  const EigenDecomposition ed = sym_eig(a);
  return {ed.eigenvalues.front(), ed.eigenvalues.back()};
}

// SPD check: all eigenvalues strictly positive, with a relative threshold of
// 1e-12 times the largest eigenvalue (floored at 1e-300 so the all-zero
// matrix is rejected rather than dividing by zero).
inline bool is_spd(const SymMatrix& a) {
  if (!a.all_finite() || a.dim() == 0) return false;
  const auto [lo, hi] = eig_range(a);
  return lo > 1e-12 * std::max(hi, 1e-300);
}

inline bool has_unit_diagonal(const SymMatrix& a, double tol = 1e-10) {
  for (int i = 0; i < a.dim(); ++i)
    if (std::abs(a(i, i) - 1.0) > tol) return false;
  return true;
}

// Symmetric positive definite matrix; validated on construction.
class SpdMatrix {
 public:
  explicit SpdMatrix(SymMatrix s) : s_(std::move(s)) {
    if (!is_spd(s_)) throw NotPositiveDefinite("SpdMatrix: input is not positive definite");
  }

  int dim() const { return s_.dim(); }
  double operator()(int i, int j) const { return s_(i, j); }
  const SymMatrix& sym() const { return s_; }
  const Matrix& matrix() const { return s_.matrix(); }

 private:
  SymMatrix s_;
};

// Full-rank correlation matrix: SPD with unit diagonal.
class CorrMatrix {
 public:
  explicit CorrMatrix(SymMatrix s) : s_(std::move(s)) {
    if (!has_unit_diagonal(s_.sym()))
      throw NotCorrelation("CorrMatrix: diagonal entries must equal 1");
  }

  int dim() const { return s_.dim(); }
  double operator()(int i, int j) const { return s_(i, j); }
  const SymMatrix& sym() const { return s_.sym(); }
  const SpdMatrix& spd() const { return s_; }

 private:
  SpdMatrix s_;
};

// A point of E tagged with the manifold and matrix dimension it came from.
struct EmbeddedVec {
  Manifold manifold;
  int dim_matrix = 0;
  Vec values;

  void check() const {
    if (static_cast<int>(values.size()) != embedded_dim(manifold, dim_matrix))
      throw InvalidInput("EmbeddedVec: length inconsistent with manifold tag and dimension");
  }
};

// Lower-triangular matrix with implicit unit diagonal, stored as the strict
// lower entries in column-major order.
struct UnitLowerTriangular {
  int dim = 0;
  Vec strict_lower;  // length d(d-1)/2

  Matrix to_matrix() const {
    Matrix l = Matrix::identity(dim);
    std::size_t k = 0;
    for (int j = 0; j < dim; ++j)
      for (int i = j + 1; i < dim; ++i) l(i, j) = strict_lower[k++];
    return l;
  }
};

// veclt: stacks the full lower triangle column by column, diagonal entries
// unscaled and strictly-lower entries scaled by sqrt(2), so that the
// Euclidean norm of the vector equals the Frobenius norm of the matrix.
inline Vec veclt(const SymMatrix& a) {
  const int d = a.dim();
  Vec v;
  v.reserve(static_cast<std::size_t>(d * (d + 1) / 2));
  const double sqrt2 = std::sqrt(2.0);
  for (int j = 0; j < d; ++j) {
    v.push_back(a(j, j));
    for (int i = j + 1; i < d; ++i) v.push_back(sqrt2 * a(i, j));
  }
  return v;
}

inline SymMatrix veclt_inv(const Vec& v, int d) {
  if (static_cast<int>(v.size()) != d * (d + 1) / 2)
    throw InvalidInput("veclt_inv: length must be d(d+1)/2");
  SymMatrix a(d);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  std::size_t k = 0;
  for (int j = 0; j < d; ++j) {
    a.set(j, j, v[k++]);
    for (int i = j + 1; i < d; ++i) a.set(i, j, inv_sqrt2 * v[k++]);
  }
  return a;
}

// vecl: strict lower triangle column by column, no scaling.
inline Vec vecl(const Matrix& a) {
  const int d = a.rows();
  Vec v;
  v.reserve(static_cast<std::size_t>(d * (d - 1) / 2));
  for (int j = 0; j < d; ++j)
    for (int i = j + 1; i < d; ++i) v.push_back(a(i, j));
  return v;
}

inline UnitLowerTriangular vecl_inv(const Vec& v, int d) {
  if (static_cast<int>(v.size()) != d * (d - 1) / 2)
    throw InvalidInput("vecl_inv: length must be d(d-1)/2");
  return UnitLowerTriangular{d, v};
}

// Principal matrix logarithm of an SPD matrix, via eigendecomposition.
inline SymMatrix mat_log(const SpdMatrix& s) {
  return eig_apply(sym_eig(s.sym()), [](double x) { return std::log(x); });
}

// Matrix exponential of a symmetric matrix; the result is SPD.
inline SpdMatrix mat_exp(const SymMatrix& v) {
  if (!v.all_finite()) throw InvalidInput("mat_exp: non-finite input");
  return SpdMatrix(eig_apply(sym_eig(v), [](double x) { return std::exp(x); }));
}

// phi for SPD matrices: veclt of the matrix logarithm. A global
// diffeomorphism onto R^{d(d+1)/2}; the sqrt(2) scaling in veclt makes it an
// isometry between the log-Euclidean metric and the flat metric on E.
inline EmbeddedVec phi_spd(const SpdMatrix& s) {
  return EmbeddedVec{Manifold::Spd, s.dim(), veclt(mat_log(s))};
}

inline SpdMatrix phi_spd_inv(const EmbeddedVec& z) {
  if (z.manifold != Manifold::Spd) throw InvalidInput("phi_spd_inv: vector not tagged spd");
  z.check();
  return mat_exp(veclt_inv(z.values, z.dim_matrix));
}

// Normalized Cholesky factor: rows of chol(c) rescaled to unit diagonal.
inline UnitLowerTriangular nchol(const CorrMatrix& c) {
  const Matrix l = cholesky(c.sym());
  const int d = c.dim();
  Matrix nl(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) nl(i, j) = l(i, j) / l(i, i);
  return UnitLowerTriangular{d, vecl(nl)};
}

// Inverse of the normalized Cholesky map: D^{-1/2} L L^T D^{-1/2} with
// D = diag(L L^T). The output has an exact unit diagonal.
inline CorrMatrix nchol_inv(const UnitLowerTriangular& l) {
  const Matrix lm = l.to_matrix();
  const int d = l.dim;
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = 0; k <= std::min(i, j); ++k) s += lm(i, k) * lm(j, k);
      g(i, j) = s;
      g(j, i) = s;
    }
  Vec inv_sqrt_diag(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) inv_sqrt_diag[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(g(i, i));
  Matrix out(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      out(i, j) = g(i, j) * inv_sqrt_diag[static_cast<std::size_t>(i)] *
                  inv_sqrt_diag[static_cast<std::size_t>(j)];
    out(i, i) = 1.0;
  }
  return CorrMatrix(SymMatrix(out));
}

// phi for correlation matrices: strict lower triangle of the normalized
// Cholesky factor. A global diffeomorphism onto R^{d(d-1)/2}.
inline EmbeddedVec phi_corr(const CorrMatrix& c) {
  return EmbeddedVec{Manifold::Corr, c.dim(), nchol(c).strict_lower};
}

inline CorrMatrix phi_corr_inv(const EmbeddedVec& z) {
  if (z.manifold != Manifold::Corr) throw InvalidInput("phi_corr_inv: vector not tagged corr");
  z.check();
  return nchol_inv(vecl_inv(z.values, z.dim_matrix));
}

// Tag-dispatched embedding. The matrix must satisfy the invariants of the
// given manifold; the typed phi_* overloads enforce them.
inline EmbeddedVec embed(const SymMatrix& x, Manifold m) {
  if (m == Manifold::Spd) return phi_spd(SpdMatrix(x));
  return phi_corr(CorrMatrix(x));
}

// Inverse embedding; the result always satisfies the manifold invariants.
inline SymMatrix unembed(const EmbeddedVec& z) {
  if (z.manifold == Manifold::Spd) return phi_spd_inv(z).sym();
  return phi_corr_inv(z).sym();
}

inline bool satisfies_manifold(const SymMatrix& x, Manifold m) {
  if (!is_spd(x)) return false;
  if (m == Manifold::Corr && !has_unit_diagonal(x)) return false;
  return true;
}

// Geodesic between two points of the pullback manifold: the straight line in
// E mapped back through phi^{-1}.
inline SymMatrix geodesic(const SymMatrix& x0, const SymMatrix& x1, Manifold m, double t) {
  const EmbeddedVec z0 = embed(x0, m);
  const EmbeddedVec z1 = embed(x1, m);
  Vec zt(z0.values.size());
  for (std::size_t i = 0; i < zt.size(); ++i) zt[i] = (1.0 - t) * z0.values[i] + t * z1.values[i];
  return unembed(EmbeddedVec{m, x0.dim(), std::move(zt)});
}

// Riemannian distance under the pullback metric.
inline double manifold_distance(const SymMatrix& x0, const SymMatrix& x1, Manifold m) {
  const EmbeddedVec z0 = embed(x0, m);
  const EmbeddedVec z1 = embed(x1, m);
  return norm2(z0.values - z1.values);
}

// Closed-form Fréchet mean: phi^{-1} of the arithmetic mean of embeddings.
inline SymMatrix frechet_mean(const std::vector<SymMatrix>& points, Manifold m) {
  if (points.empty()) throw InvalidInput("frechet_mean: empty point list");
  const int d = points.front().dim();
  Vec acc(static_cast<std::size_t>(embedded_dim(m, d)), 0.0);
  for (const SymMatrix& p : points) {
    if (p.dim() != d) throw InvalidInput("frechet_mean: mixed dimensions");
    axpy(1.0, embed(p, m).values, acc);
  }
  for (double& v : acc) v /= static_cast<double>(points.size());
  return unembed(EmbeddedVec{m, d, std::move(acc)});
}

// Projects a symmetric matrix onto the set with smallest eigenvalue >= eps by
// blending with the identity: (1 - alpha) * A + alpha * I with
// alpha = (eps - lambda_min) / (1 - lambda_min). If the input already has
// lambda_min >= eps it is returned unchanged. A unit diagonal is preserved,
// since the blend is an affine combination with I.
inline SymMatrix project_to_spd(const SymMatrix& a, double eps = 1e-8,
                                bool preserve_unit_diag = false) {
  if (!a.all_finite()) throw InvalidInput("project_to_spd: non-finite input");
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidInput("project_to_spd: eps must be in (0, 1]");
  const double lambda_min = eig_range(a).first;
  if (lambda_min >= eps || lambda_min >= 1.0) return a;
  const double alpha = (eps - lambda_min) / (1.0 - lambda_min);
  const int d = a.dim();
  SymMatrix out(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      out.set(i, j, (1.0 - alpha) * a(i, j) + (i == j ? alpha : 0.0));
  if (preserve_unit_diag)
    for (int i = 0; i < d; ++i) out.set(i, i, 1.0);
  return out;
}

}  // namespace diffeoflow
