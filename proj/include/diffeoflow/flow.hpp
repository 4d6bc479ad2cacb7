#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "diffeoflow/data.hpp"
#include "diffeoflow/manifold.hpp"
#include "diffeoflow/matrix.hpp"
#include "diffeoflow/nn.hpp"
#include "diffeoflow/pullback.hpp"
#include "diffeoflow/rng.hpp"

namespace diffeoflow {

enum class CovarianceMode { Full, Diagonal };

inline std::string to_string(CovarianceMode m) {
  return m == CovarianceMode::Full ? "full" : "diagonal";
}

inline CovarianceMode covariance_mode_from_string(const std::string& s) {
  if (s == "full") return CovarianceMode::Full;
  if (s == "diagonal") return CovarianceMode::Diagonal;
  throw InvalidInput("unknown covariance mode: " + s);
}

// Class-conditional Gaussian in E: per class, a mean and a lower-triangular
// covariance factor. This is the source distribution the flow starts from.
struct ConditionalGaussianSource {
  struct ClassGaussian {
    Vec mean;
    Matrix factor;  // lower-triangular, factor * factor^T = covariance
    std::size_t count = 0;
  };
  std::map<int, ClassGaussian> by_class;

  int dim() const { return static_cast<int>(by_class.begin()->second.mean.size()); }

  const ClassGaussian& at(int y) const {
    const auto it = by_class.find(y);
    if (it == by_class.end()) throw MissingClass("unknown class label " + std::to_string(y));
    return it->second;
  }
};

// Fits the per-class Gaussian source. Full covariance (empirical covariance
// with divisor n, ridged by ridge * tr/dim * I, then factorized) needs at
// least dim(E) + 2 samples in the class; otherwise the class falls back to a
// diagonal covariance of per-coordinate variances floored by the ridge.
inline ConditionalGaussianSource fit_source(const std::vector<Vec>& embeddings,
                                            const std::vector<int>& labels, double ridge,
                                            CovarianceMode mode) {
  if (embeddings.empty()) throw MissingClass("fit_source: no samples");
  if (embeddings.size() != labels.size()) throw InvalidInput("fit_source: size mismatch");
  const int de = static_cast<int>(embeddings.front().size());
  for (const Vec& z : embeddings)
    if (static_cast<int>(z.size()) != de) throw InvalidInput("fit_source: mixed dimensions");

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

  ConditionalGaussianSource src;
  for (const auto& [y, idx] : groups) {
    ConditionalGaussianSource::ClassGaussian g;
    g.count = idx.size();
    g.mean.assign(static_cast<std::size_t>(de), 0.0);
    for (std::size_t i : idx) axpy(1.0, embeddings[i], g.mean);
    for (double& v : g.mean) v /= static_cast<double>(idx.size());

    const bool full = mode == CovarianceMode::Full &&
                      idx.size() >= static_cast<std::size_t>(de) + 2;
    if (full) {
      SymMatrix cov(de);
      for (int a = 0; a < de; ++a)
        for (int b = a; b < de; ++b) {
          double acc = 0.0;
          for (std::size_t i : idx)
            acc += (embeddings[i][static_cast<std::size_t>(a)] - g.mean[static_cast<std::size_t>(a)]) *
                   (embeddings[i][static_cast<std::size_t>(b)] - g.mean[static_cast<std::size_t>(b)]);
          cov.set(a, b, acc / static_cast<double>(idx.size()));
        }
      const double scale = cov.matrix().trace() / static_cast<double>(de);
      SymMatrix ridged(de);
      for (int a = 0; a < de; ++a)
        for (int b = a; b < de; ++b)
          ridged.set(a, b, cov(a, b) + (a == b ? ridge * scale : 0.0));
      try {
        g.factor = cholesky(ridged);
        src.by_class[y] = std::move(g);
        continue;
      } catch (const NotPositiveDefinite&) {
        // degenerate class covariance: fall through to the diagonal fit
      }
    }
    g.factor = Matrix(de, de);
    for (int a = 0; a < de; ++a) {
      double var = 0.0;
      for (std::size_t i : idx) {
        const double c = embeddings[i][static_cast<std::size_t>(a)] - g.mean[static_cast<std::size_t>(a)];
        var += c * c;
      }
      var /= static_cast<double>(idx.size());
      g.factor(a, a) = std::sqrt(var + ridge);
    }
    src.by_class[y] = std::move(g);
  }
  return src;
}

inline Vec sample_source(const ConditionalGaussianSource& src, int y, Rng& rng) {
  const auto& g = src.at(y);
  Vec eps(g.mean.size());
  for (double& v : eps) v = rng.normal();
  Vec z = g.mean;
  for (int i = 0; i < g.factor.rows(); ++i)
    for (int j = 0; j <= i; ++j)
      z[static_cast<std::size_t>(i)] += g.factor(i, j) * eps[static_cast<std::size_t>(j)];
  return z;
}

// The learned Euclidean vector field: an MLP over (z, t, one-hot(y)).
struct VectorFieldModel {
  Manifold manifold = Manifold::Spd;
  int d = 0;
  std::vector<int> classes;  // sorted label set
  MlpParams params;

  int embedded() const { return embedded_dim(manifold, d); }

  int class_index(int y) const {
    const auto it = std::lower_bound(classes.begin(), classes.end(), y);
    if (it == classes.end() || *it != y)
      throw MissingClass("unknown class label " + std::to_string(y));
    return static_cast<int>(it - classes.begin());
  }

  Vec input_vector(double t, const Vec& z, int y) const {
    Vec in;
    in.reserve(z.size() + 1 + classes.size());
    in.insert(in.end(), z.begin(), z.end());
    in.push_back(t);
    const int ci = class_index(y);
    for (std::size_t k = 0; k < classes.size(); ++k)
      in.push_back(static_cast<int>(k) == ci ? 1.0 : 0.0);
    return in;
  }

  // u_theta^E(t, z, y)
  Vec velocity(double t, const Vec& z, int y) const {
    return mlp_forward(params, input_vector(t, z, y));
  }
};

struct TrainConfig {
  Manifold manifold = Manifold::Corr;
  std::vector<int> hidden = {512};
  double lr = 1e-3;
  double weight_decay = 0.01;
  int batch = 64;
  int epochs = 200;
  std::uint64_t seed = 0;
  double ridge = 1e-6;
  CovarianceMode cov_mode = CovarianceMode::Full;

  void check() const {
    if (epochs < 1 || batch < 1 || !(lr > 0.0))
      throw InvalidInput("TrainConfig: epochs, batch and lr must be positive");
  }
};

struct CfmPair {
  Vec z0;
  Vec z1;
  int y = 0;
  double t = 0.0;
};

// Euclidean CFM loss over a batch:
// mean_i || u(t_i, (1 - t_i) z0_i + t_i z1_i, y_i) - (z1_i - z0_i) ||^2,
// with gradients accumulated through the network.
inline std::pair<double, MlpGrads> cfm_loss_and_grad(const VectorFieldModel& model,
                                                     const std::vector<CfmPair>& pairs) {
  if (pairs.empty()) throw InvalidInput("cfm_loss_and_grad: empty batch");
  MlpGrads grads = zero_grads_like(model.params);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const CfmPair& p : pairs) {
    Vec zt(p.z0.size());
    for (std::size_t k = 0; k < zt.size(); ++k)
      zt[k] = (1.0 - p.t) * p.z0[k] + p.t * p.z1[k];
    const Vec input = model.input_vector(p.t, zt, p.y);
    const Vec u = mlp_forward(model.params, input);
    Vec residual(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) residual[k] = u[k] - (p.z1[k] - p.z0[k]);
    loss += dot(residual, residual) * inv_n;
    Vec cotangent(residual.size());
    for (std::size_t k = 0; k < residual.size(); ++k) cotangent[k] = 2.0 * residual[k] * inv_n;
    mlp_backward(model.params, input, cotangent, grads);
  }
  if (!std::isfinite(loss)) throw NonFiniteLoss("cfm_loss_and_grad: non-finite loss");
  return {loss, std::move(grads)};
}

struct TrainResult {
  VectorFieldModel model;
  ConditionalGaussianSource source;
  Vec loss_history;  // one mean loss per epoch
};

// CFM training loop. Matrices are embedded once up front; each step draws a
// shuffled batch of target embeddings, pairs them with fresh source draws and
// uniform times, and applies one AdamW update. Single-threaded and
// deterministic given the seed.
inline TrainResult train(const LabeledDataset& data, const TrainConfig& cfg) {
  cfg.check();
  if (data.size() == 0) throw InvalidInput("train: empty dataset");
  if (data.manifold != cfg.manifold)
    throw InvalidInput("train: config manifold does not match dataset");

  const std::size_t n = data.size();
  std::vector<Vec> embeddings;
  embeddings.reserve(n);
  for (const SymMatrix& m : data.matrices) embeddings.push_back(embed(m, data.manifold).values);

  TrainResult result;
  result.source = fit_source(embeddings, data.labels, cfg.ridge, cfg.cov_mode);

  VectorFieldModel& model = result.model;
  model.manifold = data.manifold;
  model.d = data.d;
  model.classes = data.class_set();
  const int de = model.embedded();
  const int in_dim = de + 1 + static_cast<int>(model.classes.size());
  model.params = mlp_init(cfg.seed, in_dim, cfg.hidden, de);

  AdamWState opt = adamw_init(model.params, cfg.lr, cfg.weight_decay);
  Rng rng(cfg.seed, 0x74726e00ULL);  // one stream drives shuffles, t and z0 draws

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t steps = (n + static_cast<std::size_t>(cfg.batch) - 1) /
                            static_cast<std::size_t>(cfg.batch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t begin = s * static_cast<std::size_t>(cfg.batch);
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch));
      std::vector<CfmPair> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        CfmPair pair;
        pair.y = data.labels[i];
        pair.z1 = embeddings[i];
        pair.z0 = sample_source(result.source, pair.y, rng);
        pair.t = rng.uniform();
        batch.push_back(std::move(pair));
      }
      const auto [loss, grads] = cfm_loss_and_grad(model, batch);
      adamw_step(model.params, grads, opt);
      epoch_loss += loss * static_cast<double>(end - begin);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

// Direct evaluation of the Riemannian CFM loss on the manifold, used to check
// that it coincides with the Euclidean loss (oracle-grade cost). For each
// pair: the geodesic point comes from phi^{-1} of the interpolation, its
// velocity from a central time difference, the manifold field from the
// numerically inverted differential, and the norm from the pullback metric.
template <typename Field>
double riemannian_loss_oracle(Field&& field, const std::vector<CfmPair>& pairs, Manifold manifold,
                              int d) {
  if (pairs.empty()) throw InvalidInput("riemannian_loss_oracle: empty batch");
  const double h = 1e-5;
  double total = 0.0;
  for (const CfmPair& p : pairs) {
    auto interp = [&](double t) {
      Vec z(p.z0.size());
      for (std::size_t k = 0; k < z.size(); ++k) z[k] = (1.0 - t) * p.z0[k] + t * p.z1[k];
      return z;
    };
    const Vec zt = interp(p.t);
    const SymMatrix gamma = unembed(EmbeddedVec{manifold, d, zt});
    const SymMatrix gamma_plus = unembed(EmbeddedVec{manifold, d, interp(p.t + h)});
    const SymMatrix gamma_minus = unembed(EmbeddedVec{manifold, d, interp(p.t - h)});
    const SymMatrix gamma_dot = (gamma_plus - gamma_minus) * (0.5 / h);

    const DiffeoJacobian jac(gamma, manifold);
    const SymMatrix u_manifold = jac.solve(field(p.t, zt, p.y));
    const Vec residual_embedded = jac.apply(u_manifold - gamma_dot);
    total += dot(residual_embedded, residual_embedded);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace diffeoflow
