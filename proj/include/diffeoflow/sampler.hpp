#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffeoflow/flow.hpp"
#include "diffeoflow/manifold.hpp"
#include "diffeoflow/pullback.hpp"
#include "diffeoflow/rng.hpp"

namespace diffeoflow {

enum class Scheme { Euler, Midpoint, Rk4 };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Euler: return "euler";
    case Scheme::Midpoint: return "midpoint";
    default: return "rk4";
  }
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "euler") return Scheme::Euler;
  if (s == "midpoint") return Scheme::Midpoint;
  if (s == "rk4") return Scheme::Rk4;
  throw InvalidInput("unknown scheme: " + s);
}

struct IntegratorSpec {
  Scheme scheme = Scheme::Rk4;
  int steps = 100;

  void check() const {
    if (steps < 1) throw InvalidInput("IntegratorSpec: steps must be >= 1");
  }
};

// Explicit Butcher tableau; shared between the Euclidean integrator and the
// Riemannian oracle so both run literally the same scheme.
struct ButcherTableau {
  std::vector<double> c;               // stage times
  std::vector<std::vector<double>> a;  // strictly lower stage weights
  std::vector<double> b;               // combination weights
};

inline ButcherTableau tableau(Scheme s) {
  switch (s) {
    case Scheme::Euler:
      return {{0.0}, {{}}, {1.0}};
    case Scheme::Midpoint:
      return {{0.0, 0.5}, {{}, {0.5}}, {0.0, 1.0}};
    default:
      return {{0.0, 0.5, 0.5, 1.0},
              {{}, {0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}},
              {1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0}};
  }
}

namespace detail {

constexpr double kDivergenceBound = 1e6;

inline void check_state(const Vec& z, int step) {
  if (!all_finite(z) || max_abs(z) > kDivergenceBound)
    throw DivergedTrajectory("integrate: trajectory diverged", step);
}

}  // namespace detail

// Fixed-step explicit Runge-Kutta integration of dz/dt = field(t, z, y) from
// t = 0 to t = 1 with step h = 1/L. Returns z(1).
template <typename Field>
Vec integrate(Field&& field, const Vec& z0, int y, const IntegratorSpec& spec) {
  spec.check();
  const ButcherTableau tab = tableau(spec.scheme);
  const double h = 1.0 / static_cast<double>(spec.steps);
  Vec z = z0;
  detail::check_state(z, 0);
  for (int step = 0; step < spec.steps; ++step) {
    const double t = static_cast<double>(step) * h;
    std::vector<Vec> k;
    k.reserve(tab.b.size());
    for (std::size_t stage = 0; stage < tab.b.size(); ++stage) {
      Vec zs = z;
      for (std::size_t j = 0; j < stage; ++j)
        if (tab.a[stage][j] != 0.0) axpy(h * tab.a[stage][j], k[j], zs);
      k.push_back(field(t + tab.c[stage] * h, zs, y));
      if (!all_finite(k.back())) throw DivergedTrajectory("integrate: non-finite velocity", step);
    }
    for (std::size_t stage = 0; stage < tab.b.size(); ++stage)
      if (tab.b[stage] != 0.0) axpy(h * tab.b[stage], k[stage], z);
    detail::check_state(z, step + 1);
  }
  return z;
}

// Draws n class-y samples: source draw, ODE integration in E, then phi^{-1}.
// Every output is manifold-valid by construction; there is no projection.
// Each sample consumes its own RNG stream derived from the seed, so results
// do not depend on sampling order.
inline std::vector<SymMatrix> sample_manifold(const VectorFieldModel& model,
                                              const ConditionalGaussianSource& src, int y, int n,
                                              const IntegratorSpec& spec, std::uint64_t seed) {
  if (src.dim() != model.embedded())
    throw InvalidInput("sample_manifold: source dimension does not match model");
  model.class_index(y);  // validates the label
  auto field = [&model](double t, const Vec& z, int label) {
    return model.velocity(t, z, label);
  };
  std::vector<SymMatrix> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, 0x73616d00ULL + static_cast<std::uint64_t>(i));
    const Vec z0 = sample_source(src, y, rng);
    Vec z1 = integrate(field, z0, y, spec);
    out.push_back(unembed(EmbeddedVec{model.manifold, model.d, std::move(z1)}));
  }
  return out;
}

// Runs the same Runge-Kutta scheme directly on the manifold: stage velocities
// come from the numerically inverted differential, intermediate points from
// the pullback exponential, stage tangents are parallel-transported back to
// the step's base point, and the tableau combination is applied there.
// Returns all iterates including the starting point. Oracle-grade cost.
template <typename Field>
std::vector<SymMatrix> riemannian_rk_iterates(Field&& field, const SymMatrix& x0, int y,
                                              Manifold manifold, const IntegratorSpec& spec) {
  spec.check();
  const ButcherTableau tab = tableau(spec.scheme);
  const double h = 1.0 / static_cast<double>(spec.steps);
  const int d = x0.dim();

  std::vector<SymMatrix> iterates;
  iterates.push_back(x0);
  SymMatrix x = x0;
  for (int step = 0; step < spec.steps; ++step) {
    const double t = static_cast<double>(step) * h;
    const DiffeoJacobian jac_base(x, manifold);
    std::vector<SymMatrix> transported;  // stage tangents at the base point
    transported.reserve(tab.b.size());
    for (std::size_t stage = 0; stage < tab.b.size(); ++stage) {
      SymMatrix offset(d);
      bool moved = false;
      for (std::size_t j = 0; j < stage; ++j)
        if (tab.a[stage][j] != 0.0) {
          offset += tab.a[stage][j] * transported[j];
          moved = true;
        }
      const SymMatrix xs = moved ? pullback_exp(x, h * offset, manifold) : x;
      const DiffeoJacobian jac_stage(xs, manifold);
      const SymMatrix k_stage = jac_stage.solve(field(t + tab.c[stage] * h,
                                                      embed(xs, manifold).values, y));
      // PT back to the base point: identity on the embedded representation.
      const Vec k_embedded = pullback_pt(xs, x, k_stage, manifold);
      transported.push_back(jac_base.solve(k_embedded));
    }
    SymMatrix update(d);
    for (std::size_t stage = 0; stage < tab.b.size(); ++stage)
      if (tab.b[stage] != 0.0) update += tab.b[stage] * transported[stage];
    x = pullback_exp(x, h * update, manifold);
    iterates.push_back(x);
  }
  return iterates;
}

inline std::vector<SymMatrix> riemannian_rk_oracle(const VectorFieldModel& model,
                                                   const SymMatrix& x0, int y,
                                                   const IntegratorSpec& spec) {
  auto field = [&model](double t, const Vec& z, int label) {
    return model.velocity(t, z, label);
  };
  return riemannian_rk_iterates(field, x0, y, model.manifold, spec);
}

}  // namespace diffeoflow
