#pragma once

#include <random>

#include "eos/autodiff.hpp"
#include "eos/models.hpp"

namespace eos::testutil {

// Central-difference gradient oracle with per-coordinate step
// h_i = scale * (1 + |theta_i|); depends only on f.value.
inline Vector fd_gradient(const Computation& f, const Vector& theta,
                          double scale = 1e-4) {
  Vector g(theta.size());
  Vector probe = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    const double h = scale * (1.0 + std::abs(theta(i)));
    probe(i) = theta(i) + h;
    const double up = f.value(probe);
    probe(i) = theta(i) - h;
    const double down = f.value(probe);
    probe(i) = theta(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// Central-difference Hessian-vector oracle built on exact gradients.
inline Vector fd_hvp(const Computation& f, const Vector& theta, const Vector& v,
                     double eps = 1e-5) {
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  const double h = eps / scale;
  return (f.gradient(theta + h * v) - f.gradient(theta - h * v)) / (2.0 * h);
}

// Second-order central difference of f along coordinate i.
inline double fd_second_diag(const Computation& f, const Vector& theta, Index i,
                             double h = 1e-3) {
  Vector probe = theta;
  const double mid = f.value(theta);
  probe(i) = theta(i) + h;
  const double up = f.value(probe);
  probe(i) = theta(i) - h;
  const double down = f.value(probe);
  return (up - 2.0 * mid + down) / (h * h);
}

inline Vector random_vector(Index n, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> gauss(0.0, stddev);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = gauss(rng);
  return v;
}

// Small synthetic regression set for derivative checks.
inline Dataset tiny_regression(int n, int d, int m, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.kind = Dataset::Kind::regression;
  data.features = Matrix::NullaryExpr(
      n, d, [&](Index, Index) { return std::normal_distribution<double>()(rng); });
  data.targets = Matrix::NullaryExpr(
      n, m, [&](Index, Index) { return std::normal_distribution<double>()(rng); });
  data.provenance = "tiny_regression";
  return data;
}

inline Dataset tiny_classification(int n, int d, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.kind = Dataset::Kind::classification;
  data.features = Matrix::NullaryExpr(
      n, d, [&](Index, Index) { return std::normal_distribution<double>()(rng); });
  data.targets = Matrix::Zero(n, classes);
  data.labels.resize(n);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  for (int i = 0; i < n; ++i) {
    data.labels[i] = pick(rng);
    data.targets(i, data.labels[i]) = 1.0;
  }
  data.provenance = "tiny_classification";
  return data;
}

inline ModelSpec tiny_mlp(int d, int m, std::vector<int> hidden, Activation act,
                          std::uint64_t seed) {
  ModelSpec spec;
  spec.kind = ModelKind::mlp;
  spec.input_dim = d;
  spec.output_dim = m;
  spec.hidden = std::move(hidden);
  spec.activation = act;
  spec.seed = seed;
  return spec;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

inline double rel_err(const Vector& got, const Vector& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

}  // namespace eos::testutil
