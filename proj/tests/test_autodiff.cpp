#include <doctest.h>

#include "eos/models.hpp"
#include "eos/quadratic.hpp"
#include "test_util.hpp"

using namespace eos;
using namespace eos::testutil;

namespace {

QuadraticSpec diag_quadratic(std::initializer_list<double> eigs) {
  QuadraticSpec spec;
  spec.eigenvalues = Vector(static_cast<Index>(eigs.size()));
  Index i = 0;
  for (double a : eigs) spec.eigenvalues(i++) = a;
  return spec;
}

std::unique_ptr<ModelComputation> random_mlp_computation(
    Activation act, std::vector<int> hidden, std::uint64_t seed, int n = 24,
    int d = 5, int m = 3) {
  auto spec = tiny_mlp(d, m, std::move(hidden), act, seed);
  return build_computation(spec, LossSpec{LossKind::mse, m},
                           tiny_regression(n, d, m, seed + 100));
}

}  // namespace

TEST_CASE("quadratic value, gradient and hvp are exact") {
  auto spec = diag_quadratic({1.0});
  QuadraticComputation f(spec);
  CHECK(f.value(Vector::Constant(1, 2.0)) == 2.0);  // 1/2 * 1 * 2^2

  Rng rng(3);
  QuadraticSpec full = diag_quadratic({4.0, 2.0, 0.5});
  full.linear = random_vector(3, rng);
  QuadraticComputation g(full);
  const Vector x = random_vector(3, rng);
  const Matrix a = full.matrix();
  CHECK(rel_err(g.gradient(x), Vector(a * x + full.linear)) < 1e-15);
  const Vector v = random_vector(3, rng);
  CHECK(rel_err(g.hvp(x, v), Vector(a * v)) < 1e-15);

  // Stationary point of the strictly convex quadratic.
  const Vector x_star = -a.ldlt().solve(full.linear);
  CHECK(g.gradient(x_star).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("value is zero at exact interpolation") {
  // Deep linear net with one layer whose weights equal the generating matrix.
  const auto data = deep_linear_dataset(12, 4, 21);
  ModelSpec spec;
  spec.kind = ModelKind::deep_linear;
  spec.input_dim = 4;
  spec.output_dim = 4;
  spec.activation = Activation::identity;
  spec.init = InitKind::gaussian_1_over_d;
  ModelComputation f(spec, LossSpec{LossKind::mse, 4}, data);
  // Solve X W^T = Y exactly (X has full column rank by construction).
  const Matrix w =
      (data.features.transpose() * data.features)
          .ldlt()
          .solve(data.features.transpose() * data.targets)
          .transpose();
  Vector theta(f.dim());
  f.layout().weight(theta, 0) = w;
  CHECK(f.value(theta) < 1e-20);
}

TEST_CASE("gradient matches central finite differences on tiny MLPs") {
  const Activation acts[] = {Activation::tanh, Activation::elu,
                             Activation::softplus};
  std::uint64_t seed = 40;
  for (Activation act : acts) {
    auto f = random_mlp_computation(act, {8, 6}, seed++);
    Rng rng(seed * 13);
    for (int point = 0; point < 10; ++point) {
      const Vector theta = random_vector(f->dim(), rng, 0.6);
      CHECK(rel_err(f->gradient(theta), fd_gradient(*f, theta)) < 1e-5);
    }
  }
}

TEST_CASE("relu and hardtanh gradients check away from kinks") {
  for (Activation act : {Activation::relu, Activation::hardtanh}) {
    auto f = random_mlp_computation(act, {8}, 77);
    Rng rng(101);
    int checked = 0;
    for (int attempt = 0; attempt < 60 && checked < 10; ++attempt) {
      const Vector theta = random_vector(f->dim(), rng, 0.8);
      // Keep points whose hidden pre-activations are clear of the kinks
      // (the output layer is linear).
      bool near_kink = false;
      {
        const auto w = f->layout().weight(theta, 0);
        const auto b = f->layout().bias(theta, 0);
        Matrix z = f->data().features * w.transpose();
        z.rowwise() += b.transpose();
        if (act == Activation::relu) {
          near_kink = (z.cwiseAbs().array() < 1e-3).any();
        } else {
          near_kink = ((z.array().abs() - 1.0).abs() < 1e-3).any();
        }
      }
      if (near_kink) continue;
      ++checked;
      CHECK(rel_err(f->gradient(theta), fd_gradient(*f, theta)) < 1e-5);
    }
    CHECK(checked >= 5);
  }
}

TEST_CASE("hvp is exact against finite-difference gradients") {
  auto f = random_mlp_computation(Activation::tanh, {10, 7}, 90);
  Rng rng(91);
  for (int point = 0; point < 6; ++point) {
    const Vector theta = random_vector(f->dim(), rng, 0.5);
    const Vector v = random_vector(f->dim(), rng);
    CHECK(rel_err(f->hvp(theta, v), fd_hvp(*f, theta, v)) < 1e-4);
  }
}

TEST_CASE("hvp is symmetric and linear") {
  auto f = random_mlp_computation(Activation::softplus, {9}, 17);
  Rng rng(18);
  const Vector theta = random_vector(f->dim(), rng, 0.5);
  for (int rep = 0; rep < 5; ++rep) {
    const Vector u = random_vector(f->dim(), rng);
    const Vector v = random_vector(f->dim(), rng);
    const double uv = u.dot(f->hvp(theta, v));
    const double vu = v.dot(f->hvp(theta, u));
    CHECK(std::abs(uv - vu) < 1e-8 * std::max(1.0, std::abs(uv)));

    const double alpha = 0.37, beta = -1.91;
    const Vector combo = f->hvp(theta, alpha * u + beta * v);
    const Vector split = alpha * f->hvp(theta, u) + beta * f->hvp(theta, v);
    CHECK(rel_err(combo, split) < 1e-12);
  }
}

TEST_CASE("hvp on a quadratic is the fixed matrix for any theta") {
  Rng rng(5);
  auto spec = diag_quadratic({5.0, 1.0, 0.25, -0.5});
  QuadraticComputation f(spec);
  const Matrix a = spec.matrix();
  for (int rep = 0; rep < 3; ++rep) {
    const Vector theta = random_vector(4, rng, 10.0);
    const Vector v = random_vector(4, rng);
    CHECK(rel_err(f.hvp(theta, v), Vector(a * v)) < 1e-15);
  }
}

TEST_CASE("dense hessian oracle") {
  SUBCASE("matches the quadratic matrix exactly") {
    auto spec = diag_quadratic({3.0, 1.0, 0.5});
    QuadraticComputation f(spec);
    const Matrix h = dense_hessian(f, Vector::Zero(3));
    CHECK((h - spec.matrix()).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("asymmetry before symmetrization is at rounding level") {
    auto f = random_mlp_computation(Activation::tanh, {6}, 55, 16, 4, 2);
    Rng rng(56);
    const Vector theta = random_vector(f->dim(), rng, 0.5);
    const Index p = f->dim();
    Matrix h(p, p);
    Vector unit = Vector::Zero(p);
    for (Index i = 0; i < p; ++i) {
      unit(i) = 1.0;
      h.row(i) = f->hvp(theta, unit).transpose();
      unit(i) = 0.0;
    }
    const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
    CHECK(asym < 1e-8 * h.cwiseAbs().maxCoeff());
  }

  SUBCASE("diagonal matches second-order central differences") {
    auto f = random_mlp_computation(Activation::tanh, {5}, 60, 12, 3, 2);
    Rng rng(61);
    const Vector theta = random_vector(f->dim(), rng, 0.5);
    const Matrix h = dense_hessian(*f, theta);
    for (Index i = 0; i < std::min<Index>(f->dim(), 12); ++i) {
      const double fd = fd_second_diag(*f, theta, i);
      CHECK(std::abs(h(i, i) - fd) < 1e-3 * std::max(1.0, std::abs(fd)));
    }
  }

  SUBCASE("oracle limit is enforced") {
    auto spec = diag_quadratic({1.0, 2.0, 3.0});
    QuadraticComputation f(spec);
    CHECK_THROWS_AS(dense_hessian(f, Vector::Zero(3), 2), std::invalid_argument);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  auto spec = diag_quadratic({1.0, 2.0});
  QuadraticComputation f(spec);
  CHECK_THROWS_AS(f.value(Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(f.gradient(Vector::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(f.hvp(Vector::Zero(2), Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("evaluations are deterministic") {
  auto f = random_mlp_computation(Activation::tanh, {12, 8}, 123);
  Rng rng(124);
  const Vector theta = random_vector(f->dim(), rng, 0.5);
  const Vector v = random_vector(f->dim(), rng);
  CHECK(f->value(theta) == f->value(theta));
  CHECK((f->gradient(theta) - f->gradient(theta)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((f->hvp(theta, v) - f->hvp(theta, v)).cwiseAbs().maxCoeff() == 0.0);
}
