#include <doctest.h>

#include "eos/losses.hpp"
#include "test_util.hpp"

using namespace eos;

TEST_CASE("mse at a one-hot-matching output is exactly zero") {
  LossSpec spec{LossKind::mse, 3};
  Vector z(3), target(3);
  z << 0, 1, 0;
  target << 0, 1, 0;
  const auto eval = loss_eval(spec, z, target);
  CHECK(eval.value == 0.0);
  CHECK(eval.grad.norm() == 0.0);
  CHECK((eval.hess - Matrix::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("cross entropy at uniform binary logits") {
  LossSpec spec{LossKind::cross_entropy, 2};
  Vector z = Vector::Zero(2);
  const auto eval = loss_eval(spec, z, 0);
  CHECK(eval.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Matrix want(2, 2);
  want << 0.25, -0.25, -0.25, 0.25;
  CHECK((eval.hess - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("logistic at z=0, y=1") {
  LossSpec spec{LossKind::logistic, 1};
  Vector z = Vector::Zero(1);
  const auto eval = loss_eval(spec, z, 1);
  CHECK(eval.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(eval.hess(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("margins") {
  LossSpec ce{LossKind::cross_entropy, 3};
  Vector z(3);
  z << 3, 1, 0;
  CHECK(margin(ce, z, 0) == doctest::Approx(2.0));
  CHECK(margin(ce, Vector::Zero(3), 1) == doctest::Approx(0.0));

  LossSpec logit{LossKind::logistic, 1};
  CHECK(margin(logit, Vector::Constant(1, -2.0), -1) == doctest::Approx(2.0));

  LossSpec mse{LossKind::mse, 3};
  CHECK_THROWS_AS(margin(mse, z, 0), std::invalid_argument);
}

TEST_CASE("cross entropy hessian is PSD and annihilates the ones vector") {
  Rng rng(7);
  LossSpec spec{LossKind::cross_entropy, 6};
  for (int rep = 0; rep < 20; ++rep) {
    Vector z = testutil::random_vector(6, rng, 3.0);
    const auto eval = loss_eval(spec, z, rep % 6);
    CHECK((eval.hess * Vector::Ones(6)).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(eval.hess);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("logistic second derivative lies in (0, 1/4]") {
  LossSpec spec{LossKind::logistic, 1};
  for (double z : {-30.0, -3.0, -0.5, 0.0, 0.5, 3.0, 30.0}) {
    for (int y : {-1, 1}) {
      const auto eval = loss_eval(spec, Vector::Constant(1, z), y);
      CHECK(eval.hess(0, 0) > 0.0);
      CHECK(eval.hess(0, 0) <= 0.25);
    }
  }
}

TEST_CASE("loss derivatives match finite differences") {
  Rng rng(11);
  auto check = [&](const LossSpec& spec, const Vector& z, auto label) {
    const auto eval = loss_eval(spec, z, label);
    const double h = 1e-6;
    for (Index i = 0; i < z.size(); ++i) {
      Vector up = z, down = z;
      up(i) += h;
      down(i) -= h;
      const double fd = (loss_eval(spec, up, label).value -
                         loss_eval(spec, down, label).value) /
                        (2 * h);
      CHECK(std::abs(fd - eval.grad(i)) < 1e-6 * std::max(1.0, std::abs(eval.grad(i))));
      const Vector gfd = (loss_eval(spec, up, label).grad -
                          loss_eval(spec, down, label).grad) /
                         (2 * h);
      CHECK((gfd - eval.hess.col(i)).cwiseAbs().maxCoeff() < 1e-6);
    }
  };
  for (int rep = 0; rep < 5; ++rep) {
    check(LossSpec{LossKind::cross_entropy, 4}, testutil::random_vector(4, rng), rep % 4);
    check(LossSpec{LossKind::logistic, 1}, testutil::random_vector(1, rng),
          rep % 2 == 0 ? 1 : -1);
    check(LossSpec{LossKind::mse, 3}, testutil::random_vector(3, rng),
          Vector(testutil::random_vector(3, rng)));
  }
}

TEST_CASE("cross entropy decreases strictly as the margin grows") {
  LossSpec spec{LossKind::cross_entropy, 4};
  Vector z(4);
  z << 0.3, -0.2, 0.9, 0.1;
  double prev = loss_eval(spec, z, 2).value;
  for (int k = 0; k < 8; ++k) {
    z(2) += 0.5;
    const double cur = loss_eval(spec, z, 2).value;
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("large margins do not overflow cross entropy") {
  LossSpec spec{LossKind::cross_entropy, 3};
  Vector z(3);
  z << 5000.0, -2000.0, 0.0;
  const auto eval = loss_eval(spec, z, 0);
  CHECK(std::isfinite(eval.value));
  CHECK(eval.value >= 0.0);
  CHECK(eval.hess.allFinite());
}

TEST_CASE("invalid labels are rejected") {
  LossSpec ce{LossKind::cross_entropy, 3};
  CHECK_THROWS_AS(loss_eval(ce, Vector::Zero(3), 3), std::invalid_argument);
  CHECK_THROWS_AS(loss_eval(ce, Vector::Zero(3), -1), std::invalid_argument);
  LossSpec logit{LossKind::logistic, 1};
  CHECK_THROWS_AS(loss_eval(logit, Vector::Zero(1), 0), std::invalid_argument);
}
