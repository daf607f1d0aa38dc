#include "eos/quadratic.hpp"

#include <cmath>

namespace eos {

Matrix QuadraticSpec::matrix() const {
  if (basis) {
    return *basis * eigenvalues.asDiagonal() * basis->transpose();
  }
  return Matrix(eigenvalues.asDiagonal());
}

Vector QuadraticSpec::linear_or_zero() const {
  if (linear.size() == 0) return Vector::Zero(dim());
  return linear;
}

void QuadraticSpec::validate() const {
  const Index d = dim();
  if (d < 1) throw std::invalid_argument("quadratic needs >= 1 eigenvalue");
  if (linear.size() != 0 && linear.size() != d) {
    throw std::invalid_argument("quadratic linear term has wrong length");
  }
  if (basis) {
    if (basis->rows() != d || basis->cols() != d) {
      throw std::invalid_argument("quadratic basis has wrong shape");
    }
    const double err =
        (basis->transpose() * *basis - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (err > 1e-10) {
      throw std::invalid_argument("quadratic basis is not orthonormal");
    }
  }
}

double mss(Algorithm alg, double eta, double beta) {
  if (eta <= 0) throw std::invalid_argument("mss: eta must be positive");
  if (beta < 0 || beta >= 1) throw std::invalid_argument("mss: beta in [0,1)");
  switch (alg) {
    case Algorithm::gd:
    case Algorithm::sgd:
      if (beta != 0) throw std::invalid_argument("mss: gd forces beta = 0");
      return 2.0 / eta;
    case Algorithm::polyak:
      return (2.0 + 2.0 * beta) / eta;
    case Algorithm::nesterov:
      return (2.0 + 2.0 * beta) / (eta * (1.0 + 2.0 * beta));
  }
  throw std::logic_error("unknown algorithm");
}

SimulationResult simulate(Algorithm alg, const QuadraticSpec& spec, double eta,
                          double beta, const Vector& x0, int steps,
                          double divergence_threshold) {
  spec.validate();
  if (alg == Algorithm::sgd) throw std::invalid_argument("simulate: gd/polyak/nesterov only");
  if (x0.size() != spec.dim()) throw std::invalid_argument("simulate: x0 has wrong length");
  if (eta <= 0) throw std::invalid_argument("simulate: eta must be positive");
  if (beta < 0 || beta >= 1) throw std::invalid_argument("simulate: beta in [0,1)");
  if (alg == Algorithm::gd && beta != 0) {
    throw std::invalid_argument("simulate: gd forces beta = 0");
  }

  const Index d = spec.dim();
  // Work in the eigenbasis: every direction evolves independently, and the
  // per-coordinate arithmetic matches the optimizer's update exactly.
  Vector y = spec.basis ? Vector(spec.basis->transpose() * x0) : x0;
  Vector b = spec.linear.size() == 0
                 ? Vector::Zero(d)
                 : (spec.basis ? Vector(spec.basis->transpose() * spec.linear)
                               : spec.linear);
  Vector v = Vector::Zero(d);

  SimulationResult out;
  out.coords.resize(steps + 1, d);
  out.coords.row(0) = y.transpose();

  int t = 0;
  for (; t < steps; ++t) {
    for (Index i = 0; i < d; ++i) {
      const double a = spec.eigenvalues(i);
      switch (alg) {
        case Algorithm::gd: {
          const double g = a * y(i) + b(i);
          y(i) = y(i) - eta * g;
          break;
        }
        case Algorithm::polyak: {
          const double g = a * y(i) + b(i);
          v(i) = beta * v(i) - eta * g;
          y(i) += v(i);
          break;
        }
        case Algorithm::nesterov: {
          const double look = y(i) + beta * v(i);
          const double g = a * look + b(i);
          v(i) = beta * v(i) - eta * g;
          y(i) += v(i);
          break;
        }
        default:
          break;
      }
    }
    out.coords.row(t + 1) = y.transpose();
    bool tripped = false;
    for (Index i = 0; i < d; ++i) {
      if (std::abs(y(i)) > divergence_threshold || !std::isfinite(y(i))) {
        out.divergent_directions.push_back(static_cast<int>(i));
        tripped = true;
      }
    }
    if (tripped) {
      out.diverged = true;
      ++t;
      break;
    }
  }
  out.steps_taken = t;
  out.coords.conservativeResize(t + 1, d);
  return out;
}

double closed_form_gd(double a, double eta, double x0, double x_star, long t) {
  return std::pow(1.0 - eta * a, static_cast<double>(t)) * (x0 - x_star) + x_star;
}

std::vector<Stability> classify_stability(Algorithm alg,
                                          const QuadraticSpec& spec,
                                          double eta, double beta) {
  const double threshold = mss(alg, eta, beta);
  std::vector<Stability> verdicts;
  verdicts.reserve(spec.dim());
  for (Index i = 0; i < spec.dim(); ++i) {
    const double a = spec.eigenvalues(i);
    verdicts.push_back(a > threshold || a < 0 ? Stability::divergent
                                              : Stability::stable);
  }
  return verdicts;
}

QuadraticComputation::QuadraticComputation(QuadraticSpec spec)
    : spec_(std::move(spec)) {
  spec_.validate();
  a_ = spec_.matrix();
  b_ = spec_.linear_or_zero();
}

double QuadraticComputation::value(const Vector& theta) const {
  require_dim(theta, "value");
  return 0.5 * theta.dot(a_ * theta) + b_.dot(theta) + spec_.constant;
}

Vector QuadraticComputation::gradient(const Vector& theta) const {
  require_dim(theta, "gradient");
  return a_ * theta + b_;
}

Vector QuadraticComputation::hvp(const Vector& theta, const Vector& v) const {
  require_dim(theta, "hvp");
  require_dim(v, "hvp direction");
  return a_ * v;
}

}  // namespace eos
