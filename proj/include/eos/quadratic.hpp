#pragma once

#include <optional>

#include "eos/autodiff.hpp"

namespace eos {

// f(x) = 1/2 x^T A x + b^T x + c with A = Q diag(a) Q^T. The basis defaults
// to the identity, in which case coordinates and iterates coincide.
struct QuadraticSpec {
  Vector eigenvalues;
  std::optional<Matrix> basis;  // orthonormal columns
  Vector linear;                // empty means zero
  double constant = 0.0;

  Index dim() const { return eigenvalues.size(); }
  Matrix matrix() const;
  Vector linear_or_zero() const;
  void validate() const;
};

// Maximum stable sharpness: gd -> 2/eta, polyak -> (2+2b)/eta,
// nesterov -> (2+2b)/(eta(1+2b)). gd requires beta == 0.
double mss(Algorithm alg, double eta, double beta);

inline constexpr double kDivergenceThreshold = 1e12;

struct SimulationResult {
  // Row t holds the eigenbasis coordinates <q_i, x_t>; row 0 is the start.
  Matrix coords;
  bool diverged = false;
  int steps_taken = 0;
  std::vector<int> divergent_directions;  // coordinates that crossed the threshold

  Vector final_coords() const { return coords.row(coords.rows() - 1); }
};

// Exact recurrences of the named algorithm with velocity initialized to
// zero; halts early once any |coordinate| exceeds the divergence threshold.
SimulationResult simulate(Algorithm alg, const QuadraticSpec& spec, double eta,
                          double beta, const Vector& x0, int steps,
                          double divergence_threshold = kDivergenceThreshold);

// One-dimensional gd iterate x_t = (1 - eta a)^t (x0 - x*) + x*.
double closed_form_gd(double a, double eta, double x0, double x_star, long t);

enum class Stability { stable, divergent };

// Per-eigenvalue verdicts: divergent iff a_i > mss(alg, eta, beta) or a_i < 0.
std::vector<Stability> classify_stability(Algorithm alg,
                                          const QuadraticSpec& spec,
                                          double eta, double beta);

class QuadraticComputation final : public Computation {
 public:
  explicit QuadraticComputation(QuadraticSpec spec);

  Index dim() const override { return a_.rows(); }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  Vector hvp(const Vector& theta, const Vector& v) const override;

  const QuadraticSpec& spec() const { return spec_; }
  const Matrix& hessian() const { return a_; }

 private:
  QuadraticSpec spec_;
  Matrix a_;
  Vector b_;
};

}  // namespace eos
