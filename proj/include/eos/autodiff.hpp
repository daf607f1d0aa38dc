#pragma once

#include <span>

#include "eos/common.hpp"

namespace eos {

// A differentiable scalar objective f(theta) over a flat fp64 parameter
// vector. Implementations are immutable after construction and safe to
// evaluate from several threads at once; every evaluation owns its scratch.
//
// Determinism contract: identical theta yields bitwise-identical value,
// gradient and hvp. NaN/Inf are propagated, never masked.
class Computation {
 public:
  virtual ~Computation() = default;

  virtual Index dim() const = 0;
  virtual double value(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;

  // Exact Hessian-vector product (algorithmic second derivative, not finite
  // differences), correct up to fp rounding.
  virtual Vector hvp(const Vector& theta, const Vector& v) const = 0;

 protected:
  void require_dim(const Vector& v, const char* what) const;
};

// Objectives of the form (1/n) sum_i loss_i(theta) that can be restricted to
// a batch of example rows (SGD steps, Monte Carlo loss-change probes).
class BatchedComputation : public Computation {
 public:
  virtual Index n_examples() const = 0;
  virtual double batch_value(const Vector& theta,
                             std::span<const int> batch) const = 0;
  virtual Vector batch_gradient(const Vector& theta,
                                std::span<const int> batch) const = 0;
};

inline constexpr Index kDenseHessianLimit = 2000;

// Dense-Hessian oracle for small models: row i is hvp(theta, e_i), and the
// result is symmetrized as (H + H^T) / 2. Throws if dim exceeds `limit`.
Matrix dense_hessian(const Computation& f, const Vector& theta,
                     Index limit = kDenseHessianLimit);

}  // namespace eos
