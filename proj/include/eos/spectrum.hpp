#pragma once

#include <functional>

#include "eos/autodiff.hpp"
#include "eos/models.hpp"

namespace eos {

struct LanczosOptions {
  double tol = 1e-6;       // relative residual target
  int max_iter = 200;
  std::uint64_t seed = 0;  // start-vector seed
};

struct SpectrumResult {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // dim x k, unit-norm columns
  Vector residuals;     // ||Av - lambda v|| per reported pair
  int iterations = 0;
  bool converged = false;

  double top() const { return eigenvalues(0); }
};

using LinearOperator = std::function<Vector(const Vector&)>;

// Lanczos with full reorthogonalization on a symmetric operator; returns the
// k algebraically largest eigenpairs. Non-convergence after max_iter is
// reported through `converged` and the residuals, never silently accepted.
SpectrumResult top_eigs(const LinearOperator& apply, Index dim, int k,
                        const LanczosOptions& opts = {});

SpectrumResult top_eigs(const Computation& f, const Vector& theta, int k,
                        const LanczosOptions& opts = {});

// Top Hessian eigenvalue (the sharpness).
double sharpness(const Computation& f, const Vector& theta,
                 const LanczosOptions& opts = {});

enum class GnWeighting { with_loss_hessian, without_loss_hessian };

// Top eigenvalue of the Gauss-Newton operator (1/n) sum_i J_i^T W_i J_i,
// with W_i the loss Hessian at the logits or the identity. Matrix-free via
// forward-mode JVPs and reverse-mode VJPs.
double gn_top_eig(const ModelComputation& f, const Vector& theta,
                  GnWeighting weighting, const LanczosOptions& opts = {});

}  // namespace eos
