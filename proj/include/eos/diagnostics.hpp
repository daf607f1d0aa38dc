#pragma once

#include <optional>

#include "eos/models.hpp"
#include "eos/optimize.hpp"

namespace eos {

// Fixed random projection M (k x P, i.i.d. standard normal) used to compare
// trajectories without storing full weight vectors.
struct ProjectionBasis {
  Matrix m;
  std::uint64_t seed = 0;

  static ProjectionBasis make(int k, Index p, std::uint64_t seed);
  Vector project(const Vector& theta) const { return m * theta; }
  std::function<Vector(const Vector&)> projector() const;
};

// First recorded step whose measured sharpness reaches mss_value.
std::optional<long> detect_breakeven(const TrainTrace& trace, double mss_value);

// Euclidean distance between saved projections at each shared grid time.
// Throws if the traces share no grid times.
std::vector<std::pair<double, double>> projected_distance(const TrainTrace& a,
                                                          const TrainTrace& b);

// Max top-eigenvalue over `grid` points spaced evenly on the segment
// [theta_a, theta_b] (endpoints included when the segment degenerates).
double between_iterate_sharpness(const Computation& f, const Vector& theta_a,
                                 const Vector& theta_b, int grid = 8,
                                 const LanczosOptions& opts = {});

// Grid approximation of sup_{gamma in (0, alpha]} of
// ||grad f(theta) - grad f(theta - gamma g)|| / ||gamma g||, g = grad f(theta).
// Throws if the gradient vanishes.
double effective_smoothness(const Computation& f, const Vector& theta,
                            double alpha, int grid = 10);

struct TaylorProbe {
  std::vector<double> losses;    // quadratic-model losses q(x_t); entry 0 is f(theta0)
  std::vector<Vector> iterates;  // x_t, entry 0 is theta0
};

// gd on the quadratic Taylor model around theta0:
// x_{t+1} = x_t - eta (g0 + H0 (x_t - theta0)), H0 applied via hvp at the
// frozen point; stops early once the model loss is no longer finite.
TaylorProbe taylor_probe(const Computation& f, const Vector& theta0, double eta,
                         int steps);

struct GnSnapshot {
  double hessian_top = 0.0;
  double gn_top = 0.0;
  double jtj_top = 0.0;          // Gauss-Newton without the loss Hessian
  Vector margins;                // per example
  Vector loss_hessian_scalars;   // p_y (1 - p_y) per example
};

// Gauss-Newton decomposition snapshot; cross_entropy and logistic only.
GnSnapshot gn_snapshot(const ModelComputation& f, const Vector& theta,
                       const LanczosOptions& opts = {});

struct LossChangeEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
};

// Monte Carlo estimate of E[f(theta - eta ghat_B) - f(theta)] over uniform
// batches of the given size, with the standard error of the mean.
LossChangeEstimate expected_loss_change(const BatchedComputation& f,
                                        const Vector& theta, double eta,
                                        int batch_size, int n_samples,
                                        std::uint64_t seed);

}  // namespace eos
