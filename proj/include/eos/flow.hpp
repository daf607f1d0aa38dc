#pragma once

#include "eos/optimize.hpp"

namespace eos {

struct FlowConfig {
  double alpha = 0.5;     // RK step size is alpha / (most recent sharpness)
  int refresh_every = 20; // RK steps between sharpness refreshes
  double h_growth_limit = 2.0;  // max step-size growth between refreshes
  StopCriterion stop;
  double save_dt = 0.0;   // projection/save grid in time units; 0 disables
  int top_k = 1;
  LanczosOptions lanczos;
  double divergence_threshold = 1e12;

  void validate() const;  // requires alpha in (0, 2)
};

// One classical fourth-order Runge-Kutta step of d theta / dt = -grad f.
Vector rk4_step(const Computation& f, const Vector& theta, double h);

// Trace label for a flow run: "gradient_flow" when the objective is
// continuously differentiable, plain "runge_kutta" for relu/hardtanh nets
// where a unique flow trajectory need not exist.
std::string flow_method_label(Activation activation);

// Time-indexed trace of the gradient flow ODE; sharpness is re-measured on
// cadence and the step size clamped so save-grid times are hit exactly.
// Records are written at refresh and save points.
TrainTrace integrate_flow(
    const Computation& f, const Vector& theta0, const FlowConfig& cfg,
    const std::function<Vector(const Vector&)>& projector = {},
    const std::function<void(long, double, const Vector&)>& measure_hook = {});

}  // namespace eos
