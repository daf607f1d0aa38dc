#include "eos/flow.hpp"

#include <cmath>

namespace eos {

void FlowConfig::validate() const {
  if (alpha <= 0 || alpha >= 2) {
    throw std::invalid_argument("flow: alpha must lie in (0, 2)");
  }
  if (refresh_every < 1) throw std::invalid_argument("flow: refresh_every >= 1");
  if (h_growth_limit <= 1) throw std::invalid_argument("flow: h_growth_limit > 1");
  if (save_dt < 0) throw std::invalid_argument("flow: save_dt >= 0");
}

std::string flow_method_label(Activation activation) {
  switch (activation) {
    case Activation::relu:
    case Activation::hardtanh:
      return "runge_kutta";
    default:
      return "gradient_flow";
  }
}

Vector rk4_step(const Computation& f, const Vector& theta, double h) {
  if (h <= 0) throw std::invalid_argument("rk4_step: h must be positive");
  Vector k1 = -f.gradient(theta);
  Vector k2 = -f.gradient(theta + (0.5 * h) * k1);
  Vector k3 = -f.gradient(theta + (0.5 * h) * k2);
  Vector k4 = -f.gradient(theta + h * k3);
  return theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

struct FlowEval {
  const ModelComputation* model;
  const Computation& f;

  explicit FlowEval(const Computation& comp)
      : model(dynamic_cast<const ModelComputation*>(&comp)), f(comp) {}

  std::pair<double, double> loss_and_accuracy(const Vector& theta) const {
    if (model) return model->loss_and_accuracy(theta);
    return {f.value(theta), std::numeric_limits<double>::quiet_NaN()};
  }
};

}  // namespace

TrainTrace integrate_flow(
    const Computation& f, const Vector& theta0, const FlowConfig& cfg,
    const std::function<Vector(const Vector&)>& projector,
    const std::function<void(long, double, const Vector&)>& measure_hook) {
  cfg.validate();
  if (theta0.size() != f.dim()) {
    throw std::invalid_argument("integrate_flow: theta0 has wrong length");
  }

  FlowEval eval(f);
  TrainTrace trace;
  Vector theta = theta0;
  double t = 0.0;
  long rk_steps = 0;
  long next_save = 0;

  auto measure = [&](bool record_sharpness) -> double {
    auto spectrum = top_eigs(f, theta, cfg.top_k, cfg.lanczos);
    if (measure_hook) measure_hook(rk_steps, t, theta);
    const auto [loss, accuracy] = eval.loss_and_accuracy(theta);
    TraceRecord rec;
    rec.step = rk_steps;
    rec.time = t;
    rec.loss = loss;
    rec.accuracy = accuracy;
    if (record_sharpness) {
      rec.sharpness = spectrum.top();
      if (cfg.top_k > 1) {
        rec.extra_eigs = spectrum.eigenvalues.tail(spectrum.eigenvalues.size() - 1);
      }
    }
    trace.records.push_back(std::move(rec));
    return spectrum.top();
  };

  auto record_plain = [&]() {
    const auto [loss, accuracy] = eval.loss_and_accuracy(theta);
    TraceRecord rec;
    rec.step = rk_steps;
    rec.time = t;
    rec.loss = loss;
    rec.accuracy = accuracy;
    trace.records.push_back(std::move(rec));
  };

  auto save_point = [&]() {
    if (cfg.save_dt <= 0) return;
    const double grid_time = next_save * cfg.save_dt;
    if (t + 1e-12 * std::max(1.0, grid_time) >= grid_time) {
      if (projector) trace.projections.emplace_back(grid_time, projector(theta));
      ++next_save;
    }
  };

  const double lambda0 = measure(true);
  if (lambda0 <= 0) {
    throw std::runtime_error("integrate_flow: nonpositive initial sharpness");
  }
  double h = cfg.alpha / lambda0;
  trace.records.back().eta = h;
  save_point();

  while (true) {
    const auto& last = trace.records.back();
    if (cfg.stop.met(last.loss, last.accuracy)) {
      trace.stop_reason = "target";
      break;
    }
    if (t >= cfg.stop.max_time) {
      trace.stop_reason = "max_time";
      break;
    }
    if (rk_steps >= cfg.stop.max_steps) {
      trace.stop_reason = "max_steps";
      break;
    }

    // Clamp so the next save-grid time is hit exactly.
    double h_step = h;
    bool at_save = false;
    if (cfg.save_dt > 0) {
      const double grid_time = next_save * cfg.save_dt;
      if (grid_time - t <= h_step * (1 + 1e-12)) {
        h_step = grid_time - t;
        at_save = true;
      }
    }
    theta = rk4_step(f, theta, h_step);
    t = at_save ? next_save * cfg.save_dt : t + h_step;
    ++rk_steps;

    if (!theta.allFinite() ||
        theta.cwiseAbs().maxCoeff() > cfg.divergence_threshold) {
      trace.diverged = true;
      record_plain();
      trace.stop_reason = "diverged";
      trace.final_theta = theta;
      break;
    }

    const bool refresh = rk_steps % cfg.refresh_every == 0;
    if (refresh) {
      const double fresh = measure(true);
      trace.records.back().eta = h;
      if (fresh > 0) {
        h = std::min(cfg.alpha / fresh, h * cfg.h_growth_limit);
      }
    }
    if (at_save) {
      if (!refresh) record_plain();
      save_point();
    }
  }
  if (trace.final_theta.size() == 0) trace.final_theta = theta;
  return trace;
}

}  // namespace eos
