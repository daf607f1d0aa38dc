#include "eos/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eos {

Schedule Schedule::constant(double eta) {
  Schedule s;
  s.kind = Kind::constant;
  s.eta = eta;
  return s;
}

Schedule Schedule::drop(double eta_before, double eta_after, long drop_step) {
  Schedule s;
  s.kind = Kind::drop;
  s.eta_before = eta_before;
  s.eta_after = eta_after;
  s.drop_step = drop_step;
  return s;
}

Schedule Schedule::dynamic(double c, int refresh_every) {
  Schedule s;
  s.kind = Kind::dynamic;
  s.c = c;
  s.refresh_every = refresh_every;
  return s;
}

void Schedule::validate() const {
  switch (kind) {
    case Kind::constant:
      if (eta <= 0) throw std::invalid_argument("schedule: eta must be positive");
      break;
    case Kind::drop:
      if (eta_before <= 0 || eta_after <= 0) {
        throw std::invalid_argument("schedule: drop step sizes must be positive");
      }
      if (drop_step < 0) throw std::invalid_argument("schedule: drop_step < 0");
      break;
    case Kind::dynamic:
      if (c <= 0) throw std::invalid_argument("schedule: dynamic c must be positive");
      if (refresh_every < 1) {
        throw std::invalid_argument("schedule: refresh_every must be >= 1");
      }
      break;
  }
}

void OptimizerSpec::validate() const {
  schedule.validate();
  if (beta < 0 || beta >= 1) throw std::invalid_argument("optimizer: beta in [0,1)");
  if ((algorithm == Algorithm::gd || algorithm == Algorithm::sgd) && beta != 0) {
    throw std::invalid_argument("optimizer: gd/sgd force beta = 0");
  }
  if (algorithm == Algorithm::sgd && batch_size < 0) {
    throw std::invalid_argument("optimizer: batch_size < 0");
  }
}

TrainState make_state(Vector theta0) {
  TrainState s;
  s.velocity = Vector::Zero(theta0.size());
  s.theta = std::move(theta0);
  return s;
}

TrainState step(const OptimizerSpec& opt, const Computation& f, TrainState s,
                double eta, std::span<const int> batch) {
  switch (opt.algorithm) {
    case Algorithm::gd: {
      Vector g = f.gradient(s.theta);
      s.theta -= eta * g;
      break;
    }
    case Algorithm::polyak: {
      Vector g = f.gradient(s.theta);
      s.velocity = opt.beta * s.velocity - eta * g;
      s.theta += s.velocity;
      break;
    }
    case Algorithm::nesterov: {
      Vector lookahead = s.theta + opt.beta * s.velocity;
      Vector g = f.gradient(lookahead);
      s.velocity = opt.beta * s.velocity - eta * g;
      s.theta += s.velocity;
      break;
    }
    case Algorithm::sgd: {
      const auto* batched = dynamic_cast<const BatchedComputation*>(&f);
      if (!batched) {
        throw std::invalid_argument("sgd needs a batch-capable objective");
      }
      Vector g = batch.empty() ? batched->gradient(s.theta)
                               : batched->batch_gradient(s.theta, batch);
      s.theta -= eta * g;
      break;
    }
  }
  ++s.step;
  s.time += eta;
  return s;
}

double TrainTrace::max_sharpness() const {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : records) {
    if (r.has_sharpness() && (std::isnan(best) || r.sharpness > best)) {
      best = r.sharpness;
    }
  }
  return best;
}

bool StopCriterion::met(double loss, double accuracy) const {
  if (!std::isnan(target_loss) && loss <= target_loss) return true;
  if (!std::isnan(target_accuracy) && !std::isnan(accuracy) &&
      accuracy >= target_accuracy) {
    return true;
  }
  return false;
}

namespace {

// Fixed shuffled partition, reshuffled each epoch; batch rows are returned
// sorted so summation order never depends on the shuffle.
class SgdBatcher {
 public:
  SgdBatcher(Index n, int batch, std::uint64_t seed)
      : order_(static_cast<std::size_t>(n)), batch_(batch), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    pos_ = order_.size();  // shuffle on first use
  }

  std::span<const int> next() {
    if (pos_ >= order_.size()) {
      shuffle_in_place(order_, rng_);
      pos_ = 0;
    }
    const std::size_t take = std::min<std::size_t>(batch_, order_.size() - pos_);
    current_.assign(order_.begin() + pos_, order_.begin() + pos_ + take);
    std::sort(current_.begin(), current_.end());
    pos_ += take;
    return current_;
  }

 private:
  std::vector<int> order_;
  std::vector<int> current_;
  std::size_t batch_;
  std::size_t pos_;
  Rng rng_;
};

struct Evaluator {
  const Computation& f;
  const ModelComputation* model;

  explicit Evaluator(const Computation& comp)
      : f(comp), model(dynamic_cast<const ModelComputation*>(&comp)) {}

  std::pair<double, double> loss_and_accuracy(const Vector& theta) const {
    if (model) return model->loss_and_accuracy(theta);
    return {f.value(theta), std::numeric_limits<double>::quiet_NaN()};
  }
};

}  // namespace

TrainTrace train(const OptimizerSpec& opt, const Computation& f,
                 const Vector& theta0, const TrainOptions& options) {
  opt.validate();
  if (theta0.size() != f.dim()) {
    throw std::invalid_argument("train: theta0 has wrong length");
  }
  if (options.measure_objective && options.measure_objective->dim() != f.dim()) {
    throw std::invalid_argument("train: measurement objective dimension differs");
  }
  const bool dynamic = opt.schedule.kind == Schedule::Kind::dynamic;
  const bool wants_projection = options.projector && options.save_dt > 0;
  if (wants_projection && opt.schedule.kind != Schedule::Kind::constant) {
    throw std::invalid_argument(
        "projection grid needs a constant step size (time grid = step grid)");
  }

  Evaluator eval(f);
  std::unique_ptr<SgdBatcher> batcher;
  if (opt.algorithm == Algorithm::sgd) {
    const auto* batched = dynamic_cast<const BatchedComputation*>(&f);
    if (!batched) throw std::invalid_argument("sgd needs a batch-capable objective");
    const int batch = opt.batch_size > 0
                          ? opt.batch_size
                          : static_cast<int>(batched->n_examples());
    batcher = std::make_unique<SgdBatcher>(batched->n_examples(), batch,
                                           opt.shuffle_seed);
  }

  TrainTrace trace;
  TrainState state = make_state(theta0);
  double lambda_latest = std::numeric_limits<double>::quiet_NaN();
  long next_save = 0;  // projection grid index

  for (long t = 0;; ++t) {
    const auto [loss, accuracy] = eval.loss_and_accuracy(state.theta);
    if (!std::isfinite(loss)) trace.diverged = true;

    const bool cadence_hit =
        options.sharpness_cadence > 0 && t % options.sharpness_cadence == 0;
    const bool dynamic_refresh =
        dynamic && (std::isnan(lambda_latest) ||
                    t % opt.schedule.refresh_every == 0);
    double measured = std::numeric_limits<double>::quiet_NaN();
    Vector extra;
    if ((cadence_hit || dynamic_refresh) && !trace.diverged) {
      const Computation& measure_f =
          options.measure_objective ? *options.measure_objective : f;
      auto spectrum = top_eigs(measure_f, state.theta, options.top_k, options.lanczos);
      measured = spectrum.top();
      lambda_latest = measured;
      if (options.top_k > 1) {
        extra = spectrum.eigenvalues.tail(spectrum.eigenvalues.size() - 1);
      }
      if (options.measure_hook) options.measure_hook(t, state.time, state.theta);
    }

    double eta = 0;
    switch (opt.schedule.kind) {
      case Schedule::Kind::constant: eta = opt.schedule.eta; break;
      case Schedule::Kind::drop:
        eta = t < opt.schedule.drop_step ? opt.schedule.eta_before
                                         : opt.schedule.eta_after;
        break;
      case Schedule::Kind::dynamic:
        eta = opt.schedule.c / lambda_latest;
        break;
    }

    const bool stopping = trace.diverged || options.stop.met(loss, accuracy) ||
                          t >= options.stop.max_steps;
    if (t % options.record_every == 0 || cadence_hit || stopping) {
      TraceRecord rec;
      rec.step = t;
      rec.time = state.time;
      rec.eta = eta;
      rec.loss = loss;
      rec.accuracy = accuracy;
      rec.sharpness = cadence_hit ? measured : std::numeric_limits<double>::quiet_NaN();
      rec.extra_eigs = extra;
      trace.records.push_back(std::move(rec));
    }
    if (wants_projection) {
      const double grid_time = next_save * options.save_dt;
      const long grid_step = std::llround(grid_time / opt.schedule.eta);
      if (t == grid_step) {
        trace.projections.emplace_back(grid_time, options.projector(state.theta));
        ++next_save;
      }
    }
    if (options.checkpoint_every > 0 && t % options.checkpoint_every == 0) {
      trace.checkpoints.emplace_back(t, state.theta);
    }

    if (stopping) {
      if (trace.diverged) {
        trace.stop_reason = "diverged";
      } else if (options.stop.met(loss, accuracy)) {
        trace.stop_reason = "target";
      } else {
        trace.stop_reason = "max_steps";
      }
      trace.final_theta = state.theta;
      break;
    }

    state = batcher ? step(opt, f, std::move(state), eta, batcher->next())
                    : step(opt, f, std::move(state), eta);
    if (!state.theta.allFinite() ||
        state.theta.cwiseAbs().maxCoeff() > options.divergence_threshold) {
      trace.diverged = true;
    }
  }
  return trace;
}

std::optional<long> pick_drop_step(const TrainTrace& trace, double mss_value) {
  for (const auto& r : trace.records) {
    if (r.has_sharpness() && r.sharpness >= mss_value) return r.step + 500;
  }
  return std::nullopt;
}

}  // namespace eos
