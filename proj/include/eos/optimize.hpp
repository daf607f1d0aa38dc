#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "eos/autodiff.hpp"
#include "eos/spectrum.hpp"

namespace eos {

struct Schedule {
  enum class Kind { constant, drop, dynamic };

  Kind kind = Kind::constant;
  double eta = 0.0;                          // constant
  double eta_before = 0.0, eta_after = 0.0;  // drop
  long drop_step = 0;
  double c = 1.0;                            // dynamic: eta_t = c / lambda_t
  int refresh_every = 1;

  static Schedule constant(double eta);
  static Schedule drop(double eta_before, double eta_after, long drop_step);
  static Schedule dynamic(double c, int refresh_every = 1);
  void validate() const;
};

struct OptimizerSpec {
  Algorithm algorithm = Algorithm::gd;
  double beta = 0.0;  // zero for gd/sgd
  Schedule schedule;
  int batch_size = 0;  // sgd only
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct TrainState {
  Vector theta;
  Vector velocity;
  long step = 0;
  double time = 0.0;  // running sum of applied step sizes
};

TrainState make_state(Vector theta0);

// One exact update of the named algorithm. For sgd, pass the batch rows; all
// other algorithms ignore them and use the full objective.
TrainState step(const OptimizerSpec& opt, const Computation& f, TrainState s,
                double eta, std::span<const int> batch = {});

struct TraceRecord {
  long step = 0;
  double time = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double loss = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double sharpness = std::numeric_limits<double>::quiet_NaN();
  Vector extra_eigs;  // eigenvalues 2..k when more than one was requested
  std::string diagnostic;
  double diagnostic_value = std::numeric_limits<double>::quiet_NaN();

  bool has_sharpness() const { return !std::isnan(sharpness); }
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  // (grid time, projected coordinates) pairs saved at multiples of save_dt.
  std::vector<std::pair<double, Vector>> projections;
  std::vector<std::pair<long, Vector>> checkpoints;
  Vector final_theta;
  bool diverged = false;
  std::string stop_reason;

  const TraceRecord& last() const { return records.back(); }
  double final_loss() const { return records.back().loss; }
  // Running max over measured sharpness values; NaN if none measured.
  double max_sharpness() const;
};

struct StopCriterion {
  double target_accuracy = std::numeric_limits<double>::quiet_NaN();
  double target_loss = std::numeric_limits<double>::quiet_NaN();
  long max_steps = 100000;
  double max_time = std::numeric_limits<double>::infinity();  // flow only

  bool met(double loss, double accuracy) const;
};

struct TrainOptions {
  StopCriterion stop;
  int sharpness_cadence = 10;  // steps between eigensolves; 0 disables
  int top_k = 1;
  LanczosOptions lanczos;
  // When set, eigensolves run against this objective instead of the trained
  // one (e.g. a leading-subset approximation of an expensive loss).
  const Computation* measure_objective = nullptr;
  double divergence_threshold = 1e12;  // on max |theta_i|
  int record_every = 1;
  // When set, M*theta is saved at grid times j * save_dt (the step closest
  // to t/eta under the active step size).
  std::function<Vector(const Vector&)> projector;
  double save_dt = 0.0;
  int checkpoint_every = 0;
  // Called at every sharpness measurement with (step, time, theta).
  std::function<void(long, double, const Vector&)> measure_hook;
};

// Full training loop: applies the schedule, measures sharpness on cadence,
// records one row per `record_every` steps and stops on the criterion, on
// divergence (NaN gradient or iterate blow-up) or at max_steps.
TrainTrace train(const OptimizerSpec& opt, const Computation& f,
                 const Vector& theta0, const TrainOptions& options);

// Drop-schedule helper: first step 500 past the trace's breakeven point.
std::optional<long> pick_drop_step(const TrainTrace& trace, double mss_value);

}  // namespace eos
