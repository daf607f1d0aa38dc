#include <doctest.h>

#include "eos/optimize.hpp"
#include "eos/quadratic.hpp"
#include "test_util.hpp"

using namespace eos;
using namespace eos::testutil;

namespace {

QuadraticSpec diag_quadratic(std::initializer_list<double> eigs) {
  QuadraticSpec spec;
  spec.eigenvalues = Vector(static_cast<Index>(eigs.size()));
  Index i = 0;
  for (double a : eigs) spec.eigenvalues(i++) = a;
  return spec;
}

OptimizerSpec gd_spec(double eta) {
  OptimizerSpec opt;
  opt.algorithm = Algorithm::gd;
  opt.schedule = Schedule::constant(eta);
  return opt;
}

}  // namespace

TEST_CASE("gd on a quadratic reproduces the simulation bit for bit") {
  auto spec = diag_quadratic({20.0, 1.0, 0.3});
  Rng rng(3);
  spec.linear = random_vector(3, rng);
  QuadraticComputation f(spec);
  const Vector x0 = random_vector(3, rng);

  const double eta = 0.07;
  const auto sim = simulate(Algorithm::gd, spec, eta, 0.0, x0, 40);

  TrainState s = make_state(x0);
  OptimizerSpec opt = gd_spec(eta);
  for (int t = 0; t < 40; ++t) {
    s = step(opt, f, std::move(s), eta);
    for (Index i = 0; i < 3; ++i) CHECK(s.theta(i) == sim.coords(t + 1, i));
  }
}

TEST_CASE("polyak with beta = 0 equals gd exactly") {
  auto spec = diag_quadratic({5.0, 1.0});
  QuadraticComputation f(spec);
  Rng rng(5);
  const Vector x0 = random_vector(2, rng);

  OptimizerSpec gd = gd_spec(0.1);
  OptimizerSpec polyak = gd;
  polyak.algorithm = Algorithm::polyak;

  TrainState a = make_state(x0), b = make_state(x0);
  for (int t = 0; t < 25; ++t) {
    a = step(gd, f, std::move(a), 0.1);
    b = step(polyak, f, std::move(b), 0.1);
    CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("momentum steps follow the two-term recursions per direction") {
  auto spec = diag_quadratic({12.0, 3.0});
  QuadraticComputation f(spec);
  Rng rng(8);
  const Vector x0 = random_vector(2, rng);
  const double eta = 0.04, beta = 0.8;

  for (Algorithm alg : {Algorithm::polyak, Algorithm::nesterov}) {
    OptimizerSpec opt;
    opt.algorithm = alg;
    opt.beta = beta;
    opt.schedule = Schedule::constant(eta);

    std::vector<Vector> iterates{x0};
    TrainState s = make_state(x0);
    for (int t = 0; t < 30; ++t) {
      s = step(opt, f, std::move(s), eta);
      iterates.push_back(s.theta);
    }
    // x_{t+1} = (1+b-na) x_t - b x_{t-1}          (polyak)
    // x_{t+1} = (1+b)(1-na) x_t - b(1-na) x_{t-1} (nesterov)
    for (int t = 1; t < 30; ++t) {
      for (Index i = 0; i < 2; ++i) {
        const double a = spec.eigenvalues(i);
        const double want =
            alg == Algorithm::polyak
                ? (1 + beta - eta * a) * iterates[t](i) - beta * iterates[t - 1](i)
                : (1 + beta) * (1 - eta * a) * iterates[t](i) -
                      beta * (1 - eta * a) * iterates[t - 1](i);
        CHECK(std::abs(iterates[t + 1](i) - want) <=
              1e-10 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST_CASE("sgd with the full batch matches gd bitwise") {
  auto data = tiny_classification(16, 4, 3, 71);
  auto model = tiny_mlp(4, 3, {6}, Activation::tanh, 72);
  auto f = build_computation(model, LossSpec{LossKind::cross_entropy, 3}, data);
  const Vector theta0 = init_params(model);

  OptimizerSpec gd = gd_spec(0.05);
  OptimizerSpec sgd = gd;
  sgd.algorithm = Algorithm::sgd;
  sgd.batch_size = 16;

  TrainOptions options;
  options.stop.max_steps = 40;
  options.sharpness_cadence = 0;
  const auto trace_gd = train(gd, *f, theta0, options);
  for (std::uint64_t seed : {31337ull, 9ull}) {
    sgd.shuffle_seed = seed;
    const auto trace_sgd = train(sgd, *f, theta0, options);
    REQUIRE(trace_gd.records.size() == trace_sgd.records.size());
    for (std::size_t i = 0; i < trace_gd.records.size(); ++i) {
      CHECK(trace_gd.records[i].loss == trace_sgd.records[i].loss);
    }
    CHECK((trace_gd.final_theta - trace_sgd.final_theta).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("sharpness can be measured on a surrogate objective") {
  auto data = tiny_classification(30, 4, 3, 171);
  auto model = tiny_mlp(4, 3, {6}, Activation::tanh, 172);
  auto f = build_computation(model, LossSpec{LossKind::mse, 3}, data);
  auto subset = build_computation(model, LossSpec{LossKind::mse, 3},
                                  head_subset(data, 10));

  TrainOptions options;
  options.stop.max_steps = 20;
  options.sharpness_cadence = 10;
  options.measure_objective = subset.get();
  const auto run = train(gd_spec(0.05), *f, init_params(model), options);

  const Vector theta0 = init_params(model);
  CHECK(run.records.front().sharpness ==
        doctest::Approx(sharpness(*subset, theta0)).epsilon(1e-9));
  CHECK(run.records.front().sharpness != sharpness(*f, theta0));
}

TEST_CASE("sgd batches partition each epoch") {
  auto data = tiny_classification(12, 3, 3, 81);
  auto model = tiny_mlp(3, 3, {4}, Activation::tanh, 82);
  auto f = build_computation(model, LossSpec{LossKind::mse, 3}, data);

  OptimizerSpec sgd = gd_spec(0.01);
  sgd.algorithm = Algorithm::sgd;
  sgd.batch_size = 4;
  // Same seed twice: identical trajectory (batch order is deterministic).
  TrainOptions options;
  options.stop.max_steps = 9;  // three epochs
  options.sharpness_cadence = 0;
  const auto a = train(sgd, *f, init_params(model), options);
  const auto b = train(sgd, *f, init_params(model), options);
  CHECK((a.final_theta - b.final_theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("time equals the running sum of applied step sizes") {
  auto spec = diag_quadratic({1.0});
  QuadraticComputation f(spec);
  OptimizerSpec opt;
  opt.algorithm = Algorithm::gd;
  opt.schedule = Schedule::drop(0.2, 0.05, 3);

  TrainOptions options;
  options.stop.max_steps = 10;
  options.sharpness_cadence = 0;
  const auto trace = train(opt, f, Vector::Ones(1), options);
  double expected = 0.0;
  for (const auto& r : trace.records) {
    CHECK(r.time == expected);
    if (r.step < 10) expected += r.step < 3 ? 0.2 : 0.05;
  }
  CHECK(trace.records.back().step == 10);
}

TEST_CASE("max_steps = 0 yields a single initial record") {
  auto spec = diag_quadratic({2.0});
  QuadraticComputation f(spec);
  TrainOptions options;
  options.stop.max_steps = 0;
  const auto trace = train(gd_spec(0.01), f, Vector::Ones(1), options);
  CHECK(trace.records.size() == 1);
  CHECK(trace.records.front().step == 0);
  CHECK(trace.stop_reason == "max_steps");
}

TEST_CASE("training diverges exactly when some direction is unstable") {
  for (double eta : {0.09, 0.11}) {
    auto spec = diag_quadratic({20.0, 1.0});
    QuadraticComputation f(spec);
    TrainOptions options;
    options.stop.max_steps = 2000;
    options.sharpness_cadence = 0;
    const auto trace = train(gd_spec(eta), f, Vector::Ones(2), options);
    const auto verdicts = classify_stability(Algorithm::gd, spec, eta, 0.0);
    const bool any_divergent =
        std::any_of(verdicts.begin(), verdicts.end(),
                    [](Stability s) { return s == Stability::divergent; });
    CHECK(trace.diverged == any_divergent);
    if (any_divergent) CHECK(trace.stop_reason == "diverged");
  }
}

TEST_CASE("nan gradients halt the loop with a divergence flag") {
  struct NanComputation final : Computation {
    Index dim() const override { return 1; }
    double value(const Vector&) const override { return 1.0; }
    Vector gradient(const Vector&) const override {
      return Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
    }
    Vector hvp(const Vector&, const Vector&) const override {
      return Vector::Zero(1);
    }
  } f;
  TrainOptions options;
  options.stop.max_steps = 50;
  options.sharpness_cadence = 0;
  const auto trace = train(gd_spec(0.1), f, Vector::Ones(1), options);
  CHECK(trace.diverged);
  CHECK(trace.records.back().step <= 1);
}

TEST_CASE("drop schedule switches the step size at the drop step") {
  auto spec = diag_quadratic({1.0});
  QuadraticComputation f(spec);
  OptimizerSpec opt;
  opt.algorithm = Algorithm::gd;
  opt.schedule = Schedule::drop(0.5, 0.125, 4);
  TrainOptions options;
  options.stop.max_steps = 8;
  options.sharpness_cadence = 0;
  const auto trace = train(opt, f, Vector::Ones(1), options);
  for (const auto& r : trace.records) {
    CHECK(r.eta == (r.step < 4 ? 0.5 : 0.125));
  }
}

TEST_CASE("dynamic schedule anneals toward 1/lambda and descends monotonically") {
  auto data = tiny_regression(20, 3, 2, 91);
  auto model = tiny_mlp(3, 2, {8}, Activation::tanh, 92);
  auto f = build_computation(model, LossSpec{LossKind::mse, 2}, data);

  OptimizerSpec opt;
  opt.algorithm = Algorithm::gd;
  opt.schedule = Schedule::dynamic(1.0, 1);
  TrainOptions options;
  options.stop.max_steps = 150;
  options.sharpness_cadence = 1;
  const auto trace = train(opt, *f, init_params(model), options);
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    CHECK(trace.records[i].loss <= trace.records[i - 1].loss * (1 + 1e-12));
  }
  // eta_t tracks the measured sharpness.
  for (const auto& r : trace.records) {
    if (r.has_sharpness() && r.step < 150) {
      CHECK(r.eta == doctest::Approx(1.0 / r.sharpness).epsilon(1e-12));
    }
  }
}

TEST_CASE("pick_drop_step lands 500 past breakeven") {
  TrainTrace trace;
  for (long s : {0, 10, 20, 30}) {
    TraceRecord r;
    r.step = s;
    r.sharpness = 100.0 + s;  // crosses 120 at step 20
    trace.records.push_back(r);
  }
  CHECK(pick_drop_step(trace, 120.0) == 520);
  CHECK_FALSE(pick_drop_step(trace, 1000.0).has_value());
}

TEST_CASE("velocity starts at zero and spec validation guards beta") {
  OptimizerSpec opt;
  opt.algorithm = Algorithm::gd;
  opt.beta = 0.5;
  opt.schedule = Schedule::constant(0.1);
  CHECK_THROWS_AS(opt.validate(), std::invalid_argument);

  TrainState s = make_state(Vector::Ones(3));
  CHECK(s.velocity.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.step == 0);
  CHECK(s.time == 0.0);
}
