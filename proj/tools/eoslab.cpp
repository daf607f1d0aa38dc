// Command-line front end: config-driven training, gradient-flow, quadratic
// stability, diagnostics and reporting runs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "eos/runner.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "runs/out";
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "config file path")->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "override seeds.init");
}

std::optional<std::uint64_t> seed_of(const CommonArgs& args) {
  if (args.seed < 0) return std::nullopt;
  return static_cast<std::uint64_t>(args.seed);
}

int run_one(const CommonArgs& args, const std::string& expected_mode) {
  eos::Config cfg = eos::Config::parse_file(args.config);
  const std::string mode = cfg.get_string_or("mode", expected_mode);
  if (mode != expected_mode) {
    throw std::runtime_error("config mode is '" + mode + "', subcommand wants '" +
                             expected_mode + "'");
  }
  cfg.set("mode", expected_mode);
  auto artifacts = eos::run_config_parsed(std::move(cfg), args.out, seed_of(args));
  std::cout << "run " << artifacts.dir.string() << ": stop="
            << artifacts.summary.stop_reason
            << " diverged=" << (artifacts.summary.diverged ? "true" : "false")
            << " final_loss=" << eos::format_double(artifacts.summary.final_loss)
            << "\n";
  return 0;
}

int run_diagnose(const CommonArgs& args) {
  // A training run followed by the measurement battery at the final iterate,
  // appended to the trace as diagnostic rows.
  eos::Config cfg = eos::Config::parse_file(args.config);
  cfg.set("mode", "train");
  const auto battery = cfg.get_string_or(
      "diag.run", "effective_smoothness,taylor_probe,expected_loss_change");
  const double probe_eta = cfg.get_double_or("diag.probe_eta", 0.0);
  const int probe_steps = static_cast<int>(cfg.get_long_or("diag.probe_steps", 100));
  const int mc_samples = static_cast<int>(cfg.get_long_or("diag.mc_samples", 100));
  const int mc_batch = static_cast<int>(cfg.get_long_or("diag.mc_batch", 32));

  auto artifacts = eos::run_config_parsed(cfg, args.out, seed_of(args));
  const auto& trace = artifacts.trace;
  if (trace.final_theta.size() == 0) {
    throw std::runtime_error("diagnose: run produced no final iterate");
  }

  // Rebuild the objective exactly as the run did.
  eos::Config echo = eos::Config::parse_file(fs::path(args.out) / "config.cfg");
  eos::Dataset data = [&] {
    const std::string kind = echo.get_string("task.kind");
    const auto seed = static_cast<std::uint64_t>(echo.get_long_or("seeds.data", 0));
    if (kind == "blobs") {
      return eos::blobs_dataset(
          static_cast<int>(echo.get_long("task.n")),
          static_cast<int>(echo.get_long("task.d")),
          static_cast<int>(echo.get_long("task.classes")),
          echo.get_double("task.separation"), seed);
    }
    if (kind == "chebyshev") {
      return eos::chebyshev_dataset(static_cast<int>(echo.get_long("task.degree")));
    }
    if (kind == "deep_linear") {
      return eos::deep_linear_dataset(static_cast<int>(echo.get_long("task.n")),
                                      static_cast<int>(echo.get_long("task.d")),
                                      seed);
    }
    throw std::runtime_error("diagnose: unsupported task: " + kind);
  }();
  eos::LossSpec loss;
  loss.kind = eos::loss_kind_from_string(echo.get_string("loss.kind"));
  loss.classes = loss.kind == eos::LossKind::logistic
                     ? 1
                     : static_cast<int>(data.target_dim());
  eos::ModelSpec model;
  model.kind = eos::model_kind_from_string(echo.get_string_or("model.kind", "mlp"));
  model.input_dim = static_cast<int>(data.feature_dim());
  model.output_dim = loss.kind == eos::LossKind::logistic
                         ? 1
                         : static_cast<int>(data.target_dim());
  if (echo.has("model.hidden")) model.hidden = echo.get_int_list("model.hidden");
  model.activation = eos::activation_from_string(echo.get_string_or(
      "model.activation",
      model.kind == eos::ModelKind::deep_linear ? "identity" : "tanh"));
  model.parameterization = eos::parameterization_from_string(
      echo.get_string_or("model.parameterization", "standard"));
  model.init = eos::init_kind_from_string(
      echo.get_string_or("model.init", "torch_default_uniform"));
  model.seed = static_cast<std::uint64_t>(echo.get_long_or("seeds.init", 0));
  auto f = eos::build_computation(model, loss, std::move(data));

  const eos::Vector& theta = trace.final_theta;
  const double eta =
      probe_eta > 0 ? probe_eta : trace.records.back().eta;
  eos::TrainTrace annotated = trace;
  auto add = [&](const std::string& name, double value) {
    eos::TraceRecord rec;
    rec.step = trace.records.back().step;
    rec.time = trace.records.back().time;
    rec.diagnostic = name;
    rec.diagnostic_value = value;
    annotated.records.push_back(std::move(rec));
    std::cout << name << " = " << eos::format_double(value) << "\n";
  };

  std::istringstream battery_in(battery);
  std::string item;
  while (std::getline(battery_in, item, ',')) {
    if (item == "effective_smoothness") {
      add("effective_smoothness", eos::effective_smoothness(*f, theta, eta));
    } else if (item == "taylor_probe") {
      const auto probe = eos::taylor_probe(*f, theta, eta, probe_steps);
      add("taylor_probe_final_loss", probe.losses.back());
    } else if (item == "expected_loss_change") {
      const auto est = eos::expected_loss_change(
          *f, theta, eta, std::min<int>(mc_batch, static_cast<int>(f->n_examples())),
          mc_samples, 1234);
      add("expected_loss_change_mean", est.mean);
      add("expected_loss_change_stderr", est.stderr_);
    } else if (item == "gn_snapshot") {
      const auto snap = eos::gn_snapshot(*f, theta);
      add("gn_snapshot_hessian_top", snap.hessian_top);
      add("gn_snapshot_gn_top", snap.gn_top);
      add("gn_snapshot_jtj_top", snap.jtj_top);
    } else if (!item.empty()) {
      throw std::runtime_error("diagnose: unknown battery item: " + item);
    }
  }

  std::ofstream out(fs::path(args.out) / "trace.csv", std::ios::binary);
  eos::write_trace_csv(out, annotated);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-of-stability training laboratory"};
  app.require_subcommand(1);

  CommonArgs train_args, flow_args, quad_args, diag_args, sweep_args;
  int jobs = 1;

  auto* train_cmd = app.add_subcommand("train", "run a training config");
  add_common(train_cmd, train_args);
  auto* flow_cmd = app.add_subcommand("flow", "integrate the gradient flow ODE");
  add_common(flow_cmd, flow_args);
  auto* quad_cmd = app.add_subcommand("quadratic", "quadratic dynamics and boundary sweep");
  add_common(quad_cmd, quad_args);
  auto* diag_cmd = app.add_subcommand("diagnose", "training run plus measurement battery");
  add_common(diag_cmd, diag_args);
  auto* sweep_cmd = app.add_subcommand("sweep", "fan a config out over sweep.etas");
  add_common(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--jobs", jobs, "parallel workers");

  std::string summarize_out = "summary.csv";
  std::vector<std::string> run_dirs;
  auto* summarize_cmd = app.add_subcommand("summarize", "comparison CSV across runs");
  summarize_cmd->add_option("--out", summarize_out, "output CSV path");
  summarize_cmd->add_option("dirs", run_dirs, "run directories")->required();

  std::string plot_out = "plot.svg";
  std::vector<std::string> plot_traces;
  auto* plot_cmd = app.add_subcommand("plot", "SVG chart from trace CSVs");
  plot_cmd->add_option("--out", plot_out, "output SVG path");
  plot_cmd->add_option("traces", plot_traces, "trace.csv files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return run_one(train_args, "train");
    if (flow_cmd->parsed()) return run_one(flow_args, "flow");
    if (quad_cmd->parsed()) return run_one(quad_args, "quadratic");
    if (diag_cmd->parsed()) return run_diagnose(diag_args);
    if (sweep_cmd->parsed()) {
      auto results = eos::run_sweep(sweep_args.config, sweep_args.out, jobs);
      for (const auto& r : results) {
        std::cout << "run " << r.dir.string() << ": stop=" << r.summary.stop_reason
                  << " final_loss=" << eos::format_double(r.summary.final_loss)
                  << "\n";
      }
      return 0;
    }
    if (summarize_cmd->parsed()) {
      std::vector<eos::SummaryRow> rows;
      for (const auto& dir : run_dirs) rows.push_back(eos::summarize_run_dir(dir));
      std::ofstream out(summarize_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + summarize_out);
      eos::write_summary_csv(out, rows);
      std::cout << "wrote " << summarize_out << " (" << rows.size() << " rows)\n";
      return 0;
    }
    if (plot_cmd->parsed()) {
      std::vector<std::pair<std::string, eos::TrainTrace>> traces;
      for (const auto& path : plot_traces) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path);
        traces.emplace_back(fs::path(path).parent_path().filename().string(),
                            eos::read_trace_csv(in));
      }
      std::ofstream out(plot_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + plot_out);
      eos::write_svg_plot(out, traces);
      std::cout << "wrote " << plot_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
