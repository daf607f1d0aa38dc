#include "eos/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace eos {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str(), path.string());
}

Config Config::parse_text(const std::string& text, std::string origin) {
  Config cfg;
  cfg.origin_ = std::move(origin);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(cfg.origin_ + ":" + std::to_string(line_no) +
                               ": expected 'key = value', got: " + stripped);
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = stripped.substr(eq + 1);
    const auto comment = value.find(" #");
    if (comment != std::string::npos) value = value.substr(0, comment);
    value = trim(value);
    if (key.empty()) {
      throw std::runtime_error(cfg.origin_ + ":" + std::to_string(line_no) +
                               ": empty key");
    }
    if (cfg.values_.count(key)) {
      throw std::runtime_error(cfg.origin_ + ": duplicate key: " + key);
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  if (auto it = values_.find(key); it != values_.end()) {
    consumed_.insert(key);
    return true;
  }
  return false;
}

std::string Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::runtime_error("missing config key: " + key);
  }
  consumed_.insert(key);
  return it->second;
}

std::string Config::get_string_or(const std::string& key,
                                  const std::string& fallback) const {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not a number: " + raw);
  }
}

double Config::get_double_or(const std::string& key, double fallback) const {
  consumed_.insert(key);
  return values_.count(key) ? get_double(key) : fallback;
}

long Config::get_long(const std::string& key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t used = 0;
    const long v = std::stol(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not an integer: " + raw);
  }
}

long Config::get_long_or(const std::string& key, long fallback) const {
  consumed_.insert(key);
  return values_.count(key) ? get_long(key) : fallback;
}

bool Config::get_bool_or(const std::string& key, bool fallback) const {
  consumed_.insert(key);
  if (!values_.count(key)) return fallback;
  const std::string raw = get_string(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw std::runtime_error("config key " + key + ": not a boolean: " + raw);
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  const std::string raw = get_string(key);
  std::vector<double> out;
  std::istringstream in(raw);
  std::string token;
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    try {
      out.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + ": not a number: " + token);
    }
  }
  if (out.empty()) throw std::runtime_error("config key " + key + ": empty list");
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  const std::string raw = get_string(key);
  std::vector<int> out;
  std::istringstream in(raw);
  std::string token;
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    try {
      const auto star = token.find('*');
      if (star != std::string::npos) {
        const int value = std::stoi(trim(token.substr(0, star)));
        const int count = std::stoi(trim(token.substr(star + 1)));
        if (count < 1) throw std::invalid_argument(token);
        out.insert(out.end(), count, value);
      } else {
        out.push_back(std::stoi(token));
      }
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + ": bad entry: " + token);
    }
  }
  if (out.empty()) throw std::runtime_error("config key " + key + ": empty list");
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::vector<std::string> Config::unconsumed_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) out.push_back(key);
  }
  return out;
}

std::string Config::echo_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key + " = " + value + "\n";
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

constexpr int kExtraEigs = 5;  // columns eig2..eig6

Dataset build_dataset(const Config& cfg) {
  const std::string kind = cfg.get_string("task.kind");
  const auto seed = static_cast<std::uint64_t>(cfg.get_long_or("seeds.data", 0));
  if (kind == "blobs") {
    return blobs_dataset(static_cast<int>(cfg.get_long("task.n")),
                         static_cast<int>(cfg.get_long("task.d")),
                         static_cast<int>(cfg.get_long("task.classes")),
                         cfg.get_double("task.separation"), seed);
  }
  if (kind == "chebyshev") {
    return chebyshev_dataset(static_cast<int>(cfg.get_long("task.degree")));
  }
  if (kind == "deep_linear") {
    return deep_linear_dataset(static_cast<int>(cfg.get_long("task.n")),
                               static_cast<int>(cfg.get_long("task.d")), seed);
  }
  if (kind == "cifar") {
    ChannelStats stats = kCifar10ChannelStats;
    if (cfg.has("task.channel_means")) {
      const auto m = cfg.get_double_list("task.channel_means");
      const auto s = cfg.get_double_list("task.channel_stds");
      if (m.size() != 3 || s.size() != 3) {
        throw std::runtime_error("task.channel_means/stds need 3 entries");
      }
      stats = {{m[0], m[1], m[2]}, {s[0], s[1], s[2]}};
    }
    return load_cifar_subset(cfg.get_string("task.path"),
                             static_cast<int>(cfg.get_long("task.count")), stats);
  }
  throw std::runtime_error("config key task.kind: unknown task: " + kind);
}

LossSpec build_loss(const Config& cfg, const Dataset& data) {
  LossSpec loss;
  loss.kind = loss_kind_from_string(cfg.get_string("loss.kind"));
  switch (loss.kind) {
    case LossKind::mse:
    case LossKind::cross_entropy:
      loss.classes = static_cast<int>(data.target_dim());
      break;
    case LossKind::logistic:
      loss.classes = 1;
      break;
  }
  return loss;
}

ModelSpec build_model(const Config& cfg, const Dataset& data,
                      const LossSpec& loss) {
  ModelSpec model;
  model.kind = model_kind_from_string(cfg.get_string_or("model.kind", "mlp"));
  model.input_dim = static_cast<int>(data.feature_dim());
  model.output_dim = loss.kind == LossKind::logistic
                         ? 1
                         : static_cast<int>(data.target_dim());
  if (cfg.has("model.hidden")) model.hidden = cfg.get_int_list("model.hidden");
  const std::string default_act =
      model.kind == ModelKind::deep_linear ? "identity" : "tanh";
  model.activation =
      activation_from_string(cfg.get_string_or("model.activation", default_act));
  model.parameterization = parameterization_from_string(
      cfg.get_string_or("model.parameterization", "standard"));
  model.init = init_kind_from_string(
      cfg.get_string_or("model.init", "torch_default_uniform"));
  model.seed = static_cast<std::uint64_t>(cfg.get_long_or("seeds.init", 0));
  model.validate();
  return model;
}

OptimizerSpec build_optimizer(const Config& cfg) {
  OptimizerSpec opt;
  opt.algorithm = algorithm_from_string(cfg.get_string_or("opt.algorithm", "gd"));
  opt.beta = cfg.get_double_or("opt.beta", 0.0);
  const std::string schedule = cfg.get_string_or("opt.schedule", "constant");
  if (schedule == "constant") {
    opt.schedule = Schedule::constant(cfg.get_double("opt.eta"));
  } else if (schedule == "drop") {
    opt.schedule = Schedule::drop(cfg.get_double("opt.eta_before"),
                                  cfg.get_double("opt.eta_after"),
                                  cfg.get_long("opt.drop_step"));
  } else if (schedule == "dynamic") {
    opt.schedule =
        Schedule::dynamic(cfg.get_double_or("opt.dynamic_c", 1.0),
                          static_cast<int>(cfg.get_long_or("opt.refresh_every", 1)));
  } else {
    throw std::runtime_error("config key opt.schedule: unknown schedule: " +
                             schedule);
  }
  opt.batch_size = static_cast<int>(cfg.get_long_or("opt.batch_size", 0));
  opt.shuffle_seed = static_cast<std::uint64_t>(cfg.get_long_or("seeds.shuffle", 0));
  opt.validate();
  return opt;
}

StopCriterion build_stop(const Config& cfg) {
  StopCriterion stop;
  stop.target_accuracy = cfg.get_double_or("stop.target_accuracy", quiet_nan());
  stop.target_loss = cfg.get_double_or("stop.target_loss", quiet_nan());
  stop.max_steps = cfg.get_long_or("stop.max_steps", 100000);
  stop.max_time = cfg.get_double_or("stop.max_time",
                                    std::numeric_limits<double>::infinity());
  return stop;
}

LanczosOptions build_lanczos(const Config& cfg) {
  LanczosOptions opts;
  opts.tol = cfg.get_double_or("diag.lanczos_tol", 1e-6);
  opts.max_iter = static_cast<int>(cfg.get_long_or("diag.lanczos_max_iter", 200));
  opts.seed = static_cast<std::uint64_t>(cfg.get_long_or("seeds.lanczos", 0));
  return opts;
}

double nominal_eta(const OptimizerSpec& opt) {
  switch (opt.schedule.kind) {
    case Schedule::Kind::constant: return opt.schedule.eta;
    case Schedule::Kind::drop: return opt.schedule.eta_after;
    case Schedule::Kind::dynamic: return quiet_nan();
  }
  return quiet_nan();
}

SummaryRow summarize(const std::string& run, const std::string& algorithm,
                     double eta, double beta, double mss_value,
                     const TrainTrace& trace) {
  SummaryRow row;
  row.run = run;
  row.algorithm = algorithm;
  row.eta = eta;
  row.beta = beta;
  row.mss_value = mss_value;
  row.iterations = trace.records.empty() ? 0 : trace.records.back().step;
  row.final_loss = trace.records.empty() ? quiet_nan() : trace.records.back().loss;
  row.final_accuracy =
      trace.records.empty() ? quiet_nan() : trace.records.back().accuracy;
  row.max_sharpness = trace.max_sharpness();
  row.diverged = trace.diverged;
  row.stop_reason = trace.stop_reason;
  if (!std::isnan(mss_value)) {
    row.breakeven_step = detect_breakeven(trace, mss_value);
    if (row.breakeven_step) {
      std::vector<double> post;
      for (const auto& r : trace.records) {
        if (r.has_sharpness() && r.step >= *row.breakeven_step) {
          post.push_back(r.sharpness);
        }
      }
      if (!post.empty()) {
        std::sort(post.begin(), post.end());
        const double median = post[post.size() / 2];
        row.post_breakeven_sharpness_mss_ratio = median / mss_value;
      }
    }
  }
  return row;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path.string());
  out << content;
}

void run_quadratic_mode(const Config& cfg, const std::filesystem::path& dir,
                        RunArtifacts& artifacts) {
  QuadraticSpec spec;
  const auto eigs = cfg.get_double_list("quadratic.eigenvalues");
  spec.eigenvalues = Eigen::Map<const Vector>(eigs.data(), eigs.size());
  if (cfg.has("quadratic.linear")) {
    const auto lin = cfg.get_double_list("quadratic.linear");
    spec.linear = Eigen::Map<const Vector>(lin.data(), lin.size());
  }
  const auto alg =
      algorithm_from_string(cfg.get_string_or("quadratic.algorithm", "gd"));
  const double eta = cfg.get_double("quadratic.eta");
  const double beta = cfg.get_double_or("quadratic.beta", 0.0);
  const int steps = static_cast<int>(cfg.get_long_or("quadratic.steps", 1000));
  Vector x0;
  if (cfg.has("quadratic.x0")) {
    const auto raw = cfg.get_double_list("quadratic.x0");
    x0 = Eigen::Map<const Vector>(raw.data(), raw.size());
  } else {
    x0 = Vector::Ones(spec.dim());
  }

  const auto sim = simulate(alg, spec, eta, beta, x0, steps);

  std::ostringstream coords;
  coords << "step";
  for (Index i = 0; i < spec.dim(); ++i) coords << ",coord" << i + 1;
  coords << "\n";
  for (Index t = 0; t < sim.coords.rows(); ++t) {
    coords << t;
    for (Index i = 0; i < spec.dim(); ++i) {
      coords << "," << format_double(sim.coords(t, i));
    }
    coords << "\n";
  }
  write_file(dir / "coords.csv", coords.str());

  if (cfg.get_bool_or("quadratic.boundary_sweep", false)) {
    // Near-boundary probes on both sides of the MSS for each algorithm.
    std::ostringstream sweep;
    sweep << "algorithm,beta,eigenvalue,mss,side,diverged\n";
    const long bounded_steps = cfg.get_long_or("quadratic.bounded_steps", 10000);
    const long divergent_steps =
        cfg.get_long_or("quadratic.divergent_steps", 100000);
    for (Algorithm a : {Algorithm::gd, Algorithm::polyak, Algorithm::nesterov}) {
      for (double b : {0.0, 0.5, 0.9}) {
        const double bb = a == Algorithm::gd ? 0.0 : b;
        const double threshold = mss(a, eta, bb);
        for (double factor : {1.0 - 1e-3, 1.0 + 1e-3}) {
          QuadraticSpec probe;
          probe.eigenvalues = Vector::Constant(1, threshold * factor);
          const long n = factor < 1.0 ? bounded_steps : divergent_steps;
          const auto r = simulate(a, probe, eta, bb, Vector::Ones(1),
                                  static_cast<int>(n));
          sweep << to_string(a) << "," << format_double(bb) << ","
                << format_double(threshold * factor) << ","
                << format_double(threshold) << ","
                << (factor < 1.0 ? "below" : "above") << ","
                << (r.diverged ? "true" : "false") << "\n";
        }
      }
    }
    write_file(dir / "boundary.csv", sweep.str());
  }

  TrainTrace trace;
  trace.diverged = sim.diverged;
  trace.stop_reason = sim.diverged ? "diverged" : "steps";
  TraceRecord rec;
  rec.step = sim.steps_taken;
  rec.eta = eta;
  trace.records.push_back(rec);
  artifacts.trace = std::move(trace);
  artifacts.summary = summarize("quadratic", to_string(alg), eta, beta,
                                mss(alg, eta, alg == Algorithm::gd ? 0.0 : beta),
                                artifacts.trace);
  artifacts.summary.diverged = sim.diverged;
  artifacts.summary.iterations = sim.steps_taken;
}

}  // namespace

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << "step,time,eta,loss,accuracy,sharpness,eig2,eig3,eig4,eig5,eig6,"
         "diagnostic,value\n";
  for (const auto& r : trace.records) {
    out << r.step << "," << format_double(r.time) << "," << format_double(r.eta)
        << "," << format_double(r.loss) << "," << format_double(r.accuracy)
        << "," << format_double(r.sharpness);
    for (int i = 0; i < kExtraEigs; ++i) {
      out << ",";
      if (i < r.extra_eigs.size()) out << format_double(r.extra_eigs(i));
    }
    out << "," << r.diagnostic << "," << format_double(r.diagnostic_value)
        << "\n";
  }
}

TrainTrace read_trace_csv(std::istream& in) {
  TrainTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace csv");
  const std::string expected =
      "step,time,eta,loss,accuracy,sharpness,eig2,eig3,eig4,eig5,eig6,"
      "diagnostic,value";
  if (trim(line) != expected) {
    throw std::runtime_error("unexpected trace csv header: " + line);
  }
  auto parse_cell = [](const std::string& cell) {
    return cell.empty() ? quiet_nan() : std::stod(cell);
  };
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    cells.resize(13);
    TraceRecord r;
    r.step = std::stol(cells[0]);
    r.time = parse_cell(cells[1]);
    r.eta = parse_cell(cells[2]);
    r.loss = parse_cell(cells[3]);
    r.accuracy = parse_cell(cells[4]);
    r.sharpness = parse_cell(cells[5]);
    std::vector<double> extra;
    for (int i = 0; i < kExtraEigs; ++i) {
      if (!cells[6 + i].empty()) extra.push_back(std::stod(cells[6 + i]));
    }
    if (!extra.empty()) {
      r.extra_eigs = Eigen::Map<const Vector>(extra.data(), extra.size());
    }
    r.diagnostic = cells[11];
    r.diagnostic_value = parse_cell(cells[12]);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "run,algorithm,eta,beta,mss,breakeven_step,"
         "post_breakeven_sharpness_mss_ratio,iterations,final_loss,"
         "final_accuracy,max_sharpness,diverged,stop_reason\n";
  for (const auto& r : rows) {
    out << r.run << "," << r.algorithm << "," << format_double(r.eta) << ","
        << format_double(r.beta) << "," << format_double(r.mss_value) << ",";
    if (r.breakeven_step) out << *r.breakeven_step;
    out << "," << format_double(r.post_breakeven_sharpness_mss_ratio) << ","
        << r.iterations << "," << format_double(r.final_loss) << ","
        << format_double(r.final_accuracy) << ","
        << format_double(r.max_sharpness) << ","
        << (r.diverged ? "true" : "false") << "," << r.stop_reason << "\n";
  }
}

RunArtifacts run_config(const std::filesystem::path& config_path,
                        const std::filesystem::path& out_dir,
                        std::optional<std::uint64_t> seed_override) {
  return run_config_parsed(Config::parse_file(config_path), out_dir,
                           seed_override);
}

RunArtifacts run_config_parsed(Config cfg, const std::filesystem::path& out_dir,
                               std::optional<std::uint64_t> seed_override) {
  if (seed_override) cfg.set("seeds.init", std::to_string(*seed_override));

  std::filesystem::create_directories(out_dir);
  RunArtifacts artifacts;
  artifacts.dir = out_dir;

  const std::string mode = cfg.get_string_or("mode", "train");
  if (mode == "quadratic") {
    run_quadratic_mode(cfg, out_dir, artifacts);
  } else if (mode == "train" || mode == "flow") {
    Dataset data = build_dataset(cfg);
    const LossSpec loss = build_loss(cfg, data);
    const ModelSpec model = build_model(cfg, data, loss);
    if (cfg.get_bool_or("diag.dump_dataset", false)) {
      std::ostringstream dump;
      write_dataset_csv(dump, data);
      write_file(out_dir / "dataset.csv", dump.str());
    }
    auto computation = build_computation(model, loss, std::move(data));

    const LanczosOptions lanczos = build_lanczos(cfg);
    const StopCriterion stop = build_stop(cfg);
    const double save_dt = cfg.get_double_or("diag.save_dt", 0.0);
    const int top_k = static_cast<int>(cfg.get_long_or("diag.top_k", 1));
    std::function<Vector(const Vector&)> projector;
    if (save_dt > 0) {
      const int k = static_cast<int>(cfg.get_long_or("diag.projection_k", 64));
      const auto pseed =
          static_cast<std::uint64_t>(cfg.get_long_or("seeds.projection", 0));
      projector =
          ProjectionBasis::make(k, computation->dim(), pseed).projector();
    }
    const Vector theta0 = init_params(model);

    if (mode == "flow") {
      FlowConfig flow;
      flow.alpha = cfg.get_double_or("flow.alpha", 0.5);
      flow.refresh_every =
          static_cast<int>(cfg.get_long_or("flow.refresh_every", 20));
      flow.stop = stop;
      flow.save_dt = save_dt;
      flow.top_k = top_k;
      flow.lanczos = lanczos;
      const auto unknown = cfg.unconsumed_keys();
      if (!unknown.empty()) {
        throw std::runtime_error("unknown config key: " + unknown.front());
      }
      artifacts.trace = integrate_flow(*computation, theta0, flow, projector);
      artifacts.summary =
          summarize("flow", flow_method_label(model.activation), quiet_nan(),
                    quiet_nan(), quiet_nan(), artifacts.trace);
    } else {
      const OptimizerSpec opt = build_optimizer(cfg);
      TrainOptions options;
      options.stop = stop;
      options.sharpness_cadence =
          static_cast<int>(cfg.get_long_or("diag.sharpness_cadence", 10));
      options.top_k = top_k;
      options.lanczos = lanczos;
      options.record_every =
          static_cast<int>(cfg.get_long_or("diag.record_every", 1));
      options.checkpoint_every =
          static_cast<int>(cfg.get_long_or("diag.checkpoint_every", 0));
      options.projector = projector;
      options.save_dt = save_dt;
      // Approximate sharpness over a leading subset of the examples.
      std::unique_ptr<ModelComputation> measure;
      const long subset = cfg.get_long_or("diag.sharpness_subset", 0);
      if (subset > 0) {
        measure = build_computation(model, loss,
                                    head_subset(computation->data(), subset));
        options.measure_objective = measure.get();
      }
      const auto unknown = cfg.unconsumed_keys();
      if (!unknown.empty()) {
        throw std::runtime_error("unknown config key: " + unknown.front());
      }
      artifacts.trace = train(opt, *computation, theta0, options);
      const double eta = nominal_eta(opt);
      const double threshold =
          std::isnan(eta) ? quiet_nan()
                          : mss(opt.algorithm == Algorithm::sgd ? Algorithm::gd
                                                                : opt.algorithm,
                                eta, opt.beta);
      artifacts.summary = summarize("train", to_string(opt.algorithm), eta,
                                    opt.beta, threshold, artifacts.trace);
    }

    std::ostringstream trace_csv;
    write_trace_csv(trace_csv, artifacts.trace);
    write_file(out_dir / "trace.csv", trace_csv.str());
  } else {
    throw std::runtime_error("config key mode: unknown mode: " + mode);
  }

  std::ostringstream summary_csv;
  write_summary_csv(summary_csv, {artifacts.summary});
  write_file(out_dir / "summary.csv", summary_csv.str());
  write_file(out_dir / "config.cfg", cfg.echo_text());
  return artifacts;
}

std::vector<RunArtifacts> run_sweep(const std::filesystem::path& config_path,
                                    const std::filesystem::path& out_dir,
                                    int jobs) {
  Config base = Config::parse_file(config_path);
  const auto etas = base.get_double_list("sweep.etas");
  if (jobs < 1) jobs = 1;

  std::vector<RunArtifacts> results(etas.size());
  std::vector<std::string> errors(etas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= etas.size()) return;
      try {
        Config cfg = base;  // sweep.etas is already consumed in the copy
        cfg.set("opt.eta", format_double(etas[i]));
        cfg.set("opt.schedule", "constant");
        char name[48];
        std::snprintf(name, sizeof(name), "eta_%g", etas[i]);
        results[i] = run_config_parsed(std::move(cfg), out_dir / name);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(jobs, static_cast<int>(etas.size())); ++j) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) t.join();
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error(err);
  }
  return results;
}

SummaryRow summarize_run_dir(const std::filesystem::path& run_dir) {
  std::ifstream trace_in(run_dir / "trace.csv");
  if (!trace_in) {
    throw std::runtime_error("no trace.csv in " + run_dir.string());
  }
  TrainTrace trace = read_trace_csv(trace_in);
  Config cfg = Config::parse_file(run_dir / "config.cfg");

  const std::string mode = cfg.get_string_or("mode", "train");
  std::string alg = cfg.get_string_or("opt.algorithm", "gd");
  if (mode == "flow") {
    const std::string act = cfg.get_string_or(
        "model.activation",
        cfg.get_string_or("model.kind", "mlp") == "deep_linear" ? "identity"
                                                                : "tanh");
    alg = flow_method_label(activation_from_string(act));
  }
  const double beta = cfg.get_double_or("opt.beta", 0.0);
  const std::string schedule = cfg.get_string_or("opt.schedule", "constant");
  double eta = quiet_nan();
  if (mode != "flow") {
    if (schedule == "constant" && cfg.has("opt.eta")) {
      eta = cfg.get_double("opt.eta");
    } else if (schedule == "drop") {
      eta = cfg.get_double("opt.eta_after");
    }
  }
  double threshold = quiet_nan();
  if (!std::isnan(eta)) {
    threshold = mss(alg == "sgd" ? Algorithm::gd : algorithm_from_string(alg),
                    eta, beta);
  }
  auto row = summarize(run_dir.filename().string(), alg, eta, beta, threshold,
                       trace);
  // Trust the recorded stop over re-derivation when present.
  std::ifstream summary_in(run_dir / "summary.csv");
  if (summary_in) {
    std::string header, line;
    std::getline(summary_in, header);
    if (std::getline(summary_in, line)) {
      const auto last_comma = line.rfind(',');
      if (last_comma != std::string::npos) {
        row.stop_reason = line.substr(last_comma + 1);
        const auto prev = line.rfind(',', last_comma - 1);
        row.diverged = line.substr(prev + 1, last_comma - prev - 1) == "true";
      }
    }
  }
  return row;
}

void write_svg_plot(
    std::ostream& out,
    const std::vector<std::pair<std::string, TrainTrace>>& traces) {
  constexpr int kWidth = 640, kHeight = 280, kPad = 45;
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b"};

  auto panel = [&](double y_offset, bool use_sharpness, const char* title) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [name, trace] : traces) {
      for (const auto& r : trace.records) {
        const double y = use_sharpness ? r.sharpness : r.loss;
        if (std::isnan(y)) continue;
        xmin = std::min(xmin, static_cast<double>(r.step));
        xmax = std::max(xmax, static_cast<double>(r.step));
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    out << "<text x=\"" << kPad << "\" y=\"" << y_offset + 16
        << "\" font-size=\"13\">" << title << "</text>\n";
    int color = 0;
    for (const auto& [name, trace] : traces) {
      out << "<polyline fill=\"none\" stroke=\"" << colors[color % 6]
          << "\" stroke-width=\"1.2\" points=\"";
      for (const auto& r : trace.records) {
        const double y = use_sharpness ? r.sharpness : r.loss;
        if (std::isnan(y)) continue;
        const double px =
            kPad + (r.step - xmin) / (xmax - xmin) * (kWidth - 2 * kPad);
        const double py = y_offset + kHeight - kPad -
                          (y - ymin) / (ymax - ymin) * (kHeight - 2 * kPad);
        out << px << "," << py << " ";
      }
      out << "\"/>\n";
      out << "<text x=\"" << kWidth - kPad + 4 << "\" y=\""
          << y_offset + 30 + 14 * color << "\" font-size=\"11\" fill=\""
          << colors[color % 6] << "\">" << name << "</text>\n";
      ++color;
    }
    char label[64];
    std::snprintf(label, sizeof(label), "[%.4g, %.4g]", ymin, ymax);
    out << "<text x=\"" << kPad << "\" y=\"" << y_offset + kHeight - 8
        << "\" font-size=\"10\">steps " << xmin << ".." << xmax << ", range "
        << label << "</text>\n";
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth + 120
      << "\" height=\"" << 2 * kHeight << "\">\n";
  panel(0, false, "train loss");
  panel(kHeight, true, "sharpness");
  out << "</svg>\n";
}

}  // namespace eos
