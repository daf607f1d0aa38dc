#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>

#include "eos/diagnostics.hpp"
#include "eos/flow.hpp"
#include "eos/quadratic.hpp"

namespace eos {

// Flat `key = value` configuration with dotted section keys. Blank lines and
// lines starting with '#' are ignored; inline ` # ` comments are stripped.
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path);
  static Config parse_text(const std::string& text,
                           std::string origin = "<memory>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key,
                            const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long get_long(const std::string& key) const;
  long get_long_or(const std::string& key, long fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  // Comma-separated ints; `v*k` tokens repeat v k times (deep stacks).
  std::vector<int> get_int_list(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  // Keys never read by any accessor; used to reject misspelled configs.
  std::vector<std::string> unconsumed_keys() const;
  const std::string& origin() const { return origin_; }
  std::string echo_text() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
  std::string origin_;
};

struct SummaryRow {
  std::string run;
  std::string algorithm;
  double eta = quiet_nan();
  double beta = quiet_nan();
  double mss_value = quiet_nan();
  std::optional<long> breakeven_step;
  double post_breakeven_sharpness_mss_ratio = quiet_nan();
  long iterations = 0;
  double final_loss = quiet_nan();
  double final_accuracy = quiet_nan();
  double max_sharpness = quiet_nan();
  bool diverged = false;
  std::string stop_reason;
};

struct RunArtifacts {
  std::filesystem::path dir;
  TrainTrace trace;
  SummaryRow summary;
};

// Executes one config into out_dir: writes trace.csv (coords.csv and
// boundary.csv for quadratic mode), summary.csv and config.cfg. Divergence
// is a recorded finding, not an error. The seed override replaces
// seeds.init.
RunArtifacts run_config(const std::filesystem::path& config_path,
                        const std::filesystem::path& out_dir,
                        std::optional<std::uint64_t> seed_override = {});
RunArtifacts run_config_parsed(Config cfg, const std::filesystem::path& out_dir,
                               std::optional<std::uint64_t> seed_override = {});

// Fans sweep.etas out into one run directory per step size (shared data
// seed), executing up to `jobs` runs concurrently.
std::vector<RunArtifacts> run_sweep(const std::filesystem::path& config_path,
                                    const std::filesystem::path& out_dir,
                                    int jobs = 1);

// trace.csv schema: step,time,eta,loss,accuracy,sharpness,eig2..eig6,
// diagnostic,value - fixed order, empty cells for unmeasured fields, LF
// endings, '.' decimal separator.
void write_trace_csv(std::ostream& out, const TrainTrace& trace);
TrainTrace read_trace_csv(std::istream& in);

// Rebuilds a comparison row from a finished run directory (trace.csv +
// config.cfg).
SummaryRow summarize_run_dir(const std::filesystem::path& run_dir);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

// Best-effort SVG line chart (loss and sharpness against step).
void write_svg_plot(std::ostream& out,
                    const std::vector<std::pair<std::string, TrainTrace>>& traces);

// Round-trip double formatting shared by all CSV writers ('%.17g', NaN -> "").
std::string format_double(double v);

}  // namespace eos
