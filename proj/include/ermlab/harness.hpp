#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ermlab/config.hpp"
#include "ermlab/erm.hpp"
#include "ermlab/fixed_points.hpp"
#include "ermlab/geometry.hpp"
#include "ermlab/sim.hpp"

namespace ermlab {

enum class ExperimentKind { rates, two_point, shift_bound, width_profile };

std::string to_string(ExperimentKind kind);

struct TargetSpec {
  std::string kind = "zero";  // zero | sparse | direction | rank1
  int sparsity = 1;
  double scale = 1.0;  // fraction of the body radius
};

struct ExperimentConfig {
  std::string config_id = "custom";
  std::string preset;
  ExperimentKind kind = ExperimentKind::rates;

  BodyKind body_kind = BodyKind::l1_ball;
  int d = 64;
  int p = 6;
  int q = 6;
  double radius = 1.0;

  DesignKind design = DesignKind::gaussian;
  NoiseKind noise = NoiseKind::gaussian_noise;

  std::vector<int> grid_N{64};
  std::vector<double> grid_sigma{1.0};
  std::vector<int> grid_d;  // empty: {d}; ignored for maxnorm bodies

  int trials = 1;
  std::uint64_t seed = 1;
  TargetSpec target;

  std::string solver = "auto";  // auto | apg | factorized | frank_wolfe
  ErmConfig erm;
  SolverConfig fixed_point;
  int width_trials = 400;
  RateConstants constants;
  double kG = 1.783;

  bool iso_check = false;
  // lambda = scale * predicted rate; iso_holds uses scale 1 if listed, else the first.
  std::vector<double> iso_lambda_scales{1.0};
  int iso_directions = 32;
  int iso_steps = 200;

  bool check_kernel_bound = false;
  int kernel_directions = 1000;

  bool record_timing = false;

  // Demo kinds.
  std::vector<double> demo_alphas{0.05, 0.1, 0.25, 0.5, 0.75};
  std::vector<double> demo_shifts{0.0, 0.5, 1.0, 1.5, 2.0};
  int demo_draws = 100000;
  int demo_grid = 12;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  /// Every field as a flat key/value map (the fully-defaulted echo).
  FlatConfig to_flat() const;

  /// Defaults, then the constants file, then the preset named by `preset`,
  /// then the remaining keys. Unknown keys are rejected.
  static ExperimentConfig from_flat(const FlatConfig& flat, const std::string& constants_path = "");

  ConvexBody body_for(int dim) const;
  std::vector<int> dims() const;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();
/// The flat keys a preset sets (on top of defaults and constants).
FlatConfig preset_flat(const std::string& name);
ExperimentConfig preset(const std::string& name, const std::string& constants_path = "");

/// Path of the versioned constants file shipped with the sources.
std::string default_constants_path();
FlatConfig load_constants(const std::string& path = "");

struct ResultRow {
  std::string config_id;
  int cell = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  int N = 0;
  int d = 0;
  int p = 0;
  int q = 0;
  double sigma = 0.0;
  double excess_risk = 0.0;
  double predicted_rate = 0.0;
  std::string regime;
  double s_star = 0.0;
  double r_star = 0.0;
  int iso_holds = -1;  // -1: not checked
  double runtime_ms = 0.0;

  // Not part of the CSV.
  std::string error;
  std::vector<double> worst_ratios;  // one per iso lambda scale
  double kernel_diameter = -1.0;
  bool kernel_violation = false;
};

extern const char* const kCsvHeader;

std::string format_csv_row(const ResultRow& row);
std::string format_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);
std::vector<ResultRow> read_csv(const std::string& path);

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::string csv;           // rows, or the demo table for demo kinds
  std::string summary_json;
  std::string config_echo;
  int failures = 0;

  int exit_code() const { return failures > 0 ? 3 : 0; }
};

/// Runs the experiment. Row failures are recorded, never thrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes results.csv, summary.json and config.echo into `dir`.
void write_outputs(const ExperimentResult& result, const std::string& dir);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Least squares of log(y) on log(x) over the distinct x values.
FitResult fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Groups rows by `x_field`, takes the median of `y_field` per group and fits
/// on the log-log scale. Rows with an error or a nonpositive y are skipped.
FitResult fit_rate(const std::vector<ResultRow>& rows, const std::string& x_field,
                   const std::string& y_field);

double row_field(const ResultRow& row, const std::string& field);

/// Deterministic target t* for dimension `dim`.
Vector make_target(const ExperimentConfig& cfg, const ConvexBody& body, std::uint64_t seed);

}  // namespace ermlab
