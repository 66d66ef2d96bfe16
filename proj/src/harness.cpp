#include "ermlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ermlab/diagnostics.hpp"
#include "ermlab/parallel.hpp"
#include "ermlab/widths.hpp"

#ifndef ERMLAB_SOURCE_DIR
#define ERMLAB_SOURCE_DIR "."
#endif

namespace ermlab {

using json = nlohmann::ordered_json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::rates: return "rates";
    case ExperimentKind::two_point: return "two_point";
    case ExperimentKind::shift_bound: return "shift_bound";
    case ExperimentKind::width_profile: return "width_profile";
  }
  return "unknown";
}

namespace {

ExperimentKind experiment_kind_from_string(const std::string& key, const std::string& v) {
  if (v == "rates") return ExperimentKind::rates;
  if (v == "two_point") return ExperimentKind::two_point;
  if (v == "shift_bound") return ExperimentKind::shift_bound;
  if (v == "width_profile") return ExperimentKind::width_profile;
  throw ConfigError(key, "expected one of rates, two_point, shift_bound, width_profile; got '" + v + "'");
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = parse::integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Enum, typename FromString>
Field enum_field(const char* key, Enum ExperimentConfig::*member, FromString from) {
  return {key,
          [key, member, from](ExperimentConfig& c, const std::string& v) {
            try {
              c.*member = from(v);
            } catch (const ConfigError&) {
              throw;
            } catch (const Error& e) {
              throw ConfigError(key, e.what());
            }
          },
          [member](const ExperimentConfig& c) { return to_string(c.*member); }};
}

Field int_field(const char* key, std::function<int&(ExperimentConfig&)> ref) {
  return {key, [key, ref](ExperimentConfig& c, const std::string& v) { ref(c) = to_int(key, v); },
          [ref](const ExperimentConfig& c) {
            return std::to_string(ref(const_cast<ExperimentConfig&>(c)));
          }};
}

Field real_field(const char* key, std::function<double&(ExperimentConfig&)> ref) {
  return {key, [key, ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse::real(key, v); },
          [ref](const ExperimentConfig& c) { return format_real(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field bool_field(const char* key, bool ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse::boolean(key, v); },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"config_id", [](ExperimentConfig& c, const std::string& v) { c.config_id = v; },
                 [](const ExperimentConfig& c) { return c.config_id; }});
    f.push_back({"preset", [](ExperimentConfig& c, const std::string& v) { c.preset = v; },
                 [](const ExperimentConfig& c) { return c.preset; }});
    f.push_back({"kind",
                 [](ExperimentConfig& c, const std::string& v) { c.kind = experiment_kind_from_string("kind", v); },
                 [](const ExperimentConfig& c) { return to_string(c.kind); }});
    f.push_back(enum_field("body.kind", &ExperimentConfig::body_kind,
                           [](const std::string& v) { return body_kind_from_string(v); }));
    f.push_back(int_field("body.d", [](ExperimentConfig& c) -> int& { return c.d; }));
    f.push_back(int_field("body.p", [](ExperimentConfig& c) -> int& { return c.p; }));
    f.push_back(int_field("body.q", [](ExperimentConfig& c) -> int& { return c.q; }));
    f.push_back(real_field("body.radius", [](ExperimentConfig& c) -> double& { return c.radius; }));
    f.push_back(enum_field("design.kind", &ExperimentConfig::design,
                           [](const std::string& v) { return design_kind_from_string(v); }));
    f.push_back(enum_field("noise.kind", &ExperimentConfig::noise,
                           [](const std::string& v) { return noise_kind_from_string(v); }));
    f.push_back({"grid.N", [](ExperimentConfig& c, const std::string& v) { c.grid_N = parse::int_list("grid.N", v); },
                 [](const ExperimentConfig& c) { return join_ints(c.grid_N); }});
    f.push_back({"grid.sigma",
                 [](ExperimentConfig& c, const std::string& v) { c.grid_sigma = parse::real_list("grid.sigma", v); },
                 [](const ExperimentConfig& c) { return join_reals(c.grid_sigma); }});
    f.push_back({"grid.d", [](ExperimentConfig& c, const std::string& v) { c.grid_d = parse::int_list("grid.d", v); },
                 [](const ExperimentConfig& c) { return join_ints(c.grid_d); }});
    f.push_back(int_field("trials", [](ExperimentConfig& c) -> int& { return c.trials; }));
    f.push_back({"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse::u64("seed", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.seed); }});
    f.push_back({"target.kind", [](ExperimentConfig& c, const std::string& v) { c.target.kind = v; },
                 [](const ExperimentConfig& c) { return c.target.kind; }});
    f.push_back(int_field("target.sparsity", [](ExperimentConfig& c) -> int& { return c.target.sparsity; }));
    f.push_back(real_field("target.scale", [](ExperimentConfig& c) -> double& { return c.target.scale; }));
    f.push_back({"solver.kind", [](ExperimentConfig& c, const std::string& v) { c.solver = v; },
                 [](const ExperimentConfig& c) { return c.solver; }});
    f.push_back(int_field("solver.max_iter", [](ExperimentConfig& c) -> int& { return c.erm.max_iter; }));
    f.push_back(real_field("solver.tol", [](ExperimentConfig& c) -> double& { return c.erm.tol; }));
    f.push_back(int_field("solver.fw_iters", [](ExperimentConfig& c) -> int& { return c.erm.fw_iters; }));
    f.push_back(real_field("solver.gap_tol", [](ExperimentConfig& c) -> double& { return c.erm.gap_tol; }));
    f.push_back(int_field("solver.restarts", [](ExperimentConfig& c) -> int& { return c.erm.restarts; }));
    f.push_back(int_field("solver.factor_iters", [](ExperimentConfig& c) -> int& { return c.erm.factor_iters; }));
    f.push_back(real_field("solver.factor_tol", [](ExperimentConfig& c) -> double& { return c.erm.factor_tol; }));
    f.push_back(int_field("width.trials", [](ExperimentConfig& c) -> int& { return c.width_trials; }));
    f.push_back(real_field("fixedpoint.floor_fraction",
                           [](ExperimentConfig& c) -> double& { return c.fixed_point.floor_fraction; }));
    f.push_back(real_field("fixedpoint.bracket_fraction",
                           [](ExperimentConfig& c) -> double& { return c.fixed_point.bracket_fraction; }));
    f.push_back(int_field("fixedpoint.packing_budget",
                          [](ExperimentConfig& c) -> int& { return c.fixed_point.packing_budget; }));
    f.push_back(real_field("constants.c1", [](ExperimentConfig& c) -> double& { return c.constants.c1; }));
    f.push_back(real_field("constants.c3", [](ExperimentConfig& c) -> double& { return c.constants.c3; }));
    f.push_back(real_field("constants.Q", [](ExperimentConfig& c) -> double& { return c.constants.Q; }));
    f.push_back(real_field("constants.kG", [](ExperimentConfig& c) -> double& { return c.kG; }));
    f.push_back(bool_field("iso.check", &ExperimentConfig::iso_check));
    f.push_back({"iso.lambda_scales",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.iso_lambda_scales = parse::real_list("iso.lambda_scales", v);
                 },
                 [](const ExperimentConfig& c) { return join_reals(c.iso_lambda_scales); }});
    f.push_back(int_field("iso.directions", [](ExperimentConfig& c) -> int& { return c.iso_directions; }));
    f.push_back(int_field("iso.steps", [](ExperimentConfig& c) -> int& { return c.iso_steps; }));
    f.push_back(bool_field("check.kernel_bound", &ExperimentConfig::check_kernel_bound));
    f.push_back(int_field("check.kernel_directions", [](ExperimentConfig& c) -> int& { return c.kernel_directions; }));
    f.push_back(bool_field("record_timing", &ExperimentConfig::record_timing));
    f.push_back({"demo.alphas",
                 [](ExperimentConfig& c, const std::string& v) { c.demo_alphas = parse::real_list("demo.alphas", v); },
                 [](const ExperimentConfig& c) { return join_reals(c.demo_alphas); }});
    f.push_back({"demo.shifts",
                 [](ExperimentConfig& c, const std::string& v) { c.demo_shifts = parse::real_list("demo.shifts", v); },
                 [](const ExperimentConfig& c) { return join_reals(c.demo_shifts); }});
    f.push_back(int_field("demo.draws", [](ExperimentConfig& c) -> int& { return c.demo_draws; }));
    f.push_back(int_field("demo.grid", [](ExperimentConfig& c) -> int& { return c.demo_grid; }));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

void apply(ExperimentConfig& cfg, const FlatConfig& flat, bool skip_preset) {
  for (const auto& [key, value] : flat) {
    if (skip_preset && key == "preset") continue;
    const Field* f = find_field(key);
    if (!f) throw ConfigError(key, "unknown configuration key");
    f->set(cfg, value);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (config_id.empty()) throw ConfigError("config_id", "must not be empty");
  if (config_id.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("config_id", "must not contain commas, quotes or newlines");
  }
  if (!(radius > 0.0)) throw ConfigError("body.radius", "must be positive");
  if (body_kind == BodyKind::maxnorm_ball) {
    if (p < 1) throw ConfigError("body.p", "must be >= 1");
    if (q < 1) throw ConfigError("body.q", "must be >= 1");
    if (design != DesignKind::matrix_iid) throw ConfigError("design.kind", "maxnorm bodies need matrix_iid");
    if (!grid_d.empty()) throw ConfigError("grid.d", "not used with maxnorm bodies (set body.p, body.q)");
  } else {
    if (d < 1) throw ConfigError("body.d", "must be >= 1");
    if (design == DesignKind::matrix_iid) throw ConfigError("design.kind", "matrix_iid needs a maxnorm body");
    for (int v : grid_d) {
      if (v < 1) throw ConfigError("grid.d", "entries must be >= 1");
    }
  }
  if (grid_N.empty()) throw ConfigError("grid.N", "must not be empty");
  for (int n : grid_N) {
    if (n < 1) throw ConfigError("grid.N", "entries must be >= 1");
  }
  if (grid_sigma.empty()) throw ConfigError("grid.sigma", "must not be empty");
  for (double s : grid_sigma) {
    if (s < 0.0) throw ConfigError("grid.sigma", "entries must be >= 0");
  }
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  static const std::vector<std::string> targets{"zero", "sparse", "direction", "rank1"};
  if (std::find(targets.begin(), targets.end(), target.kind) == targets.end()) {
    throw ConfigError("target.kind", "expected one of zero, sparse, direction, rank1; got '" + target.kind + "'");
  }
  if (target.kind == "rank1" && body_kind != BodyKind::maxnorm_ball) {
    throw ConfigError("target.kind", "rank1 targets need a maxnorm body");
  }
  if (target.kind == "sparse") {
    for (int dim : dims()) {
      if (target.sparsity < 1 || target.sparsity > dim) {
        throw ConfigError("target.sparsity", "must lie in [1, d]");
      }
    }
  }
  if (target.scale < 0.0 || target.scale > 1.0) throw ConfigError("target.scale", "must lie in [0, 1]");
  static const std::vector<std::string> solvers{"auto", "apg", "factorized", "frank_wolfe"};
  if (std::find(solvers.begin(), solvers.end(), solver) == solvers.end()) {
    throw ConfigError("solver.kind", "expected one of auto, apg, factorized, frank_wolfe; got '" + solver + "'");
  }
  const bool maxnorm = body_kind == BodyKind::maxnorm_ball;
  if (maxnorm && solver == "apg") throw ConfigError("solver.kind", "apg cannot handle maxnorm bodies");
  if (!maxnorm && (solver == "factorized" || solver == "frank_wolfe")) {
    throw ConfigError("solver.kind", solver + " needs a maxnorm body");
  }
  if (erm.max_iter < 1) throw ConfigError("solver.max_iter", "must be >= 1");
  if (!(erm.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
  if (erm.fw_iters < 1) throw ConfigError("solver.fw_iters", "must be >= 1");
  if (!(erm.gap_tol > 0.0)) throw ConfigError("solver.gap_tol", "must be positive");
  if (erm.restarts < 1) throw ConfigError("solver.restarts", "must be >= 1");
  if (erm.factor_iters < 1) throw ConfigError("solver.factor_iters", "must be >= 1");
  if (!(erm.factor_tol >= 0.0)) throw ConfigError("solver.factor_tol", "must be >= 0");
  if (width_trials < 2) throw ConfigError("width.trials", "must be >= 2");
  if (!(fixed_point.floor_fraction > 0.0 && fixed_point.floor_fraction < 1.0)) {
    throw ConfigError("fixedpoint.floor_fraction", "must lie in (0, 1)");
  }
  if (!(fixed_point.bracket_fraction > 0.0 && fixed_point.bracket_fraction < 1.0)) {
    throw ConfigError("fixedpoint.bracket_fraction", "must lie in (0, 1)");
  }
  if (fixed_point.packing_budget < 1) throw ConfigError("fixedpoint.packing_budget", "must be >= 1");
  if (!(constants.c1 > 0.0)) throw ConfigError("constants.c1", "must be positive");
  if (!(constants.c3 > 0.0)) throw ConfigError("constants.c3", "must be positive");
  if (!(constants.Q > 0.0)) throw ConfigError("constants.Q", "must be positive");
  if (!(kG >= 1.0)) throw ConfigError("constants.kG", "must be >= 1");
  if (iso_check) {
    if (iso_lambda_scales.empty()) throw ConfigError("iso.lambda_scales", "must not be empty");
    for (double s : iso_lambda_scales) {
      if (!(s > 0.0)) throw ConfigError("iso.lambda_scales", "entries must be positive");
    }
    if (maxnorm) throw ConfigError("iso.check", "not available for maxnorm bodies");
  }
  if (iso_directions < 1) throw ConfigError("iso.directions", "must be >= 1");
  if (iso_steps < 0) throw ConfigError("iso.steps", "must be >= 0");
  if (check_kernel_bound && maxnorm) throw ConfigError("check.kernel_bound", "not available for maxnorm bodies");
  if (kernel_directions < 1) throw ConfigError("check.kernel_directions", "must be >= 1");
  if (kind == ExperimentKind::shift_bound) {
    if (demo_alphas.empty()) throw ConfigError("demo.alphas", "must not be empty");
    for (double a : demo_alphas) {
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("demo.alphas", "entries must lie in (0, 1)");
    }
    if (demo_shifts.empty()) throw ConfigError("demo.shifts", "must not be empty");
    for (double s : demo_shifts) {
      if (!(s >= 0.0)) throw ConfigError("demo.shifts", "entries must be >= 0");
    }
    if (demo_draws < 1) throw ConfigError("demo.draws", "must be >= 1");
  }
  if (kind == ExperimentKind::two_point) {
    if (maxnorm) throw ConfigError("body.kind", "two_point needs a projectable body");
    for (int dim : dims()) {
      for (int n : grid_N) {
        if (n >= dim) throw ConfigError("grid.N", "two_point needs N < d");
      }
    }
  }
  if (kind == ExperimentKind::width_profile && demo_grid < 1) throw ConfigError("demo.grid", "must be >= 1");
}

FlatConfig ExperimentConfig::to_flat() const {
  FlatConfig flat;
  for (const auto& f : fields()) flat[f.key] = f.get(*this);
  return flat;
}

ExperimentConfig ExperimentConfig::from_flat(const FlatConfig& flat, const std::string& constants_path) {
  ExperimentConfig cfg;
  const FlatConfig constants = load_constants(constants_path);
  for (const auto& [key, value] : constants) {
    if (key.rfind("constants.", 0) == 0) {
      const Field* f = find_field(key);
      if (!f) throw ConfigError(key, "unknown key in constants file");
      f->set(cfg, value);
    }
  }
  if (auto it = flat.find("preset"); it != flat.end() && !it->second.empty()) {
    apply(cfg, preset_flat(it->second), false);
  }
  apply(cfg, flat, false);
  cfg.validate();
  return cfg;
}

ConvexBody ExperimentConfig::body_for(int dim) const {
  switch (body_kind) {
    case BodyKind::l1_ball: return ConvexBody::l1(dim, radius);
    case BodyKind::l2_ball: return ConvexBody::l2(dim, radius);
    case BodyKind::linf_ball: return ConvexBody::linf(dim, radius);
    case BodyKind::maxnorm_ball: return ConvexBody::maxnorm(p, q, radius);
  }
  throw ArgumentError("unknown body kind");
}

std::vector<int> ExperimentConfig::dims() const {
  if (body_kind == BodyKind::maxnorm_ball) return {p * q};
  return grid_d.empty() ? std::vector<int>{d} : grid_d;
}

std::string default_constants_path() { return std::string(ERMLAB_SOURCE_DIR) + "/constants.default"; }

FlatConfig load_constants(const std::string& path) {
  const std::string p = path.empty() ? default_constants_path() : path;
  if (path.empty() && !std::filesystem::exists(p)) return {};
  return load_flat_config(p);
}

std::vector<std::string> preset_names() {
  return {"b1_rates", "b1_low_noise", "maxnorm_rates", "ratio_lower", "two_point_demo",
          "shift_bound_check", "width_profile"};
}

FlatConfig preset_flat(const std::string& name) {
  FlatConfig f;
  f["config_id"] = name;
  f["preset"] = name;
  if (name == "b1_rates") {
    // Noisy regime over B_1^64.
    f["body.kind"] = "l1_ball";
    f["body.d"] = "64";
    f["grid.N"] = "32,64,128,256,512,1024";
    f["grid.sigma"] = "1";
    f["trials"] = "200";
    f["target.kind"] = "zero";
  } else if (name == "b1_low_noise") {
    f["body.kind"] = "l1_ball";
    f["body.d"] = "64";
    f["grid.N"] = "4,8,16,32,64,128";
    f["grid.sigma"] = "0";
    f["trials"] = "20";
    f["target.kind"] = "sparse";
    f["target.sparsity"] = "1";
    f["check.kernel_bound"] = "true";
  } else if (name == "maxnorm_rates") {
    // Radius 1/sqrt(pq) with an isotropic design is the same class as radius 1
    // with entries of variance 1/(pq).
    f["body.kind"] = "maxnorm_ball";
    f["body.p"] = "6";
    f["body.q"] = "6";
    f["body.radius"] = format_real(1.0 / 6.0);
    f["design.kind"] = "matrix_iid";
    f["grid.N"] = "50,100,200,400,800";
    f["grid.sigma"] = "1";
    f["trials"] = "20";
    f["target.kind"] = "rank1";
    f["target.scale"] = "0.5";
    f["solver.kind"] = "factorized";
  } else if (name == "ratio_lower") {
    f["body.kind"] = "l1_ball";
    f["body.d"] = "32";
    f["noise.kind"] = "orthogonal_target";
    f["grid.N"] = "64";
    f["grid.sigma"] = "1";
    f["trials"] = "50";
    f["target.kind"] = "zero";
    f["iso.check"] = "true";
    f["iso.lambda_scales"] = "0.25,0.5,1,2";
  } else if (name == "two_point_demo") {
    f["kind"] = "two_point";
    f["body.kind"] = "l1_ball";
    f["body.d"] = "8";
    f["grid.N"] = "4";
    f["grid.sigma"] = "0.5";
    f["trials"] = "20";
  } else if (name == "shift_bound_check") {
    f["kind"] = "shift_bound";
    f["demo.alphas"] = "0.05,0.1,0.25,0.5,0.75";
    f["demo.shifts"] = "0,0.5,1,1.5,2";
    f["demo.draws"] = "100000";
  } else if (name == "width_profile") {
    f["kind"] = "width_profile";
    f["body.kind"] = "l1_ball";
    f["body.d"] = "256";
    f["demo.grid"] = "12";
  } else {
    throw ConfigError("preset", "unknown preset '" + name + "'");
  }
  return f;
}

ExperimentConfig preset(const std::string& name, const std::string& constants_path) {
  return ExperimentConfig::from_flat({{"preset", name}}, constants_path);
}

// ---------------------------------------------------------------------------
// CSV

const char* const kCsvHeader =
    "config_id,cell,trial,seed,N,d,p,q,sigma,excess_risk,predicted_rate,regime,s_star,r_star,"
    "iso_holds,runtime_ms";

namespace {

std::string csv_real(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double csv_parse_real(const std::string& s) {
  if (s == "NA" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return parse::real("csv", s);
}

}  // namespace

std::string format_csv_row(const ResultRow& r) {
  std::ostringstream out;
  out << r.config_id << ',' << r.cell << ',' << r.trial << ',' << r.seed << ',' << r.N << ',' << r.d << ','
      << r.p << ',' << r.q << ',' << csv_real(r.sigma) << ',' << csv_real(r.excess_risk) << ','
      << csv_real(r.predicted_rate) << ',' << r.regime << ',' << csv_real(r.s_star) << ','
      << csv_real(r.r_star) << ',' << (r.iso_holds < 0 ? "NA" : std::to_string(r.iso_holds)) << ','
      << csv_real(r.runtime_ms);
  return out.str();
}

std::string format_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) out += format_csv_row(r) + "\n";
  return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ArgumentError("results CSV: unexpected header");
  }
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string item;
    std::istringstream ls(line);
    while (std::getline(ls, item, ',')) cols.push_back(item);
    if (cols.size() != 16) {
      throw ArgumentError("results CSV line " + std::to_string(lineno) + ": expected 16 columns");
    }
    ResultRow r;
    r.config_id = cols[0];
    r.cell = to_int("cell", cols[1]);
    r.trial = to_int("trial", cols[2]);
    r.seed = parse::u64("seed", cols[3]);
    r.N = to_int("N", cols[4]);
    r.d = to_int("d", cols[5]);
    r.p = to_int("p", cols[6]);
    r.q = to_int("q", cols[7]);
    r.sigma = csv_parse_real(cols[8]);
    r.excess_risk = csv_parse_real(cols[9]);
    r.predicted_rate = csv_parse_real(cols[10]);
    r.regime = cols[11];
    r.s_star = csv_parse_real(cols[12]);
    r.r_star = csv_parse_real(cols[13]);
    r.iso_holds = cols[14] == "NA" ? -1 : to_int("iso_holds", cols[14]);
    r.runtime_ms = csv_parse_real(cols[15]);
    if (r.regime == "error") r.error = "failed";
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

// ---------------------------------------------------------------------------
// Fitting

FitResult fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("fit_loglog: x and y differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) throw ArgumentError("fit_loglog: need at least two positive points");
  const double n = lx.size();
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ArgumentError("fit_loglog: x values are all equal");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.points = static_cast<int>(lx.size());
  return fit;
}

double row_field(const ResultRow& row, const std::string& field) {
  if (field == "N") return row.N;
  if (field == "d") return row.d;
  if (field == "p") return row.p;
  if (field == "q") return row.q;
  if (field == "sigma") return row.sigma;
  if (field == "excess_risk") return row.excess_risk;
  if (field == "predicted_rate") return row.predicted_rate;
  if (field == "s_star") return row.s_star;
  if (field == "r_star") return row.r_star;
  if (field == "runtime_ms") return row.runtime_ms;
  throw ArgumentError("unknown result field '" + field + "'");
}

FitResult fit_rate(const std::vector<ResultRow>& rows, const std::string& x_field,
                   const std::string& y_field) {
  std::map<double, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    const double y = row_field(r, y_field);
    if (!(y > 0.0)) continue;
    groups[row_field(r, x_field)].push_back(y);
  }
  std::vector<double> xs, ys;
  for (auto& [x, vals] : groups) {
    xs.push_back(x);
    ys.push_back(quantile(vals, 0.5));
  }
  return fit_loglog(xs, ys);
}

// ---------------------------------------------------------------------------
// Experiments

Vector make_target(const ExperimentConfig& cfg, const ConvexBody& body, std::uint64_t seed) {
  Rng rng(seed, "target");
  const double scale = cfg.target.scale * body.radius;
  Vector t = Vector::Zero(body.dim);
  if (cfg.target.kind == "zero" || scale == 0.0) return t;
  if (cfg.target.kind == "sparse") {
    const int k = cfg.target.sparsity;
    std::vector<int> idx(body.dim);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.index(static_cast<std::size_t>(body.dim - i)));
      std::swap(idx[i], idx[j]);
    }
    for (int i = 0; i < k; ++i) t[idx[i]] = rng.rademacher() * scale / k;
    return t;
  }
  if (cfg.target.kind == "direction") {
    Vector g = rng.gaussian_vector(body.dim);
    const double gg = gauge(body.scaled(1.0 / body.radius), g);
    return g * (scale / gg);
  }
  // rank1
  Vector u(body.rows), v(body.cols);
  for (auto& x : u) x = rng.rademacher();
  for (auto& x : v) x = rng.rademacher();
  return scale * AtomOracle::flatten(u, v);
}

namespace {

// iso_holds is read at lambda = predicted rate when that scale is on the grid.
std::size_t holds_index(const std::vector<double>& scales) {
  const auto it = std::find(scales.begin(), scales.end(), 1.0);
  return it == scales.end() ? 0 : static_cast<std::size_t>(it - scales.begin());
}

struct Prediction {
  RatePrediction rate;
  std::string error;
};

json cell_summary(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg) {
  const ResultRow& first = rows.front();
  std::vector<double> excess;
  int iso_checked = 0, iso_true = 0, failures = 0, kernel_viol = 0;
  std::vector<double> ratio_sum(cfg.iso_lambda_scales.size(), 0.0);
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failures;
      continue;
    }
    excess.push_back(r.excess_risk);
    if (r.iso_holds >= 0) {
      ++iso_checked;
      iso_true += r.iso_holds;
      for (std::size_t i = 0; i < r.worst_ratios.size() && i < ratio_sum.size(); ++i) {
        ratio_sum[i] += r.worst_ratios[i];
      }
    }
    if (r.kernel_violation) ++kernel_viol;
  }
  json c;
  c["cell"] = first.cell;
  c["N"] = first.N;
  c["d"] = first.d;
  c["sigma"] = first.sigma;
  c["rows"] = rows.size();
  c["failures"] = failures;
  c["predicted_rate"] = first.predicted_rate;
  c["regime"] = first.regime;
  c["s_star"] = std::isnan(first.s_star) ? json(nullptr) : json(first.s_star);
  c["r_star"] = first.r_star;
  if (!excess.empty()) {
    const double med = quantile(excess, 0.5);
    c["median_excess_risk"] = med;
    c["mean_excess_risk"] = std::accumulate(excess.begin(), excess.end(), 0.0) / excess.size();
    c["max_excess_risk"] = *std::max_element(excess.begin(), excess.end());
    if (first.predicted_rate > 0.0) c["median_over_predicted"] = med / first.predicted_rate;
  }
  if (iso_checked > 0) {
    c["iso_frequency"] = static_cast<double>(iso_true) / iso_checked;
    json ratios = json::array();
    for (std::size_t i = 0; i < ratio_sum.size(); ++i) {
      ratios.push_back({{"lambda_scale", cfg.iso_lambda_scales[i]}, {"mean_worst_ratio", ratio_sum[i] / iso_checked}});
    }
    c["ratio_by_lambda"] = ratios;
  }
  if (cfg.check_kernel_bound) c["kernel_bound_violations"] = kernel_viol;
  return c;
}

ExperimentResult run_rates(const ExperimentConfig& cfg) {
  ExperimentResult res;
  const std::vector<int> dims = cfg.dims();
  const bool maxnorm = cfg.body_kind == BodyKind::maxnorm_ball;

  struct Cell {
    int index;
    int dim;
    double sigma;
    int N;
    Prediction pred;
    Vector target;
  };
  std::vector<Cell> cells;
  for (int dim : dims) {
    for (double sigma : cfg.grid_sigma) {
      for (int N : cfg.grid_N) cells.push_back({static_cast<int>(cells.size()), dim, sigma, N, {}, {}});
    }
  }

  // Predictions share one width profile per dimension.
  std::map<int, std::unique_ptr<WidthProfile>> profiles;
  SolverConfig fp = cfg.fixed_point;
  fp.width.atoms.grothendieck = cfg.kG;
  for (auto& cell : cells) {
    const ConvexBody body = cfg.body_for(cell.dim);
    cell.target = make_target(cfg, body, derive_seed(cfg.seed, "target", static_cast<std::uint64_t>(cell.dim)));
    auto& profile = profiles[cell.dim];
    if (!profile) {
      profile = std::make_unique<WidthProfile>(body, cfg.width_trials,
                                               derive_seed(cfg.seed, "width", static_cast<std::uint64_t>(cell.dim)),
                                               fp.width);
    }
    try {
      cell.pred.rate = predicted_rate(*profile, cell.N, cell.sigma, cfg.constants, fp);
    } catch (const std::exception& e) {
      cell.pred.error = e.what();
    }
  }

  const std::size_t total = cells.size() * static_cast<std::size_t>(cfg.trials);
  res.rows.resize(total);
  parallel_for(total, [&](std::size_t idx) {
    const Cell& cell = cells[idx / cfg.trials];
    const int trial = static_cast<int>(idx % cfg.trials);
    ResultRow& row = res.rows[idx];
    row.config_id = cfg.config_id;
    row.cell = cell.index;
    row.trial = trial;
    row.seed = derive_seed(derive_seed(cfg.seed, "cell", cell.index), "trial", trial);
    row.N = cell.N;
    row.d = cell.dim;
    row.p = maxnorm ? cfg.p : 0;
    row.q = maxnorm ? cfg.q : 0;
    row.sigma = cell.sigma;
    row.excess_risk = std::numeric_limits<double>::quiet_NaN();
    row.predicted_rate = cell.pred.rate.rate;
    row.regime = to_string(cell.pred.rate.regime);
    row.s_star = cell.pred.rate.s_star;
    row.r_star = cell.pred.rate.r_star;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (!cell.pred.error.empty()) throw NumericalError("prediction failed: " + cell.pred.error);
      const ConvexBody body = cfg.body_for(cell.dim);
      DesignSpec design = maxnorm ? DesignSpec::matrix(cfg.p, cfg.q) : DesignSpec::make(cfg.design, cell.dim);
      Model model{design, NoiseSpec{cfg.noise, cell.sigma}, std::nullopt};
      if (cfg.noise == NoiseKind::gaussian_noise) model.t_star = cell.target;
      const Dataset data = sample_dataset(model, cell.N, row.seed);

      ErmConfig erm = cfg.erm;
      erm.seed = derive_seed(row.seed, "solver");
      Vector t_hat;
      const std::string solver = cfg.solver == "auto" ? (maxnorm ? "factorized" : "apg") : cfg.solver;
      if (solver == "apg") {
        t_hat = erm_linear(body, data, erm).t_hat;
      } else if (solver == "factorized") {
        erm.maxnorm_radius = body.radius;
        t_hat = erm_maxnorm_factorized(cfg.p, cfg.q, data, 0, erm).t_hat;
      } else {
        AtomOracle oracle;
        oracle.rows = cfg.p;
        oracle.cols = cfg.q;
        oracle.grothendieck = cfg.kG;
        oracle.seed = derive_seed(row.seed, "atoms");
        erm.fw_scale = body.radius;
        t_hat = erm_frank_wolfe_atoms(oracle, data, erm).t_hat;
      }
      row.excess_risk = excess_risk(t_hat, model).value;

      if (cfg.iso_check) {
        const double base = row.predicted_rate;
        if (!(base > 0.0)) throw NumericalError("iso check needs a positive predicted rate");
        RatioQuery q;
        q.directions = cfg.iso_directions;
        q.ascent_steps = cfg.iso_steps;
        for (std::size_t i = 0; i < cfg.iso_lambda_scales.size(); ++i) {
          q.lambda = cfg.iso_lambda_scales[i] * base;
          row.worst_ratios.push_back(ratio_sup_estimate(q, body, data, model, derive_seed(row.seed, "iso", i)));
        }
        row.iso_holds = row.worst_ratios[holds_index(cfg.iso_lambda_scales)] <= 0.5 ? 1 : 0;
      }
      if (cfg.check_kernel_bound) {
        if (cell.N < cell.dim) {
          SectionConfig sc;
          sc.directions = cfg.kernel_directions;
          sc.seed = derive_seed(row.seed, "section");
          if (body.kind == BodyKind::l1_ball && body.dim <= 12) sc.method = SectionMethod::vertex_enum;
          row.kernel_diameter = kernel_section_diameter(body, data.X, sc).diameter;
          row.kernel_violation = row.excess_risk > row.kernel_diameter * row.kernel_diameter + 1e-6;
        } else {
          row.kernel_diameter = 0.0;
          row.kernel_violation = row.excess_risk > 1e-8;
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      row.regime = "error";
    }
    if (cfg.record_timing) {
      row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  });

  res.csv = format_csv(res.rows);
  json summary;
  summary["config_id"] = cfg.config_id;
  summary["preset"] = cfg.preset;
  summary["kind"] = to_string(cfg.kind);
  summary["seed"] = cfg.seed;
  summary["rows"] = res.rows.size();
  json failures = json::array();
  for (const auto& r : res.rows) {
    if (!r.error.empty()) failures.push_back({{"cell", r.cell}, {"trial", r.trial}, {"error", r.error}});
  }
  res.failures = static_cast<int>(failures.size());
  summary["failures"] = failures;

  json cell_list = json::array();
  double ratio_lo = std::numeric_limits<double>::infinity(), ratio_hi = 0.0;
  for (const auto& cell : cells) {
    std::vector<ResultRow> rows(res.rows.begin() + static_cast<std::ptrdiff_t>(cell.index) * cfg.trials,
                                res.rows.begin() + static_cast<std::ptrdiff_t>(cell.index + 1) * cfg.trials);
    json c = cell_summary(rows, cfg);
    if (c.contains("median_over_predicted")) {
      ratio_lo = std::min(ratio_lo, c["median_over_predicted"].get<double>());
      ratio_hi = std::max(ratio_hi, c["median_over_predicted"].get<double>());
    }
    if (!cell.pred.error.empty()) c["prediction_error"] = cell.pred.error;
    cell_list.push_back(c);
  }
  summary["cells"] = cell_list;
  if (ratio_hi > 0.0) {
    summary["median_over_predicted_range"] = {ratio_lo, ratio_hi};
  }

  json fits = json::array();
  if (cfg.grid_N.size() >= 2) {
    for (int dim : dims) {
      for (double sigma : cfg.grid_sigma) {
        std::vector<ResultRow> group;
        for (const auto& r : res.rows) {
          if (r.d == dim && r.sigma == sigma) group.push_back(r);
        }
        json f{{"d", dim}, {"sigma", sigma}, {"x", "N"}, {"y", "excess_risk"}};
        try {
          const FitResult fit = fit_rate(group, "N", "excess_risk");
          f["slope"] = fit.slope;
          f["intercept"] = fit.intercept;
          f["r2"] = fit.r2;
          f["points"] = fit.points;
        } catch (const std::exception& e) {
          f["error"] = e.what();
        }
        fits.push_back(f);
      }
    }
  }
  summary["fits"] = fits;
  res.summary_json = summary.dump(2) + "\n";
  return res;
}

ExperimentResult run_two_point(const ExperimentConfig& cfg) {
  ExperimentResult res;
  const int dim = cfg.dims().front();
  const int N = cfg.grid_N.front();
  const double sigma = cfg.grid_sigma.front();
  const ConvexBody body = cfg.body_for(dim);

  struct Out {
    std::uint64_t seed = 0;
    TwoPointDemo zero, erm;
    std::string error;
  };
  std::vector<Out> outs(static_cast<std::size_t>(cfg.trials));
  parallel_for(outs.size(), [&](std::size_t i) {
    Out& o = outs[i];
    o.seed = derive_seed(cfg.seed, "trial", i);
    try {
      const Dataset design = sample_dataset(DesignSpec::make(cfg.design, dim), NoiseSpec{NoiseKind::gaussian_noise, 0.0},
                                            Vector(Vector::Zero(dim)), N, o.seed);
      SectionConfig sc;
      sc.directions = cfg.kernel_directions;
      sc.seed = derive_seed(o.seed, "section");
      if (body.kind == BodyKind::l1_ball && dim <= 12) sc.method = SectionMethod::vertex_enum;
      const Estimator zero = [dim](const Dataset&) { return Vector(Vector::Zero(dim)); };
      const Estimator erm = [&](const Dataset& data) { return erm_linear(body, data, cfg.erm).t_hat; };
      o.zero = two_point_minimax_demo(zero, body, design.X, sigma, derive_seed(o.seed, "noise"), sc);
      o.erm = two_point_minimax_demo(erm, body, design.X, sigma, derive_seed(o.seed, "noise"), sc);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  std::ostringstream csv;
  csv << "trial,seed,estimator,reported_error,lower_bound,holds\n";
  int holds_zero = 0, holds_erm = 0;
  json failures = json::array();
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const Out& o = outs[i];
    if (!o.error.empty()) {
      failures.push_back({{"trial", i}, {"error", o.error}});
      continue;
    }
    for (const auto& [name, demo] : {std::pair<const char*, const TwoPointDemo*>{"zero", &o.zero},
                                     std::pair<const char*, const TwoPointDemo*>{"erm", &o.erm}}) {
      const bool holds = demo->reported_error >= demo->lower_bound - 1e-9;
      csv << i << ',' << o.seed << ',' << name << ',' << csv_real(demo->reported_error) << ','
          << csv_real(demo->lower_bound) << ',' << (holds ? 1 : 0) << '\n';
      (std::string(name) == "zero" ? holds_zero : holds_erm) += holds ? 1 : 0;
    }
  }
  res.csv = csv.str();
  res.failures = static_cast<int>(failures.size());
  json summary{{"config_id", cfg.config_id}, {"preset", cfg.preset}, {"kind", to_string(cfg.kind)},
               {"seed", cfg.seed}, {"d", dim}, {"N", N}, {"sigma", sigma}, {"trials", cfg.trials},
               {"holds_zero", holds_zero}, {"holds_erm", holds_erm}, {"failures", failures}};
  res.summary_json = summary.dump(2) + "\n";
  return res;
}

ExperimentResult run_shift_bound(const ExperimentConfig& cfg) {
  ExperimentResult res;
  struct Pair {
    double alpha = 0.0, shift = 0.0, nu_u = 0.0, nu_v = 0.0, bound = 0.0;
    std::string error;
  };
  std::vector<Pair> pairs;
  for (double a : cfg.demo_alphas) {
    for (double s : cfg.demo_shifts) {
      Pair pr;
      pr.alpha = a;
      pr.shift = s;
      pairs.push_back(pr);
    }
  }
  parallel_for(pairs.size(), [&](std::size_t k) {
    Pair& pr = pairs[k];
    // A = {x : x_1 >= b} has measure alpha under N(0, I); v = -shift e_1
    // moves the mean away from A by `shift`.
    const double b = normal_quantile(1.0 - pr.alpha);
    Rng rng(cfg.seed, "shift_pair", k);
    long hit_u = 0, hit_v = 0;
    for (int i = 0; i < cfg.demo_draws; ++i) {
      const double x1 = rng.gaussian();
      rng.gaussian();  // second coordinate, irrelevant to A
      if (x1 >= b) ++hit_u;
      if (x1 - pr.shift >= b) ++hit_v;
    }
    pr.nu_u = static_cast<double>(hit_u) / cfg.demo_draws;
    pr.nu_v = static_cast<double>(hit_v) / cfg.demo_draws;
    try {
      pr.bound = gaussian_shift_bound(pr.nu_u, pr.shift);
    } catch (const std::exception& e) {
      pr.error = e.what();
    }
  });
  std::ostringstream csv;
  csv << "alpha,shift,nu_u,nu_v,bound,abs_gap\n";
  double max_gap = 0.0;
  json failures = json::array();
  for (const auto& pr : pairs) {
    if (!pr.error.empty()) {
      failures.push_back({{"alpha", pr.alpha}, {"shift", pr.shift}, {"error", pr.error}});
      continue;
    }
    const double gap = std::abs(pr.nu_v - pr.bound);
    max_gap = std::max(max_gap, gap);
    csv << csv_real(pr.alpha) << ',' << csv_real(pr.shift) << ',' << csv_real(pr.nu_u) << ','
        << csv_real(pr.nu_v) << ',' << csv_real(pr.bound) << ',' << csv_real(gap) << '\n';
  }
  res.csv = csv.str();
  res.failures = static_cast<int>(failures.size());
  json summary{{"config_id", cfg.config_id}, {"preset", cfg.preset}, {"kind", to_string(cfg.kind)},
               {"seed", cfg.seed}, {"pairs", pairs.size()}, {"draws", cfg.demo_draws},
               {"max_abs_gap", max_gap}, {"failures", failures}};
  res.summary_json = summary.dump(2) + "\n";
  return res;
}

ExperimentResult run_width_profile(const ExperimentConfig& cfg) {
  ExperimentResult res;
  std::ostringstream csv;
  csv << "d,r,mean,std_error,trials\n";
  json summary{{"config_id", cfg.config_id}, {"preset", cfg.preset}, {"kind", to_string(cfg.kind)},
               {"seed", cfg.seed}};
  json profiles = json::array();
  json failures = json::array();
  SolverConfig fp = cfg.fixed_point;
  fp.width.atoms.grothendieck = cfg.kG;
  for (int dim : cfg.dims()) {
    const ConvexBody body = cfg.body_for(dim);
    try {
      WidthProfile profile(body, cfg.width_trials, derive_seed(cfg.seed, "width", static_cast<std::uint64_t>(dim)),
                           fp.width);
      const double top = body.diameter();
      const auto grid = log_grid(top * 1e-3, top, cfg.demo_grid);
      const auto est = profile.evaluate(grid);
      for (const auto& e : est) {
        csv << dim << ',' << csv_real(e.r) << ',' << csv_real(e.mean) << ',' << csv_real(e.std_error) << ','
            << e.trials << '\n';
      }
      bool monotone = true;
      try {
        profile.check_monotone();
      } catch (const NumericalError&) {
        monotone = false;
      }
      profiles.push_back({{"d", dim}, {"diameter", top}, {"monotone", monotone}});
    } catch (const std::exception& e) {
      failures.push_back({{"d", dim}, {"error", e.what()}});
    }
  }
  summary["profiles"] = profiles;
  summary["failures"] = failures;
  res.failures = static_cast<int>(failures.size());
  res.csv = csv.str();
  res.summary_json = summary.dump(2) + "\n";
  return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  switch (cfg.kind) {
    case ExperimentKind::rates: res = run_rates(cfg); break;
    case ExperimentKind::two_point: res = run_two_point(cfg); break;
    case ExperimentKind::shift_bound: res = run_shift_bound(cfg); break;
    case ExperimentKind::width_profile: res = run_width_profile(cfg); break;
  }
  res.config_echo = format_flat_config(cfg.to_flat());
  return res;
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + (std::filesystem::path(dir) / name).string() + "'");
    out << text;
  };
  write("results.csv", result.csv);
  write("summary.json", result.summary_json);
  write("config.echo", result.config_echo);
}

}  // namespace ermlab
