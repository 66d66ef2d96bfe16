// Command-line front end: width, fixedpoint, erm, experiment, demo, fit.

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ermlab/diagnostics.hpp"
#include "ermlab/erm.hpp"
#include "ermlab/fixed_points.hpp"
#include "ermlab/harness.hpp"
#include "ermlab/parallel.hpp"
#include "ermlab/widths.hpp"

using namespace ermlab;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::string constants_path;
  std::string out_dir;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  int trials = 0;
};

ExperimentConfig build_config(const Globals& g, const std::string& preset_name = "") {
  FlatConfig flat;
  if (!g.config_path.empty()) flat = load_flat_config(g.config_path);
  if (!preset_name.empty()) flat["preset"] = preset_name;
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "--set expects KEY=VALUE");
    flat[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (g.seed_given) flat["seed"] = std::to_string(g.seed);
  if (g.trials > 0) flat["trials"] = std::to_string(g.trials);
  return ExperimentConfig::from_flat(flat, g.constants_path);
}

json estimate_json(const WidthEstimate& e) {
  return {{"r", e.r}, {"mean", e.mean}, {"std_error", e.std_error}, {"trials", e.trials}};
}

json fixed_point_json(const FixedPointResult& r) {
  json j{{"value", r.value},     {"residual", r.residual}, {"lo", r.lo},
         {"hi", r.hi},           {"clipped", r.clipped},   {"floored", r.floored},
         {"converged", r.converged}, {"std_error", r.std_error}, {"evaluations", r.evaluations}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

int finish_experiment(const ExperimentResult& res, const ExperimentConfig& cfg, const Globals& g) {
  const std::string dir = g.out_dir.empty() ? "out/" + cfg.config_id : g.out_dir;
  write_outputs(res, dir);
  std::cout << res.summary_json;
  std::cerr << "wrote " << dir << "/results.csv, summary.json, config.echo";
  if (res.failures > 0) std::cerr << " (" << res.failures << " failed rows)";
  std::cerr << "\n";
  return res.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ermlab: ERM rates, localized gaussian widths and fixed points"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "flat key = value config file");
  app.add_option("--constants", g.constants_path, "constants file (default: constants.default)");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--set", g.sets, "override one config key (KEY=VALUE), repeatable")
      ->allow_extra_args(false);
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--trials", g.trials, "trials per cell (overrides the config)")->check(CLI::PositiveNumber);

  auto* width = app.add_subcommand("width", "localized gaussian width of the configured body");
  std::vector<double> radii;
  bool global_width = false;
  width->add_option("--r", radii, "radius (repeatable)")->allow_extra_args(false);
  width->add_flag("--global", global_width, "unlocalized width of the body");

  auto* fixedpoint = app.add_subcommand("fixedpoint", "solve s_star, r_star, r_k or q_star");
  std::string fp_kind = "s_star";
  int fp_N = 100, fp_k = 0;
  double fp_eta = 0.0, fp_Q = 0.0;
  fixedpoint->add_option("--kind", fp_kind, "s_star | r_star | r_k | q_star | k_star | rate");
  fixedpoint->add_option("--N", fp_N, "sample size");
  fixedpoint->add_option("--eta", fp_eta, "eta (s_star, q_star)");
  fixedpoint->add_option("--Q", fp_Q, "Q (r_star, r_k, k_star)");
  fixedpoint->add_option("--k", fp_k, "k (r_k)");
  double fp_sigma = 1.0;
  fixedpoint->add_option("--sigma", fp_sigma, "noise level (rate)");

  auto* erm = app.add_subcommand("erm", "one ERM solve on a sampled dataset");
  int erm_N = 100;
  double erm_sigma = 1.0;
  erm->add_option("--N", erm_N, "sample size");
  erm->add_option("--sigma", erm_sigma, "noise level");

  auto* experiment = app.add_subcommand("experiment", "run a configured experiment");
  std::string exp_preset;
  bool list = false;
  experiment->add_option("--preset", exp_preset, "built-in preset");
  experiment->add_flag("--list", list, "list presets and exit");

  auto* demo = app.add_subcommand("demo", "run a demo preset (two_point_demo, shift_bound_check, width_profile)");
  std::string demo_preset = "two_point_demo";
  demo->add_option("--preset", demo_preset, "demo preset");

  auto* fit = app.add_subcommand("fit", "log-log fit of a results CSV");
  std::string fit_csv, fit_x = "N", fit_y = "excess_risk";
  fit->add_option("--csv", fit_csv, "results.csv")->required();
  fit->add_option("--x", fit_x, "x field");
  fit->add_option("--y", fit_y, "y field");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  g.seed_given = seed_opt->count() > 0;
  set_num_threads(g.threads);

  try {
    if (*experiment) {
      if (list) {
        for (const auto& name : preset_names()) std::cout << name << "\n";
        return 0;
      }
      const ExperimentConfig cfg = build_config(g, exp_preset);
      return finish_experiment(run_experiment(cfg), cfg, g);
    }
    if (*demo) {
      const ExperimentConfig cfg = build_config(g, demo_preset);
      if (cfg.kind == ExperimentKind::rates) throw ConfigError("preset", "'" + demo_preset + "' is not a demo");
      return finish_experiment(run_experiment(cfg), cfg, g);
    }
    if (*fit) {
      const FitResult r = fit_rate(read_csv(fit_csv), fit_x, fit_y);
      json j{{"x", fit_x}, {"y", fit_y}, {"slope", r.slope}, {"intercept", r.intercept}, {"r2", r.r2},
             {"points", r.points}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    const ExperimentConfig cfg = build_config(g);
    const ConvexBody body = cfg.body_for(cfg.dims().front());
    WidthConfig wcfg = cfg.fixed_point.width;
    wcfg.atoms.grothendieck = cfg.kG;

    if (*width) {
      json out = json::array();
      if (global_width) out.push_back(estimate_json(global_width_mc(body, cfg.width_trials, cfg.seed, wcfg)));
      if (radii.empty() && !global_width) radii.push_back(body.diameter());
      for (double r : radii) out.push_back(estimate_json(gaussian_width_mc(body, r, cfg.width_trials, cfg.seed, wcfg)));
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*fixedpoint) {
      json out;
      if (fp_kind == "k_star") {
        out["k_star"] = k_star(body, fp_Q, cfg.width_trials, cfg.seed, wcfg);
      } else if (fp_kind == "rate") {
        const RatePrediction p = predicted_rate(body, fp_N, fp_sigma, cfg.constants, cfg.width_trials, cfg.seed,
                                                cfg.fixed_point);
        out = {{"rate", p.rate}, {"regime", to_string(p.regime)}, {"r_star", p.r_star}};
        out["s_star"] = std::isnan(p.s_star) ? json(nullptr) : json(p.s_star);
      } else {
        FixedPointQuery q;
        if (fp_kind == "s_star") q = FixedPointQuery::s_star(fp_N, fp_eta);
        else if (fp_kind == "r_star") q = FixedPointQuery::r_star(fp_N, fp_Q);
        else if (fp_kind == "r_k") q = FixedPointQuery::r_k(fp_k, fp_Q);
        else if (fp_kind == "q_star") q = FixedPointQuery::q_star(fp_N, fp_eta);
        else throw ConfigError("--kind", "unknown fixed point kind '" + fp_kind + "'");
        out = fixed_point_json(solve_fixed_point(body, q, cfg.width_trials, cfg.seed, cfg.fixed_point));
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*erm) {
      const bool maxnorm = body.kind == BodyKind::maxnorm_ball;
      const DesignSpec design = maxnorm ? DesignSpec::matrix(cfg.p, cfg.q) : DesignSpec::make(cfg.design, body.dim);
      Model model{design, NoiseSpec{cfg.noise, erm_sigma}, std::nullopt};
      if (cfg.noise == NoiseKind::gaussian_noise) model.t_star = make_target(cfg, body, derive_seed(cfg.seed, "target"));
      const Dataset data = sample_dataset(model, erm_N, derive_seed(cfg.seed, "data"));
      ErmConfig ecfg = cfg.erm;
      ecfg.seed = derive_seed(cfg.seed, "solver");
      ErmSolution sol;
      if (maxnorm) {
        ecfg.maxnorm_radius = body.radius;
        sol = erm_maxnorm_factorized(cfg.p, cfg.q, data, 0, ecfg);
      } else {
        sol = erm_linear(body, data, ecfg);
      }
      json out{{"solver", sol.solver},
               {"empirical_risk", sol.empirical_risk},
               {"excess_risk", excess_risk(sol, model).value},
               {"iterations", sol.iterations},
               {"certificate", sol.certificate},
               {"gauge", sol.gauge}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
