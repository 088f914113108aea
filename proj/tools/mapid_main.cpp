#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapid/checkpoint.hpp"
#include "mapid/csv.hpp"
#include "mapid/errors.hpp"
#include "mapid/eval.hpp"
#include "mapid/experiment.hpp"
#include "mapid/expr.hpp"
#include "mapid/maps.hpp"
#include "mapid/netcore.hpp"
#include "mapid/rng.hpp"
#include "mapid/simplify.hpp"
#include "mapid/train.hpp"

namespace {

using namespace mapid;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string cur;
  const auto flush = [&] {
    try {
      std::size_t used = 0;
      const double v = std::stod(cur, &used);
      if (used != cur.size()) throw std::invalid_argument(cur);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad " + what + " value '" + cur + "'");
    }
  };
  for (char c : text) {
    if (c == ',') {
      flush();
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty() || out.empty()) flush();
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string tag_for(const std::string& text, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "config=%016llx seed=%llu",
                static_cast<unsigned long long>(fnv1a(text)),
                static_cast<unsigned long long>(seed));
  return buf;
}

// Shared map/sampling flags for `generate` and `evaluate`.
struct MapArgs {
  std::string map_name;
  double r = 3.9;
  double alpha = 12.0, beta = -0.5;
  double a = 0.9, b = -0.6013, c = 2.0, d = 0.5;
  std::string x0_text;
  std::size_t steps = 1000;
  std::vector<double> linspace;
  std::size_t m = 1000;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd, bool require_map) {
    auto* map_opt =
        cmd->add_option("--map", map_name, "Map preset: logistic|gaussian|tinkerbell")
            ->check(CLI::IsMember({"logistic", "gaussian", "tinkerbell"}));
    if (require_map) map_opt->required();
    cmd->add_option("--r", r, "Logistic growth rate");
    cmd->add_option("--alpha", alpha, "Gaussian width");
    cmd->add_option("--beta", beta, "Gaussian offset");
    cmd->add_option("--a", a, "Tinkerbell a");
    cmd->add_option("--b", b, "Tinkerbell b");
    cmd->add_option("--c", c, "Tinkerbell c");
    cmd->add_option("--d", d, "Tinkerbell d");
    cmd->add_option("--x0", x0_text, "Trajectory start, comma-separated");
    cmd->add_option("--steps", steps, "Trajectory length (pairs)");
    cmd->add_option("--linspace", linspace, "Sample a linear grid: LO HI")
        ->expected(2);
    cmd->add_option("--m", m, "Grid sample count");
    cmd->add_option("--sigma", sigma, "Relative noise level");
    cmd->add_option("--seed", seed, "Noise seed");
  }

  MapSpec spec() const {
    if (map_name == "logistic") return MapSpec{LogisticMap{r}};
    if (map_name == "gaussian") return MapSpec{GaussianMap{alpha, beta}};
    if (map_name == "tinkerbell") return MapSpec{TinkerbellMap{a, b, c, d}};
    throw UsageError("unknown map '" + map_name + "'");
  }

  StateVec x0(const MapSpec& ms) const {
    if (!x0_text.empty()) return parse_doubles(x0_text, "--x0");
    if (std::holds_alternative<LogisticMap>(ms.kind)) return {0.5};
    if (std::holds_alternative<GaussianMap>(ms.kind)) return {0.0};
    return {-0.5, -0.5};
  }

  std::string describe() const {
    std::string s = "generate map=" + map_name;
    char buf[256];
    if (!linspace.empty()) {
      std::snprintf(buf, sizeof(buf), " linspace=%.17g,%.17g m=%zu", linspace[0],
                    linspace[1], m);
    } else {
      std::snprintf(buf, sizeof(buf), " x0=%s steps=%zu",
                    x0_text.empty() ? "auto" : x0_text.c_str(), steps);
    }
    s += buf;
    std::snprintf(buf, sizeof(buf), " sigma=%.17g", sigma);
    return s + buf;
  }
};

Dataset build_dataset(const MapArgs& args, const MapSpec& ms) {
  Dataset clean = args.linspace.empty()
                      ? make_trajectory_dataset(ms, args.x0(ms), args.steps)
                      : sample_linspace(ms, args.linspace[0], args.linspace[1], args.m);
  return add_noise(clean, NoiseConfig{args.sigma, args.seed});
}

void print_rms_summary(const std::string& path, const std::vector<StateVec>& rows) {
  const std::size_t m = rows.size();
  const std::size_t dim = m ? rows[0].size() : 0;
  std::string rms = "[";
  for (std::size_t j = 0; j < dim; ++j) {
    double acc = 0.0;
    for (const StateVec& x : rows) acc += x[j] * x[j];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%.6g", j ? ", " : "", std::sqrt(acc / m));
    rms += buf;
  }
  rms += "]";
  std::cout << "wrote " << path << ": rows=" << m << " dim=" << dim
            << " rms=" << rms << "\n";
}

struct GenerateCmd {
  MapArgs map;
  bool pairs = false;
  std::string out = "data.csv";

  int run() const {
    const MapSpec ms = map.spec();
    const std::string prov = tag_for(map.describe(), map.seed);
    if (map.linspace.empty() && !pairs && map.sigma == 0.0) {
      const auto traj = generate_trajectory(ms, map.x0(ms), map.steps);
      write_trajectory_csv(out, traj, prov);
      print_rms_summary(out, traj);
    } else {
      const Dataset ds = build_dataset(map, ms);
      write_pairs_csv(out, ds, prov);
      print_rms_summary(out, ds.inputs);
    }
    return 0;
  }
};

void apply_env_seed(ExperimentConfig& cfg) {
  const char* env = std::getenv("MAPID_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw UsageError("MAPID_SEED is not an integer");
  cfg.train.base_seed = v;
}

// Config-driven commands share loading plus desk-scale overrides.
struct ConfigArgs {
  std::string config_path;
  std::string preset_name;
  long long instances = -1;
  long long epochs = -1;
  std::string sigmas_text;
  long long seed = -1;
  std::string out_dir;

  void add_to(CLI::App* cmd) {
    auto* c = cmd->add_option("--config", config_path, "key=value config file");
    auto* p = cmd->add_option("--preset", preset_name,
                              "Built-in setup: logistic|gaussian|gaussian-wide|tinkerbell");
    c->excludes(p);
    cmd->add_option("--instances", instances, "Override train.instances");
    cmd->add_option("--epochs", epochs, "Override train.epochs");
    cmd->add_option("--sigmas", sigmas_text, "Override sigma list, comma-separated");
    cmd->add_option("--seed", seed, "Override base seed");
    cmd->add_option("--out", out_dir, "Override output directory");
  }

  ExperimentConfig load() const {
    ExperimentConfig cfg;
    try {
      if (!config_path.empty())
        cfg = load_config(config_path);
      else if (!preset_name.empty())
        cfg = preset(preset_name);
      else
        throw std::runtime_error("one of --config or --preset is required");
    } catch (const ParseError& e) {
      throw UsageError(e.what());
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
    apply_env_seed(cfg);
    if (instances >= 0) cfg.train.instances = static_cast<int>(instances);
    if (epochs >= 0) cfg.train.epochs = static_cast<int>(epochs);
    if (!sigmas_text.empty()) cfg.sigmas = parse_doubles(sigmas_text, "--sigmas");
    if (seed >= 0) cfg.train.base_seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
  }
};

struct ExperimentCmd {
  ConfigArgs config;

  int run() const {
    const ExperimentConfig cfg = config.load();
    const ExperimentResult result = run_experiment(cfg, &std::cout);
    const std::string report = write_experiment_artifacts(result);
    bool any_ok = false;
    std::cout << "\nsigma      rrmse        true_rrmse   expression\n";
    for (const SigmaResult& sr : result.per_sigma) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%-10g ", sr.sigma);
      std::cout << buf;
      if (sr.ok) {
        any_ok = true;
        std::snprintf(buf, sizeof(buf), "%-12.6g %-12.6g ", sr.rrmse, sr.true_rrmse);
        std::cout << buf << format(parse_system(sr.refined_expression)) << "\n";
      } else {
        std::cout << "FAILED: " << sr.error << "\n";
      }
    }
    std::cout << "report: " << report << "\n";
    return any_ok ? 0 : 1;
  }
};

struct EvaluateCmd {
  std::string expr_path;
  std::string data_path;
  MapArgs map;
  std::size_t shadow_steps = 30;
  double gap = 0.05;

  int run() const {
    ExprSystem sys;
    try {
      sys = read_expression_file(expr_path);
    } catch (const ParseError& e) {
      throw UsageError("expression file: " + std::string(e.what()));
    }
    Dataset ds;
    const bool have_map = !map.map_name.empty();
    if (!data_path.empty())
      ds = read_pairs_csv(data_path);
    else if (have_map)
      ds = build_dataset(map, map.spec());
    else
      throw UsageError("evaluate needs --data or --map sampling flags");

    const double score = rrmse(sys, ds);
    double mae = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      try {
        const StateVec pred = evaluate(sys, ds.inputs[i]);
        for (std::size_t j = 0; j < pred.size(); ++j) {
          mae += std::fabs(pred[j] - ds.targets[i][j]);
          ++count;
        }
      } catch (const EvalError&) {
        mae = std::numeric_limits<double>::infinity();
        count = 1;
        break;
      }
    }
    std::cout << "expression: " << format(sys) << "\n";
    std::cout << "samples: " << ds.size() << "\n";
    std::printf("rrmse: %.6g\n", score);
    std::printf("mae: %.6g\n", count ? mae / count : 0.0);
    if (have_map) {
      const MapSpec ms = map.spec();
      std::printf("true_rrmse: %.6g\n", true_rrmse(ms, ds));
      const ShadowResult sh = shadow(sys, ms, map.x0(ms), shadow_steps, gap);
      std::cout << "shadow_steps: " << sh.shadow_steps
                << (sh.escaped ? " (escaped)" : "") << "\n";
    }
    return 0;
  }
};

struct SimplifyCmd {
  std::string checkpoint_path;
  std::string data_path;
  bool refine = false;
  std::string out_path;

  int run() const {
    Checkpoint ckpt;
    try {
      ckpt = load_checkpoint(checkpoint_path);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("checkpoint: " + std::string(e.what()));
    }
    const Dataset ds = read_pairs_csv(data_path);
    const ExprSystem raw = extract(ckpt.config, ckpt.params);
    const SimplificationResult sweep = select(raw, ds);

    std::printf("%-12s %-4s %-14s %-14s\n", "threshold", "k", "rss", "aic");
    for (std::size_t i = 0; i < sweep.candidates.size(); ++i) {
      const ThresholdCandidate& c = sweep.candidates[i];
      std::printf("%-12.4g %-4zu %-14.6g %-14.6g%s\n", c.threshold, c.k, c.rss,
                  c.aic, i == sweep.chosen ? "  <- chosen" : "");
    }
    const ExprSystem chosen = sweep.candidates[sweep.chosen].expr;
    std::cout << "chosen: " << format(chosen) << "\n";

    ExprSystem final_expr = chosen;
    RefinedModel rm;
    if (refine) {
      rm = ols_refine(expand_squares(chosen), ds);
      final_expr = rm.expr;
      std::cout << "refined: " << format(final_expr) << "\n";
      std::printf("rss: %.6g -> %.6g%s\n", rm.rss_before, rm.rss_after,
                  rm.condition_flag ? " (ill-conditioned, kept incumbents)" : "");
    }

    if (!out_path.empty()) {
      nlohmann::ordered_json js;
      nlohmann::ordered_json cands = nlohmann::ordered_json::array();
      for (const ThresholdCandidate& c : sweep.candidates)
        cands.push_back({{"threshold", c.threshold},
                         {"expression_text", format(c.expr, exact_format())},
                         {"k", c.k},
                         {"rss", c.rss},
                         {"aic", std::isfinite(c.aic) ? c.aic
                                  : std::numeric_limits<double>::quiet_NaN()}});
      js["candidates"] = cands;
      js["chosen_threshold"] = sweep.candidates[sweep.chosen].threshold;
      js["refined_expression_text"] = format(final_expr, exact_format());
      if (refine) {
        js["rss_before"] = rm.rss_before;
        js["rss_after"] = rm.rss_after;
        js["condition_flag"] = rm.condition_flag;
      }
      std::ofstream f(out_path);
      if (!f) throw std::runtime_error("cannot open for writing: " + out_path);
      f << js.dump(2) << "\n";
      std::cout << "wrote " << out_path << "\n";
    }
    return 0;
  }
};

struct TrainCmd {
  ConfigArgs config;
  double sigma = -1.0;
  int instance = 0;
  int fold = 0;
  std::string checkpoint_out;
  std::string log_out;

  int run() const {
    ExperimentConfig cfg = config.load();
    std::size_t sigma_index = 0;
    if (sigma >= 0.0) {
      bool found = false;
      for (std::size_t i = 0; i < cfg.sigmas.size(); ++i)
        if (cfg.sigmas[i] == sigma) {
          sigma_index = i;
          found = true;
          break;
        }
      if (!found) {
        cfg.sigmas = {sigma};
        sigma_index = 0;
      }
    }
    if (fold < 0 || fold >= cfg.train.folds)
      throw UsageError("--fold out of range");

    const Dataset noisy = add_noise(build_clean_dataset(cfg), noise_for(cfg, sigma_index));
    const Dataset folded = assign_folds(
        noisy, cfg.train.folds,
        cfg.train.base_seed + static_cast<std::uint64_t>(instance));
    const std::uint64_t seed = derive_seed(cfg.train.base_seed,
                                           static_cast<std::uint64_t>(instance),
                                           static_cast<std::uint64_t>(fold));
    const TrainedModel model = train_fold(cfg.net, cfg.train, folded, fold, seed);

    std::printf("val_mae: %.6g\n", model.best_val_mae);
    std::printf("convergence_epoch: %d\n", model.convergence_epoch);
    if (model.failed) std::cout << "status: overflowed (best snapshot kept)\n";
    std::cout << "expression: " << format(extract(cfg.net, model.params)) << "\n";

    const std::string prov = provenance_tag(cfg);
    if (!checkpoint_out.empty()) {
      save_checkpoint(checkpoint_out,
                      Checkpoint{1, cfg.net, cfg.train.base_seed, model.params});
      std::cout << "wrote " << checkpoint_out << "\n";
    }
    if (!log_out.empty()) {
      write_training_log_csv(log_out, model, cfg.train, prov);
      std::cout << "wrote " << log_out << "\n";
    }
    return model.failed ? 1 : 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mapid: closed-form identification of iterated maps"};
  app.require_subcommand(1);

  GenerateCmd gen;
  auto* gen_cmd = app.add_subcommand("generate", "Sample a map into CSV");
  gen.map.add_to(gen_cmd, true);
  gen_cmd->add_flag("--pairs", gen.pairs, "Emit input/target pairs instead of a raw trajectory");
  gen_cmd->add_option("--out", gen.out, "Output CSV path");

  ExperimentCmd exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the full identification pipeline");
  exp.config.add_to(exp_cmd);

  EvaluateCmd ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score an expression file against data");
  ev_cmd->add_option("--expr", ev.expr_path, "Expression text file")->required();
  ev_cmd->add_option("--data", ev.data_path, "Pairs CSV to score against");
  ev.map.add_to(ev_cmd, false);
  ev_cmd->add_option("--shadow-steps", ev.shadow_steps, "Shadowing horizon");
  ev_cmd->add_option("--gap", ev.gap, "Shadowing tolerance (inf norm)");

  SimplifyCmd sim;
  auto* sim_cmd = app.add_subcommand("simplify", "Simplify a trained checkpoint");
  sim_cmd->add_option("--checkpoint", sim.checkpoint_path, "Checkpoint JSON")->required();
  sim_cmd->add_option("--data", sim.data_path, "Pairs CSV for scoring")->required();
  sim_cmd->add_flag("--refine", sim.refine, "Run the least-squares stage after AIC");
  sim_cmd->add_option("--out", sim.out_path, "Write the sweep as JSON");

  TrainCmd tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a single fold");
  tr.config.add_to(tr_cmd);
  tr_cmd->add_option("--sigma", tr.sigma, "Noise level (default: first configured)");
  tr_cmd->add_option("--instance", tr.instance, "Instance id (fold shuffle seed)");
  tr_cmd->add_option("--fold", tr.fold, "Validation fold");
  tr_cmd->add_option("--checkpoint-out", tr.checkpoint_out, "Write trained weights");
  tr_cmd->add_option("--log", tr.log_out, "Write per-epoch training log CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return gen.run();
    if (exp_cmd->parsed()) return exp.run();
    if (ev_cmd->parsed()) return ev.run();
    if (sim_cmd->parsed()) return sim.run();
    if (tr_cmd->parsed()) return tr.run();
  } catch (const UsageError& e) {
    std::cerr << "mapid: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "mapid: " << e.what() << "\n";
    return 2;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "mapid: i/o error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mapid: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
