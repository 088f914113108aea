#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mapid/maps.hpp"
#include "mapid/netcore.hpp"
#include "mapid/simplify.hpp"
#include "mapid/train.hpp"

namespace mapid {

struct StageConfig {
  bool refine = true;           // run the OLS stage at all
  bool refine_best_only = false;  // select across instances pre-OLS, refine winner
};

struct ExperimentConfig {
  std::string name = "custom";
  MapSpec map = MapSpec::logistic();
  SamplingKind sampling = SamplingKind::Trajectory;
  StateVec x0 = {0.5};       // trajectory start; also the shadowing start
  std::size_t pairs = 1000;  // trajectory sample count
  double lo = -1.0;          // linspace domain
  double hi = 1.0;
  std::size_t samples = 1000;  // linspace sample count
  std::vector<double> sigmas = {0.0, 0.01, 0.05};
  NetworkConfig net;
  TrainConfig train;
  StageConfig stages;
  std::string out_dir = "out";
};

// Table-derived experiment setups: "logistic", "gaussian" (single
// trajectory, OLS stage off), "gaussian-wide" (linspace domain), and
// "tinkerbell". Throws on unknown names.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Flat key=value config text ('#' comments). A "preset" key applies first;
// remaining keys override individual fields. See README for the key list.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical key=value dump; parse_config_text(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical dump; stable provenance tag for outputs.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string provenance_tag(const ExperimentConfig& cfg);

struct InstanceDiagnostic {
  int instance_id = 0;
  int fold_id = 0;
  double val_mae = 0.0;
  int convergence_epoch = 0;
  double val_rrmse_aic = 0.0;
  double val_rrmse_refined = 0.0;  // equals val_rrmse_aic when OLS is skipped
};

struct SigmaResult {
  double sigma = 0.0;
  bool ok = false;
  std::string error;

  std::string aic_expression;      // chosen AIC-stage expression (exact digits)
  std::string refined_expression;  // after OLS; equals aic when refine is off
  double chosen_threshold = 0.0;
  double val_mae = 0.0;
  double rrmse = 0.0;       // refined expression, full noisy dataset
  double rrmse_aic = 0.0;   // AIC-stage expression, full noisy dataset
  double true_rrmse = 0.0;  // exact map on the same noisy data
  int convergence_epoch = 0;
  std::size_t shadow_steps = 0;
  bool shadow_escaped = false;
  double rss_before = 0.0;
  double rss_after = 0.0;
  bool condition_flag = false;

  int best_instance = -1;
  int instances_kept = 0;
  int instances_failed = 0;
  std::vector<InstanceDiagnostic> instances;

  TrainedModel best_model;              // winning snapshot, for logs/checkpoints
  SimplificationResult simplification;  // threshold sweep of the winner
};

struct ExperimentResult {
  ExperimentConfig cfg;
  std::string hash;
  std::vector<SigmaResult> per_sigma;
};

// Full pipeline per sigma: dataset -> noise -> run_instances -> per-instance
// AIC simplification (+ optional OLS) -> across-instance selection by
// validation-set RRMSE -> metrics. Failures are recorded per sigma, not
// thrown. Deterministic for a fixed config.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                std::ostream* progress = nullptr);

// Emits report.json, results.csv, expression files, dataset/trainlog/
// portrait/trajectory/instance CSVs and SVG plots into cfg.out_dir.
// Returns the report path. Rerunning a config byte-reproduces report.json.
std::string write_experiment_artifacts(const ExperimentResult& result);

// Builds the experiment's clean dataset for one sigma entry (before noise).
Dataset build_clean_dataset(const ExperimentConfig& cfg);
// The per-sigma noise seed stream (shared across instances).
NoiseConfig noise_for(const ExperimentConfig& cfg, std::size_t sigma_index);

}  // namespace mapid
