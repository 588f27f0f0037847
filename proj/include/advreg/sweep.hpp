#pragma once

// Experiment harness: for every (m, delta, seed) cell, split and scale the
// data, fit the baselines, solve the bilevel program, attack the test set
// against the plain predictor and score every model on it.

#include "advreg/attack.hpp"
#include "advreg/baselines.hpp"
#include "advreg/dataset.hpp"
#include "advreg/lm_solver.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace advreg {

struct ExperimentConfig {
  std::string name = "experiment";
  std::string dataset_path;
  CsvSchema schema;
  double split_ratio = 0.8;
  std::vector<std::size_t> m_grid = {1, 2, 3, 5, 8, 13, 21, 34};
  std::vector<double> delta_grid = {0.85, 0.90, 0.95, 0.99};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  double attacked_fraction = 0.10;
  std::optional<double> ridge = 100.0;
  /// Training target offset; empty means 2 std of the training labels.
  std::optional<double> nu;
  BsConfig bs;
  SolverConfig solver;
  /// Worker threads; does not affect results.
  int jobs = 1;

  void validate() const;
  /// Every setting that affects results, in a fixed key order.
  nlohmann::ordered_json to_json() const;
  std::string hash() const;
};

/// Everything a seed shares across its (m, delta) cells.
struct SeedContext {
  std::uint64_t seed = 0;
  Split raw;
  MinMaxScaler scaler;
  Dataset train;  // scaled with training statistics
  Dataset test;   // scaled with training statistics
  Weights linreg;
  AttackSpec attack;
  AttackedTestSet attacked;
};

struct CellRecord {
  std::size_t m = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double mse_bilevel = 0.0;
  double mse_linreg = 0.0;
  double mse_bs = 0.0;
  double mse_bilevel_clean = 0.0;
  double mse_linreg_clean = 0.0;
  double mse_bs_clean = 0.0;
  std::string solver_status;
  int iterations = 0;
  double residual_norm = 0.0;
  bool bs_converged = false;
  Vector movement;
  /// Non-empty when the cell failed; the other fields are then unset.
  std::string error;

  bool ok() const { return error.empty(); }
};

struct CellResult {
  CellRecord record;
  TrainingSplit training;
  SolveOutcome outcome;
  BaselineModel bs;
};

struct Aggregate {
  std::size_t m = 0;
  double delta = 0.0;
  int cells = 0;
  double mean_bilevel = 0.0, std_bilevel = 0.0;
  double mean_linreg = 0.0, std_linreg = 0.0;
  double mean_bs = 0.0, std_bs = 0.0;
};

struct ExperimentReport {
  std::string config_hash;
  std::string dataset_checksum;
  std::vector<std::string> feature_names;
  nlohmann::ordered_json config;
  std::vector<CellRecord> cells;
  std::vector<Aggregate> aggregates;
  /// Mean over successful cells of the per-feature movement.
  Vector feature_movement;

  nlohmann::ordered_json to_json() const;
  void write_csv(std::ostream& out) const;
};

SeedContext prepare_seed(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed);
CellResult run_cell(const ExperimentConfig& cfg, const SeedContext& ctx, std::size_t m, double delta);

using CellCallback = std::function<void(const CellRecord&)>;

ExperimentReport run_sweep(const ExperimentConfig& cfg, const LabeledData& data,
                           const std::string& dataset_checksum, const CellCallback& on_cell = {});
/// Loads cfg.dataset_path, then runs the sweep.
ExperimentReport run_sweep(const ExperimentConfig& cfg, const CellCallback& on_cell = {});

/// Writes report_<hash>.json and cells_<hash>.csv into `directory`; returns
/// the two paths.
std::pair<std::string, std::string> write_report(const ExperimentReport& report,
                                                 const std::string& directory);

}  // namespace advreg
