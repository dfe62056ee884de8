#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparta/planner.hpp"
#include "sparta/training.hpp"

namespace sparta {

// Independent stream for (base, tag, index); keeps the seeds of training
// terrains, test terrains and model inits apart.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0);

struct TerrainSpec {
  std::string kind = "obstacle_row";  // obstacle_row | boulder_field | flat
  ObstacleRowParams obstacle_row;
  BoulderFieldParams boulder_field;
  int flat_rows = 81;
  int flat_cols = 81;
  double flat_resolution = 0.05;

  void validate() const;
  Terrain generate(std::uint64_t seed) const;
};

struct DatasetSpec {
  int patches = 100;
  int angles_per_patch = 8;
  int draws = 200;
  int points_per_cell = 2;
  double patch_side = 1.2;
  // Chance of keeping a patch whose height range is below 1 cm; the rest
  // of the sampling budget goes to patches with relief.
  double flat_keep_probability = 0.25;

  void validate() const;
};

struct PatchRecord {
  int patch_id = 0;
  Vec2 center;
  TerrainPatch patch;
  FeatureGrid features;
};

// Patch centers drawn uniformly where the patch fits, with flat patches thinned.
std::vector<PatchRecord> sample_patches(const Terrain& t, const DatasetSpec& spec,
                                        std::uint64_t seed, int first_patch_id = 0);

// Oracle histograms for `angles` around each patch.
Dataset label_patches(const std::vector<PatchRecord>& patches,
                      const std::vector<std::vector<AngleOfApproach>>& angles, const VehicleSpec& v,
                      int draws, const BinGeometry& geometry, std::uint64_t seed);

// sample_patches + angles_per_patch uniform random angles per patch.
Dataset generate_dataset(const Terrain& t, const VehicleSpec& v, const DatasetSpec& spec,
                         const BinGeometry& geometry, std::uint64_t seed, int first_patch_id = 0);

struct TrainingSpec {
  int terrains = 60;
  DatasetSpec dataset;
  TrainConfig train{.learning_rate = 0.5, .epochs = 30, .batch_size = 16};
};

struct PlannerSpec {
  double cell_size = 0.5;
  int headings = 8;
  double patch_side = 1.2;
  double risk_threshold = 1.0;
  CostWeights weights;
  double damage_threshold = kDefaultDamageThreshold;
  // Start and goal sit this far inside the two ends of the terrain (x), at mid-width.
  double end_margin = 0.8;
  int points_per_cell = 2;
};

struct ExperimentConfig {
  TerrainSpec terrain;
  VehicleSpec vehicle;
  int trials = 100;
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.0, 0.9};
  std::vector<int> max_frequencies{1, 3, 5};
  std::vector<std::string> algorithms{"ours", "angle_input", "elev"};
  int bins = 8;
  TrainingSpec training;
  PlannerSpec planner;

  // Throws ConfigError.
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

struct TrialOutcome {
  int trial = 0;
  std::uint64_t terrain_seed = 0;
  bool success = false;
  bool no_path = false;
  double path_length = 0.0;
  double path_cost = 0.0;
  double max_edge_cvar = 0.0;
  int edges = 0;
};

struct ExperimentRow {
  std::string algorithm;
  std::optional<double> alpha;
  std::optional<int> max_frequency;
  int successes = 0;
  int damages = 0;
  std::vector<TrialOutcome> trials;

  double success_rate() const;
};

struct OrderingCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::vector<OrderingCheck> checks;
  // Held-out training metrics per trained model, e.g. "ours_n3" -> EMD^2.
  std::vector<std::pair<std::string, double>> model_losses;

  const ExperimentRow* find(const std::string& algorithm, std::optional<double> alpha,
                            std::optional<int> n) const;
};

// Trains the needed models on separately seeded terrains, then for each trial
// generates a fresh test terrain, plans once per (algorithm, alpha, n) and rolls
// the plan out once with a per-trial seed. A trial without a path counts as damage.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Columns: Algorithm,alpha,n,Suc.,Dmg.
std::string report_csv(const ExperimentReport& r);
nlohmann::json report_json(const ExperimentReport& r);
// Columns: algorithm,alpha,n,success_rate
std::string success_plot_csv(const ExperimentReport& r);

}  // namespace sparta
