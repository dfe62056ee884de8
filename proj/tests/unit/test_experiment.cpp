#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "gradcheck.hpp"
#include "sparta/errors.hpp"
#include "sparta/experiment.hpp"
#include "sparta/io.hpp"
#include "test_support.hpp"

using namespace sparta;
using Catch::Matchers::ContainsSubstring;

namespace fs = std::filesystem;

namespace {

const BinGeometry g8(8, 0.0, 1.0);

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sparta_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.terrain.kind = "flat";
  c.terrain.flat_rows = 61;
  c.terrain.flat_cols = 81;
  c.trials = 3;
  c.seed = 5;
  c.max_frequencies = {1};
  c.training.terrains = 1;
  c.training.dataset.patches = 4;
  c.training.dataset.angles_per_patch = 2;
  c.training.dataset.draws = 20;
  c.training.train.epochs = 1;
  return c;
}

}  // namespace

TEST_CASE("derive_seed separates streams", "[experiment]") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0, 1, 2}) {
    for (std::uint64_t tag : {0, 1, 2, 3}) {
      for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(base, tag, i));
    }
  }
  CHECK(seen.size() == 3u * 4u * 50u);
  CHECK(derive_seed(7, 1, 2) == derive_seed(7, 1, 2));
  CHECK(derive_seed(7, 1) == derive_seed(7, 1, 0));
}

TEST_CASE("experiment config validation", "[experiment]") {
  CHECK_NOTHROW(ExperimentConfig{}.validate());
  ExperimentConfig c;
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.algorithms = {"ours", "magic"};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.alphas = {1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.planner.headings = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.planner.risk_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.terrain.kind = "moon";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.training.train.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"trails", 10}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"trials", "ten"}}), ConfigError);
}

TEST_CASE("experiment config round trip", "[experiment]") {
  ExperimentConfig c;
  c.terrain.kind = "boulder_field";
  c.terrain.boulder_field.density = 1.25;
  c.trials = 17;
  c.seed = 99;
  c.alphas = {0.0, 0.5, 0.9};
  c.algorithms = {"ours", "elev"};
  c.planner.risk_threshold = 0.7;
  c.planner.weights.risk = 4.0;
  c.training.train.learning_rate = 0.25;
  const nlohmann::json j = to_json(c);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.trials == 17);
  CHECK(back.terrain.boulder_field.density == 1.25);
  CHECK(back.alphas == c.alphas);
  // Missing keys take defaults.
  CHECK(to_json(experiment_config_from_json(nlohmann::json::object())) == to_json(ExperimentConfig{}));
}

TEST_CASE("dataset generation", "[experiment]") {
  ObstacleRowParams op;
  op.seed = 3;
  const Terrain t = gen_obstacle_row(op);
  DatasetSpec spec;
  spec.patches = 6;
  spec.angles_per_patch = 3;
  spec.draws = 50;
  const Dataset d = generate_dataset(t, VehicleSpec{}, spec, g8, 11, 100);
  REQUIRE(d.items.size() == 18u);
  CHECK(d.items.front().patch_id == 100);
  CHECK(d.items.back().patch_id == 105);
  for (const auto& item : d.items) {
    double total = 0.0;
    for (double p : item.target.probs()) total += p;
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  const Dataset again = generate_dataset(t, VehicleSpec{}, spec, g8, 11, 100);
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    CHECK(d.items[i].features == again.items[i].features);
    CHECK(d.items[i].phi == again.items[i].phi);
    CHECK(d.items[i].target == again.items[i].target);
  }
  for (const auto& p : sample_patches(t, spec, 11)) CHECK(patch_fits(t, p.center, spec.patch_side));
  spec.patches = 0;
  CHECK_THROWS_AS(generate_dataset(t, VehicleSpec{}, spec, g8, 11), ConfigError);
}

TEST_CASE("a small experiment end to end", "[experiment]") {
  const ExperimentConfig c = tiny_config();
  const ExperimentReport r = run_experiment(c);
  // ours per (alpha, n), angle_input per alpha, elev once.
  REQUIRE(r.rows.size() == 2u + 2u + 1u);
  for (const auto& row : r.rows) {
    CHECK(row.successes + row.damages == c.trials);
    CHECK(row.trials.size() == static_cast<std::size_t>(c.trials));
    // Flat ground never damages.
    CHECK(row.successes == c.trials);
  }
  const ExperimentRow* elev = r.find("elev", std::nullopt, std::nullopt);
  REQUIRE(elev != nullptr);
  CHECK(r.find("ours", 0.9, 1) != nullptr);
  CHECK(r.find("ours", 0.9, 3) == nullptr);

  const std::string csv = report_csv(r);
  CHECK(csv.rfind("Algorithm,alpha,n,Suc.,Dmg.\n", 0) == 0);
  CHECK_THAT(csv, ContainsSubstring("ours,0.9,1,3,0\n"));
  CHECK_THAT(csv, ContainsSubstring("angle_input,0,-,3,0\n"));
  CHECK_THAT(csv, ContainsSubstring("elev,-,-,3,0\n"));
  CHECK_THAT(success_plot_csv(r), ContainsSubstring("elev,-,-,1\n"));

  const ExperimentReport again = run_experiment(c);
  CHECK(report_json(again) == report_json(r));
}

TEST_CASE("json round trips are exact", "[io]") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const FourierRiskFunction f = test::random_function(rng, 8, 3, 3.0);
    CHECK(io::function_from_json(io::to_json(f)) == f);
    const RiskDistribution d = test::random_distribution(rng, g8);
    CHECK(io::distribution_from_json(io::to_json(d)) == d);
    const DatasetItem item = test::random_item(rng, g8, i);
    const DatasetItem back = io::item_from_json(io::to_json(item));
    CHECK(back.features == item.features);
    CHECK(back.phi == item.phi);
    CHECK(back.target == item.target);
    CHECK(back.patch_id == item.patch_id);
  }
  CHECK(io::geometry_from_json(io::to_json(BinGeometry(4, -1.0, 2.0))) == BinGeometry(4, -1.0, 2.0));
  VehicleSpec v;
  v.wheel_radius = 0.2;
  CHECK(io::to_json(io::vehicle_from_json(io::to_json(v))) == io::to_json(v));
  const PatchKey k = PatchKey::make("t7", {1.25, 3.5}, 0.05, 1.2);
  CHECK(io::key_from_json(io::to_json(k)) == k);

  for (HeadKind h : {HeadKind::sparta, HeadKind::angle_input, HeadKind::angle_free}) {
    ModelConfig mc;
    mc.head = h;
    mc.seed = 4;
    const SpartaModel m = SpartaModel::create(mc);
    const fs::path p = temp_file("model.json");
    io::write_json_file(p, io::to_json(m));
    CHECK(io::model_from_json(io::read_json_file(p)) == m);
  }

  ObstacleRowParams op;
  op.seed = 2;
  const Terrain t = gen_obstacle_row(op);
  CHECK(io::terrain_from_json(io::to_json(t)) == t);
}

TEST_CASE("binary terrain and datasets round trip", "[io]") {
  BoulderFieldParams bp;
  bp.length_m = 6.0;
  bp.seed = 4;
  const Terrain t = gen_boulder_field(bp);
  const fs::path p = temp_file("terrain.bin");
  io::write_terrain_binary(t, p);
  CHECK(io::read_terrain_binary(p) == t);
  CHECK(fs::file_size(p) == 4 + 3 * 4 + 8 + 8 * t.heights().size());

  std::ofstream(temp_file("bad.bin"), std::ios::binary) << "SPTX0000";
  CHECK_THROWS_AS(io::read_terrain_binary(temp_file("bad.bin")), FormatError);
  {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() - 8);
    std::ofstream(temp_file("short.bin"), std::ios::binary) << bytes;
  }
  CHECK_THROWS_AS(io::read_terrain_binary(temp_file("short.bin")), FormatError);

  std::mt19937_64 rng(2);
  Dataset d;
  for (int i = 0; i < 10; ++i) d.items.push_back(test::random_item(rng, g8, i));
  const fs::path dp = temp_file("data.jsonl");
  io::write_dataset(d, dp);
  const Dataset back = io::read_dataset(dp);
  REQUIRE(back.items.size() == d.items.size());
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    CHECK(back.items[i].features == d.items[i].features);
    CHECK(back.items[i].target == d.items[i].target);
  }
  std::ofstream(temp_file("broken.jsonl")) << "{\"version\": 1, \"phi\": \n";
  CHECK_THROWS_AS(io::read_dataset(temp_file("broken.jsonl")), FormatError);
}

TEST_CASE("version checks", "[io]") {
  CHECK_NOTHROW(io::check_version(io::Json{{"version", io::kFormatVersion}}, "thing"));
  CHECK_THROWS_AS(io::check_version(io::Json{{"version", io::kFormatVersion + 1}}, "thing"), FormatError);
  CHECK_THROWS_AS(io::check_version(io::Json::object(), "thing"), FormatError);
  CHECK_THROWS_AS(io::read_json_file(temp_file("nope.json")), FormatError);
  io::Json j = io::to_json(FourierRiskFunction::zeros(8, 3));
  j["version"] = 99;
  CHECK_THROWS_WITH(io::function_from_json(j), ContainsSubstring("99"));
}
