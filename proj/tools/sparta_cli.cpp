// sparta: data generation, fitting, training, planning experiments and the
// cached-vs-reinference benchmark. Exit codes: 0 ok, 1 internal failure,
// 2 usage, 3 data, 4 infeasible.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sparta/coeff_cache.hpp"
#include "sparta/errors.hpp"
#include "sparta/experiment.hpp"
#include "sparta/io.hpp"
#include "sparta/planner.hpp"
#include "sparta/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparta;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kInfeasible = 4 };

// Seed streams of the CLI; independent of the ones inside run_experiment.
constexpr std::uint64_t kTagTerrain = 101;
constexpr std::uint64_t kTagTrainSet = 102;
constexpr std::uint64_t kTagTestSet = 103;
constexpr std::uint64_t kTagInit = 104;
constexpr std::uint64_t kTagOrder = 105;
constexpr std::uint64_t kTagFeatureCloud = 106;
constexpr std::uint64_t kTagRollouts = 107;
constexpr std::uint64_t kTagBench = 108;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config;
};

// Options whose resolved values go into the manifest. Paths to outputs and
// the config file itself are left out so a manifest replays into any --out.
json resolved_args(const CLI::App& sub, std::initializer_list<const char*> skip = {}) {
  json args = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (std::find_if(skip.begin(), skip.end(), [&](const char* s) { return name == s; }) != skip.end()) {
      continue;
    }
    if (opt->count() > 0) {
      const auto res = opt->reduced_results();
      args[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else if (!opt->get_default_str().empty()) {
      args[name] = opt->get_default_str();
    }
  }
  return args;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, std::uint64_t seed,
                    json args, std::optional<json> extra_key = std::nullopt,
                    const std::string& extra_name = "") {
  json m = {{"tool", "sparta"},
            {"version", kVersion},
            {"format", io::kFormatVersion},
            {"subcommand", subcommand},
            {"seed", seed},
            {"args", std::move(args)}};
  if (extra_key) m[extra_name] = std::move(*extra_key);
  io::write_json_file(dir / "manifest.json", m);
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

std::string num(double v) { return fmt::format("{}", v); }

Terrain load_terrain(const std::string& path) {
  if (fs::path(path).extension() == ".bin") return io::read_terrain_binary(path);
  return io::terrain_from_json(io::read_json_file(path));
}

SpartaModel load_model(const std::string& path) { return io::model_from_json(io::read_json_file(path)); }

Vec2 parse_point(const std::string& s, const char* what) {
  double x = 0.0;
  double y = 0.0;
  char comma = 0;
  std::istringstream is(s);
  if (!(is >> x >> comma >> y) || comma != ',' || !(is >> std::ws).eof()) {
    throw UsageError(std::string(what) + " must look like x,y (meters), got '" + s + "'");
  }
  return {x, y};
}

// ---- gen ----

struct GenArgs {
  std::string kind;
  double length = 40.0;
  double width = 4.0;
  double density = 0.5;
  int obstacles = 10;
  int rows = 81;
  int cols = 81;
  int patches = 100;
  int test_patches = 20;
  int angles = 8;
  int draws = 200;
  int bins = 8;
  int points_per_cell = 2;
  double patch_side = 1.2;
  double flat_keep = 0.25;
};

void add_gen(CLI::App& app, GenArgs& a) {
  auto* g = app.add_subcommand("gen", "Generate a terrain and a labelled patch dataset");
  g->add_option("--kind", a.kind, "obstacle_row | boulder_field | flat (required)");
  g->add_option("--length", a.length, "Boulder field length along x (m)");
  g->add_option("--width", a.width, "Boulder field width (m)");
  g->add_option("--density", a.density, "Boulders per square meter");
  g->add_option("--obstacles", a.obstacles, "Obstacles in the row");
  g->add_option("--rows", a.rows, "Flat terrain rows");
  g->add_option("--cols", a.cols, "Flat terrain columns");
  g->add_option("--patches", a.patches, "Training patches (0: terrain only)");
  g->add_option("--test-patches", a.test_patches, "Held-out patches (0: none)");
  g->add_option("--angles", a.angles, "Approach angles per patch");
  g->add_option("--draws", a.draws, "Oracle draws per (patch, angle)");
  g->add_option("--bins", a.bins, "Histogram bins on [0, 1]");
  g->add_option("--points-per-cell", a.points_per_cell);
  g->add_option("--patch-side", a.patch_side, "Patch side length (m)");
  g->add_option("--flat-keep", a.flat_keep, "Chance of keeping a flat patch");
}

TerrainSpec terrain_spec(const GenArgs& a) {
  TerrainSpec s;
  s.kind = a.kind;
  s.obstacle_row.num_obstacles = a.obstacles;
  s.boulder_field.length_m = a.length;
  s.boulder_field.width_m = a.width;
  s.boulder_field.density = a.density;
  s.flat_rows = a.rows;
  s.flat_cols = a.cols;
  return s;
}

int run_gen(const CLI::App& sub, const GenArgs& a, const Globals& gl) {
  if (a.kind.empty()) throw UsageError("gen: --kind is required\n" + sub.help());
  const TerrainSpec spec = terrain_spec(a);
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const Terrain t = spec.generate(derive_seed(gl.seed, kTagTerrain));
  const fs::path dir = prepare_out(gl.out);
  io::write_json_file(dir / "terrain.json", io::to_json(t));
  io::write_terrain_binary(t, dir / "terrain.bin");
  spdlog::info("gen: terrain {}x{} cells, {} x {} m", t.rows(), t.cols(), num(t.extent_x()),
               num(t.extent_y()));

  if (a.patches > 0) {
    DatasetSpec ds;
    ds.patches = a.patches;
    ds.angles_per_patch = a.angles;
    ds.draws = a.draws;
    ds.points_per_cell = a.points_per_cell;
    ds.patch_side = a.patch_side;
    ds.flat_keep_probability = a.flat_keep;
    const BinGeometry geometry(a.bins, 0.0, 1.0);
    const VehicleSpec v;
    io::write_dataset(generate_dataset(t, v, ds, geometry, derive_seed(gl.seed, kTagTrainSet)),
                      dir / "dataset.jsonl");
    if (a.test_patches > 0) {
      ds.patches = a.test_patches;
      io::write_dataset(generate_dataset(t, v, ds, geometry, derive_seed(gl.seed, kTagTestSet), a.patches),
                        dir / "test.jsonl");
    }
    spdlog::info("gen: {} training patches x {} angles", a.patches, a.angles);
  }
  write_manifest(dir, "gen", gl.seed, resolved_args(sub));
  return kOk;
}

// ---- fit / train ----

struct TrainArgs {
  std::string data;
  std::string test;
  std::string head = "sparta";
  int bins = 0;
  int max_frequency = 3;
  double lr = 0.5;
  int epochs = 12;
  int batch_size = 16;
  double init_scale = 1.0;
  int patch_id = -1;
};

void add_train_options(CLI::App* s, TrainArgs& a, bool fit) {
  s->add_option("--data", a.data, "Training dataset (JSON lines)");
  s->add_option("--test", a.test, "Held-out dataset (JSON lines)");
  s->add_option("--max-frequency", a.max_frequency, "Highest harmonic n");
  s->add_option("--bins", a.bins, "Expected bin count (0: take it from the data)");
  s->add_option("--lr", a.lr, "Learning rate");
  s->add_option("--epochs", a.epochs);
  if (fit) {
    s->add_option("--patch-id", a.patch_id, "Patch to fit (-1: first patch in the data)");
  } else {
    s->add_option("--head", a.head, "sparta | angle_input | angle_free");
    s->add_option("--batch-size", a.batch_size);
    s->add_option("--init-scale", a.init_scale, "Weight init scale");
  }
}

Dataset load_dataset(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  Dataset d = io::read_dataset(path);
  if (d.items.empty()) throw FormatError(path + " holds no items");
  return d;
}

std::string loss_csv(const std::vector<EpochLoss>& trace) {
  std::string s = "epoch,train_emd2,test_emd2\n";
  for (const auto& row : trace) {
    s += fmt::format("{},{},{}\n", row.epoch, row.train, row.test ? num(*row.test) : std::string());
  }
  return s;
}

void check_bins(const TrainArgs& a, const Dataset& d) {
  const int bins = d.items.front().target.geometry().num_bins();
  if (a.bins != 0 && a.bins != bins) {
    throw UsageError(fmt::format("--bins {} does not match the dataset ({} bins)", a.bins, bins));
  }
}

int run_train(const CLI::App& sub, const TrainArgs& a, const Globals& gl) {
  const Dataset data = load_dataset(a.data, "--data");
  check_bins(a, data);
  std::optional<Dataset> test;
  if (!a.test.empty()) test = load_dataset(a.test, "--test");

  ModelConfig mc;
  try {
    mc.head = head_kind_from_string(a.head);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  mc.geometry = data.items.front().target.geometry();
  mc.bins = mc.geometry.num_bins();
  mc.max_frequency = a.max_frequency;
  mc.weight_init_scale = a.init_scale;
  mc.seed = derive_seed(gl.seed, kTagInit);
  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.seed = derive_seed(gl.seed, kTagOrder);
  tc.weight_init_scale = a.init_scale;

  const TrainResult r = train(SpartaModel::create(mc), data, tc, test ? &*test : nullptr);
  const fs::path dir = prepare_out(gl.out);
  io::write_json_file(dir / "model.json", io::to_json(r.model));
  io::write_text_file(dir / "loss.csv", loss_csv(r.trace));
  write_manifest(dir, "train", gl.seed, resolved_args(sub));
  spdlog::info("train: {} head, final train EMD^2 {}", a.head, num(r.trace.back().train));
  return kOk;
}

std::vector<AngleSample> patch_samples(const Dataset& d, int patch_id) {
  std::vector<AngleSample> out;
  for (const auto& item : d.items) {
    if (item.patch_id == patch_id) out.emplace_back(item.phi, item.target);
  }
  return out;
}

int run_fit(const CLI::App& sub, const TrainArgs& a, const Globals& gl) {
  const Dataset data = load_dataset(a.data, "--data");
  check_bins(a, data);
  const int id = a.patch_id >= 0 ? a.patch_id : data.items.front().patch_id;
  const std::vector<AngleSample> train_samples = patch_samples(data, id);
  if (train_samples.empty()) throw UsageError(fmt::format("no items with patch id {}", id));
  std::vector<AngleSample> test_samples;
  if (!a.test.empty()) test_samples = patch_samples(load_dataset(a.test, "--test"), id);

  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.epochs = a.epochs;
  const int bins = data.items.front().target.geometry().num_bins();
  FitResult r = fit_patch_direct_traced(train_samples, a.max_frequency, bins, tc);
  if (!test_samples.empty()) {
    // The trace only knows the training samples; the held-out column is the final fit.
    r.trace.back().test = mean_function_loss(r.function, test_samples);
  }
  const fs::path dir = prepare_out(gl.out);
  io::write_json_file(dir / "function.json", io::to_json(r.function));
  io::write_text_file(dir / "loss.csv", loss_csv(r.trace));
  write_manifest(dir, "fit", gl.seed, resolved_args(sub));
  spdlog::info("fit: patch {} from {} angles, train EMD^2 {}", id, train_samples.size(),
               num(r.trace.back().train));
  return kOk;
}

// ---- plan ----

struct PlanArgs {
  std::string terrain;
  std::string model;
  std::string algorithm;
  double alpha = 0.9;
  double threshold = 1.0;
  double risk_weight = 10.0;
  double distance_weight = 1.0;
  double cell_size = 0.5;
  int headings = 8;
  double patch_side = 1.2;
  std::string start;
  std::string goal;
  double end_margin = 0.8;
  int trials = 100;
  double damage_threshold = kDefaultDamageThreshold;
  int points_per_cell = 2;
};

void add_plan(CLI::App& app, PlanArgs& a) {
  auto* s = app.add_subcommand("plan", "Plan across a terrain and roll the path out");
  s->add_option("--terrain", a.terrain, "Terrain file (.json or .bin)");
  s->add_option("--model", a.model, "Model checkpoint (not needed for elev)");
  s->add_option("--algorithm", a.algorithm, "ours | angle_input | elev (default: from the model head)");
  s->add_option("--alpha", a.alpha, "CVaR level");
  s->add_option("--threshold", a.threshold, "Edges with CVaR above this are infeasible");
  s->add_option("--risk-weight", a.risk_weight);
  s->add_option("--distance-weight", a.distance_weight);
  s->add_option("--cell-size", a.cell_size, "Lattice cell size (m)");
  s->add_option("--headings", a.headings, "4, 8 or 16");
  s->add_option("--patch-side", a.patch_side, "Edge patch side length (m)");
  s->add_option("--start", a.start, "x,y in meters (default: near the low-x end, mid-width)");
  s->add_option("--goal", a.goal, "x,y in meters (default: near the high-x end, mid-width)");
  s->add_option("--end-margin", a.end_margin, "Default start/goal distance from the ends (m)");
  s->add_option("--trials", a.trials, "Rollouts of the planned path");
  s->add_option("--damage-threshold", a.damage_threshold);
  s->add_option("--points-per-cell", a.points_per_cell);
}

json path_json(const PlanResult& p) {
  json nodes = json::array();
  for (const auto& n : p.path) nodes.push_back({n.cell.x, n.cell.y, n.heading});
  json edges = json::array();
  for (std::size_t i = 0; i < p.edges.size(); ++i) {
    const auto& e = p.edges[i];
    edges.push_back({{"from", {e.from.x, e.from.y}},
                     {"to", {e.to.x, e.to.y}},
                     {"phi", e.phi.radians()},
                     {"length", e.length},
                     {"cvar", p.per_edge_cvar[i]}});
  }
  return {{"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"total_distance", p.total_distance},
          {"total_cost", p.total_cost},
          {"max_edge_cvar", p.max_edge_cvar}};
}

int run_plan(const CLI::App& sub, const PlanArgs& a, const Globals& gl) {
  if (a.terrain.empty()) throw UsageError("plan: --terrain is required");
  if (a.trials < 1) throw UsageError("plan: --trials must be >= 1");
  const Terrain t = load_terrain(a.terrain);
  std::optional<SpartaModel> model;
  if (!a.model.empty()) model = load_model(a.model);
  std::string algorithm = a.algorithm;
  if (algorithm.empty()) {
    if (!model) throw UsageError("plan: give --model or --algorithm elev");
    algorithm = model->head_kind == HeadKind::sparta ? "ours" : "angle_input";
  }
  if (algorithm != "ours" && algorithm != "angle_input" && algorithm != "elev") {
    throw UsageError("plan: unknown algorithm '" + algorithm + "'");
  }
  if (algorithm != "elev" && !model) throw UsageError("plan: --model is required for " + algorithm);

  const LatticeGraph g = LatticeGraph::build(t, a.cell_size, a.headings, a.patch_side, "plan");
  const double mid_y = t.origin().y + 0.5 * t.extent_y();
  const Vec2 start = a.start.empty() ? Vec2{t.origin().x + a.end_margin, mid_y} : parse_point(a.start, "--start");
  const Vec2 goal = a.goal.empty() ? Vec2{t.origin().x + t.extent_x() - a.end_margin, mid_y}
                                   : parse_point(a.goal, "--goal");
  if (!t.contains(start) || !t.contains(goal)) throw UsageError("plan: start and goal must lie on the terrain");
  PlanQuery q;
  q.start = g.nearest_cell(start);
  q.goal = g.nearest_cell(goal);
  q.alpha = CvarLevel(a.alpha);
  q.risk_threshold = a.threshold;
  q.weights = {a.distance_weight, a.risk_weight};
  q.validate();

  const FeatureSettings fs{a.points_per_cell, derive_seed(gl.seed, kTagFeatureCloud)};
  const fs::path dir = prepare_out(gl.out);
  PlanResult p;
  try {
    if (algorithm == "elev") {
      p = plan_elev_baseline(g, t, VehicleSpec{}, q);
    } else if (algorithm == "ours") {
      CoefficientCache cache;
      FunctionRisk risk(model_compute(t, *model, fs), model->geometry, &cache);
      p = plan(g, risk, q);
    } else {
      ReinferenceRisk risk(t, *model, fs);
      p = plan(g, risk, q);
    }
  } catch (const NoPath& e) {
    const json reason = {{"error", "no_path"},
                         {"reason", e.what()},
                         {"start", {q.start.x, q.start.y}},
                         {"goal", {q.goal.x, q.goal.y}},
                         {"risk_threshold", a.threshold}};
    io::write_json_file(dir / "no_path.json", reason);
    write_manifest(dir, "plan", gl.seed, resolved_args(sub));
    std::cout << reason.dump() << "\n";
    return kInfeasible;
  }

  const std::uint64_t rollout_seed = derive_seed(gl.seed, kTagRollouts);
  std::string csv = "trial,success\n";
  int successes = 0;
  for (int i = 0; i < a.trials; ++i) {
    // Same draws as one evaluate_rollout call over all trials.
    const RolloutStats s = evaluate_rollout(t, p, VehicleSpec{}, 1, a.damage_threshold,
                                            rollout_seed + static_cast<std::uint64_t>(i));
    successes += s.successes;
    csv += fmt::format("{},{}\n", i, s.successes);
  }
  json out = path_json(p);
  out["algorithm"] = algorithm;
  out["alpha"] = a.alpha;
  out["rollout"] = {{"trials", a.trials},
                    {"successes", successes},
                    {"damages", a.trials - successes},
                    {"success_rate", static_cast<double>(successes) / a.trials}};
  io::write_json_file(dir / "plan.json", out);
  io::write_text_file(dir / "rollout.csv", csv);
  write_manifest(dir, "plan", gl.seed, resolved_args(sub));
  spdlog::info("plan: {} edges, cost {}, {}/{} rollouts succeeded", p.edges.size(), num(p.total_cost),
               successes, a.trials);
  return kOk;
}

// ---- experiment ----

struct ExperimentArgs {
  std::string spec;
  int trials = 0;
  std::string kind;
};

int run_experiment_cmd(const CLI::App& sub, const ExperimentArgs& a, const Globals& gl,
                       const std::optional<json>& inline_config, bool seed_given) {
  json base = json::object();
  if (!a.spec.empty()) {
    base = io::read_json_file(a.spec);
    // A manifest works as a spec too.
    if (base.contains("experiment")) base = base.at("experiment");
  } else if (inline_config) {
    base = *inline_config;
  }
  ExperimentConfig c;
  try {
    c = experiment_config_from_json(base);
    if (a.trials > 0) c.trials = a.trials;
    if (!a.kind.empty()) c.terrain.kind = a.kind;
    if (seed_given) c.seed = gl.seed;
    c.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const ExperimentReport r = run_experiment(c);
  const fs::path dir = prepare_out(gl.out);
  io::write_text_file(dir / "report.csv", report_csv(r));
  io::write_text_file(dir / "success_plot.csv", success_plot_csv(r));
  io::write_json_file(dir / "report.json", report_json(r));
  io::write_json_file(dir / "experiment_config.json", to_json(c));
  write_manifest(dir, "experiment", c.seed, resolved_args(sub, {"spec"}), to_json(c), "experiment");
  for (const auto& check : r.checks) {
    spdlog::info("experiment: {} {} ({} vs {})", check.name, check.holds ? "holds" : "VIOLATED",
                 num(check.lhs), num(check.rhs));
  }
  return kOk;
}

// ---- bench ----

struct BenchArgs {
  std::string model;
  std::string angle_model;
  std::string terrain;
  int queries = 100000;
  int patches = 256;
  int points_per_cell = 2;
};

struct Timing {
  double qps = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
};

Timing summarize(std::vector<std::int64_t>& ns, double seconds) {
  Timing t;
  t.qps = static_cast<double>(ns.size()) / seconds;
  auto pct = [&](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(ns.size() - 1));
    std::nth_element(ns.begin(), ns.begin() + static_cast<std::ptrdiff_t>(k), ns.end());
    return static_cast<double>(ns[k]);
  };
  t.p50 = pct(0.5);
  t.p99 = pct(0.99);
  return t;
}

int run_bench(const CLI::App& sub, const BenchArgs& a, const Globals& gl) {
  if (a.model.empty()) throw UsageError("bench: --model (a sparta checkpoint) is required");
  if (a.queries < 1 || a.patches < 1) throw UsageError("bench: --queries and --patches must be >= 1");
  const SpartaModel ours = load_model(a.model);
  if (ours.head_kind != HeadKind::sparta) throw UsageError("bench: --model must have a sparta head");
  SpartaModel reinfer;
  if (!a.angle_model.empty()) {
    reinfer = load_model(a.angle_model);
    if (reinfer.head_kind != HeadKind::angle_input) {
      throw UsageError("bench: --angle-model must have an angle_input head");
    }
  } else {
    // Throughput does not depend on the weight values.
    ModelConfig mc;
    mc.head = HeadKind::angle_input;
    mc.bins = ours.bins;
    mc.geometry = ours.geometry;
    mc.seed = derive_seed(gl.seed, kTagBench, 1);
    reinfer = SpartaModel::create(mc);
    spdlog::info("bench: no --angle-model, timing a freshly initialized angle_input network");
  }

  TerrainSpec ts;
  const Terrain t = a.terrain.empty() ? ts.generate(derive_seed(gl.seed, kTagBench)) : load_terrain(a.terrain);
  DatasetSpec ds;
  ds.patches = a.patches;
  ds.points_per_cell = a.points_per_cell;
  const std::vector<PatchRecord> patches = sample_patches(t, ds, derive_seed(gl.seed, kTagBench, 2));

  std::vector<PatchKey> keys;
  CoefficientCache cache;
  for (const auto& rec : patches) {
    keys.push_back(PatchKey::make("bench-" + std::to_string(rec.patch_id), {rec.center.x - t.origin().x, rec.center.y - t.origin().y},
                                  t.resolution(), ds.patch_side));
    cache.get_or_compute(keys.back(), [&] { return forward_function(ours, rec.features); });
  }

  std::mt19937_64 rng(derive_seed(gl.seed, kTagBench, 3));
  std::uniform_int_distribution<std::size_t> pick(0, patches.size() - 1);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::vector<std::pair<std::size_t, AngleOfApproach>> work;
  work.reserve(static_cast<std::size_t>(a.queries));
  for (int i = 0; i < a.queries; ++i) {
    const std::size_t p = pick(rng);
    work.emplace_back(p, AngleOfApproach(angle(rng)));
  }
  const CvarLevel alpha(0.9);
  const auto no_compute = [&]() -> FourierRiskFunction { throw CacheFull("bench cache was not warm"); };

  using clock = std::chrono::steady_clock;
  std::vector<std::int64_t> cached_ns(work.size());
  std::vector<std::int64_t> reinfer_ns(work.size());
  double sink = 0.0;
  const auto c0 = clock::now();
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto q0 = clock::now();
    const auto [f, hit] = cache.get_or_compute(keys[work[i].first], no_compute);
    sink += query_risk(f, work[i].second, alpha, ours.geometry);
    cached_ns[i] = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - q0).count();
  }
  const double cached_s = std::chrono::duration<double>(clock::now() - c0).count();
  const auto r0 = clock::now();
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto q0 = clock::now();
    sink += cvar(predict_distribution(reinfer, patches[work[i].first].features, work[i].second), alpha);
    reinfer_ns[i] = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - q0).count();
  }
  const double reinfer_s = std::chrono::duration<double>(clock::now() - r0).count();

  // Cached answers must equal a fresh evaluation of the same model.
  bool matches = true;
  for (std::size_t i = 0; i < std::min<std::size_t>(work.size(), 1000); ++i) {
    const auto& [p, phi] = work[i];
    const double fresh = query_risk(forward_function(ours, patches[p].features), phi, alpha, ours.geometry);
    const double cached = query_risk(*cache.find(keys[p]), phi, alpha, ours.geometry);
    matches = matches && fresh == cached;
  }

  const Timing c = summarize(cached_ns, cached_s);
  const Timing r = summarize(reinfer_ns, reinfer_s);
  const json report = {{"cached_qps", c.qps},
                       {"reinfer_qps", r.qps},
                       {"ratio", c.qps / r.qps},
                       {"p50_ns", c.p50},
                       {"p99_ns", c.p99},
                       {"reinfer_p50_ns", r.p50},
                       {"reinfer_p99_ns", r.p99},
                       {"queries", a.queries},
                       {"patches", a.patches},
                       {"alpha", alpha.alpha()},
                       {"cached_matches_fresh", matches},
                       {"checksum", sink}};
  const fs::path dir = prepare_out(gl.out);
  io::write_json_file(dir / "bench.json", report);
  write_manifest(dir, "bench", gl.seed, resolved_args(sub));
  spdlog::info("bench: cached {} q/s, re-inference {} q/s, ratio {}", num(c.qps), num(r.qps),
               num(c.qps / r.qps));
  return kOk;
}

// ---- cvar-sweep ----

struct SweepArgs {
  std::string model;
  std::string terrain;
  int patches = 4;
  double alpha = 0.9;
  int steps = 360;
  int points_per_cell = 2;
};

int run_sweep(const CLI::App& sub, const SweepArgs& a, const Globals& gl) {
  if (a.model.empty()) throw UsageError("cvar-sweep: --model is required");
  if (a.steps < 1 || a.patches < 1) throw UsageError("cvar-sweep: --steps and --patches must be >= 1");
  const SpartaModel m = load_model(a.model);
  const CvarLevel alpha(a.alpha);
  TerrainSpec ts;
  const Terrain t = a.terrain.empty() ? ts.generate(derive_seed(gl.seed, kTagTerrain)) : load_terrain(a.terrain);
  DatasetSpec ds;
  ds.patches = a.patches;
  ds.points_per_cell = a.points_per_cell;
  ds.flat_keep_probability = 0.0;
  const std::vector<PatchRecord> patches = sample_patches(t, ds, derive_seed(gl.seed, kTagTestSet));

  const fs::path dir = prepare_out(gl.out);
  std::string index = "patch,center_x,center_y,file\n";
  for (const auto& rec : patches) {
    std::string csv = "phi,cvar\n";
    std::optional<FourierRiskFunction> f;
    if (m.head_kind == HeadKind::sparta) f = forward_function(m, rec.features);
    for (int k = 0; k < a.steps; ++k) {
      const AngleOfApproach phi(kTwoPi * k / a.steps);
      const double v = f ? query_risk(*f, phi, alpha, m.geometry)
                         : cvar(predict_distribution(m, rec.features, phi), alpha);
      csv += num(phi.radians()) + "," + num(v) + "\n";
    }
    const std::string file = fmt::format("sweep_patch{}.csv", rec.patch_id);
    io::write_text_file(dir / file, csv);
    index += fmt::format("{},{},{},{}\n", rec.patch_id, num(rec.center.x), num(rec.center.y), file);
  }
  io::write_text_file(dir / "sweep_index.csv", index);
  write_manifest(dir, "cvar-sweep", gl.seed, resolved_args(sub));
  return kOk;
}

// ---- --config expansion ----

const std::vector<std::string> kSubcommands{"gen", "fit", "train", "plan", "experiment", "bench", "cvar-sweep"};

std::string arg_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

struct Expanded {
  std::vector<std::string> args;
  std::optional<json> experiment;
};

// Inserts the config's options right after the subcommand, so options given
// on the command line (parsed later, last one wins) override them.
Expanded expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  Expanded out;
  if (path.empty()) {
    out.args = std::move(args);
    return out;
  }
  json cfg;
  try {
    cfg = io::read_json_file(path);
  } catch (const FormatError& e) {
    throw UsageError(std::string("--config: ") + e.what());
  }
  if (!cfg.is_object()) throw UsageError("--config must hold a JSON object");
  const json opts = cfg.contains("args") ? cfg.at("args") : cfg;
  if (!opts.is_object()) throw UsageError("--config: \"args\" must be an object");
  if (cfg.contains("experiment")) out.experiment = cfg.at("experiment");

  std::vector<std::string> injected;
  for (const auto& [k, v] : opts.items()) {
    if (k == "subcommand" || k == "seed" || k == "tool" || k == "version" || k == "format" ||
        k == "experiment") {
      continue;
    }
    if (v.is_array()) {
      for (const auto& e : v) injected.push_back("--" + k + "=" + arg_value(e));
    } else {
      injected.push_back("--" + k + "=" + arg_value(v));
    }
  }
  auto sub = std::find_if(args.begin(), args.end(), [](const std::string& s) {
    return std::find(kSubcommands.begin(), kSubcommands.end(), s) != kSubcommands.end();
  });
  if (sub == args.end()) {
    if (!cfg.contains("subcommand")) throw UsageError("--config names no subcommand; give one");
    args.push_back(cfg.at("subcommand").get<std::string>());
    sub = args.end() - 1;
  }
  const auto pos = sub - args.begin() + 1;
  args.insert(args.begin() + pos, injected.begin(), injected.end());
  if (cfg.contains("seed")) args.insert(args.begin(), "--seed=" + arg_value(cfg.at("seed")));
  out.args = std::move(args);
  return out;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sparta");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SPARTA_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("SPARTA_LOG='{}' is not a level; keeping info", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

int run(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Angle-aware traversability risk: data, training, planning and benchmarks", "sparta"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  Globals gl;
  app.add_option("--seed", gl.seed, "Base seed");
  app.add_option("--out", gl.out, "Output directory");
  app.add_option("--config", gl.config, "JSON file of option values, e.g. a manifest.json");

  GenArgs gen;
  add_gen(app, gen);
  TrainArgs fit;
  add_train_options(app.add_subcommand("fit", "Fit one patch's Fourier coefficients directly"), fit, true);
  TrainArgs tr;
  add_train_options(app.add_subcommand("train", "Train a network on a dataset"), tr, false);
  PlanArgs pl;
  add_plan(app, pl);
  ExperimentArgs ex;
  auto* exp = app.add_subcommand("experiment", "Ablation grid of planners over seeded trials");
  exp->add_option("--spec", ex.spec, "Experiment config JSON (or a manifest)");
  exp->add_option("--trials", ex.trials, "Override the trial count (0: keep)");
  exp->add_option("--kind", ex.kind, "Override the terrain kind");
  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Cached query_risk vs angle_input re-inference throughput");
  bench->add_option("--model", be.model, "sparta-head checkpoint");
  bench->add_option("--angle-model", be.angle_model, "angle_input checkpoint (default: fresh init)");
  bench->add_option("--terrain", be.terrain, "Terrain file (default: generated obstacle row)");
  bench->add_option("--queries", be.queries);
  bench->add_option("--patches", be.patches);
  bench->add_option("--points-per-cell", be.points_per_cell);
  SweepArgs sw;
  auto* sweep = app.add_subcommand("cvar-sweep", "CVaR against approach angle, one CSV per patch");
  sweep->add_option("--model", sw.model, "Checkpoint (any head)");
  sweep->add_option("--terrain", sw.terrain, "Terrain file (default: generated obstacle row)");
  sweep->add_option("--patches", sw.patches);
  sweep->add_option("--alpha", sw.alpha);
  sweep->add_option("--steps", sw.steps, "Angles over the full circle");
  sweep->add_option("--points-per-cell", sw.points_per_cell);

  Expanded expanded;
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    expanded = expand_config(std::move(args));
    std::vector<std::string> reversed(expanded.args.rbegin(), expanded.args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  const bool seed_given = app.get_option("--seed")->count() > 0;
  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen") return run_gen(*sub, gen, gl);
    if (name == "fit") return run_fit(*sub, fit, gl);
    if (name == "train") return run_train(*sub, tr, gl);
    if (name == "plan") return run_plan(*sub, pl, gl);
    if (name == "experiment") return run_experiment_cmd(*sub, ex, gl, expanded.experiment, seed_given);
    if (name == "bench") return run_bench(*sub, be, gl);
    if (name == "cvar-sweep") return run_sweep(*sub, sw, gl);
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NoPath& e) {
    std::cout << json{{"error", "no_path"}, {"reason", e.what()}}.dump() << "\n";
    return kInfeasible;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  } catch (const CacheFull& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  } catch (const Error& e) {
    // Remaining library errors reject the given parameters.
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
