#include "sparta/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparta/errors.hpp"

namespace sparta::io {

namespace {

constexpr char kTerrainMagic[4] = {'S', 'P', 'T', 'R'};

template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError&) {
    throw;
  } catch (const Json::exception& e) {
    throw FormatError("malformed " + what + ": " + e.what());
  } catch (const Error& e) {
    throw FormatError("invalid " + what + ": " + e.what());
  }
}

std::vector<double> doubles(const Json& j) { return j.get<std::vector<double>>(); }

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_le(std::istream& is, int bytes) {
  unsigned char b[8] = {};
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw FormatError("truncated terrain binary");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void check_version(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("version")) {
    throw FormatError(what + " has no version field");
  }
  const Json& v = j.at("version");
  if (!v.is_number_integer() || v.get<long long>() != kFormatVersion) {
    throw FormatError(what + " has unsupported version " + v.dump() + " (expected " +
                      std::to_string(kFormatVersion) + ")");
  }
}

Json to_json(const FourierRiskFunction& f) {
  Json bins = Json::array();
  for (const auto& b : f.bins()) {
    bins.push_back({{"constant", b.constant}, {"cosine", b.cosine}, {"sine", b.sine}});
  }
  return {{"version", kFormatVersion},
          {"num_bins", f.num_bins()},
          {"max_frequency", f.max_frequency()},
          {"positivity_floor", f.positivity_floor()},
          {"bins", std::move(bins)}};
}

FourierRiskFunction function_from_json(const Json& j) {
  return guarded("Fourier risk function", [&] {
    check_version(j, "Fourier risk function");
    const int num_bins = j.at("num_bins").get<int>();
    const int n = j.at("max_frequency").get<int>();
    std::vector<FourierCoefficients> bins;
    for (const auto& b : j.at("bins")) {
      FourierCoefficients c;
      c.constant = b.at("constant").get<double>();
      c.cosine = doubles(b.at("cosine"));
      c.sine = doubles(b.at("sine"));
      if (c.max_frequency() != n) throw FormatError("bin max_frequency disagrees with header");
      bins.push_back(std::move(c));
    }
    if (static_cast<int>(bins.size()) != num_bins) {
      throw FormatError("bin count disagrees with header");
    }
    return FourierRiskFunction(std::move(bins), j.at("positivity_floor").get<double>());
  });
}

Json to_json(const BinGeometry& g) {
  return {{"num_bins", g.num_bins()}, {"lower", g.lower()}, {"upper", g.upper()}};
}

BinGeometry geometry_from_json(const Json& j) {
  return guarded("bin geometry", [&] {
    return BinGeometry(j.at("num_bins").get<int>(), j.at("lower").get<double>(),
                       j.at("upper").get<double>());
  });
}

Json to_json(const RiskDistribution& d) {
  return {{"version", kFormatVersion},
          {"lower", d.geometry().lower()},
          {"upper", d.geometry().upper()},
          {"probs", d.probs()}};
}

RiskDistribution distribution_from_json(const Json& j) {
  return guarded("risk distribution", [&] {
    check_version(j, "risk distribution");
    std::vector<double> probs = doubles(j.at("probs"));
    const BinGeometry g(static_cast<int>(probs.size()), j.at("lower").get<double>(),
                        j.at("upper").get<double>());
    return RiskDistribution(std::move(probs), g);
  });
}

Json to_json(const Terrain& t) {
  return {{"version", kFormatVersion}, {"resolution", t.resolution()},
          {"origin", {t.origin().x, t.origin().y}}, {"rows", t.rows()},
          {"cols", t.cols()}, {"heights", t.heights()}};
}

Terrain terrain_from_json(const Json& j) {
  return guarded("terrain", [&] {
    check_version(j, "terrain");
    const auto origin = doubles(j.at("origin"));
    if (origin.size() != 2) throw FormatError("terrain origin must have two entries");
    return Terrain(j.at("rows").get<int>(), j.at("cols").get<int>(),
                   j.at("resolution").get<double>(), {origin[0], origin[1]},
                   doubles(j.at("heights")));
  });
}

void write_terrain_binary(const Terrain& t, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kTerrainMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(t.rows()));
  put_u32(os, static_cast<std::uint32_t>(t.cols()));
  put_u32(os, static_cast<std::uint32_t>(kFormatVersion));
  put_f64(os, t.resolution());
  for (double h : t.heights()) put_f64(os, h);
  if (!os) throw FormatError("failed writing " + path.string());
}

Terrain read_terrain_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kTerrainMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a terrain binary");
  }
  const auto rows = static_cast<int>(get_le(is, 4));
  const auto cols = static_cast<int>(get_le(is, 4));
  const auto version = get_le(is, 4);
  if (version != static_cast<std::uint64_t>(kFormatVersion)) {
    throw FormatError("terrain binary has unsupported version " + std::to_string(version));
  }
  const double resolution = std::bit_cast<double>(get_le(is, 8));
  if (rows < 2 || cols < 2 || static_cast<long long>(rows) * cols > (1LL << 31)) {
    throw FormatError("terrain binary has implausible dimensions");
  }
  std::vector<double> heights(static_cast<std::size_t>(rows) * cols);
  for (double& h : heights) h = std::bit_cast<double>(get_le(is, 8));
  return guarded("terrain binary", [&] {
    return Terrain(rows, cols, resolution, {}, std::move(heights));
  });
}

Json to_json(const VehicleSpec& v) {
  return {{"wheel_radius", v.wheel_radius}, {"track_width", v.track_width},
          {"wheelbase", v.wheelbase}, {"step_length", v.step_length}};
}

VehicleSpec vehicle_from_json(const Json& j) {
  return guarded("vehicle", [&] {
    VehicleSpec v;
    v.wheel_radius = j.value("wheel_radius", v.wheel_radius);
    v.track_width = j.value("track_width", v.track_width);
    v.wheelbase = j.value("wheelbase", v.wheelbase);
    v.step_length = j.value("step_length", 0.5 * v.wheel_radius);
    v.validate();
    return v;
  });
}

Json to_json(const DenseNetwork& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    layers.push_back({{"in", l.weights.cols()},
                      {"out", l.weights.rows()},
                      {"activation", std::string(to_string(l.activation))},
                      {"weights", std::move(w)},
                      {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}});
  }
  return {{"layers", std::move(layers)}};
}

DenseNetwork network_from_json(const Json& j) {
  return guarded("dense network", [&] {
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto out = lj.at("out").get<Eigen::Index>();
      const auto w = doubles(lj.at("weights"));
      const auto b = doubles(lj.at("biases"));
      if (in < 1 || out < 1 || static_cast<Eigen::Index>(w.size()) != in * out ||
          static_cast<Eigen::Index>(b.size()) != out) {
        throw FormatError("layer parameter counts disagree with its dimensions");
      }
      DenseLayer layer;
      layer.weights.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
      }
      layer.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
      layer.activation = activation_from_string(lj.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers));
  });
}

Json to_json(const SpartaModel& m) {
  return {{"version", kFormatVersion},
          {"head_kind", std::string(to_string(m.head_kind))},
          {"bins", m.bins},
          {"max_frequency", m.max_frequency},
          {"positivity_floor", m.positivity_floor},
          {"geometry", to_json(m.geometry)},
          {"trunk", to_json(m.trunk)},
          {"head", to_json(m.head)},
          {"angle_embedding", m.angle_embedding ? to_json(*m.angle_embedding) : Json(nullptr)}};
}

SpartaModel model_from_json(const Json& j) {
  return guarded("model checkpoint", [&] {
    check_version(j, "model checkpoint");
    SpartaModel m;
    m.head_kind = head_kind_from_string(j.at("head_kind").get<std::string>());
    m.bins = j.at("bins").get<int>();
    m.max_frequency = j.at("max_frequency").get<int>();
    m.positivity_floor = j.at("positivity_floor").get<double>();
    m.geometry = geometry_from_json(j.at("geometry"));
    m.trunk = network_from_json(j.at("trunk"));
    m.head = network_from_json(j.at("head"));
    if (j.contains("angle_embedding") && !j.at("angle_embedding").is_null()) {
      m.angle_embedding = network_from_json(j.at("angle_embedding"));
    }
    m.validate();
    return m;
  });
}

Json to_json(const DatasetItem& item) {
  return {{"patch_id", item.patch_id},
          {"phi", item.phi.radians()},
          {"features", item.features.values},
          {"target", to_json(item.target)}};
}

DatasetItem item_from_json(const Json& j) {
  return guarded("dataset item", [&] {
    FeatureGrid g;
    g.values = doubles(j.at("features"));
    if (static_cast<int>(g.values.size()) != kFeatureDim) {
      throw FormatError("feature vector must have " + std::to_string(kFeatureDim) + " entries");
    }
    return DatasetItem{std::move(g), AngleOfApproach(j.at("phi").get<double>()),
                       distribution_from_json(j.at("target")), j.value("patch_id", 0)};
  });
}

Json to_json(const PatchKey& key) {
  return {{"terrain_id", key.terrain_id}, {"cell_x", key.cell_x}, {"cell_y", key.cell_y},
          {"resolution", key.resolution}, {"side_length", key.side_length}};
}

PatchKey key_from_json(const Json& j) {
  return guarded("patch key", [&] {
    PatchKey k;
    k.terrain_id = j.at("terrain_id").get<std::string>();
    k.cell_x = j.at("cell_x").get<std::int64_t>();
    k.cell_y = j.at("cell_y").get<std::int64_t>();
    k.resolution = j.at("resolution").get<double>();
    k.side_length = j.at("side_length").get<double>();
    return k;
  });
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  for (const auto& item : data.items) os << to_json(item).dump() << '\n';
  if (!os) throw FormatError("failed writing " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open dataset " + path.string());
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      data.items.push_back(item_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (data.items.empty()) throw FormatError("dataset " + path.string() + " is empty");
  return data;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw FormatError(path.string() + " is empty");
  }
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace sparta::io
