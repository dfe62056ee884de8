#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sparta/angle_fourier.hpp"
#include "sparta/coeff_cache.hpp"
#include "sparta/model.hpp"
#include "sparta/risk_dist.hpp"
#include "sparta/terrain.hpp"
#include "sparta/training.hpp"

// JSON and binary encodings for the library's value types. Doubles are written
// in shortest round-trip decimal form, so every encode/decode pair is bit-exact.
// All readers throw FormatError on malformed input or an unsupported version.
namespace sparta::io {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

Json to_json(const FourierRiskFunction& f);
FourierRiskFunction function_from_json(const Json& j);

Json to_json(const RiskDistribution& d);
RiskDistribution distribution_from_json(const Json& j);

Json to_json(const BinGeometry& g);
BinGeometry geometry_from_json(const Json& j);

Json to_json(const Terrain& t);
Terrain terrain_from_json(const Json& j);

// Little-endian: "SPTR", u32 rows, u32 cols, u32 format version, f64 resolution,
// then rows*cols f64 heights row-major. The origin is not stored and reads back as (0, 0).
void write_terrain_binary(const Terrain& t, const std::filesystem::path& path);
Terrain read_terrain_binary(const std::filesystem::path& path);

Json to_json(const VehicleSpec& v);
VehicleSpec vehicle_from_json(const Json& j);

Json to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const Json& j);

Json to_json(const SpartaModel& m);
SpartaModel model_from_json(const Json& j);

Json to_json(const DatasetItem& item);
DatasetItem item_from_json(const Json& j);

Json to_json(const PatchKey& key);
PatchKey key_from_json(const Json& j);

// One JSON object per line.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Throws FormatError unless j["version"] == kFormatVersion.
void check_version(const Json& j, const std::string& what);

}  // namespace sparta::io
