#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sparta/angle_fourier.hpp"
#include "sparta/dense_network.hpp"
#include "sparta/features.hpp"
#include "sparta/risk_dist.hpp"

namespace sparta {

enum class HeadKind { sparta, angle_input, angle_free };

std::string_view to_string(HeadKind h);
HeadKind head_kind_from_string(std::string_view s);

inline constexpr int kTrunkHidden = 512;
inline constexpr int kTrunkOutput = 256;
inline constexpr int kSpartaHidden = 512;
inline constexpr int kAngleEmbedHidden = 16;
inline constexpr int kAngleEmbedDim = 32;
inline constexpr int kAngleInputHidden = 64;
inline constexpr int kAngleFreeHidden1 = 128;
inline constexpr int kAngleFreeHidden2 = 64;

struct ModelConfig {
  HeadKind head = HeadKind::sparta;
  int bins = 8;
  int max_frequency = 3;
  BinGeometry geometry{8, 0.0, 1.0};
  double positivity_floor = kDefaultPositivityFloor;
  double weight_init_scale = 1.0;
  std::uint64_t seed = 0;
};

// Pillar-feature trunk (400 -> 512 -> 256, relu) followed by one of three heads:
//   sparta:      256 -> 512 -> B(2n+1) Fourier coefficients, bin-major
//   angle_input: [256 trunk | 32 angle embedding] -> 64 -> B concentrations,
//                embedding 1 -> 16 -> 32
//   angle_free:  256 -> 128 -> 64 -> B concentrations
struct SpartaModel {
  HeadKind head_kind = HeadKind::sparta;
  int bins = 8;
  int max_frequency = 3;
  BinGeometry geometry{8, 0.0, 1.0};
  double positivity_floor = kDefaultPositivityFloor;
  DenseNetwork trunk;
  DenseNetwork head;
  std::optional<DenseNetwork> angle_embedding;

  static SpartaModel create(const ModelConfig& cfg);

  // Throws DimensionError when the networks do not fit the head layout.
  void validate() const;
  int coefficients_per_bin() const { return 2 * max_frequency + 1; }
  std::size_t parameter_count() const;

  friend bool operator==(const SpartaModel&, const SpartaModel&) = default;
};

using Prediction = std::variant<FourierRiskFunction, ConcentrationVector>;

// phi is required for angle_input and must be absent for the other heads;
// violations raise HeadContractError.
Prediction forward(const SpartaModel& m, const FeatureGrid& g,
                   std::optional<AngleOfApproach> phi = std::nullopt);

// Sparta head only.
FourierRiskFunction forward_function(const SpartaModel& m, const FeatureGrid& g);
// Risk distribution at phi for any head (the angle_free head ignores phi).
RiskDistribution predict_distribution(const SpartaModel& m, const FeatureGrid& g,
                                      AngleOfApproach phi);

struct DatasetItem {
  FeatureGrid features;
  AngleOfApproach phi;
  RiskDistribution target;
  int patch_id = 0;
};

struct ModelGradient {
  DenseGradient trunk;
  DenseGradient head;
  std::optional<DenseGradient> angle_embedding;
};

ModelGradient zero_gradient(const SpartaModel& m);

// EMD^2 between normalize(softplus(raw) + floor) and target. When d_raw is
// non-null it receives d loss / d raw (raw.size() entries).
double raw_emd2(std::span<const double> raw, const RiskDistribution& target,
                double positivity_floor, double* d_raw);

double loss(const SpartaModel& m, const DatasetItem& item);

struct LossAndGradient {
  double loss = 0.0;
  ModelGradient gradient;
};

LossAndGradient backward(const SpartaModel& m, const DatasetItem& item);

// Sum of per-item losses over `items`, accumulating the summed gradient into
// `grad` when given. One batched pass through the networks.
double batch_loss(const SpartaModel& m, std::span<const DatasetItem* const> items,
                  ModelGradient* grad);

// Views over every trainable parameter, in a fixed order shared with gradient_blocks.
std::vector<std::span<double>> parameter_blocks(SpartaModel& m);
std::vector<std::span<double>> gradient_blocks(ModelGradient& g);

}  // namespace sparta
