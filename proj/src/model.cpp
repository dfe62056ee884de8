#include "sparta/model.hpp"

#include <array>
#include <cmath>
#include <string>

#include "sparta/errors.hpp"

namespace sparta {

std::string_view to_string(HeadKind h) {
  switch (h) {
    case HeadKind::sparta: return "sparta";
    case HeadKind::angle_input: return "angle_input";
    case HeadKind::angle_free: return "angle_free";
  }
  return "unknown";
}

HeadKind head_kind_from_string(std::string_view s) {
  if (s == "sparta") return HeadKind::sparta;
  if (s == "angle_input") return HeadKind::angle_input;
  if (s == "angle_free") return HeadKind::angle_free;
  throw InvalidArgument("unknown head kind '" + std::string(s) + "'");
}

SpartaModel SpartaModel::create(const ModelConfig& cfg) {
  if (cfg.bins != cfg.geometry.num_bins()) {
    throw DimensionError("model bins must match the bin geometry");
  }
  if (cfg.max_frequency < 1) throw InvalidArgument("max_frequency must be >= 1");
  if (!(cfg.weight_init_scale >= 0.0)) throw InvalidArgument("weight_init_scale must be >= 0");
  std::mt19937_64 rng(cfg.seed);
  SpartaModel m;
  m.head_kind = cfg.head;
  m.bins = cfg.bins;
  m.max_frequency = cfg.max_frequency;
  m.geometry = cfg.geometry;
  m.positivity_floor = cfg.positivity_floor;

  const std::array trunk_dims{kFeatureDim, kTrunkHidden, kTrunkOutput};
  m.trunk = DenseNetwork::create(trunk_dims, Activation::relu, Activation::relu,
                                 cfg.weight_init_scale, rng);
  switch (cfg.head) {
    case HeadKind::sparta: {
      const std::array dims{kTrunkOutput, kSpartaHidden, cfg.bins * (2 * cfg.max_frequency + 1)};
      m.head = DenseNetwork::create(dims, Activation::relu, Activation::identity,
                                    cfg.weight_init_scale, rng);
      break;
    }
    case HeadKind::angle_input: {
      const std::array embed_dims{1, kAngleEmbedHidden, kAngleEmbedDim};
      m.angle_embedding = DenseNetwork::create(embed_dims, Activation::relu, Activation::relu,
                                               cfg.weight_init_scale, rng);
      const std::array dims{kTrunkOutput + kAngleEmbedDim, kAngleInputHidden, cfg.bins};
      m.head = DenseNetwork::create(dims, Activation::relu, Activation::identity,
                                    cfg.weight_init_scale, rng);
      break;
    }
    case HeadKind::angle_free: {
      const std::array dims{kTrunkOutput, kAngleFreeHidden1, kAngleFreeHidden2, cfg.bins};
      m.head = DenseNetwork::create(dims, Activation::relu, Activation::identity,
                                    cfg.weight_init_scale, rng);
      break;
    }
  }
  return m;
}

void SpartaModel::validate() const {
  if (bins != geometry.num_bins()) throw DimensionError("model bins must match the bin geometry");
  if (trunk.input_dim() != kFeatureDim) throw DimensionError("trunk input must be 400-dimensional");
  const int features = trunk.output_dim();
  switch (head_kind) {
    case HeadKind::sparta:
      if (head.input_dim() != features || head.output_dim() != bins * coefficients_per_bin()) {
        throw DimensionError("sparta head must map trunk features to B(2n+1) outputs");
      }
      if (angle_embedding) throw DimensionError("sparta head has no angle embedding");
      break;
    case HeadKind::angle_input:
      if (!angle_embedding || angle_embedding->input_dim() != 1) {
        throw DimensionError("angle_input head needs a 1-D angle embedding");
      }
      if (head.input_dim() != features + angle_embedding->output_dim() || head.output_dim() != bins) {
        throw DimensionError("angle_input head must map [features | embedding] to B outputs");
      }
      break;
    case HeadKind::angle_free:
      if (head.input_dim() != features || head.output_dim() != bins) {
        throw DimensionError("angle_free head must map trunk features to B outputs");
      }
      if (angle_embedding) throw DimensionError("angle_free head has no angle embedding");
      break;
  }
}

std::size_t SpartaModel::parameter_count() const {
  return trunk.parameter_count() + head.parameter_count() +
         (angle_embedding ? angle_embedding->parameter_count() : 0);
}

namespace {

Eigen::MatrixXd feature_column(const FeatureGrid& g) {
  return Eigen::Map<const Eigen::VectorXd>(g.values.data(), kFeatureDim);
}

void check_phi_contract(const SpartaModel& m, const std::optional<AngleOfApproach>& phi) {
  switch (m.head_kind) {
    case HeadKind::angle_input:
      if (!phi) throw HeadContractError("angle_input head requires an approach angle");
      break;
    case HeadKind::sparta:
      if (phi) throw HeadContractError("sparta head returns a function of phi; do not pass phi");
      break;
    case HeadKind::angle_free:
      if (phi) throw HeadContractError("angle_free head does not accept an approach angle");
      break;
  }
}

FourierRiskFunction function_from_outputs(const SpartaModel& m, const double* out) {
  const int k = m.coefficients_per_bin();
  std::vector<FourierCoefficients> bins;
  bins.reserve(static_cast<std::size_t>(m.bins));
  for (int i = 0; i < m.bins; ++i) {
    bins.push_back(FourierCoefficients::from_packed(std::span<const double>(out + i * k, k)));
  }
  return FourierRiskFunction(std::move(bins), m.positivity_floor);
}

}  // namespace

double raw_emd2(std::span<const double> raw, const RiskDistribution& target,
                double positivity_floor, double* d_raw) {
  const std::size_t b = raw.size();
  if (static_cast<int>(b) != target.geometry().num_bins()) {
    throw DimensionError("prediction and target have different bin counts");
  }
  std::vector<double> gamma(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    gamma[i] = softplus(raw[i]) + positivity_floor;
    total += gamma[i];
  }
  std::vector<double> p(b);
  for (std::size_t i = 0; i < b; ++i) p[i] = gamma[i] / total;
  const double value = emd2(p, target.probs());
  if (d_raw != nullptr) {
    const std::vector<double> d_p = emd2_grad(p, target.probs());
    double dot = 0.0;
    for (std::size_t i = 0; i < b; ++i) dot += p[i] * d_p[i];
    for (std::size_t i = 0; i < b; ++i) d_raw[i] = (d_p[i] - dot) / total * sigmoid(raw[i]);
  }
  return value;
}

namespace {

double loss_from_raw(const SpartaModel& m, const double* raw, const RiskDistribution& target,
                     double* d_raw) {
  if (!(target.geometry() == m.geometry)) {
    throw DimensionError("target geometry does not match the model geometry");
  }
  return raw_emd2(std::span<const double>(raw, static_cast<std::size_t>(m.bins)), target,
                  m.positivity_floor, d_raw);
}

}  // namespace

Prediction forward(const SpartaModel& m, const FeatureGrid& g, std::optional<AngleOfApproach> phi) {
  check_phi_contract(m, phi);
  const Eigen::MatrixXd features = m.trunk.forward(feature_column(g));
  switch (m.head_kind) {
    case HeadKind::sparta: {
      const Eigen::MatrixXd out = m.head.forward(features);
      return function_from_outputs(m, out.data());
    }
    case HeadKind::angle_input: {
      Eigen::MatrixXd angle(1, 1);
      angle(0, 0) = phi->radians();
      const Eigen::MatrixXd embed = m.angle_embedding->forward(angle);
      Eigen::MatrixXd joined(features.rows() + embed.rows(), 1);
      joined << features, embed;
      const Eigen::MatrixXd raw = m.head.forward(joined);
      ConcentrationVector gamma(static_cast<std::size_t>(m.bins));
      for (int i = 0; i < m.bins; ++i) gamma[i] = softplus(raw(i, 0)) + m.positivity_floor;
      return gamma;
    }
    case HeadKind::angle_free: {
      const Eigen::MatrixXd raw = m.head.forward(features);
      ConcentrationVector gamma(static_cast<std::size_t>(m.bins));
      for (int i = 0; i < m.bins; ++i) gamma[i] = softplus(raw(i, 0)) + m.positivity_floor;
      return gamma;
    }
  }
  throw HeadContractError("unknown head kind");
}

FourierRiskFunction forward_function(const SpartaModel& m, const FeatureGrid& g) {
  if (m.head_kind != HeadKind::sparta) {
    throw HeadContractError("only the sparta head produces a Fourier risk function");
  }
  return std::get<FourierRiskFunction>(forward(m, g));
}

RiskDistribution predict_distribution(const SpartaModel& m, const FeatureGrid& g,
                                      AngleOfApproach phi) {
  switch (m.head_kind) {
    case HeadKind::sparta:
      return normalize(eval_concentrations(forward_function(m, g), phi), m.geometry);
    case HeadKind::angle_input:
      return normalize(std::get<ConcentrationVector>(forward(m, g, phi)), m.geometry);
    case HeadKind::angle_free:
      return normalize(std::get<ConcentrationVector>(forward(m, g)), m.geometry);
  }
  throw HeadContractError("unknown head kind");
}

ModelGradient zero_gradient(const SpartaModel& m) {
  ModelGradient g{m.trunk.zero_gradient(), m.head.zero_gradient(), std::nullopt};
  if (m.angle_embedding) g.angle_embedding = m.angle_embedding->zero_gradient();
  return g;
}

double batch_loss(const SpartaModel& m, std::span<const DatasetItem* const> items,
                  ModelGradient* grad) {
  const auto count = static_cast<Eigen::Index>(items.size());
  if (count == 0) return 0.0;
  // Neighbouring items of one patch share the trunk pass; only the head sees phi.
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(count));
  std::vector<const FeatureGrid*> unique;
  for (Eigen::Index c = 0; c < count; ++c) {
    if (unique.empty() || !(items[c]->features == *unique.back())) unique.push_back(&items[c]->features);
    slot[static_cast<std::size_t>(c)] = static_cast<Eigen::Index>(unique.size()) - 1;
  }
  const auto distinct = static_cast<Eigen::Index>(unique.size());
  Eigen::MatrixXd x(kFeatureDim, distinct);
  for (Eigen::Index u = 0; u < distinct; ++u) x.col(u) = feature_column(*unique[u]);

  const DenseTrace trunk_trace = m.trunk.forward_trace(x);
  Eigen::MatrixXd features(trunk_trace.output.rows(), count);
  for (Eigen::Index c = 0; c < count; ++c) features.col(c) = trunk_trace.output.col(slot[c]);
  double total = 0.0;
  Eigen::MatrixXd d_features;

  switch (m.head_kind) {
    case HeadKind::sparta: {
      const int k = m.coefficients_per_bin();
      const DenseTrace head_trace = m.head.forward_trace(features);
      Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(head_trace.output.rows(), count);
      std::vector<double> basis(static_cast<std::size_t>(k));
      std::vector<double> raw(static_cast<std::size_t>(m.bins));
      std::vector<double> d_raw(static_cast<std::size_t>(m.bins));
      for (Eigen::Index c = 0; c < count; ++c) {
        fourier_basis_into(items[c]->phi, m.max_frequency, basis);
        const double* out = head_trace.output.col(c).data();
        for (int i = 0; i < m.bins; ++i) {
          double acc = 0.0;
          for (int j = 0; j < k; ++j) acc += out[i * k + j] * basis[j];
          raw[i] = acc;
        }
        total += loss_from_raw(m, raw.data(), items[c]->target, grad ? d_raw.data() : nullptr);
        if (grad) {
          for (int i = 0; i < m.bins; ++i) {
            for (int j = 0; j < k; ++j) d_out(i * k + j, c) = d_raw[i] * basis[j];
          }
        }
      }
      if (grad) d_features = m.head.backward(head_trace, d_out, grad->head);
      break;
    }
    case HeadKind::angle_input: {
      Eigen::MatrixXd angles(1, count);
      for (Eigen::Index c = 0; c < count; ++c) angles(0, c) = items[c]->phi.radians();
      const DenseTrace embed_trace = m.angle_embedding->forward_trace(angles);
      Eigen::MatrixXd joined(features.rows() + embed_trace.output.rows(), count);
      joined << features, embed_trace.output;
      const DenseTrace head_trace = m.head.forward_trace(joined);
      Eigen::MatrixXd d_raw = Eigen::MatrixXd::Zero(m.bins, count);
      for (Eigen::Index c = 0; c < count; ++c) {
        total += loss_from_raw(m, head_trace.output.col(c).data(), items[c]->target,
                               grad ? d_raw.col(c).data() : nullptr);
      }
      if (grad) {
        const Eigen::MatrixXd d_joined = m.head.backward(head_trace, d_raw, grad->head);
        d_features = d_joined.topRows(features.rows());
        m.angle_embedding->backward(embed_trace, d_joined.bottomRows(embed_trace.output.rows()),
                                    *grad->angle_embedding);
      }
      break;
    }
    case HeadKind::angle_free: {
      const DenseTrace head_trace = m.head.forward_trace(features);
      Eigen::MatrixXd d_raw = Eigen::MatrixXd::Zero(m.bins, count);
      for (Eigen::Index c = 0; c < count; ++c) {
        total += loss_from_raw(m, head_trace.output.col(c).data(), items[c]->target,
                               grad ? d_raw.col(c).data() : nullptr);
      }
      if (grad) d_features = m.head.backward(head_trace, d_raw, grad->head);
      break;
    }
  }
  if (grad) {
    Eigen::MatrixXd d_trunk = Eigen::MatrixXd::Zero(d_features.rows(), distinct);
    for (Eigen::Index c = 0; c < count; ++c) d_trunk.col(slot[c]) += d_features.col(c);
    m.trunk.backward(trunk_trace, d_trunk, grad->trunk);
  }
  return total;
}

double loss(const SpartaModel& m, const DatasetItem& item) {
  const DatasetItem* one[] = {&item};
  return batch_loss(m, one, nullptr);
}

LossAndGradient backward(const SpartaModel& m, const DatasetItem& item) {
  LossAndGradient out{0.0, zero_gradient(m)};
  const DatasetItem* one[] = {&item};
  out.loss = batch_loss(m, one, &out.gradient);
  return out;
}

namespace {

void append_blocks(std::vector<std::span<double>>& out, std::vector<DenseLayer>& layers) {
  for (auto& l : layers) {
    out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    out.emplace_back(l.biases.data(), static_cast<std::size_t>(l.biases.size()));
  }
}

void append_blocks(std::vector<std::span<double>>& out, DenseGradient& g) {
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    out.emplace_back(g.weights[l].data(), static_cast<std::size_t>(g.weights[l].size()));
    out.emplace_back(g.biases[l].data(), static_cast<std::size_t>(g.biases[l].size()));
  }
}

}  // namespace

std::vector<std::span<double>> parameter_blocks(SpartaModel& m) {
  std::vector<std::span<double>> out;
  append_blocks(out, m.trunk.layers());
  append_blocks(out, m.head.layers());
  if (m.angle_embedding) append_blocks(out, m.angle_embedding->layers());
  return out;
}

std::vector<std::span<double>> gradient_blocks(ModelGradient& g) {
  std::vector<std::span<double>> out;
  append_blocks(out, g.trunk);
  append_blocks(out, g.head);
  if (g.angle_embedding) append_blocks(out, *g.angle_embedding);
  return out;
}

}  // namespace sparta
