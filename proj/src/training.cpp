#include "sparta/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "sparta/errors.hpp"

namespace sparta {

namespace {

constexpr std::size_t kEvalChunk = 256;

void require_finite_loss(double value, int epoch) {
  if (!std::isfinite(value)) {
    throw TrainingDiverged("loss became non-finite in epoch " + std::to_string(epoch));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and >= 0");
  }
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) {
    throw InvalidArgument("final_lr_fraction must lie in [0, 1]");
  }
}

void Dataset::validate() const {
  if (items.empty()) throw InvalidArgument("dataset is empty");
  const BinGeometry& g = items.front().target.geometry();
  for (const auto& item : items) {
    if (!(item.target.geometry() == g)) throw DimensionError("dataset mixes bin geometries");
  }
}

double mean_loss(const SpartaModel& m, const Dataset& data) {
  if (data.items.empty()) return 0.0;
  std::vector<const DatasetItem*> ptrs;
  ptrs.reserve(data.items.size());
  for (const auto& item : data.items) ptrs.push_back(&item);
  double total = 0.0;
  for (std::size_t start = 0; start < ptrs.size(); start += kEvalChunk) {
    const std::size_t len = std::min(kEvalChunk, ptrs.size() - start);
    total += batch_loss(m, std::span(ptrs).subspan(start, len), nullptr);
  }
  return total / static_cast<double>(ptrs.size());
}

TrainResult train(SpartaModel m, const Dataset& data, const TrainConfig& cfg,
                  const Dataset* holdout) {
  cfg.validate();
  data.validate();
  m.validate();
  if (!(data.items.front().target.geometry() == m.geometry)) {
    throw DimensionError("dataset geometry does not match the model geometry");
  }

  TrainResult result{std::move(m), {}};
  SpartaModel& model = result.model;
  auto record = [&](int epoch, std::optional<double> running = std::nullopt) {
    EpochLoss row{epoch, running ? *running : mean_loss(model, data), std::nullopt};
    require_finite_loss(row.train, epoch);
    if (holdout != nullptr && !holdout->items.empty()) row.test = mean_loss(model, *holdout);
    result.trace.push_back(row);
  };
  record(0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<const DatasetItem*> order;
  order.reserve(data.items.size());
  for (const auto& item : data.items) order.push_back(&item);
  std::vector<std::span<double>> params = parameter_blocks(model);
  ModelGradient grad = zero_gradient(model);
  std::vector<std::span<double>> grads = gradient_blocks(grad);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch - 1) / (cfg.epochs - 1) : 0.0;
    const double rate = cfg.learning_rate * (1.0 - progress * (1.0 - cfg.final_lr_fraction));
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      const double batch = batch_loss(model, std::span(order).subspan(start, len), &grad);
      require_finite_loss(batch, epoch);
      epoch_total += batch;
      if (rate == 0.0) continue;
      const double step = rate / static_cast<double>(len);
      for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= step * grads[b][i];
      }
    }
    if (cfg.full_train_eval) {
      record(epoch);
    } else {
      record(epoch, epoch_total / static_cast<double>(order.size()));
    }
  }
  return result;
}

double mean_function_loss(const FourierRiskFunction& f, const std::vector<AngleSample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [phi, target] : samples) {
    total += emd2(normalize(eval_concentrations(f, phi), target.geometry()), target);
  }
  return total / static_cast<double>(samples.size());
}

FitResult fit_patch_direct_traced(const std::vector<AngleSample>& samples, int max_frequency,
                                  int bins, const TrainConfig& cfg, double positivity_floor) {
  cfg.validate();
  if (max_frequency < 1) throw InvalidArgument("max_frequency must be >= 1");
  if (samples.empty()) throw UnderdeterminedFit("no samples to fit");
  for (const auto& s : samples) {
    if (s.second.geometry().num_bins() != bins) {
      throw DimensionError("sample distributions must have " + std::to_string(bins) + " bins");
    }
  }
  std::vector<double> angles;
  for (const auto& s : samples) angles.push_back(s.first.radians());
  std::sort(angles.begin(), angles.end());
  const auto distinct = std::unique(angles.begin(), angles.end(),
                                    [](double a, double b) { return std::abs(a - b) < 1e-12; }) -
                        angles.begin();
  const int needed = 2 * max_frequency + 1;
  if (distinct < needed) {
    throw UnderdeterminedFit("fitting max frequency " + std::to_string(max_frequency) + " needs " +
                             std::to_string(needed) + " distinct angles, got " +
                             std::to_string(distinct));
  }

  const int k = needed;
  std::vector<double> coeffs(static_cast<std::size_t>(bins * k), 0.0);
  std::vector<std::vector<double>> basis;
  basis.reserve(samples.size());
  for (const auto& s : samples) basis.push_back(fourier_basis(s.first, max_frequency));

  auto to_function = [&] {
    std::vector<FourierCoefficients> out;
    for (int i = 0; i < bins; ++i) {
      out.push_back(FourierCoefficients::from_packed(std::span<const double>(&coeffs[i * k], k)));
    }
    return FourierRiskFunction(std::move(out), positivity_floor);
  };

  std::vector<double> raw(static_cast<std::size_t>(bins));
  std::vector<double> d_raw(static_cast<std::size_t>(bins));
  std::vector<double> grad(coeffs.size());
  // Loss (and gradient when requested) summed over the given sample indices.
  auto accumulate = [&](std::span<const std::size_t> idx, bool with_grad) {
    double total = 0.0;
    for (std::size_t s : idx) {
      const auto& b = basis[s];
      for (int i = 0; i < bins; ++i) {
        double acc = 0.0;
        for (int j = 0; j < k; ++j) acc += coeffs[i * k + j] * b[j];
        raw[i] = acc;
      }
      total += raw_emd2(raw, samples[s].second, positivity_floor, with_grad ? d_raw.data() : nullptr);
      if (with_grad) {
        for (int i = 0; i < bins; ++i) {
          for (int j = 0; j < k; ++j) grad[i * k + j] += d_raw[i] * b[j];
        }
      }
    }
    return total;
  };

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::vector<std::size_t> all = order;
  FitResult result{to_function(), {}};
  result.trace.push_back({0, accumulate(all, false) / static_cast<double>(samples.size()), {}});

  std::mt19937_64 rng(cfg.seed);
  const auto batch = std::min(static_cast<std::size_t>(cfg.batch_size), samples.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (batch < samples.size()) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double value = accumulate(std::span(order).subspan(start, len), true);
      require_finite_loss(value, epoch);
      const double step = cfg.learning_rate / static_cast<double>(len);
      for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] -= step * grad[i];
    }
    result.trace.push_back({epoch, accumulate(all, false) / static_cast<double>(samples.size()), {}});
  }
  result.function = to_function();
  return result;
}

FourierRiskFunction fit_patch_direct(const std::vector<AngleSample>& samples, int max_frequency,
                                     int bins, const TrainConfig& cfg, double positivity_floor) {
  return fit_patch_direct_traced(samples, max_frequency, bins, cfg, positivity_floor).function;
}

}  // namespace sparta
