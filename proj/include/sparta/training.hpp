#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sparta/model.hpp"

namespace sparta {

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double weight_init_scale = 1.0;
  // The rate falls linearly from learning_rate in epoch 1 to
  // learning_rate * final_lr_fraction in the last epoch.
  double final_lr_fraction = 1.0;
  // false: the train loss of an epoch is the mean of its mini-batch losses
  // (taken before each update) instead of a full pass after the epoch.
  bool full_train_eval = true;

  void validate() const;
};

struct Dataset {
  std::vector<DatasetItem> items;

  // Throws InvalidArgument when empty or DimensionError on mixed geometries.
  void validate() const;
};

// Mean loss over every item.
double mean_loss(const SpartaModel& m, const Dataset& data);

struct EpochLoss {
  int epoch = 0;
  double train = 0.0;
  std::optional<double> test;
};

struct TrainResult {
  SpartaModel model;
  // Entry 0 holds the losses before the first update.
  std::vector<EpochLoss> trace;
};

// Mini-batch gradient descent with a seeded shuffle per epoch. Bit-identical
// for identical (model, data, cfg). Throws TrainingDiverged on a non-finite loss.
TrainResult train(SpartaModel m, const Dataset& data, const TrainConfig& cfg,
                  const Dataset* holdout = nullptr);

using AngleSample = std::pair<AngleOfApproach, RiskDistribution>;

struct FitResult {
  FourierRiskFunction function;
  std::vector<EpochLoss> trace;
};

// Gradient descent on the B(2n+1) Fourier coefficients alone, minimizing the
// mean EMD^2 over the samples. Starts from the all-zero function. Needs at
// least 2n+1 distinct angles (UnderdeterminedFit otherwise).
FitResult fit_patch_direct_traced(const std::vector<AngleSample>& samples, int max_frequency,
                                  int bins, const TrainConfig& cfg,
                                  double positivity_floor = kDefaultPositivityFloor);

FourierRiskFunction fit_patch_direct(const std::vector<AngleSample>& samples, int max_frequency,
                                     int bins, const TrainConfig& cfg,
                                     double positivity_floor = kDefaultPositivityFloor);

// Mean EMD^2 of f's distributions against the samples.
double mean_function_loss(const FourierRiskFunction& f, const std::vector<AngleSample>& samples);

}  // namespace sparta
