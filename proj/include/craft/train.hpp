#pragma once

// Training, evaluation, ablation and the label-only DLinear baseline.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "craft/model.hpp"

namespace craft {

enum class Split { train, val, test };
Split parse_split(const std::string& s);
const char* to_string(Split s);

/// Everything a run needs from a world: the split origins for (L, P).
struct DataView {
  const HotelWorld* world = nullptr;
  std::int32_t L = 0;
  std::int32_t P = 0;
  TimeSplit split;

  static DataView make(const HotelWorld& world, const TrainConfig& cfg);
  const std::vector<std::int32_t>& origins(Split s) const;
};

/// Mean label over days up to the last training origin.
double training_value_scale(const DataView& data);

/// Draws `groups_per_batch` (district, origin) pairs and a weighted group
/// of m hotels for each.
NodeBatch sample_train_batch(const DataView& data, const TrainConfig& cfg, Rng& rng);

/// Deterministic evaluation groups: hotels of each district are shuffled
/// with `seed` and cut into groups of m; a short final group is padded with
/// hotels from the start of the shuffled list.
struct EvalGroup {
  std::int32_t district_id = 0;
  std::vector<std::int32_t> hotels;  // size m
  std::int32_t reported = 0;         // leading hotels whose forecasts are scored
};
std::vector<EvalGroup> eval_groups(const HotelWorld& world, std::int32_t m, std::uint64_t seed);

struct EpochRecord {
  std::int32_t epoch = 0;
  std::int64_t steps = 0;
  double train_loss = 0.0;
  std::optional<double> val_wmape;
};

struct TrainHistory {
  std::size_t parameter_count = 0;
  std::vector<double> step_loss;
  std::vector<EpochRecord> epochs;
  bool aborted = false;
  std::string abort_reason;

  std::string to_text() const;
};

struct TrainResult {
  CraftParams params;
  TrainHistory history;
};

std::int64_t steps_per_epoch(const DataView& data, const TrainConfig& cfg);

using StepHook = std::function<void(std::int64_t step, const LossParts& parts)>;

/// Adam over sampled hierarchy batches. A non-finite loss or gradient stops
/// training with the parameters of the last good step and history.aborted set.
TrainResult train(const DataView& data, const TrainConfig& cfg, const StepHook& hook = {});

struct Predictions {
  // Reported (hotel, day) pairs, clamped at zero.
  Vec y_hat;
  Vec y;
  double group_gap = 0.0;
  LossParts loss;
  std::int64_t groups = 0;
};

Predictions predict_split(CraftParams& params, const DataView& data, const TrainConfig& cfg, Split split);
MetricReport report_from(const Predictions& p);
MetricReport evaluate(CraftParams& params, const DataView& data, const TrainConfig& cfg, Split split);

struct AblationRow {
  Variant variant = Variant::full;
  std::vector<double> wmape;  // one per seed
  double mean() const;
};

/// Trains each of the four variants once per seed (cfg.seed + k).
std::vector<AblationRow> run_ablation(const DataView& data, const TrainConfig& cfg, std::int32_t seeds);
std::string ablation_table(const std::vector<AblationRow>& rows);

struct DLinearParams {
  ParamTensor trend_W, trend_b, res_W, res_b;
  double value_scale = 1.0;
  static DLinearParams init(std::int32_t L, std::int32_t P, std::uint64_t seed);
  std::vector<ParamTensor*> tensors();
};

/// Label-only trend + residual linear maps trained with squared error on the
/// same batches, evaluated on the same groups.
MetricReport baseline_dlinear(const DataView& data, const TrainConfig& cfg, Split split = Split::test);

}  // namespace craft
