#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "ecgx/random.hpp"
#include "ecgx/trainer.hpp"

// Shared by the CNN trainer and the linear baseline.
namespace ecgx::detail {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0);

struct Dataset {
  std::vector<std::string> ids;
  Tensor3 x;  // records x leads x samples
  Matrix y;   // scaled targets, zero where missing
  MaskMatrix mask;
};

std::vector<std::size_t> target_columns(const FeatureTable& truth,
                                        const std::vector<std::string>& features);
// Ids present in `truth` with at least one target value.
std::vector<std::string> usable_ids(const std::vector<std::string>& ids, const FeatureTable& truth,
                                    const std::vector<std::size_t>& cols);
Tensor3 stack_inputs(const std::vector<std::string>& ids, const RecordLoader& loader,
                     const TrainConfig& config);
Tensor3 stack_records(const std::vector<EcgRecord>& records, const TrainConfig& config);
Dataset build_dataset(const std::vector<std::string>& ids, const RecordLoader& loader,
                      const FeatureTable& truth, const std::vector<std::size_t>& cols,
                      const MinMaxScaler& scaler, const TrainConfig& config);
Matrix forward_all(const CnnModel& model, const Tensor3& x, std::size_t batch_size);
double run_epoch(CnnModel& model, AdamState& adam, const Dataset& d, Rng& rng,
                 const TrainConfig& config);
std::optional<double> mean_pcc(const Matrix& pred, const Matrix& y, const MaskMatrix& mask);
FeatureTable unscaled_table(const std::vector<std::string>& ids, const Matrix& pred,
                            const MinMaxScaler& scaler);

}  // namespace ecgx::detail
