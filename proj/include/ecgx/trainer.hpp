#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgx/ecg_io.hpp"
#include "ecgx/grouping.hpp"
#include "ecgx/model.hpp"
#include "ecgx/preprocess.hpp"

namespace ecgx {

struct TrainConfig {
  LeadConfig lead_config = LeadConfig::lead_ii();
  std::vector<std::string> target_features;
  int fs = 500;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  double lr = 1e-3;
  // Weight tensors with fan-in above this train at lr * reference / fan_in;
  // 0 disables the scaling.
  std::size_t lr_fan_in_reference = 4096;
  std::uint64_t seed = 42;
  ModelConfig model = ModelConfig::default_config();  // n_outputs follows target_features
  // Build the network from adapt_to_rate(model, fs).
  bool rate_adapted_model = true;
  FilterSpec filter;
  bool signal_norm = true;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// The architecture actually built for `config`.
ModelConfig effective_model_config(const TrainConfig& config);

// Per-tensor lr multipliers implied by config.lr_fan_in_reference.
std::vector<double> lr_scales(const CnnModel& model, std::size_t fan_in_reference);

// Loads one record by id.
using RecordLoader = std::function<EcgRecord(const std::string&)>;
// The vector must outlive the loader.
RecordLoader memory_loader(const std::vector<EcgRecord>& records);
RecordLoader manifest_loader(const DatasetManifest& manifest);

// select_leads -> bandpass -> resample -> normalize_signal. Lead selection
// is done first because the filters act on each lead independently.
EcgRecord preprocess_record(const EcgRecord& record, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_pcc;
  double seconds = 0.0;
};

struct TrainTimings {
  double preprocess_seconds = 0.0;
  double train_seconds = 0.0;
  std::size_t n_train_records = 0;
  std::size_t n_val_records = 0;
};

struct TrainedModel {
  CnnModel model;
  MinMaxScaler scaler;
  TrainConfig config;
  std::vector<EpochLog> log;
  TrainTimings timings;
  std::size_t best_epoch = 0;
};

// Trains on the manifest's training folds with early stopping on the
// validation folds. Rows whose targets are all missing are dropped.
// Throws UnknownFeature, EmptyDataset, NumericFailure.
TrainedModel train(const DatasetManifest& manifest, const RecordLoader& loader,
                   const FeatureTable& truth, const TrainConfig& config);

// Unscaled predictions, one row per record, columns in target order.
FeatureTable predict(const TrainedModel& model, const std::vector<EcgRecord>& records);
FeatureTable predict(const TrainedModel& model, const RecordLoader& loader,
                     const std::vector<std::string>& record_ids);

// Run directory: config.json, model.ckpt, log.csv, timings.csv.
void save_run(const TrainedModel& model, const std::filesystem::path& dir,
              const nlohmann::json& provenance = nlohmann::json::object());
TrainedModel load_trained_model(const std::filesystem::path& checkpoint);

// One model per group, trained independently with the group as targets.
// Up to `jobs` models train concurrently.
std::vector<TrainedModel> train_scheme(const DatasetManifest& manifest, const RecordLoader& loader,
                                       const FeatureTable& truth, const TrainConfig& base,
                                       const GroupingScheme& scheme, std::size_t jobs = 1);

// Ridge regression on flattened, decimated preprocessed signals.
struct LinearBaseline {
  TrainConfig config;
  MinMaxScaler scaler;
  std::size_t decimation = 10;
  double lambda = 1e-3;
  std::size_t n_inputs = 0;
  std::vector<double> weights;    // n_outputs x n_inputs
  std::vector<double> intercept;  // n_outputs
};

// Block means of `decimation` samples per lead, concatenated lead by lead.
std::vector<double> baseline_inputs(const EcgRecord& preprocessed, std::size_t decimation);

LinearBaseline linear_baseline(const DatasetManifest& manifest, const RecordLoader& loader,
                               const FeatureTable& truth, const TrainConfig& config,
                               double lambda = 1e-3, std::size_t decimation = 10);
// JSON file with the config, scaler and weights.
void save_baseline(const LinearBaseline& model, const std::filesystem::path& path);
LinearBaseline load_baseline(const std::filesystem::path& path);

FeatureTable predict(const LinearBaseline& model, const std::vector<EcgRecord>& records);
FeatureTable predict(const LinearBaseline& model, const RecordLoader& loader,
                     const std::vector<std::string>& record_ids);

struct TimingResult {
  double train_minutes = 0.0;  // per 1000 records per epoch, preprocessing included
  double infer_seconds = 0.0;  // per 1000 records, preprocessing included
  std::size_t n_records = 0;
  std::size_t epochs = 0;
};

// Trains a fresh model for `epochs` passes over all given records, then
// times inference, scaling both linearly to 1000 records.
// Throws InsufficientData below 100 records.
TimingResult time_per_1000(const TrainConfig& config, const std::vector<EcgRecord>& records,
                           const FeatureTable& truth, std::size_t epochs = 1);
// Inference timing only, for an already trained model.
double infer_seconds_per_1000(const TrainedModel& model, const std::vector<EcgRecord>& records);

}  // namespace ecgx
