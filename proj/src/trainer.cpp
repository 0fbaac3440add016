#include "ecgx/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <thread>
#include <unordered_map>

#include "ecgx/error.hpp"
#include "ecgx/evaluation.hpp"
#include "ecgx/random.hpp"
#include "trainer_detail.hpp"

namespace ecgx {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (target_features.empty()) throw Error(ErrorKind::ConfigError, "no target features");
  std::set<std::string> seen;
  for (const auto& f : target_features) {
    if (!seen.insert(f).second) throw Error(ErrorKind::ConfigError, "duplicate target " + f);
  }
  if (fs != 500 && fs != 100) {
    throw Error(ErrorKind::ConfigError, "fs must be 500 or 100, got " + std::to_string(fs));
  }
  if (batch_size == 0) throw Error(ErrorKind::ConfigError, "batch_size must be positive");
  if (max_epochs == 0) throw Error(ErrorKind::ConfigError, "max_epochs must be positive");
  if (early_stop_patience >= max_epochs) {
    throw Error(ErrorKind::ConfigError, "early_stop_patience must be below max_epochs");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::ConfigError, "lr must be positive");
  if (lead_config.leads.empty()) throw Error(ErrorKind::ConfigError, "no leads selected");
  model.validate();
}

json to_json(const TrainConfig& c) {
  return {{"lead_config", c.lead_config.to_string()},
          {"target_features", c.target_features},
          {"fs", c.fs},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"lr", c.lr},
          {"lr_fan_in_reference", c.lr_fan_in_reference},
          {"seed", c.seed},
          {"model", to_json(c.model)},
          {"filter",
           {{"low_cut", c.filter.low_cut},
            {"high_cut", c.filter.high_cut},
            {"order", c.filter.order},
            {"zero_phase", c.filter.zero_phase}}},
          {"signal_norm", c.signal_norm},
          {"rate_adapted_model", c.rate_adapted_model}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.lead_config = LeadConfig::parse(j.at("lead_config").get<std::string>());
    c.target_features = j.at("target_features").get<std::vector<std::string>>();
    c.fs = j.at("fs").get<int>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.lr_fan_in_reference = j.value("lr_fan_in_reference", std::size_t{0});
    c.seed = j.at("seed").get<std::uint64_t>();
    c.model = model_config_from_json(j.at("model"));
    const auto& f = j.at("filter");
    c.filter.low_cut = f.at("low_cut").get<double>();
    c.filter.high_cut = f.at("high_cut").get<double>();
    c.filter.order = f.at("order").get<int>();
    c.filter.zero_phase = f.at("zero_phase").get<bool>();
    c.signal_norm = j.at("signal_norm").get<bool>();
    c.rate_adapted_model = j.value("rate_adapted_model", false);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("bad train config: ") + e.what());
  }
}

ModelConfig effective_model_config(const TrainConfig& config) {
  ModelConfig m = config.rate_adapted_model ? adapt_to_rate(config.model, config.fs) : config.model;
  m.n_outputs = config.target_features.size();
  return m;
}

std::vector<double> lr_scales(const CnnModel& model, std::size_t fan_in_reference) {
  std::vector<double> out(model.params.size(), 1.0);
  if (fan_in_reference == 0) return out;
  for (std::size_t k = 0; k < model.params.size(); ++k) {
    const auto& p = model.params[k];
    if (p.shape.size() < 2) continue;
    const std::size_t fan_in = p.values.size() / p.shape[0];
    if (fan_in > fan_in_reference) {
      out[k] = static_cast<double>(fan_in_reference) / static_cast<double>(fan_in);
    }
  }
  return out;
}

RecordLoader memory_loader(const std::vector<EcgRecord>& records) {
  auto index = std::make_shared<std::unordered_map<std::string, const EcgRecord*>>();
  for (const auto& r : records) (*index)[r.record_id] = &r;
  return [index](const std::string& id) -> EcgRecord {
    auto it = index->find(id);
    if (it == index->end()) throw Error(ErrorKind::Io, "no record with id " + id);
    return *it->second;
  };
}

RecordLoader manifest_loader(const DatasetManifest& manifest) {
  auto paths = std::make_shared<std::unordered_map<std::string, fs::path>>();
  for (const auto& e : manifest.entries) (*paths)[e.record_id] = e.signal_path;
  return [paths](const std::string& id) -> EcgRecord {
    auto it = paths->find(id);
    if (it == paths->end()) throw Error(ErrorKind::Io, "record " + id + " is not in the manifest");
    EcgRecord r = read_wfdb_record(it->second);
    r.record_id = id;
    return r;
  };
}

EcgRecord preprocess_record(const EcgRecord& record, const TrainConfig& config) {
  EcgRecord r = select_leads(record, config.lead_config);
  r = bandpass(r, config.filter);
  if (r.fs != config.fs) r = resample(r, config.fs);
  if (config.signal_norm) r = normalize_signal(r);
  return r;
}

namespace detail {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::size_t> target_columns(const FeatureTable& truth,
                                        const std::vector<std::string>& features) {
  std::vector<std::size_t> cols;
  for (const auto& f : features) cols.push_back(truth.column_or_throw(f));
  return cols;
}

std::vector<std::string> usable_ids(const std::vector<std::string>& ids, const FeatureTable& truth,
                                    const std::vector<std::size_t>& cols) {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    auto it = truth.rows.find(id);
    if (it == truth.rows.end()) continue;
    const bool any = std::any_of(cols.begin(), cols.end(), [&](std::size_t c) {
      return it->second[c].has_value();
    });
    if (any) out.push_back(id);
  }
  return out;
}

Tensor3 stack_inputs(const std::vector<std::string>& ids, const RecordLoader& loader,
                     const TrainConfig& config) {
  Tensor3 x;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const EcgRecord r = preprocess_record(loader(ids[i]), config);
    if (i == 0) x.reshape(ids.size(), r.n_leads(), r.n_samples);
    if (r.n_samples != x.length()) {
      throw Error(ErrorKind::ShapeError, "record " + ids[i] + " has " + std::to_string(r.n_samples) +
                                             " samples after preprocessing, expected " +
                                             std::to_string(x.length()));
    }
    std::copy(r.samples.begin(), r.samples.end(), x.data() + i * x.sample_size());
  }
  return x;
}

Tensor3 stack_records(const std::vector<EcgRecord>& records, const TrainConfig& config) {
  Tensor3 x;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EcgRecord r = preprocess_record(records[i], config);
    if (i == 0) x.reshape(records.size(), r.n_leads(), r.n_samples);
    if (r.n_samples != x.length()) {
      throw Error(ErrorKind::ShapeError, "record " + records[i].record_id +
                                             " length differs from the first record");
    }
    std::copy(r.samples.begin(), r.samples.end(), x.data() + i * x.sample_size());
  }
  return x;
}

Dataset build_dataset(const std::vector<std::string>& ids, const RecordLoader& loader,
                      const FeatureTable& truth, const std::vector<std::size_t>& cols,
                      const MinMaxScaler& scaler, const TrainConfig& config) {
  Dataset d;
  d.ids = ids;
  d.x = stack_inputs(ids, loader, config);
  const auto k = static_cast<Eigen::Index>(cols.size());
  d.y = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), k);
  d.mask = MaskMatrix::Constant(static_cast<Eigen::Index>(ids.size()), k, false);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& row = truth.rows.at(ids[i]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (!row[cols[j]]) continue;
      d.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scaler.scale(j, *row[cols[j]]);
      d.mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = true;
    }
  }
  return d;
}

void gather(const Dataset& d, const std::vector<std::size_t>& order, std::size_t begin,
            std::size_t end, Tensor3& x, Matrix& y, MaskMatrix& mask) {
  const std::size_t n = end - begin;
  if (x.batch() != n || x.channels() != d.x.channels() || x.length() != d.x.length()) {
    x.reshape(n, d.x.channels(), d.x.length());
  }
  y.resize(static_cast<Eigen::Index>(n), d.y.cols());
  mask.resize(static_cast<Eigen::Index>(n), d.y.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[begin + i];
    std::copy_n(d.x.data() + src * d.x.sample_size(), d.x.sample_size(),
                x.data() + i * x.sample_size());
    y.row(static_cast<Eigen::Index>(i)) = d.y.row(static_cast<Eigen::Index>(src));
    mask.row(static_cast<Eigen::Index>(i)) = d.mask.row(static_cast<Eigen::Index>(src));
  }
}

Matrix forward_all(const CnnModel& model, const Tensor3& x, std::size_t batch_size) {
  Matrix out(static_cast<Eigen::Index>(x.batch()), static_cast<Eigen::Index>(model.config.n_outputs));
  Tensor3 chunk;
  for (std::size_t b = 0; b < x.batch(); b += batch_size) {
    const std::size_t n = std::min(batch_size, x.batch() - b);
    if (chunk.batch() != n) chunk.reshape(n, x.channels(), x.length());
    std::copy_n(x.data() + b * x.sample_size(), n * x.sample_size(), chunk.data());
    out.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(n)) = forward(model, chunk);
  }
  return out;
}

double run_epoch(CnnModel& model, AdamState& adam, const Dataset& d, Rng& rng,
                 const TrainConfig& config) {
  std::vector<std::size_t> order(d.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  Tensor3 x;
  Matrix y;
  MaskMatrix mask;
  double loss_sum = 0.0;
  double cells = 0.0;
  for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
    const std::size_t end = std::min(order.size(), b + config.batch_size);
    gather(d, order, b, end, x, y, mask);
    const auto count = static_cast<double>(mask.count());
    if (count == 0.0) continue;
    LossAndGradients lg = backward(model, x, y, mask);
    if (!std::isfinite(lg.loss)) {
      throw Error(ErrorKind::NumericFailure, "non-finite training loss");
    }
    AdamOptions options;
    options.lr_scale = lr_scales(model, config.lr_fan_in_reference);
    adam_step(model.params, lg.grads, adam, config.lr, options);
    loss_sum += lg.loss * count;
    cells += count;
  }
  return cells > 0.0 ? loss_sum / cells : 0.0;
}

std::optional<double> mean_pcc(const Matrix& pred, const Matrix& y, const MaskMatrix& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    PairedSeries s;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      if (!mask(i, j)) continue;
      s.y_test.push_back(y(i, j));
      s.y_hat.push_back(pred(i, j));
    }
    if (auto v = try_pcc(s)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

FeatureTable unscaled_table(const std::vector<std::string>& ids, const Matrix& pred,
                            const MinMaxScaler& scaler) {
  FeatureTable t;
  t.feature_names = scaler.features();
  for (const auto& f : t.feature_names) t.units.push_back(infer_unit(f));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    FeatureRow row(scaler.size());
    for (std::size_t j = 0; j < scaler.size(); ++j) {
      row[j] = scaler.unscale(j, pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    t.rows[ids[i]] = std::move(row);
  }
  return t;
}

}  // namespace detail

using namespace detail;

TrainedModel train(const DatasetManifest& manifest, const RecordLoader& loader,
                   const FeatureTable& truth, const TrainConfig& config_in) {
  TrainConfig config = config_in;
  config.model.n_outputs = config.target_features.size();
  config.validate();
  const auto cols = target_columns(truth, config.target_features);

  const auto train_ids = usable_ids(select_split(manifest, Split::Train), truth, cols);
  const auto val_ids = usable_ids(select_split(manifest, Split::Val), truth, cols);
  if (train_ids.empty()) {
    throw Error(ErrorKind::EmptyDataset, "no training record has a value for any target");
  }

  TrainedModel out;
  out.config = config;
  out.scaler = fit_scaler(truth, config.target_features, train_ids);

  const auto t_pre = Clock::now();
  const Dataset train_set = build_dataset(train_ids, loader, truth, cols, out.scaler, config);
  Dataset val_set;
  if (!val_ids.empty()) val_set = build_dataset(val_ids, loader, truth, cols, out.scaler, config);
  out.timings.preprocess_seconds = seconds_since(t_pre);
  out.timings.n_train_records = train_ids.size();
  out.timings.n_val_records = val_ids.size();

  out.model = init_model(effective_model_config(config), train_set.x.channels(), train_set.x.length(), config.seed);
  AdamState adam = init_adam(out.model);
  Rng rng(derive_seed(config.seed, 2));

  std::optional<double> best;
  std::vector<ParamTensor> best_params = out.model.params;
  bool have_best = false;
  std::size_t since_best = 0;
  const auto t_train = Clock::now();
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t_epoch = Clock::now();
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = run_epoch(out.model, adam, train_set, rng, config);
    if (!val_ids.empty()) {
      entry.val_pcc = mean_pcc(forward_all(out.model, val_set.x, config.batch_size), val_set.y,
                               val_set.mask);
    }
    entry.seconds = seconds_since(t_epoch);
    out.log.push_back(entry);
    if (val_ids.empty()) continue;

    const double score = entry.val_pcc.value_or(-std::numeric_limits<double>::infinity());
    if (!have_best || score > best.value_or(-std::numeric_limits<double>::infinity())) {
      have_best = true;
      best = entry.val_pcc;
      best_params = out.model.params;
      out.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  out.timings.train_seconds = seconds_since(t_train);
  // Without validation data the last epoch is kept.
  if (!val_ids.empty()) {
    out.model.params = std::move(best_params);
  } else {
    out.best_epoch = out.log.size();
  }
  return out;
}

FeatureTable predict(const TrainedModel& model, const std::vector<EcgRecord>& records) {
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.record_id);
  if (records.empty()) return unscaled_table(ids, Matrix(0, 0), model.scaler);
  const Tensor3 x = stack_records(records, model.config);
  return unscaled_table(ids, forward_all(model.model, x, model.config.batch_size), model.scaler);
}

FeatureTable predict(const TrainedModel& model, const RecordLoader& loader,
                     const std::vector<std::string>& record_ids) {
  if (record_ids.empty()) return unscaled_table(record_ids, Matrix(0, 0), model.scaler);
  const Tensor3 x = stack_inputs(record_ids, loader, model.config);
  return unscaled_table(record_ids, forward_all(model.model, x, model.config.batch_size),
                        model.scaler);
}

namespace {

json scaler_json(const MinMaxScaler& s) {
  std::vector<double> mins, maxs;
  for (std::size_t i = 0; i < s.size(); ++i) {
    mins.push_back(s.min(i));
    maxs.push_back(s.max(i));
  }
  return {{"features", s.features()}, {"mins", mins}, {"maxs", maxs}};
}

json log_json(const std::vector<EpochLog>& log) {
  json out = json::array();
  for (const auto& e : log) {
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_pcc", e.val_pcc ? json(*e.val_pcc) : json(nullptr)},
                   {"seconds", e.seconds}});
  }
  return out;
}

json timings_json(const TrainTimings& t) {
  return {{"preprocess_seconds", t.preprocess_seconds},
          {"train_seconds", t.train_seconds},
          {"n_train_records", t.n_train_records},
          {"n_val_records", t.n_val_records}};
}

}  // namespace

void save_run(const TrainedModel& model, const fs::path& dir, const json& provenance) {
  fs::create_directories(dir);
  json config = {{"train_config", to_json(model.config)},
                 {"in_channels", model.model.in_channels},
                 {"in_length", model.model.in_length},
                 {"parameter_count", model.model.parameter_count()},
                 {"best_epoch", model.best_epoch},
                 {"provenance", provenance}};
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "config.json").string());
    out << config.dump(2) << '\n';
  }
  save_checkpoint(model.model, dir / "model.ckpt",
                  {{"train_config", to_json(model.config)},
                   {"scaler", scaler_json(model.scaler)},
                   {"best_epoch", model.best_epoch},
                   {"log", log_json(model.log)},
                   {"timings", timings_json(model.timings)}});
  {
    std::ofstream out(dir / "log.csv");
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "log.csv").string());
    out << "epoch,train_loss,val_pcc,seconds\n";
    for (const auto& e : model.log) {
      out << e.epoch << ',' << format_real(e.train_loss) << ','
          << (e.val_pcc ? format_real(*e.val_pcc) : std::string()) << ','
          << format_real(e.seconds, 6) << '\n';
    }
  }
  {
    std::ofstream out(dir / "timings.csv");
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "timings.csv").string());
    out << "metric,value\n";
    out << "preprocess_seconds," << format_real(model.timings.preprocess_seconds, 6) << '\n';
    out << "train_seconds," << format_real(model.timings.train_seconds, 6) << '\n';
    out << "n_train_records," << model.timings.n_train_records << '\n';
    out << "n_val_records," << model.timings.n_val_records << '\n';
    out << "epochs," << model.log.size() << '\n';
  }
}

TrainedModel load_trained_model(const fs::path& checkpoint) {
  json extra;
  TrainedModel out;
  out.model = load_checkpoint(checkpoint, &extra);
  try {
    out.config = train_config_from_json(extra.at("train_config"));
    const auto& s = extra.at("scaler");
    out.scaler = MinMaxScaler(s.at("features").get<std::vector<std::string>>(),
                              s.at("mins").get<std::vector<double>>(),
                              s.at("maxs").get<std::vector<double>>());
    out.best_epoch = extra.value("best_epoch", std::size_t{0});
    if (extra.contains("log")) {
      for (const auto& e : extra["log"]) {
        EpochLog entry;
        entry.epoch = e.at("epoch").get<std::size_t>();
        entry.train_loss = e.at("train_loss").get<double>();
        if (!e.at("val_pcc").is_null()) entry.val_pcc = e.at("val_pcc").get<double>();
        entry.seconds = e.at("seconds").get<double>();
        out.log.push_back(entry);
      }
    }
    if (extra.contains("timings")) {
      const auto& t = extra["timings"];
      out.timings.preprocess_seconds = t.at("preprocess_seconds").get<double>();
      out.timings.train_seconds = t.at("train_seconds").get<double>();
      out.timings.n_train_records = t.at("n_train_records").get<std::size_t>();
      out.timings.n_val_records = t.at("n_val_records").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, checkpoint.string() + ": bad checkpoint metadata: " + e.what());
  }
  if (out.scaler.features() != out.config.target_features) {
    throw Error(ErrorKind::ParseError, checkpoint.string() + ": scaler and targets disagree");
  }
  return out;
}

std::vector<TrainedModel> train_scheme(const DatasetManifest& manifest, const RecordLoader& loader,
                                       const FeatureTable& truth, const TrainConfig& base,
                                       const GroupingScheme& scheme, std::size_t jobs) {
  scheme.validate();
  std::vector<TrainedModel> models(scheme.groups.size());
  std::vector<std::exception_ptr> errors(scheme.groups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scheme.groups.size(); i = next++) {
      try {
        TrainConfig cfg = base;
        cfg.target_features = scheme.groups[i];
        models[i] = train(manifest, loader, truth, cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, scheme.groups.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return models;
}

TimingResult time_per_1000(const TrainConfig& config_in, const std::vector<EcgRecord>& records,
                           const FeatureTable& truth, std::size_t epochs) {
  if (records.size() < 100) {
    throw Error(ErrorKind::InsufficientData, "timing needs at least 100 records");
  }
  TrainConfig config = config_in;
  config.model.n_outputs = config.target_features.size();
  config.max_epochs = std::max<std::size_t>(epochs, config.early_stop_patience + 1);
  config.validate();
  const auto cols = target_columns(truth, config.target_features);
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.record_id);
  ids = usable_ids(ids, truth, cols);
  if (ids.empty()) throw Error(ErrorKind::EmptyDataset, "no record has a target value");
  const RecordLoader loader = memory_loader(records);

  TimingResult out;
  out.n_records = ids.size();
  out.epochs = epochs;
  const double per_1000 = 1000.0 / static_cast<double>(ids.size());

  const auto t0 = Clock::now();
  const MinMaxScaler scaler = fit_scaler(truth, config.target_features, ids);
  const Dataset d = build_dataset(ids, loader, truth, cols, scaler, config);
  const double preprocess_s = seconds_since(t0);
  CnnModel model = init_model(effective_model_config(config), d.x.channels(), d.x.length(), config.seed);
  AdamState adam = init_adam(model);
  Rng rng(derive_seed(config.seed, 2));
  const auto t1 = Clock::now();
  for (std::size_t e = 0; e < epochs; ++e) run_epoch(model, adam, d, rng, config);
  const double train_s = seconds_since(t1);
  out.train_minutes = (preprocess_s + train_s) * per_1000 / 60.0;

  TrainedModel tm;
  tm.model = std::move(model);
  tm.scaler = scaler;
  tm.config = config;
  out.infer_seconds = infer_seconds_per_1000(tm, records);
  return out;
}

double infer_seconds_per_1000(const TrainedModel& model, const std::vector<EcgRecord>& records) {
  if (records.empty()) throw Error(ErrorKind::InsufficientData, "no records to time");
  const auto t0 = Clock::now();
  const FeatureTable t = predict(model, records);
  return seconds_since(t0) * 1000.0 / static_cast<double>(records.size());
}

}  // namespace ecgx
