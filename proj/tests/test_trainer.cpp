#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>

#include "ecgx/error.hpp"
#include "ecgx/evaluation.hpp"
#include "ecgx/synthgen.hpp"
#include "ecgx/trainer.hpp"
#include "test_util.hpp"

using namespace ecgx;

namespace {

TrainConfig small_config(std::vector<std::string> targets, std::size_t epochs = 3) {
  TrainConfig cfg;
  cfg.fs = 100;
  cfg.target_features = std::move(targets);
  cfg.max_epochs = epochs;
  cfg.early_stop_patience = std::min<std::size_t>(2, epochs - 1);
  cfg.batch_size = 16;
  cfg.seed = 3;
  return cfg;
}

const SynthCorpus& corpus100() {
  static const SynthCorpus c = generate_corpus(120, 100, 31);
  return c;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no ecgx::Error thrown");
  return ErrorKind::Io;
}

std::vector<EcgRecord> records_of(const SynthCorpus& c, const std::vector<std::string>& ids) {
  std::vector<EcgRecord> out;
  for (const auto& id : ids) {
    for (const auto& r : c.records) {
      if (r.record_id == id) out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("config validation and json round trip") {
    auto cfg = small_config({"RR_Mean", "QRS_Dur"});
    cfg.lead_config = LeadConfig::four_lead();
    cfg.filter.high_cut = 35.0;
    cfg.signal_norm = false;
    const auto back = train_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(back.lead_config.leads == cfg.lead_config.leads);

    auto bad = cfg;
    bad.target_features.clear();
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
    bad = cfg;
    bad.early_stop_patience = bad.max_epochs;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
  }

  TEST_CASE("same seed and data give identical parameters; one epoch gives one log entry") {
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean"}, 2);
    const auto a = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    const auto b = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    REQUIRE(a.model.params.size() == b.model.params.size());
    for (std::size_t k = 0; k < a.model.params.size(); ++k) CHECK(a.model.params[k].values == b.model.params[k].values);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
      CHECK(a.log[e].train_loss == b.log[e].train_loss);
      CHECK(a.log[e].val_pcc == b.log[e].val_pcc);
    }

    cfg.max_epochs = 1;
    cfg.early_stop_patience = 0;
    const auto one = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    CHECK(one.log.size() == 1);
    CHECK(one.scaler.features() == cfg.target_features);
    CHECK(one.timings.n_train_records == 96);
    CHECK(one.timings.n_val_records == 12);
  }

  TEST_CASE("early stopping keeps the best validation epoch") {
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean", "HR_Ventr"}, 6);
    const auto tm = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    REQUIRE(tm.best_epoch >= 1);
    const auto best = tm.log[tm.best_epoch - 1].val_pcc;
    REQUIRE(best.has_value());
    for (const auto& e : tm.log) {
      if (e.val_pcc) CHECK(*e.val_pcc <= *best);
    }
    const auto val_ids = select_split(c.manifest, Split::Val);
    const auto pred = predict(tm, memory_loader(c.records), val_ids);
    double mean = 0.0;
    for (const auto& f : cfg.target_features) {
      mean += pcc(pair_columns(c.truth, f, pred, f));
    }
    mean /= 2.0;
    CHECK(mean == doctest::Approx(*best).epsilon(1e-9));
  }

  TEST_CASE("rows without any target value do not change training") {
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean"}, 2);
    const auto base = train(c.manifest, memory_loader(c.records), c.truth, cfg);

    auto manifest = c.manifest;
    auto records = c.records;
    auto truth = c.truth;
    for (int i = 0; i < 7; ++i) {
      auto extra = c.records[static_cast<std::size_t>(i)];
      extra.record_id = "blank" + std::to_string(i);
      records.push_back(extra);
      manifest.entries.insert(manifest.entries.begin() + 2 * i, {extra.record_id, "", 1 + i % 8});
      if (i % 2 == 0) truth.set(extra.record_id, "RR_Mean", std::nullopt);
    }
    const auto more = train(manifest, memory_loader(records), truth, cfg);
    for (std::size_t k = 0; k < base.model.params.size(); ++k) {
      CHECK(base.model.params[k].values == more.model.params[k].values);
    }
  }

  TEST_CASE("partially missing targets are masked, not dropped") {
    const auto& c = corpus100();
    auto truth = c.truth;
    const auto train_ids = select_split(c.manifest, Split::Train);
    for (std::size_t i = 0; i < train_ids.size(); i += 3) truth.set(train_ids[i], "QRS_Dur", std::nullopt);
    auto cfg = small_config({"RR_Mean", "QRS_Dur"}, 1);
    cfg.early_stop_patience = 0;
    const auto tm = train(c.manifest, memory_loader(c.records), truth, cfg);
    CHECK(tm.timings.n_train_records == train_ids.size());
    CHECK(std::isfinite(tm.log[0].train_loss));
  }

  TEST_CASE("overfitting a few records reproduces their targets") {
    const auto c = generate_corpus(8, 100, 77);
    DatasetManifest m = c.manifest;
    for (auto& e : m.entries) e.fold = 1;
    auto cfg = small_config({"RR_Mean"}, 300);
    cfg.batch_size = 8;
    const auto tm = train(m, memory_loader(c.records), c.truth, cfg);
    const auto pred = predict(tm, c.records);
    for (const auto& r : c.records) {
      const double t = *c.truth.get(r.record_id, "RR_Mean");
      CHECK(std::abs(*pred.get(r.record_id, "RR_Mean") - t) <= 0.05 * t);
    }

    // A single record: the constant-target rule returns the training value.
    DatasetManifest one{{m.entries[0]}, m.split_rule};
    auto cfg1 = small_config({"RR_Mean"}, 20);
    const auto tm1 = train(one, memory_loader(c.records), c.truth, cfg1);
    const auto p1 = predict(tm1, {c.records[0]});
    const double t0 = *c.truth.get(c.records[0].record_id, "RR_Mean");
    CHECK(std::abs(*p1.get(c.records[0].record_id, "RR_Mean") - t0) <= 0.05 * t0);
  }

  TEST_CASE("predict: one row per record, columns in target order, missing leads rejected") {
    const auto& c = corpus100();
    auto cfg = small_config({"QRS_Dur", "RR_Mean", "HR_Ventr"}, 1);
    cfg.early_stop_patience = 0;
    const auto tm = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    const auto test_ids = select_split(c.manifest, Split::Test);
    const auto recs = records_of(c, test_ids);
    const auto p = predict(tm, recs);
    CHECK(p.feature_names == cfg.target_features);
    CHECK(p.rows.size() == recs.size());
    const auto p2 = predict(tm, memory_loader(c.records), test_ids);
    CHECK(p2.rows == p.rows);

    auto no_ii = recs[0];
    no_ii = select_leads(no_ii, LeadConfig::custom({LeadId::I, LeadId::V1}));
    CHECK(kind_of([&] { predict(tm, std::vector<EcgRecord>{no_ii}); }) == ErrorKind::MissingLead);
  }

  TEST_CASE("unknown features and empty datasets are rejected") {
    const auto& c = corpus100();
    auto cfg = small_config({"Not_A_Feature"}, 1);
    cfg.early_stop_patience = 0;
    CHECK(kind_of([&] { train(c.manifest, memory_loader(c.records), c.truth, cfg); }) ==
          ErrorKind::UnknownFeature);

    auto truth = c.truth;
    for (const auto& [id, row] : c.truth.rows) truth.set(id, "QRS_Dur", std::nullopt);
    cfg.target_features = {"QRS_Dur"};
    CHECK(kind_of([&] { train(c.manifest, memory_loader(c.records), truth, cfg); }) ==
          ErrorKind::EmptyDataset);
    CHECK(kind_of([&] { linear_baseline(c.manifest, memory_loader(c.records), truth, cfg); }) ==
          ErrorKind::EmptyDataset);
  }

  TEST_CASE("run directory round trip") {
    test::TempDir dir("run");
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean"}, 2);
    const auto tm = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    save_run(tm, dir.path(), {{"seed", 3}});
    for (const char* f : {"config.json", "model.ckpt", "log.csv", "timings.csv"}) {
      CHECK(std::filesystem::exists(dir / f));
    }
    const auto back = load_trained_model(dir / "model.ckpt");
    CHECK(back.best_epoch == tm.best_epoch);
    CHECK(back.log.size() == tm.log.size());
    CHECK(to_json(back.config) == to_json(tm.config));
    const auto recs = records_of(c, select_split(c.manifest, Split::Test));
    CHECK(predict(back, recs).rows == predict(tm, recs).rows);

    std::ifstream log(dir / "log.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "epoch,train_loss,val_pcc,seconds");
  }

  TEST_CASE("scheme training is independent of the job count") {
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean"}, 1);
    cfg.early_stop_patience = 0;
    const auto scheme = custom_scheme("two", {{"RR_Mean", "HR_Ventr"}, {"QRS_Dur"}});
    const auto serial = train_scheme(c.manifest, memory_loader(c.records), c.truth, cfg, scheme, 1);
    const auto parallel = train_scheme(c.manifest, memory_loader(c.records), c.truth, cfg, scheme, 2);
    REQUIRE(serial.size() == 2);
    CHECK(serial[0].config.target_features == std::vector<std::string>{"RR_Mean", "HR_Ventr"});
    CHECK(serial[1].model.config.n_outputs == 1);
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t k = 0; k < serial[g].model.params.size(); ++k) {
        CHECK(serial[g].model.params[k].values == parallel[g].model.params[k].values);
      }
    }
  }

  TEST_CASE("linear baseline recovers a linear functional of its inputs") {
    const auto c = generate_corpus(300, 100, 12);
    auto cfg = small_config({"Lin"}, 1);
    FeatureTable truth;
    truth.ensure_column("Lin");
    Rng rng(4);
    std::vector<double> w;
    for (const auto& r : c.records) {
      const auto x = baseline_inputs(preprocess_record(r, cfg), 10);
      if (w.empty()) {
        for (std::size_t i = 0; i < x.size(); ++i) w.push_back(rng.normal());
      }
      double v = 5.0;
      for (std::size_t i = 0; i < x.size(); ++i) v += w[i] * x[i];
      truth.set(r.record_id, "Lin", v);
    }
    const auto lb = linear_baseline(c.manifest, memory_loader(c.records), truth, cfg);
    CHECK(lb.n_inputs == w.size());
    const auto test_ids = select_split(c.manifest, Split::Test);
    const auto pred = predict(lb, memory_loader(c.records), test_ids);
    CHECK(pcc(pair_columns(truth, "Lin", pred, "Lin")) >= 0.99);

    test::TempDir dir("lb");
    save_baseline(lb, dir / "baseline.json");
    const auto back = load_baseline(dir / "baseline.json");
    CHECK(predict(back, memory_loader(c.records), test_ids).rows == pred.rows);
  }

  TEST_CASE("baseline block means") {
    EcgRecord r = test::sine_record("b", 100, 25, {LeadId::II, LeadId::V1}, 0.0);
    for (std::size_t i = 0; i < r.samples.size(); ++i) r.samples[i] = static_cast<double>(i);
    const auto x = baseline_inputs(r, 10);
    // Two full blocks per lead; the partial tail is dropped.
    REQUIRE(x.size() == 4);
    CHECK(x[0] == 4.5);
    CHECK(x[1] == 14.5);
    CHECK(x[2] == 29.5);
    CHECK(x[3] == 39.5);
  }

  TEST_CASE("constant target: baseline runs and its PCC is reported missing") {
    const auto& c = corpus100();
    FeatureTable truth;
    truth.ensure_column("Flat");
    for (const auto& r : c.records) truth.set(r.record_id, "Flat", 42.0);
    auto cfg = small_config({"Flat"}, 1);
    const auto lb = linear_baseline(c.manifest, memory_loader(c.records), truth, cfg);
    const auto test_ids = select_split(c.manifest, Split::Test);
    const auto pred = predict(lb, memory_loader(c.records), test_ids);
    CHECK(*pred.get(test_ids[0], "Flat") == 42.0);
    CHECK_FALSE(try_pcc(pair_columns(truth, "Flat", pred, "Flat")).has_value());
    const auto report = build_report(truth, pred, {"Flat"});
    REQUIRE(report.global.size() == 1);
    CHECK_FALSE(report.global[0].pcc.has_value());
  }

  TEST_CASE("timing: per-1000 normalisation, record floor, repeatable inference") {
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean"}, 1);
    std::vector<EcgRecord> few(c.records.begin(), c.records.begin() + 50);
    CHECK(kind_of([&] { time_per_1000(cfg, few, c.truth); }) == ErrorKind::InsufficientData);
    const auto t = time_per_1000(cfg, c.records, c.truth, 1);
    CHECK(t.n_records == c.records.size());
    CHECK(t.train_minutes > 0.0);
    CHECK(t.infer_seconds > 0.0);

    cfg.early_stop_patience = 0;
    cfg.max_epochs = 1;
    const auto tm = train(c.manifest, memory_loader(c.records), c.truth, cfg);
    double a = infer_seconds_per_1000(tm, c.records);
    double b = infer_seconds_per_1000(tm, c.records);
    // Best of a few runs damps scheduler noise on a shared machine.
    for (int i = 0; i < 2; ++i) {
      a = std::min(a, infer_seconds_per_1000(tm, c.records));
      b = std::min(b, infer_seconds_per_1000(tm, c.records));
    }
    CHECK(std::abs(a - b) <= 0.5 * std::max(a, b));
  }

  TEST_CASE("preprocessing chain") {
    const auto& c = corpus100();
    auto cfg = small_config({"RR_Mean"});
    cfg.lead_config = LeadConfig::four_lead();
    const auto p = preprocess_record(c.records[0], cfg);
    CHECK(p.leads == cfg.lead_config.leads);
    CHECK(p.fs == 100);
    const auto manual = normalize_signal(bandpass(select_leads(c.records[0], cfg.lead_config), cfg.filter));
    CHECK(p.samples == manual.samples);
    cfg.signal_norm = false;
    CHECK(preprocess_record(c.records[0], cfg).samples ==
          bandpass(select_leads(c.records[0], cfg.lead_config), cfg.filter).samples);
  }
}
