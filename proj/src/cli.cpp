#include "ecgx/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecgx/evaluation.hpp"
#include "ecgx/grouping.hpp"
#include "ecgx/synthgen.hpp"
#include "ecgx/trainer.hpp"

namespace ecgx {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidFilter:
    case ErrorKind::InvalidGroupSize:
    case ErrorKind::OddFeatureCount:
    case ErrorKind::UnsupportedResample:
      return kExitUsage;
    case ErrorKind::NumericFailure:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

namespace {

struct TrainOpts {
  fs::path manifest;
  fs::path truth;
  fs::path out;
  std::string features;
  std::string leads = "LEAD_II";
  int fs = 500;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double lr = 1e-3;
  std::size_t lr_fan_in_reference = 4096;
  bool no_signal_norm = false;
  bool no_rate_adapt = false;
  double low_cut = 0.5;
  double high_cut = 40.0;
  int filter_order = 4;
  std::string train_folds = "1,2,3,4,5,6,7,8";
  int val_fold = 9;
  int test_fold = 10;
  std::size_t jobs = 1;
};

struct Options {
  std::uint64_t seed = 42;
  TrainOpts train;

  int synth_n = 100;
  int synth_fs = 500;
  double synth_snr = 20.0;
  double synth_duration = 10.0;
  fs::path synth_out;

  bool joint = false;
  bool baseline = false;
  double ridge_lambda = 1e-3;

  std::string scheme = "semantic";
  std::string lead_feature = "R_Amp";
  std::size_t group_size = 3;
  bool restrict_to_truth = false;

  fs::path run;
  std::string split = "test";
  std::string format = "csv";

  std::size_t bench_records = 200;
  std::size_t bench_epochs = 1;
  std::vector<std::string> bench_leads{"LEAD_II"};
  std::vector<int> bench_fs{500, 100};

  fs::path ours;
  fs::path external;
  std::string external_id = "ecg_id";
  fs::path name_map;
  std::size_t top_k = 10;

  double filter_fs = 500.0;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto& cell : split_csv_line(text)) {
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

std::string hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream s;
  s << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw Error(ErrorKind::Usage, std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, std::string(what) + " not found: " + path.string());
}

void write_provenance(const fs::path& dir, const std::string& command,
                      const std::vector<std::string>& argv, std::uint64_t seed,
                      const std::vector<fs::path>& inputs) {
  fs::create_directories(dir);
  json hashes = json::object();
  for (const auto& p : inputs) {
    if (!p.empty() && fs::is_regular_file(p)) hashes[fs::absolute(p).string()] = hash_file(p);
  }
  const json j = {{"command", command}, {"argv", argv}, {"seed", seed}, {"inputs", hashes}};
  std::ofstream out(dir / "provenance.json");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "provenance.json").string());
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const TrainOpts& t) {
  require_file(t.manifest, "manifest");
  DatasetManifest m = read_manifest(t.manifest);
  m.split_rule.train_folds.clear();
  for (const auto& f : split_list(t.train_folds)) {
    try {
      m.split_rule.train_folds.push_back(std::stoi(f));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Usage, "bad fold '" + f + "' in --train-folds");
    }
  }
  m.split_rule.val_fold = t.val_fold;
  m.split_rule.test_fold = t.test_fold;
  return m;
}

TrainConfig make_config(const Options& o) {
  const TrainOpts& t = o.train;
  TrainConfig c;
  c.lead_config = LeadConfig::parse(t.leads);
  c.target_features = split_list(t.features);
  c.fs = t.fs;
  c.batch_size = t.batch_size;
  c.max_epochs = t.max_epochs;
  c.early_stop_patience = t.patience;
  c.lr = t.lr;
  c.lr_fan_in_reference = t.lr_fan_in_reference;
  c.rate_adapted_model = !t.no_rate_adapt;
  c.seed = o.seed;
  c.filter.low_cut = t.low_cut;
  c.filter.high_cut = t.high_cut;
  c.filter.order = t.filter_order;
  c.signal_norm = !t.no_signal_norm;
  c.model.n_outputs = std::max<std::size_t>(1, c.target_features.size());
  return c;
}

void add_train_options(CLI::App* cmd, TrainOpts& t, bool needs_out) {
  cmd->add_option("--manifest", t.manifest, "Manifest CSV (ecg_id,path,strat_fold)")->required();
  cmd->add_option("--truth", t.truth, "Ground-truth feature CSV")->required();
  auto* out = cmd->add_option("--out", t.out, "Output directory");
  if (needs_out) out->required();
  cmd->add_option("--leads", t.leads, "ALL12, LEAD_II, FOUR_LEAD, SIX_LEAD or a comma list of leads");
  cmd->add_option("--fs", t.fs, "Model sampling rate (500 or 100)");
  cmd->add_option("--batch-size", t.batch_size, "Mini-batch size");
  cmd->add_option("--max-epochs", t.max_epochs, "Epoch limit");
  cmd->add_option("--patience", t.patience, "Early-stopping patience in epochs");
  cmd->add_option("--lr", t.lr, "Adam learning rate");
  cmd->add_option("--lr-fan-in-ref", t.lr_fan_in_reference,
                  "Weights with larger fan-in train at lr * ref / fan_in (0 disables)");
  cmd->add_flag("--no-signal-norm", t.no_signal_norm, "Skip the per-lead z-score of the input");
  cmd->add_flag("--no-rate-adapt", t.no_rate_adapt,
                "Use the base architecture unchanged above 100 Hz instead of widening the first block");
  cmd->add_option("--low-cut", t.low_cut, "Band-pass low edge in Hz");
  cmd->add_option("--high-cut", t.high_cut, "Band-pass high edge in Hz");
  cmd->add_option("--filter-order", t.filter_order, "Butterworth prototype order");
  cmd->add_option("--train-folds", t.train_folds, "Comma list of training folds");
  cmd->add_option("--val-fold", t.val_fold, "Validation fold");
  cmd->add_option("--test-fold", t.test_fold, "Test fold");
  cmd->add_option("--jobs", t.jobs, "Models trained concurrently")->check(CLI::PositiveNumber);
}

std::string format_opt(const std::optional<double>& v) { return v ? format_real(*v, 6) : "NA"; }

std::string group_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "group_%02zu", i);
  return buf;
}

int cmd_synth(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  write_provenance(o.synth_out, "synth", argv, o.seed, {});
  SynthOptions so;
  so.snr_db = o.synth_snr;
  so.duration_s = o.synth_duration;
  const SynthCorpus corpus = generate_corpus(o.synth_n, o.synth_fs, o.seed, so);
  write_corpus(corpus, o.synth_out);
  out << "wrote " << corpus.records.size() << " records to " << o.synth_out.string() << '\n';
  return kExitOk;
}

void print_model_summary(std::ostream& out, const TrainedModel& m, const fs::path& dir) {
  std::optional<double> best;
  for (const auto& e : m.log) {
    if (e.epoch == m.best_epoch) best = e.val_pcc;
  }
  std::string targets;
  for (const auto& f : m.config.target_features) targets += (targets.empty() ? "" : ",") + f;
  out << "trained targets=" << targets << " epochs=" << m.log.size() << " best_epoch=" << m.best_epoch
      << " val_pcc=" << format_opt(best) << " dir=" << dir.string() << '\n';
}

int cmd_train(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  const TrainOpts& t = o.train;
  require_file(t.truth, "truth");
  require_file(t.manifest, "manifest");
  write_provenance(t.out, "train", argv, o.seed, {t.manifest, t.truth});
  TrainConfig cfg = make_config(o);
  if (cfg.target_features.empty()) throw Error(ErrorKind::Usage, "--features is required");
  cfg.validate();
  const DatasetManifest manifest = load_manifest(t);
  const FeatureTable truth = read_feature_csv(t.truth);
  for (const auto& f : cfg.target_features) truth.column_or_throw(f);
  const RecordLoader loader = manifest_loader(manifest);

  std::vector<std::vector<std::string>> groups;
  if (o.joint) {
    groups.push_back(cfg.target_features);
  } else {
    for (const auto& f : cfg.target_features) groups.push_back({f});
  }
  auto dir_for = [&](std::size_t i) { return o.joint ? t.out : t.out / groups[i].front(); };

  if (o.baseline) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      TrainConfig c = cfg;
      c.target_features = groups[i];
      const LinearBaseline b = linear_baseline(manifest, loader, truth, c, o.ridge_lambda);
      fs::create_directories(dir_for(i));
      save_baseline(b, dir_for(i) / "baseline.json");
      out << "fitted linear baseline dir=" << dir_for(i).string() << '\n';
    }
    return kExitOk;
  }
  const GroupingScheme scheme = custom_scheme("train", groups);
  const auto models = train_scheme(manifest, loader, truth, cfg, scheme, t.jobs);
  const json prov = {{"seed", o.seed}, {"manifest", hash_file(t.manifest)}, {"truth", hash_file(t.truth)}};
  for (std::size_t i = 0; i < models.size(); ++i) {
    save_run(models[i], dir_for(i), prov);
    print_model_summary(out, models[i], dir_for(i));
  }
  return kExitOk;
}

GroupingScheme select_scheme(const Options& o, const FeatureTable& truth,
                             const std::vector<std::string>& features) {
  GroupingScheme s;
  if (o.scheme == "semantic") {
    s = semantic_pairs();
  } else if (o.scheme == "clusters") {
    s = semantic_clusters();
  } else if (o.scheme == "reported-random") {
    s = reported_random_pairs();
  } else if (o.scheme == "random") {
    s = random_pairs(features.empty() ? global_features() : features, o.seed);
  } else if (o.scheme == "lead-groups") {
    s = lead_instance_groups(o.lead_feature, o.group_size, o.seed);
  } else if (fs::is_regular_file(o.scheme)) {
    std::ifstream in(o.scheme);
    try {
      s = scheme_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, o.scheme + ": " + e.what());
    }
  } else {
    throw Error(ErrorKind::Usage, "unknown scheme '" + o.scheme + "'");
  }
  if (o.restrict_to_truth) s = restrict_scheme(s, truth.feature_names);
  if (s.groups.empty()) throw Error(ErrorKind::ConfigError, "scheme has no trainable group");
  return s;
}

int cmd_group_train(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  const TrainOpts& t = o.train;
  require_file(t.truth, "truth");
  require_file(t.manifest, "manifest");
  write_provenance(t.out, "group-train", argv, o.seed, {t.manifest, t.truth});
  const DatasetManifest manifest = load_manifest(t);
  const FeatureTable truth = read_feature_csv(t.truth);
  const GroupingScheme scheme = select_scheme(o, truth, split_list(t.features));
  TrainConfig cfg = make_config(o);
  cfg.target_features = scheme.groups.front();
  cfg.validate();
  {
    std::ofstream s(t.out / "scheme.json");
    s << to_json(scheme).dump(2) << '\n';
  }
  const auto models = train_scheme(manifest, manifest_loader(manifest), truth, cfg, scheme, t.jobs);
  const json prov = {{"seed", o.seed}, {"scheme", scheme.name}};
  for (std::size_t i = 0; i < models.size(); ++i) {
    const fs::path dir = t.out / group_dir_name(i);
    save_run(models[i], dir, prov);
    print_model_summary(out, models[i], dir);
  }
  return kExitOk;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::Usage, "unknown split '" + s + "'");
}

ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw Error(ErrorKind::Usage, "unknown format '" + s + "'");
}

void merge_into(FeatureTable& merged, const FeatureTable& part) {
  for (const auto& f : part.feature_names) {
    if (merged.column_of(f)) {
      throw Error(ErrorKind::ConfigError, "feature " + f + " is predicted by two models");
    }
    for (const auto& [id, row] : part.rows) merged.set(id, f, row[part.column_or_throw(f)]);
  }
}

int cmd_eval(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  const TrainOpts& t = o.train;
  require_file(t.truth, "truth");
  require_file(t.manifest, "manifest");
  if (!fs::is_directory(o.run)) throw Error(ErrorKind::Io, "run directory not found: " + o.run.string());
  const ReportFormat format = parse_format(o.format);
  write_provenance(t.out, "eval", argv, o.seed, {t.manifest, t.truth});
  const DatasetManifest manifest = load_manifest(t);
  const FeatureTable truth = read_feature_csv(t.truth);
  const RecordLoader loader = manifest_loader(manifest);
  const auto ids = select_split(manifest, parse_split(o.split));

  std::vector<fs::path> models;
  for (const auto& entry : fs::recursive_directory_iterator(o.run)) {
    const auto name = entry.path().filename();
    if (name == "model.ckpt" || name == "baseline.json") models.push_back(entry.path());
  }
  std::sort(models.begin(), models.end());
  if (models.empty()) throw Error(ErrorKind::Io, "no model.ckpt or baseline.json under " + o.run.string());

  FeatureTable merged;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& path : models) {
    if (path.filename() == "model.ckpt") {
      merge_into(merged, predict(load_trained_model(path), loader, ids));
    } else {
      merge_into(merged, predict(load_baseline(path), loader, ids));
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  EvalReport report = build_report(truth, merged, merged.feature_names);
  report.metadata["run"] = o.run.string();
  report.metadata["split"] = o.split;
  report.metadata["n_records"] = std::to_string(ids.size());
  report.metadata["n_models"] = std::to_string(models.size());
  if (!ids.empty()) report.timings["infer_seconds_per_1000"] = seconds * 1000.0 / static_cast<double>(ids.size());

  if (fs::is_regular_file(o.run / "scheme.json")) {
    std::ifstream in(o.run / "scheme.json");
    const GroupingScheme scheme = scheme_from_json(json::parse(in));
    report.metadata["scheme"] = scheme.name;
    std::map<std::string, double> scores;
    for (const auto& col : merged.feature_names) {
      if (auto v = try_pcc(pair_columns(truth, col, merged, col))) scores[col] = *v;
    }
    try {
      for (const auto& [feature, v] : group_average_score(scores, scheme)) {
        report.metadata["group_average." + feature] = format_real(v, 6);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::IncompleteScores) throw;
      report.metadata["group_average"] = "undefined";
    }
  }

  write_feature_csv(merged, t.out / "predictions.csv");
  for (const auto& p : emit_report(report, format, t.out)) out << "wrote " << p.string() << '\n';
  for (const auto& g : report.global) {
    out << g.feature << " pcc=" << format_opt(g.pcc) << " n=" << g.n_pairs << '\n';
  }
  for (const auto& l : report.lead_specific) {
    out << l.feature << " pcc=" << (l.stats ? format_real(l.stats->mean, 6) : "NA")
        << " variance=" << (l.stats ? format_real(l.stats->variance, 6) : "NA")
        << " best_lead=" << (l.stats ? std::string(lead_name(l.stats->best_lead)) : "NA") << '\n';
  }
  return kExitOk;
}

int cmd_bench(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  const TrainOpts& t = o.train;
  require_file(t.truth, "truth");
  require_file(t.manifest, "manifest");
  write_provenance(t.out, "bench", argv, o.seed, {t.manifest, t.truth});
  const DatasetManifest manifest = read_manifest(t.manifest);
  const FeatureTable truth = read_feature_csv(t.truth);
  TrainConfig base = make_config(o);
  if (base.target_features.empty()) throw Error(ErrorKind::Usage, "--features is required");
  if (manifest.entries.size() < o.bench_records) {
    throw Error(ErrorKind::InsufficientData, "manifest has fewer than " +
                                                 std::to_string(o.bench_records) + " records");
  }
  const RecordLoader loader = manifest_loader(manifest);
  std::vector<EcgRecord> records;
  for (std::size_t i = 0; i < o.bench_records; ++i) records.push_back(loader(manifest.entries[i].record_id));

  std::ofstream csv(t.out / "bench.csv");
  if (!csv) throw Error(ErrorKind::Io, "cannot write " + (t.out / "bench.csv").string());
  csv << "lead_config,fs,train_minutes_per_1000,infer_seconds_per_1000,n_records,epochs\n";
  for (const auto& leads : o.bench_leads) {
    for (int fs_hz : o.bench_fs) {
      TrainConfig c = base;
      c.lead_config = LeadConfig::parse(leads);
      c.fs = fs_hz;
      const TimingResult r = time_per_1000(c, records, truth, o.bench_epochs);
      csv << '"' << c.lead_config.to_string() << "\"," << fs_hz << ',' << format_real(r.train_minutes, 6)
          << ',' << format_real(r.infer_seconds, 6) << ',' << r.n_records << ',' << r.epochs << '\n';
      out << "leads=" << c.lead_config.to_string() << " fs=" << fs_hz
          << " train_minutes_per_1000=" << format_real(r.train_minutes, 6)
          << " infer_seconds_per_1000=" << format_real(r.infer_seconds, 6) << '\n';
    }
  }
  return kExitOk;
}

std::map<std::string, std::string> read_name_map(const fs::path& path) {
  std::map<std::string, std::string> map;
  if (path.empty()) return map;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw Error(ErrorKind::ParseError, path.string() + ": expected ours,external");
    map[cells[0]] = cells[1];
  }
  return map;
}

int cmd_compare(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  require_file(o.ours, "ours");
  require_file(o.external, "external");
  require_file(o.train.truth, "truth");
  write_provenance(o.train.out, "compare", argv, o.seed, {o.ours, o.external, o.train.truth, o.name_map});
  const FeatureTable ours = read_feature_csv(o.ours);
  const FeatureTable external = read_feature_csv(o.external, o.external_id);
  const FeatureTable truth = read_feature_csv(o.train.truth);
  const auto name_map = read_name_map(o.name_map);
  std::vector<std::string> features = split_list(o.train.features);
  if (features.empty()) {
    for (const auto& f : ours.feature_names) {
      auto m = name_map.find(f);
      if (truth.column_of(f) && external.column_of(m == name_map.end() ? f : m->second)) {
        features.push_back(f);
      }
    }
  }
  const ComparisonReport report = compare_external(ours, external, truth, features, name_map);
  write_comparison_csv(report, o.train.out / "comparison.csv");
  const TopK top = top_k_external(report, o.top_k);
  {
    std::ofstream f(o.train.out / "top_k.csv");
    f << "rank,feature\n";
    for (std::size_t i = 0; i < top.features.size(); ++i) f << i + 1 << ',' << top.features[i] << '\n';
  }
  for (const auto& row : report.rows) {
    out << row.feature << " ours=" << format_opt(row.pcc_ours) << " external=" << format_opt(row.pcc_external)
        << " winner=" << winner_name(row.winner) << '\n';
  }
  if (top.clamped) out << "top-k clamped to " << top.features.size() << " features\n";
  return kExitOk;
}

int cmd_dump_filter(const Options& o, std::ostream& out) {
  FilterSpec spec;
  spec.low_cut = o.train.low_cut;
  spec.high_cut = o.train.high_cut;
  spec.order = o.train.filter_order;
  const int fs_hz = static_cast<int>(o.filter_fs);
  spec.validate(fs_hz);
  const SosCascade sos = design_bandpass(spec, fs_hz);
  out << "section,b0,b1,b2,a0,a1,a2\n";
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    out << i << ',' << format_real(s.b0) << ',' << format_real(s.b1) << ',' << format_real(s.b2) << ",1,"
        << format_real(s.a1) << ',' << format_real(s.a2) << '\n';
  }
  return kExitOk;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("ECGX_SEED");
  if (!env || !*env) return 42;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Usage, std::string("ECGX_SEED is not an integer: ") + env);
  }
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
  err << "error kind=" << kind << " message=\"" << one_line(message) << "\"\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  try {
    o.seed = default_seed();
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  }

  CLI::App app{"ECG feature regression toolkit", "ecgx"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "Seed for every random stream (falls back to ECGX_SEED)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with exact ground truth");
  synth->add_option("--n", o.synth_n, "Number of records")->check(CLI::PositiveNumber);
  synth->add_option("--fs", o.synth_fs, "Sampling rate (500 or 100)")->check(CLI::IsMember({100, 500}));
  synth->add_option("--snr-db", o.synth_snr, "Signal-to-noise ratio per lead");
  synth->add_option("--duration", o.synth_duration, "Record length in seconds");
  synth->add_option("--seed", o.seed, "Random seed");
  synth->add_option("--out", o.synth_out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train one model per feature (or one joint model)");
  add_train_options(train, o.train, true);
  train->add_option("--features", o.train.features, "Comma list of target features")->required();
  train->add_option("--seed", o.seed, "Random seed");
  train->add_flag("--joint", o.joint, "Train a single multi-output model on all features");
  train->add_flag("--baseline", o.baseline, "Fit the ridge-regression baseline instead of the CNN");
  train->add_option("--ridge-lambda", o.ridge_lambda, "Ridge penalty of the baseline");

  auto* group = app.add_subcommand("group-train", "Train one model per group of a grouping scheme");
  add_train_options(group, o.train, true);
  group->add_option("--scheme", o.scheme,
                    "semantic, clusters, random, reported-random, lead-groups or a scheme JSON file");
  group->add_option("--features", o.train.features, "Features for --scheme random (default: the 16 globals)");
  group->add_option("--lead-feature", o.lead_feature, "Feature for --scheme lead-groups");
  group->add_option("--group-size", o.group_size, "Instances per group for --scheme lead-groups");
  group->add_flag("--restrict", o.restrict_to_truth, "Drop groups with features absent from the truth table");
  group->add_option("--seed", o.seed, "Random seed");

  auto* eval = app.add_subcommand("eval", "Evaluate trained models on a split");
  eval->add_option("--run", o.run, "Run directory from train or group-train")->required();
  eval->add_option("--manifest", o.train.manifest, "Manifest CSV")->required();
  eval->add_option("--truth", o.train.truth, "Ground-truth feature CSV")->required();
  eval->add_option("--out", o.train.out, "Report directory")->required();
  eval->add_option("--split", o.split, "train, val or test");
  eval->add_option("--format", o.format, "csv or json");
  eval->add_option("--train-folds", o.train.train_folds, "Comma list of training folds");
  eval->add_option("--val-fold", o.train.val_fold, "Validation fold");
  eval->add_option("--test-fold", o.train.test_fold, "Test fold");
  eval->add_option("--seed", o.seed, "Random seed (recorded only)");

  auto* bench = app.add_subcommand("bench", "Training and inference time per 1000 records");
  add_train_options(bench, o.train, true);
  bench->add_option("--features", o.train.features, "Comma list of target features")->required();
  bench->add_option("--records", o.bench_records, "Records used for timing (at least 100)");
  bench->add_option("--epochs", o.bench_epochs, "Training epochs timed");
  bench->add_option("--lead-configs", o.bench_leads, "Lead configurations to time");
  bench->add_option("--rates", o.bench_fs, "Model sampling rates to time");
  bench->add_option("--seed", o.seed, "Random seed");

  auto* compare = app.add_subcommand("compare", "Compare predictions with an external extractor");
  compare->add_option("--ours", o.ours, "Our predictions CSV")->required();
  compare->add_option("--external", o.external, "External extractor CSV")->required();
  compare->add_option("--external-id", o.external_id, "Record id column of the external CSV");
  compare->add_option("--truth", o.train.truth, "Ground-truth feature CSV")->required();
  compare->add_option("--features", o.train.features, "Comma list of features (default: all shared)");
  compare->add_option("--name-map", o.name_map, "CSV mapping our names to external names (ours,external)");
  compare->add_option("--top-k", o.top_k, "Features kept in the top-k list");
  compare->add_option("--out", o.train.out, "Output directory")->required();
  compare->add_option("--seed", o.seed, "Random seed (recorded only)");

  auto* dump = app.add_subcommand("dump-filter", "Print the band-pass biquad coefficients");
  dump->add_option("--fs", o.filter_fs, "Sampling rate in Hz");
  dump->add_option("--low-cut", o.train.low_cut, "Low edge in Hz");
  dump->add_option("--high-cut", o.train.high_cut, "High edge in Hz");
  dump->add_option("--filter-order", o.train.filter_order, "Butterworth prototype order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    report_error(err, "Usage", e.what());
    return kExitUsage;
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    if (synth->parsed()) return cmd_synth(o, args, out);
    if (train->parsed()) return cmd_train(o, args, out);
    if (group->parsed()) return cmd_group_train(o, args, out);
    if (eval->parsed()) return cmd_eval(o, args, out);
    if (bench->parsed()) return cmd_bench(o, args, out);
    if (compare->parsed()) return cmd_compare(o, args, out);
    if (dump->parsed()) return cmd_dump_filter(o, out);
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(err, "Io", e.what());
    return kExitData;
  } catch (const std::bad_alloc&) {
    report_error(err, "Io", "out of memory");
    return kExitData;
  }
  report_error(err, "Usage", "no subcommand");
  return kExitUsage;
}

}  // namespace ecgx
