#include "ecgx/ecg_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ecgx/error.hpp"

namespace ecgx {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kNumLeads> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(std::string_view text) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::ifstream open_or_throw(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

std::string strip_bom(std::string line) {
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

struct SignalSpec {
  std::string file;
  double gain = 200.0;
  double baseline = 0.0;
  std::string label;
};

SignalSpec parse_signal_line(std::string_view line, std::size_t index) {
  const auto fields = split_ws(line);
  if (fields.size() < 2) {
    throw Error(ErrorKind::CorruptRecord, "signal line " + std::to_string(index) + " is truncated");
  }
  SignalSpec spec;
  spec.file = std::string(fields[0]);
  if (fields[1] != "16") {
    throw Error(ErrorKind::UnsupportedFormat,
                "signal " + std::to_string(index) + " uses format " + std::string(fields[1]) +
                    "; only format 16 is supported");
  }
  std::optional<double> adc_zero;
  if (fields.size() > 4) adc_zero = parse_double(fields[4]);
  bool have_baseline = false;
  if (fields.size() > 2) {
    // gain[(baseline)][/units]
    std::string_view g = fields[2];
    if (auto slash = g.find('/'); slash != std::string_view::npos) g = g.substr(0, slash);
    if (auto open = g.find('('); open != std::string_view::npos) {
      auto close = g.find(')', open);
      if (close == std::string_view::npos) {
        throw Error(ErrorKind::CorruptRecord, "malformed baseline in " + std::string(fields[2]));
      }
      auto base = parse_double(g.substr(open + 1, close - open - 1));
      if (!base) throw Error(ErrorKind::CorruptRecord, "malformed baseline in " + std::string(fields[2]));
      spec.baseline = *base;
      have_baseline = true;
      g = g.substr(0, open);
    }
    auto gain = parse_double(g);
    if (!gain) throw Error(ErrorKind::CorruptRecord, "malformed gain " + std::string(fields[2]));
    // WFDB: a gain of zero means "uncalibrated", conventionally 200 adu/mV.
    spec.gain = *gain == 0.0 ? 200.0 : *gain;
  }
  if (!have_baseline && adc_zero) spec.baseline = *adc_zero;
  if (fields.size() < 9) {
    throw Error(ErrorKind::UnknownLead, "signal " + std::to_string(index) + " has no label");
  }
  spec.label = std::string(fields[8]);
  return spec;
}

}  // namespace

std::string_view lead_name(LeadId lead) { return kLeadNames[lead_index(lead)]; }

std::optional<LeadId> try_parse_lead(std::string_view label) {
  label = trim(label);
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    if (iequals(label, kLeadNames[i])) return kAllLeads[i];
  }
  return std::nullopt;
}

LeadId parse_lead(std::string_view label) {
  if (auto lead = try_parse_lead(label)) return *lead;
  throw Error(ErrorKind::UnknownLead, "unknown lead label '" + std::string(label) + "'");
}

std::optional<std::size_t> EcgRecord::row_of(LeadId id) const {
  auto it = std::find(leads.begin(), leads.end(), id);
  if (it == leads.end()) return std::nullopt;
  return static_cast<std::size_t>(it - leads.begin());
}

void EcgRecord::validate() const {
  if (fs <= 0) throw Error(ErrorKind::CorruptRecord, record_id + ": non-positive sampling rate");
  if (samples.size() != leads.size() * n_samples) {
    throw Error(ErrorKind::CorruptRecord, record_id + ": sample matrix does not match lead count");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw Error(ErrorKind::CorruptRecord,
                  record_id + ": non-finite sample at lead " + std::to_string(i / n_samples) +
                      ", index " + std::to_string(i % n_samples));
    }
  }
}

std::string_view unit_name(Unit unit) {
  switch (unit) {
    case Unit::Milliseconds: return "ms";
    case Unit::Microvolts: return "uV";
    case Unit::Bpm: return "bpm";
    case Unit::Degrees: return "deg";
    case Unit::Unitless: return "";
  }
  return "";
}

Unit infer_unit(std::string_view name) {
  auto has = [&](std::string_view s) { return name.find(s) != std::string_view::npos; };
  if (has("Axis")) return Unit::Degrees;
  if (has("HR")) return Unit::Bpm;
  if (has("_Amp") || has("Amp_")) return Unit::Microvolts;
  if (has("Area")) return Unit::Unitless;
  if (has("_On") || has("_Off") || has("_Int") || has("_Dur") || has("RR")) {
    return Unit::Milliseconds;
  }
  return Unit::Unitless;
}

std::optional<std::size_t> FeatureTable::column_of(std::string_view name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - feature_names.begin());
}

std::size_t FeatureTable::column_or_throw(std::string_view name) const {
  if (auto c = column_of(name)) return *c;
  throw Error(ErrorKind::UnknownFeature, "feature '" + std::string(name) + "' not in table");
}

std::optional<double> FeatureTable::get(const std::string& record_id,
                                        std::string_view feature) const {
  auto row = rows.find(record_id);
  auto col = column_of(feature);
  if (row == rows.end() || !col) return std::nullopt;
  return row->second[*col];
}

std::size_t FeatureTable::ensure_column(const std::string& name) {
  if (auto c = column_of(name)) return *c;
  feature_names.push_back(name);
  units.push_back(infer_unit(name));
  for (auto& [id, row] : rows) row.push_back(std::nullopt);
  return feature_names.size() - 1;
}

void FeatureTable::set(const std::string& record_id, std::string_view feature,
                       std::optional<double> value) {
  const std::size_t col = ensure_column(std::string(feature));
  auto& row = rows[record_id];
  row.resize(feature_names.size());
  row[col] = value;
}

FeatureTable FeatureTable::select(const std::vector<std::string>& features) const {
  std::vector<std::size_t> cols;
  FeatureTable out;
  for (const auto& f : features) {
    const std::size_t c = column_or_throw(f);
    cols.push_back(c);
    out.feature_names.push_back(f);
    out.units.push_back(units.size() > c ? units[c] : infer_unit(f));
  }
  for (const auto& [id, row] : rows) {
    FeatureRow r;
    r.reserve(cols.size());
    for (auto c : cols) r.push_back(row[c]);
    out.rows.emplace(id, std::move(r));
  }
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::string format_real(double value, int significant_digits) {
  if (std::isnan(value)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, value);
  return buf;
}

FeatureTable read_feature_csv(const fs::path& path, std::string_view id_column) {
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": empty file");
  const auto header = split_csv_line(strip_bom(line));
  std::optional<std::size_t> id_col;
  FeatureTable table;
  std::vector<std::size_t> value_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (name == id_column) {
      id_col = i;
    } else {
      table.feature_names.push_back(name);
      table.units.push_back(infer_unit(name));
      value_cols.push_back(i);
    }
  }
  if (!id_col) {
    throw Error(ErrorKind::ParseError,
                path.string() + ": id column '" + std::string(id_column) + "' not found");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_bom(line);
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() > header.size()) {
      throw Error(ErrorKind::ParseError,
                  path.string() + ": row " + std::to_string(line_no) + " has too many cells");
    }
    const std::string id(trim(cells.size() > *id_col ? std::string_view(cells[*id_col]) : ""));
    if (id.empty()) {
      throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(line_no) +
                                             " has an empty id");
    }
    FeatureRow row(value_cols.size());
    for (std::size_t k = 0; k < value_cols.size(); ++k) {
      const std::size_t c = value_cols[k];
      if (c >= cells.size()) continue;
      const auto cell = trim(cells[c]);
      if (cell.empty() || iequals(cell, "nan")) continue;
      auto v = parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(line_no) +
                                               ", column '" + header[c] + "': cannot parse '" +
                                               std::string(cell) + "'");
      }
      row[k] = *v;
    }
    if (!table.rows.emplace(id, std::move(row)).second) {
      throw Error(ErrorKind::DuplicateId, path.string() + ": duplicate record id '" + id + "'");
    }
  }
  return table;
}

void write_feature_csv(const FeatureTable& table, const fs::path& path,
                       std::string_view id_column) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << id_column;
  for (const auto& name : table.feature_names) out << ',' << name;
  out << '\n';
  for (const auto& [id, row] : table.rows) {
    out << id;
    for (const auto& cell : row) {
      out << ',';
      if (cell) out << format_real(*cell);
    }
    out << '\n';
  }
}

EcgRecord read_wfdb_record(const fs::path& header_path) {
  auto in = open_or_throw(header_path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    line = strip_bom(line);
    if (trim(line).empty() || trim(line).front() == '#') continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw Error(ErrorKind::CorruptRecord, header_path.string() + ": empty header");

  const auto rec = split_ws(lines[0]);
  if (rec.size() < 4) {
    throw Error(ErrorKind::CorruptRecord,
                header_path.string() + ": record line needs name, n_sig, fs and n_samples");
  }
  EcgRecord record;
  record.record_id = std::string(rec[0]);
  if (auto slash = record.record_id.find('/'); slash != std::string::npos) {
    throw Error(ErrorKind::UnsupportedFormat, header_path.string() + ": multi-segment records are not supported");
  }
  const auto n_sig = parse_int(rec[1]);
  std::string_view fs_text = rec[2];
  if (auto slash = fs_text.find('/'); slash != std::string_view::npos) fs_text = fs_text.substr(0, slash);
  const auto fs_value = parse_double(fs_text);
  const auto n_samples = parse_int(rec[3]);
  if (!n_sig || *n_sig <= 0 || !fs_value || *fs_value <= 0.0 || !n_samples || *n_samples < 0) {
    throw Error(ErrorKind::CorruptRecord, header_path.string() + ": malformed record line");
  }
  if (std::abs(*fs_value - std::round(*fs_value)) > 1e-9) {
    throw Error(ErrorKind::UnsupportedFormat, header_path.string() + ": non-integer sampling rate");
  }
  record.fs = static_cast<int>(std::lround(*fs_value));
  record.n_samples = static_cast<std::size_t>(*n_samples);

  if (lines.size() < 1 + static_cast<std::size_t>(*n_sig)) {
    throw Error(ErrorKind::CorruptRecord, header_path.string() + ": fewer signal lines than n_sig");
  }
  std::vector<SignalSpec> specs;
  for (long long s = 0; s < *n_sig; ++s) {
    specs.push_back(parse_signal_line(lines[1 + s], static_cast<std::size_t>(s)));
    record.leads.push_back(parse_lead(specs.back().label));
  }
  for (const auto& spec : specs) {
    if (spec.file != specs.front().file) {
      throw Error(ErrorKind::UnsupportedFormat,
                  header_path.string() + ": signals split across several data files");
    }
  }

  const fs::path data_path = header_path.parent_path() / specs.front().file;
  auto data = open_or_throw(data_path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());
  const std::size_t n_leads = specs.size();
  const std::size_t expected = n_leads * record.n_samples * 2;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::CorruptRecord,
                data_path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  record.samples.resize(n_leads * record.n_samples);
  for (std::size_t t = 0; t < record.n_samples; ++t) {
    for (std::size_t s = 0; s < n_leads; ++s) {
      const std::size_t off = 2 * (t * n_leads + s);
      const auto lo = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[off]));
      const auto hi = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[off + 1]));
      const auto stored = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      record.samples[s * record.n_samples + t] = (stored - specs[s].baseline) / specs[s].gain;
    }
  }
  record.validate();
  return record;
}

fs::path write_wfdb_record(const EcgRecord& record, const fs::path& dir,
                           const WfdbWriteOptions& options) {
  record.validate();
  fs::create_directories(dir);
  const std::size_t n_leads = record.n_leads();
  std::vector<std::int16_t> stored(n_leads * record.n_samples);
  for (std::size_t s = 0; s < n_leads; ++s) {
    for (std::size_t t = 0; t < record.n_samples; ++t) {
      double q = std::round(record.samples[s * record.n_samples + t] * options.gain) + options.baseline;
      q = std::clamp(q, -32767.0, 32767.0);  // -32768 is WFDB's invalid-sample marker
      stored[t * n_leads + s] = static_cast<std::int16_t>(q);
    }
  }
  const std::string dat_name = record.record_id + ".dat";
  {
    std::ofstream out(dir / dat_name, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / dat_name).string());
    std::vector<char> bytes(stored.size() * 2);
    for (std::size_t i = 0; i < stored.size(); ++i) {
      const auto u = static_cast<std::uint16_t>(stored[i]);
      bytes[2 * i] = static_cast<char>(u & 0xFF);
      bytes[2 * i + 1] = static_cast<char>(u >> 8);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  const fs::path header = dir / (record.record_id + ".hea");
  std::ofstream out(header);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + header.string());
  out << record.record_id << ' ' << n_leads << ' ' << record.fs << ' ' << record.n_samples << '\n';
  for (std::size_t s = 0; s < n_leads; ++s) {
    std::int16_t checksum = 0;
    for (std::size_t t = 0; t < record.n_samples; ++t) {
      checksum = static_cast<std::int16_t>(static_cast<std::uint16_t>(checksum) +
                                           static_cast<std::uint16_t>(stored[t * n_leads + s]));
    }
    const int init = record.n_samples > 0 ? stored[s] : 0;
    out << dat_name << " 16 " << format_real(options.gain) << '(' << options.baseline
        << ")/mV 16 0 " << init << ' ' << checksum << " 0 " << lead_name(record.leads[s]) << '\n';
  }
  return header;
}

DatasetManifest read_manifest(const fs::path& path) {
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": empty manifest");
  const auto header = split_csv_line(strip_bom(line));
  auto find = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw Error(ErrorKind::ParseError, path.string() + ": missing column '" + std::string(name) + "'");
  };
  const std::size_t id_col = find("ecg_id");
  const std::size_t path_col = find("path");
  const std::size_t fold_col = find("strat_fold");
  DatasetManifest manifest;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_bom(line);
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::size_t need = std::max({id_col, path_col, fold_col}) + 1;
    if (cells.size() < need) {
      throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(line_no) + " is short");
    }
    ManifestEntry e;
    e.record_id = std::string(trim(cells[id_col]));
    fs::path p = std::string(trim(cells[path_col]));
    e.signal_path = p.is_relative() ? path.parent_path() / p : p;
    auto fold = parse_int(cells[fold_col]);
    if (!fold || *fold < 1 || *fold > 10) {
      throw Error(ErrorKind::ParseError,
                  path.string() + ": row " + std::to_string(line_no) + " has invalid fold");
    }
    e.fold = static_cast<int>(*fold);
    if (!seen.insert(e.record_id).second) {
      throw Error(ErrorKind::DuplicateId, path.string() + ": duplicate record id '" + e.record_id + "'");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "ecg_id,path,strat_fold\n";
  for (const auto& e : manifest.entries) {
    out << e.record_id << ',' << e.signal_path.generic_string() << ',' << e.fold << '\n';
  }
}

std::vector<std::string> select_split(const DatasetManifest& manifest, Split which) {
  const auto& rule = manifest.split_rule;
  std::vector<std::string> out;
  for (const auto& e : manifest.entries) {
    Split s = Split::Train;
    if (e.fold == rule.test_fold) {
      s = Split::Test;
    } else if (e.fold == rule.val_fold) {
      s = Split::Val;
    }
    if (s == which) out.push_back(e.record_id);
  }
  return out;
}

}  // namespace ecgx
