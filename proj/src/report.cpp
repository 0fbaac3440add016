#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ecgx/error.hpp"
#include "ecgx/evaluation.hpp"

namespace ecgx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDigits = 6;

std::string real6(double v) { return format_real(v, kDigits); }
std::string real6(const std::optional<double>& v) { return v ? real6(*v) : std::string(); }
double round6(double v) { return std::stod(real6(v)); }

std::optional<double> parse_opt(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  try {
    return std::stod(cell);
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "report: cannot parse '" + cell + "'");
  }
}

std::size_t parse_count(const std::string& cell) {
  try {
    return static_cast<std::size_t>(std::stoull(cell));
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "report: cannot parse count '" + cell + "'");
  }
}

void write_provenance(std::ostream& out, const EvalReport& r) {
  for (const auto& [k, v] : r.metadata) out << "# " << k << '=' << v << '\n';
  for (const auto& [k, v] : r.timings) out << "# timing." << k << '=' << real6(v) << '\n';
}

// Reads "# key=value" lines into the report and returns the remaining rows.
std::vector<std::vector<std::string>> read_csv_body(const fs::path& path, EvalReport* provenance) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      if (!provenance) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key.rfind("timing.", 0) == 0) {
        provenance->timings[key.substr(7)] = *parse_opt(value);
      } else {
        provenance->metadata[key] = value;
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

json provenance_json(const EvalReport& r) {
  json timings = json::object();
  for (const auto& [k, v] : r.timings) timings[k] = round6(v);
  return {{"metadata", r.metadata}, {"timings", timings}};
}

json opt_json(const std::optional<double>& v) { return v ? json(round6(*v)) : json(nullptr); }

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

bool EvalReport::operator==(const EvalReport& o) const {
  if (timings != o.timings || metadata != o.metadata) return false;
  if (global.size() != o.global.size() || lead_specific.size() != o.lead_specific.size()) return false;
  for (std::size_t i = 0; i < global.size(); ++i) {
    const auto& a = global[i];
    const auto& b = o.global[i];
    if (a.feature != b.feature || a.pcc != b.pcc || a.n_pairs != b.n_pairs) return false;
  }
  for (std::size_t i = 0; i < lead_specific.size(); ++i) {
    const auto& a = lead_specific[i];
    const auto& b = o.lead_specific[i];
    if (a.feature != b.feature || a.per_lead_pcc != b.per_lead_pcc ||
        a.per_lead_pairs != b.per_lead_pairs || a.n_pairs != b.n_pairs ||
        a.stats.has_value() != b.stats.has_value()) {
      return false;
    }
    if (a.stats && (a.stats->mean != b.stats->mean || a.stats->variance != b.stats->variance ||
                    a.stats->best_lead != b.stats->best_lead)) {
      return false;
    }
  }
  return true;
}

std::vector<fs::path> emit_report(const EvalReport& report, ReportFormat format, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  if (format == ReportFormat::Json) {
    json j;
    j["provenance"] = provenance_json(report);
    j["global"] = json::array();
    for (const auto& g : report.global) {
      j["global"].push_back({{"feature", g.feature}, {"pcc", opt_json(g.pcc)}, {"n_pairs", g.n_pairs}});
    }
    j["lead_specific"] = json::array();
    for (const auto& l : report.lead_specific) {
      json per_lead = json::array();
      std::map<LeadId, bool> leads;
      for (const auto& [lead, v] : l.per_lead_pcc) leads[lead] = true;
      for (const auto& [lead, n] : l.per_lead_pairs) leads[lead] = true;
      for (const auto& [lead, _] : leads) {
        auto p = l.per_lead_pcc.find(lead);
        auto n = l.per_lead_pairs.find(lead);
        per_lead.push_back({{"lead", lead_name(lead)},
                            {"pcc", p == l.per_lead_pcc.end() ? json(nullptr) : json(round6(p->second))},
                            {"n_pairs", n == l.per_lead_pairs.end() ? 0 : n->second}});
      }
      j["lead_specific"].push_back(
          {{"feature", l.feature},
           {"pcc", l.stats ? json(round6(l.stats->mean)) : json(nullptr)},
           {"variance", l.stats ? json(round6(l.stats->variance)) : json(nullptr)},
           {"best_lead", l.stats ? json(std::string(lead_name(l.stats->best_lead))) : json(nullptr)},
           {"n_pairs", l.n_pairs},
           {"per_lead", per_lead}});
    }
    const fs::path path = dir / "report.json";
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    written.push_back(path);
    return written;
  }

  {
    const fs::path path = dir / "global.csv";
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    write_provenance(out, report);
    out << "feature,pcc,n_pairs\n";
    for (const auto& g : report.global) {
      out << g.feature << ',' << real6(g.pcc) << ',' << g.n_pairs << '\n';
    }
    written.push_back(path);
  }
  if (report.lead_specific.empty()) return written;
  {
    const fs::path path = dir / "lead.csv";
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    write_provenance(out, report);
    out << "feature,pcc,variance,best_lead,n_pairs\n";
    for (const auto& l : report.lead_specific) {
      out << l.feature << ',';
      if (l.stats) {
        out << real6(l.stats->mean) << ',' << real6(l.stats->variance) << ','
            << lead_name(l.stats->best_lead);
      } else {
        out << ",,";
      }
      out << ',' << l.n_pairs << '\n';
    }
    written.push_back(path);
  }
  {
    const fs::path path = dir / "lead_detail.csv";
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    write_provenance(out, report);
    out << "feature,lead,pcc,n_pairs\n";
    for (const auto& l : report.lead_specific) {
      std::map<LeadId, bool> leads;
      for (const auto& [lead, v] : l.per_lead_pcc) leads[lead] = true;
      for (const auto& [lead, n] : l.per_lead_pairs) leads[lead] = true;
      for (const auto& [lead, _] : leads) {
        auto p = l.per_lead_pcc.find(lead);
        auto n = l.per_lead_pairs.find(lead);
        out << l.feature << ',' << lead_name(lead) << ','
            << (p == l.per_lead_pcc.end() ? std::string() : real6(p->second)) << ','
            << (n == l.per_lead_pairs.end() ? 0 : n->second) << '\n';
      }
    }
    written.push_back(path);
  }
  return written;
}

EvalReport parse_report(const fs::path& dir, ReportFormat format) {
  EvalReport r;
  if (format == ReportFormat::Json) {
    std::ifstream in(dir / "report.json");
    if (!in) throw Error(ErrorKind::Io, "cannot open " + (dir / "report.json").string());
    json j;
    try {
      j = json::parse(in);
      r.metadata = j.at("provenance").at("metadata").get<std::map<std::string, std::string>>();
      r.timings = j.at("provenance").at("timings").get<std::map<std::string, double>>();
      for (const auto& g : j.at("global")) {
        r.global.push_back({g.at("feature").get<std::string>(), opt_from_json(g.at("pcc")),
                            g.at("n_pairs").get<std::size_t>()});
      }
      for (const auto& l : j.at("lead_specific")) {
        LeadFeatureResult lr;
        lr.feature = l.at("feature").get<std::string>();
        lr.n_pairs = l.at("n_pairs").get<std::size_t>();
        if (!l.at("pcc").is_null()) {
          lr.stats = LeadStats{l.at("pcc").get<double>(), l.at("variance").get<double>(),
                               parse_lead(l.at("best_lead").get<std::string>())};
        }
        for (const auto& p : l.at("per_lead")) {
          const LeadId lead = parse_lead(p.at("lead").get<std::string>());
          if (!p.at("pcc").is_null()) lr.per_lead_pcc[lead] = p.at("pcc").get<double>();
          lr.per_lead_pairs[lead] = p.at("n_pairs").get<std::size_t>();
        }
        r.lead_specific.push_back(std::move(lr));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("report.json: ") + e.what());
    }
    return r;
  }

  for (const auto& row : read_csv_body(dir / "global.csv", &r)) {
    if (row.size() != 3) throw Error(ErrorKind::ParseError, "global.csv: expected 3 columns");
    r.global.push_back({row[0], parse_opt(row[1]), parse_count(row[2])});
  }
  if (!fs::exists(dir / "lead.csv")) return r;
  std::map<std::string, std::size_t> index;
  for (const auto& row : read_csv_body(dir / "lead.csv", nullptr)) {
    if (row.size() != 5) throw Error(ErrorKind::ParseError, "lead.csv: expected 5 columns");
    LeadFeatureResult lr;
    lr.feature = row[0];
    if (!row[1].empty()) lr.stats = LeadStats{*parse_opt(row[1]), *parse_opt(row[2]), parse_lead(row[3])};
    lr.n_pairs = parse_count(row[4]);
    index[lr.feature] = r.lead_specific.size();
    r.lead_specific.push_back(std::move(lr));
  }
  if (fs::exists(dir / "lead_detail.csv")) {
    for (const auto& row : read_csv_body(dir / "lead_detail.csv", nullptr)) {
      if (row.size() != 4) throw Error(ErrorKind::ParseError, "lead_detail.csv: expected 4 columns");
      auto it = index.find(row[0]);
      if (it == index.end()) {
        throw Error(ErrorKind::ParseError, "lead_detail.csv: unknown feature " + row[0]);
      }
      auto& lr = r.lead_specific[it->second];
      const LeadId lead = parse_lead(row[1]);
      if (auto v = parse_opt(row[2])) lr.per_lead_pcc[lead] = *v;
      lr.per_lead_pairs[lead] = parse_count(row[3]);
    }
  }
  return r;
}

void write_comparison_csv(const ComparisonReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "feature,pcc_ours,pcc_external,winner\n";
  for (const auto& row : report.rows) {
    out << row.feature << ',' << real6(row.pcc_ours) << ',' << real6(row.pcc_external) << ','
        << winner_name(row.winner) << '\n';
  }
}

}  // namespace ecgx
