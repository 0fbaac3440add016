#include <fstream>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "ecgx/error.hpp"
#include "ecgx/trainer.hpp"
#include "trainer_detail.hpp"

namespace ecgx {

using namespace detail;

std::vector<double> baseline_inputs(const EcgRecord& r, std::size_t decimation) {
  if (decimation == 0) throw Error(ErrorKind::ConfigError, "decimation must be positive");
  const std::size_t blocks = r.n_samples / decimation;
  std::vector<double> out;
  out.reserve(r.n_leads() * blocks);
  for (std::size_t l = 0; l < r.n_leads(); ++l) {
    const auto lead = r.lead(l);
    for (std::size_t b = 0; b < blocks; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < decimation; ++k) s += lead[b * decimation + k];
      out.push_back(s / static_cast<double>(decimation));
    }
  }
  return out;
}

namespace {

Matrix design_matrix(const std::vector<EcgRecord>& processed, std::size_t decimation) {
  Matrix x;
  for (std::size_t i = 0; i < processed.size(); ++i) {
    const auto row = baseline_inputs(processed[i], decimation);
    if (i == 0) x.resize(static_cast<Eigen::Index>(processed.size()), static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != x.cols()) {
      throw Error(ErrorKind::ShapeError, "record " + processed[i].record_id + " has a different length");
    }
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), x.cols());
  }
  return x;
}

// Centred ridge; the intercept is not penalised. Uses the n x n dual system
// when there are more inputs than rows.
std::pair<Eigen::VectorXd, double> ridge(const Matrix& x, const Eigen::VectorXd& y, double lambda) {
  const Eigen::RowVectorXd mean_x = x.colwise().mean();
  const double mean_y = y.mean();
  const Matrix xc = x.rowwise() - mean_x;
  const Eigen::VectorXd yc = y.array() - mean_y;
  Eigen::VectorXd w;
  if (xc.cols() > xc.rows()) {
    Matrix gram = xc * xc.transpose();
    gram.diagonal().array() += lambda;
    w = xc.transpose() * gram.ldlt().solve(yc);
  } else {
    Matrix gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(xc.transpose() * yc);
  }
  if (!w.allFinite()) throw Error(ErrorKind::NumericFailure, "ridge solve produced non-finite weights");
  return {w, mean_y - mean_x.dot(w)};
}

FeatureTable apply(const LinearBaseline& m, const std::vector<std::string>& ids,
                   const std::vector<EcgRecord>& processed) {
  Matrix pred(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(m.scaler.size()));
  if (!ids.empty()) {
    const Matrix x = design_matrix(processed, m.decimation);
    if (static_cast<std::size_t>(x.cols()) != m.n_inputs) {
      throw Error(ErrorKind::ShapeError, "baseline was fitted on " + std::to_string(m.n_inputs) +
                                             " inputs, got " + std::to_string(x.cols()));
    }
    const Eigen::Map<const Matrix> w(m.weights.data(), static_cast<Eigen::Index>(m.scaler.size()),
                                     static_cast<Eigen::Index>(m.n_inputs));
    pred = x * w.transpose();
    for (Eigen::Index j = 0; j < pred.cols(); ++j) pred.col(j).array() += m.intercept[static_cast<std::size_t>(j)];
  }
  return unscaled_table(ids, pred, m.scaler);
}

}  // namespace

LinearBaseline linear_baseline(const DatasetManifest& manifest, const RecordLoader& loader,
                               const FeatureTable& truth, const TrainConfig& config_in, double lambda,
                               std::size_t decimation) {
  TrainConfig config = config_in;
  config.model.n_outputs = config.target_features.size();
  config.validate();
  if (!(lambda > 0.0)) throw Error(ErrorKind::ConfigError, "ridge lambda must be positive");
  const auto cols = target_columns(truth, config.target_features);
  const auto ids = usable_ids(select_split(manifest, Split::Train), truth, cols);
  if (ids.empty()) throw Error(ErrorKind::EmptyDataset, "no training record has a value for any target");

  LinearBaseline m;
  m.config = config;
  m.lambda = lambda;
  m.decimation = decimation;
  m.scaler = fit_scaler(truth, config.target_features, ids);

  std::vector<EcgRecord> processed;
  processed.reserve(ids.size());
  for (const auto& id : ids) processed.push_back(preprocess_record(loader(id), config));
  const Matrix x = design_matrix(processed, decimation);
  m.n_inputs = static_cast<std::size_t>(x.cols());
  m.weights.assign(cols.size() * m.n_inputs, 0.0);
  m.intercept.assign(cols.size(), 0.0);

  for (std::size_t j = 0; j < cols.size(); ++j) {
    std::vector<Eigen::Index> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& v = truth.rows.at(ids[i])[cols[j]];
      if (!v) continue;
      rows.push_back(static_cast<Eigen::Index>(i));
      y.push_back(m.scaler.scale(j, *v));
    }
    const Matrix xs = x(rows, Eigen::all);
    const auto [w, b] = ridge(xs, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), lambda);
    std::copy(w.data(), w.data() + w.size(), m.weights.begin() + static_cast<std::ptrdiff_t>(j * m.n_inputs));
    m.intercept[j] = b;
  }
  return m;
}

void save_baseline(const LinearBaseline& m, const std::filesystem::path& path) {
  std::vector<double> mins, maxs;
  for (std::size_t i = 0; i < m.scaler.size(); ++i) {
    mins.push_back(m.scaler.min(i));
    maxs.push_back(m.scaler.max(i));
  }
  const nlohmann::json j = {{"kind", "linear_baseline"},
                            {"train_config", to_json(m.config)},
                            {"scaler", {{"features", m.scaler.features()}, {"mins", mins}, {"maxs", maxs}}},
                            {"decimation", m.decimation},
                            {"lambda", m.lambda},
                            {"n_inputs", m.n_inputs},
                            {"weights", m.weights},
                            {"intercept", m.intercept}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump() << '\n';
}

LinearBaseline load_baseline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    LinearBaseline m;
    m.config = train_config_from_json(j.at("train_config"));
    const auto& s = j.at("scaler");
    m.scaler = MinMaxScaler(s.at("features").get<std::vector<std::string>>(),
                            s.at("mins").get<std::vector<double>>(), s.at("maxs").get<std::vector<double>>());
    m.decimation = j.at("decimation").get<std::size_t>();
    m.lambda = j.at("lambda").get<double>();
    m.n_inputs = j.at("n_inputs").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<std::vector<double>>();
    if (m.weights.size() != m.n_inputs * m.scaler.size() || m.intercept.size() != m.scaler.size()) {
      throw Error(ErrorKind::ParseError, path.string() + ": weight shape does not match");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

FeatureTable predict(const LinearBaseline& model, const std::vector<EcgRecord>& records) {
  std::vector<std::string> ids;
  std::vector<EcgRecord> processed;
  for (const auto& r : records) {
    ids.push_back(r.record_id);
    processed.push_back(preprocess_record(r, model.config));
  }
  return apply(model, ids, processed);
}

FeatureTable predict(const LinearBaseline& model, const RecordLoader& loader,
                     const std::vector<std::string>& record_ids) {
  std::vector<EcgRecord> processed;
  for (const auto& id : record_ids) processed.push_back(preprocess_record(loader(id), model.config));
  return apply(model, record_ids, processed);
}

}  // namespace ecgx
