#include "stbn/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Cholesky>

#include "stbn/error.hpp"

namespace stbn {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

MixtureRegressor::MixtureRegressor(const GmmModel& model) {
  const Eigen::Index D = model.dim();
  if (D < 2) throw Error(ErrorCode::DimensionMismatch, "conditional mean needs a model of dimension >= 2");
  input_dim_ = D - 1;
  const auto& s = model.standardizer();
  in_mean_ = s.mean.head(input_dim_);
  in_std_ = s.std.head(input_dim_);
  out_mean_ = s.mean(D - 1);
  out_std_ = s.std(D - 1);

  for (std::size_t j = 0; j < model.size(); ++j) {
    const auto& c = model.components()[j];
    const Eigen::MatrixXd cov_xx = c.covariance.topLeftCorner(input_dim_, input_dim_);
    const Eigen::VectorXd cov_xy = c.covariance.topRightCorner(input_dim_, 1);
    Eigen::LLT<Eigen::MatrixXd> llt(cov_xx);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularBlock, "input covariance block of component " + std::to_string(j));
    }
    Eigen::MatrixXd L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    if (!std::isfinite(log_det)) {
      throw Error(ErrorCode::SingularBlock, "input covariance block of component " + std::to_string(j));
    }
    blocks_.push_back(Block{std::log(c.weight), c.mean.head(input_dim_), c.mean(D - 1), std::move(L), log_det,
                            llt.solve(cov_xy)});
  }
}

Eigen::VectorXd MixtureRegressor::standardize_input(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(input_dim_) + " inputs, got " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "conditional mean input is not finite");
  return (x - in_mean_).cwiseQuotient(in_std_);
}

std::vector<double> MixtureRegressor::log_terms(const Eigen::VectorXd& zx) const {
  std::vector<double> terms;
  terms.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    const Eigen::VectorXd u = b.chol_xx.triangularView<Eigen::Lower>().solve(zx - b.mean_x);
    terms.push_back(b.log_weight - 0.5 * (static_cast<double>(input_dim_) * kLog2Pi + b.log_det_xx + u.squaredNorm()));
  }
  return terms;
}

std::vector<double> MixtureRegressor::responsibilities(const Eigen::VectorXd& x) const {
  auto w = log_terms(standardize_input(x));
  const double mx = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (auto& v : w) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

double MixtureRegressor::predict(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd zx = standardize_input(x);
  auto w = log_terms(zx);
  const double mx = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const auto& b = blocks_[j];
    const double wj = std::exp(w[j] - mx);
    total += wj;
    acc += wj * (b.mean_y + b.beta.dot(zx - b.mean_x));
  }
  return (acc / total) * out_std_ + out_mean_;
}

double conditional_mean(const GmmModel& model, const Eigen::VectorXd& x) { return MixtureRegressor(model).predict(x); }

StbnPredictor::StbnPredictor(CauseNodeSet cause_nodes, GmmModel model)
    : cause_nodes_(std::move(cause_nodes)), model_(std::move(model)), regressor_(model_) {
  if (cause_nodes_.variables.empty()) throw Error(ErrorCode::BadModel, "predictor has no cause nodes");
  if (model_.dim() != static_cast<Eigen::Index>(cause_nodes_.size()) + 1) {
    throw Error(ErrorCode::DimensionMismatch, "model dimension must equal cause-node count + 1");
  }
}

namespace {

std::vector<LaggedVariable> own_lags(const std::string& target, int order) {
  std::vector<LaggedVariable> v;
  for (int lag = 1; lag <= order; ++lag) v.push_back({target, lag});
  return v;
}

double forecast_from(const MixtureRegressor& reg, std::span<const LaggedVariable> inputs, const FlowPanel& panel,
                     std::int64_t t) {
  const std::int64_t first = panel.origin_index();
  const std::int64_t end = first + static_cast<std::int64_t>(panel.rows());
  Eigen::VectorXd x(static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto col = panel.site_index(inputs[i].site_id);
    const std::int64_t at = t - inputs[i].lag;
    if (at < first || at >= end) {
      throw Error(ErrorCode::InsufficientHistory, "forecast at t=" + std::to_string(t) + " needs " +
                                                      to_string(inputs[i]) + " at step " + std::to_string(at) +
                                                      ", panel covers [" + std::to_string(first) + ", " +
                                                      std::to_string(end) + ")");
    }
    x(static_cast<Eigen::Index>(i)) = panel.at(static_cast<std::size_t>(at - first), col);
  }
  return std::max(0.0, reg.predict(x));
}

}  // namespace

MarkovChainPredictor::MarkovChainPredictor(std::string target_site, int order, GmmModel model)
    : target_site_(std::move(target_site)),
      order_(order),
      model_(std::move(model)),
      inputs_(own_lags(target_site_, order)),
      regressor_(model_) {
  if (order_ < 1) throw Error(ErrorCode::InvalidConfig, "Markov chain order must be >= 1");
  if (model_.dim() != order_ + 1) throw Error(ErrorCode::DimensionMismatch, "model dimension must equal order + 1");
}

StbnPredictor train_stbn(const FlowPanel& train, std::string_view target, const LagConfig& lag_cfg,
                         const FitConfig& fit_cfg, FitReport* report) {
  const auto ranking = rank_lagged_variables(train, target, lag_cfg);
  auto nodes = select_cause_nodes(ranking, target, lag_cfg.k);
  const auto rows = build_training_rows(train, target, nodes.variables);
  auto fit = fit_gmm(rows, fit_cfg);
  if (report != nullptr) *report = std::move(fit.report);
  return StbnPredictor(std::move(nodes), std::move(fit.model));
}

MarkovChainPredictor train_markov_chain(const FlowPanel& train, std::string_view target, int order,
                                        const FitConfig& fit_cfg, FitReport* report) {
  if (order < 1) throw Error(ErrorCode::InvalidConfig, "Markov chain order must be >= 1");
  train.site_index(target);
  if (train.rows() <= static_cast<std::size_t>(order) + 1) {
    throw Error(ErrorCode::PanelTooShort, "Markov chain of order " + std::to_string(order) + " needs more than " +
                                              std::to_string(order + 1) + " rows");
  }
  const auto inputs = own_lags(std::string(target), order);
  const auto rows = build_training_rows(train, target, inputs);
  auto fit = fit_gmm(rows, fit_cfg);
  if (report != nullptr) *report = std::move(fit.report);
  return MarkovChainPredictor(std::string(target), order, std::move(fit.model));
}

double forecast_stbn(const StbnPredictor& p, const FlowPanel& panel, std::int64_t t) {
  return forecast_from(p.regressor(), p.inputs(), panel, t);
}

double forecast_markov_chain(const MarkovChainPredictor& p, const FlowPanel& panel, std::int64_t t) {
  return forecast_from(p.regressor(), p.inputs(), panel, t);
}

double forecast(const AnyPredictor& p, const FlowPanel& panel, std::int64_t t) {
  return std::visit([&](const auto& pred) { return forecast_from(pred.regressor(), pred.inputs(), panel, t); }, p);
}

double random_walk_forecast(std::span<const double> series, std::size_t t) {
  if (t < 1 || t > series.size()) {
    throw Error(ErrorCode::OutOfRange,
                "random walk needs 1 <= t <= " + std::to_string(series.size()) + ", got " + std::to_string(t));
  }
  return series[t - 1];
}

nlohmann::json predictor_to_json(const AnyPredictor& p) {
  nlohmann::json doc;
  if (const auto* s = std::get_if<StbnPredictor>(&p)) {
    doc["kind"] = "stbn";
    doc["target_site"] = s->target_site();
    auto nodes = nlohmann::json::array();
    const auto& cn = s->cause_nodes();
    for (std::size_t i = 0; i < cn.size(); ++i) {
      nodes.push_back({{"site", cn.variables[i].site_id}, {"lag", cn.variables[i].lag}, {"score", cn.scores[i]}});
    }
    doc["cause_nodes"] = std::move(nodes);
    doc["model"] = gmm_to_json(s->model());
  } else {
    const auto& mc = std::get<MarkovChainPredictor>(p);
    doc["kind"] = "markov_chain";
    doc["target_site"] = mc.target_site();
    doc["order"] = mc.order();
    doc["model"] = gmm_to_json(mc.model());
  }
  return doc;
}

AnyPredictor predictor_from_json(const nlohmann::json& doc) {
  try {
    const auto kind = doc.at("kind").get<std::string>();
    const auto target = doc.at("target_site").get<std::string>();
    if (kind == "stbn") {
      CauseNodeSet cn;
      cn.target_site = target;
      for (const auto& n : doc.at("cause_nodes")) {
        cn.variables.push_back({n.at("site").get<std::string>(), n.at("lag").get<int>()});
        cn.scores.push_back(n.at("score").get<double>());
      }
      return StbnPredictor(std::move(cn), gmm_from_json(doc.at("model")));
    }
    if (kind == "markov_chain") {
      return MarkovChainPredictor(target, doc.at("order").get<int>(), gmm_from_json(doc.at("model")));
    }
    throw Error(ErrorCode::BadModel, "unknown predictor kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadModel, e.what());
  }
}

void save_predictor(const AnyPredictor& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << predictor_to_json(p).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

AnyPredictor load_predictor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadModel, e.what());
  }
  return predictor_from_json(doc);
}

}  // namespace stbn
