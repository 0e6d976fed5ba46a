#ifndef PCRISK_ML_MODELS_HPP
#define PCRISK_ML_MODELS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/cart.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/matrix.hpp"
#include "pcrisk/ml/optimize.hpp"

namespace pcrisk::ml {

enum class ClassifierKind {
  DecisionTree,
  RandomForest,
  AdaBoost,
  LogisticRegression,
  LinearSVM,
  GaussianNB,
  MLP,
  DeepNN,
};

inline constexpr std::array<ClassifierKind, 8> kAllKinds = {
    ClassifierKind::DecisionTree,       ClassifierKind::RandomForest, ClassifierKind::AdaBoost,
    ClassifierKind::LogisticRegression, ClassifierKind::LinearSVM,    ClassifierKind::GaussianNB,
    ClassifierKind::MLP,                ClassifierKind::DeepNN,
};

inline std::string_view kind_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::DecisionTree: return "DecisionTree";
    case ClassifierKind::RandomForest: return "RandomForest";
    case ClassifierKind::AdaBoost: return "AdaBoost";
    case ClassifierKind::LogisticRegression: return "LogisticRegression";
    case ClassifierKind::LinearSVM: return "LinearSVM";
    case ClassifierKind::GaussianNB: return "GaussianNB";
    case ClassifierKind::MLP: return "MLP";
    case ClassifierKind::DeepNN: return "DeepNN";
  }
  return "?";
}

inline ClassifierKind parse_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  throw Error(Errc::config, fmt::format("unknown classifier '{}'", name));
}

inline nlohmann::json default_hyperparams(ClassifierKind k) {
  using nlohmann::json;
  switch (k) {
    case ClassifierKind::DecisionTree:
      return {{"max_depth", 5}, {"min_leaf", 1}, {"min_split", 2}, {"max_features", 0},
              {"class_weight", "none"}};
    case ClassifierKind::RandomForest:
      return {{"n_trees", 100}, {"max_depth", 8},     {"min_leaf", 1},
              {"min_split", 2}, {"max_features", -1}, {"bootstrap", true},
              {"class_weight", "none"}};
    case ClassifierKind::AdaBoost:
      return {{"n_estimators", 50}};
    case ClassifierKind::LogisticRegression:
      return {{"l2", 1e-3}, {"max_iter", 1000}, {"tol", 1e-6}, {"class_weight", "none"}};
    case ClassifierKind::LinearSVM:
      return {{"lambda", 1e-3}, {"epochs", 50}, {"class_weight", "none"}};
    case ClassifierKind::GaussianNB:
      return {{"var_smoothing", 1e-9}};
    case ClassifierKind::MLP:
      return {{"hidden", json::array({32})}, {"l2", 1e-4}, {"max_iter", 500}, {"tol", 1e-6},
              {"class_weight", "none"}};
    case ClassifierKind::DeepNN:
      return {{"hidden", json::array({64, 64})}, {"l2", 1e-4}, {"max_iter", 300}, {"tol", 1e-6},
              {"class_weight", "none"}};
  }
  return json::object();
}

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::DecisionTree;
  nlohmann::json hyperparams = nlohmann::json::object();  // overrides on top of the defaults
  std::uint64_t seed = 0;

  [[nodiscard]] std::string name() const { return std::string(kind_name(kind)); }

  /// Defaults merged with overrides; rejects unknown keys and mistyped values.
  [[nodiscard]] nlohmann::json resolved() const {
    auto out = default_hyperparams(kind);
    if (!hyperparams.is_object()) throw Error(Errc::config, "hyperparams must be an object");
    for (const auto& [key, value] : hyperparams.items()) {
      if (!out.contains(key)) {
        throw Error(Errc::config, fmt::format("{} has no hyperparameter '{}'", name(), key));
      }
      const auto& def = out[key];
      const bool same = (def.is_number() && value.is_number()) || def.type() == value.type();
      if (!same) throw Error(Errc::config, fmt::format("{}.{} has the wrong type", name(), key));
      out[key] = value;
    }
    auto positive = [&](const char* key) {
      if (out.contains(key) && !(out[key].get<double>() > 0)) {
        throw Error(Errc::config, fmt::format("{}.{} must be positive", name(), key));
      }
    };
    for (const char* key : {"n_trees", "n_estimators", "max_iter", "epochs", "lambda", "tol", "min_leaf"}) {
      positive(key);
    }
    for (const char* key : {"l2", "var_smoothing", "max_depth"}) {
      if (out.contains(key) && out[key].get<double>() < 0) {
        throw Error(Errc::config, fmt::format("{}.{} must be >= 0", name(), key));
      }
    }
    if (out.contains("class_weight")) {
      auto cw = out["class_weight"].get<std::string>();
      if (cw != "none" && cw != "balanced") {
        throw Error(Errc::config, "class_weight must be 'none' or 'balanced'");
      }
    }
    if (out.contains("hidden")) {
      const auto& h = out["hidden"];
      if (!h.is_array() || h.empty()) throw Error(Errc::config, "hidden must be a non-empty array");
      for (const auto& u : h) {
        if (!u.is_number_integer() || u.get<int>() < 1) throw Error(Errc::config, "hidden sizes must be >= 1");
      }
      if (kind == ClassifierKind::MLP && h.size() != 1) {
        throw Error(Errc::config, "MLP takes exactly one hidden layer; use DeepNN for more");
      }
      if (kind == ClassifierKind::DeepNN && h.size() < 2) {
        throw Error(Errc::config, "DeepNN needs at least two hidden layers");
      }
    }
    return out;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"kind", name()}, {"hyperparams", hyperparams}, {"seed", seed}};
  }

  static ClassifierSpec from_json(const nlohmann::json& j) {
    ClassifierSpec s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.hyperparams = j.value("hyperparams", nlohmann::json::object());
    s.seed = j.value("seed", std::uint64_t{0});
    (void)s.resolved();
    return s;
  }
};

inline std::vector<ClassifierSpec> default_specs(std::uint64_t seed) {
  std::vector<ClassifierSpec> out;
  for (auto k : kAllKinds) out.push_back({k, nlohmann::json::object(), seed});
  return out;
}

// ---------------------------------------------------------------------------
// Building blocks

inline void check_training_data(const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw Error(Errc::insufficient_data, "no training rows");
  if (y.size() != x.rows()) throw Error(Errc::invalid_input, "label count does not match rows");
  check_binary(y);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) {
      if (!std::isfinite(v)) throw Error(Errc::invalid_input, fmt::format("non-finite feature in row {}", i));
    }
  }
}

/// Per-row weights; "balanced" gives each class the same total weight.
inline std::vector<double> class_weights(std::span<const int> y, const std::string& mode) {
  std::vector<double> w(y.size(), 1.0);
  if (mode != "balanced") return w;
  const double n1 = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double n0 = static_cast<double>(y.size()) - n1;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double nc = y[i] == 1 ? n1 : n0;
    w[i] = nc > 0 ? n / (2 * nc) : 1.0;
  }
  return w;
}

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 for constant columns

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean.assign(x.cols(), 0.0);
    s.scale.assign(x.cols(), 0.0);
    const double n = static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += x(i, j);
    }
    for (auto& m : s.mean) m /= n;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) s.scale[j] += (x(i, j) - s.mean[j]) * (x(i, j) - s.mean[j]);
    }
    for (auto& v : s.scale) {
      v = std::sqrt(v / n);
      if (!(v > 1e-12)) v = 1.0;
    }
    return s;
  }

  void apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
  }

  [[nodiscard]] Matrix transform(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) apply(x.row(i), out.row(i));
    return out;
  }

  [[nodiscard]] nlohmann::json to_json() const { return {{"mean", mean}, {"scale", scale}}; }
  static Standardizer from_json(const nlohmann::json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
  }
};

// ---------------------------------------------------------------------------
// Logistic regression

/// Weighted mean logistic loss plus (l2/2)|w|^2; params = [w..., bias].
inline double logistic_loss(const std::vector<double>& params, const Matrix& x, std::span<const int> y,
                            std::span<const double> w, double l2, std::vector<double>* grad) {
  const std::size_t d = x.cols();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double loss = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    double z = params[d];
    for (std::size_t j = 0; j < d; ++j) z += params[j] * row[j];
    loss += w[i] * (softplus(z) - y[i] * z);
    if (grad) {
      const double g = w[i] * (sigmoid(z) - y[i]) / total;
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += g * row[j];
      (*grad)[d] += g;
    }
  }
  loss /= total;
  for (std::size_t j = 0; j < d; ++j) {
    loss += 0.5 * l2 * params[j] * params[j];
    if (grad) (*grad)[j] += l2 * params[j];
  }
  return loss;
}

struct LogisticModel {
  Standardizer scaler;
  std::vector<double> weights;
  double bias = 0;
  std::vector<double> losses;  // training trace, not serialized

  static LogisticModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp) {
    LogisticModel m;
    m.scaler = Standardizer::fit(x);
    const Matrix xs = m.scaler.transform(x);
    const auto w = class_weights(y, hp.at("class_weight").get<std::string>());
    const double l2 = hp.at("l2").get<double>();
    Objective f = [&](const std::vector<double>& p, std::vector<double>* g) {
      return logistic_loss(p, xs, y, w, l2, g);
    };
    auto res = gradient_descent(f, std::vector<double>(x.cols() + 1, 0.0),
                                {hp.at("max_iter").get<std::size_t>(), hp.at("tol").get<double>()});
    m.bias = res.params.back();
    res.params.pop_back();
    m.weights = std::move(res.params);
    m.losses = std::move(res.losses);
    return m;
  }

  [[nodiscard]] double margin(std::span<const double> x) const {
    double z = bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * (x[j] - scaler.mean[j]) / scaler.scale[j];
    return z;
  }
  [[nodiscard]] double proba(std::span<const double> x) const { return sigmoid(margin(x)); }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"scaler", scaler.to_json()}, {"weights", weights}, {"bias", bias}};
  }
  static LogisticModel from_json(const nlohmann::json& j) {
    LogisticModel m;
    m.scaler = Standardizer::from_json(j.at("scaler"));
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    return m;
  }
};

// ---------------------------------------------------------------------------
// Linear SVM

/// Hinge loss with L2 penalty, trained by averaged Pegasos stochastic
/// subgradient steps on standardized features with an appended bias column.
struct LinearSvmModel {
  Standardizer scaler;
  std::vector<double> weights;
  double bias = 0;

  static LinearSvmModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp,
                              std::uint64_t seed) {
    LinearSvmModel m;
    m.scaler = Standardizer::fit(x);
    const Matrix xs = m.scaler.transform(x);
    const auto sw = class_weights(y, hp.at("class_weight").get<std::string>());
    const double lambda = hp.at("lambda").get<double>();
    const auto epochs = hp.at("epochs").get<std::size_t>();
    const std::size_t d = x.cols();
    std::vector<double> w(d + 1, 0.0), avg(d + 1, 0.0);
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    const double radius = 1 / std::sqrt(lambda);
    std::size_t t = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (auto i : order) {
        ++t;
        const double eta = 1 / (lambda * static_cast<double>(t));
        const double yi = y[i] == 1 ? 1.0 : -1.0;
        auto row = xs.row(i);
        double z = w[d];
        for (std::size_t j = 0; j < d; ++j) z += w[j] * row[j];
        const double shrink = 1 - eta * lambda;
        for (auto& v : w) v *= shrink;
        if (yi * z < 1) {
          const double s = eta * yi * sw[i];
          for (std::size_t j = 0; j < d; ++j) w[j] += s * row[j];
          w[d] += s;
        }
        double norm = 0;
        for (double v : w) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > radius) {
          for (auto& v : w) v *= radius / norm;
        }
        const double k = 1 / static_cast<double>(t);
        for (std::size_t j = 0; j <= d; ++j) avg[j] += (w[j] - avg[j]) * k;
      }
    }
    for (double v : avg) {
      if (!std::isfinite(v)) throw NonConvergenceError("svm weights diverged", v);
    }
    m.bias = avg[d];
    avg.pop_back();
    m.weights = std::move(avg);
    return m;
  }

  [[nodiscard]] double margin(std::span<const double> x) const {
    double z = bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * (x[j] - scaler.mean[j]) / scaler.scale[j];
    return z;
  }
  /// Logistic link over the margin.
  [[nodiscard]] double proba(std::span<const double> x) const { return sigmoid(margin(x)); }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"scaler", scaler.to_json()}, {"weights", weights}, {"bias", bias}};
  }
  static LinearSvmModel from_json(const nlohmann::json& j) {
    LinearSvmModel m;
    m.scaler = Standardizer::from_json(j.at("scaler"));
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    return m;
  }
};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

struct GaussianNbModel {
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> var;

  static GaussianNbModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp) {
    GaussianNbModel m;
    const std::size_t d = x.cols();
    std::array<double, 2> n{};
    for (int c : {0, 1}) {
      m.mean[c].assign(d, 0.0);
      m.var[c].assign(d, 0.0);
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const int c = y[i];
      n[c] += 1;
      for (std::size_t j = 0; j < d; ++j) m.mean[c][j] += x(i, j);
    }
    if (n[0] == 0 || n[1] == 0) throw Error(Errc::insufficient_data, "GaussianNB needs both classes");
    for (int c : {0, 1}) {
      for (auto& v : m.mean[c]) v /= n[c];
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const int c = y[i];
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = x(i, j) - m.mean[c][j];
        m.var[c][j] += dv * dv;
      }
    }
    // floor = var_smoothing * largest per-feature variance over all rows
    double max_var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0, v = 0;
      for (std::size_t i = 0; i < x.rows(); ++i) mu += x(i, j);
      mu /= static_cast<double>(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i) v += (x(i, j) - mu) * (x(i, j) - mu);
      max_var = std::max(max_var, v / static_cast<double>(x.rows()));
    }
    const double smoothing = hp.at("var_smoothing").get<double>();
    double floor = smoothing * max_var;
    if (!(floor > 0)) floor = std::max(smoothing, 1e-12);
    for (int c : {0, 1}) {
      for (auto& v : m.var[c]) v = v / n[c] + floor;
      m.log_prior[c] = std::log(n[c] / static_cast<double>(x.rows()));
    }
    return m;
  }

  [[nodiscard]] double log_joint(std::span<const double> x, int c) const {
    double lj = log_prior[c];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double dv = x[j] - mean[c][j];
      lj -= 0.5 * (std::log(2 * std::numbers::pi * var[c][j]) + dv * dv / var[c][j]);
    }
    return lj;
  }

  [[nodiscard]] double proba(std::span<const double> x) const {
    return sigmoid(log_joint(x, 1) - log_joint(x, 0));
  }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"log_prior", log_prior}, {"mean", mean}, {"var", var}};
  }
  static GaussianNbModel from_json(const nlohmann::json& j) {
    GaussianNbModel m;
    m.log_prior = j.at("log_prior").get<std::array<double, 2>>();
    m.mean = j.at("mean").get<std::array<std::vector<double>, 2>>();
    m.var = j.at("var").get<std::array<std::vector<double>, 2>>();
    return m;
  }
};

// ---------------------------------------------------------------------------
// Feed-forward network

/// sizes = {inputs, hidden..., 1}. Per layer: weights (out x in, row-major)
/// followed by biases.
struct MlpLayout {
  std::vector<std::size_t> sizes;

  [[nodiscard]] std::size_t layers() const { return sizes.size() - 1; }
  [[nodiscard]] std::size_t weight_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k) off += sizes[k + 1] * (sizes[k] + 1);
    return off;
  }
  [[nodiscard]] std::size_t bias_offset(std::size_t l) const {
    return weight_offset(l) + sizes[l + 1] * sizes[l];
  }
  [[nodiscard]] std::size_t param_count() const { return weight_offset(layers()); }
};

/// tanh hidden units, sigmoid output; weighted mean logistic loss plus
/// (l2/2)|W|^2 over weights (not biases). Gradient by backpropagation.
inline double mlp_loss(const MlpLayout& layout, const std::vector<double>& p, const Matrix& x,
                       std::span<const int> y, std::span<const double> w, double l2,
                       std::vector<double>* grad) {
  const std::size_t L = layout.layers();
  const auto& sz = layout.sizes;
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  std::vector<std::vector<double>> act(L + 1), delta(L + 1);
  for (std::size_t l = 0; l <= L; ++l) {
    act[l].resize(sz[l]);
    delta[l].resize(sz[l]);
  }
  double loss = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    std::copy(row.begin(), row.end(), act[0].begin());
    for (std::size_t l = 0; l < L; ++l) {
      const double* W = p.data() + layout.weight_offset(l);
      const double* b = p.data() + layout.bias_offset(l);
      for (std::size_t k = 0; k < sz[l + 1]; ++k) {
        double z = b[k];
        const double* wk = W + k * sz[l];
        for (std::size_t j = 0; j < sz[l]; ++j) z += wk[j] * act[l][j];
        act[l + 1][k] = l + 1 < L ? std::tanh(z) : z;
      }
    }
    const double z = act[L][0];
    loss += w[i] * (softplus(z) - y[i] * z);
    if (!grad) continue;
    delta[L][0] = w[i] * (sigmoid(z) - y[i]) / total;
    for (std::size_t l = L; l-- > 0;) {
      const double* W = p.data() + layout.weight_offset(l);
      double* gW = grad->data() + layout.weight_offset(l);
      double* gb = grad->data() + layout.bias_offset(l);
      for (std::size_t k = 0; k < sz[l + 1]; ++k) {
        const double dk = delta[l + 1][k];
        gb[k] += dk;
        double* gwk = gW + k * sz[l];
        for (std::size_t j = 0; j < sz[l]; ++j) gwk[j] += dk * act[l][j];
      }
      if (l == 0) break;
      for (std::size_t j = 0; j < sz[l]; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < sz[l + 1]; ++k) s += W[k * sz[l] + j] * delta[l + 1][k];
        delta[l][j] = s * (1 - act[l][j] * act[l][j]);
      }
    }
  }
  loss /= total;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t off = layout.weight_offset(l);
    for (std::size_t k = off; k < layout.bias_offset(l); ++k) {
      loss += 0.5 * l2 * p[k] * p[k];
      if (grad) (*grad)[k] += l2 * p[k];
    }
  }
  return loss;
}

/// Glorot-uniform weights, zero biases.
inline std::vector<double> mlp_init(const MlpLayout& layout, std::uint64_t seed) {
  std::vector<double> p(layout.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layout.layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layout.sizes[l] + layout.sizes[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t k = layout.weight_offset(l); k < layout.bias_offset(l); ++k) p[k] = u(rng);
  }
  return p;
}

struct MlpModel {
  Standardizer scaler;
  MlpLayout layout;
  std::vector<double> params;
  std::vector<double> losses;  // training trace, not serialized

  static MlpModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp,
                        std::uint64_t seed) {
    MlpModel m;
    m.scaler = Standardizer::fit(x);
    const Matrix xs = m.scaler.transform(x);
    m.layout.sizes.push_back(x.cols());
    for (const auto& h : hp.at("hidden")) m.layout.sizes.push_back(h.get<std::size_t>());
    m.layout.sizes.push_back(1);
    const auto w = class_weights(y, hp.at("class_weight").get<std::string>());
    const double l2 = hp.at("l2").get<double>();
    Objective f = [&](const std::vector<double>& p, std::vector<double>* g) {
      return mlp_loss(m.layout, p, xs, y, w, l2, g);
    };
    auto res = gradient_descent(f, mlp_init(m.layout, seed),
                                {hp.at("max_iter").get<std::size_t>(), hp.at("tol").get<double>()});
    m.params = std::move(res.params);
    m.losses = std::move(res.losses);
    return m;
  }

  [[nodiscard]] double proba(std::span<const double> x) const {
    std::vector<double> a(x.size()), next;
    scaler.apply(x, a);
    const std::size_t L = layout.layers();
    for (std::size_t l = 0; l < L; ++l) {
      const double* W = params.data() + layout.weight_offset(l);
      const double* b = params.data() + layout.bias_offset(l);
      next.assign(layout.sizes[l + 1], 0.0);
      for (std::size_t k = 0; k < next.size(); ++k) {
        double z = b[k];
        for (std::size_t j = 0; j < a.size(); ++j) z += W[k * a.size() + j] * a[j];
        next[k] = l + 1 < L ? std::tanh(z) : z;
      }
      a.swap(next);
    }
    return sigmoid(a[0]);
  }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"scaler", scaler.to_json()}, {"sizes", layout.sizes}, {"params", params}};
  }
  static MlpModel from_json(const nlohmann::json& j) {
    MlpModel m;
    m.scaler = Standardizer::from_json(j.at("scaler"));
    m.layout.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    m.params = j.at("params").get<std::vector<double>>();
    if (m.layout.sizes.size() < 2 || m.params.size() != m.layout.param_count()) {
      throw Error(Errc::invalid_input, "network parameters do not match the layout");
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Trees and ensembles

inline CartParams cart_params(const nlohmann::json& hp, std::size_t n_features, std::uint64_t seed) {
  CartParams p;
  const int depth = hp.at("max_depth").get<int>();
  p.max_depth = depth == 0 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(depth);
  p.min_leaf = hp.at("min_leaf").get<std::size_t>();
  p.min_split = hp.at("min_split").get<std::size_t>();
  const int mf = hp.at("max_features").get<int>();
  p.max_features = mf < 0 ? static_cast<std::size_t>(std::max(1.0, std::floor(std::sqrt(static_cast<double>(n_features)))))
                          : static_cast<std::size_t>(mf);
  p.seed = seed;
  return p;
}

struct TreeModel {
  DecisionTree tree;

  static TreeModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp,
                         std::uint64_t seed, std::vector<std::string> names = {}) {
    const auto w = class_weights(y, hp.at("class_weight").get<std::string>());
    return {train_cart(x, y, cart_params(hp, x.cols(), seed), w, std::move(names))};
  }
  [[nodiscard]] double proba(std::span<const double> x) const { return tree.predict_proba(x); }
  [[nodiscard]] nlohmann::json to_json() const { return tree.to_json(); }
  static TreeModel from_json(const nlohmann::json& j) { return {DecisionTree::from_json(j)}; }
};

/// Bagged CART trees with per-split feature subsampling; score = mean leaf share.
struct ForestModel {
  std::vector<DecisionTree> trees;

  static ForestModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp,
                           std::uint64_t seed) {
    ForestModel m;
    const auto n_trees = hp.at("n_trees").get<std::size_t>();
    const bool bootstrap = hp.at("bootstrap").get<bool>();
    const auto w = class_weights(y, hp.at("class_weight").get<std::string>());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.rows() - 1);
    std::vector<std::size_t> idx(x.rows());
    std::vector<int> yb(x.rows());
    std::vector<double> wb(x.rows());
    for (std::size_t t = 0; t < n_trees; ++t) {
      const std::uint64_t tree_seed = t == 0 ? seed : rng();
      if (bootstrap) {
        for (auto& i : idx) i = pick(rng);
      } else {
        std::iota(idx.begin(), idx.end(), 0);
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        yb[k] = y[idx[k]];
        wb[k] = w[idx[k]];
      }
      m.trees.push_back(train_cart(x.select(idx), yb, cart_params(hp, x.cols(), tree_seed), wb));
    }
    return m;
  }

  [[nodiscard]] double proba(std::span<const double> x) const {
    double s = 0;
    for (const auto& t : trees) s += t.predict_proba(x);
    return s / static_cast<double>(trees.size());
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"trees", arr}};
  }
  static ForestModel from_json(const nlohmann::json& j) {
    ForestModel m;
    for (const auto& t : j.at("trees")) m.trees.push_back(DecisionTree::from_json(t));
    if (m.trees.empty()) throw Error(Errc::invalid_input, "forest has no trees");
    return m;
  }
};

struct Stump {
  std::size_t feature = 0;
  double threshold = std::numeric_limits<double>::infinity();
  int left = 0;   // class when x[feature] <= threshold
  int right = 0;
  double error = 0;  // weighted training error when fitted

  [[nodiscard]] int predict(std::span<const double> x) const {
    return x[feature] <= threshold ? left : right;
  }
};

/// Depth-1 split minimising weighted misclassification; ties keep the lowest
/// feature, then the lowest threshold.
inline Stump best_stump(const Matrix& x, std::span<const int> y, std::span<const double> w) {
  double t1 = 0, t0 = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) (y[i] == 1 ? t1 : t0) += w[i];
  Stump best;
  best.left = best.right = t1 > t0 ? 1 : 0;
  best.error = std::min(t1, t0);
  bool found = false;
  std::vector<std::size_t> order(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      return x(a, f) < x(b, f) || (x(a, f) == x(b, f) && a < b);
    });
    double l1 = 0, l0 = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const auto i = order[k];
      (y[i] == 1 ? l1 : l0) += w[i];
      const double v = x(i, f), next = x(order[k + 1], f);
      if (!(v < next)) continue;
      const double r1 = t1 - l1, r0 = t0 - l0;
      const double err = std::min(l1, l0) + std::min(r1, r0);
      if (!found || err < best.error - kSplitTolerance) {
        double t = v + (next - v) / 2;
        if (!(t < next)) t = v;
        best = {f, t, l1 > l0 ? 1 : 0, r1 > r0 ? 1 : 0, err};
        found = true;
      }
    }
  }
  return best;
}

/// Discrete SAMME boosting of stumps (two classes, so alpha = ln((1-e)/e)).
/// Score = sigmoid(sum alpha_m h_m / sum alpha_m) with h in {-1,+1}.
struct AdaBoostModel {
  std::vector<Stump> stumps;
  std::vector<double> alphas;

  static AdaBoostModel train(const Matrix& x, std::span<const int> y, const nlohmann::json& hp) {
    AdaBoostModel m;
    const auto rounds = hp.at("n_estimators").get<std::size_t>();
    std::vector<double> w(x.rows(), 1.0 / static_cast<double>(x.rows()));
    for (std::size_t r = 0; r < rounds; ++r) {
      auto s = best_stump(x, y, w);
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      const double err = s.error / total;
      if (err >= 0.5) break;
      const double e = std::max(err, 1e-10);
      const double alpha = std::log((1 - e) / e);
      m.stumps.push_back(s);
      m.alphas.push_back(alpha);
      if (err <= 1e-10) break;
      double sum = 0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        if (s.predict(x.row(i)) != y[i]) w[i] *= std::exp(alpha);
        sum += w[i];
      }
      for (auto& v : w) v /= sum;
    }
    return m;
  }

  [[nodiscard]] double proba(std::span<const double> x) const {
    if (stumps.empty()) return 0.5;
    double f = 0, total = 0;
    for (std::size_t m = 0; m < stumps.size(); ++m) {
      f += alphas[m] * (stumps[m].predict(x) == 1 ? 1.0 : -1.0);
      total += alphas[m];
    }
    return sigmoid(f / total);
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t m = 0; m < stumps.size(); ++m) {
      const auto& s = stumps[m];
      arr.push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"left", s.left},
                     {"right", s.right}, {"alpha", alphas[m]}});
    }
    return {{"stumps", arr}};
  }
  static AdaBoostModel from_json(const nlohmann::json& j) {
    AdaBoostModel m;
    for (const auto& s : j.at("stumps")) {
      m.stumps.push_back({s.at("feature").get<std::size_t>(), s.at("threshold").get<double>(),
                          s.at("left").get<int>(), s.at("right").get<int>(), 0.0});
      m.alphas.push_back(s.at("alpha").get<double>());
    }
    return m;
  }
};

// ---------------------------------------------------------------------------

class Model {
 public:
  using Impl = std::variant<TreeModel, ForestModel, AdaBoostModel, LogisticModel, LinearSvmModel,
                            GaussianNbModel, MlpModel>;

  Model(ClassifierSpec spec, std::size_t n_features, Impl impl)
      : spec_(std::move(spec)), n_features_(n_features), impl_(std::move(impl)) {}

  [[nodiscard]] const ClassifierSpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t n_features() const { return n_features_; }
  [[nodiscard]] const Impl& impl() const { return impl_; }

  [[nodiscard]] double predict_proba(std::span<const double> x) const {
    if (x.size() != n_features_) {
      throw Error(Errc::invalid_input,
                  fmt::format("model expects {} features, got {}", n_features_, x.size()));
    }
    const double p = std::visit([&](const auto& m) { return m.proba(x); }, impl_);
    return std::clamp(p, 0.0, 1.0);
  }

  [[nodiscard]] std::vector<double> predict_proba(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_proba(x.row(i));
    return out;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"spec", spec_.to_json()},
            {"hyperparams", spec_.resolved()},
            {"n_features", n_features_},
            {"model", std::visit([](const auto& m) { return m.to_json(); }, impl_)}};
  }

  static Model from_json(const nlohmann::json& j) {
    auto spec = ClassifierSpec::from_json(j.at("spec"));
    const auto n = j.at("n_features").get<std::size_t>();
    const auto& m = j.at("model");
    switch (spec.kind) {
      case ClassifierKind::DecisionTree: return {spec, n, TreeModel::from_json(m)};
      case ClassifierKind::RandomForest: return {spec, n, ForestModel::from_json(m)};
      case ClassifierKind::AdaBoost: return {spec, n, AdaBoostModel::from_json(m)};
      case ClassifierKind::LogisticRegression: return {spec, n, LogisticModel::from_json(m)};
      case ClassifierKind::LinearSVM: return {spec, n, LinearSvmModel::from_json(m)};
      case ClassifierKind::GaussianNB: return {spec, n, GaussianNbModel::from_json(m)};
      case ClassifierKind::MLP:
      case ClassifierKind::DeepNN: return {spec, n, MlpModel::from_json(m)};
    }
    throw Error(Errc::invalid_input, "unknown model kind");
  }

 private:
  ClassifierSpec spec_;
  std::size_t n_features_ = 0;
  Impl impl_;
};

inline Model train(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y) {
  check_training_data(x, y);
  const auto n1 = std::count(y.begin(), y.end(), 1);
  if (n1 == 0 || static_cast<std::size_t>(n1) == y.size()) {
    throw Error(Errc::insufficient_data, spec.name() + " training needs both classes");
  }
  const auto hp = spec.resolved();
  switch (spec.kind) {
    case ClassifierKind::DecisionTree: return {spec, x.cols(), TreeModel::train(x, y, hp, spec.seed)};
    case ClassifierKind::RandomForest: return {spec, x.cols(), ForestModel::train(x, y, hp, spec.seed)};
    case ClassifierKind::AdaBoost: return {spec, x.cols(), AdaBoostModel::train(x, y, hp)};
    case ClassifierKind::LogisticRegression: return {spec, x.cols(), LogisticModel::train(x, y, hp)};
    case ClassifierKind::LinearSVM: return {spec, x.cols(), LinearSvmModel::train(x, y, hp, spec.seed)};
    case ClassifierKind::GaussianNB: return {spec, x.cols(), GaussianNbModel::train(x, y, hp)};
    case ClassifierKind::MLP:
    case ClassifierKind::DeepNN: return {spec, x.cols(), MlpModel::train(x, y, hp, spec.seed)};
  }
  throw Error(Errc::invalid_input, "unknown classifier kind");
}

}  // namespace pcrisk::ml

#endif  // PCRISK_ML_MODELS_HPP
