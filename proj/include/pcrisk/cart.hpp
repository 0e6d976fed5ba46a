#ifndef PCRISK_CART_HPP
#define PCRISK_CART_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcrisk/error.hpp"
#include "pcrisk/matrix.hpp"

namespace pcrisk {

struct CartParams {
  std::size_t max_depth = 5;
  std::size_t min_leaf = 1;      // rows per child
  std::size_t min_split = 2;     // rows needed to attempt a split
  std::size_t max_features = 0;  // features scored per node; 0 = all
  std::uint64_t seed = 0;
  std::string criterion = "gini";

  void validate() const {
    if (criterion != "gini") throw Error(Errc::invalid_input, "unsupported criterion '" + criterion + "'");
    if (min_leaf < 1) throw Error(Errc::invalid_input, "min_leaf must be >= 1");
    if (min_split < 2) throw Error(Errc::invalid_input, "min_split must be >= 2");
  }
};

/// Flat-array node. Internal nodes send x[feature] <= threshold left.
struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t depth = 0;
  std::size_t n_samples = 0;  // training rows reaching the node
  std::size_t n_class1 = 0;
  double weight = 0;
  double weight_class1 = 0;

  [[nodiscard]] double proba() const { return weight > 0 ? weight_class1 / weight : 0.0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

inline double gini(double w1, double w0) {
  const double w = w1 + w0;
  if (w <= 0) return 0.0;
  const double p1 = w1 / w;
  const double p0 = w0 / w;
  return 1.0 - p1 * p1 - p0 * p0;
}

/// Strictly-better test shared by every split search so ties resolve to the
/// first candidate visited (lowest feature, then lowest threshold).
inline constexpr double kSplitTolerance = 1e-12;

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, std::size_t n_features, std::vector<std::string> names)
      : nodes_(std::move(nodes)), n_features_(n_features), names_(std::move(names)) {}

  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
  [[nodiscard]] const TreeNode& root() const { return nodes_.front(); }
  [[nodiscard]] std::size_t n_features() const { return n_features_; }

  [[nodiscard]] std::string feature_name(std::size_t f) const {
    return f < names_.size() ? names_[f] : fmt::format("x{}", f);
  }
  [[nodiscard]] const std::vector<std::string>& feature_names() const { return names_; }

  [[nodiscard]] std::size_t leaf_index(std::span<const double> x) const {
    if (x.size() != n_features_) {
      throw Error(Errc::invalid_input,
                  fmt::format("tree expects {} features, got {}", n_features_, x.size()));
    }
    std::size_t i = 0;
    while (!nodes_[i].leaf) i = x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return i;
  }

  [[nodiscard]] double predict_proba(std::span<const double> x) const {
    return nodes_[leaf_index(x)].proba();
  }

  [[nodiscard]] std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
      nlohmann::json j = {{"leaf", n.leaf},           {"depth", n.depth},
                          {"n_samples", n.n_samples}, {"n_class1", n.n_class1},
                          {"weight", n.weight},       {"weight_class1", n.weight_class1}};
      if (!n.leaf) {
        j["feature"] = n.feature;
        j["feature_name"] = feature_name(n.feature);
        j["threshold"] = n.threshold;
        j["left"] = n.left;
        j["right"] = n.right;
      }
      nodes.push_back(std::move(j));
    }
    return {{"n_features", n_features_}, {"feature_names", names_}, {"nodes", nodes}};
  }

  static DecisionTree from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& jn : j.at("nodes")) {
      TreeNode n;
      n.leaf = jn.at("leaf").get<bool>();
      n.depth = jn.at("depth").get<std::size_t>();
      n.n_samples = jn.at("n_samples").get<std::size_t>();
      n.n_class1 = jn.at("n_class1").get<std::size_t>();
      n.weight = jn.at("weight").get<double>();
      n.weight_class1 = jn.at("weight_class1").get<double>();
      if (!n.leaf) {
        n.feature = jn.at("feature").get<std::size_t>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<std::size_t>();
        n.right = jn.at("right").get<std::size_t>();
      }
      nodes.push_back(n);
    }
    if (nodes.empty()) throw Error(Errc::invalid_input, "tree has no nodes");
    for (const auto& n : nodes) {
      if (!n.leaf && (n.left >= nodes.size() || n.right >= nodes.size() ||
                      n.feature >= j.at("n_features").get<std::size_t>())) {
        throw Error(Errc::invalid_input, "tree node references out of range");
      }
    }
    return {std::move(nodes), j.at("n_features").get<std::size_t>(),
            j.value("feature_names", std::vector<std::string>{})};
  }

  /// Graphviz digraph; leaves show their class-1 share.
  [[nodiscard]] std::string to_dot() const {
    std::ostringstream out;
    out << "digraph Tree {\n  node [shape=box, fontname=\"helvetica\"];\n";
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.leaf) {
        out << fmt::format("  n{} [label=\"samples = {}\\nclass 1 = {}\\nvalue = {:.3f}\"];\n", i,
                           n.n_samples, n.n_class1, n.proba());
      } else {
        out << fmt::format("  n{} [label=\"{} <= {}\\nsamples = {}\\nclass 1 = {}\"];\n", i,
                           feature_name(n.feature), n.threshold, n.n_samples, n.n_class1);
        out << fmt::format("  n{} -> n{} [label=\"true\"];\n  n{} -> n{} [label=\"false\"];\n", i,
                           n.left, i, n.right);
      }
    }
    out << "}\n";
    return out.str();
  }

 private:
  std::vector<TreeNode> nodes_{TreeNode{}};
  std::size_t n_features_ = 0;
  std::vector<std::string> names_;
};

namespace detail {

class CartBuilder {
 public:
  CartBuilder(const Matrix& x, std::span<const int> y, std::span<const double> w, const CartParams& p)
      : x_(x), y_(y), w_(w), p_(p), rng_(p.seed) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> idx(x_.rows());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0;
    double score = 0;
  };

  std::size_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
    TreeNode node;
    node.depth = depth;
    node.n_samples = idx.size();
    double w0 = 0;
    for (auto i : idx) {
      if (y_[i] == 1) {
        ++node.n_class1;
        node.weight_class1 += w_[i];
      } else {
        w0 += w_[i];
      }
    }
    node.weight = node.weight_class1 + w0;
    const std::size_t id = nodes_.size();
    nodes_.push_back(node);

    const bool pure = node.n_class1 == 0 || node.n_class1 == node.n_samples;
    if (pure || depth >= p_.max_depth || idx.size() < p_.min_split) return id;
    const double parent = gini(node.weight_class1, w0);
    auto split = best_split(idx, node.weight);
    if (!split.found || !(split.score < parent - kSplitTolerance)) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (x_(i, split.feature) <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const std::size_t l = grow(left, depth + 1);
    const std::size_t r = grow(right, depth + 1);
    auto& n = nodes_[id];
    n.leaf = false;
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = l;
    n.right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> f(x_.cols());
    std::iota(f.begin(), f.end(), 0);
    if (p_.max_features == 0 || p_.max_features >= f.size()) return f;
    for (std::size_t i = 0; i < p_.max_features; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, f.size() - 1);
      std::swap(f[i], f[pick(rng_)]);
    }
    f.resize(p_.max_features);
    std::sort(f.begin(), f.end());
    return f;
  }

  Split best_split(const std::vector<std::size_t>& idx, double total_w) {
    Split best;
    std::vector<std::size_t> order(idx);
    for (auto f : candidate_features()) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double va = x_(a, f), vb = x_(b, f);
        return va < vb || (va == vb && a < b);
      });
      double l1 = 0, l0 = 0, r1 = 0, r0 = 0;
      for (auto i : order) (y_[i] == 1 ? r1 : r0) += w_[i];
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const auto i = order[k];
        (y_[i] == 1 ? l1 : l0) += w_[i];
        (y_[i] == 1 ? r1 : r0) -= w_[i];
        const double v = x_(i, f);
        const double next = x_(order[k + 1], f);
        if (!(v < next)) continue;
        const std::size_t n_left = k + 1;
        if (n_left < p_.min_leaf || order.size() - n_left < p_.min_leaf) continue;
        const double wl = l1 + l0;
        const double wr = r1 + r0;
        const double score = (wl * gini(l1, l0) + wr * gini(r1, r0)) / total_w;
        if (!best.found || score < best.score - kSplitTolerance) {
          double t = v + (next - v) / 2;
          if (!(t < next)) t = v;
          best = {true, f, t, score};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  const CartParams& p_;
  std::mt19937_64 rng_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// Greedy binary CART minimising weighted Gini impurity. Thresholds are
/// midpoints between consecutive distinct values; a node splits only when the
/// best split strictly lowers impurity. Deterministic for a fixed seed.
inline DecisionTree train_cart(const Matrix& x, std::span<const int> y, const CartParams& params,
                               std::span<const double> weights = {},
                               std::vector<std::string> names = {}) {
  params.validate();
  if (x.rows() == 0) throw Error(Errc::insufficient_data, "cannot train a tree on zero rows");
  if (y.size() != x.rows()) throw Error(Errc::invalid_input, "label count does not match rows");
  check_binary(y);
  std::vector<double> unit;
  if (weights.empty()) {
    unit.assign(x.rows(), 1.0);
    weights = unit;
  } else if (weights.size() != x.rows()) {
    throw Error(Errc::invalid_input, "weight count does not match rows");
  }
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) {
      if (!std::isfinite(v)) throw Error(Errc::invalid_input, "non-finite feature value");
    }
  }
  detail::CartBuilder builder(x, y, weights, params);
  return {builder.build(), x.cols(), std::move(names)};
}

}  // namespace pcrisk

#endif  // PCRISK_CART_HPP
