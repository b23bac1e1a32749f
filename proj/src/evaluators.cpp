#include "tabsyn/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabsyn/errors.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

namespace {

// Schema-driven feature encoding: one column per numerical attribute
// (min-max scaled by the fitted table), one per categorical label. The
// target attribute is excluded from features. Out-of-domain categorical
// codes encode as all-zero blocks.
struct Encoder {
  std::vector<std::size_t> feature_attrs;
  std::vector<std::size_t> offsets;     // feature start per attribute
  std::vector<std::pair<double, double>> ranges;  // per attribute (numeric only)
  std::size_t dim = 0;
  std::size_t target = 0;
  Task task = Task::binary_classification;
  std::size_t n_classes = 0;

  void build(const Table& train) {
    const Schema& schema = train.schema();
    target = schema.target_index();
    task = schema.task;
    n_classes = task == Task::regression
                    ? 0
                    : schema.attribute(target).cardinality();
    feature_attrs.clear();
    offsets.clear();
    ranges.assign(schema.size(), {0.0, 0.0});
    dim = 0;
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c == target) continue;
      feature_attrs.push_back(c);
      offsets.push_back(dim);
      const auto& attr = schema.attribute(c);
      if (attr.is_numerical()) {
        double lo = 0.0, hi = 0.0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
          double v = train.at(r, c);
          if (r == 0) {
            lo = hi = v;
          } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
        }
        ranges[c] = {lo, hi};
        dim += 1;
      } else {
        dim += attr.cardinality();
      }
    }
  }

  // Row-major feature matrix.
  std::vector<double> encode(const Table& t) const {
    const Schema& schema = t.schema();
    std::vector<double> x(t.rows() * dim, 0.0);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double* row = x.data() + r * dim;
      for (std::size_t f = 0; f < feature_attrs.size(); ++f) {
        std::size_t c = feature_attrs[f];
        const auto& attr = schema.attribute(c);
        double v = t.at(r, c);
        if (attr.is_numerical()) {
          auto [lo, hi] = ranges[c];
          row[offsets[f]] = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        } else {
          auto code = static_cast<std::size_t>(v);
          if (code < attr.cardinality()) row[offsets[f] + code] = 1.0;
        }
      }
    }
    return x;
  }

  std::vector<double> targets(const Table& t) const {
    std::vector<double> y(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) y[r] = t.at(r, target);
    return y;
  }
};

void check_fit_input(const Table& train) {
  if (train.rows() == 0) throw Error("evaluator fit: empty table");
}

// --- linear models ----------------------------------------------------------

// Multinomial softmax regression, full-batch gradient descent from zero
// weights. Features live in [0,1], so a fixed step size is stable.
class LogisticRegression final : public Evaluator {
 public:
  std::string name() const override { return "logistic_regression"; }

  void fit(const Table& train, std::uint64_t) override {
    check_fit_input(train);
    enc_.build(train);
    if (enc_.n_classes < 2) throw ConfigError("logistic regression needs >= 2 classes");
    std::size_t n = train.rows(), d = enc_.dim, k = enc_.n_classes;
    auto x = enc_.encode(train);
    auto y = enc_.targets(train);

    w_.assign(k * (d + 1), 0.0);  // last column is the bias
    std::vector<double> logits(k), grad(k * (d + 1));
    const double lr = 0.5, l2 = 1e-4;
    const std::size_t iters = 400;
    for (std::size_t it = 0; it < iters; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * d;
        softmax_logits(xr, logits);
        auto label = static_cast<std::size_t>(y[r]);
        for (std::size_t c = 0; c < k; ++c) {
          double delta = logits[c] - (c == label ? 1.0 : 0.0);
          double* grow = grad.data() + c * (d + 1);
          for (std::size_t j = 0; j < d; ++j) grow[j] += delta * xr[j];
          grow[d] += delta;
        }
      }
      double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < w_.size(); ++i) {
        w_[i] -= lr * (grad[i] * inv_n + l2 * w_[i]);
      }
    }
  }

  std::vector<double> predict(const Table& rows) const override {
    auto x = enc_.encode(rows);
    std::size_t d = enc_.dim, k = enc_.n_classes;
    std::vector<double> out(rows.rows()), logits(k);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      const double* xr = x.data() + r * d;
      std::size_t best = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double* wr = w_.data() + c * (d + 1);
        double v = wr[d];
        for (std::size_t j = 0; j < d; ++j) v += wr[j] * xr[j];
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      out[r] = static_cast<double>(best);
    }
    return out;
  }

 private:
  void softmax_logits(const double* xr, std::vector<double>& out) const {
    std::size_t d = enc_.dim, k = enc_.n_classes;
    double vmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double* wr = w_.data() + c * (d + 1);
      double v = wr[d];
      for (std::size_t j = 0; j < d; ++j) v += wr[j] * xr[j];
      out[c] = v;
      vmax = std::max(vmax, v);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      out[c] = std::exp(out[c] - vmax);
      sum += out[c];
    }
    for (std::size_t c = 0; c < k; ++c) out[c] /= sum;
  }

  Encoder enc_;
  std::vector<double> w_;
};

// Ridge regression by the normal equations; Cholesky on X^T X + lambda I
// (bias unpenalized).
class RidgeRegression final : public Evaluator {
 public:
  std::string name() const override { return "ridge_regression"; }

  void fit(const Table& train, std::uint64_t) override {
    check_fit_input(train);
    enc_.build(train);
    std::size_t n = train.rows(), d = enc_.dim + 1;  // + bias
    auto x = enc_.encode(train);
    auto y = enc_.targets(train);

    std::vector<double> xtx(d * d, 0.0), xty(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = x.data() + r * enc_.dim;
      auto feat = [&](std::size_t j) { return j < enc_.dim ? xr[j] : 1.0; };
      for (std::size_t i = 0; i < d; ++i) {
        double fi = feat(i);
        xty[i] += fi * y[r];
        for (std::size_t j = i; j < d; ++j) xtx[i * d + j] += fi * feat(j);
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < i; ++j) xtx[i * d + j] = xtx[j * d + i];
    }
    double lambda = 1e-4 * static_cast<double>(n);
    for (std::size_t i = 0; i + 1 < d; ++i) xtx[i * d + i] += lambda;

    w_ = cholesky_solve(xtx, xty, d);
  }

  std::vector<double> predict(const Table& rows) const override {
    auto x = enc_.encode(rows);
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      const double* xr = x.data() + r * enc_.dim;
      double v = w_[enc_.dim];
      for (std::size_t j = 0; j < enc_.dim; ++j) v += w_[j] * xr[j];
      out[r] = v;
    }
    return out;
  }

 private:
  static std::vector<double> cholesky_solve(std::vector<double> a,
                                            std::vector<double> b, std::size_t d) {
    // Jitter retries cover the rank-deficient one-hot case.
    for (double jitter = 0.0;; jitter = jitter == 0.0 ? 1e-8 : jitter * 100.0) {
      std::vector<double> m = a;
      for (std::size_t i = 0; i < d; ++i) m[i * d + i] += jitter;
      std::vector<double> l(d * d, 0.0);
      bool ok = true;
      for (std::size_t i = 0; i < d && ok; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double s = m[i * d + j];
          for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
          if (i == j) {
            if (s <= 0.0) {
              ok = false;
              break;
            }
            l[i * d + i] = std::sqrt(s);
          } else {
            l[i * d + j] = s / l[j * d + j];
          }
        }
      }
      if (!ok) {
        if (jitter > 1.0) throw Error("ridge normal equations are not solvable");
        continue;
      }
      std::vector<double> z(d), w(d);
      for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * d + k] * z[k];
        z[i] = s / l[i * d + i];
      }
      for (std::size_t ii = d; ii > 0; --ii) {
        std::size_t i = ii - 1;
        double s = z[i];
        for (std::size_t k = i + 1; k < d; ++k) s -= l[k * d + i] * w[k];
        w[i] = s / l[i * d + i];
      }
      return w;
    }
  }

  Encoder enc_;
  std::vector<double> w_;
};

// --- trees ------------------------------------------------------------------

struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0; // goes left when x <= threshold
  int left = -1, right = -1;
  double value = 0.0;     // class code or mean
};

// CART. Splits scan features in index order and thresholds in value order;
// strictly better impurity wins, so ties resolve to the first candidate and
// the tree is deterministic. feature_fraction < 1 samples a random feature
// subset per split (random forest mode).
class CartBuilder {
 public:
  CartBuilder(std::size_t dim, bool classification, std::size_t n_classes,
              std::size_t max_depth, double feature_fraction, Rng* rng)
      : dim_(dim), classification_(classification), n_classes_(n_classes),
        max_depth_(max_depth), feature_fraction_(feature_fraction), rng_(rng) {}

  std::vector<TreeNode> build(const std::vector<double>& x,
                              const std::vector<double>& y,
                              std::vector<std::size_t> rows) {
    nodes_.clear();
    x_ = &x;
    y_ = &y;
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].value = leaf_value(rows);
    if (depth >= max_depth_ || rows.size() < 2 || pure(rows)) return id;

    int best_feature = -1;
    double best_threshold = 0.0, best_score = node_impurity(rows);
    auto features = candidate_features();
    std::vector<std::pair<double, double>> fv(rows.size());  // (feature, target)
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        fv[i] = {(*x_)[rows[i] * dim_ + f], (*y_)[rows[i]]};
      }
      std::sort(fv.begin(), fv.end());
      scan_splits(fv, f, &best_feature, &best_threshold, &best_score);
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      double v = (*x_)[r * dim_ + static_cast<std::size_t>(best_feature)];
      (v <= best_threshold ? left : right).push_back(r);
    }
    if (left.empty() || right.empty()) return id;
    rows.clear();
    rows.shrink_to_fit();

    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    int l = grow(std::move(left), depth + 1);
    int r = grow(std::move(right), depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() const {
    std::vector<std::size_t> all(dim_);
    for (std::size_t i = 0; i < dim_; ++i) all[i] = i;
    if (feature_fraction_ >= 1.0 || !rng_) return all;
    auto count = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(dim_))));
    auto idx = rng_->sample_without_replacement(dim_, count);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

  bool pure(const std::vector<std::size_t>& rows) const {
    double first = (*y_)[rows[0]];
    for (std::size_t r : rows) {
      if ((*y_)[r] != first) return false;
    }
    return true;
  }

  double leaf_value(const std::vector<std::size_t>& rows) const {
    if (classification_) {
      std::vector<std::size_t> counts(n_classes_, 0);
      for (std::size_t r : rows) ++counts[static_cast<std::size_t>((*y_)[r])];
      std::size_t best = 0;
      for (std::size_t c = 1; c < n_classes_; ++c) {
        if (counts[c] > counts[best]) best = c;
      }
      return static_cast<double>(best);
    }
    double sum = 0.0;
    for (std::size_t r : rows) sum += (*y_)[r];
    return sum / static_cast<double>(rows.size());
  }

  // Weighted impurity of a node's rows: Gini or variance.
  double node_impurity(const std::vector<std::size_t>& rows) const {
    auto n = static_cast<double>(rows.size());
    if (classification_) {
      std::vector<double> counts(n_classes_, 0.0);
      for (std::size_t r : rows) counts[static_cast<std::size_t>((*y_)[r])] += 1.0;
      double gini = 1.0;
      for (double c : counts) gini -= (c / n) * (c / n);
      return gini * n;
    }
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t r : rows) {
      sum += (*y_)[r];
      sum2 += (*y_)[r] * (*y_)[r];
    }
    return sum2 - sum * sum / n;
  }

  // One pass over sorted (value, target) pairs, tracking left-side stats.
  void scan_splits(const std::vector<std::pair<double, double>>& fv,
                   std::size_t feature, int* best_feature, double* best_threshold,
                   double* best_score) const {
    std::size_t n = fv.size();
    if (classification_) {
      std::vector<double> left_counts(n_classes_, 0.0), total(n_classes_, 0.0);
      for (const auto& [v, t] : fv) total[static_cast<std::size_t>(t)] += 1.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_counts[static_cast<std::size_t>(fv[i].second)] += 1.0;
        if (fv[i].first == fv[i + 1].first) continue;
        auto nl = static_cast<double>(i + 1);
        double nr = static_cast<double>(n) - nl;
        double gl = 1.0, gr = 1.0;
        for (std::size_t c = 0; c < n_classes_; ++c) {
          double l = left_counts[c] / nl;
          double r = (total[c] - left_counts[c]) / nr;
          gl -= l * l;
          gr -= r * r;
        }
        double score = gl * nl + gr * nr;
        if (score < *best_score - 1e-12) {
          *best_score = score;
          *best_feature = static_cast<int>(feature);
          *best_threshold = midpoint(fv[i].first, fv[i + 1].first);
        }
      }
    } else {
      double total_sum = 0.0, total_sum2 = 0.0;
      for (const auto& [v, t] : fv) {
        total_sum += t;
        total_sum2 += t * t;
      }
      double left_sum = 0.0, left_sum2 = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += fv[i].second;
        left_sum2 += fv[i].second * fv[i].second;
        if (fv[i].first == fv[i + 1].first) continue;
        auto nl = static_cast<double>(i + 1);
        double nr = static_cast<double>(n) - nl;
        double sl = left_sum2 - left_sum * left_sum / nl;
        double sr = (total_sum2 - left_sum2) -
                    (total_sum - left_sum) * (total_sum - left_sum) / nr;
        double score = sl + sr;
        if (score < *best_score - 1e-12) {
          *best_score = score;
          *best_feature = static_cast<int>(feature);
          *best_threshold = midpoint(fv[i].first, fv[i + 1].first);
        }
      }
    }
  }

  static double midpoint(double a, double b) { return a + (b - a) / 2.0; }

  std::size_t dim_;
  bool classification_;
  std::size_t n_classes_;
  std::size_t max_depth_;
  double feature_fraction_;
  Rng* rng_;
  const std::vector<double>* x_ = nullptr;
  const std::vector<double>* y_ = nullptr;
  std::vector<TreeNode> nodes_;
};

double tree_predict(const std::vector<TreeNode>& nodes, const double* xr) {
  int id = 0;
  while (nodes[id].feature >= 0) {
    id = xr[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left
                                                      : nodes[id].right;
  }
  return nodes[id].value;
}

class DecisionTree final : public Evaluator {
 public:
  explicit DecisionTree(std::size_t max_depth) : max_depth_(max_depth) {}

  std::string name() const override { return "decision_tree"; }

  void fit(const Table& train, std::uint64_t) override {
    check_fit_input(train);
    enc_.build(train);
    auto x = enc_.encode(train);
    auto y = enc_.targets(train);
    std::vector<std::size_t> rows(train.rows());
    std::iota(rows.begin(), rows.end(), 0);
    CartBuilder builder(enc_.dim, enc_.task != Task::regression, enc_.n_classes,
                        max_depth_, 1.0, nullptr);
    nodes_ = builder.build(x, y, std::move(rows));
  }

  std::vector<double> predict(const Table& rows) const override {
    auto x = enc_.encode(rows);
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      out[r] = tree_predict(nodes_, x.data() + r * enc_.dim);
    }
    return out;
  }

 private:
  std::size_t max_depth_;
  Encoder enc_;
  std::vector<TreeNode> nodes_;
};

class RandomForest final : public Evaluator {
 public:
  RandomForest(std::size_t trees, std::size_t max_depth)
      : trees_(trees), max_depth_(max_depth) {}

  std::string name() const override { return "random_forest"; }

  void fit(const Table& train, std::uint64_t seed) override {
    check_fit_input(train);
    enc_.build(train);
    auto x = enc_.encode(train);
    auto y = enc_.targets(train);
    std::size_t n = train.rows();

    forest_.clear();
    for (std::size_t t = 0; t < trees_; ++t) {
      Rng rng(derive_seed(seed, "forest_tree", t));
      std::vector<std::size_t> rows(n);
      for (std::size_t i = 0; i < n; ++i) {
        rows[i] = static_cast<std::size_t>(rng.below(n));
      }
      CartBuilder builder(enc_.dim, enc_.task != Task::regression, enc_.n_classes,
                          max_depth_, 0.5, &rng);
      forest_.push_back(builder.build(x, y, std::move(rows)));
    }
  }

  std::vector<double> predict(const Table& rows) const override {
    auto x = enc_.encode(rows);
    std::vector<double> out(rows.rows());
    bool classification = enc_.task != Task::regression;
    std::vector<double> votes(classification ? enc_.n_classes : 0);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      const double* xr = x.data() + r * enc_.dim;
      if (classification) {
        std::fill(votes.begin(), votes.end(), 0.0);
        for (const auto& tree : forest_) {
          votes[static_cast<std::size_t>(tree_predict(tree, xr))] += 1.0;
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < votes.size(); ++c) {
          if (votes[c] > votes[best]) best = c;
        }
        out[r] = static_cast<double>(best);
      } else {
        double sum = 0.0;
        for (const auto& tree : forest_) sum += tree_predict(tree, xr);
        out[r] = sum / static_cast<double>(forest_.size());
      }
    }
    return out;
  }

 private:
  std::size_t trees_;
  std::size_t max_depth_;
  Encoder enc_;
  std::vector<std::vector<TreeNode>> forest_;
};

class Knn final : public Evaluator {
 public:
  explicit Knn(std::size_t k) : k_(k) {}

  std::string name() const override { return "knn"; }

  void fit(const Table& train, std::uint64_t) override {
    check_fit_input(train);
    enc_.build(train);
    x_ = enc_.encode(train);
    y_ = enc_.targets(train);
    n_ = train.rows();
  }

  std::vector<double> predict(const Table& rows) const override {
    auto x = enc_.encode(rows);
    std::size_t k = std::min(k_, n_);
    std::vector<double> out(rows.rows());
    std::vector<std::pair<double, std::size_t>> best;  // (distance, train row)
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      const double* xr = x.data() + r * enc_.dim;
      best.assign(k, {std::numeric_limits<double>::infinity(), 0});
      for (std::size_t tr = 0; tr < n_; ++tr) {
        const double* yr = x_.data() + tr * enc_.dim;
        double d2 = 0.0;
        for (std::size_t j = 0; j < enc_.dim; ++j) {
          double diff = xr[j] - yr[j];
          d2 += diff * diff;
        }
        // Strict < keeps the earliest train row on ties.
        if (d2 < best.back().first) {
          std::size_t pos = k;
          while (pos > 0 && d2 < best[pos - 1].first) --pos;
          best.pop_back();
          best.insert(best.begin() + static_cast<std::ptrdiff_t>(pos), {d2, tr});
        }
      }
      if (enc_.task != Task::regression) {
        std::vector<double> votes(enc_.n_classes, 0.0);
        for (const auto& [d2, tr] : best) {
          votes[static_cast<std::size_t>(y_[tr])] += 1.0;
        }
        std::size_t top = 0;
        for (std::size_t c = 1; c < votes.size(); ++c) {
          if (votes[c] > votes[top]) top = c;
        }
        out[r] = static_cast<double>(top);
      } else {
        double sum = 0.0;
        for (const auto& [d2, tr] : best) sum += y_[tr];
        out[r] = sum / static_cast<double>(best.size());
      }
    }
    return out;
  }

 private:
  std::size_t k_;
  Encoder enc_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::size_t n_ = 0;
};

}  // namespace

EvaluatorPtr make_linear(Task task) {
  if (task == Task::regression) return std::make_unique<RidgeRegression>();
  return std::make_unique<LogisticRegression>();
}

EvaluatorPtr make_decision_tree(Task, std::size_t max_depth) {
  return std::make_unique<DecisionTree>(max_depth);
}

EvaluatorPtr make_random_forest(Task, std::size_t trees, std::size_t max_depth) {
  return std::make_unique<RandomForest>(trees, max_depth);
}

EvaluatorPtr make_knn(Task, std::size_t k) { return std::make_unique<Knn>(k); }

std::vector<EvaluatorPtr> builtin_suite(Task task) {
  return build_suite(task, default_suite_spec());
}

std::vector<EvaluatorSpec> default_suite_spec() {
  return {{"linear", 8, 25, 5},
          {"decision_tree", 8, 25, 5},
          {"random_forest", 8, 25, 5},
          {"knn", 8, 25, 5}};
}

std::vector<EvaluatorPtr> build_suite(Task task,
                                      const std::vector<EvaluatorSpec>& specs) {
  std::vector<EvaluatorPtr> suite;
  suite.reserve(specs.size());
  for (const auto& spec : specs) {
    if (spec.kind == "linear") {
      suite.push_back(make_linear(task));
    } else if (spec.kind == "decision_tree") {
      suite.push_back(make_decision_tree(task, spec.max_depth));
    } else if (spec.kind == "random_forest") {
      suite.push_back(make_random_forest(task, spec.trees, spec.max_depth));
    } else if (spec.kind == "knn") {
      suite.push_back(make_knn(task, spec.k));
    } else {
      throw ConfigError("unknown evaluator kind '" + spec.kind + "'");
    }
  }
  return suite;
}

std::vector<EvaluatorSpec> tune_suite_spec(const Table& train,
                                           const Table& validation,
                                           std::uint64_t seed) {
  if (validation.rows() == 0) throw ConfigError("evaluator tuning: empty validation");
  Task task = train.schema().task;
  bool higher_better = task != Task::regression;

  std::vector<EvaluatorSpec> chosen = default_suite_spec();
  std::size_t counter = 0;
  auto score = [&](const EvaluatorSpec& spec) {
    auto suite = build_suite(task, {spec});
    suite[0]->fit(train, derive_seed(seed, "evaluator_tune", counter++));
    double acc = accuracy(*suite[0], validation);
    return higher_better ? acc : -acc;
  };

  for (auto& spec : chosen) {
    std::vector<EvaluatorSpec> candidates;
    if (spec.kind == "decision_tree" || spec.kind == "random_forest") {
      for (std::size_t depth : {4, 8, 12}) {
        EvaluatorSpec c = spec;
        c.max_depth = depth;
        candidates.push_back(c);
      }
    } else if (spec.kind == "knn") {
      for (std::size_t k : {3, 5, 9}) {
        EvaluatorSpec c = spec;
        c.k = k;
        candidates.push_back(c);
      }
    } else {
      continue;  // linear model has no grid
    }
    std::size_t best = 0;
    double best_score = score(candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      double s = score(candidates[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    spec = candidates[best];
  }
  return chosen;
}

namespace {

double f1_of_class(const std::vector<double>& truth, const std::vector<double>& pred,
                   double cls) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    bool t = truth[i] == cls, p = pred[i] == cls;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

double accuracy(const Evaluator& fitted, const Table& test) {
  if (test.rows() == 0) throw Error("accuracy: empty test table");
  const Schema& schema = test.schema();
  auto pred = fitted.predict(test);
  std::vector<double> truth(test.rows());
  std::size_t target = schema.target_index();
  for (std::size_t r = 0; r < test.rows(); ++r) truth[r] = test.at(r, target);

  switch (schema.task) {
    case Task::binary_classification:
      return f1_of_class(truth, pred, 1.0);
    case Task::multiclass_classification: {
      std::size_t k = schema.attribute(target).cardinality();
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        sum += f1_of_class(truth, pred, static_cast<double>(c));
      }
      return sum / static_cast<double>(k);
    }
    case Task::regression: {
      double sum2 = 0.0;
      for (std::size_t r = 0; r < truth.size(); ++r) {
        double diff = pred[r] - truth[r];
        sum2 += diff * diff;
      }
      return std::sqrt(sum2 / static_cast<double>(truth.size()));
    }
  }
  throw Error("unknown task");
}

MlaResult mla(const Table& real_train, const Table& synthetic, const Table& test,
              std::vector<EvaluatorPtr>& suite, std::uint64_t seed) {
  if (suite.empty()) throw ConfigError("mla needs a non-empty evaluator suite");
  bool higher_better = real_train.schema().task != Task::regression;

  MlaResult result;
  double sum = 0.0;
  std::size_t included = 0;
  for (std::size_t e = 0; e < suite.size(); ++e) {
    auto& ev = *suite[e];
    std::uint64_t eseed = derive_seed(seed, "evaluator", e);
    ev.fit(real_train, eseed);
    double acc_real = accuracy(ev, test);
    ev.fit(synthetic, eseed);
    double acc_synth = accuracy(ev, test);

    MlaEntry entry;
    entry.name = ev.name();
    entry.acc_real = acc_real;
    entry.acc_synth = acc_synth;
    if (acc_real == 0.0) {
      entry.excluded = true;
      result.warnings.push_back(ev.name() +
                                " excluded: zero accuracy on real-trained model");
    } else {
      entry.gap = higher_better ? (acc_real - acc_synth) / acc_real
                                : (acc_synth - acc_real) / acc_real;
      sum += entry.gap;
      ++included;
    }
    result.per_evaluator.push_back(std::move(entry));
  }
  if (included == 0) throw Error("mla: every evaluator was excluded");
  result.mla = sum / static_cast<double>(included);
  return result;
}

MlaResult mla(const Table& real_train, const Table& synthetic, const Table& test,
              std::uint64_t seed) {
  auto suite = builtin_suite(real_train.schema().task);
  return mla(real_train, synthetic, test, suite, seed);
}

}  // namespace tabsyn
