#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tabsyn/dataset.hpp"

namespace tabsyn {

// A trainable prediction model over a Table. fit() replaces any previous
// state; predict() returns a class code (classification) or value
// (regression) per row. Both are deterministic given (train, seed).
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::string name() const = 0;
  virtual void fit(const Table& train, std::uint64_t seed) = 0;
  virtual std::vector<double> predict(const Table& rows) const = 0;
};

using EvaluatorPtr = std::unique_ptr<Evaluator>;

// {linear model for the task, depth-8 decision tree, 25-tree random forest,
// 5-nearest-neighbors}. Categorical features are one-hot encoded over the
// schema domain, numerical ones min-max normalized by the fitted table.
std::vector<EvaluatorPtr> builtin_suite(Task task);

EvaluatorPtr make_linear(Task task);
EvaluatorPtr make_decision_tree(Task task, std::size_t max_depth = 8);
EvaluatorPtr make_random_forest(Task task, std::size_t trees = 25,
                                std::size_t max_depth = 8);
EvaluatorPtr make_knn(Task task, std::size_t k = 5);

// One suite member's family and hyperparameters (unused fields are inert).
struct EvaluatorSpec {
  std::string kind;  // "linear" | "decision_tree" | "random_forest" | "knn"
  std::size_t max_depth = 8;
  std::size_t trees = 25;
  std::size_t k = 5;
};

std::vector<EvaluatorSpec> default_suite_spec();
std::vector<EvaluatorPtr> build_suite(Task task,
                                      const std::vector<EvaluatorSpec>& specs);

// Small per-family hyperparameter grids scored on real data only (fit on
// train, score on validation); ties keep the earlier candidate. The chosen
// suite is then reused as-is for both real- and synthetic-trained models.
std::vector<EvaluatorSpec> tune_suite_spec(const Table& train,
                                           const Table& validation,
                                           std::uint64_t seed);

// Binary classification: F1 of the positive class (label code 1);
// multiclass: macro-F1; regression: RMSE.
double accuracy(const Evaluator& fitted, const Table& test);

struct MlaEntry {
  std::string name;
  double acc_real = 0.0;
  double acc_synth = 0.0;
  double gap = 0.0;
  bool excluded = false;
};

struct MlaResult {
  double mla = 0.0;
  std::vector<MlaEntry> per_evaluator;
  std::vector<std::string> warnings;
};

// Suite-averaged relative accuracy gap. For F1 the gap is
// (real - synth) / real; for RMSE it is (synth - real) / real, so lower MLA
// always means better utility. Evaluators with zero real accuracy are
// excluded with a warning.
MlaResult mla(const Table& real_train, const Table& synthetic, const Table& test,
              std::vector<EvaluatorPtr>& suite, std::uint64_t seed);
MlaResult mla(const Table& real_train, const Table& synthetic, const Table& test,
              std::uint64_t seed);

}  // namespace tabsyn
