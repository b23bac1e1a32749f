#include <doctest.h>

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tabsyn/errors.hpp"
#include "tabsyn/evaluators.hpp"
#include "tabsyn/queries.hpp"

using namespace tabsyn;
using namespace fixtures;

namespace {

// Fixed-function model: fit() remembers the first training cell so predict()
// can behave differently for real- and synthetic-trained copies.
class StubEvaluator final : public Evaluator {
 public:
  using PredictFn = std::function<std::vector<double>(const Table&, double)>;
  StubEvaluator(std::string name, PredictFn fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}

  std::string name() const override { return name_; }
  void fit(const Table& train, std::uint64_t) override {
    marker_ = train.rows() > 0 ? train.at(0, 0) : 0.0;
  }
  std::vector<double> predict(const Table& rows) const override {
    return fn_(rows, marker_);
  }

 private:
  std::string name_;
  PredictFn fn_;
  double marker_ = 0.0;
};

EvaluatorPtr stub(std::string name, StubEvaluator::PredictFn fn) {
  return std::make_unique<StubEvaluator>(std::move(name), std::move(fn));
}

SchemaPtr binary_schema() {
  return make_schema({num_attr("x", 0.0, 1.0), cat_attr("t", {"neg", "pos"})},
                     "t", Task::binary_classification);
}

Table binary_rows(const SchemaPtr& schema, const std::vector<double>& targets) {
  Table t(schema);
  for (double y : targets) t.append_row(std::vector<double>{0.5, y});
  return t;
}

std::vector<std::string> suite_names(const std::vector<EvaluatorPtr>& suite) {
  std::vector<std::string> names;
  for (const auto& ev : suite) names.push_back(ev->name());
  return names;
}

bool same_workload(const Workload& a, const Workload& b) {
  if (a.queries.size() != b.queries.size()) return false;
  for (std::size_t q = 0; q < a.queries.size(); ++q) {
    const auto& ca = a.queries[q].conditions;
    const auto& cb = b.queries[q].conditions;
    if (ca.size() != cb.size()) return false;
    for (std::size_t i = 0; i < ca.size(); ++i) {
      if (ca[i].attr != cb[i].attr || ca[i].categorical != cb[i].categorical ||
          ca[i].value != cb[i].value || ca[i].lo != cb[i].lo || ca[i].hi != cb[i].hi) {
        return false;
      }
    }
  }
  return true;
}

CountingQuery numeric_range(std::size_t attr, double lo, double hi) {
  CountingQuery q;
  QueryCondition cond;
  cond.attr = attr;
  cond.lo = lo;
  cond.hi = hi;
  q.conditions.push_back(cond);
  return q;
}

CountingQuery category_equals(std::size_t attr, double code) {
  CountingQuery q;
  QueryCondition cond;
  cond.attr = attr;
  cond.categorical = true;
  cond.value = code;
  q.conditions.push_back(cond);
  return q;
}

}  // namespace

TEST_CASE("builtin suite holds the four model families") {
  auto classify = builtin_suite(Task::binary_classification);
  CHECK(suite_names(classify) ==
        std::vector<std::string>{"logistic_regression", "decision_tree",
                                 "random_forest", "knn"});
  auto regress = builtin_suite(Task::regression);
  CHECK(suite_names(regress) ==
        std::vector<std::string>{"ridge_regression", "decision_tree",
                                 "random_forest", "knn"});
}

TEST_CASE("default suite spec builds the same suite") {
  auto specs = default_suite_spec();
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].kind == "linear");
  CHECK(specs[1].kind == "decision_tree");
  CHECK(specs[2].kind == "random_forest");
  CHECK(specs[3].kind == "knn");
  auto suite = build_suite(Task::multiclass_classification, specs);
  CHECK(suite_names(suite) == suite_names(builtin_suite(Task::multiclass_classification)));

  std::vector<EvaluatorSpec> bad = {{"gradient_boosting", 8, 25, 5}};
  CHECK_THROWS_AS(build_suite(Task::regression, bad), ConfigError);
}

TEST_CASE("every builtin evaluator separates an easy binary task") {
  auto table = bimodal_table(500, 5);
  auto sp = split(table, 1);
  auto suite = builtin_suite(Task::binary_classification);
  for (auto& ev : suite) {
    ev->fit(sp.train, 17);
    double f1 = accuracy(*ev, sp.test);
    INFO(ev->name());
    CHECK(f1 >= 0.95);
  }
}

TEST_CASE("binary accuracy equals the confusion-matrix oracle") {
  auto schema = binary_schema();
  auto test = binary_rows(schema, {1, 1, 1, 1, 1, 0, 0, 0, 0, 0});
  auto always_pos = stub("always_pos", [](const Table& rows, double) {
    return std::vector<double>(rows.rows(), 1.0);
  });
  always_pos->fit(test, 0);
  // Predicting the positive class everywhere: tp=5, fp=5, fn=0.
  CHECK(accuracy(*always_pos, test) ==
        doctest::Approx(oracles::f1_from_counts(5, 5, 0)).epsilon(1e-12));
  CHECK(accuracy(*always_pos, test) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("multiclass accuracy equals the macro-F1 oracle") {
  auto table = random_table(mixed_schema(), 90, 31);
  std::size_t target = table.schema().target_index();
  auto cycler = stub("cycler", [](const Table& rows, double) {
    std::vector<double> pred(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      pred[r] = static_cast<double>((r * 7 + 3) % 3);
    }
    return pred;
  });
  cycler->fit(table, 0);
  std::vector<double> truth(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) truth[r] = table.at(r, target);
  auto pred = cycler->predict(table);
  CHECK(accuracy(*cycler, table) ==
        doctest::Approx(oracles::macro_f1_oracle(truth, pred, 3)).epsilon(1e-12));
}

TEST_CASE("regression accuracy is the root mean squared error") {
  auto schema = make_schema({num_attr("x", 0.0, 1.0), num_attr("y", 0.0, 10.0)},
                            "y", Task::regression);
  Table test(schema);
  for (double y : {1.0, 2.0, 3.0, 4.0}) {
    test.append_row(std::vector<double>{0.5, y});
  }
  auto mean_model = stub("mean_model", [](const Table& rows, double) {
    return std::vector<double>(rows.rows(), 2.5);
  });
  mean_model->fit(test, 0);
  // Predicting the mean makes RMSE the population standard deviation.
  CHECK(accuracy(*mean_model, test) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));

  Table empty(schema);
  CHECK_THROWS_AS(accuracy(*mean_model, empty), Error);
}

TEST_CASE("mla of real data against itself is zero") {
  auto table = bimodal_table(300, 7);
  auto sp = split(table, 2);
  auto result = mla(sp.train, sp.train, sp.test, 99);
  CHECK(std::fabs(result.mla) <= 1e-12);
  REQUIRE(result.per_evaluator.size() == 4);
  for (const auto& entry : result.per_evaluator) {
    CHECK(entry.acc_real == entry.acc_synth);
    CHECK(entry.gap == 0.0);
    CHECK_FALSE(entry.excluded);
  }
  CHECK(result.warnings.empty());
}

TEST_CASE("a fixed ten percent accuracy drop yields mla one tenth") {
  auto schema = binary_schema();
  // The stub keys off the first training cell: 0 marks real, 1 marks synthetic.
  Table real(schema);
  Table synth(schema);
  for (std::size_t r = 0; r < 4; ++r) {
    real.append_row(std::vector<double>{0.0, static_cast<double>(r % 2)});
    synth.append_row(std::vector<double>{1.0, static_cast<double>(r % 2)});
  }
  auto test = binary_rows(schema, std::vector<double>(11, 1.0));

  std::vector<EvaluatorPtr> suite;
  suite.push_back(stub("drop_two", [](const Table& rows, double marker) {
    std::vector<double> pred(rows.rows(), 1.0);
    if (marker == 1.0) {
      pred[rows.rows() - 1] = 0.0;
      pred[rows.rows() - 2] = 0.0;
    }
    return pred;
  }));
  auto result = mla(real, synth, test, suite, 0);
  // Real-trained F1 is 1; synthetic-trained recall 9/11 gives F1 = 0.9.
  CHECK(result.per_evaluator[0].acc_real == 1.0);
  CHECK(result.per_evaluator[0].acc_synth == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(result.mla == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("destroying the target signal inflates mla") {
  auto table = bimodal_table(400, 9);
  auto sp = split(table, 3);
  std::size_t target = sp.train.schema().target_index();

  // Same rows, target column permuted: features keep their marginals but
  // carry no label information.
  std::vector<double> labels(sp.train.rows());
  for (std::size_t r = 0; r < sp.train.rows(); ++r) {
    labels[r] = sp.train.at(r, target);
  }
  Rng rng(33);
  for (std::size_t i = labels.size() - 1; i > 0; --i) {
    std::swap(labels[i], labels[rng.below(i + 1)]);
  }
  Table shuffled(sp.train.schema_ptr());
  std::vector<double> row;
  for (std::size_t r = 0; r < sp.train.rows(); ++r) {
    auto span = sp.train.row_span(r);
    row.assign(span.begin(), span.end());
    row[target] = labels[r];
    shuffled.append_row(row);
  }

  auto result = mla(sp.train, shuffled, sp.test, 99);
  CHECK(result.mla >= 0.2);
}

TEST_CASE("zero-accuracy evaluators are excluded with a warning") {
  auto schema = binary_schema();
  auto train = binary_rows(schema, {0, 1, 0, 1});
  auto test = binary_rows(schema, {1, 1, 1, 0});
  std::size_t target = schema->target_index();

  auto dud_fn = [](const Table& rows, double) {
    return std::vector<double>(rows.rows(), 0.0);
  };
  auto echo_fn = [target](const Table& rows, double) {
    std::vector<double> pred(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) pred[r] = rows.at(r, target);
    return pred;
  };

  std::vector<EvaluatorPtr> suite;
  suite.push_back(stub("dud", dud_fn));
  suite.push_back(stub("echo", echo_fn));
  auto result = mla(train, train, test, suite, 0);
  CHECK(result.per_evaluator[0].excluded);
  CHECK_FALSE(result.per_evaluator[1].excluded);
  CHECK(result.mla == 0.0);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("dud") != std::string::npos);
  CHECK(result.warnings[0].find("zero accuracy") != std::string::npos);

  std::vector<EvaluatorPtr> all_duds;
  all_duds.push_back(stub("dud", dud_fn));
  CHECK_THROWS_AS(mla(train, train, test, all_duds, 0), Error);

  std::vector<EvaluatorPtr> none;
  CHECK_THROWS_AS(mla(train, train, test, none, 0), ConfigError);
}

TEST_CASE("workload generation is deterministic and well-shaped") {
  auto schema_ptr = mixed_schema();
  const Schema& schema = *schema_ptr;
  auto w = generate_workload(schema, 2, 50, 11);
  CHECK(w.k == 2);
  CHECK(w.seed == 11);
  REQUIRE(w.queries.size() == 50);
  for (const auto& q : w.queries) {
    REQUIRE(q.conditions.size() == 2);
    for (std::size_t i = 0; i < q.conditions.size(); ++i) {
      const auto& cond = q.conditions[i];
      if (i > 0) CHECK(q.conditions[i - 1].attr < cond.attr);
      const auto& attr = schema.attribute(cond.attr);
      if (attr.is_numerical()) {
        CHECK_FALSE(cond.categorical);
        CHECK(cond.lo >= attr.lo);
        CHECK(cond.hi <= attr.hi);
        CHECK(cond.lo <= cond.hi);
      } else {
        CHECK(cond.categorical);
        CHECK(cond.value == std::floor(cond.value));
        CHECK(cond.value >= 0.0);
        CHECK(cond.value < static_cast<double>(attr.cardinality()));
      }
    }
  }
  CHECK(same_workload(w, generate_workload(schema, 2, 50, 11)));
  CHECK_FALSE(same_workload(w, generate_workload(schema, 2, 50, 12)));

  auto full = generate_workload(schema, 3, 10, 1);
  for (const auto& q : full.queries) CHECK(q.conditions.size() == 3);
}

TEST_CASE("workload generation rejects impossible shapes") {
  auto schema = mixed_schema();
  CHECK_THROWS_AS(generate_workload(*schema, 0, 10, 1), ConfigError);
  CHECK_THROWS_AS(generate_workload(*schema, 4, 10, 1), ConfigError);
  CHECK_THROWS_AS(generate_workload(*schema, 2, 0, 1), ConfigError);
}

TEST_CASE("execute_query matches the set-intersection oracle exactly") {
  auto table = random_table(mixed_schema(), 200, 13);
  for (std::size_t k = 1; k <= 3; ++k) {
    auto w = generate_workload(table.schema(), k, 40, 100 + k);
    for (const auto& q : w.queries) {
      CHECK(execute_query(q, table) == oracles::counting_oracle(q, table));
    }
  }
}

TEST_CASE("query answer edge cases") {
  auto table = random_table(mixed_schema(), 50, 15);
  CHECK(execute_query(numeric_range(0, 0.0, 1.0), table) == 1.0);
  CHECK(execute_query(category_equals(2, 99.0), table) == 0.0);

  Table empty(table.schema_ptr());
  CHECK_THROWS_AS(execute_query(numeric_range(0, 0.0, 1.0), empty), Error);
  CHECK_THROWS_AS(execute_query(numeric_range(7, 0.0, 1.0), table), ConfigError);
}

TEST_CASE("query ranges are inclusive on both ends") {
  auto schema = binary_schema();
  Table t(schema);
  for (double x : {0.1, 0.5, 0.9, 1.0}) {
    t.append_row(std::vector<double>{x, 0.0});
  }
  CHECK(execute_query(numeric_range(0, 0.5, 0.5), t) == 0.25);
  CHECK(execute_query(numeric_range(0, 0.1, 0.9), t) == 0.75);
  CHECK(execute_query(numeric_range(0, 0.10001, 0.9), t) == 0.5);
}

TEST_CASE("query error is zero on identity, bounded, and symmetric") {
  auto schema = mixed_schema();
  auto a = random_table(schema, 150, 41);
  auto b = random_table(schema, 120, 42);
  auto c = random_table(schema, 100, 43);
  auto w = generate_workload(*schema, 2, 100, 7);

  CHECK(query_error(w, a, a) == 0.0);
  double ab = query_error(w, a, b);
  CHECK(ab >= 0.0);
  CHECK(ab <= 1.0);
  CHECK(ab == query_error(w, b, a));
  CHECK(query_error(w, a, c) <= ab + query_error(w, b, c) + 1e-12);
}

TEST_CASE("query error reproduces a hand-computed mean") {
  auto schema = binary_schema();
  Table real(schema);
  real.append_row(std::vector<double>{0.1, 0.0});
  real.append_row(std::vector<double>{0.5, 0.0});
  real.append_row(std::vector<double>{0.9, 1.0});
  real.append_row(std::vector<double>{1.0, 1.0});
  Table synth(schema);
  synth.append_row(std::vector<double>{0.5, 0.0});
  synth.append_row(std::vector<double>{0.5, 1.0});
  synth.append_row(std::vector<double>{0.5, 1.0});
  synth.append_row(std::vector<double>{0.5, 1.0});

  Workload w;
  w.queries.push_back(numeric_range(0, 0.0, 0.5));  // |0.5 - 1.0|  = 0.50
  w.queries.push_back(numeric_range(0, 0.9, 1.0));  // |0.5 - 0.0|  = 0.50
  w.queries.push_back(category_equals(1, 0.0));     // |0.5 - 0.25| = 0.25
  auto both = numeric_range(0, 0.0, 1.0);
  both.conditions.push_back(category_equals(1, 0.0).conditions[0]);
  w.queries.push_back(both);                        // |0.5 - 0.25| = 0.25

  CHECK(query_error(w, real, synth) == 0.375);

  Workload empty;
  CHECK_THROWS_AS(query_error(empty, real, synth), ConfigError);
}

TEST_CASE("suite tuning picks from the fixed grids deterministically") {
  auto table = bimodal_table(320, 21);
  auto sp = split(table, 4);
  auto tuned = tune_suite_spec(sp.train, sp.validation, 5);
  REQUIRE(tuned.size() == 4);
  CHECK(tuned[0].kind == "linear");
  CHECK(tuned[0].max_depth == 8);  // linear has no grid: spec untouched
  CHECK(tuned[0].trees == 25);
  CHECK(tuned[0].k == 5);
  for (std::size_t depth_slot : {1u, 2u}) {
    bool in_grid = tuned[depth_slot].max_depth == 4 ||
                   tuned[depth_slot].max_depth == 8 ||
                   tuned[depth_slot].max_depth == 12;
    CHECK(in_grid);
  }
  CHECK((tuned[3].k == 3 || tuned[3].k == 5 || tuned[3].k == 9));

  auto again = tune_suite_spec(sp.train, sp.validation, 5);
  REQUIRE(again.size() == tuned.size());
  for (std::size_t i = 0; i < tuned.size(); ++i) {
    CHECK(again[i].kind == tuned[i].kind);
    CHECK(again[i].max_depth == tuned[i].max_depth);
    CHECK(again[i].trees == tuned[i].trees);
    CHECK(again[i].k == tuned[i].k);
  }

  Table empty_val(sp.train.schema_ptr());
  CHECK_THROWS_AS(tune_suite_spec(sp.train, empty_val, 5), ConfigError);
}
