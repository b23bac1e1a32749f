#pragma once

// Shared test data builders. Everything here is deterministic per seed.

#include <sys/stat.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tabsyn/dataset.hpp"
#include "tabsyn/marginals.hpp"
#include "tabsyn/rng.hpp"
#include "tabsyn/synth.hpp"

namespace fixtures {

using namespace tabsyn;

inline AttributeSpec num_attr(const std::string& name, double lo, double hi) {
  return {name, AttrKind::numerical, lo, hi, {}};
}

inline AttributeSpec cat_attr(const std::string& name,
                              std::vector<std::string> labels) {
  return {name, AttrKind::categorical, 0.0, 0.0, std::move(labels)};
}

inline SchemaPtr make_schema(std::vector<AttributeSpec> attrs,
                             const std::string& target, Task task) {
  Schema schema;
  schema.attributes = std::move(attrs);
  schema.target = target;
  schema.task = task;
  schema.validate();
  return std::make_shared<const Schema>(std::move(schema));
}

// Two numerical in [0,1] + one 3-label categorical target.
inline SchemaPtr mixed_schema() {
  return make_schema({num_attr("x", 0.0, 1.0), num_attr("y", 0.0, 1.0),
                      cat_attr("label", {"a", "b", "c"})},
                     "label", Task::multiclass_classification);
}

// Independent uniform fill over each attribute's domain.
inline Table random_table(const SchemaPtr& schema, std::size_t rows,
                          std::uint64_t seed) {
  Table t(schema);
  t.reserve(rows);
  Rng rng(seed);
  std::vector<double> row(schema->size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < schema->size(); ++c) {
      const auto& attr = schema->attribute(c);
      row[c] = attr.is_numerical()
                   ? rng.uniform(attr.lo, attr.hi)
                   : static_cast<double>(rng.below(attr.cardinality()));
    }
    t.append_row(row);
  }
  return t;
}

// 4 attributes (2 numerical, 2 categorical) with strong cross-attribute
// dependence: a latent uniform z drives everything. correlation ~ rho
// between the numerical pair; the categorical pair follows z's quartiles.
inline Table correlated_table(std::size_t rows, std::uint64_t seed,
                              double rho = 0.9) {
  auto schema = make_schema(
      {num_attr("u", 0.0, 1.0), num_attr("v", 0.0, 1.0),
       cat_attr("p", {"p0", "p1", "p2", "p3"}), cat_attr("q", {"lo", "hi"})},
      "q", Task::binary_classification);
  Table t(schema);
  t.reserve(rows);
  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = rng.uniform();
    double noise = rng.uniform();
    double u = z;
    double v = rho * z + (1.0 - rho) * noise;
    auto p = static_cast<double>(std::min<std::size_t>(
        3, static_cast<std::size_t>(z * 4.0)));
    double q = z > 0.5 ? 1.0 : 0.0;
    t.append_row(std::vector<double>{u, v, p, q});
  }
  return t;
}

// Sharp two-mode numerical attribute plus a mode-following categorical and a
// mode-indicator target. Coarse equal-width binning smears the modes.
inline Table bimodal_table(std::size_t rows, std::uint64_t seed,
                           double m0 = 0.15, double m1 = 0.85,
                           double sigma = 0.02) {
  auto schema = make_schema({num_attr("x", 0.0, 1.0),
                             cat_attr("c", {"c0", "c1"}),
                             cat_attr("t", {"neg", "pos"})},
                            "t", Task::binary_classification);
  Table t(schema);
  t.reserve(rows);
  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r) {
    bool hi = rng.below(2) == 1;
    double x = (hi ? m1 : m0) + sigma * rng.normal();
    x = std::min(1.0, std::max(0.0, x));
    double follow = rng.uniform() < 0.9 ? 1.0 : 0.0;
    double c = hi ? follow : 1.0 - follow;
    t.append_row(std::vector<double>{x, c, hi ? 1.0 : 0.0});
  }
  return t;
}

// Self-deleting scratch directory.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path() / "tabsyn_test_XXXXXX";
    std::string tmpl = base.string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw std::runtime_error("mkdtemp failed for " + tmpl);
    }
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

// Distribution over explicit tuples; weights are normalized here.
inline MarginalDistribution make_marginal(std::vector<std::size_t> attr_indices,
                                          std::vector<std::vector<double>> tuples,
                                          std::vector<double> weights) {
  MarginalDistribution dist;
  dist.variable.attr_indices = std::move(attr_indices);
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  dist.weights = std::move(weights);
  for (const auto& tuple : tuples) {
    for (double v : tuple) dist.support.push_back(v);
  }
  dist.source_rows = dist.weights.size();
  return dist;
}

// Ignores its training data: always emits the same fixed row. The
// data-independence limit for membership disclosure.
class ConstantSynthesizer final : public Synthesizer {
 public:
  ConstantSynthesizer(SchemaPtr schema, std::vector<double> row)
      : schema_(std::move(schema)), row_(std::move(row)) {}

  Table sample(std::size_t n, std::uint64_t) const override {
    Table t(schema_);
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.append_row(row_);
    return t;
  }

  const SchemaPtr& schema() const override { return schema_; }
  std::string describe() const override { return "constant"; }

 private:
  SchemaPtr schema_;
  std::vector<double> row_;
};

inline SynthesizerFactory constant_factory(std::vector<double> row) {
  return [row = std::move(row)](const Table& train, std::uint64_t) {
    return std::make_unique<ConstantSynthesizer>(train.schema_ptr(), row);
  };
}

// Writes an executable shell script; caller owns the path's directory.
inline void write_script(const std::string& path, const std::string& body) {
  {
    std::ofstream out(path, std::ios::binary);
    out << "#!/bin/sh\n" << body;
  }
  ::chmod(path.c_str(), 0755);
}

}  // namespace fixtures
