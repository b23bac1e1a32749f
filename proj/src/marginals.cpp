#include "tabsyn/marginals.hpp"

#include <algorithm>
#include <map>

#include "tabsyn/errors.hpp"
#include "tabsyn/kernels.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

std::string MarginalVariable::key(const Schema& schema) const {
  std::string out;
  for (std::size_t i = 0; i < attr_indices.size(); ++i) {
    if (i) out += ',';
    out += schema.attribute(attr_indices[i]).name;
  }
  return out;
}

double CostMatrix::mean() const {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (double e : entries) sum += e;
  return sum / static_cast<double>(entries.size());
}

double CostMatrix::max() const {
  double m = 0.0;
  for (double e : entries) m = std::max(m, e);
  return m;
}

MarginalSet enumerate_marginals(const Schema& schema, std::size_t max_order) {
  std::size_t d = schema.size();
  if (max_order < 1 || max_order > d) {
    throw ConfigError("marginal order must be in [1, " + std::to_string(d) +
                      "], got " + std::to_string(max_order));
  }
  MarginalSet set;
  // Subsets emitted by size, then lexicographically by index tuple.
  std::vector<std::size_t> combo;
  for (std::size_t k = 1; k <= max_order; ++k) {
    combo.assign(k, 0);
    for (std::size_t i = 0; i < k; ++i) combo[i] = i;
    for (;;) {
      set.variables.push_back({combo});
      // Advance to the next k-combination of [0, d).
      std::size_t i = k;
      while (i > 0 && combo[i - 1] == d - k + (i - 1)) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }
  }
  return set;
}

MarginalDistribution extract_marginal(const Table& table,
                                      const MarginalVariable& variable,
                                      const std::optional<SubsampleSpec>& subsample) {
  if (table.rows() == 0) throw Error("extract_marginal: empty table");
  const Schema& schema = table.schema();
  for (std::size_t idx : variable.attr_indices) {
    if (idx >= schema.size()) throw ConfigError("marginal attribute index out of range");
  }
  std::size_t k = variable.order();

  bool all_categorical = true;
  for (std::size_t idx : variable.attr_indices) {
    if (schema.attribute(idx).is_numerical()) all_categorical = false;
  }

  MarginalDistribution dist;
  dist.variable = variable;
  dist.source_rows = table.rows();

  if (all_categorical) {
    // Exact frequencies over distinct tuples; map keys give a sorted,
    // deterministic support order.
    std::map<std::vector<double>, std::size_t> counts;
    std::vector<double> tup(k);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      for (std::size_t a = 0; a < k; ++a) tup[a] = table.at(r, variable.attr_indices[a]);
      ++counts[tup];
    }
    auto total = static_cast<double>(table.rows());
    for (const auto& [tuple, count] : counts) {
      dist.support.insert(dist.support.end(), tuple.begin(), tuple.end());
      dist.weights.push_back(static_cast<double>(count) / total);
    }
    return dist;
  }

  std::vector<std::size_t> rows;
  if (subsample && subsample->count < table.rows()) {
    Rng rng(subsample->seed);
    rows = rng.sample_without_replacement(table.rows(), subsample->count);
    std::sort(rows.begin(), rows.end());
    dist.subsampled = true;
  } else {
    rows.resize(table.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  }

  dist.support.reserve(rows.size() * k);
  dist.weights.assign(rows.size(), 1.0 / static_cast<double>(rows.size()));
  for (std::size_t r : rows) {
    for (std::size_t a = 0; a < k; ++a) {
      dist.support.push_back(table.at(r, variable.attr_indices[a]));
    }
  }
  return dist;
}

CostMatrix build_cost_matrix(const MarginalDistribution& p,
                             const MarginalDistribution& q,
                             const Schema& schema) {
  if (!(p.variable == q.variable)) {
    throw ConfigError("cost matrix requires matching marginal variables");
  }
  std::size_t k = p.variable.order();
  std::vector<std::uint8_t> mask(k);
  for (std::size_t a = 0; a < k; ++a) {
    mask[a] = schema.attribute(p.variable.attr_indices[a]).is_numerical() ? 0 : 1;
  }
  CostMatrix c;
  c.rows = p.size();
  c.cols = q.size();
  c.entries.resize(c.rows * c.cols);
  fill_cost_matrix(p.support, c.rows, q.support, c.cols, mask, c.entries);
  return c;
}

}  // namespace tabsyn
