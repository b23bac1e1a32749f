#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tabsyn {

enum class AttrKind { numerical, categorical };
enum class Task { binary_classification, multiclass_classification, regression };

std::string to_string(AttrKind kind);
std::string to_string(Task task);
AttrKind attr_kind_from_string(const std::string& s);
Task task_from_string(const std::string& s);

// One typed column. Numerical attributes carry a closed interval [lo, hi];
// categorical attributes carry an ordered list of distinct, non-empty labels.
struct AttributeSpec {
  std::string name;
  AttrKind kind = AttrKind::numerical;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::string> labels;

  bool is_numerical() const { return kind == AttrKind::numerical; }
  std::size_t cardinality() const { return labels.size(); }
  // Index of a label within the domain, or nullopt when unknown.
  std::optional<std::size_t> code_of(const std::string& label) const;
};

struct Schema {
  std::vector<AttributeSpec> attributes;
  std::string target;
  Task task = Task::binary_classification;

  std::size_t size() const { return attributes.size(); }
  // Attribute position by name; throws when absent.
  std::size_t index_of(const std::string& name) const;
  std::size_t target_index() const { return index_of(target); }
  const AttributeSpec& attribute(std::size_t i) const { return attributes[i]; }

  // Enforces the structural invariants: unique names, existing target,
  // task/target kind agreement, valid domains. Throws ConfigError.
  void validate() const;
};

using SchemaPtr = std::shared_ptr<const Schema>;

// Round-trip helpers for the JSON sidecar:
//   {"attributes": [{"name", "kind", "domain"}...], "target", "task"}
// Numerical domains serialize as [lo, hi], categorical ones as label arrays.
std::string schema_to_json(const Schema& schema);
Schema schema_from_json(const std::string& json_text);
void save_schema(const Schema& schema, const std::string& path);
SchemaPtr load_schema(const std::string& path);

// Rectangular dataset. Cells are stored row-major as doubles: the raw value
// for numerical attributes and the domain code for categorical ones. Tables
// are immutable after construction apart from row appends during building,
// and safe to read concurrently.
class Table {
 public:
  Table() = default;
  explicit Table(SchemaPtr schema) : schema_(std::move(schema)) {}

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return schema_ ? schema_->size() : 0; }
  const Schema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }

  double at(std::size_t row, std::size_t col) const {
    return cells_[row * cols() + col];
  }
  std::span<const double> row_span(std::size_t row) const {
    return {cells_.data() + row * cols(), cols()};
  }
  const std::vector<double>& cells() const { return cells_; }

  void append_row(std::span<const double> values);
  void reserve(std::size_t rows);

  // Renders a cell back to its external form (label or shortest numeral).
  std::string cell_text(std::size_t row, std::size_t col) const;
  // Label for a categorical code, looking through out-of-domain extras.
  std::string label_of(std::size_t col, double code) const;

  // Categorical values observed outside the schema domain (only produced by
  // lenient ingestion of external synthesizer output). Codes for these start
  // at the domain cardinality.
  const std::vector<std::vector<std::string>>& extra_labels() const {
    return extra_labels_;
  }
  double intern_extra_label(std::size_t col, const std::string& label);

  // Content fingerprint over schema shape + cell values in row order.
  std::uint64_t fingerprint() const;

 private:
  SchemaPtr schema_;
  std::vector<double> cells_;
  std::size_t n_rows_ = 0;
  std::vector<std::vector<std::string>> extra_labels_;
};

struct DataSplit {
  Table train;
  Table validation;
  Table test;
  std::uint64_t seed = 0;
};

// Min-max ranges actually used for scaling, one entry per attribute
// (categorical entries are inert).
struct NormalizationParams {
  std::vector<std::pair<double, double>> ranges;
};

struct DiscretizeResult {
  Table table;  // all-categorical view; bin labels are interval midpoints
  std::vector<std::vector<double>> edges;  // per original numerical attribute
};

// --- Operations ------------------------------------------------------------

// Parses and validates a CSV against the schema. The header row must match
// the schema attribute names in order. Errors carry 1-based row/column.
Table load_table(const std::string& csv_path, SchemaPtr schema);

// Types each column from its values: categorical when any token is
// non-numeric or the distinct count is <= categorical_threshold, numerical
// (domain = observed [min, max]) otherwise. The task is derived from the
// target column kind. Blank cells are rejected (no missing-value support).
Schema infer_schema(const std::string& csv_path, const std::string& target,
                    std::size_t categorical_threshold = 20);

// Uniform shuffle, then 20% test and 20% of the remainder as validation
// (sizes rounded half away from zero). Deterministic per (table, seed).
DataSplit split(const Table& table, std::uint64_t seed);

// Maps numerical attributes through (v - lo) / (hi - lo). Without params the
// table's own min/max are used. Constant attributes map to 0. Out-of-range
// inputs yield out-of-range outputs; nothing is clipped.
std::pair<Table, NormalizationParams> normalize(
    const Table& table, const std::optional<NormalizationParams>& params = {});

Table denormalize(const Table& table, const NormalizationParams& params);

// Equal-width binning of numerical attributes over the schema domain.
// Requires 2 <= bins <= 1024.
DiscretizeResult discretize(const Table& table, std::size_t bins);

void save_table_csv(const Table& table, const std::string& path);

// Ingestion that tolerates domain violations: numerical values outside
// [lo, hi] are kept, unknown categorical labels are interned as extra codes.
// Each tolerated violation is described in *violations. Parse failures still
// throw.
Table load_table_lenient(const std::string& csv_path, SchemaPtr schema,
                         std::vector<std::string>* violations);

}  // namespace tabsyn
