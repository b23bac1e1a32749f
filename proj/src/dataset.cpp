#include "tabsyn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "tabsyn/csv.hpp"
#include "tabsyn/errors.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

using json = nlohmann::json;

std::string to_string(AttrKind kind) {
  return kind == AttrKind::numerical ? "numerical" : "categorical";
}

std::string to_string(Task task) {
  switch (task) {
    case Task::binary_classification: return "binary_classification";
    case Task::multiclass_classification: return "multiclass_classification";
    case Task::regression: return "regression";
  }
  return "unknown";
}

AttrKind attr_kind_from_string(const std::string& s) {
  if (s == "numerical") return AttrKind::numerical;
  if (s == "categorical") return AttrKind::categorical;
  throw ConfigError("unknown attribute kind: " + s);
}

Task task_from_string(const std::string& s) {
  if (s == "binary_classification") return Task::binary_classification;
  if (s == "multiclass_classification") return Task::multiclass_classification;
  if (s == "regression") return Task::regression;
  throw ConfigError("unknown task: " + s);
}

std::optional<std::size_t> AttributeSpec::code_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == name) return i;
  }
  throw ConfigError("schema has no attribute named '" + name + "'");
}

void Schema::validate() const {
  if (attributes.empty()) throw ConfigError("schema has no attributes");
  std::unordered_set<std::string> seen;
  for (const auto& a : attributes) {
    if (a.name.empty()) throw ConfigError("attribute with empty name");
    if (!seen.insert(a.name).second) {
      throw ConfigError("duplicate attribute name: " + a.name);
    }
    if (a.is_numerical()) {
      if (!(a.lo <= a.hi)) {
        throw ConfigError("attribute '" + a.name + "': domain lo > hi");
      }
    } else {
      if (a.labels.empty()) {
        throw ConfigError("attribute '" + a.name + "': empty categorical domain");
      }
      std::unordered_set<std::string> uniq;
      for (const auto& l : a.labels) {
        if (l.empty()) throw ConfigError("attribute '" + a.name + "': empty label");
        if (!uniq.insert(l).second) {
          throw ConfigError("attribute '" + a.name + "': duplicate label '" + l + "'");
        }
      }
    }
  }
  const auto& tgt = attributes[index_of(target)];
  bool target_numeric = tgt.is_numerical();
  if (task == Task::regression && !target_numeric) {
    throw ConfigError("regression task requires a numerical target");
  }
  if (task != Task::regression && target_numeric) {
    throw ConfigError("classification task requires a categorical target");
  }
}

std::string schema_to_json(const Schema& schema) {
  json j;
  j["attributes"] = json::array();
  for (const auto& a : schema.attributes) {
    json ja;
    ja["name"] = a.name;
    ja["kind"] = to_string(a.kind);
    if (a.is_numerical()) {
      ja["domain"] = json::array({a.lo, a.hi});
    } else {
      ja["domain"] = a.labels;
    }
    j["attributes"].push_back(ja);
  }
  j["target"] = schema.target;
  j["task"] = to_string(schema.task);
  return j.dump(2);
}

Schema schema_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema json: ") + e.what());
  }
  Schema schema;
  if (!j.contains("attributes") || !j["attributes"].is_array()) {
    throw ParseError("schema json: missing 'attributes' array");
  }
  for (const auto& ja : j["attributes"]) {
    AttributeSpec a;
    a.name = ja.at("name").get<std::string>();
    a.kind = attr_kind_from_string(ja.at("kind").get<std::string>());
    const auto& dom = ja.at("domain");
    if (a.is_numerical()) {
      if (!dom.is_array() || dom.size() != 2) {
        throw ParseError("schema json: numerical domain must be [lo, hi]");
      }
      a.lo = dom[0].get<double>();
      a.hi = dom[1].get<double>();
    } else {
      a.labels = dom.get<std::vector<std::string>>();
    }
    schema.attributes.push_back(std::move(a));
  }
  schema.target = j.at("target").get<std::string>();
  schema.task = task_from_string(j.at("task").get<std::string>());
  schema.validate();
  return schema;
}

void save_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write schema file: " + path);
  out << schema_to_json(schema) << '\n';
}

SchemaPtr load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::make_shared<const Schema>(schema_from_json(buf.str()));
}

void Table::append_row(std::span<const double> values) {
  if (values.size() != cols()) throw Error("row width does not match schema");
  cells_.insert(cells_.end(), values.begin(), values.end());
  ++n_rows_;
}

void Table::reserve(std::size_t rows) { cells_.reserve(rows * cols()); }

namespace {

std::string format_double(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Trim to the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

std::string Table::cell_text(std::size_t row, std::size_t col) const {
  double v = at(row, col);
  const auto& attr = schema_->attribute(col);
  if (attr.is_numerical()) return format_double(v);
  return label_of(col, v);
}

std::string Table::label_of(std::size_t col, double code) const {
  const auto& attr = schema_->attribute(col);
  auto idx = static_cast<std::size_t>(code);
  if (idx < attr.labels.size()) return attr.labels[idx];
  std::size_t extra = idx - attr.labels.size();
  if (col < extra_labels_.size() && extra < extra_labels_[col].size()) {
    return extra_labels_[col][extra];
  }
  throw Error("categorical code out of range");
}

double Table::intern_extra_label(std::size_t col, const std::string& label) {
  if (extra_labels_.empty()) extra_labels_.resize(cols());
  auto& extras = extra_labels_[col];
  const auto& attr = schema_->attribute(col);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    if (extras[i] == label) return static_cast<double>(attr.labels.size() + i);
  }
  extras.push_back(label);
  return static_cast<double>(attr.labels.size() + extras.size() - 1);
}

std::uint64_t Table::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(n_rows_);
  mix(cols());
  for (double c : cells_) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(c));
    std::memcpy(&bits, &c, sizeof(bits));
    mix(bits);
  }
  return h;
}

Table load_table(const std::string& csv_path, SchemaPtr schema) {
  schema->validate();
  auto records = csv::read_file(csv_path);
  if (records.empty()) throw ParseError("csv is empty: " + csv_path);

  const auto& header = records[0];
  if (header.size() != schema->size()) {
    throw ParseError("header has " + std::to_string(header.size()) +
                     " columns, schema expects " + std::to_string(schema->size()));
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema->attribute(c).name) {
      throw ParseError("header mismatch at column " + std::to_string(c + 1) +
                       ": got '" + header[c] + "', expected '" +
                       schema->attribute(c).name + "'");
    }
  }

  Table table(schema);
  table.reserve(records.size() - 1);
  std::vector<double> row(schema->size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != schema->size()) {
      throw ParseError("row " + std::to_string(r + 1) + " has " +
                       std::to_string(rec.size()) + " fields, expected " +
                       std::to_string(schema->size()));
    }
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const auto& attr = schema->attribute(c);
      const std::string& cell = rec[c];
      if (attr.is_numerical()) {
        double v;
        if (!parse_double(cell, &v)) {
          throw ParseError("row " + std::to_string(r + 1) + ", column '" +
                           attr.name + "': cannot parse '" + cell +
                           "' as a number");
        }
        if (v < attr.lo || v > attr.hi) {
          throw DomainError("row " + std::to_string(r + 1) + ", column '" +
                            attr.name + "': value " + cell +
                            " outside domain [" + format_double(attr.lo) + ", " +
                            format_double(attr.hi) + "]");
        }
        row[c] = v;
      } else {
        auto code = attr.code_of(cell);
        if (!code) {
          throw DomainError("row " + std::to_string(r + 1) + ", column '" +
                            attr.name + "': label '" + cell +
                            "' not in domain");
        }
        row[c] = static_cast<double>(*code);
      }
    }
    table.append_row(row);
  }
  return table;
}

Table load_table_lenient(const std::string& csv_path, SchemaPtr schema,
                         std::vector<std::string>* violations) {
  schema->validate();
  auto records = csv::read_file(csv_path);
  if (records.empty()) throw ParseError("csv is empty: " + csv_path);
  const auto& header = records[0];
  if (header.size() != schema->size()) {
    throw ParseError("header has " + std::to_string(header.size()) +
                     " columns, schema expects " + std::to_string(schema->size()));
  }

  Table table(schema);
  table.reserve(records.size() - 1);
  std::vector<double> row(schema->size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != schema->size()) {
      throw ParseError("row " + std::to_string(r + 1) + " has " +
                       std::to_string(rec.size()) + " fields, expected " +
                       std::to_string(schema->size()));
    }
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const auto& attr = schema->attribute(c);
      const std::string& cell = rec[c];
      if (attr.is_numerical()) {
        double v;
        if (!parse_double(cell, &v)) {
          throw ParseError("row " + std::to_string(r + 1) + ", column '" +
                           attr.name + "': cannot parse '" + cell +
                           "' as a number");
        }
        if (violations && (v < attr.lo || v > attr.hi)) {
          violations->push_back("row " + std::to_string(r + 1) + ", column '" +
                                attr.name + "': value " + cell +
                                " outside domain");
        }
        row[c] = v;
      } else {
        auto code = attr.code_of(cell);
        if (code) {
          row[c] = static_cast<double>(*code);
        } else {
          row[c] = table.intern_extra_label(c, cell);
          if (violations) {
            violations->push_back("row " + std::to_string(r + 1) + ", column '" +
                                  attr.name + "': label '" + cell +
                                  "' not in domain");
          }
        }
      }
    }
    table.append_row(row);
  }
  return table;
}

Schema infer_schema(const std::string& csv_path, const std::string& target,
                    std::size_t categorical_threshold) {
  auto records = csv::read_file(csv_path);
  if (records.empty()) throw ParseError("csv is empty: " + csv_path);
  const auto& header = records[0];
  if (records.size() < 2) throw ParseError("csv has a header but no data rows");

  std::size_t target_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target) target_col = c;
  }
  if (target_col == header.size()) {
    throw ConfigError("target column '" + target + "' absent from csv header");
  }

  Schema schema;
  schema.target = target;
  for (std::size_t c = 0; c < header.size(); ++c) {
    AttributeSpec attr;
    attr.name = header[c];

    bool all_numeric = true;
    bool any_value = false;
    double lo = 0, hi = 0;
    std::set<std::string> distinct;
    std::vector<double> numeric_values;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (records[r].size() != header.size()) {
        throw ParseError("row " + std::to_string(r + 1) + " has " +
                         std::to_string(records[r].size()) +
                         " fields, expected " + std::to_string(header.size()));
      }
      const std::string& cell = records[r][c];
      if (cell.empty()) {
        throw ParseError("row " + std::to_string(r + 1) + ", column '" +
                         attr.name + "': blank cell (missing values are not supported)");
      }
      any_value = true;
      distinct.insert(cell);
      double v;
      if (all_numeric && parse_double(cell, &v)) {
        if (numeric_values.empty()) {
          lo = hi = v;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        numeric_values.push_back(v);
      } else {
        all_numeric = false;
      }
    }
    if (!any_value) {
      throw ParseError("column '" + attr.name + "' has no values; cannot type it");
    }

    if (!all_numeric || distinct.size() <= categorical_threshold) {
      attr.kind = AttrKind::categorical;
      std::vector<std::string> labels(distinct.begin(), distinct.end());
      if (all_numeric) {
        // Numeric-valued categories sort by value so e.g. "9" precedes "10";
        // ties (distinct spellings of one value) fall back to text order.
        std::sort(labels.begin(), labels.end(),
                  [](const std::string& a, const std::string& b) {
                    double va = std::strtod(a.c_str(), nullptr);
                    double vb = std::strtod(b.c_str(), nullptr);
                    if (va != vb) return va < vb;
                    return a < b;
                  });
      }
      attr.labels = std::move(labels);
    } else {
      attr.kind = AttrKind::numerical;
      attr.lo = lo;
      attr.hi = hi;
    }
    schema.attributes.push_back(std::move(attr));
  }

  const auto& tgt = schema.attributes[target_col];
  if (tgt.is_numerical()) {
    schema.task = Task::regression;
  } else if (tgt.labels.size() == 2) {
    schema.task = Task::binary_classification;
  } else {
    schema.task = Task::multiclass_classification;
  }
  schema.validate();
  return schema;
}

namespace {

Table take_rows(const Table& src, std::span<const std::size_t> indices) {
  Table out(src.schema_ptr());
  out.reserve(indices.size());
  for (std::size_t i : indices) out.append_row(src.row_span(i));
  return out;
}

}  // namespace

DataSplit split(const Table& table, std::uint64_t seed) {
  std::size_t n = table.rows();
  if (n < 10) {
    throw ConfigError("split requires at least 10 rows, got " + std::to_string(n));
  }
  auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(
      std::llround(0.2 * static_cast<double>(n - n_test)));
  std::size_t n_train = n - n_test - n_val;
  if (n_test < 1 || n_val < 1 || n_train < 1) {
    throw ConfigError("table too small to populate train/validation/test");
  }

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx);

  DataSplit out;
  out.seed = seed;
  out.test = take_rows(table, {idx.data(), n_test});
  out.validation = take_rows(table, {idx.data() + n_test, n_val});
  out.train = take_rows(table, {idx.data() + n_test + n_val, n_train});
  return out;
}

std::pair<Table, NormalizationParams> normalize(
    const Table& table, const std::optional<NormalizationParams>& params) {
  const Schema& schema = table.schema();
  NormalizationParams used;
  used.ranges.assign(schema.size(), {0.0, 0.0});

  if (params) {
    if (params->ranges.size() != schema.size()) {
      throw ConfigError("normalization params do not match schema width");
    }
    used = *params;
  } else {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (!schema.attribute(c).is_numerical()) continue;
      double lo = 0, hi = 0;
      for (std::size_t r = 0; r < table.rows(); ++r) {
        double v = table.at(r, c);
        if (r == 0) {
          lo = hi = v;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      used.ranges[c] = {lo, hi};
    }
  }

  Table out(table.schema_ptr());
  out.reserve(table.rows());
  std::vector<double> row(schema.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto src = table.row_span(r);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (schema.attribute(c).is_numerical()) {
        auto [lo, hi] = used.ranges[c];
        row[c] = hi > lo ? (src[c] - lo) / (hi - lo) : 0.0;
      } else {
        row[c] = src[c];
      }
    }
    out.append_row(row);
  }
  return {std::move(out), std::move(used)};
}

Table denormalize(const Table& table, const NormalizationParams& params) {
  const Schema& schema = table.schema();
  if (params.ranges.size() != schema.size()) {
    throw ConfigError("normalization params do not match schema width");
  }
  Table out(table.schema_ptr());
  out.reserve(table.rows());
  std::vector<double> row(schema.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto src = table.row_span(r);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (schema.attribute(c).is_numerical()) {
        auto [lo, hi] = params.ranges[c];
        row[c] = hi > lo ? lo + src[c] * (hi - lo) : lo;
      } else {
        row[c] = src[c];
      }
    }
    out.append_row(row);
  }
  return out;
}

DiscretizeResult discretize(const Table& table, std::size_t bins) {
  if (bins < 2 || bins > 1024) {
    throw ConfigError("discretize requires 2 <= bins <= 1024, got " +
                      std::to_string(bins));
  }
  const Schema& schema = table.schema();

  auto binned = std::make_shared<Schema>();
  binned->target = schema.target;
  binned->task = schema.task;
  DiscretizeResult result;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& attr = schema.attribute(c);
    if (!attr.is_numerical()) {
      binned->attributes.push_back(attr);
      continue;
    }
    double width = (attr.hi - attr.lo) / static_cast<double>(bins);
    AttributeSpec cat;
    cat.name = attr.name;
    cat.kind = AttrKind::categorical;
    std::vector<double> edges;
    edges.push_back(attr.lo);
    for (std::size_t b = 0; b < bins; ++b) {
      double mid = attr.lo + (static_cast<double>(b) + 0.5) * width;
      cat.labels.push_back(format_double(mid));
      edges.push_back(attr.lo + static_cast<double>(b + 1) * width);
    }
    if (attr.hi == attr.lo) {
      // Degenerate domain: a single bin labelled by the only value.
      cat.labels.assign(1, format_double(attr.lo));
      edges.assign({attr.lo, attr.hi});
    }
    result.edges.push_back(std::move(edges));
    binned->attributes.push_back(std::move(cat));
  }
  // Regression targets stay meaningful through their midpoint labels, but the
  // schema task must agree with the now-categorical target kind.
  if (binned->task == Task::regression) {
    const auto& tgt = binned->attributes[binned->index_of(binned->target)];
    binned->task = tgt.labels.size() == 2 ? Task::binary_classification
                                          : Task::multiclass_classification;
  }

  Table out{std::shared_ptr<const Schema>(binned)};
  out.reserve(table.rows());
  std::vector<double> row(schema.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto src = table.row_span(r);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& attr = schema.attribute(c);
      if (!attr.is_numerical()) {
        row[c] = src[c];
        continue;
      }
      double width = (attr.hi - attr.lo) / static_cast<double>(bins);
      std::size_t b = 0;
      if (width > 0) {
        double t = std::floor((src[c] - attr.lo) / width);
        t = std::max(0.0, std::min(t, static_cast<double>(bins - 1)));
        b = static_cast<std::size_t>(t);
      }
      row[c] = static_cast<double>(b);
    }
    out.append_row(row);
  }
  result.table = std::move(out);
  return result;
}

void save_table_csv(const Table& table, const std::string& path) {
  const Schema& schema = table.schema();
  std::vector<std::string> header;
  for (const auto& a : schema.attributes) header.push_back(a.name);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
      row.push_back(table.cell_text(r, c));
    }
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

}  // namespace tabsyn
