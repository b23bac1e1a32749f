#include "tabsyn/synth.hpp"

#include <algorithm>
#include <cmath>

#include "tabsyn/errors.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

std::string to_string(SynthesizerKind kind) {
  switch (kind) {
    case SynthesizerKind::half: return "half";
    case SynthesizerKind::histogram: return "histogram";
    case SynthesizerKind::self_copy: return "self";
    case SynthesizerKind::memorizing: return "memorizing";
    case SynthesizerKind::external: return "external";
  }
  return "unknown";
}

SynthesizerKind synthesizer_kind_from_string(const std::string& s) {
  if (s == "half") return SynthesizerKind::half;
  if (s == "histogram") return SynthesizerKind::histogram;
  if (s == "self") return SynthesizerKind::self_copy;
  if (s == "memorizing") return SynthesizerKind::memorizing;
  if (s == "external") return SynthesizerKind::external;
  throw ConfigError("unknown synthesizer kind: " + s);
}

std::pair<Table, Table> half_baseline(const Table& table, std::uint64_t seed) {
  std::size_t n = table.rows();
  if (n < 2) throw ConfigError("half baseline needs at least 2 rows");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "half"));
  rng.shuffle(idx);

  std::size_t first = (n + 1) / 2;
  Table a(table.schema_ptr()), b(table.schema_ptr());
  a.reserve(first);
  b.reserve(n - first);
  for (std::size_t i = 0; i < first; ++i) a.append_row(table.row_span(idx[i]));
  for (std::size_t i = first; i < n; ++i) b.append_row(table.row_span(idx[i]));
  return {std::move(a), std::move(b)};
}

namespace {

class HistogramSynthesizer final : public Synthesizer {
 public:
  HistogramSynthesizer(const Table& train, std::size_t bins,
                       std::optional<double> epsilon, std::uint64_t seed)
      : schema_(train.schema_ptr()), bins_(bins), epsilon_(epsilon), seed_(seed) {
    if (bins < 2) throw ConfigError("histogram synthesizer needs bins >= 2");
    if (train.rows() == 0) throw ConfigError("histogram synthesizer needs training rows");
    if (epsilon && *epsilon <= 0.0) throw ConfigError("epsilon must be positive");

    const Schema& schema = *schema_;
    std::size_t d = schema.size();
    freqs_.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
      const auto& attr = schema.attribute(c);
      std::size_t cells = attr.is_numerical() ? bins_ : attr.cardinality();
      std::vector<double> counts(cells, 0.0);
      for (std::size_t r = 0; r < train.rows(); ++r) {
        counts[cell_index(attr, train.at(r, c))] += 1.0;
      }
      auto total = static_cast<double>(train.rows());
      for (auto& x : counts) x /= total;
      freqs_[c] = std::move(counts);
    }

    if (epsilon_) {
      // Budget split evenly across d marginals; each frequency entry has
      // sensitivity 1/|train| under add/remove-one.
      double scale = static_cast<double>(d) / (*epsilon_ * static_cast<double>(train.rows()));
      Rng noise(derive_seed(seed_, "dp_noise"));
      for (auto& freq : freqs_) {
        double sum = 0.0;
        for (auto& x : freq) {
          x = std::max(0.0, x + noise.laplace(scale));
          sum += x;
        }
        if (sum <= 0.0) {
          std::fill(freq.begin(), freq.end(), 1.0 / static_cast<double>(freq.size()));
        } else {
          for (auto& x : freq) x /= sum;
        }
      }
    }
  }

  Table sample(std::size_t n, std::uint64_t seed) const override {
    const Schema& schema = *schema_;
    Table out(schema_);
    out.reserve(n);
    Rng rng(derive_seed(seed, "histogram_sample"));
    std::vector<double> row(schema.size());
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& attr = schema.attribute(c);
        std::size_t cell = draw_cell(freqs_[c], rng);
        if (attr.is_numerical()) {
          double width = (attr.hi - attr.lo) / static_cast<double>(bins_);
          double v = attr.lo + (static_cast<double>(cell) + rng.uniform()) * width;
          row[c] = std::min(v, attr.hi);
        } else {
          row[c] = static_cast<double>(cell);
        }
      }
      out.append_row(row);
    }
    return out;
  }

  const SchemaPtr& schema() const override { return schema_; }

  std::string describe() const override {
    std::string s = "histogram(bins=" + std::to_string(bins_);
    if (epsilon_) s += ", epsilon=" + std::to_string(*epsilon_);
    s += ", seed=" + std::to_string(seed_) + ")";
    return s;
  }

  const std::vector<std::vector<double>>& marginals() const { return freqs_; }

 private:
  std::size_t cell_index(const AttributeSpec& attr, double v) const {
    if (!attr.is_numerical()) return static_cast<std::size_t>(v);
    double width = (attr.hi - attr.lo) / static_cast<double>(bins_);
    if (width <= 0.0) return 0;
    double t = std::floor((v - attr.lo) / width);
    t = std::max(0.0, std::min(t, static_cast<double>(bins_ - 1)));
    return static_cast<std::size_t>(t);
  }

  static std::size_t draw_cell(const std::vector<double>& freq, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < freq.size(); ++i) {
      acc += freq[i];
      if (u < acc) return i;
    }
    return freq.size() - 1;
  }

  SchemaPtr schema_;
  std::size_t bins_;
  std::optional<double> epsilon_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> freqs_;
};

class SelfSynthesizer final : public Synthesizer {
 public:
  explicit SelfSynthesizer(const Table& train) : train_(train) {
    if (train.rows() == 0) throw ConfigError("self baseline needs training rows");
  }

  Table sample(std::size_t n, std::uint64_t seed) const override {
    Table out(train_.schema_ptr());
    out.reserve(n);
    Rng rng(derive_seed(seed, "self_sample"));
    if (n <= train_.rows()) {
      auto idx = rng.sample_without_replacement(train_.rows(), n);
      for (std::size_t i : idx) out.append_row(train_.row_span(i));
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        out.append_row(train_.row_span(static_cast<std::size_t>(rng.below(train_.rows()))));
      }
    }
    return out;
  }

  const SchemaPtr& schema() const override { return train_.schema_ptr(); }
  std::string describe() const override { return "self"; }

 private:
  Table train_;
};

class MemorizingSynthesizer final : public Synthesizer {
 public:
  MemorizingSynthesizer(const Table& train, double jitter_sigma)
      : train_(train), sigma_(jitter_sigma) {
    if (train.rows() == 0) throw ConfigError("memorizing synthesizer needs training rows");
    if (sigma_ < 0.0) throw ConfigError("jitter sigma must be non-negative");
  }

  Table sample(std::size_t n, std::uint64_t seed) const override {
    const Schema& schema = train_.schema();
    Table out(train_.schema_ptr());
    out.reserve(n);
    Rng rng(derive_seed(seed, "memorizing_sample"));
    std::vector<double> row(schema.size());
    double resample_p = std::min(sigma_, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
      auto src = train_.row_span(static_cast<std::size_t>(rng.below(train_.rows())));
      for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& attr = schema.attribute(c);
        if (attr.is_numerical()) {
          // Sigma is in normalized units; the domain width converts it back.
          double v = src[c] + rng.normal(0.0, sigma_ * (attr.hi - attr.lo));
          row[c] = std::clamp(v, attr.lo, attr.hi);
        } else {
          if (rng.uniform() < resample_p) {
            row[c] = static_cast<double>(rng.below(attr.cardinality()));
          } else {
            row[c] = src[c];
          }
        }
      }
      out.append_row(row);
    }
    return out;
  }

  const SchemaPtr& schema() const override { return train_.schema_ptr(); }

  std::string describe() const override {
    return "memorizing(jitter_sigma=" + std::to_string(sigma_) + ")";
  }

 private:
  Table train_;
  double sigma_;
};

// HALF as a synthesizer handle: trained on the halved table, it "generates"
// the held-out half (truncated or cycled to the requested size).
class HalfSynthesizer final : public Synthesizer {
 public:
  HalfSynthesizer(const Table& train, std::uint64_t seed) {
    auto [a, b] = half_baseline(train, seed);
    part_ = std::move(b);
    (void)a;
  }

  Table sample(std::size_t n, std::uint64_t seed) const override {
    Table out(part_.schema_ptr());
    out.reserve(n);
    Rng rng(derive_seed(seed, "half_sample"));
    if (n <= part_.rows()) {
      auto idx = rng.sample_without_replacement(part_.rows(), n);
      for (std::size_t i : idx) out.append_row(part_.row_span(i));
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        out.append_row(part_.row_span(static_cast<std::size_t>(rng.below(part_.rows()))));
      }
    }
    return out;
  }

  const SchemaPtr& schema() const override { return part_.schema_ptr(); }
  std::string describe() const override { return "half"; }

 private:
  Table part_;
};

}  // namespace

SynthesizerPtr train_histogram(const Table& train, std::size_t bins,
                               std::optional<double> epsilon, std::uint64_t seed) {
  return std::make_unique<HistogramSynthesizer>(train, bins, epsilon, seed);
}

SynthesizerPtr self_baseline(const Table& train) {
  return std::make_unique<SelfSynthesizer>(train);
}

SynthesizerPtr memorizing_synthesizer(const Table& train, double jitter_sigma) {
  return std::make_unique<MemorizingSynthesizer>(train, jitter_sigma);
}

SynthesizerPtr train_synthesizer(const SynthesizerSpec& spec, const Table& train,
                                 std::uint64_t seed) {
  switch (spec.kind) {
    case SynthesizerKind::half:
      return std::make_unique<HalfSynthesizer>(train, seed);
    case SynthesizerKind::histogram:
      return train_histogram(train, spec.bins, spec.epsilon, seed);
    case SynthesizerKind::self_copy:
      return self_baseline(train);
    case SynthesizerKind::memorizing:
      return memorizing_synthesizer(train, spec.jitter_sigma);
    case SynthesizerKind::external:
      return external_synthesizer(spec, train, seed);
  }
  throw ConfigError("unknown synthesizer kind");
}

SynthesizerFactory factory_for(const SynthesizerSpec& spec) {
  return [spec](const Table& train, std::uint64_t seed) {
    return train_synthesizer(spec, train, seed);
  };
}

const std::vector<std::vector<double>>& histogram_marginals(const Synthesizer& s) {
  const auto* histogram = dynamic_cast<const HistogramSynthesizer*>(&s);
  if (histogram == nullptr) {
    throw ConfigError("histogram_marginals: not a histogram synthesizer");
  }
  return histogram->marginals();
}

Table duplicate_rows(const Table& table, double ratio, std::uint64_t seed) {
  if (ratio < 0.0 || ratio >= 1.0) {
    throw ConfigError("duplication ratio must be in [0, 1), got " + std::to_string(ratio));
  }
  std::size_t n = table.rows();
  auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (k == 0) return table;

  Rng rng(derive_seed(seed, "duplicate"));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  // First k shuffled rows are victims; sources come from the retained rest,
  // distinct while possible so the duplicated mass spreads evenly.
  std::vector<std::size_t> sources;
  std::size_t retained = n - k;
  if (k <= retained) {
    auto pick = rng.sample_without_replacement(retained, k);
    for (std::size_t s : pick) sources.push_back(idx[k + s]);
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      sources.push_back(idx[k + static_cast<std::size_t>(rng.below(retained))]);
    }
  }

  std::vector<std::size_t> final_rows(n);
  for (std::size_t i = 0; i < n; ++i) final_rows[i] = i;
  for (std::size_t i = 0; i < k; ++i) final_rows[idx[i]] = sources[i];

  Table out(table.schema_ptr());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.append_row(table.row_span(final_rows[i]));
  return out;
}

}  // namespace tabsyn
