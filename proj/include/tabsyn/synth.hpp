#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tabsyn/dataset.hpp"

namespace tabsyn {

enum class SynthesizerKind { half, histogram, self_copy, memorizing, external };

std::string to_string(SynthesizerKind kind);
SynthesizerKind synthesizer_kind_from_string(const std::string& s);

struct SynthesizerSpec {
  SynthesizerKind kind = SynthesizerKind::histogram;
  std::size_t bins = 10;                    // histogram
  double jitter_sigma = 0.05;               // memorizing
  std::optional<double> epsilon;            // histogram only: DP budget
  std::string command;                      // external: program + fixed args
  std::string workdir;                      // external: scratch override
  std::string hyperparams_json = "{}";      // external: passed through
  double timeout_seconds = 3600.0;          // external
};

// A trained generator. sample(n, seed) is deterministic given the trained
// state; instances are immutable after training and safe to sample from
// concurrently (the external adapter serializes its subprocess calls).
class Synthesizer {
 public:
  virtual ~Synthesizer() = default;
  virtual Table sample(std::size_t n, std::uint64_t seed) const = 0;
  virtual const SchemaPtr& schema() const = 0;
  // One-line provenance: kind, hyperparameters, training seed/fingerprint.
  virtual std::string describe() const = 0;
};

using SynthesizerPtr = std::unique_ptr<Synthesizer>;

// Disjoint uniform halves; the first part plays the training-data role and
// the second the synthetic role. Sizes differ by at most 1 (first is larger).
std::pair<Table, Table> half_baseline(const Table& table, std::uint64_t seed);

// Independent per-attribute sampler from one-way marginals. Numerical
// attributes are binned equal-width over the schema domain and sampled
// uniformly within the chosen bin. With epsilon set, each attribute's
// frequency vector gets Laplace noise of scale d/(epsilon*|train|), is
// clamped at 0 and renormalized.
SynthesizerPtr train_histogram(const Table& train, std::size_t bins,
                               std::optional<double> epsilon = {},
                               std::uint64_t seed = 0);

// Verbatim copy: draws rows without replacement when n <= |train| (a
// permutation at n = |train|), with replacement above.
SynthesizerPtr self_baseline(const Table& train);

// Row copies with Gaussian jitter (std jitter_sigma in normalized units) on
// numerical attributes, clamped to the schema domain; categorical values
// resampled uniformly with probability min(jitter_sigma, 1).
SynthesizerPtr memorizing_synthesizer(const Table& train, double jitter_sigma);

// Subprocess adapter; see external_synth.cpp for the file protocol.
SynthesizerPtr external_synthesizer(const SynthesizerSpec& spec,
                                    const Table& train, std::uint64_t seed);

SynthesizerPtr train_synthesizer(const SynthesizerSpec& spec, const Table& train,
                                 std::uint64_t seed);

using SynthesizerFactory =
    std::function<SynthesizerPtr(const Table& train, std::uint64_t seed)>;

SynthesizerFactory factory_for(const SynthesizerSpec& spec);

// Stored per-attribute frequency vectors of a trained histogram synthesizer
// (noisy ones under DP). Throws ConfigError for any other synthesizer.
const std::vector<std::vector<double>>& histogram_marginals(const Synthesizer& s);

// Same-size table where round(ratio*|table|) uniformly chosen rows are
// replaced by copies of distinct retained rows.
Table duplicate_rows(const Table& table, double ratio, std::uint64_t seed);

// Scratch space root: $TABSYN_ASSESS_TMP or the system temp directory.
std::string scratch_root();

}  // namespace tabsyn
