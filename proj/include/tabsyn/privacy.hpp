#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabsyn/dataset.hpp"
#include "tabsyn/synth.hpp"

namespace tabsyn {

// Minimum mixed-attribute L1 distance from record x to any row of s. Both
// sides must already be normalized with the real data's parameters.
double nearest_distance(std::span<const double> x, const Table& s);

// m shadow synthesizers, each trained on an independent uniform half-subset.
// Synthetic tables are not materialized here; they replay from (seed, shadow,
// table) via derive_seed(seed, "shadow_sample", shadow * n + table).
struct ShadowEnsemble {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t subset_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> subsets;      // sorted row indices
  std::vector<std::vector<std::uint8_t>> membership;  // [shadow][record]
  std::vector<SynthesizerPtr> synthesizers;
};

struct DisclosureRecord {
  std::size_t record = 0;
  double in_mean = 0.0;
  double out_mean = 0.0;
  double score = 0.0;  // |in_mean - out_mean|
};

struct PrivacyReport {
  double mds = 0.0;
  std::vector<DisclosureRecord> records;
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string distance = "l1_nearest";
  // Grand mean nearest distance over (record, synthetic table) pairs; the
  // scale against which disclosure scores are judged.
  double mean_nearest_distance = 0.0;
  std::size_t records_scored = 0;
  bool capped = false;
};

struct MdsOptions {
  std::size_t m = 20;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  // 0 scores every record; a cap scores a seeded subset (MDS is a max, so a
  // cap can only under-report - it is echoed in the report).
  std::size_t record_cap = 0;
  // When set, per-shadow partial sums persist here and a rerun resumes.
  std::string run_dir;
};

// Subset sampling with the coverage guarantee: every record belongs to at
// least one subset and is absent from at least one. Violations trigger
// bounded round-robin resampling.
void draw_shadow_subsets(std::size_t n_records, std::size_t m, std::uint64_t seed,
                         std::vector<std::vector<std::size_t>>* subsets,
                         std::vector<std::vector<std::uint8_t>>* membership);

ShadowEnsemble train_shadow_ensemble(const SynthesizerFactory& factory,
                                     const Table& d, std::size_t m, std::size_t n,
                                     std::uint64_t seed);

// In/out mean nearest distances for one record, replaying every synthetic
// table. Matches the batch path in mds() bit for bit.
DisclosureRecord disclosure_score(std::size_t x_index, const ShadowEnsemble& ensemble,
                                  const Table& d);

PrivacyReport mds(const SynthesizerFactory& factory, const Table& d,
                  const MdsOptions& options = {});
PrivacyReport mds(const SynthesizerSpec& spec, const Table& d,
                  const MdsOptions& options = {});

// Syntactic (algorithm-independent) baselines, kept for comparison studies.
// Percentile of per-synthetic-row nearest distances to real rows.
double dcr(const Table& real, const Table& synthetic, double percentile = 5.0);
// Percentile of nearest / second-nearest distance ratios (1 when both are 0).
double nndr(const Table& real, const Table& synthetic, double percentile = 5.0);

}  // namespace tabsyn
