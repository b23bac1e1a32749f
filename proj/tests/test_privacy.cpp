#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "fixtures.hpp"
#include "tabsyn/errors.hpp"
#include "tabsyn/kernels.hpp"
#include "tabsyn/privacy.hpp"
#include "tabsyn/synth.hpp"

using namespace tabsyn;
using namespace fixtures;

namespace {

double brute_row_distance(std::span<const double> a, std::span<const double> b,
                          const std::vector<std::uint8_t>& mask) {
  double sum = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    sum += mask[c] ? (a[c] == b[c] ? 0.0 : 1.0) : std::fabs(a[c] - b[c]);
  }
  return sum;
}

// Per-synthetic-row nearest distances to real rows, both sides normalized
// with the real table's parameters (the same convention dcr/nndr use).
std::vector<double> brute_nearest_to_real(const Table& real, const Table& synth) {
  auto [real_n, params] = normalize(real);
  Table syn_n = normalize(synth, params).first;
  auto mask = categorical_mask(real.schema());
  std::vector<double> out(syn_n.rows(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < syn_n.rows(); ++i) {
    for (std::size_t j = 0; j < real_n.rows(); ++j) {
      out[i] = std::min(out[i],
                        brute_row_distance(syn_n.row_span(i), real_n.row_span(j), mask));
    }
  }
  return out;
}

double brute_percentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (rank - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

bool same_record(const DisclosureRecord& a, const DisclosureRecord& b) {
  return a.record == b.record && a.in_mean == b.in_mean &&
         a.out_mean == b.out_mean && a.score == b.score;
}

}  // namespace

TEST_CASE("nearest_distance finds members and mixed gaps") {
  auto schema = mixed_schema();
  Table s(schema);
  s.append_row(std::vector<double>{0.2, 0.4, 1.0});
  s.append_row(std::vector<double>{0.9, 0.1, 0.0});

  std::vector<double> member = {0.9, 0.1, 0.0};
  CHECK(nearest_distance(member, s) == 0.0);

  // Numeric gap 0.1 + 0.0, categorical mismatch adds 1.
  std::vector<double> near = {0.3, 0.4, 2.0};
  CHECK(nearest_distance(near, s) == doctest::Approx(1.1));

  Table empty(schema);
  CHECK_THROWS_AS(nearest_distance(member, empty), Error);
}

TEST_CASE("nearest_distance pays one per categorical mismatch") {
  auto schema = make_schema({num_attr("v", 0.0, 1.0), cat_attr("g", {"A", "B"})},
                            "g", Task::binary_classification);
  Table s(schema);
  s.append_row(std::vector<double>{1.0, 1.0});  // (1.0, B)
  std::vector<double> x = {0.0, 0.0};           // (0.0, A)
  CHECK(nearest_distance(x, s) == doctest::Approx(2.0));
}

TEST_CASE("nearest_distance matches an exhaustive scan") {
  auto t = random_table(mixed_schema(), 100, 71);
  auto s = random_table(mixed_schema(), 60, 72);
  auto mask = categorical_mask(t.schema());
  for (std::size_t r = 0; r < 20; ++r) {
    auto x = t.row_span(r);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.rows(); ++j) {
      best = std::min(best, brute_row_distance(x, s.row_span(j), mask));
    }
    CHECK(nearest_distance(x, s) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("shadow subsets cover every record both ways") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::vector<std::uint8_t>> membership;
    draw_shadow_subsets(20, 6, seed, &subsets, &membership);
    REQUIRE(subsets.size() == 6);
    for (const auto& subset : subsets) CHECK(subset.size() == 10);
    for (std::size_t r = 0; r < 20; ++r) {
      std::size_t in = 0;
      for (std::size_t i = 0; i < 6; ++i) in += membership[i][r];
      CHECK(in >= 1);
      CHECK(in <= 5);
    }
  }
}

TEST_CASE("shadow subsets work at the smallest scale") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::vector<std::uint8_t>> membership;
    draw_shadow_subsets(4, 2, seed, &subsets, &membership);
    for (const auto& subset : subsets) CHECK(subset.size() == 2);
    for (std::size_t r = 0; r < 4; ++r) {
      std::size_t in = membership[0][r] + membership[1][r];
      CHECK(in == 1);  // m=2 coverage forces exactly one side
    }
  }
}

TEST_CASE("shadow subsets are deterministic") {
  std::vector<std::vector<std::size_t>> a, b;
  std::vector<std::vector<std::uint8_t>> ma, mb;
  draw_shadow_subsets(30, 5, 9, &a, &ma);
  draw_shadow_subsets(30, 5, 9, &b, &mb);
  CHECK(a == b);
  CHECK(ma == mb);
}

TEST_CASE("shadow ensemble training matches its subsets") {
  auto d = random_table(mixed_schema(), 30, 81);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::histogram;
  spec.bins = 5;
  auto ens = train_shadow_ensemble(factory_for(spec), d, 4, 3, 42);
  CHECK(ens.m == 4);
  CHECK(ens.n == 3);
  CHECK(ens.subset_size == 15);
  REQUIRE(ens.synthesizers.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ens.subsets[i].size() == 15);
    std::size_t members = 0;
    for (std::size_t r = 0; r < 30; ++r) members += ens.membership[i][r];
    CHECK(members == 15);
  }

  CHECK_THROWS_AS(train_shadow_ensemble(factory_for(spec), d, 1, 3, 0), ConfigError);
  CHECK_THROWS_AS(train_shadow_ensemble(factory_for(spec), d, 2, 0, 0), ConfigError);
  auto tiny = random_table(mixed_schema(), 3, 1);
  CHECK_THROWS_AS(train_shadow_ensemble(factory_for(spec), tiny, 2, 1, 0), ConfigError);
}

TEST_CASE("single-record disclosure equals the batch path bit for bit") {
  auto d = random_table(mixed_schema(), 30, 83);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::histogram;
  spec.bins = 5;

  MdsOptions opt;
  opt.m = 4;
  opt.n = 3;
  opt.seed = 7;
  auto report = mds(spec, d, opt);
  REQUIRE(report.records.size() == 30);

  auto ens = train_shadow_ensemble(factory_for(spec), d, opt.m, opt.n, opt.seed);
  for (std::size_t x : {0u, 7u, 13u, 22u, 29u}) {
    auto single = disclosure_score(x, ens, d);
    CHECK(same_record(single, report.records[x]));
  }
}

TEST_CASE("mds is the exact max over record scores and is deterministic") {
  auto d = random_table(mixed_schema(), 24, 85);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::histogram;
  spec.bins = 4;
  MdsOptions opt;
  opt.m = 4;
  opt.n = 2;
  opt.seed = 3;

  auto report = mds(spec, d, opt);
  double max_score = 0.0;
  for (const auto& rec : report.records) {
    CHECK(rec.score >= 0.0);
    max_score = std::max(max_score, rec.score);
  }
  CHECK(report.mds == max_score);
  CHECK(report.mds >= 0.0);
  CHECK(report.records_scored == 24);
  CHECK_FALSE(report.capped);
  CHECK(report.mean_nearest_distance > 0.0);

  auto again = mds(spec, d, opt);
  CHECK(again.mds == report.mds);
  CHECK(again.mean_nearest_distance == report.mean_nearest_distance);
  REQUIRE(again.records.size() == report.records.size());
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    CHECK(same_record(again.records[i], report.records[i]));
  }

  MdsOptions other = opt;
  other.seed = 4;
  CHECK(mds(spec, d, other).mds != report.mds);
}

TEST_CASE("self baseline discloses: in-tables always contain the record") {
  auto d = random_table(mixed_schema(), 20, 87);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::self_copy;
  MdsOptions opt;
  opt.m = 4;
  opt.n = 3;
  opt.seed = 11;
  auto report = mds(spec, d, opt);
  for (const auto& rec : report.records) {
    CHECK(rec.in_mean == 0.0);
    CHECK(rec.out_mean > 0.0);
    CHECK(rec.score == rec.out_mean);
  }
  CHECK(report.mds > 0.0);
}

TEST_CASE("a data-independent synthesizer discloses nothing") {
  auto d = random_table(mixed_schema(), 20, 89);
  MdsOptions opt;
  opt.m = 4;
  opt.n = 3;
  opt.seed = 13;
  auto report = mds(constant_factory({0.5, 0.5, 1.0}), d, opt);
  for (const auto& rec : report.records) {
    // identical tables in and out; averaging over unequal counts leaves ulps
    CHECK(rec.score <= 1e-12);
  }
  CHECK(report.mds <= 1e-12);
  CHECK(report.mean_nearest_distance > 0.0);
  CHECK(report.mds < 0.05 * report.mean_nearest_distance);
}

TEST_CASE("memorization orders the disclosure scale") {
  auto d = random_table(mixed_schema(), 60, 91);
  MdsOptions opt;
  opt.m = 6;
  opt.n = 10;
  opt.seed = 17;

  SynthesizerSpec self_spec;
  self_spec.kind = SynthesizerKind::self_copy;
  SynthesizerSpec hist_spec;
  hist_spec.kind = SynthesizerKind::histogram;
  hist_spec.bins = 8;

  double self_mds = mds(self_spec, d, opt).mds;
  double hist_mds = mds(hist_spec, d, opt).mds;
  double const_mds = mds(constant_factory({0.1, 0.9, 0.0}), d, opt).mds;

  CHECK(self_mds > hist_mds);
  CHECK(hist_mds > const_mds);
  CHECK(const_mds <= 1e-12);
}

TEST_CASE("record cap scores a seeded subset with unchanged values") {
  auto d = random_table(mixed_schema(), 40, 93);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::histogram;
  spec.bins = 4;
  MdsOptions opt;
  opt.m = 4;
  opt.n = 2;
  opt.seed = 23;

  auto full = mds(spec, d, opt);
  MdsOptions capped = opt;
  capped.record_cap = 10;
  auto part = mds(spec, d, capped);

  CHECK(part.capped);
  CHECK(part.records_scored == 10);
  REQUIRE(part.records.size() == 10);
  for (std::size_t i = 1; i < part.records.size(); ++i) {
    CHECK(part.records[i - 1].record < part.records[i].record);
  }
  // Same sampling seeds, so each capped record matches the full run exactly.
  for (const auto& rec : part.records) {
    CHECK(same_record(rec, full.records[rec.record]));
  }
  CHECK(part.mds <= full.mds);

  MdsOptions over = opt;
  over.record_cap = 400;  // larger than the table: no cap
  CHECK_FALSE(mds(spec, d, over).capped);
}

TEST_CASE("mds resumes from a run directory") {
  auto d = random_table(mixed_schema(), 24, 95);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::histogram;
  spec.bins = 4;

  TempDir dir;
  MdsOptions opt;
  opt.m = 4;
  opt.n = 2;
  opt.seed = 29;
  opt.run_dir = dir.file("mds_run");

  auto first = mds(spec, d, opt);
  namespace fs = std::filesystem;
  CHECK(fs::exists(fs::path(opt.run_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(opt.run_dir) / "shadow_0.json"));
  CHECK(fs::exists(fs::path(opt.run_dir) / "shadow_3.json"));

  // Full resume: all shadows replay from disk.
  auto resumed = mds(spec, d, opt);
  CHECK(resumed.mds == first.mds);
  CHECK(resumed.mean_nearest_distance == first.mean_nearest_distance);

  // Partial resume: one shadow recomputes, the rest load.
  fs::remove(fs::path(opt.run_dir) / "shadow_2.json");
  auto partial = mds(spec, d, opt);
  CHECK(partial.mds == first.mds);
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    CHECK(same_record(partial.records[i], first.records[i]));
  }

  // A different configuration must refuse the directory.
  MdsOptions other = opt;
  other.seed = 30;
  CHECK_THROWS_AS(mds(spec, d, other), ConfigError);
}

TEST_CASE("mds validates its options") {
  auto d = random_table(mixed_schema(), 20, 97);
  SynthesizerSpec spec;
  spec.kind = SynthesizerKind::histogram;
  MdsOptions opt;
  opt.m = 1;
  CHECK_THROWS_AS(mds(spec, d, opt), ConfigError);
  opt.m = 2;
  opt.n = 0;
  CHECK_THROWS_AS(mds(spec, d, opt), ConfigError);
  auto tiny = random_table(mixed_schema(), 3, 1);
  CHECK_THROWS_AS(mds(spec, tiny, MdsOptions{}), ConfigError);
}

TEST_CASE("dcr is zero when synthetic equals real") {
  auto real = random_table(mixed_schema(), 50, 99);
  Table copy(real.schema_ptr());
  for (std::size_t r = 0; r < real.rows(); ++r) copy.append_row(real.row_span(r));
  CHECK(dcr(real, copy) == 0.0);
  CHECK(dcr(real, copy, 0.0) == 0.0);
  CHECK(dcr(real, copy, 100.0) == 0.0);
}

TEST_CASE("dcr matches the brute-force percentile oracle") {
  auto real = random_table(mixed_schema(), 80, 101);
  auto synth = random_table(mixed_schema(), 50, 102);
  auto distances = brute_nearest_to_real(real, synth);
  for (double pct : {0.0, 5.0, 37.5, 50.0, 100.0}) {
    CHECK(dcr(real, synth, pct) ==
          doctest::Approx(brute_percentile(distances, pct)).epsilon(1e-12));
  }
  // Percentile 0 is the minimum.
  CHECK(dcr(real, synth, 0.0) ==
        doctest::Approx(*std::min_element(distances.begin(), distances.end())));
}

TEST_CASE("dcr validates its inputs") {
  auto real = random_table(mixed_schema(), 10, 1);
  Table empty(real.schema_ptr());
  CHECK_THROWS_AS(dcr(real, empty), Error);
  CHECK_THROWS_AS(dcr(empty, real), Error);
  auto synth = random_table(mixed_schema(), 10, 2);
  CHECK_THROWS_AS(dcr(real, synth, 101.0), ConfigError);
  CHECK_THROWS_AS(dcr(real, synth, -1.0), ConfigError);
}

TEST_CASE("nndr is one for equidistant rows and zero for exact matches") {
  auto schema = make_schema({num_attr("v", 0.0, 1.0), cat_attr("g", {"A", "B"})},
                            "g", Task::binary_classification);
  Table real(schema);
  real.append_row(std::vector<double>{0.0, 0.0});
  real.append_row(std::vector<double>{1.0, 0.0});

  Table midway(schema);
  midway.append_row(std::vector<double>{0.5, 0.0});
  CHECK(nndr(real, midway) == doctest::Approx(1.0));

  Table match(schema);
  match.append_row(std::vector<double>{0.0, 0.0});
  CHECK(nndr(real, match, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("nndr matches a brute-force two-nearest oracle") {
  auto real = random_table(mixed_schema(), 70, 103);
  auto synth = random_table(mixed_schema(), 40, 104);

  auto [real_n, params] = normalize(real);
  Table syn_n = normalize(synth, params).first;
  auto mask = categorical_mask(real.schema());
  std::vector<double> ratios;
  for (std::size_t i = 0; i < syn_n.rows(); ++i) {
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < real_n.rows(); ++j) {
      double dist = brute_row_distance(syn_n.row_span(i), real_n.row_span(j), mask);
      if (dist < d1) {
        d2 = d1;
        d1 = dist;
      } else if (dist < d2) {
        d2 = dist;
      }
    }
    ratios.push_back(d2 > 0.0 ? d1 / d2 : 1.0);
  }
  for (double pct : {0.0, 5.0, 50.0, 100.0}) {
    CHECK(nndr(real, synth, pct) ==
          doctest::Approx(brute_percentile(ratios, pct)).epsilon(1e-12));
  }
}

TEST_CASE("nndr needs two real rows") {
  auto real = random_table(mixed_schema(), 1, 1);
  auto synth = random_table(mixed_schema(), 5, 2);
  CHECK_THROWS_AS(nndr(real, synth), ConfigError);
}
