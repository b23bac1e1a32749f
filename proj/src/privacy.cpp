#include "tabsyn/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "tabsyn/errors.hpp"
#include "tabsyn/kernels.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

namespace fs = std::filesystem;
using json = nlohmann::json;

double nearest_distance(std::span<const double> x, const Table& s) {
  if (s.rows() == 0) throw Error("nearest_distance: empty table");
  auto mask = categorical_mask(s.schema());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    best = std::min(best, row_distance(x, s.row_span(r), mask));
  }
  return best;
}

void draw_shadow_subsets(std::size_t n_records, std::size_t m, std::uint64_t seed,
                         std::vector<std::vector<std::size_t>>* subsets,
                         std::vector<std::vector<std::uint8_t>>* membership) {
  std::size_t h = n_records / 2;
  subsets->assign(m, {});
  membership->assign(m, std::vector<std::uint8_t>(n_records, 0));

  auto draw_one = [&](std::size_t i, std::uint64_t attempt) {
    Rng rng(derive_seed(seed, "shadow_subset", i + m * attempt));
    auto idx = rng.sample_without_replacement(n_records, h);
    std::sort(idx.begin(), idx.end());
    (*subsets)[i] = std::move(idx);
    auto& member = (*membership)[i];
    std::fill(member.begin(), member.end(), 0);
    for (std::size_t r : (*subsets)[i]) member[r] = 1;
  };
  for (std::size_t i = 0; i < m; ++i) draw_one(i, 0);

  auto coverage_ok = [&] {
    for (std::size_t r = 0; r < n_records; ++r) {
      std::size_t in = 0;
      for (std::size_t i = 0; i < m; ++i) in += (*membership)[i][r];
      if (in == 0 || in == m) return false;
    }
    return true;
  };

  std::size_t budget = 64 * m;
  for (std::size_t retry = 0; !coverage_ok(); ++retry) {
    if (retry >= budget) {
      throw Error("shadow subset coverage unreachable after " +
                  std::to_string(budget) + " resamples");
    }
    draw_one(retry % m, 1 + retry);
  }
}

ShadowEnsemble train_shadow_ensemble(const SynthesizerFactory& factory,
                                     const Table& d, std::size_t m, std::size_t n,
                                     std::uint64_t seed) {
  if (m < 2) throw ConfigError("shadow ensemble needs m >= 2");
  if (n < 1) throw ConfigError("shadow ensemble needs n >= 1");
  if (d.rows() < 4) throw ConfigError("shadow ensemble needs at least 4 rows");

  ShadowEnsemble ens;
  ens.m = m;
  ens.n = n;
  ens.subset_size = d.rows() / 2;
  ens.seed = seed;
  draw_shadow_subsets(d.rows(), m, seed, &ens.subsets, &ens.membership);

  for (std::size_t i = 0; i < m; ++i) {
    Table subset(d.schema_ptr());
    subset.reserve(ens.subset_size);
    for (std::size_t r : ens.subsets[i]) subset.append_row(d.row_span(r));
    try {
      ens.synthesizers.push_back(factory(subset, derive_seed(seed, "shadow_train", i)));
    } catch (const Error& e) {
      throw Error("shadow " + std::to_string(i) + " training failed: " + e.what());
    }
  }
  return ens;
}

DisclosureRecord disclosure_score(std::size_t x_index, const ShadowEnsemble& ensemble,
                                  const Table& d) {
  if (x_index >= d.rows()) throw ConfigError("record index out of range");
  auto [d_norm, params] = normalize(d);
  auto mask = categorical_mask(d.schema());
  auto x = d_norm.row_span(x_index);

  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_shadows = 0, out_shadows = 0;
  for (std::size_t i = 0; i < ensemble.m; ++i) {
    double shadow_sum = 0.0;
    for (std::size_t t = 0; t < ensemble.n; ++t) {
      Table s = ensemble.synthesizers[i]->sample(
          ensemble.subset_size,
          derive_seed(ensemble.seed, "shadow_sample", i * ensemble.n + t));
      Table s_norm = normalize(s, params).first;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < s_norm.rows(); ++r) {
        best = std::min(best, row_distance(x, s_norm.row_span(r), mask));
      }
      shadow_sum += best;
    }
    if (ensemble.membership[i][x_index]) {
      in_sum += shadow_sum;
      ++in_shadows;
    } else {
      out_sum += shadow_sum;
      ++out_shadows;
    }
  }
  if (in_shadows == 0 || out_shadows == 0) {
    throw Error("record " + std::to_string(x_index) + " violates subset coverage");
  }

  DisclosureRecord rec;
  rec.record = x_index;
  rec.in_mean = in_sum / static_cast<double>(in_shadows * ensemble.n);
  rec.out_mean = out_sum / static_cast<double>(out_shadows * ensemble.n);
  rec.score = std::fabs(rec.in_mean - rec.out_mean);
  return rec;
}

namespace {

struct RunDir {
  fs::path base;

  fs::path manifest() const { return base / "manifest.json"; }
  fs::path shadow(std::size_t i) const {
    return base / ("shadow_" + std::to_string(i) + ".json");
  }
};

json manifest_payload(const Table& d, const MdsOptions& opt, std::size_t subset_size,
                      const std::vector<std::size_t>& record_rows) {
  json j;
  j["format_version"] = "1";
  j["m"] = opt.m;
  j["n"] = opt.n;
  j["seed"] = opt.seed;
  j["subset_size"] = subset_size;
  j["record_cap"] = opt.record_cap;
  j["data_fingerprint"] = d.fingerprint();
  j["records_scored"] = record_rows.size();
  return j;
}

}  // namespace

PrivacyReport mds(const SynthesizerFactory& factory, const Table& d,
                  const MdsOptions& opt) {
  if (opt.m < 2) throw ConfigError("mds needs m >= 2");
  if (opt.n < 1) throw ConfigError("mds needs n >= 1");
  if (d.rows() < 4) throw ConfigError("mds needs at least 4 rows");

  std::size_t subset_size = d.rows() / 2;
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::vector<std::uint8_t>> membership;
  draw_shadow_subsets(d.rows(), opt.m, opt.seed, &subsets, &membership);

  // Scored records: everything, or a seeded subset under the cap.
  std::vector<std::size_t> record_rows(d.rows());
  for (std::size_t i = 0; i < d.rows(); ++i) record_rows[i] = i;
  bool capped = opt.record_cap > 0 && opt.record_cap < d.rows();
  if (capped) {
    Rng rng(derive_seed(opt.seed, "record_cap"));
    record_rows = rng.sample_without_replacement(d.rows(), opt.record_cap);
    std::sort(record_rows.begin(), record_rows.end());
  }

  auto [d_norm, params] = normalize(d);
  auto mask = categorical_mask(d.schema());
  Table queries(d.schema_ptr());
  queries.reserve(record_rows.size());
  for (std::size_t r : record_rows) queries.append_row(d_norm.row_span(r));

  std::optional<RunDir> run_dir;
  if (!opt.run_dir.empty()) {
    run_dir = RunDir{fs::path(opt.run_dir)};
    fs::create_directories(run_dir->base);
    json expected = manifest_payload(d, opt, subset_size, record_rows);
    if (fs::exists(run_dir->manifest())) {
      std::ifstream in(run_dir->manifest());
      json found = json::parse(in, nullptr, false);
      if (found != expected) {
        throw ConfigError("run directory " + opt.run_dir +
                          " holds a different mds configuration");
      }
    } else {
      std::ofstream out(run_dir->manifest());
      out << expected.dump(2) << '\n';
    }
  }

  // Per-shadow accumulated nearest distances, summed over its n tables in
  // table order (serial per shadow, so resumable files are bit-stable).
  std::vector<std::vector<double>> shadow_sums(opt.m);
  std::vector<std::uint8_t> loaded(opt.m, 0);
  if (run_dir) {
    for (std::size_t i = 0; i < opt.m; ++i) {
      if (!fs::exists(run_dir->shadow(i))) continue;
      std::ifstream in(run_dir->shadow(i));
      json j = json::parse(in, nullptr, false);
      if (j.is_discarded() || !j.contains("sums")) continue;
      auto sums = j["sums"].get<std::vector<double>>();
      if (sums.size() != record_rows.size()) continue;
      shadow_sums[i] = std::move(sums);
      loaded[i] = 1;
    }
  }

  // Exceptions may not cross the parallel region; the first failure is
  // captured and rethrown after the loop.
  std::string first_error;
  bool failed = false;
  auto m_count = static_cast<std::int64_t>(opt.m);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < m_count; ++ii) {
    auto i = static_cast<std::size_t>(ii);
    if (loaded[i] || failed) continue;
    try {
      Table subset(d.schema_ptr());
      subset.reserve(subset_size);
      for (std::size_t r : subsets[i]) subset.append_row(d.row_span(r));
      SynthesizerPtr synth = factory(subset, derive_seed(opt.seed, "shadow_train", i));

      std::vector<double> sums(record_rows.size(), 0.0);
      std::vector<double> dist(record_rows.size());
      for (std::size_t t = 0; t < opt.n; ++t) {
        Table s = synth->sample(subset_size,
                                derive_seed(opt.seed, "shadow_sample", i * opt.n + t));
        Table s_norm = normalize(s, params).first;
        nearest_distances_serial(queries, s_norm, mask, dist);
        for (std::size_t r = 0; r < sums.size(); ++r) sums[r] += dist[r];
      }
      shadow_sums[i] = std::move(sums);

      if (run_dir) {
        json j;
        j["shadow"] = i;
        j["sums"] = shadow_sums[i];
        fs::path tmp = run_dir->shadow(i);
        tmp += ".tmp";
        {
          std::ofstream out(tmp);
          out << j.dump() << '\n';
        }
        fs::rename(tmp, run_dir->shadow(i));
      }
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (!failed) {
          failed = true;
          first_error = "shadow " + std::to_string(i) + " failed: " + e.what();
        }
      }
    }
  }
  if (failed) throw Error(first_error);

  PrivacyReport report;
  report.m = opt.m;
  report.n = opt.n;
  report.seed = opt.seed;
  report.records_scored = record_rows.size();
  report.capped = capped;
  report.records.reserve(record_rows.size());

  double grand_sum = 0.0;
  for (std::size_t r = 0; r < record_rows.size(); ++r) {
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t in_shadows = 0, out_shadows = 0;
    for (std::size_t i = 0; i < opt.m; ++i) {
      if (membership[i][record_rows[r]]) {
        in_sum += shadow_sums[i][r];
        ++in_shadows;
      } else {
        out_sum += shadow_sums[i][r];
        ++out_shadows;
      }
    }
    DisclosureRecord rec;
    rec.record = record_rows[r];
    rec.in_mean = in_sum / static_cast<double>(in_shadows * opt.n);
    rec.out_mean = out_sum / static_cast<double>(out_shadows * opt.n);
    rec.score = std::fabs(rec.in_mean - rec.out_mean);
    report.mds = std::max(report.mds, rec.score);
    grand_sum += in_sum + out_sum;
    report.records.push_back(rec);
  }
  report.mean_nearest_distance =
      record_rows.empty()
          ? 0.0
          : grand_sum / static_cast<double>(record_rows.size() * opt.m * opt.n);
  return report;
}

PrivacyReport mds(const SynthesizerSpec& spec, const Table& d, const MdsOptions& opt) {
  return mds(factory_for(spec), d, opt);
}

namespace {

double percentile_of(std::vector<double> values, double percentile) {
  if (values.empty()) throw Error("percentile of an empty sample");
  if (percentile < 0.0 || percentile > 100.0) {
    throw ConfigError("percentile must be in [0, 100]");
  }
  std::sort(values.begin(), values.end());
  double rank = percentile / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(rank);
  double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace

double dcr(const Table& real, const Table& synthetic, double percentile) {
  if (real.rows() == 0 || synthetic.rows() == 0) throw Error("dcr: empty table");
  auto [real_n, params] = normalize(real);
  Table syn_n = normalize(synthetic, params).first;
  auto mask = categorical_mask(real.schema());
  std::vector<double> dist(syn_n.rows());
  nearest_distances(syn_n, real_n, mask, dist);
  return percentile_of(std::move(dist), percentile);
}

double nndr(const Table& real, const Table& synthetic, double percentile) {
  if (real.rows() < 2) throw ConfigError("nndr needs at least 2 real rows");
  if (synthetic.rows() == 0) throw Error("nndr: empty synthetic table");
  auto [real_n, params] = normalize(real);
  Table syn_n = normalize(synthetic, params).first;
  auto mask = categorical_mask(real.schema());
  std::vector<double> d1(syn_n.rows()), d2(syn_n.rows());
  two_nearest_distances(syn_n, real_n, mask, d1, d2);
  std::vector<double> ratio(syn_n.rows());
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    ratio[i] = d2[i] > 0.0 ? d1[i] / d2[i] : 1.0;
  }
  return percentile_of(std::move(ratio), percentile);
}

}  // namespace tabsyn
