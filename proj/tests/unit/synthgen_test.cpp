#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "malfuse/gbdt.hpp"
#include "malfuse/metrics.hpp"
#include "malfuse/pipeline.hpp"
#include "malfuse/synthgen.hpp"

namespace malfuse::synthgen {
namespace {

DomainSpec small_spec(double separability, std::uint64_t seed, std::size_t n = 600) {
  return {"toy", n, 12, 4, separability, 0.0, 0.0, seed};
}

// Sum of informative columns against zero; absent cells count as zero.
double bayes_rule_f1(const tabular::LabeledDataset& ds, const DomainSpec& spec) {
  const auto cols = informative_columns(spec);
  std::vector<std::uint8_t> pred(ds.n_rows());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    double s = 0.0;
    for (auto c : cols) s += ds.features.get(r, c).value_or(0.0);
    pred[r] = s > 0.0 ? 1 : 0;
  }
  return metrics::macro_f1(metrics::confusion(ds.labels, pred));
}

double trained_f1(const tabular::LabeledDataset& raw) {
  const auto prepared = pipeline::prepare_domain(raw, 0.8, 7);
  gbdt::GbdtConfig config;
  config.n_estimators = 60;
  config.early_stopping_rounds = 0;
  const auto result = gbdt::train(prepared.train, prepared.valid, config);
  const auto p = gbdt::predict_proba(result.ensemble, prepared.valid);
  return metrics::macro_f1(metrics::confusion(prepared.valid.labels, metrics::classify(p, 0.5)));
}

TEST(GenDomain, DeterministicPerSeed) {
  const auto spec = small_spec(1.0, 5);
  EXPECT_EQ(gen_domain(spec), gen_domain(spec));
  EXPECT_NE(gen_domain(spec).features, gen_domain(small_spec(1.0, 6)).features);
}

TEST(GenDomain, ExactShapeAndBalance) {
  const auto spec = small_spec(1.0, 5, 602);
  const auto ds = gen_domain(spec);
  EXPECT_EQ(ds.n_rows(), 602u);
  EXPECT_EQ(ds.n_cols(), 12u);
  EXPECT_EQ(ds.count_label(tabular::kMalware), 301u);
  EXPECT_EQ(ds.count_label(tabular::kBenign), 301u);
  EXPECT_EQ(ds.feature_names.front(), "toy_f000");
  EXPECT_EQ(ds.domain_id, "toy");
  EXPECT_NO_THROW(ds.validate());
}

TEST(GenDomain, InformativeColumnsCarryCentredShift) {
  auto spec = small_spec(2.0, 8, 4000);
  const auto ds = gen_domain(spec);
  const auto cols = informative_columns(spec);
  ASSERT_EQ(cols.size(), 4u);
  std::set<std::size_t> info(cols.begin(), cols.end());
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    double sum[2] = {0, 0};
    for (std::size_t r = 0; r < ds.n_rows(); ++r) sum[ds.labels[r]] += ds.features.value(r, c);
    const double mean_benign = sum[0] / 2000.0;
    const double mean_malware = sum[1] / 2000.0;
    if (info.count(c)) {
      EXPECT_NEAR(mean_benign, -1.0, 0.1) << c;
      EXPECT_NEAR(mean_malware, 1.0, 0.1) << c;
    } else {
      EXPECT_NEAR(mean_benign, 0.0, 0.1) << c;
      EXPECT_NEAR(mean_malware, 0.0, 0.1) << c;
    }
  }
}

TEST(GenDomain, EvasiveMalwareSitsAtTheMidpoint) {
  auto spec = small_spec(2.0, 9, 4000);
  spec.evasive_fraction = 1.0;
  const auto ds = gen_domain(spec);
  const auto c = informative_columns(spec).front();
  double sum[2] = {0, 0};
  for (std::size_t r = 0; r < ds.n_rows(); ++r) sum[ds.labels[r]] += ds.features.value(r, c);
  EXPECT_NEAR(sum[0] / 2000.0, -1.0, 0.1);
  EXPECT_NEAR(sum[1] / 2000.0, 0.0, 0.1);
}

TEST(GenDomain, MissingRateIsHonoured) {
  auto spec = small_spec(1.0, 10, 2000);
  spec.missing_rate = 0.1;
  const auto ds = gen_domain(spec);
  const double rate = static_cast<double>(ds.features.absent_count()) / (2000.0 * 12.0);
  EXPECT_NEAR(rate, 0.1, 0.01);
  EXPECT_EQ(gen_domain(small_spec(1.0, 10, 2000)).features.absent_count(), 0u);
}

TEST(GenDomain, NoSeparabilityMeansChanceLevel) {
  double total = 0.0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const double f1 = trained_f1(gen_domain(small_spec(0.0, 100 + s, 1000)));
    EXPECT_NEAR(f1, 0.5, 0.1) << s;
    total += f1;
  }
  EXPECT_NEAR(total / seeds, 0.5, 0.05);
}

TEST(GenDomain, LargeSeparabilityIsNearlyPerfect) {
  const auto ds = gen_domain(small_spec(10.0, 11, 2000));
  EXPECT_GE(trained_f1(ds), 0.99);
  EXPECT_GE(bayes_rule_f1(ds, small_spec(10.0, 11, 2000)), 0.99);
}

TEST(DefaultBenchmark, DisjointNamespacesAndDerivedSeeds) {
  auto spec = default_benchmark(42);
  for (auto& d : spec.domains) d.n_samples = 200;
  const auto data = gen_benchmark(spec);
  ASSERT_EQ(data.size(), 3u);
  std::set<std::string> names;
  std::size_t total = 0;
  for (const auto& [id, ds] : data) {
    EXPECT_EQ(ds.domain_id, id);
    names.insert(ds.feature_names.begin(), ds.feature_names.end());
    total += ds.n_cols();
  }
  EXPECT_EQ(names.size(), total);
  EXPECT_EQ(gen_benchmark(spec), data);
  auto other = spec;
  other.master_seed = 43;
  EXPECT_NE(gen_benchmark(other).at("static").features, data.at("static").features);
}

TEST(DefaultBenchmark, SignalStrengthOrdering) {
  // Bayes-rule F1 on standalone data ranks memory above static above behavioral.
  const auto s = default_static_spec(42);
  const auto b = default_behavioral_spec(42);
  const auto m = default_memory_spec(42);
  const double fs = bayes_rule_f1(gen_domain(s), s);
  const double fb = bayes_rule_f1(gen_domain(b), b);
  const double fm = bayes_rule_f1(gen_domain(m), m);
  EXPECT_GT(fm, fs);
  EXPECT_GT(fs, fb);
  EXPECT_EQ(default_benchmark().domains.front().evasive_fraction, kDefaultEvasiveFraction);
  EXPECT_EQ(s.evasive_fraction, 0.0);
}

TEST(Specs, ValidationErrors) {
  auto spec = small_spec(1.0, 1);
  spec.n_samples = 7;
  EXPECT_THROW(gen_domain(spec), std::invalid_argument);
  spec = small_spec(1.0, 1);
  spec.n_informative = 13;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = small_spec(-1.0, 1);
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = small_spec(1.0, 1);
  spec.missing_rate = 1.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);

  BenchmarkSpec bench;
  EXPECT_THROW(bench.validate(), std::invalid_argument);
  bench.domains = {small_spec(1.0, 1), small_spec(1.0, 2)};
  EXPECT_THROW(bench.validate(), std::invalid_argument);
  bench.domains[1].domain_id = "toy_fx";
  EXPECT_THROW(bench.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace malfuse::synthgen
