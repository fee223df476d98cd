#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "malfuse/fusion.hpp"
#include "malfuse/metrics.hpp"
#include "malfuse/random.hpp"
#include "malfuse/tabular.hpp"
#include "support.hpp"

namespace malfuse::fusion {
namespace {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

TEST(EnumerateSimplex, SixtySixVectorsForThreeDomains) {
  const auto grid = enumerate_simplex(3, 0.1);
  EXPECT_EQ(grid.size(), 66u);
  EXPECT_EQ(grid.size(), binomial(12, 2));
  std::size_t brute = 0;
  for (int a = 0; a <= 10; ++a) {
    for (int b = 0; b <= 10 - a; ++b) {
      const int c = 10 - a - b;
      ASSERT_LT(brute, grid.size());
      EXPECT_NEAR(grid[brute][0], a / 10.0, 1e-12);
      EXPECT_NEAR(grid[brute][1], b / 10.0, 1e-12);
      EXPECT_NEAR(grid[brute][2], c / 10.0, 1e-12);
      ++brute;
    }
  }
  for (const auto& w : grid) EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);
}

TEST(EnumerateSimplex, TinyTwoDomainCase) {
  const auto grid = enumerate_simplex(2, 0.5);
  ASSERT_EQ(grid.size(), 3u);
  EXPECT_EQ(grid[0], (WeightVector{0.0, 1.0}));
  EXPECT_EQ(grid[1], (WeightVector{0.5, 0.5}));
  EXPECT_EQ(grid[2], (WeightVector{1.0, 0.0}));
}

TEST(EnumerateSimplex, CountFormulaAndLexicographicOrder) {
  for (std::size_t n = 2; n <= 5; ++n) {
    for (double step : {0.5, 0.25, 0.2, 0.1, 0.05}) {
      const auto grid = enumerate_simplex(n, step);
      const auto m = static_cast<std::uint64_t>(std::llround(1.0 / step));
      EXPECT_EQ(grid.size(), binomial(m + n - 1, n - 1)) << n << " " << step;
      EXPECT_EQ(simplex_size(n, static_cast<int>(m)), grid.size());
      EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
    }
  }
}

TEST(EnumerateSimplex, InvalidArguments) {
  EXPECT_THROW(enumerate_simplex(3, 0.3), std::invalid_argument);
  EXPECT_THROW(enumerate_simplex(3, 0.0), std::invalid_argument);
  EXPECT_THROW(enumerate_simplex(1, 0.1), std::invalid_argument);
}

TEST(Fuse, WorkedExamples) {
  EXPECT_EQ(fuse(std::vector<double>{0.73, 0.2, 0.4}, std::vector<double>{1, 0, 0}), 0.73);
  EXPECT_NEAR(fuse(std::vector<double>{0.9, 0.5, 0.1}, std::vector<double>{0.5, 0.4, 0.1}), 0.66, 1e-12);
  FusionWeights w{{"static", "behavioral", "memory"}, {0.5, 0.4, 0.1}};
  EXPECT_NEAR(fuse({{"static", 0.9}, {"behavioral", 0.5}, {"memory", 0.1}}, w), 0.66, 1e-12);
  EXPECT_THROW(fuse({{"static", 0.9}, {"other", 0.5}, {"memory", 0.1}}, w), std::invalid_argument);
}

TEST(Fuse, DotProductOracleAndConvexity) {
  Xoshiro256 rng(30);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> w(3), p(3);
    double total = 0.0;
    for (auto& x : w) total += (x = rng.uniform_open());
    for (auto& x : w) x /= total;
    for (auto& x : p) x = rng.uniform_open();
    const double oracle = w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
    const double got = fuse(p, w);
    EXPECT_NEAR(got, oracle, 1e-12);
    EXPECT_GE(got, *std::min_element(p.begin(), p.end()) - 1e-15);
    EXPECT_LE(got, *std::max_element(p.begin(), p.end()) + 1e-15);
  }
}

TEST(FusionWeights, Validation) {
  EXPECT_NO_THROW((FusionWeights{{"a", "b"}, {0.25, 0.75}}.validate()));
  EXPECT_THROW((FusionWeights{{"a", "b"}, {0.5, 0.6}}.validate()), std::invalid_argument);
  EXPECT_THROW((FusionWeights{{"a", "b"}, {-0.5, 1.5}}.validate()), std::invalid_argument);
  EXPECT_THROW((FusionWeights{{"a"}, {0.5, 0.5}}.validate()), std::invalid_argument);
}

// Rows listed as (origin, label, p_model0, p_model1, ...).
FusionValidationSet make_set(std::vector<std::string> domains,
                             const std::vector<std::vector<double>>& rows) {
  FusionValidationSet set;
  set.domains = std::move(domains);
  for (const auto& r : rows) {
    set.origin.push_back(static_cast<std::uint32_t>(r[0]));
    set.labels.push_back(static_cast<std::uint8_t>(r[1]));
    set.probs.insert(set.probs.end(), r.begin() + 2, r.end());
  }
  return set;
}

FusionValidationSet random_set(std::size_t n, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = static_cast<double>(rng.below(2));
    std::vector<double> row{static_cast<double>(rng.below(3)), y};
    for (int m = 0; m < 3; ++m) {
      const double signal = 0.15 * (m + 1) * (2 * y - 1);
      row.push_back(std::clamp(0.5 + signal + 0.4 * (rng.uniform_open() - 0.5), 0.001, 0.999));
    }
    rows.push_back(row);
  }
  return make_set({"a", "b", "c"}, rows);
}

TEST(GridSearch, PicksTheOnlyInformativeModel) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 40; ++i) {
    const double y = i % 2;
    // A barely separates; b and c point the wrong way.
    rows.push_back({0, y, y == 1 ? 0.51 : 0.49, y == 1 ? 0.1 : 0.9, y == 1 ? 0.2 : 0.8});
  }
  const auto result = grid_search(make_set({"a", "b", "c"}, rows), 0.1);
  EXPECT_EQ(result.best().values, (WeightVector{1.0, 0.0, 0.0}));
  EXPECT_EQ(result.best_f1(), 1.0);
}

TEST(GridSearch, IdenticalModelsTieToLexicographicallySmallest) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 30; ++i) {
    const double p = 0.1 + 0.8 * (i % 5) / 4.0;
    rows.push_back({0, static_cast<double>(i % 2), p, p, p});
  }
  const auto result = grid_search(make_set({"a", "b", "c"}, rows), 0.1);
  ASSERT_EQ(result.entries.size(), 66u);
  for (const auto& e : result.entries) EXPECT_EQ(e.macro_f1, result.entries.front().macro_f1);
  EXPECT_EQ(result.best_index, 0u);
  EXPECT_EQ(result.best().values, (WeightVector{0.0, 0.0, 1.0}));
}

TEST(GridSearch, BestDominatesCornersAndMatchesExhaustiveRecheck) {
  const auto set = random_set(300, 31);
  const auto result = grid_search(set, 0.1);
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<double> corner(3, 0.0);
    corner[m] = 1.0;
    EXPECT_GE(result.best_f1(), macro_f1_at(set, corner, 0.5));
  }
  double best = -1.0;
  for (const auto& w : enumerate_simplex(3, 0.1)) {
    std::vector<std::uint8_t> pred;
    for (std::size_t r = 0; r < set.n_rows(); ++r) {
      const double f = w[0] * set.prob(r, 0) + w[1] * set.prob(r, 1) + w[2] * set.prob(r, 2);
      pred.push_back(f >= 0.5 ? 1 : 0);
    }
    best = std::max(best, metrics::macro_f1(metrics::confusion(set.labels, pred)));
  }
  EXPECT_EQ(result.best_f1(), best);
}

TEST(GridSearch, DeterministicAndWorkerIndependent) {
  const auto set = random_set(500, 32);
  const auto a = grid_search(set, 0.05, 0.5, 1);
  const auto b = grid_search(set, 0.05, 0.5, 4);
  EXPECT_EQ(grid_to_csv(a), grid_to_csv(b));
  EXPECT_EQ(a.best_index, b.best_index);
}

TEST(GridSearch, EquivariantUnderDomainPermutation) {
  const auto set = random_set(400, 33);
  const auto base = grid_search(set, 0.1);
  const std::vector<std::string> order{"c", "a", "b"};
  const auto permuted = grid_search(set.reordered(order), 0.1);
  EXPECT_EQ(permuted.best_f1(), base.best_f1());
  const auto w = base.best();
  const auto pw = permuted.best();
  // With a unique optimum the chosen weights follow their domains.
  const auto ties = std::count_if(base.entries.begin(), base.entries.end(),
                                  [&](const GridEntry& e) { return e.macro_f1 == base.best_f1(); });
  if (ties == 1) {
    for (const auto& d : order) EXPECT_NEAR(pw.at(d), w.at(d), 1e-12);
  }
}

TEST(GridSearch, SingleClassSetIsAnError) {
  const auto set = make_set({"a", "b"}, {{0, 1, 0.2, 0.3}, {1, 1, 0.6, 0.4}});
  EXPECT_THROW(grid_search(set, 0.1), std::invalid_argument);
}

TEST(ProjectAndSnap, LandOnTheLattice) {
  EXPECT_EQ(project_to_simplex(std::vector<double>{-0.2, 0.5, 0.5}), (WeightVector{0.0, 0.5, 0.5}));
  EXPECT_EQ(project_to_simplex(std::vector<double>{0.0, 0.0}), (WeightVector{0.5, 0.5}));
  Xoshiro256 rng(34);
  const auto lattice = enumerate_simplex(3, 0.1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w{rng.uniform_open(), rng.uniform_open() - 0.3, rng.uniform_open()};
    const auto snapped = snap_to_grid(project_to_simplex(w), 0.1);
    bool found = false;
    for (const auto& v : lattice) {
      bool same = true;
      for (std::size_t k = 0; k < 3; ++k) same = same && std::abs(v[k] - snapped[k]) < 1e-12;
      found = found || same;
    }
    EXPECT_TRUE(found);
  }
}

TEST(Bundle, TextRoundTripAndGridCsv) {
  const auto set = random_set(200, 35);
  const auto result = grid_search(set, 0.1);
  const auto bundle = bundle_from(result);
  const auto text = bundle_to_text(bundle);
  const auto back = bundle_from_text(text);
  EXPECT_EQ(back.weights, bundle.weights);
  EXPECT_EQ(back.macro_f1, bundle.macro_f1);
  EXPECT_EQ(bundle_to_text(back), text);
  const auto csv = grid_to_csv(result);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 67);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "w_a,w_b,w_c,macro_f1");
}

// Three small trained domains with disjoint feature names.
struct Trained {
  std::map<std::string, gbdt::Ensemble> models;
  std::map<std::string, tabular::LabeledDataset> valid;
  std::map<std::string, tabular::PreprocessStats> stats;
  std::vector<std::string> order{"s", "b", "m"};
};

Trained train_three(const std::vector<std::size_t>& valid_sizes) {
  Trained t;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = t.order[i];
    auto train = test::random_dataset(200, 3, 40 + i, 1, 0.05);
    auto valid = test::random_dataset(valid_sizes[i], 3, 50 + i, 1, 0.05);
    for (auto* ds : {&train, &valid}) {
      for (auto& n : ds->feature_names) n = d + "_" + n;
      ds->domain_id = d;
    }
    const auto stats = tabular::fit_preprocess(train);
    const auto pre = tabular::apply_preprocess(train, stats);
    t.models[d] = gbdt::train(pre, pre, gbdt::GbdtConfig{.n_estimators = 20}).ensemble;
    t.valid[d] = valid;
    t.stats[d] = stats;
  }
  return t;
}

TEST(BuildFusionSet, UnionSizeAndConstantPriors) {
  const auto t = train_three({100, 50, 50});
  const auto set = build_fusion_set(t.models, t.valid, t.stats, t.order);
  ASSERT_EQ(set.n_rows(), 200u);
  for (std::size_t m = 0; m < 3; ++m) {
    // Independent recomputation: the model's median vector, scaled by its stats.
    const auto& stats = t.stats.at(t.order[m]);
    std::vector<std::vector<double>> row(1);
    for (std::size_t c = 0; c < stats.feature_names.size(); ++c) {
      row[0].push_back(stats.scale(c, stats.median[c]));
    }
    const auto median_ds = test::make_dataset(row, {0}, stats.feature_names);
    const double prior = gbdt::predict_proba(t.models.at(t.order[m]), median_ds)[0];
    EXPECT_EQ(out_of_domain_prior(t.models.at(t.order[m]), stats), prior);
    for (std::size_t r = 0; r < set.n_rows(); ++r) {
      if (set.origin[r] != m) EXPECT_EQ(set.prob(r, m), prior);
    }
  }
}

TEST(BuildFusionSet, NativeScoresMatchDirectPrediction) {
  const auto t = train_three({30, 30, 30});
  const auto set = build_fusion_set(t.models, t.valid, t.stats, t.order);
  const auto pre = tabular::apply_preprocess(t.valid.at("b"), t.stats.at("b"));
  const auto direct = gbdt::predict_proba(t.models.at("b"), pre);
  std::size_t k = 0;
  for (std::size_t r = 0; r < set.n_rows(); ++r) {
    if (set.origin[r] != 1) continue;
    EXPECT_EQ(set.prob(r, 1), direct[k]);
    EXPECT_EQ(set.labels[r], t.valid.at("b").labels[k]);
    ++k;
  }
  EXPECT_EQ(k, 30u);
}

TEST(BuildFusionSet, CapAndErrors) {
  auto t = train_three({60, 20, 20});
  BuildOptions options;
  options.per_domain_cap = 25;
  const auto capped = build_fusion_set(t.models, t.valid, t.stats, t.order, options);
  EXPECT_EQ(capped.n_rows(), 65u);
  EXPECT_EQ(build_fusion_set(t.models, t.valid, t.stats, t.order, options).probs, capped.probs);

  auto missing = t.models;
  missing.erase("m");
  EXPECT_THROW(build_fusion_set(missing, t.valid, t.stats, t.order), std::invalid_argument);
  auto empty = t.valid;
  empty["m"] = tabular::take_rows(empty["m"], std::vector<std::size_t>{});
  EXPECT_THROW(build_fusion_set(t.models, empty, t.stats, t.order), std::invalid_argument);
}

}  // namespace
}  // namespace malfuse::fusion
