#include "malfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "malfuse/metrics.hpp"
#include "malfuse/random.hpp"
#include "malfuse/text_io.hpp"
#include "worker_pool.hpp"

namespace malfuse::fusion {

double FusionWeights::at(std::string_view domain) const {
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i] == domain) return values[i];
  }
  throw std::invalid_argument("fusion weights have no domain '" + std::string(domain) + "'");
}

void FusionWeights::validate() const {
  if (domains.size() != values.size() || domains.empty()) {
    throw std::invalid_argument("fusion weights: domain/weight count mismatch");
  }
  double sum = 0.0;
  for (double w : values) {
    if (!(w >= 0.0)) throw std::invalid_argument("fusion weights: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("fusion weights: weights sum to " + format_real(sum));
  }
}

void FusionValidationSet::validate() const {
  if (probs.size() != labels.size() * domains.size() || origin.size() != labels.size()) {
    throw std::invalid_argument("fusion set: inconsistent array sizes");
  }
  for (auto y : labels) {
    if (y > 1) throw std::invalid_argument("fusion set: non-binary label");
  }
}

FusionValidationSet FusionValidationSet::without_model(std::string_view domain) const {
  const auto it = std::find(domains.begin(), domains.end(), domain);
  if (it == domains.end()) {
    throw std::invalid_argument("fusion set has no model '" + std::string(domain) + "'");
  }
  std::vector<std::string> keep;
  for (const auto& d : domains) {
    if (d != domain) keep.push_back(d);
  }
  return reordered(keep);
}

FusionValidationSet FusionValidationSet::reordered(std::span<const std::string> order) const {
  std::vector<std::size_t> src;
  for (const auto& d : order) {
    const auto it = std::find(domains.begin(), domains.end(), d);
    if (it == domains.end()) throw std::invalid_argument("fusion set has no model '" + d + "'");
    src.push_back(static_cast<std::size_t>(it - domains.begin()));
  }
  FusionValidationSet out;
  out.domains.assign(order.begin(), order.end());
  out.labels = labels;
  out.probs.reserve(n_rows() * src.size());
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (auto m : src) out.probs.push_back(prob(r, m));
  }
  // Origins keep pointing at the same domain name when it survives.
  out.origin.resize(origin.size());
  for (std::size_t r = 0; r < origin.size(); ++r) {
    const auto& name = domains[origin[r]];
    const auto it = std::find(out.domains.begin(), out.domains.end(), name);
    out.origin[r] = it == out.domains.end()
                        ? static_cast<std::uint32_t>(out.domains.size())
                        : static_cast<std::uint32_t>(it - out.domains.begin());
  }
  return out;
}

double out_of_domain_prior(const gbdt::Ensemble& model, const tabular::PreprocessStats& stats) {
  const auto own = stats.select(model.feature_names);
  tabular::LabeledDataset blank;
  blank.feature_names = own.feature_names;
  blank.features = tabular::FeatureMatrix(1, own.feature_names.size());
  for (std::size_t c = 0; c < own.feature_names.size(); ++c) blank.features.set_absent(0, c);
  blank.labels = {0};
  return gbdt::predict_proba(model, tabular::apply_preprocess(blank, own)).front();
}

FusionValidationSet build_fusion_set(const std::map<std::string, gbdt::Ensemble>& models,
                                     const std::map<std::string, tabular::LabeledDataset>& valid_splits,
                                     const std::map<std::string, tabular::PreprocessStats>& stats,
                                     std::span<const std::string> domain_order,
                                     const BuildOptions& options) {
  if (domain_order.empty()) throw std::invalid_argument("build_fusion_set: no domains");
  if (models.size() != domain_order.size() || valid_splits.size() != domain_order.size() ||
      stats.size() != domain_order.size()) {
    throw std::invalid_argument("build_fusion_set: domain key mismatch");
  }
  for (const auto& d : domain_order) {
    if (!models.contains(d) || !valid_splits.contains(d) || !stats.contains(d)) {
      throw std::invalid_argument("build_fusion_set: domain key mismatch at '" + d + "'");
    }
  }

  const std::size_t n_models = domain_order.size();
  std::vector<double> priors(n_models);
  for (std::size_t m = 0; m < n_models; ++m) {
    const auto& d = domain_order[m];
    priors[m] = out_of_domain_prior(models.at(d), stats.at(d));
  }

  FusionValidationSet set;
  set.domains.assign(domain_order.begin(), domain_order.end());
  for (std::size_t m = 0; m < n_models; ++m) {
    const auto& d = domain_order[m];
    const auto& raw = valid_splits.at(d);
    if (raw.n_rows() == 0) {
      throw std::invalid_argument("build_fusion_set: empty validation split for '" + d + "'");
    }
    const tabular::LabeledDataset* source = &raw;
    tabular::LabeledDataset capped;
    if (options.per_domain_cap && raw.n_rows() > *options.per_domain_cap) {
      std::vector<std::size_t> rows(raw.n_rows());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      Xoshiro256 rng(derive_seed(options.seed, d));
      shuffle(std::span<std::size_t>(rows), rng);
      rows.resize(*options.per_domain_cap);
      std::sort(rows.begin(), rows.end());
      capped = tabular::take_rows(raw, rows);
      source = &capped;
    }
    const auto& own_stats = stats.at(d);
    const auto prepared =
        tabular::apply_preprocess(tabular::project_columns(*source, own_stats.feature_names), own_stats);
    const auto native = gbdt::predict_proba(models.at(d), prepared);

    for (std::size_t r = 0; r < prepared.n_rows(); ++r) {
      set.origin.push_back(static_cast<std::uint32_t>(m));
      set.labels.push_back(prepared.labels[r]);
      for (std::size_t k = 0; k < n_models; ++k) {
        set.probs.push_back(k == m ? native[r] : priors[k]);
      }
    }
  }
  return set;
}

double fuse(std::span<const double> probs, std::span<const double> weights) {
  if (probs.size() != weights.size()) throw std::invalid_argument("fuse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += weights[i] * probs[i];
  return s;
}

double fuse(const std::map<std::string, double>& probs, const FusionWeights& weights) {
  if (probs.size() != weights.domains.size()) throw std::invalid_argument("fuse: key mismatch");
  std::vector<double> ordered;
  ordered.reserve(probs.size());
  for (const auto& d : weights.domains) {
    const auto it = probs.find(d);
    if (it == probs.end()) throw std::invalid_argument("fuse: key mismatch at '" + d + "'");
    ordered.push_back(it->second);
  }
  return fuse(ordered, weights.values);
}

std::vector<double> fuse_all(const FusionValidationSet& set, std::span<const double> weights) {
  if (weights.size() != set.n_models()) throw std::invalid_argument("fuse_all: size mismatch");
  std::vector<double> out(set.n_rows());
  for (std::size_t r = 0; r < set.n_rows(); ++r) out[r] = fuse(set.row(r), weights);
  return out;
}

int lattice_divisions(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("invalid grid step");
  const double inv = 1.0 / step;
  const auto m = std::llround(inv);
  if (m < 1 || m > 100000 || std::abs(static_cast<double>(m) * step - 1.0) > 1e-9) {
    throw std::invalid_argument("invalid grid step " + format_real(step) +
                                ": it must divide 1 evenly");
  }
  return static_cast<int>(m);
}

std::uint64_t simplex_size(std::size_t n_domains, int divisions) {
  // C(m + n - 1, n - 1)
  const std::uint64_t k = n_domains - 1;
  const std::uint64_t n = static_cast<std::uint64_t>(divisions) + k;
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

namespace {

void compose(std::vector<int>& parts, std::size_t pos, int remaining, int m,
             std::vector<WeightVector>& out) {
  if (pos + 1 == parts.size()) {
    parts[pos] = remaining;
    WeightVector w(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      w[i] = static_cast<double>(parts[i]) / static_cast<double>(m);
    }
    out.push_back(std::move(w));
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    parts[pos] = k;
    compose(parts, pos + 1, remaining - k, m, out);
  }
}

}  // namespace

std::vector<WeightVector> enumerate_simplex(std::size_t n_domains, double step) {
  if (n_domains < 2) throw std::invalid_argument("enumerate_simplex: need at least 2 domains");
  const int m = lattice_divisions(step);
  std::vector<WeightVector> out;
  out.reserve(static_cast<std::size_t>(simplex_size(n_domains, m)));
  std::vector<int> parts(n_domains, 0);
  compose(parts, 0, m, m, out);
  return out;
}

WeightVector project_to_simplex(std::span<const double> weights) {
  WeightVector out(weights.begin(), weights.end());
  double sum = 0.0;
  for (auto& w : out) {
    w = std::max(w, 0.0);
    sum += w;
  }
  if (!(sum > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (auto& w : out) w /= sum;
  return out;
}

WeightVector snap_to_grid(std::span<const double> weights, double step) {
  const int m = lattice_divisions(step);
  const std::size_t n = weights.size();
  std::vector<long long> k(n);
  std::vector<double> rem(n);
  long long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::max(weights[i], 0.0) * m;
    k[i] = static_cast<long long>(std::floor(x + 1e-9));
    rem[i] = x - static_cast<double>(k[i]);
    total += k[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t j = 0; total < m; j = (j + 1) % n) {
    ++k[order[j]];
    ++total;
  }
  for (auto it = order.rbegin(); total > m;) {
    if (k[*it] > 0) {
      --k[*it];
      --total;
    }
    if (++it == order.rend()) it = order.rbegin();
  }
  WeightVector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(k[i]) / m;
  return out;
}

double macro_f1_at(const FusionValidationSet& set, std::span<const double> weights,
                   double threshold) {
  metrics::ConfusionMatrix cm;
  for (std::size_t r = 0; r < set.n_rows(); ++r) {
    const bool predicted = fuse(set.row(r), weights) >= threshold;
    const bool actual = set.labels[r] != 0;
    if (actual) {
      ++(predicted ? cm.tp : cm.fn);
    } else {
      ++(predicted ? cm.fp : cm.tn);
    }
  }
  return metrics::macro_f1(cm);
}

FusionWeights WeightGridResult::best() const {
  return FusionWeights{domains, entries.at(best_index).weights};
}

WeightGridResult grid_search(const FusionValidationSet& set, double step, double threshold,
                             int num_workers) {
  set.validate();
  if (set.n_rows() == 0) throw std::invalid_argument("grid_search: empty fusion set");
  const auto positives = std::count(set.labels.begin(), set.labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(set.n_rows())) {
    throw std::invalid_argument("grid_search: fusion set contains a single class");
  }
  WeightGridResult result;
  result.domains = set.domains;
  result.step = step;
  result.threshold = threshold;
  const auto lattice = enumerate_simplex(set.n_models(), step);
  result.entries.resize(lattice.size());

  detail::WorkerPool pool(num_workers);
  pool.run(lattice.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      result.entries[i] = GridEntry{lattice[i], macro_f1_at(set, lattice[i], threshold)};
    }
  });
  for (std::size_t i = 1; i < result.entries.size(); ++i) {
    if (result.entries[i].macro_f1 > result.entries[result.best_index].macro_f1) {
      result.best_index = i;
    }
  }
  return result;
}

FusionBundle bundle_from(const WeightGridResult& result) {
  return FusionBundle{result.best(), result.step, result.threshold, result.best_f1()};
}

std::string bundle_to_text(const FusionBundle& b) {
  std::string out = "malfuse_fusion_weights\t1\n";
  out += "step\t" + format_real(b.step) + '\n';
  out += "threshold\t" + format_real(b.threshold) + '\n';
  out += "macro_f1\t" + format_real(b.macro_f1) + '\n';
  out += "domains\t" + std::to_string(b.weights.domains.size()) + '\n';
  for (std::size_t i = 0; i < b.weights.domains.size(); ++i) {
    out += "weight\t" + b.weights.domains[i] + '\t' + format_real(b.weights.values[i]) + '\n';
  }
  return out;
}

FusionBundle bundle_from_text(std::string_view text, std::string source) {
  RecordReader in(text, std::move(source));
  if (in.expect("malfuse_fusion_weights") != "1") in.fail("unsupported weights version");
  FusionBundle b;
  b.step = in.expect_real("step");
  b.threshold = in.expect_real("threshold");
  b.macro_f1 = in.expect_real("macro_f1");
  const auto n = in.expect_int("domains");
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rec = in.expect("weight");
    const auto parts = split(rec, '\t');
    if (parts.size() != 2) in.fail("weight record needs domain and value");
    b.weights.domains.emplace_back(parts[0]);
    b.weights.values.push_back(parse_real(parts[1]));
  }
  if (!in.done()) in.fail("trailing data");
  try {
    b.weights.validate();
  } catch (const std::invalid_argument& e) {
    in.fail(e.what());
  }
  return b;
}

std::string grid_to_csv(const WeightGridResult& result) {
  std::string out;
  for (const auto& d : result.domains) out += "w_" + d + ',';
  out += "macro_f1\n";
  for (const auto& e : result.entries) {
    for (double w : e.weights) out += format_real(w) + ',';
    out += format_real(e.macro_f1) + '\n';
  }
  return out;
}

}  // namespace malfuse::fusion
