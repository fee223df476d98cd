#include "malfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "malfuse/random.hpp"

namespace malfuse::synthgen {

void DomainSpec::validate() const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("domain spec '" + domain_id + "': " + what);
  };
  if (domain_id.empty()) fail("empty domain id");
  if (n_samples < 4 || n_samples % 2 != 0) fail("n_samples must be even and >= 4");
  if (n_features < 1) fail("n_features must be >= 1");
  if (n_informative > n_features) fail("n_informative exceeds n_features");
  if (!(separability >= 0.0) || !std::isfinite(separability)) fail("separability must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) fail("missing_rate must lie in [0,1)");
  if (!(evasive_fraction >= 0.0 && evasive_fraction <= 1.0)) {
    fail("evasive_fraction must lie in [0,1]");
  }
}

void BenchmarkSpec::validate() const {
  if (domains.empty()) throw std::invalid_argument("benchmark spec: no domains");
  std::set<std::string> ids;
  for (const auto& d : domains) {
    d.validate();
    if (!ids.insert(d.domain_id).second) {
      throw std::invalid_argument("benchmark spec: duplicate domain '" + d.domain_id + "'");
    }
  }
  // Feature namespaces "<id>_f..." collide only if one id extends another with "_f".
  for (const auto& a : ids) {
    for (const auto& b : ids) {
      if (a != b && b.rfind(a + "_f", 0) == 0) {
        throw std::invalid_argument("benchmark spec: feature namespaces of '" + a + "' and '" +
                                    b + "' overlap");
      }
    }
  }
}

std::vector<std::string> BenchmarkSpec::domain_ids() const {
  std::vector<std::string> ids;
  for (const auto& d : domains) ids.push_back(d.domain_id);
  return ids;
}

DomainSpec default_static_spec(std::uint64_t seed) {
  return {"static", 6400, 240, 24, 1.0, 0.02, 0.0, seed};
}

DomainSpec default_behavioral_spec(std::uint64_t seed) {
  return {"behavioral", 1200, 50, 10, 0.8, 0.05, 0.0, seed};
}

DomainSpec default_memory_spec(std::uint64_t seed) {
  return {"memory", 4800, 40, 8, 2.5, 0.0, 0.0, seed};
}

BenchmarkSpec default_benchmark(std::uint64_t master_seed, double evasive_fraction) {
  BenchmarkSpec spec;
  spec.master_seed = master_seed;
  spec.domains = {default_static_spec(), default_behavioral_spec(), default_memory_spec()};
  for (auto& d : spec.domains) d.evasive_fraction = evasive_fraction;
  return spec;
}

std::vector<std::size_t> informative_columns(const DomainSpec& spec) {
  std::vector<std::size_t> cols(spec.n_features);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  Xoshiro256 rng(derive_seed(spec.seed, "informative"));
  shuffle(std::span<std::size_t>(cols), rng);
  cols.resize(spec.n_informative);
  std::sort(cols.begin(), cols.end());
  return cols;
}

tabular::LabeledDataset gen_domain(const DomainSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_samples;
  const std::size_t f = spec.n_features;

  tabular::LabeledDataset ds;
  ds.domain_id = spec.domain_id;
  ds.label_names = {"benign", "malware"};
  const std::size_t width = std::max<std::size_t>(3, std::to_string(f - 1).size());
  for (std::size_t c = 0; c < f; ++c) {
    std::string idx = std::to_string(c);
    idx.insert(0, width - idx.size(), '0');
    ds.feature_names.push_back(spec.domain_id + "_f" + idx);
  }

  ds.labels.assign(n, tabular::kBenign);
  std::fill(ds.labels.begin() + static_cast<std::ptrdiff_t>(n / 2), ds.labels.end(),
            tabular::kMalware);
  {
    Xoshiro256 rng(derive_seed(spec.seed, "labels"));
    shuffle(std::span<std::uint8_t>(ds.labels), rng);
  }

  std::vector<std::uint8_t> evasive(n, 0);
  {
    std::vector<std::size_t> malware;
    for (std::size_t r = 0; r < n; ++r) {
      if (ds.labels[r] == tabular::kMalware) malware.push_back(r);
    }
    Xoshiro256 rng(derive_seed(spec.seed, "evasive"));
    shuffle(std::span<std::size_t>(malware), rng);
    const auto n_evasive = static_cast<std::size_t>(
        std::llround(spec.evasive_fraction * static_cast<double>(malware.size())));
    for (std::size_t i = 0; i < n_evasive; ++i) evasive[malware[i]] = 1;
  }

  std::vector<std::uint8_t> informative(f, 0);
  for (auto c : informative_columns(spec)) informative[c] = 1;

  ds.features = tabular::FeatureMatrix(n, f);
  // Class means sit at -s/2 (benign) and +s/2 (malware); evasive malware rows
  // lose the shift and sit at the midpoint.
  const double half_shift = 0.5 * spec.separability;
  const std::uint64_t value_root = derive_seed(spec.seed, "values");
  const std::uint64_t missing_root = derive_seed(spec.seed, "missing");
  for (std::size_t c = 0; c < f; ++c) {
    Xoshiro256 values(derive_seed(value_root, c));
    Xoshiro256 missing(derive_seed(missing_root, c));
    for (std::size_t r = 0; r < n; ++r) {
      double x = values.normal();
      if (informative[c] && !evasive[r]) {
        x += ds.labels[r] == tabular::kMalware ? half_shift : -half_shift;
      }
      const bool absent = missing.uniform_open() < spec.missing_rate;
      if (absent) {
        ds.features.set_absent(r, c);
      } else {
        ds.features.set(r, c, x);
      }
    }
  }
  return ds;
}

std::map<std::string, tabular::LabeledDataset> gen_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  std::map<std::string, tabular::LabeledDataset> out;
  for (auto d : spec.domains) {
    d.seed = derive_seed(spec.master_seed, d.domain_id);
    out.emplace(d.domain_id, gen_domain(d));
  }
  return out;
}

}  // namespace malfuse::synthgen
