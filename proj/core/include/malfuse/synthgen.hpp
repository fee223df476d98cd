#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "malfuse/tabular.hpp"

namespace malfuse::synthgen {

struct DomainSpec {
  std::string domain_id;
  std::size_t n_samples = 0;  // even; half benign, half malware
  std::size_t n_features = 0;
  std::size_t n_informative = 0;
  double separability = 0.0;  // distance between class means on informative features
  double missing_rate = 0.0;
  // Share of malware rows whose informative features carry no shift.
  double evasive_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BenchmarkSpec {
  std::vector<DomainSpec> domains;
  // Each domain's seed is derived from this and its domain id.
  std::uint64_t master_seed = 42;

  void validate() const;
  std::vector<std::string> domain_ids() const;
};

inline constexpr double kDefaultEvasiveFraction = 0.15;

// Desk-scale stand-ins for the static, behavioral and memory datasets.
// Standalone specs carry no evasive rows; default_benchmark adds them.
DomainSpec default_static_spec(std::uint64_t seed = 42);
DomainSpec default_behavioral_spec(std::uint64_t seed = 42);
DomainSpec default_memory_spec(std::uint64_t seed = 42);
BenchmarkSpec default_benchmark(std::uint64_t master_seed = 42,
                                double evasive_fraction = kDefaultEvasiveFraction);

// Columns are named "<domain_id>_fNNN".
tabular::LabeledDataset gen_domain(const DomainSpec& spec);
std::map<std::string, tabular::LabeledDataset> gen_benchmark(const BenchmarkSpec& spec);

// Column indices carrying signal, ascending.
std::vector<std::size_t> informative_columns(const DomainSpec& spec);

}  // namespace malfuse::synthgen
