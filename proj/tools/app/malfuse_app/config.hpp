#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "malfuse/gbdt.hpp"
#include "malfuse/synthgen.hpp"

namespace malfuse::app {

inline constexpr const char* kOutEnvVar = "MALFUSE_OUT";

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out = ".";
  double train_fraction = 0.8;
  double step = 0.1;
  double threshold = 0.5;
  int workers = 1;
  std::string label_column = "label";
  std::size_t histogram_bins = 20;

  // Fusion order; also the set of domains gen-data produces.
  std::vector<std::string> domains{"static", "behavioral", "memory"};
  // Explicit dataset per domain; otherwise <out>/data.<domain>.csv.
  std::map<std::string, std::filesystem::path> data;
  std::map<std::string, std::size_t> topk;

  gbdt::GbdtConfig gbdt;
  std::map<std::string, KeyValues> gbdt_overrides;  // per domain, applied over `gbdt`

  std::optional<double> bench_evasive_fraction;
  std::map<std::string, KeyValues> bench_overrides;

  std::optional<std::size_t> fusion_cap;

  std::map<std::string, std::vector<std::size_t>> ablation_k;
  std::vector<double> ablation_deltas{-0.2, -0.1, 0.0, 0.1, 0.2};

  gbdt::GbdtConfig gbdt_for(const std::string& domain) const;
  std::size_t topk_for(const std::string& domain) const;
  std::filesystem::path data_path(const std::string& domain) const;
  std::filesystem::path artifact(std::string_view name) const { return out / std::string(name); }
  bool has_domain(std::string_view domain) const;
  synthgen::BenchmarkSpec benchmark() const;
  void validate() const;
};

// "key = value" lines; blank lines and lines starting with '#' are skipped.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::filesystem::path> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> workers;
};

// Command-line flags win over the environment, which wins over the file.
RunConfig resolve_config(const Overrides& flags, const char* env_out);

}  // namespace malfuse::app
