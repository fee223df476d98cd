#include "malfuse_app/config.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "malfuse/text_io.hpp"

namespace malfuse::app {
namespace {

std::runtime_error config_error(std::string_view where, const std::string& msg) {
  return std::runtime_error(std::string(where) + ": " + msg);
}

std::size_t parse_count(std::string_view value, std::string_view where) {
  const auto v = parse_int(value);
  if (v < 0) throw config_error(where, "expected a nonnegative integer, got '" + std::string(value) + "'");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> parse_list(std::string_view value) {
  std::vector<std::string> out;
  for (auto item : split(value, ',')) {
    item = trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

void set_gbdt_key(gbdt::GbdtConfig& c, const std::string& key, std::string_view value,
                  std::string_view where) {
  if (key == "num_leaves") {
    c.num_leaves = static_cast<int>(parse_int(value));
  } else if (key == "learning_rate") {
    c.learning_rate = parse_real(value);
  } else if (key == "n_estimators") {
    c.n_estimators = static_cast<int>(parse_int(value));
  } else if (key == "early_stopping_rounds") {
    c.early_stopping_rounds = static_cast<int>(parse_int(value));
  } else if (key == "max_bins") {
    c.max_bins = static_cast<int>(parse_int(value));
  } else if (key == "min_data_in_leaf") {
    c.min_data_in_leaf = static_cast<int>(parse_int(value));
  } else if (key == "min_gain_to_split") {
    c.min_gain_to_split = parse_real(value);
  } else if (key == "lambda_l2") {
    c.lambda_l2 = parse_real(value);
  } else if (key == "min_sum_hessian_in_leaf") {
    c.min_sum_hessian_in_leaf = parse_real(value);
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(value));
  } else {
    throw config_error(where, "unknown gbdt key '" + key + "'");
  }
}

void set_domain_key(synthgen::DomainSpec& d, const std::string& key, std::string_view value,
                    std::string_view where) {
  if (key == "n_samples") {
    d.n_samples = parse_count(value, where);
  } else if (key == "n_features") {
    d.n_features = parse_count(value, where);
  } else if (key == "n_informative") {
    d.n_informative = parse_count(value, where);
  } else if (key == "separability") {
    d.separability = parse_real(value);
  } else if (key == "missing_rate") {
    d.missing_rate = parse_real(value);
  } else if (key == "evasive_fraction") {
    d.evasive_fraction = parse_real(value);
  } else {
    throw config_error(where, "unknown bench key '" + key + "'");
  }
}

// Splits "prefix.<domain>.<key>" or "prefix.<key>" (domain empty).
std::pair<std::string, std::string> domain_and_key(std::string_view rest) {
  const auto dot = rest.rfind('.');
  if (dot == std::string_view::npos) return {"", std::string(rest)};
  return {std::string(rest.substr(0, dot)), std::string(rest.substr(dot + 1))};
}

}  // namespace

gbdt::GbdtConfig RunConfig::gbdt_for(const std::string& domain) const {
  auto c = gbdt;
  if (const auto it = gbdt_overrides.find(domain); it != gbdt_overrides.end()) {
    for (const auto& [key, value] : it->second) set_gbdt_key(c, key, value, "gbdt." + domain);
  }
  return c;
}

std::size_t RunConfig::topk_for(const std::string& domain) const {
  if (const auto it = topk.find(domain); it != topk.end()) return it->second;
  return domain == "memory" ? 20 : 50;
}

std::filesystem::path RunConfig::data_path(const std::string& domain) const {
  if (const auto it = data.find(domain); it != data.end()) return it->second;
  return artifact("data." + domain + ".csv");
}

bool RunConfig::has_domain(std::string_view domain) const {
  return std::find(domains.begin(), domains.end(), domain) != domains.end();
}

synthgen::BenchmarkSpec RunConfig::benchmark() const {
  const auto defaults = synthgen::default_benchmark(
      seed, bench_evasive_fraction.value_or(synthgen::kDefaultEvasiveFraction));
  synthgen::BenchmarkSpec spec;
  spec.master_seed = seed;
  for (const auto& id : domains) {
    if (data.contains(id)) continue;
    synthgen::DomainSpec d;
    d.domain_id = id;
    const auto it = std::find_if(defaults.domains.begin(), defaults.domains.end(),
                                 [&](const auto& s) { return s.domain_id == id; });
    if (it != defaults.domains.end()) {
      d = *it;
    } else if (bench_evasive_fraction) {
      d.evasive_fraction = *bench_evasive_fraction;
    }
    if (const auto o = bench_overrides.find(id); o != bench_overrides.end()) {
      for (const auto& [key, value] : o->second) set_domain_key(d, key, value, "bench." + id);
    }
    spec.domains.push_back(d);
  }
  return spec;
}

void RunConfig::validate() const {
  if (domains.empty()) throw std::invalid_argument("config: no domains");
  std::set<std::string> seen;
  for (const auto& d : domains) {
    if (d.empty() || d == "fused") throw std::invalid_argument("config: invalid domain id '" + d + "'");
    if (!seen.insert(d).second) throw std::invalid_argument("config: duplicate domain '" + d + "'");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("config: train_fraction must lie in (0,1)");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("config: threshold must lie in [0,1]");
  }
  if (workers < 1) throw std::invalid_argument("config: workers must be at least 1");
  if (histogram_bins < 1) throw std::invalid_argument("config: histogram_bins must be at least 1");
  if (fusion_cap && *fusion_cap == 0) throw std::invalid_argument("config: fusion.cap must be positive");
  for (const auto& d : domains) {
    gbdt_for(d).validate();
    if (topk_for(d) == 0) throw std::invalid_argument("config: topk." + d + " must be positive");
  }
}

void apply_config_text(RunConfig& config, std::string_view text, std::string_view source) {
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = std::string(source) + ":" + std::to_string(i + 1);
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw config_error(where, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error(where, "empty key");

    try {
      if (key == "seed") {
        config.seed = static_cast<std::uint64_t>(parse_int(value));
      } else if (key == "out") {
        config.out = std::filesystem::path(std::string(value));
      } else if (key == "train_fraction") {
        config.train_fraction = parse_real(value);
      } else if (key == "step") {
        config.step = parse_real(value);
      } else if (key == "threshold") {
        config.threshold = parse_real(value);
      } else if (key == "workers") {
        config.workers = static_cast<int>(parse_int(value));
      } else if (key == "label_column") {
        config.label_column = std::string(value);
      } else if (key == "histogram_bins") {
        config.histogram_bins = parse_count(value, where);
      } else if (key == "domains") {
        config.domains = parse_list(value);
      } else if (key.starts_with("data.")) {
        config.data[key.substr(5)] = std::filesystem::path(std::string(value));
      } else if (key.starts_with("topk.")) {
        config.topk[key.substr(5)] = parse_count(value, where);
      } else if (key.starts_with("gbdt.")) {
        auto [domain, field] = domain_and_key(std::string_view(key).substr(5));
        if (domain.empty()) {
          set_gbdt_key(config.gbdt, field, value, where);
        } else {
          gbdt::GbdtConfig probe;
          set_gbdt_key(probe, field, value, where);
          config.gbdt_overrides[domain].emplace_back(field, std::string(value));
        }
      } else if (key == "bench.evasive_fraction") {
        config.bench_evasive_fraction = parse_real(value);
      } else if (key.starts_with("bench.")) {
        auto [domain, field] = domain_and_key(std::string_view(key).substr(6));
        if (domain.empty()) throw config_error(where, "unknown key '" + key + "'");
        synthgen::DomainSpec probe;
        set_domain_key(probe, field, value, where);
        config.bench_overrides[domain].emplace_back(field, std::string(value));
      } else if (key == "fusion.cap") {
        config.fusion_cap = parse_count(value, where);
      } else if (key == "ablation.deltas") {
        config.ablation_deltas.clear();
        for (const auto& item : parse_list(value)) config.ablation_deltas.push_back(parse_real(item));
      } else if (key.starts_with("ablation.k.")) {
        auto& ks = config.ablation_k[key.substr(11)];
        ks.clear();
        for (const auto& item : parse_list(value)) ks.push_back(parse_count(item, where));
      } else {
        throw config_error(where, "unknown key '" + key + "'");
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw config_error(where, e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig config;
  apply_config_text(config, read_file(path), path.string());
  return config;
}

RunConfig resolve_config(const Overrides& flags, const char* env_out) {
  RunConfig config = flags.config_file ? load_config(*flags.config_file) : RunConfig{};
  if (env_out != nullptr && *env_out != '\0') config.out = env_out;
  if (flags.out) config.out = *flags.out;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.workers) config.workers = *flags.workers;
  config.validate();
  return config;
}

}  // namespace malfuse::app
