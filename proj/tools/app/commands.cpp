#include "malfuse_app/commands.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "malfuse/fusion.hpp"
#include "malfuse/gbdt.hpp"
#include "malfuse/metrics.hpp"
#include "malfuse/pipeline.hpp"
#include "malfuse/synthgen.hpp"
#include "malfuse/tabular.hpp"
#include "malfuse/text_io.hpp"

namespace malfuse::app {
namespace {

namespace fs = std::filesystem;

class Staged {
 public:
  void add(fs::path path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

  void commit(std::ostream& log) const {
    for (const auto& [path, content] : files_) {
      write_file_atomic(path, content);
      log << "wrote " << path.string() << '\n';
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

void require_out_dir(const RunConfig& config) {
  if (!fs::is_directory(config.out)) {
    throw std::runtime_error("output directory does not exist: " + config.out.string());
  }
}

void require_domain(const RunConfig& config, const std::string& domain) {
  if (!config.has_domain(domain)) {
    throw std::invalid_argument("unknown domain '" + domain + "'");
  }
}

fs::path require_artifact(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) {
    throw std::runtime_error("missing artifact: " + path.string() + " (" + hint + ")");
  }
  return path;
}

std::string train_hint(const std::string& domain) { return "run 'train --domain " + domain + "' first"; }

tabular::LabeledDataset load_domain_data(const RunConfig& config, const std::string& domain) {
  const auto path = config.data_path(domain);
  if (!fs::exists(path)) throw std::runtime_error("missing file: " + path.string());
  auto ds = tabular::load_csv(path, config.label_column);
  ds.domain_id = domain;
  return ds;
}

pipeline::PreparedDomain prepare(const RunConfig& config, const std::string& domain) {
  return pipeline::prepare_domain(load_domain_data(config, domain), config.train_fraction, config.seed);
}

std::size_t effective_topk(const RunConfig& config, const std::string& domain, std::size_t n_cols) {
  return std::min(config.topk_for(domain), n_cols);
}

struct DomainArtifacts {
  gbdt::Ensemble model;
  tabular::PreprocessStats stats;
  tabular::LabeledDataset valid;  // raw held-out rows
};

DomainArtifacts load_trained(const RunConfig& config, const std::string& domain) {
  const auto hint = train_hint(domain);
  DomainArtifacts a;
  a.model = gbdt::load_model(require_artifact(config.artifact("model." + domain + ".txt"), hint));
  const auto stats_path = require_artifact(config.artifact("stats." + domain + ".txt"), hint);
  a.stats = tabular::stats_from_text(read_file(stats_path), stats_path.string());
  a.valid = tabular::load_csv(require_artifact(config.artifact("valid." + domain + ".csv"), hint),
                              config.label_column);
  a.valid.domain_id = domain;
  return a;
}

struct FusionInputs {
  std::map<std::string, gbdt::Ensemble> models;
  std::map<std::string, tabular::LabeledDataset> valid;
  std::map<std::string, tabular::PreprocessStats> stats;
};

FusionInputs load_fusion_inputs(const RunConfig& config, const std::vector<std::string>& domains) {
  FusionInputs in;
  for (const auto& d : domains) {
    auto a = load_trained(config, d);
    in.models.emplace(d, std::move(a.model));
    in.stats.emplace(d, std::move(a.stats));
    in.valid.emplace(d, std::move(a.valid));
  }
  return in;
}

fusion::BuildOptions build_options(const RunConfig& config) {
  fusion::BuildOptions o;
  o.per_domain_cap = config.fusion_cap;
  o.seed = config.seed;
  return o;
}

fusion::FusionValidationSet fusion_set(const RunConfig& config, const FusionInputs& in,
                                       const std::vector<std::string>& domains) {
  return fusion::build_fusion_set(in.models, in.valid, in.stats, domains, build_options(config));
}

fusion::FusionBundle load_bundle(const RunConfig& config) {
  const auto path = require_artifact(config.artifact("weights.txt"), "run 'fuse-optimize' first");
  return fusion::bundle_from_text(read_file(path), path.string());
}

// Input columns reordered to the stats schema and preprocessed.
tabular::LabeledDataset preprocess_matrix(const tabular::FeatureMatrix& m,
                                          const std::vector<std::string>& names,
                                          const tabular::PreprocessStats& stats) {
  for (const auto& f : stats.feature_names) {
    if (std::find(names.begin(), names.end(), f) == names.end()) {
      throw std::invalid_argument("schema mismatch: input has no column '" + f + "'");
    }
  }
  tabular::LabeledDataset ds;
  ds.features = m;
  ds.feature_names = names;
  ds.labels.assign(m.rows(), 0);
  ds.label_names = stats.label_names;
  return tabular::apply_preprocess(tabular::project_columns(ds, stats.feature_names), stats);
}

tabular::LabeledDataset preprocess_dataset(const tabular::LabeledDataset& raw,
                                           const tabular::PreprocessStats& stats) {
  auto out = preprocess_matrix(raw.features, raw.feature_names, stats);
  out.labels = raw.labels;
  out.domain_id = raw.domain_id;
  return out;
}

std::string predictions_csv(std::span<const double> probs, double threshold,
                            const std::array<std::string, 2>& label_names) {
  std::string out = "row,probability,class\n";
  for (std::size_t r = 0; r < probs.size(); ++r) {
    out += std::to_string(r) + ',' + format_real(probs[r]) + ',' +
           tabular::csv_escape(label_names[probs[r] >= threshold ? 1 : 0]) + '\n';
  }
  return out;
}

void stage_evaluation(Staged& staged, const RunConfig& config, const std::string& target,
                      std::span<const std::uint8_t> labels, std::span<const double> probs,
                      const metrics::ReportExtras& extras, std::ostream& log) {
  const auto report = metrics::evaluate(labels, probs, config.threshold);
  const auto hist = metrics::prob_histogram(probs, labels, config.histogram_bins);
  staged.add(config.artifact("report." + target + ".csv"), metrics::report_csv(report, extras));
  staged.add(config.artifact("report." + target + ".txt"), metrics::report_text(report, extras));
  staged.add(config.artifact("confusion." + target + ".csv"), metrics::confusion_csv(report.confusion));
  staged.add(config.artifact("histogram." + target + ".benign.csv"),
             metrics::histogram_csv(hist, tabular::kBenign));
  staged.add(config.artifact("histogram." + target + ".malware.csv"),
             metrics::histogram_csv(hist, tabular::kMalware));
  log << target << ": samples " << report.n_samples << ", macro F1 " << format_real(report.macro_f1)
      << ", logloss " << format_real(report.logloss) << '\n';
}

std::vector<std::pair<std::string, double>> weight_pairs(const fusion::FusionWeights& w) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < w.domains.size(); ++i) out.emplace_back(w.domains[i], w.values[i]);
  return out;
}

std::vector<std::size_t> default_k_values(std::size_t k0, std::size_t n_cols) {
  std::vector<std::size_t> ks;
  if (k0 > 20) ks.push_back(k0 - 20);
  ks.push_back(k0);
  if (k0 + 20 <= n_cols) ks.push_back(k0 + 20);
  return ks;
}

}  // namespace

void gen_data(const RunConfig& config, std::ostream& log) {
  require_out_dir(config);
  const auto spec = config.benchmark();
  if (spec.domains.empty()) {
    throw std::invalid_argument("nothing to generate: every domain has an explicit data path");
  }
  const auto datasets = synthgen::gen_benchmark(spec);
  Staged staged;
  for (const auto& d : spec.domain_ids()) {
    staged.add(config.artifact("data." + d + ".csv"), tabular::to_csv(datasets.at(d), config.label_column));
  }
  staged.commit(log);
}

void train(const RunConfig& config, const std::string& domain, std::ostream& log) {
  require_out_dir(config);
  require_domain(config, domain);
  const auto prepared = prepare(config, domain);
  const auto k = effective_topk(config, domain, prepared.train.n_cols());
  const auto model = pipeline::train_domain(prepared, k, config.gbdt_for(domain), config.workers);

  const auto valid = preprocess_dataset(prepared.raw.valid, model.stats);
  const auto probs = gbdt::predict_proba(model.ensemble, valid);
  const auto report = metrics::evaluate(valid.labels, probs, config.threshold);

  Staged staged;
  staged.add(config.artifact("stats." + domain + ".txt"), tabular::stats_to_text(model.stats));
  staged.add(config.artifact("importance." + domain + ".csv"), importance_to_csv(model.full_importance));
  staged.add(config.artifact("model." + domain + ".txt"), gbdt::to_text(model.ensemble));
  staged.add(config.artifact("trainlog." + domain + ".csv"), gbdt::training_log_csv(model.log));
  staged.add(config.artifact("trainlog." + domain + ".full.csv"), gbdt::training_log_csv(model.full_log));
  staged.add(config.artifact("valid." + domain + ".csv"), tabular::to_csv(prepared.raw.valid, config.label_column));
  staged.add(config.artifact("scores." + domain + ".csv"),
             predictions_csv(probs, config.threshold, model.stats.label_names));
  log << domain << ": " << prepared.train.n_cols() << " -> " << k << " features, best_iteration "
      << model.ensemble.best_iteration << ", valid macro F1 " << format_real(report.macro_f1) << '\n';
  staged.commit(log);
}

void fuse_optimize(const RunConfig& config, std::ostream& log) {
  require_out_dir(config);
  const auto inputs = load_fusion_inputs(config, config.domains);
  const auto set = fusion_set(config, inputs, config.domains);
  const auto grid = fusion::grid_search(set, config.step, config.threshold, config.workers);
  const auto bundle = fusion::bundle_from(grid);

  std::string corners = "model,macro_f1,out_of_domain_prior\n";
  for (std::size_t m = 0; m < config.domains.size(); ++m) {
    std::vector<double> corner(config.domains.size(), 0.0);
    corner[m] = 1.0;
    const auto& d = config.domains[m];
    corners += tabular::csv_escape(d) + ',' +
               format_real(fusion::macro_f1_at(set, corner, config.threshold)) + ',' +
               format_real(fusion::out_of_domain_prior(inputs.models.at(d), inputs.stats.at(d))) + '\n';
  }

  Staged staged;
  staged.add(config.artifact("weights.txt"), fusion::bundle_to_text(bundle));
  staged.add(config.artifact("grid.csv"), fusion::grid_to_csv(grid));
  staged.add(config.artifact("corners.csv"), corners);
  const auto probs = fusion::fuse_all(set, bundle.weights.values);
  const auto report = metrics::evaluate(set.labels, probs, config.threshold);
  const metrics::ReportExtras extras{"fused", weight_pairs(bundle.weights)};
  staged.add(config.artifact("report.fused.csv"), metrics::report_csv(report, extras));
  staged.add(config.artifact("report.fused.txt"), metrics::report_text(report, extras));

  log << "best weights";
  for (std::size_t i = 0; i < bundle.weights.domains.size(); ++i) {
    log << ' ' << bundle.weights.domains[i] << '=' << format_real(bundle.weights.values[i]);
  }
  log << ", fused macro F1 " << format_real(bundle.macro_f1) << " over " << grid.entries.size()
      << " grid points\n";
  staged.commit(log);
}

void evaluate(const RunConfig& config, const std::string& target, std::ostream& log) {
  require_out_dir(config);
  Staged staged;
  if (target == "fused") {
    const auto bundle = load_bundle(config);
    const auto& domains = bundle.weights.domains;
    const auto inputs = load_fusion_inputs(config, domains);
    const auto set = fusion_set(config, inputs, domains);
    const auto probs = fusion::fuse_all(set, bundle.weights.values);
    stage_evaluation(staged, config, target, set.labels, probs,
                     {target, weight_pairs(bundle.weights)}, log);
  } else {
    if (!config.has_domain(target)) {
      throw std::invalid_argument("unknown target '" + target + "' (expected a domain id or 'fused')");
    }
    const auto a = load_trained(config, target);
    const auto valid = preprocess_dataset(a.valid, a.stats);
    const auto probs = gbdt::predict_proba(a.model, valid);
    stage_evaluation(staged, config, target, valid.labels, probs, {target, {}}, log);
  }
  staged.commit(log);
}

void predict(const RunConfig& config, const PredictOptions& options, std::ostream& log) {
  const auto output = options.output.value_or(config.artifact("predictions." + options.target + ".csv"));
  if (!fs::exists(options.input)) throw std::runtime_error("missing file: " + options.input.string());
  const auto text = read_file(options.input);

  std::vector<double> probs;
  std::array<std::string, 2> label_names{"benign", "malware"};
  if (!trim(text).empty()) {
    const auto table = tabular::parse_csv(text, options.input.string());
    std::vector<std::string> names;
    const std::vector<std::string> ignore{config.label_column};
    const auto matrix = tabular::matrix_from_csv(table, names, ignore, options.input.string());
    const auto covered = [&](const tabular::PreprocessStats& stats) {
      std::size_t n = 0;
      for (const auto& f : stats.feature_names) {
        if (std::find(names.begin(), names.end(), f) != names.end()) ++n;
      }
      return n;
    };

    if (options.target == "fused") {
      const auto bundle = load_bundle(config);
      const auto& domains = bundle.weights.domains;
      std::vector<std::vector<double>> per_model;
      bool any_native = false;
      for (const auto& d : domains) {
        const auto hint = train_hint(d);
        const auto model = gbdt::load_model(require_artifact(config.artifact("model." + d + ".txt"), hint));
        const auto stats_path = require_artifact(config.artifact("stats." + d + ".txt"), hint);
        const auto stats = tabular::stats_from_text(read_file(stats_path), stats_path.string());
        if (d == domains.front()) label_names = stats.label_names;
        const auto n = covered(stats);
        if (n == stats.feature_names.size()) {
          per_model.push_back(gbdt::predict_proba(model, preprocess_matrix(matrix, names, stats)));
          any_native = true;
        } else if (n == 0) {
          per_model.emplace_back(matrix.rows(), fusion::out_of_domain_prior(model, stats));
        } else {
          throw std::invalid_argument("schema mismatch: input has " + std::to_string(n) + " of " +
                                      std::to_string(stats.feature_names.size()) +
                                      " columns of model '" + d + "'");
        }
      }
      if (!any_native) throw std::invalid_argument("unknown column set: input matches no model");
      probs.resize(matrix.rows());
      std::vector<double> row(domains.size());
      for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t m = 0; m < domains.size(); ++m) row[m] = per_model[m][r];
        probs[r] = fusion::fuse(row, bundle.weights.values);
      }
    } else {
      if (!config.has_domain(options.target)) {
        throw std::invalid_argument("unknown target '" + options.target +
                                    "' (expected a domain id or 'fused')");
      }
      const auto a = load_trained(config, options.target);
      label_names = a.stats.label_names;
      if (covered(a.stats) == 0) throw std::invalid_argument("unknown column set: input matches no model");
      probs = gbdt::predict_proba(a.model, preprocess_matrix(matrix, names, a.stats));
    }
  }

  Staged staged;
  staged.add(output, predictions_csv(probs, config.threshold, label_names));
  log << options.target << ": scored " << probs.size() << " rows\n";
  staged.commit(log);
}

void ablate(const RunConfig& config, ablation::StudyKind study,
            const std::optional<std::string>& domain, std::ostream& log) {
  require_out_dir(config);
  if (domain && study != ablation::StudyKind::FeatureCount) {
    throw std::invalid_argument("--domain applies only to the feature-count study");
  }
  const auto bundle = load_bundle(config);
  const auto& domains = bundle.weights.domains;
  const auto inputs = load_fusion_inputs(config, domains);
  const auto set = fusion_set(config, inputs, domains);

  ablation::AblationReport report;
  switch (study) {
    case ablation::StudyKind::DomainRemoval:
      report = ablation::leave_one_domain_out(set, bundle.step, bundle.threshold);
      break;
    case ablation::StudyKind::WeightPerturbation:
      report = ablation::weight_sensitivity(set, bundle.weights, config.ablation_deltas, bundle.step,
                                            bundle.threshold);
      break;
    case ablation::StudyKind::FeatureCount: {
      std::vector<std::string> targets = domain ? std::vector<std::string>{*domain} : domains;
      report.kind = study;
      for (const auto& d : targets) {
        if (!inputs.models.contains(d)) throw std::invalid_argument("unknown domain '" + d + "'");
        const auto prepared = prepare(config, d);
        const auto imp_path = require_artifact(config.artifact("importance." + d + ".csv"), train_hint(d));
        ablation::SweepContext ctx;
        ctx.domain = d;
        ctx.prepared = &prepared;
        ctx.full_importance = importance_from_csv(read_file(imp_path), imp_path.string());
        ctx.config = config.gbdt_for(d);
        ctx.num_workers = config.workers;
        ctx.models = inputs.models;
        ctx.valid_raw = inputs.valid;
        ctx.stats = inputs.stats;
        ctx.domain_order = domains;
        ctx.build = build_options(config);
        ctx.step = bundle.step;
        ctx.threshold = bundle.threshold;
        const auto n_cols = prepared.train.n_cols();
        const auto it = config.ablation_k.find(d);
        const auto ks = it != config.ablation_k.end()
                            ? it->second
                            : default_k_values(effective_topk(config, d, n_cols), n_cols);
        const auto part = ablation::feature_count_sweep(ctx, ks);
        report.baseline_f1 = part.baseline_f1;
        report.variants.insert(report.variants.end(), part.variants.begin(), part.variants.end());
      }
      break;
    }
  }

  const std::string kind(ablation::to_string(study));
  Staged staged;
  staged.add(config.artifact("ablation." + kind + ".csv"), ablation::report_csv(report));
  staged.add(config.artifact("ablation." + kind + ".txt"), ablation::report_text(report));
  log << kind << ": baseline macro F1 " << format_real(report.baseline_f1) << '\n';
  for (const auto& v : report.variants) {
    log << "  " << v.name << ": " << format_real(v.macro_f1) << " (" << format_real(v.relative_change)
        << ")\n";
  }
  staged.commit(log);
}

}  // namespace malfuse::app
