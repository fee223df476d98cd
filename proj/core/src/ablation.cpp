#include "malfuse/ablation.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "malfuse/text_io.hpp"

namespace malfuse::ablation {

std::string_view to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::DomainRemoval:
      return "domain-removal";
    case StudyKind::FeatureCount:
      return "feature-count";
    case StudyKind::WeightPerturbation:
      return "weight-perturbation";
  }
  return "unknown";
}

StudyKind parse_study(std::string_view text) {
  for (auto kind : {StudyKind::DomainRemoval, StudyKind::FeatureCount,
                    StudyKind::WeightPerturbation}) {
    if (text == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown ablation study '" + std::string(text) +
                              "' (expected domain-removal, feature-count or weight-perturbation)");
}

double relative_change(double variant, double baseline) {
  if (baseline == 0.0) {
    return variant == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return (variant - baseline) / baseline;
}

namespace {

double best_fused_f1(const fusion::FusionValidationSet& set, double step, double threshold) {
  if (set.n_models() == 1) {
    const double one = 1.0;
    return fusion::macro_f1_at(set, std::span<const double>(&one, 1), threshold);
  }
  return fusion::grid_search(set, step, threshold).best_f1();
}

std::string delta_label(double delta) {
  return (delta >= 0.0 ? "+" : "") + format_real(delta);
}

}  // namespace

AblationReport leave_one_domain_out(const fusion::FusionValidationSet& set, double step,
                                    double threshold) {
  if (set.n_models() < 2) {
    throw std::invalid_argument("leave_one_domain_out: need at least 2 domains");
  }
  AblationReport report;
  report.kind = StudyKind::DomainRemoval;
  report.baseline_f1 = fusion::grid_search(set, step, threshold).best_f1();
  for (const auto& d : set.domains) {
    const double f1 = best_fused_f1(set.without_model(d), step, threshold);
    report.variants.push_back({"without_" + d, f1, relative_change(f1, report.baseline_f1)});
  }
  return report;
}

AblationReport feature_count_sweep(const SweepContext& ctx, std::span<const std::size_t> k_values) {
  if (ctx.prepared == nullptr) throw std::invalid_argument("feature_count_sweep: no prepared domain");
  if (k_values.empty()) throw std::invalid_argument("feature_count_sweep: empty k list");
  const std::size_t n_cols = ctx.prepared->train.n_cols();
  std::vector<std::size_t> ks(k_values.begin(), k_values.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (auto k : ks) {
    if (k < 1 || k > n_cols) {
      throw std::invalid_argument("feature_count_sweep: k=" + std::to_string(k) +
                                  " out of bounds [1, " + std::to_string(n_cols) + "]");
    }
  }

  AblationReport report;
  report.kind = StudyKind::FeatureCount;
  const auto base_set = fusion::build_fusion_set(ctx.models, ctx.valid_raw, ctx.stats,
                                                 ctx.domain_order, ctx.build);
  report.baseline_f1 = fusion::grid_search(base_set, ctx.step, ctx.threshold).best_f1();

  for (auto k : ks) {
    auto retrained =
        pipeline::fit_selected(*ctx.prepared, ctx.full_importance, k, ctx.config, ctx.num_workers);
    auto models = ctx.models;
    auto stats = ctx.stats;
    models[ctx.domain] = std::move(retrained.ensemble);
    stats[ctx.domain] = std::move(retrained.stats);
    const auto set =
        fusion::build_fusion_set(models, ctx.valid_raw, stats, ctx.domain_order, ctx.build);
    const double f1 = fusion::grid_search(set, ctx.step, ctx.threshold).best_f1();
    report.variants.push_back(
        {ctx.domain + "_k" + std::to_string(k), f1, relative_change(f1, report.baseline_f1)});
  }
  return report;
}

AblationReport weight_sensitivity(const fusion::FusionValidationSet& set,
                                  const fusion::FusionWeights& best, std::span<const double> deltas,
                                  double step, double threshold) {
  if (deltas.empty()) throw std::invalid_argument("weight_sensitivity: empty delta list");
  best.validate();
  if (best.domains != set.domains) {
    throw std::invalid_argument("weight_sensitivity: weight domains differ from the fusion set");
  }
  AblationReport report;
  report.kind = StudyKind::WeightPerturbation;
  report.baseline_f1 = fusion::macro_f1_at(set, best.values, threshold);
  for (double delta : deltas) {
    for (std::size_t i = 0; i < best.domains.size(); ++i) {
      fusion::WeightVector w = best.values;
      w[i] += delta;
      const auto snapped = fusion::snap_to_grid(fusion::project_to_simplex(w), step);
      const double f1 = fusion::macro_f1_at(set, snapped, threshold);
      std::string name = "w_" + best.domains[i] + delta_label(delta) + " ->";
      for (double x : snapped) name += ' ' + format_real(x);
      report.variants.push_back({std::move(name), f1, relative_change(f1, report.baseline_f1)});
    }
  }
  return report;
}

std::string report_csv(const AblationReport& report) {
  std::string out = "study,variant,baseline_f1,macro_f1,relative_change\n";
  for (const auto& v : report.variants) {
    out += std::string(to_string(report.kind)) + ',' + v.name + ',' +
           format_real(report.baseline_f1) + ',' + format_real(v.macro_f1) + ',' +
           format_real(v.relative_change) + '\n';
  }
  return out;
}

std::string report_text(const AblationReport& report) {
  std::string out = "malfuse_ablation\t1\n";
  out += "study\t" + std::string(to_string(report.kind)) + '\n';
  out += "baseline_f1\t" + format_real(report.baseline_f1) + '\n';
  out += "variants\t" + std::to_string(report.variants.size()) + '\n';
  for (const auto& v : report.variants) {
    out += "variant\t" + v.name + '\t' + format_real(v.macro_f1) + '\t' +
           format_real(v.relative_change) + '\n';
  }
  return out;
}

}  // namespace malfuse::ablation
