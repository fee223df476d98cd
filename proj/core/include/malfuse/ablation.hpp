#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malfuse/fusion.hpp"
#include "malfuse/gbdt.hpp"
#include "malfuse/pipeline.hpp"

namespace malfuse::ablation {

enum class StudyKind { DomainRemoval, FeatureCount, WeightPerturbation };

std::string_view to_string(StudyKind kind);
StudyKind parse_study(std::string_view text);

struct Variant {
  std::string name;
  double macro_f1 = 0.0;
  double relative_change = 0.0;  // (variant - baseline) / baseline
};

struct AblationReport {
  StudyKind kind = StudyKind::DomainRemoval;
  double baseline_f1 = 0.0;
  std::vector<Variant> variants;
};

double relative_change(double variant, double baseline);

// Grid search over the remaining domains after dropping each one in turn.
AblationReport leave_one_domain_out(const fusion::FusionValidationSet& set, double step,
                                    double threshold = 0.5);

// Everything needed to retrain one domain and re-fuse against the others.
struct SweepContext {
  std::string domain;
  const pipeline::PreparedDomain* prepared = nullptr;
  FeatureImportance full_importance;
  gbdt::GbdtConfig config;
  int num_workers = 1;
  std::map<std::string, gbdt::Ensemble> models;
  std::map<std::string, tabular::LabeledDataset> valid_raw;
  std::map<std::string, tabular::PreprocessStats> stats;
  std::vector<std::string> domain_order;
  fusion::BuildOptions build;
  double step = 0.1;
  double threshold = 0.5;
};

// Retrains the domain model on its top-k columns for each distinct k (ascending),
// re-optimizes the fusion weights and reports the fused optimum. The baseline is
// the optimum with the models in the context.
AblationReport feature_count_sweep(const SweepContext& context, std::span<const std::size_t> k_values);

// Adds each delta to one domain's weight at a time, projects back onto the
// simplex and snaps to the grid before scoring.
AblationReport weight_sensitivity(const fusion::FusionValidationSet& set,
                                  const fusion::FusionWeights& best, std::span<const double> deltas,
                                  double step, double threshold = 0.5);

std::string report_csv(const AblationReport& report);
std::string report_text(const AblationReport& report);

}  // namespace malfuse::ablation
