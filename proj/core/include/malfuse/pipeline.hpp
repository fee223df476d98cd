#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "malfuse/gbdt.hpp"
#include "malfuse/importance.hpp"
#include "malfuse/tabular.hpp"

namespace malfuse::pipeline {

// One domain after splitting and preprocessing with training-split statistics.
struct PreparedDomain {
  std::string domain_id;
  tabular::SplitPair raw;           // unpreprocessed split
  tabular::PreprocessStats stats;   // all columns, fitted on raw.train
  tabular::LabeledDataset train;    // preprocessed
  tabular::LabeledDataset valid;    // preprocessed
};

PreparedDomain prepare_domain(const tabular::LabeledDataset& raw, double train_fraction,
                              std::uint64_t split_seed);

struct DomainModel {
  std::string domain_id;
  FeatureImportance full_importance;  // from the all-feature model
  gbdt::TrainingLog full_log;
  tabular::PreprocessStats stats;     // selected columns, in model order
  gbdt::Ensemble ensemble;            // retrained on the selected columns
  gbdt::TrainingLog log;
};

// Keeps the k most important columns and retrains on them.
DomainModel fit_selected(const PreparedDomain& domain, const FeatureImportance& full_importance,
                         std::size_t k, const gbdt::GbdtConfig& config, int num_workers = 1);

// Full-feature training, importance ranking, top-k selection, retraining.
DomainModel train_domain(const PreparedDomain& domain, std::size_t k,
                         const gbdt::GbdtConfig& config, int num_workers = 1);

}  // namespace malfuse::pipeline
