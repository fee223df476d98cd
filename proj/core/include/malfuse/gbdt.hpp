#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malfuse/importance.hpp"
#include "malfuse/tabular.hpp"

namespace malfuse::gbdt {

struct GbdtConfig {
  int num_leaves = 31;
  double learning_rate = 0.05;
  int n_estimators = 200;
  // 0 disables early stopping.
  int early_stopping_rounds = 50;
  int max_bins = 255;
  int min_data_in_leaf = 20;
  double min_gain_to_split = 0.0;
  double lambda_l2 = 0.0;
  double min_sum_hessian_in_leaf = 1e-3;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const GbdtConfig&) const = default;
};

// Per-feature ascending bin boundaries. The bin of x is the number of
// boundaries strictly below x, so bins range over [0, boundaries.size()].
class BinMapper {
 public:
  BinMapper() = default;
  explicit BinMapper(std::vector<std::vector<double>> boundaries);

  std::size_t num_features() const { return boundaries_.size(); }
  std::size_t num_bins(std::size_t feature) const { return boundaries_[feature].size() + 1; }
  const std::vector<double>& boundaries(std::size_t feature) const { return boundaries_[feature]; }
  std::uint8_t bin(std::size_t feature, double x) const;

  bool operator==(const BinMapper&) const = default;

 private:
  std::vector<std::vector<double>> boundaries_;
};

BinMapper compute_bins(const tabular::LabeledDataset& train, int max_bins);

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  std::int32_t threshold = 0;  // rows with bin <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double gain = 0.0;
  double value = 0.0;  // leaf contribution to the log-odds, shrinkage applied
  std::int64_t count = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t num_leaves() const;
  // Index of the leaf reached by one row. `column` maps a model feature to a
  // column of `features`.
  std::int32_t leaf_for(const tabular::FeatureMatrix& features, std::size_t row,
                        std::span<const std::size_t> column, const BinMapper& bins) const;

  bool operator==(const DecisionTree&) const = default;
};

struct Ensemble {
  GbdtConfig config;
  std::vector<std::string> feature_names;
  BinMapper bin_mapper;
  double base_score = 0.0;
  std::vector<DecisionTree> trees;
  int best_iteration = 0;

  bool operator==(const Ensemble&) const = default;
};

struct TrainingLog {
  std::vector<double> train_logloss;  // one entry per boosting round
  std::vector<double> valid_logloss;
  int best_iteration = 0;  // 1-based round count with the lowest validation loss
};

struct TrainResult {
  Ensemble ensemble;
  TrainingLog log;
};

struct GradHess {
  std::vector<double> grad;
  std::vector<double> hess;
};

// Binary logloss derivatives with respect to the raw score.
GradHess logloss_grad_hess(std::span<const std::uint8_t> labels, std::span<const double> probs);

double sigmoid(double score);

// Histogram-based leaf-wise boosting. `num_workers` only affects speed: the
// trained model is identical for any worker count.
TrainResult train(const tabular::LabeledDataset& train, const tabular::LabeledDataset& valid,
                  const GbdtConfig& config, int num_workers = 1);

// Columns are matched to the model's features by name; extra columns are
// ignored. Absent cells fall into bin 0. Output lies strictly inside (0,1).
std::vector<double> predict_proba(const Ensemble& ensemble, const tabular::FeatureMatrix& features,
                                  std::span<const std::string> column_names);
std::vector<double> predict_proba(const Ensemble& ensemble, const tabular::LabeledDataset& ds);
std::vector<double> predict_raw(const Ensemble& ensemble, const tabular::FeatureMatrix& features,
                                std::span<const std::string> column_names);

FeatureImportance feature_importance(const Ensemble& ensemble);

std::string to_text(const Ensemble& ensemble);
Ensemble from_text(std::string_view text, std::string source = "<model>");
void save_model(const Ensemble& ensemble, const std::filesystem::path& path);
Ensemble load_model(const std::filesystem::path& path);

std::string training_log_csv(const TrainingLog& log);

}  // namespace malfuse::gbdt
