#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "malfuse/gbdt.hpp"
#include "malfuse/metrics.hpp"
#include "malfuse/text_io.hpp"
#include "tree_learner.hpp"

namespace malfuse::gbdt {

void GbdtConfig::validate() const {
  if (num_leaves < 2) throw std::invalid_argument("GbdtConfig: num_leaves must be >= 2");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw std::invalid_argument("GbdtConfig: learning_rate must lie in (0, 1]");
  }
  if (n_estimators < 1) throw std::invalid_argument("GbdtConfig: n_estimators must be >= 1");
  if (early_stopping_rounds < 0) {
    throw std::invalid_argument("GbdtConfig: early_stopping_rounds must be >= 0");
  }
  if (max_bins < 2 || max_bins > 255) {
    throw std::invalid_argument("GbdtConfig: max_bins must lie in [2, 255]");
  }
  if (min_data_in_leaf < 1) throw std::invalid_argument("GbdtConfig: min_data_in_leaf must be >= 1");
  if (!(min_gain_to_split >= 0.0)) {
    throw std::invalid_argument("GbdtConfig: min_gain_to_split must be >= 0");
  }
  if (!(lambda_l2 >= 0.0)) throw std::invalid_argument("GbdtConfig: lambda_l2 must be >= 0");
  if (!(min_sum_hessian_in_leaf >= 0.0)) {
    throw std::invalid_argument("GbdtConfig: min_sum_hessian_in_leaf must be >= 0");
  }
}

double sigmoid(double score) { return 1.0 / (1.0 + std::exp(-score)); }

GradHess logloss_grad_hess(std::span<const std::uint8_t> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) {
    throw std::invalid_argument("logloss_grad_hess: length mismatch");
  }
  GradHess out;
  out.grad.resize(labels.size());
  out.hess.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs[i];
    out.grad[i] = p - static_cast<double>(labels[i]);
    out.hess[i] = p * (1.0 - p);
  }
  return out;
}

std::size_t DecisionTree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::int32_t DecisionTree::leaf_for(const tabular::FeatureMatrix& features, std::size_t row,
                                    std::span<const std::size_t> column,
                                    const BinMapper& bins) const {
  std::int32_t idx = 0;
  while (true) {
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) return idx;
    const auto f = static_cast<std::size_t>(n.feature);
    const std::size_t c = column[f];
    // Absent cells take bin 0, which always goes left.
    bool go_left = true;
    if (features.is_present(row, c)) {
      go_left = features.value(row, c) <= bins.boundaries(f)[static_cast<std::size_t>(n.threshold)];
    }
    idx = go_left ? n.left : n.right;
  }
}

namespace {

std::vector<std::size_t> resolve_columns(const Ensemble& ensemble,
                                         std::span<const std::string> column_names) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    if (!index.emplace(column_names[c], c).second) {
      throw std::invalid_argument("schema mismatch: duplicate column '" + column_names[c] + "'");
    }
  }
  std::vector<std::size_t> column;
  column.reserve(ensemble.feature_names.size());
  for (const auto& name : ensemble.feature_names) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw std::invalid_argument("schema mismatch: input has no column '" + name + "'");
    }
    column.push_back(it->second);
  }
  return column;
}

std::vector<double> sigmoid_all(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  std::transform(scores.begin(), scores.end(), p.begin(), sigmoid);
  return p;
}

}  // namespace

std::vector<double> predict_raw(const Ensemble& ensemble, const tabular::FeatureMatrix& features,
                                std::span<const std::string> column_names) {
  if (column_names.size() != features.cols()) {
    throw std::invalid_argument("predict: column names do not match the matrix width");
  }
  const auto column = resolve_columns(ensemble, column_names);
  std::vector<double> scores(features.rows(), ensemble.base_score);
  for (const auto& tree : ensemble.trees) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      const auto leaf = tree.leaf_for(features, r, column, ensemble.bin_mapper);
      scores[r] += tree.nodes[static_cast<std::size_t>(leaf)].value;
    }
  }
  return scores;
}

std::vector<double> predict_proba(const Ensemble& ensemble, const tabular::FeatureMatrix& features,
                                  std::span<const std::string> column_names) {
  auto scores = predict_raw(ensemble, features, column_names);
  for (auto& s : scores) {
    s = std::clamp(sigmoid(s), metrics::kProbClip, 1.0 - metrics::kProbClip);
  }
  return scores;
}

std::vector<double> predict_proba(const Ensemble& ensemble, const tabular::LabeledDataset& ds) {
  return predict_proba(ensemble, ds.features, ds.feature_names);
}

FeatureImportance feature_importance(const Ensemble& ensemble) {
  FeatureImportance imp;
  imp.feature_names = ensemble.feature_names;
  imp.total_gain.assign(imp.feature_names.size(), 0.0);
  imp.split_count.assign(imp.feature_names.size(), 0);
  for (const auto& tree : ensemble.trees) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto f = static_cast<std::size_t>(node.feature);
      imp.total_gain[f] += node.gain;
      imp.split_count[f] += 1;
    }
  }
  return imp;
}

TrainResult train(const tabular::LabeledDataset& train, const tabular::LabeledDataset& valid,
                  const GbdtConfig& config, int num_workers) {
  config.validate();
  train.validate();
  valid.validate();
  if (train.feature_names != valid.feature_names) {
    throw std::invalid_argument("train: schema mismatch between training and validation data");
  }
  if (valid.n_rows() == 0) throw std::invalid_argument("train: empty validation split");
  const auto n_pos = train.count_label(tabular::kMalware);
  const auto n_neg = train.n_rows() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("train: training labels contain a single class");
  }

  TrainResult result;
  Ensemble& model = result.ensemble;
  model.config = config;
  model.feature_names = train.feature_names;
  model.bin_mapper = compute_bins(train, config.max_bins);
  model.base_score = std::log(static_cast<double>(n_pos) / static_cast<double>(n_neg));

  const auto binned = detail::BinnedColumns::build(train, model.bin_mapper);
  malfuse::detail::WorkerPool pool(num_workers);
  detail::TreeLearner learner(binned, config, pool);

  std::vector<std::size_t> identity(train.n_cols());
  for (std::size_t c = 0; c < identity.size(); ++c) identity[c] = c;

  std::vector<double> train_scores(train.n_rows(), model.base_score);
  std::vector<double> valid_scores(valid.n_rows(), model.base_score);
  double best_loss = std::numeric_limits<double>::infinity();
  int best_round = 0;
  auto& log = result.log;

  for (int round = 1; round <= config.n_estimators; ++round) {
    const auto probs = sigmoid_all(train_scores);
    const auto gh = logloss_grad_hess(train.labels, probs);
    auto grown = learner.grow(gh.grad, gh.hess);

    for (std::size_t r = 0; r < train.n_rows(); ++r) {
      train_scores[r] += grown.tree.nodes[static_cast<std::size_t>(grown.row_leaf[r])].value;
    }
    for (std::size_t r = 0; r < valid.n_rows(); ++r) {
      const auto leaf = grown.tree.leaf_for(valid.features, r, identity, model.bin_mapper);
      valid_scores[r] += grown.tree.nodes[static_cast<std::size_t>(leaf)].value;
    }
    model.trees.push_back(std::move(grown.tree));

    log.train_logloss.push_back(metrics::logloss(train.labels, sigmoid_all(train_scores)));
    const double vloss = metrics::logloss(valid.labels, sigmoid_all(valid_scores));
    log.valid_logloss.push_back(vloss);

    if (vloss < best_loss) {
      best_loss = vloss;
      best_round = round;
    } else if (config.early_stopping_rounds > 0 &&
               round - best_round >= config.early_stopping_rounds) {
      break;
    }
  }

  model.trees.resize(static_cast<std::size_t>(best_round));
  model.best_iteration = best_round;
  log.best_iteration = best_round;
  return result;
}

std::string training_log_csv(const TrainingLog& log) {
  std::string out = "iteration,train_logloss,valid_logloss,best\n";
  for (std::size_t i = 0; i < log.train_logloss.size(); ++i) {
    out += std::to_string(i + 1) + ',' + format_real(log.train_logloss[i]) + ',' +
           format_real(log.valid_logloss[i]) + ',' +
           (static_cast<int>(i + 1) == log.best_iteration ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace malfuse::gbdt
