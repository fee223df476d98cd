#include "tree_learner.hpp"

#include <algorithm>

namespace malfuse::gbdt::detail {

BinnedColumns BinnedColumns::build(const tabular::LabeledDataset& ds, const BinMapper& mapper) {
  BinnedColumns out;
  out.n_rows = ds.n_rows();
  out.n_features = ds.n_cols();
  out.bins.resize(out.n_rows * out.n_features);
  out.offsets.resize(out.n_features + 1, 0);
  for (std::size_t f = 0; f < out.n_features; ++f) {
    out.offsets[f + 1] = out.offsets[f] + mapper.num_bins(f);
    std::uint8_t* col = out.bins.data() + f * out.n_rows;
    for (std::size_t r = 0; r < out.n_rows; ++r) {
      col[r] = ds.features.is_present(r, f) ? mapper.bin(f, ds.features.value(r, f)) : 0;
    }
  }
  return out;
}

TreeLearner::TreeLearner(const BinnedColumns& data, const GbdtConfig& config, malfuse::detail::WorkerPool& pool)
    : data_(data), config_(config), pool_(pool), per_feature_(data.n_features) {}

bool TreeLearner::can_split(const Leaf& leaf) const {
  return leaf.rows.size() >= 2 * static_cast<std::size_t>(config_.min_data_in_leaf) &&
         leaf.rows.size() >= 2;
}

std::vector<HistEntry> TreeLearner::acquire_histogram() {
  std::vector<HistEntry> hist;
  if (!spare_.empty()) {
    hist = std::move(spare_.back());
    spare_.pop_back();
  }
  hist.assign(data_.offsets.back(), HistEntry{});
  return hist;
}

void TreeLearner::release_histogram(std::vector<HistEntry>& hist) {
  if (!hist.empty()) spare_.push_back(std::move(hist));
  hist.clear();
}

void TreeLearner::build_histogram(Leaf& leaf, std::span<const double> grad,
                                  std::span<const double> hess) {
  leaf.hist = acquire_histogram();
  const auto& rows = leaf.rows;
  pool_.run(data_.n_features, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      const std::uint8_t* col = data_.column(f);
      HistEntry* h = leaf.hist.data() + data_.offsets[f];
      for (const auto r : rows) {
        HistEntry& e = h[col[r]];
        e.grad += grad[r];
        e.hess += hess[r];
        e.count += 1;
      }
    }
  });
}

void TreeLearner::find_best_split(Leaf& leaf) {
  leaf.best = SplitInfo{};
  if (leaf.hist.empty()) return;
  const double lambda = config_.lambda_l2;
  const double min_hess = config_.min_sum_hessian_in_leaf;
  const auto min_data = static_cast<std::int64_t>(config_.min_data_in_leaf);
  const double g_total = leaf.sum_grad;
  const double h_total = leaf.sum_hess;
  const auto c_total = static_cast<std::int64_t>(leaf.rows.size());
  const double parent_term = g_total * g_total / (h_total + lambda);

  pool_.run(data_.n_features, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      SplitInfo best;
      const HistEntry* h = leaf.hist.data() + data_.offsets[f];
      const std::size_t nb = data_.num_bins(f);
      double gl = 0.0;
      double hl = 0.0;
      std::int64_t cl = 0;
      for (std::size_t t = 0; t + 1 < nb; ++t) {
        if (h[t].count == 0) continue;
        gl += h[t].grad;
        hl += h[t].hess;
        cl += h[t].count;
        const std::int64_t cr = c_total - cl;
        if (cl < min_data) continue;
        if (cr < min_data) break;
        const double gr = g_total - gl;
        const double hr = h_total - hl;
        if (hl < min_hess || hr < min_hess) continue;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_term);
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<std::int32_t>(f);
          best.threshold = static_cast<std::int32_t>(t);
        }
      }
      per_feature_[f] = best;
    }
  });
  // Sequential reduction: on equal gain the lower feature index wins.
  for (const auto& cand : per_feature_) {
    if (cand.valid() && cand.gain > leaf.best.gain) leaf.best = cand;
  }
}

GrownTree TreeLearner::grow(std::span<const double> grad, std::span<const double> hess) {
  GrownTree out;
  auto& nodes = out.tree.nodes;
  nodes.emplace_back();

  std::vector<Leaf> leaves(1);
  Leaf& root = leaves[0];
  root.node = 0;
  root.rows.resize(data_.n_rows);
  for (std::size_t r = 0; r < data_.n_rows; ++r) {
    root.rows[r] = static_cast<std::uint32_t>(r);
    root.sum_grad += grad[r];
    root.sum_hess += hess[r];
  }
  const auto max_leaves = static_cast<std::size_t>(config_.num_leaves);
  if (max_leaves > 1 && can_split(root)) {
    build_histogram(root, grad, hess);
    find_best_split(root);
  }

  while (leaves.size() < max_leaves) {
    std::size_t pick = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const auto& best = leaves[i].best;
      if (!best.valid() || !(best.gain > config_.min_gain_to_split)) continue;
      if (pick == leaves.size() || best.gain > leaves[pick].best.gain) pick = i;
    }
    if (pick == leaves.size()) break;

    Leaf parent = std::move(leaves[pick]);
    const SplitInfo split = parent.best;
    const std::uint8_t* col = data_.column(static_cast<std::size_t>(split.feature));

    Leaf left;
    Leaf right;
    left.rows.reserve(parent.rows.size());
    right.rows.reserve(parent.rows.size());
    for (const auto r : parent.rows) {
      if (col[r] <= split.threshold) {
        left.rows.push_back(r);
        left.sum_grad += grad[r];
        left.sum_hess += hess[r];
      } else {
        right.rows.push_back(r);
        right.sum_grad += grad[r];
        right.sum_hess += hess[r];
      }
    }

    const auto left_node = static_cast<std::int32_t>(nodes.size());
    const auto right_node = left_node + 1;
    TreeNode& pn = nodes[static_cast<std::size_t>(parent.node)];
    pn.feature = split.feature;
    pn.threshold = split.threshold;
    pn.gain = split.gain;
    pn.left = left_node;
    pn.right = right_node;
    pn.count = static_cast<std::int64_t>(parent.rows.size());
    nodes.emplace_back();
    nodes.emplace_back();
    left.node = left_node;
    right.node = right_node;

    // One more split is possible only if the budget allows it.
    if (leaves.size() + 1 < max_leaves) {
      Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
      Leaf& large = left.rows.size() <= right.rows.size() ? right : left;
      const bool split_small = can_split(small);
      const bool split_large = can_split(large);
      if (split_small || split_large) build_histogram(small, grad, hess);
      if (split_large) {
        large.hist = std::move(parent.hist);
        for (std::size_t i = 0; i < large.hist.size(); ++i) {
          large.hist[i].grad -= small.hist[i].grad;
          large.hist[i].hess -= small.hist[i].hess;
          large.hist[i].count -= small.hist[i].count;
        }
        find_best_split(large);
      }
      if (split_small) {
        find_best_split(small);
      } else {
        release_histogram(small.hist);
      }
    }
    release_histogram(parent.hist);

    leaves[pick] = std::move(left);
    leaves.push_back(std::move(right));
  }

  out.row_leaf.assign(data_.n_rows, 0);
  constexpr double kEps = 1e-12;
  for (auto& leaf : leaves) {
    release_histogram(leaf.hist);
    TreeNode& n = nodes[static_cast<std::size_t>(leaf.node)];
    n.feature = -1;
    n.count = static_cast<std::int64_t>(leaf.rows.size());
    n.value = -leaf.sum_grad / (leaf.sum_hess + config_.lambda_l2 + kEps) * config_.learning_rate;
    for (const auto r : leaf.rows) out.row_leaf[r] = leaf.node;
  }
  return out;
}

}  // namespace malfuse::gbdt::detail
