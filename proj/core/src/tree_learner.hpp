#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "malfuse/gbdt.hpp"
#include "worker_pool.hpp"

namespace malfuse::gbdt::detail {

// Column-major bin indices of the training matrix.
struct BinnedColumns {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<std::uint8_t> bins;
  std::vector<std::size_t> offsets;  // histogram slot of each feature's bin 0; size n_features + 1

  const std::uint8_t* column(std::size_t f) const { return bins.data() + f * n_rows; }
  std::size_t num_bins(std::size_t f) const { return offsets[f + 1] - offsets[f]; }

  static BinnedColumns build(const tabular::LabeledDataset& ds, const BinMapper& mapper);
};

struct HistEntry {
  double grad = 0.0;
  double hess = 0.0;
  std::int64_t count = 0;
};

struct SplitInfo {
  double gain = -std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  std::int32_t threshold = -1;

  bool valid() const { return feature >= 0; }
};

struct GrownTree {
  DecisionTree tree;
  std::vector<std::int32_t> row_leaf;  // node index of the leaf holding each training row
};

class TreeLearner {
 public:
  TreeLearner(const BinnedColumns& data, const GbdtConfig& config, malfuse::detail::WorkerPool& pool);

  GrownTree grow(std::span<const double> grad, std::span<const double> hess);

 private:
  struct Leaf {
    std::int32_t node = 0;
    std::vector<std::uint32_t> rows;
    std::vector<HistEntry> hist;  // empty when the leaf can no longer split
    double sum_grad = 0.0;
    double sum_hess = 0.0;
    SplitInfo best;
  };

  void build_histogram(Leaf& leaf, std::span<const double> grad, std::span<const double> hess);
  std::vector<HistEntry> acquire_histogram();
  void release_histogram(std::vector<HistEntry>& hist);
  void find_best_split(Leaf& leaf);
  bool can_split(const Leaf& leaf) const;

  const BinnedColumns& data_;
  const GbdtConfig& config_;
  malfuse::detail::WorkerPool& pool_;
  std::vector<SplitInfo> per_feature_;
  std::vector<std::vector<HistEntry>> spare_;
};

}  // namespace malfuse::gbdt::detail
