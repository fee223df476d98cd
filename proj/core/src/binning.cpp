#include <algorithm>
#include <stdexcept>

#include "malfuse/gbdt.hpp"

namespace malfuse::gbdt {

namespace {

// Boundary between two consecutive distinct values a < b such that a falls in
// the lower bin and b in the upper one.
double split_point(double a, double b) {
  const double mid = a + (b - a) * 0.5;
  return mid < b ? mid : a;
}

std::vector<double> feature_boundaries(std::vector<double>& values, int max_bins) {
  std::vector<double> out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());

  std::vector<double> distinct;
  std::vector<std::size_t> cumulative;  // rows with value <= distinct[i]
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (distinct.empty() || values[i] != distinct.back()) {
      distinct.push_back(values[i]);
      cumulative.push_back(0);
    }
    cumulative.back() = i + 1;
  }

  const std::size_t d = distinct.size();
  const auto bins = static_cast<std::size_t>(max_bins);
  if (d <= bins) {
    for (std::size_t i = 0; i + 1 < d; ++i) out.push_back(split_point(distinct[i], distinct[i + 1]));
    return out;
  }

  const std::size_t n = values.size();
  std::size_t i = 0;
  for (std::size_t j = 1; j < bins; ++j) {
    const std::size_t target = (j * n + bins - 1) / bins;  // ceil(j * n / bins)
    while (i < d && cumulative[i] < target) ++i;
    if (i + 1 >= d) break;
    const double boundary = split_point(distinct[i], distinct[i + 1]);
    if (out.empty() || boundary > out.back()) out.push_back(boundary);
  }
  return out;
}

}  // namespace

BinMapper::BinMapper(std::vector<std::vector<double>> boundaries)
    : boundaries_(std::move(boundaries)) {
  for (const auto& b : boundaries_) {
    if (b.size() > 254) throw std::invalid_argument("BinMapper: more than 255 bins");
    for (std::size_t i = 1; i < b.size(); ++i) {
      if (!(b[i - 1] < b[i])) {
        throw std::invalid_argument("BinMapper: boundaries must be strictly increasing");
      }
    }
  }
}

std::uint8_t BinMapper::bin(std::size_t feature, double x) const {
  const auto& b = boundaries_[feature];
  return static_cast<std::uint8_t>(std::lower_bound(b.begin(), b.end(), x) - b.begin());
}

BinMapper compute_bins(const tabular::LabeledDataset& train, int max_bins) {
  if (max_bins < 2 || max_bins > 255) {
    throw std::invalid_argument("compute_bins: max_bins must lie in [2, 255]");
  }
  if (train.n_rows() == 0) throw std::invalid_argument("compute_bins: empty dataset");
  std::vector<std::vector<double>> boundaries(train.n_cols());
  std::vector<double> values;
  for (std::size_t c = 0; c < train.n_cols(); ++c) {
    values.clear();
    for (std::size_t r = 0; r < train.n_rows(); ++r) {
      if (train.features.is_present(r, c)) values.push_back(train.features.value(r, c));
    }
    boundaries[c] = feature_boundaries(values, max_bins);
  }
  return BinMapper(std::move(boundaries));
}

}  // namespace malfuse::gbdt
