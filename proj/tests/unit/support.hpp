#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "malfuse/random.hpp"
#include "malfuse/tabular.hpp"

namespace malfuse::test {

// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("malfuse_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline tabular::LabeledDataset make_dataset(const std::vector<std::vector<double>>& rows,
                                            std::vector<std::uint8_t> labels,
                                            std::vector<std::string> names = {}) {
  tabular::LabeledDataset ds;
  const std::size_t cols = rows.empty() ? names.size() : rows.front().size();
  if (names.empty()) {
    for (std::size_t c = 0; c < cols; ++c) names.push_back("f" + std::to_string(c));
  }
  ds.features = tabular::FeatureMatrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) ds.features.set(r, c, rows[r][c]);
  }
  ds.labels = std::move(labels);
  ds.feature_names = std::move(names);
  ds.domain_id = "test";
  return ds;
}

// Uniform [0,1) features; the label is 1 when the first `signal` columns sum
// past their mean, flipped with probability `noise`.
inline tabular::LabeledDataset random_dataset(std::size_t n_rows, std::size_t n_cols,
                                              std::uint64_t seed, std::size_t signal = 1,
                                              double noise = 0.0) {
  Xoshiro256 rng(seed);
  std::vector<std::vector<double>> rows(n_rows, std::vector<double>(n_cols));
  std::vector<std::uint8_t> labels(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      rows[r][c] = rng.uniform_open();
      if (c < signal) s += rows[r][c];
    }
    bool y = s > 0.5 * static_cast<double>(signal);
    if (rng.uniform_open() < noise) y = !y;
    labels[r] = y ? 1 : 0;
  }
  return make_dataset(rows, labels);
}

}  // namespace malfuse::test
