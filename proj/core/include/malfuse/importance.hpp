#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace malfuse {

// Gain-based importance of each model feature, aligned with feature_names.
struct FeatureImportance {
  std::vector<std::string> feature_names;
  std::vector<double> total_gain;
  std::vector<std::int64_t> split_count;

  std::size_t size() const { return feature_names.size(); }
};

// CSV with columns feature,total_gain,split_count in model column order.
std::string importance_to_csv(const FeatureImportance& importance);
FeatureImportance importance_from_csv(std::string_view text, std::string_view source = "<importance>");

}  // namespace malfuse
