#include "malfuse/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "malfuse/random.hpp"
#include "malfuse/text_io.hpp"

namespace malfuse {

std::string importance_to_csv(const FeatureImportance& importance) {
  std::string out = "feature,total_gain,split_count\n";
  for (std::size_t i = 0; i < importance.size(); ++i) {
    out += tabular::csv_escape(importance.feature_names[i]);
    out += ',' + format_real(importance.total_gain[i]) + ',' +
           std::to_string(importance.split_count[i]) + '\n';
  }
  return out;
}

FeatureImportance importance_from_csv(std::string_view text, std::string_view source) {
  const auto table = tabular::parse_csv(text, source);
  const std::vector<std::string> expected{"feature", "total_gain", "split_count"};
  if (table.header != expected) {
    throw std::invalid_argument(std::string(source) + ": expected header feature,total_gain,split_count");
  }
  FeatureImportance out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    double gain = 0.0;
    if (!try_parse_real(row[1], gain)) {
      throw std::invalid_argument(std::string(source) + ": row " + std::to_string(i + 1) +
                                  ": bad total_gain '" + row[1] + "'");
    }
    out.feature_names.push_back(row[0]);
    out.total_gain.push_back(gain);
    out.split_count.push_back(parse_int(row[2]));
  }
  return out;
}

}  // namespace malfuse

namespace malfuse::tabular {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0), present_(rows * cols, 1) {}

std::optional<double> FeatureMatrix::get(std::size_t r, std::size_t c) const {
  if (!is_present(r, c)) return std::nullopt;
  return values_[r * cols_ + c];
}

void FeatureMatrix::set(std::size_t r, std::size_t c, double v) {
  values_[r * cols_ + c] = v;
  present_[r * cols_ + c] = 1;
}

void FeatureMatrix::set_absent(std::size_t r, std::size_t c) {
  values_[r * cols_ + c] = 0.0;
  present_[r * cols_ + c] = 0;
}

std::size_t FeatureMatrix::absent_count() const {
  return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), 0));
}

std::size_t LabeledDataset::count_label(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw std::invalid_argument("dataset '" + domain_id + "': " +
                                std::to_string(labels.size()) + " labels for " +
                                std::to_string(features.rows()) + " rows");
  }
  if (features.cols() != feature_names.size()) {
    throw std::invalid_argument("dataset '" + domain_id + "': " +
                                std::to_string(feature_names.size()) + " names for " +
                                std::to_string(features.cols()) + " columns");
  }
  for (auto y : labels) {
    if (y > 1) throw std::invalid_argument("dataset '" + domain_id + "': non-binary label");
  }
}

double PreprocessStats::scale(std::size_t c, double x) const {
  const double lo = min[c];
  const double hi = max[c];
  if (!(hi > lo)) return 0.0;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

PreprocessStats PreprocessStats::select(std::span<const std::string> names) const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < feature_names.size(); ++c) index.emplace(feature_names[c], c);
  PreprocessStats out;
  out.label_names = label_names;
  for (const auto& name : names) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw std::invalid_argument("preprocess stats have no column '" + name + "'");
    }
    out.feature_names.push_back(name);
    out.median.push_back(median[it->second]);
    out.min.push_back(min[it->second]);
    out.max.push_back(max[it->second]);
  }
  return out;
}

PreprocessStats fit_preprocess(const LabeledDataset& train) {
  if (train.n_rows() == 0) throw std::invalid_argument("fit_preprocess: empty dataset");
  train.validate();

  PreprocessStats stats;
  stats.feature_names = train.feature_names;
  stats.label_names = train.label_names;
  const std::size_t cols = train.n_cols();
  stats.median.assign(cols, 0.0);
  stats.min.assign(cols, 0.0);
  stats.max.assign(cols, 0.0);

  std::vector<double> column;
  column.reserve(train.n_rows());
  for (std::size_t c = 0; c < cols; ++c) {
    column.clear();
    for (std::size_t r = 0; r < train.n_rows(); ++r) {
      if (train.features.is_present(r, c)) column.push_back(train.features.value(r, c));
    }
    if (column.empty()) continue;
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    stats.median[c] = (n % 2 == 1) ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    stats.min[c] = column.front();
    stats.max[c] = column.back();
  }
  return stats;
}

LabeledDataset apply_preprocess(const LabeledDataset& ds, const PreprocessStats& stats) {
  if (ds.feature_names != stats.feature_names) {
    throw std::invalid_argument("apply_preprocess: schema mismatch between dataset '" +
                                ds.domain_id + "' and preprocess stats");
  }
  LabeledDataset out;
  out.labels = ds.labels;
  out.feature_names = ds.feature_names;
  out.domain_id = ds.domain_id;
  out.label_names = ds.label_names;
  out.features = FeatureMatrix(ds.n_rows(), ds.n_cols());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t c = 0; c < ds.n_cols(); ++c) {
      const double x = ds.features.is_present(r, c) ? ds.features.value(r, c) : stats.median[c];
      out.features.set(r, c, stats.scale(c, x));
    }
  }
  return out;
}

std::string stats_to_text(const PreprocessStats& stats) {
  std::string out = "malfuse_preprocess_stats\t1\n";
  out += "label_0\t" + stats.label_names[0] + '\n';
  out += "label_1\t" + stats.label_names[1] + '\n';
  out += "columns\t" + std::to_string(stats.feature_names.size()) + '\n';
  for (std::size_t c = 0; c < stats.feature_names.size(); ++c) {
    const auto& name = stats.feature_names[c];
    if (name.find_first_of("\t\n\r") != std::string::npos) {
      throw std::invalid_argument("column name contains a tab or newline: " + name);
    }
    out += "column\t" + name + '\t' + format_real(stats.median[c]) + '\t' +
           format_real(stats.min[c]) + '\t' + format_real(stats.max[c]) + '\n';
  }
  return out;
}

PreprocessStats stats_from_text(std::string_view text, std::string source) {
  RecordReader in(text, std::move(source));
  if (in.expect("malfuse_preprocess_stats") != "1") in.fail("unsupported stats version");
  PreprocessStats stats;
  stats.label_names[0] = in.expect("label_0");
  stats.label_names[1] = in.expect("label_1");
  const auto n = in.expect_int("columns");
  if (n < 0) in.fail("negative column count");
  for (std::int64_t c = 0; c < n; ++c) {
    const std::string rec = in.expect("column");
    const auto parts = split(rec, '\t');
    if (parts.size() != 4) in.fail("column record needs name, median, min, max");
    stats.feature_names.emplace_back(parts[0]);
    stats.median.push_back(parse_real(parts[1]));
    stats.min.push_back(parse_real(parts[2]));
    stats.max.push_back(parse_real(parts[3]));
  }
  if (!in.done()) in.fail("trailing data");
  return stats;
}

LabeledDataset take_rows(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.feature_names = ds.feature_names;
  out.domain_id = ds.domain_id;
  out.label_names = ds.label_names;
  out.features = FeatureMatrix(rows.size(), ds.n_cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= ds.n_rows()) throw std::out_of_range("take_rows: row index out of range");
    for (std::size_t c = 0; c < ds.n_cols(); ++c) {
      if (ds.features.is_present(r, c)) {
        out.features.set(i, c, ds.features.value(r, c));
      } else {
        out.features.set_absent(i, c);
      }
    }
    out.labels.push_back(ds.labels[r]);
  }
  return out;
}

LabeledDataset project_columns(const LabeledDataset& ds, std::span<const std::string> names) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < ds.n_cols(); ++c) index.emplace(ds.feature_names[c], c);
  std::vector<std::size_t> source;
  source.reserve(names.size());
  for (const auto& name : names) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw std::invalid_argument("dataset '" + ds.domain_id + "' has no column '" + name + "'");
    }
    source.push_back(it->second);
  }
  LabeledDataset out;
  out.labels = ds.labels;
  out.feature_names.assign(names.begin(), names.end());
  out.domain_id = ds.domain_id;
  out.label_names = ds.label_names;
  out.features = FeatureMatrix(ds.n_rows(), names.size());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t j = 0; j < source.size(); ++j) {
      if (ds.features.is_present(r, source[j])) {
        out.features.set(r, j, ds.features.value(r, source[j]));
      } else {
        out.features.set_absent(r, j);
      }
    }
  }
  return out;
}

SplitPair stratified_split(const LabeledDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: train_fraction must lie in (0,1)");
  }
  ds.validate();
  SplitPair out;
  Xoshiro256 rng(seed);
  for (std::uint8_t label : {kBenign, kMalware}) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
      if (ds.labels[r] == label) members.push_back(r);
    }
    if (members.size() < 2) {
      throw std::invalid_argument("stratified_split: class " + std::to_string(label) +
                                  " has fewer than 2 rows");
    }
    shuffle(std::span<std::size_t>(members), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    out.train_rows.insert(out.train_rows.end(), members.begin(), members.begin() + n_train);
    out.valid_rows.insert(out.valid_rows.end(), members.begin() + n_train, members.end());
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.valid_rows.begin(), out.valid_rows.end());
  out.train = take_rows(ds, out.train_rows);
  out.valid = take_rows(ds, out.valid_rows);
  return out;
}

std::vector<std::size_t> top_feature_order(const FeatureImportance& importance, std::size_t k) {
  if (k < 1 || k > importance.size()) {
    throw std::invalid_argument("select_top_features: k=" + std::to_string(k) +
                                " out of range [1, " + std::to_string(importance.size()) + "]");
  }
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance.total_gain[a] > importance.total_gain[b];
  });
  order.resize(k);
  return order;
}

LabeledDataset select_top_features(const LabeledDataset& ds, const FeatureImportance& importance,
                                   std::size_t k) {
  const auto order = top_feature_order(importance, k);
  std::vector<std::string> names;
  names.reserve(order.size());
  for (auto idx : order) names.push_back(importance.feature_names[idx]);
  return project_columns(ds, names);
}

}  // namespace malfuse::tabular
