#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malfuse/importance.hpp"

namespace malfuse::tabular {

// Dense row-major matrix of doubles with an explicit per-cell presence flag.
// Absent cells are a separate state, so 0.0 stays an ordinary value.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  // All cells start present with value 0.0.
  FeatureMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool is_present(std::size_t r, std::size_t c) const { return present_[r * cols_ + c] != 0; }
  std::optional<double> get(std::size_t r, std::size_t c) const;
  // Raw stored value; 0.0 for absent cells.
  double value(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  void set(std::size_t r, std::size_t c, double v);
  void set_absent(std::size_t r, std::size_t c);

  std::size_t absent_count() const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> present_;
};

inline constexpr std::uint8_t kBenign = 0;
inline constexpr std::uint8_t kMalware = 1;

struct LabeledDataset {
  FeatureMatrix features;
  std::vector<std::uint8_t> labels;  // 0 = benign, 1 = malware
  std::vector<std::string> feature_names;
  std::string domain_id;
  // Original label text for encoded 0 and 1; empty strings when unknown.
  std::array<std::string, 2> label_names{"benign", "malware"};

  std::size_t n_rows() const { return labels.size(); }
  std::size_t n_cols() const { return feature_names.size(); }
  std::size_t count_label(std::uint8_t label) const;

  // Throws std::invalid_argument when a structural invariant is broken.
  void validate() const;

  bool operator==(const LabeledDataset&) const = default;
};

struct PreprocessStats {
  std::vector<std::string> feature_names;
  std::vector<double> median;
  std::vector<double> min;
  std::vector<double> max;
  std::array<std::string, 2> label_names{"benign", "malware"};

  // Scaled value of column c after imputation and min-max scaling.
  double scale(std::size_t c, double x) const;
  // Restricts/reorders the statistics to the given column names.
  PreprocessStats select(std::span<const std::string> names) const;

  bool operator==(const PreprocessStats&) const = default;
};

struct SplitPair {
  LabeledDataset train;
  LabeledDataset valid;
  // Source row indices, ascending.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> valid_rows;
};

// --- CSV --------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180 style: quoted fields, doubled quotes, CRLF or LF line ends.
CsvTable parse_csv(std::string_view text, std::string_view source = "<csv>");
std::string csv_escape(std::string_view field);

LabeledDataset load_csv(const std::filesystem::path& path, std::string_view label_column);
LabeledDataset dataset_from_csv(const CsvTable& table, std::string_view label_column,
                                std::string_view source = "<csv>");

// Feature-only load for scoring; columns listed in `ignore` are dropped.
// Labels are left empty.
FeatureMatrix matrix_from_csv(const CsvTable& table, std::vector<std::string>& names,
                              std::span<const std::string> ignore = {},
                              std::string_view source = "<csv>");

std::string to_csv(const LabeledDataset& ds, std::string_view label_column = "label");

// --- preprocessing ----------------------------------------------------------

PreprocessStats fit_preprocess(const LabeledDataset& train);
LabeledDataset apply_preprocess(const LabeledDataset& ds, const PreprocessStats& stats);

std::string stats_to_text(const PreprocessStats& stats);
PreprocessStats stats_from_text(std::string_view text, std::string source = "<stats>");

// --- splitting and selection ------------------------------------------------

SplitPair stratified_split(const LabeledDataset& ds, double train_fraction, std::uint64_t seed);

LabeledDataset take_rows(const LabeledDataset& ds, std::span<const std::size_t> rows);
// Extracts the named columns in the given order. Throws on a missing name.
LabeledDataset project_columns(const LabeledDataset& ds, std::span<const std::string> names);

// Column order for the k most important features: descending total gain,
// ties broken by lower column index.
std::vector<std::size_t> top_feature_order(const FeatureImportance& importance, std::size_t k);
LabeledDataset select_top_features(const LabeledDataset& ds, const FeatureImportance& importance,
                                   std::size_t k);

}  // namespace malfuse::tabular
