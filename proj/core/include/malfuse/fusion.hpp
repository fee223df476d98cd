#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malfuse/gbdt.hpp"
#include "malfuse/tabular.hpp"

namespace malfuse::fusion {

using WeightVector = std::vector<double>;

// Nonnegative per-domain weights summing to one, in canonical domain order.
struct FusionWeights {
  std::vector<std::string> domains;
  WeightVector values;

  double at(std::string_view domain) const;
  void validate() const;
  bool operator==(const FusionWeights&) const = default;
};

// Pooled held-out rows of every domain, scored by every model.
struct FusionValidationSet {
  std::vector<std::string> domains;  // canonical model order
  std::vector<std::uint32_t> origin;  // index into domains
  std::vector<double> probs;          // row-major, n_rows x n_models
  std::vector<std::uint8_t> labels;

  std::size_t n_rows() const { return labels.size(); }
  std::size_t n_models() const { return domains.size(); }
  std::span<const double> row(std::size_t r) const {
    return {probs.data() + r * n_models(), n_models()};
  }
  double prob(std::size_t r, std::size_t model) const { return probs[r * n_models() + model]; }

  void validate() const;
  // Same rows with one model's probability column removed.
  FusionValidationSet without_model(std::string_view domain) const;
  // Model columns permuted into `order`.
  FusionValidationSet reordered(std::span<const std::string> order) const;
};

struct BuildOptions {
  // Keeps at most this many validation rows per domain (seeded choice).
  std::optional<std::size_t> per_domain_cap;
  std::uint64_t seed = 42;
};

// Probability a model assigns to a row from a foreign feature space: every
// feature is absent, so it is imputed with the training median.
double out_of_domain_prior(const gbdt::Ensemble& model, const tabular::PreprocessStats& stats);

// `valid_splits` hold raw (unpreprocessed) held-out rows per domain.
FusionValidationSet build_fusion_set(const std::map<std::string, gbdt::Ensemble>& models,
                                     const std::map<std::string, tabular::LabeledDataset>& valid_splits,
                                     const std::map<std::string, tabular::PreprocessStats>& stats,
                                     std::span<const std::string> domain_order,
                                     const BuildOptions& options = {});

double fuse(const std::map<std::string, double>& probs, const FusionWeights& weights);
double fuse(std::span<const double> probs, std::span<const double> weights);
std::vector<double> fuse_all(const FusionValidationSet& set, std::span<const double> weights);

// Number of lattice steps 1/step; throws when step does not divide 1.
int lattice_divisions(double step);
// All weight vectors k * step with nonnegative integers k summing to 1/step,
// in lexicographic order.
std::vector<WeightVector> enumerate_simplex(std::size_t n_domains, double step);
std::uint64_t simplex_size(std::size_t n_domains, int divisions);

// Clips negatives to zero and renormalizes. An all-zero input maps to uniform weights.
WeightVector project_to_simplex(std::span<const double> weights);
// Nearest lattice point by largest remainder; ties go to the lower index.
WeightVector snap_to_grid(std::span<const double> weights, double step);

double macro_f1_at(const FusionValidationSet& set, std::span<const double> weights,
                   double threshold);

struct GridEntry {
  WeightVector weights;
  double macro_f1 = 0.0;
};

struct WeightGridResult {
  std::vector<std::string> domains;
  double step = 0.1;
  double threshold = 0.5;
  std::vector<GridEntry> entries;  // lexicographic weight order
  std::size_t best_index = 0;

  FusionWeights best() const;
  double best_f1() const { return entries.at(best_index).macro_f1; }
};

// Evaluates every lattice point; the best entry has maximal macro F1 with
// ties going to the lexicographically smallest weight vector.
WeightGridResult grid_search(const FusionValidationSet& set, double step, double threshold = 0.5,
                             int num_workers = 1);

// Persisted fusion choice.
struct FusionBundle {
  FusionWeights weights;
  double step = 0.1;
  double threshold = 0.5;
  double macro_f1 = 0.0;
};

FusionBundle bundle_from(const WeightGridResult& result);
std::string bundle_to_text(const FusionBundle& bundle);
FusionBundle bundle_from_text(std::string_view text, std::string source = "<weights>");
std::string grid_to_csv(const WeightGridResult& result);

}  // namespace malfuse::fusion
