#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace malfuse::metrics {

inline constexpr double kProbClip = 1e-15;

// Malware (label 1) is the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvaluationReport {
  std::int64_t n_samples = 0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  // Index 0 = benign, 1 = malware.
  std::array<ClassScores, 2> per_class{};
  double logloss = 0.0;
  double threshold = 0.5;
  ConfusionMatrix confusion;
};

struct ProbabilityHistogram {
  std::vector<double> edges;  // n_bins + 1 edges over [0,1]
  std::vector<std::int64_t> benign;
  std::vector<std::int64_t> malware;

  std::size_t n_bins() const { return benign.size(); }
};

ConfusionMatrix confusion(std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> predictions);

// Per-class scores with the 0/0 -> 0 convention.
std::array<ClassScores, 2> class_scores(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

double logloss(std::span<const std::uint8_t> labels, std::span<const double> probs);

std::vector<std::uint8_t> classify(std::span<const double> probs, double threshold);

EvaluationReport evaluate(std::span<const std::uint8_t> labels, std::span<const double> probs,
                          double threshold = 0.5);

ProbabilityHistogram prob_histogram(std::span<const double> probs,
                                    std::span<const std::uint8_t> labels, std::size_t n_bins);

// --- serialization ----------------------------------------------------------

struct ReportExtras {
  std::string target;
  std::vector<std::pair<std::string, double>> weights;  // fused reports only
};

std::string report_csv(const EvaluationReport& report, const ReportExtras& extras);
std::string report_text(const EvaluationReport& report, const ReportExtras& extras);
std::string confusion_csv(const ConfusionMatrix& cm);
// Plot-ready "bin_midpoint,count" for one label group (0 = benign, 1 = malware).
std::string histogram_csv(const ProbabilityHistogram& hist, std::uint8_t group);

}  // namespace malfuse::metrics
