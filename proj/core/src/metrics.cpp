#include "malfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "malfuse/text_io.hpp"

namespace malfuse::metrics {

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

ClassScores scores_from(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  ClassScores s;
  s.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
  s.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
  s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> predictions) {
  check_lengths(labels.size(), predictions.size(), "confusion");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] != 0;
    const bool predicted = predictions[i] != 0;
    if (actual && predicted) {
      ++cm.tp;
    } else if (!actual && predicted) {
      ++cm.fp;
    } else if (actual) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

std::array<ClassScores, 2> class_scores(const ConfusionMatrix& cm) {
  // Benign as the positive class swaps tp<->tn and fp<->fn.
  return {scores_from(cm.tn, cm.fn, cm.fp), scores_from(cm.tp, cm.fp, cm.fn)};
}

double macro_f1(const ConfusionMatrix& cm) {
  const auto s = class_scores(cm);
  return 0.5 * (s[0].f1 + s[1].f1);
}

double logloss(std::span<const std::uint8_t> labels, std::span<const double> probs) {
  check_lengths(labels.size(), probs.size(), "logloss");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClip, 1.0 - kProbClip);
    sum += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -sum / static_cast<double>(labels.size());
}

std::vector<std::uint8_t> classify(std::span<const double> probs, double threshold) {
  std::vector<std::uint8_t> out(probs.size());
  std::transform(probs.begin(), probs.end(), out.begin(),
                 [threshold](double p) { return static_cast<std::uint8_t>(p >= threshold); });
  return out;
}

EvaluationReport evaluate(std::span<const std::uint8_t> labels, std::span<const double> probs,
                          double threshold) {
  EvaluationReport report;
  const auto predictions = classify(probs, threshold);
  report.confusion = confusion(labels, predictions);
  report.n_samples = report.confusion.total();
  report.per_class = class_scores(report.confusion);
  report.macro_f1 = 0.5 * (report.per_class[0].f1 + report.per_class[1].f1);
  report.macro_precision = 0.5 * (report.per_class[0].precision + report.per_class[1].precision);
  report.macro_recall = 0.5 * (report.per_class[0].recall + report.per_class[1].recall);
  report.logloss = logloss(labels, probs);
  report.threshold = threshold;
  return report;
}

ProbabilityHistogram prob_histogram(std::span<const double> probs,
                                    std::span<const std::uint8_t> labels, std::size_t n_bins) {
  if (n_bins < 1) throw std::invalid_argument("prob_histogram: n_bins must be >= 1");
  if (probs.size() != labels.size()) {
    throw std::invalid_argument("prob_histogram: length mismatch");
  }
  ProbabilityHistogram hist;
  hist.edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    hist.edges[i] = static_cast<double>(i) / static_cast<double>(n_bins);
  }
  hist.benign.assign(n_bins, 0);
  hist.malware.assign(n_bins, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 0.0, 1.0);
    auto bin = static_cast<std::size_t>(p * static_cast<double>(n_bins));
    bin = std::min(bin, n_bins - 1);  // p == 1 closes the last bin
    (labels[i] ? hist.malware : hist.benign)[bin] += 1;
  }
  return hist;
}

std::string report_csv(const EvaluationReport& r, const ReportExtras& extras) {
  std::string header =
      "target,n_samples,threshold,macro_f1,macro_precision,macro_recall,logloss,"
      "precision_benign,recall_benign,f1_benign,precision_malware,recall_malware,f1_malware,"
      "tp,fp,fn,tn";
  std::string row = extras.target + ',' + std::to_string(r.n_samples) + ',' +
                    format_real(r.threshold) + ',' + format_real(r.macro_f1) + ',' +
                    format_real(r.macro_precision) + ',' + format_real(r.macro_recall) + ',' +
                    format_real(r.logloss);
  for (const auto& c : r.per_class) {
    row += ',' + format_real(c.precision) + ',' + format_real(c.recall) + ',' + format_real(c.f1);
  }
  row += ',' + std::to_string(r.confusion.tp) + ',' + std::to_string(r.confusion.fp) + ',' +
         std::to_string(r.confusion.fn) + ',' + std::to_string(r.confusion.tn);
  for (const auto& [domain, w] : extras.weights) {
    header += ",weight_" + domain;
    row += ',' + format_real(w);
  }
  return header + '\n' + row + '\n';
}

std::string report_text(const EvaluationReport& r, const ReportExtras& extras) {
  std::string out = "malfuse_report\t1\n";
  out += "target\t" + extras.target + '\n';
  out += "n_samples\t" + std::to_string(r.n_samples) + '\n';
  out += "threshold\t" + format_real(r.threshold) + '\n';
  out += "macro_f1\t" + format_real(r.macro_f1) + '\n';
  out += "macro_precision\t" + format_real(r.macro_precision) + '\n';
  out += "macro_recall\t" + format_real(r.macro_recall) + '\n';
  out += "logloss\t" + format_real(r.logloss) + '\n';
  const char* names[2] = {"benign", "malware"};
  for (int c = 0; c < 2; ++c) {
    out += std::string("precision_") + names[c] + '\t' + format_real(r.per_class[c].precision) + '\n';
    out += std::string("recall_") + names[c] + '\t' + format_real(r.per_class[c].recall) + '\n';
    out += std::string("f1_") + names[c] + '\t' + format_real(r.per_class[c].f1) + '\n';
  }
  out += "tp\t" + std::to_string(r.confusion.tp) + '\n';
  out += "fp\t" + std::to_string(r.confusion.fp) + '\n';
  out += "fn\t" + std::to_string(r.confusion.fn) + '\n';
  out += "tn\t" + std::to_string(r.confusion.tn) + '\n';
  for (const auto& [domain, w] : extras.weights) {
    out += "weight\t" + domain + '\t' + format_real(w) + '\n';
  }
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  return "actual,predicted_benign,predicted_malware\n"
         "benign," + std::to_string(cm.tn) + ',' + std::to_string(cm.fp) + "\n"
         "malware," + std::to_string(cm.fn) + ',' + std::to_string(cm.tp) + "\n";
}

std::string histogram_csv(const ProbabilityHistogram& hist, std::uint8_t group) {
  const auto& counts = group ? hist.malware : hist.benign;
  std::string out = "bin_midpoint,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out += format_real(0.5 * (hist.edges[i] + hist.edges[i + 1])) + ',' +
           std::to_string(counts[i]) + '\n';
  }
  return out;
}

}  // namespace malfuse::metrics
