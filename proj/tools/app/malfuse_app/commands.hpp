#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "malfuse/ablation.hpp"
#include "malfuse_app/config.hpp"

namespace malfuse::app {

// Every command computes all of its artifacts before writing any of them, and
// each file is written atomically. Failures are reported as exceptions.

// data.<domain>.csv for each configured domain without an explicit data path.
void gen_data(const RunConfig& config, std::ostream& log);

// stats/importance/model/trainlog/valid/scores.<domain>.*
void train(const RunConfig& config, const std::string& domain, std::ostream& log);

// weights.txt, grid.csv, corners.csv, report.fused.{csv,txt}
void fuse_optimize(const RunConfig& config, std::ostream& log);

// report/confusion/histogram files for a domain model (native validation
// split) or for "fused" (pooled validation set).
void evaluate(const RunConfig& config, const std::string& target, std::ostream& log);

struct PredictOptions {
  std::filesystem::path input;
  std::string target = "fused";
  std::optional<std::filesystem::path> output;  // default <out>/predictions.<target>.csv
};

// Writes row,probability,class for every input row.
void predict(const RunConfig& config, const PredictOptions& options, std::ostream& log);

// ablation.<study>.{csv,txt}; `domain` restricts the feature-count study.
void ablate(const RunConfig& config, ablation::StudyKind study,
            const std::optional<std::string>& domain, std::ostream& log);

}  // namespace malfuse::app
