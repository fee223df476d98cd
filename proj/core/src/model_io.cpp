#include <stdexcept>

#include "malfuse/gbdt.hpp"
#include "malfuse/text_io.hpp"

namespace malfuse::gbdt {

namespace {

constexpr std::string_view kMagic = "malfuse_gbdt_model";
constexpr std::string_view kVersion = "1";

void put(std::string& out, std::string_view key, std::string_view value) {
  out += key;
  out += '\t';
  out += value;
  out += '\n';
}

void check_name(const std::string& name) {
  if (name.find_first_of("\t\r\n") != std::string::npos) {
    throw std::invalid_argument("feature name contains a tab or newline: " + name);
  }
}

std::int32_t to_i32(std::string_view text) { return static_cast<std::int32_t>(parse_int(text)); }

}  // namespace

std::string to_text(const Ensemble& model) {
  std::string out;
  put(out, kMagic, kVersion);
  const auto& c = model.config;
  put(out, "num_leaves", std::to_string(c.num_leaves));
  put(out, "learning_rate", format_real(c.learning_rate));
  put(out, "n_estimators", std::to_string(c.n_estimators));
  put(out, "early_stopping_rounds", std::to_string(c.early_stopping_rounds));
  put(out, "max_bins", std::to_string(c.max_bins));
  put(out, "min_data_in_leaf", std::to_string(c.min_data_in_leaf));
  put(out, "min_gain_to_split", format_real(c.min_gain_to_split));
  put(out, "lambda_l2", format_real(c.lambda_l2));
  put(out, "min_sum_hessian_in_leaf", format_real(c.min_sum_hessian_in_leaf));
  put(out, "seed", std::to_string(c.seed));

  put(out, "features", std::to_string(model.feature_names.size()));
  for (const auto& name : model.feature_names) {
    check_name(name);
    put(out, "feature", name);
  }
  for (std::size_t f = 0; f < model.bin_mapper.num_features(); ++f) {
    const auto& b = model.bin_mapper.boundaries(f);
    std::string line = std::to_string(b.size());
    for (double x : b) {
      line += '\t';
      line += format_real(x);
    }
    put(out, "bins", line);
  }
  put(out, "base_score", format_real(model.base_score));
  put(out, "best_iteration", std::to_string(model.best_iteration));
  put(out, "trees", std::to_string(model.trees.size()));
  for (const auto& tree : model.trees) {
    put(out, "tree", std::to_string(tree.nodes.size()));
    for (const auto& n : tree.nodes) {
      put(out, "node",
          std::to_string(n.feature) + '\t' + std::to_string(n.threshold) + '\t' +
              std::to_string(n.left) + '\t' + std::to_string(n.right) + '\t' +
              format_real(n.gain) + '\t' + format_real(n.value) + '\t' + std::to_string(n.count));
    }
  }
  out += "end\n";
  return out;
}

Ensemble from_text(std::string_view text, std::string source) {
  RecordReader in(text, std::move(source));
  if (in.expect(kMagic) != kVersion) in.fail("unsupported model version");
  Ensemble model;
  auto& c = model.config;
  c.num_leaves = static_cast<int>(in.expect_int("num_leaves"));
  c.learning_rate = in.expect_real("learning_rate");
  c.n_estimators = static_cast<int>(in.expect_int("n_estimators"));
  c.early_stopping_rounds = static_cast<int>(in.expect_int("early_stopping_rounds"));
  c.max_bins = static_cast<int>(in.expect_int("max_bins"));
  c.min_data_in_leaf = static_cast<int>(in.expect_int("min_data_in_leaf"));
  c.min_gain_to_split = in.expect_real("min_gain_to_split");
  c.lambda_l2 = in.expect_real("lambda_l2");
  c.min_sum_hessian_in_leaf = in.expect_real("min_sum_hessian_in_leaf");
  c.seed = static_cast<std::uint64_t>(in.expect_int("seed"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    in.fail(e.what());
  }

  const auto n_features = in.expect_int("features");
  if (n_features < 0) in.fail("negative feature count");
  for (std::int64_t f = 0; f < n_features; ++f) model.feature_names.push_back(in.expect("feature"));

  std::vector<std::vector<double>> boundaries;
  for (std::int64_t f = 0; f < n_features; ++f) {
    const std::string rec = in.expect("bins");
    const auto parts = split(rec, '\t');
    const auto count = parse_int(parts[0]);
    if (count < 0 || static_cast<std::size_t>(count) + 1 != parts.size()) {
      in.fail("bin record count does not match its values");
    }
    std::vector<double> b;
    for (std::size_t i = 1; i < parts.size(); ++i) b.push_back(parse_real(parts[i]));
    boundaries.push_back(std::move(b));
  }
  try {
    model.bin_mapper = BinMapper(std::move(boundaries));
  } catch (const std::invalid_argument& e) {
    in.fail(e.what());
  }

  model.base_score = in.expect_real("base_score");
  model.best_iteration = static_cast<int>(in.expect_int("best_iteration"));
  const auto n_trees = in.expect_int("trees");
  if (n_trees < 0) in.fail("negative tree count");
  for (std::int64_t t = 0; t < n_trees; ++t) {
    DecisionTree tree;
    const auto n_nodes = in.expect_int("tree");
    if (n_nodes < 1) in.fail("tree without nodes");
    for (std::int64_t i = 0; i < n_nodes; ++i) {
      const std::string rec = in.expect("node");
      const auto p = split(rec, '\t');
      if (p.size() != 7) in.fail("node record needs 7 fields");
      TreeNode n;
      n.feature = to_i32(p[0]);
      n.threshold = to_i32(p[1]);
      n.left = to_i32(p[2]);
      n.right = to_i32(p[3]);
      n.gain = parse_real(p[4]);
      n.value = parse_real(p[5]);
      n.count = parse_int(p[6]);
      if (!n.is_leaf()) {
        const bool ok_feature = n.feature < n_features;
        const bool ok_children = n.left > i && n.right > i && n.left < n_nodes && n.right < n_nodes;
        if (!ok_feature || !ok_children || n.threshold < 0 ||
            static_cast<std::size_t>(n.threshold) >=
                model.bin_mapper.boundaries(static_cast<std::size_t>(n.feature)).size()) {
          in.fail("malformed internal node");
        }
      }
      tree.nodes.push_back(n);
    }
    model.trees.push_back(std::move(tree));
  }
  in.expect_line("end");
  if (!in.done()) in.fail("trailing data after end");
  return model;
}

void save_model(const Ensemble& ensemble, const std::filesystem::path& path) {
  write_file_atomic(path, to_text(ensemble));
}

Ensemble load_model(const std::filesystem::path& path) {
  return from_text(read_file(path), path.string());
}

}  // namespace malfuse::gbdt
