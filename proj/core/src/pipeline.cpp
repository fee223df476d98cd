#include "malfuse/pipeline.hpp"

namespace malfuse::pipeline {

PreparedDomain prepare_domain(const tabular::LabeledDataset& raw, double train_fraction,
                              std::uint64_t split_seed) {
  PreparedDomain out;
  out.domain_id = raw.domain_id;
  out.raw = tabular::stratified_split(raw, train_fraction, split_seed);
  out.stats = tabular::fit_preprocess(out.raw.train);
  out.train = tabular::apply_preprocess(out.raw.train, out.stats);
  out.valid = tabular::apply_preprocess(out.raw.valid, out.stats);
  return out;
}

DomainModel fit_selected(const PreparedDomain& domain, const FeatureImportance& full_importance,
                         std::size_t k, const gbdt::GbdtConfig& config, int num_workers) {
  const auto order = tabular::top_feature_order(full_importance, k);
  std::vector<std::string> names;
  names.reserve(order.size());
  for (auto idx : order) names.push_back(full_importance.feature_names[idx]);

  auto result = gbdt::train(tabular::project_columns(domain.train, names),
                            tabular::project_columns(domain.valid, names), config, num_workers);
  DomainModel model;
  model.domain_id = domain.domain_id;
  model.full_importance = full_importance;
  model.stats = domain.stats.select(names);
  model.ensemble = std::move(result.ensemble);
  model.log = std::move(result.log);
  return model;
}

DomainModel train_domain(const PreparedDomain& domain, std::size_t k,
                         const gbdt::GbdtConfig& config, int num_workers) {
  auto full = gbdt::train(domain.train, domain.valid, config, num_workers);
  auto model = fit_selected(domain, gbdt::feature_importance(full.ensemble), k, config, num_workers);
  model.full_log = std::move(full.log);
  return model;
}

}  // namespace malfuse::pipeline
