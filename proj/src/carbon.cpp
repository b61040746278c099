#include "silvaflux/carbon.hpp"

#include <string>

namespace silvaflux {

PoolParams PoolParams::defaults() {
  PoolParams p;
  p.half_life.fill(2.0);
  p.half_life_of(ProductCategory::SawnwoodSoftwood) = 35.0;
  p.half_life_of(ProductCategory::SawnwoodHardwood) = 35.0;
  p.half_life_of(ProductCategory::Panel) = 25.0;
  p.half_life_of(ProductCategory::Pulp) = 2.0;
  return p;
}

PoolParams PoolParams::panel_service_life_preset() {
  PoolParams p = defaults();
  p.half_life_of(ProductCategory::Panel) = 14.0;
  return p;
}

void PoolParams::validate() const {
  for (std::size_t c = 0; c < kCategoryCount; ++c)
    if (!(half_life[c] > 0.0))
      throw Error(ErrorCode::InvalidInput, "half-life of category '" +
                                               std::string(to_string(static_cast<ProductCategory>(c))) +
                                               "' must be positive");
  if (!(swds_half_life > 0.0)) throw Error(ErrorCode::InvalidInput, "swds half-life must be positive");
  if (!(swds_fraction >= 0.0 && swds_fraction <= 1.0))
    throw Error(ErrorCode::InvalidInput, "swds_fraction must lie in [0, 1]");
  if (!(recycling_rate >= 0.0 && recycling_rate < 1.0))
    throw Error(ErrorCode::InvalidInput, "recycling_rate must lie in [0, 1)");
}

CarbonLedger simulate(const CarbonStocks<double>& initial, const AnnualInflows<double>& inflows,
                      const PoolParams& params, int first_year, int years) {
  params.validate();
  CarbonLedger ledger;
  CarbonStocks<double> stocks = initial;
  for (int k = 0; k < years; ++k) {
    auto step = annual_step(stocks, inflows, params);
    stocks = step.stocks;
    ledger.years.push_back({first_year + k, step.stocks, step.fluxes});
  }
  return ledger;
}

AnnualInflows<double> ledger_from_graph(const FlowGraph& graph, const ConversionTable& table,
                                        const DestinationClasses& classes) {
  AnnualInflows<double> out;
  for (const auto& flow : graph.flows) {
    const Node* to = graph.find_node(flow.key.to);
    if (!to || (to->kind != NodeKind::Sink && to->kind != NodeKind::Export)) continue;
    DestinationClass cls = DestinationClass::Export;
    if (auto it = classes.find(to->id); it != classes.end())
      cls = it->second;
    else if (to->kind == NodeKind::Sink)
      throw Error(ErrorCode::UnclassifiedNode, "terminal node '" + to->id + "' has no destination class");

    ProductCategory category = ProductCategory::Other;
    if (const Product* p = graph.find_product(flow.key.product))
      category = p->category;
    else if (!graph.products.empty())
      throw Error(ErrorCode::UnknownProduct, "flow references unknown product '" + flow.key.product + "'");

    const double carbon = to_carbon(flow.quantity, flow.key.product, table);
    const auto idx = category_index(category);
    switch (cls) {
      case DestinationClass::Energy: out.to_energy(idx) += carbon; break;
      case DestinationClass::Product: out.to_products(idx) += carbon; break;
      case DestinationClass::Export: out.to_export(idx) += carbon; break;
    }
  }
  return out;
}

std::vector<LedgerDelta> compare_ledgers(const CarbonLedger& a, const CarbonLedger& b) {
  if (a.years.size() != b.years.size())
    throw Error(ErrorCode::YearMismatch, "ledgers cover different numbers of years");
  std::vector<LedgerDelta> out;
  for (std::size_t k = 0; k < a.years.size(); ++k) {
    const auto& x = a.years[k];
    const auto& y = b.years[k];
    if (x.year != y.year)
      throw Error(ErrorCode::YearMismatch,
                  "ledger years differ: " + std::to_string(x.year) + " vs " + std::to_string(y.year));
    out.push_back({x.year, y.stocks.hwp_in_use.sum() - x.stocks.hwp_in_use.sum(),
                   y.stocks.swds.sum() - x.stocks.swds.sum(),
                   y.fluxes.inflow_from_harvest.sum() - x.fluxes.inflow_from_harvest.sum(),
                   y.fluxes.emitted_energy.sum() - x.fluxes.emitted_energy.sum(),
                   y.fluxes.emitted_decay.sum() - x.fluxes.emitted_decay.sum(),
                   y.fluxes.exported.sum() - x.fluxes.exported.sum()});
  }
  return out;
}

}  // namespace silvaflux
