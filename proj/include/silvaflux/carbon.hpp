#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "silvaflux/error.hpp"
#include "silvaflux/flow_model.hpp"
#include "silvaflux/units.hpp"

namespace silvaflux {

/// One value per ProductCategory, indexed by the enum's underlying value.
template <typename Scalar>
using CategoryArray = Eigen::Array<Scalar, static_cast<int>(kCategoryCount), 1>;

inline Eigen::Index category_index(ProductCategory c) { return static_cast<Eigen::Index>(c); }

/// Pool parameters of the harvested-wood-products ledger. Defaults are
/// illustrative, not calibrated: sawnwood 35 yr, panels 25 yr, paper/pulp
/// 2 yr, everything else 2 yr.
struct PoolParams {
  std::array<double, kCategoryCount> half_life{};  // years, may be +inf
  double swds_fraction = 0.5;                      // share of retired carbon landfilled
  double swds_half_life = 20.0;                    // years, may be +inf
  double recycling_rate = 0.0;                     // share of retired panels and pulp back in use, [0, 1)

  static PoolParams defaults();
  /// Same as defaults() with a 14-year panel service life.
  static PoolParams panel_service_life_preset();

  double& half_life_of(ProductCategory c) { return half_life[static_cast<std::size_t>(c)]; }
  double half_life_of(ProductCategory c) const { return half_life[static_cast<std::size_t>(c)]; }

  // Throws InvalidInput.
  void validate() const;
};

/// Categories whose retired carbon can be recycled into use.
inline bool recyclable(ProductCategory c) { return c == ProductCategory::Panel || c == ProductCategory::Pulp; }

/// Fraction of a stock kept over one year under first-order decay.
inline double annual_retention(double half_life) {
  return std::isinf(half_life) ? 1.0 : std::exp2(-1.0 / half_life);
}

template <typename Scalar>
struct CarbonStocks {
  CategoryArray<Scalar> hwp_in_use = CategoryArray<Scalar>::Zero();
  CategoryArray<Scalar> swds = CategoryArray<Scalar>::Zero();
};

/// Carbon reaching terminal destinations in one year, per category (tC).
template <typename Scalar>
struct AnnualInflows {
  CategoryArray<Scalar> to_products = CategoryArray<Scalar>::Zero();
  CategoryArray<Scalar> to_energy = CategoryArray<Scalar>::Zero();
  CategoryArray<Scalar> to_export = CategoryArray<Scalar>::Zero();

  CategoryArray<Scalar> total() const { return to_products + to_energy + to_export; }
};

template <typename Scalar>
struct CarbonFluxes {
  CategoryArray<Scalar> inflow_from_harvest = CategoryArray<Scalar>::Zero();
  CategoryArray<Scalar> emitted_energy = CategoryArray<Scalar>::Zero();
  CategoryArray<Scalar> emitted_decay = CategoryArray<Scalar>::Zero();
  CategoryArray<Scalar> exported = CategoryArray<Scalar>::Zero();
};

template <typename Scalar>
struct StepResult {
  CarbonStocks<Scalar> stocks;
  CarbonFluxes<Scalar> fluxes;
};

/// One year of the ledger. Retired in-use carbon is split into recycled
/// (back in use), landfilled (SWDS) and emitted; SWDS decays with its own
/// half-life; energy inflows burn the same year; exports leave the ledger.
/// New product inflows enter the in-use pool at year end.
template <typename Scalar>
StepResult<Scalar> annual_step(const CarbonStocks<Scalar>& stocks, const AnnualInflows<Scalar>& inputs,
                               const PoolParams& params) {
  if ((stocks.hwp_in_use < 0).any() || (stocks.swds < 0).any() || (inputs.to_products < 0).any() ||
      (inputs.to_energy < 0).any() || (inputs.to_export < 0).any())
    throw Error(ErrorCode::NegativeStock, "carbon stocks and inflows must be nonnegative");

  CategoryArray<Scalar> retention, recycling;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    retention(i) = static_cast<Scalar>(annual_retention(params.half_life[c]));
    recycling(i) = recyclable(static_cast<ProductCategory>(c)) ? static_cast<Scalar>(params.recycling_rate) : Scalar(0);
  }
  const auto swds_retention = static_cast<Scalar>(annual_retention(params.swds_half_life));
  const auto landfill = static_cast<Scalar>(params.swds_fraction);

  const CategoryArray<Scalar> retired = stocks.hwp_in_use * (1 - retention);
  const CategoryArray<Scalar> recycled = retired * recycling;
  const CategoryArray<Scalar> discarded = retired - recycled;
  const CategoryArray<Scalar> to_swds = discarded * landfill;
  const CategoryArray<Scalar> swds_decay = stocks.swds * (1 - swds_retention);

  StepResult<Scalar> out;
  out.stocks.hwp_in_use = stocks.hwp_in_use - retired + recycled + inputs.to_products;
  out.stocks.swds = stocks.swds - swds_decay + to_swds;
  out.fluxes.inflow_from_harvest = inputs.total();
  out.fluxes.emitted_energy = inputs.to_energy;
  out.fluxes.emitted_decay = (discarded - to_swds) + swds_decay;
  out.fluxes.exported = inputs.to_export;
  return out;
}

struct LedgerYear {
  int year = 0;
  CarbonStocks<double> stocks;  // end of year
  CarbonFluxes<double> fluxes;
};

struct CarbonLedger {
  std::vector<LedgerYear> years;
};

/// Folds annual_step over `years` years of constant inflows.
CarbonLedger simulate(const CarbonStocks<double>& initial, const AnnualInflows<double>& inflows,
                      const PoolParams& params, int first_year, int years);

/// Annual carbon inflows implied by the flows reaching sink and export nodes.
/// Export nodes are export-classed unless listed; sinks must be listed.
AnnualInflows<double> ledger_from_graph(const FlowGraph& graph, const ConversionTable& table,
                                        const DestinationClasses& classes);

struct LedgerDelta {
  int year = 0;
  double hwp_in_use = 0.0;
  double swds = 0.0;
  double inflow_from_harvest = 0.0;
  double emitted_energy = 0.0;
  double emitted_decay = 0.0;
  double exported = 0.0;
};

/// Per-year totals of `b` minus `a`; throws YearMismatch.
std::vector<LedgerDelta> compare_ledgers(const CarbonLedger& a, const CarbonLedger& b);

}  // namespace silvaflux
