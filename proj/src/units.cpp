#include "silvaflux/units.hpp"

#include <cmath>

#include "silvaflux/error.hpp"

namespace silvaflux {

namespace {

void require_positive(double value, const std::string& what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorCode::InvalidInput, what + " must be a finite positive number");
}

}  // namespace

ConversionTable::ConversionTable(double default_carbon_density)
    : default_density_(default_carbon_density) {
  require_positive(default_carbon_density, "default carbon density");
}

void ConversionTable::set_wfe(std::string product, double coefficient) {
  require_positive(coefficient, "wfe coefficient for '" + product + "'");
  wfe_[std::move(product)] = coefficient;
}

void ConversionTable::set_carbon_density(std::string product, double tc_per_m3) {
  require_positive(tc_per_m3, "carbon density for '" + product + "'");
  density_[std::move(product)] = tc_per_m3;
}

bool ConversionTable::has_wfe(std::string_view product) const {
  return wfe_.find(product) != wfe_.end();
}

double ConversionTable::wfe(std::string_view product) const {
  auto it = wfe_.find(product);
  if (it == wfe_.end())
    throw Error(ErrorCode::UnknownProduct,
                "no wfe coefficient for product '" + std::string(product) + "'");
  return it->second;
}

double ConversionTable::carbon_density(std::string_view product) const {
  auto it = density_.find(product);
  return it == density_.end() ? default_density_ : it->second;
}

double to_wfe(double quantity, std::string_view product, const ConversionTable& table) {
  if (quantity < 0.0)
    throw Error(ErrorCode::NegativeQuantity,
                "negative quantity for product '" + std::string(product) + "'");
  return quantity * table.wfe(product);
}

double to_carbon(double volume_m3, std::string_view product, const ConversionTable& table) {
  if (volume_m3 < 0.0)
    throw Error(ErrorCode::NegativeQuantity,
                "negative volume for product '" + std::string(product) + "'");
  return volume_m3 * table.carbon_density(product);
}

}  // namespace silvaflux
