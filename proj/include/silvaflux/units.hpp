#pragma once

#include <map>
#include <string>
#include <string_view>

namespace silvaflux {

/// Product conversion coefficients: reported unit -> m3 wood-fibre
/// equivalent, and m3 WFE -> tonnes of carbon.
class ConversionTable {
 public:
  static constexpr double kDefaultCarbonDensity = 0.25;  // tC per m3 WFE

  ConversionTable() = default;
  explicit ConversionTable(double default_carbon_density);

  void set_wfe(std::string product, double coefficient);
  void set_carbon_density(std::string product, double tc_per_m3);

  bool has_wfe(std::string_view product) const;
  double wfe(std::string_view product) const;
  double carbon_density(std::string_view product) const;
  double default_carbon_density() const { return default_density_; }

  const std::map<std::string, double, std::less<>>& wfe_coefficients() const { return wfe_; }
  const std::map<std::string, double, std::less<>>& carbon_densities() const { return density_; }

 private:
  std::map<std::string, double, std::less<>> wfe_;
  std::map<std::string, double, std::less<>> density_;
  double default_density_ = kDefaultCarbonDensity;
};

// Throws UnknownProduct / NegativeQuantity.
double to_wfe(double quantity, std::string_view product, const ConversionTable& table);

// Falls back to the table's default density for products without one.
double to_carbon(double volume_m3, std::string_view product, const ConversionTable& table);

}  // namespace silvaflux
