#pragma once

// File formats: CSV tables, the TOML subset used by scenario, pool and
// pipeline files, and loaders/writers for every domain type.

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "silvaflux/carbon.hpp"
#include "silvaflux/reconcile.hpp"
#include "silvaflux/flow_model.hpp"
#include "silvaflux/report.hpp"
#include "silvaflux/scenario.hpp"
#include "silvaflux/units.hpp"

namespace silvaflux::io {

std::string read_file(const std::filesystem::path& path);  // MissingFile

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// CSV

struct CsvRow {
  std::size_t line = 0;  // 1-based line of the record's first character
  std::vector<std::string> fields;
};

class CsvTable {
 public:
  /// RFC 4180 quoting; blank lines and lines starting with '#' are skipped.
  /// The first record is the header.
  static CsvTable parse(std::string_view text, std::string path = {});
  static CsvTable load(const std::filesystem::path& path);

  const std::string& path() const { return path_; }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<CsvRow>& rows() const { return rows_; }

  bool has_column(std::string_view name) const;
  /// Throws ParseError naming the path when `name` is not a column.
  std::size_t column(std::string_view name) const;
  const std::string& field(const CsvRow& row, std::string_view name) const;

  /// Number in a field; ParseError naming path and row otherwise.
  double number(const CsvRow& row, std::string_view name) const;

 private:
  std::string path_;
  std::vector<std::string> header_;
  std::vector<CsvRow> rows_;
};

std::string csv_field(std::string_view text);
std::string csv_line(const std::vector<std::string>& fields);

// TOML subset: tables, arrays of tables, strings, numbers (inf allowed),
// booleans, arrays and inline tables. Parsed into a JSON value.

nlohmann::json parse_toml(std::string_view text, const std::string& path = {});

// Domain loaders. Every error carries the file path and, for row errors,
// the 1-based line.

std::vector<Product> load_products(const std::filesystem::path& path);
std::vector<Node> load_nodes(const std::filesystem::path& path);
std::vector<Flow> load_flows(const std::filesystem::path& path);
FlowGraph load_graph(const std::filesystem::path& products, const std::filesystem::path& nodes,
                     const std::filesystem::path& flows, std::string period = {});

/// Rejects graphs with validate() violations (InvalidInput).
void require_valid(const FlowGraph& graph, const std::string& path);

struct ReportedFlow {
  std::string id;
  FlowKey key;
  double quantity_reported = 0.0;
  std::size_t line = 0;
};
std::vector<ReportedFlow> load_reported_flows(const std::filesystem::path& path);

std::vector<Observation> load_observations(const std::filesystem::path& path);
ConversionTable load_coefficients(const std::filesystem::path& path);
DestinationClasses load_destinations(const std::filesystem::path& path);
std::vector<ReportRowSpec> load_report_rows(const std::filesystem::path& path);
std::vector<DeltaRow> load_report_table(const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(std::string_view text, const std::string& path = {});
PoolParams load_pool_params(const std::filesystem::path& path);
PoolParams parse_pool_params(std::string_view text, const std::string& path = {});

// Writers. Machine-readable numbers use the shortest round-trip form;
// human-facing reports use three decimals.

std::string products_csv(const FlowGraph& graph);
std::string nodes_csv(const FlowGraph& graph);
std::string flows_csv(const FlowGraph& graph);
std::string observations_csv(const std::vector<Observation>& observations);
std::string residuals_csv(const std::vector<ObservationResidual>& residuals);
std::string delta_csv(const DeltaReport& report);
std::string diff_csv(const ScenarioDiff& diff);
std::string ledger_csv(const CarbonLedger& ledger);
std::string ledger_delta_csv(const std::vector<LedgerDelta>& deltas);

FlowGraph parse_graph(std::string_view products, std::string_view nodes, std::string_view flows,
                      std::string period = {});

}  // namespace silvaflux::io
