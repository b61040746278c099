#include "silvaflux/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

#include "silvaflux/carbon.hpp"
#include "silvaflux/io.hpp"
#include "silvaflux/reconcile.hpp"
#include "silvaflux/report.hpp"
#include "silvaflux/scenario.hpp"
#include "silvaflux/text.hpp"

namespace silvaflux {

namespace fs = std::filesystem;
using nlohmann::json;

bool PipelineConfig::has_input(std::string_view name) const { return inputs.find(name) != inputs.end(); }

const fs::path& PipelineConfig::input(std::string_view name) const {
  auto it = inputs.find(name);
  if (it == inputs.end())
    throw Error(ErrorCode::InvalidInput, "config has no inputs." + std::string(name), source.string());
  return it->second;
}

PipelineConfig load_config(const fs::path& path) {
  const auto text = io::read_file(path);
  const json doc = io::parse_toml(text, path.string());
  const fs::path base = path.parent_path();
  auto fail = [&](const std::string& message) { throw Error(ErrorCode::ParseError, message, path.string()); };
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  PipelineConfig config;
  config.source = path;
  config.out_dir = base / "out";
  for (const auto& [key, value] : doc.items())
    if (key != "inputs" && key != "output" && key != "options") fail("unknown table '" + key + "'");

  if (doc.contains("inputs")) {
    static const std::set<std::string, std::less<>> known = {
        "products",    "nodes",      "flows",       "reported_flows", "observations", "coefficients",
        "scenario",    "pool_params", "destinations", "report_rows",   "reference",    "report_table"};
    for (const auto& [key, value] : doc.at("inputs").items()) {
      if (!known.count(key)) fail("unknown input '" + key + "'");
      if (!value.is_string()) fail("inputs." + key + " must be a path string");
      config.inputs.emplace(key, resolve(value.get<std::string>()));
    }
  }
  if (doc.contains("output")) {
    for (const auto& [key, value] : doc.at("output").items()) {
      if (key != "dir" || !value.is_string()) fail("[output] takes dir = \"path\"");
      config.out_dir = resolve(value.get<std::string>());
    }
  }
  if (doc.contains("options")) {
    for (const auto& [key, value] : doc.at("options").items()) {
      auto number = [&]() {
        if (!value.is_number()) fail("options." + key + " must be a number");
        return value.get<double>();
      };
      auto text_value = [&]() {
        if (!value.is_string()) fail("options." + key + " must be a string");
        return value.get<std::string>();
      };
      if (key == "default_sigma_rel")
        config.default_sigma_rel = number();
      else if (key == "tol_rel")
        config.tolerance.rel = number();
      else if (key == "tol_abs")
        config.tolerance.abs = number();
      else if (key == "scale")
        config.scale = number();
      else if (key == "start_year")
        config.start_year = static_cast<int>(number());
      else if (key == "years")
        config.years = static_cast<int>(number());
      else if (key == "period")
        config.period = text_value();
      else if (key == "title")
        config.title = text_value();
      else if (key == "highlight_color")
        config.highlight_color = text_value();
      else
        fail("unknown option '" + key + "'");
    }
  }
  if (!(config.default_sigma_rel > 0.0)) fail("options.default_sigma_rel must be positive");
  if (!(config.tolerance.rel >= 0.0) || !(config.tolerance.abs >= 0.0)) fail("tolerances must be nonnegative");
  if (!(config.scale > 0.0)) fail("options.scale must be positive");
  if (config.years < 1) fail("options.years must be at least 1");
  return config;
}

namespace {

FlowGraph load_baseline(const PipelineConfig& c) {
  return io::load_graph(c.input("products"), c.input("nodes"), c.input("flows"), c.period);
}

ConversionTable load_table(const PipelineConfig& c) {
  return c.has_input("coefficients") ? io::load_coefficients(c.input("coefficients")) : ConversionTable{};
}

PoolParams load_pools(const PipelineConfig& c) {
  return c.has_input("pool_params") ? io::load_pool_params(c.input("pool_params")) : PoolParams::defaults();
}

SankeyOptions sankey_options(const PipelineConfig& c, std::string subtitle) {
  SankeyOptions o;
  o.scale = c.scale;
  o.title = c.title;
  o.subtitle = std::move(subtitle);
  o.highlight_color = c.highlight_color;
  return o;
}

// Collects outputs and writes them once everything has been computed.
struct Outputs {
  fs::path dir;
  std::vector<std::pair<fs::path, std::string>> files;

  void add(const std::string& name, std::string content) { files.emplace_back(dir / name, std::move(content)); }

  CommandResult commit(std::vector<std::string> summary) {
    CommandResult result;
    for (auto& [path, content] : files) {
      io::write_file_atomic(path, content);
      result.written.push_back(path);
    }
    result.summary = std::move(summary);
    return result;
  }
};

std::string line(const std::string& name, double value) { return name + " " + format_fixed(value); }
std::string count(const std::string& name, std::size_t n) { return name + " " + std::to_string(n); }

}  // namespace

CommandResult cmd_convert(const PipelineConfig& config) {
  auto products = io::load_products(config.input("products"));
  auto nodes = io::load_nodes(config.input("nodes"));
  const auto reported = io::load_reported_flows(config.input("reported_flows"));
  const auto table = io::load_coefficients(config.input("coefficients"));

  FlowGraph g;
  g.products = std::move(products);
  g.nodes = std::move(nodes);
  g.period = config.period;
  const std::string path = config.input("reported_flows").string();
  for (const auto& r : reported) {
    try {
      g.flows.push_back({r.id, r.key, to_wfe(r.quantity_reported, r.key.product, table)});
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), path, r.line);
    }
  }
  g = merge_parallel_flows(std::move(g));
  io::require_valid(g, path);

  double worst = 0.0;
  for (const auto& [node, r] : balance_residuals(g)) worst = std::max(worst, std::abs(r));

  Outputs out{config.out_dir, {}};
  out.add("converted.products.csv", io::products_csv(g));
  out.add("converted.nodes.csv", io::nodes_csv(g));
  out.add("converted.flows.csv", io::flows_csv(g));
  return out.commit({count("flows", g.flows.size()), line("max_balance_residual_m3", worst)});
}

CommandResult cmd_reconcile(const PipelineConfig& config) {
  const auto templ = load_baseline(config);
  const auto observations = io::load_observations(config.input("observations"));

  ReconcileProblem problem{templ, observations, {}};
  problem.options.default_sigma_rel = config.default_sigma_rel;
  problem.options.tolerance = config.tolerance;
  const auto result = reconcile(problem);

  auto docs = emit_sankey(result.graph, {}, sankey_options(config, "Model estimate: reconciled flows"));
  std::string under = "flow\n";
  for (const auto& key : result.underdetermined) under += io::csv_line({to_string(key)});

  Outputs out{config.out_dir, {}};
  out.add("reconciled.flows.csv", io::flows_csv(result.graph));
  out.add("reconciled.nodes.csv", io::nodes_csv(result.graph));
  out.add("reconciled.products.csv", io::products_csv(result.graph));
  out.add("reconciled.residuals.csv", io::residuals_csv(result.residuals));
  out.add("reconciled.underdetermined.csv", under);
  out.add("reconciled.svg", std::move(docs.svg));
  out.add("reconciled.sankey.json", std::move(docs.json));
  return out.commit({line("objective", result.objective),
                     count("underdetermined_flows", result.underdetermined.size())});
}

CommandResult cmd_scenario(const PipelineConfig& config) {
  const auto baseline = load_baseline(config);
  const auto scenario = io::load_scenario(config.input("scenario"));
  const auto table = load_table(config);
  const auto classes = io::load_destinations(config.input("destinations"));
  const auto pools = load_pools(config);

  const auto outcome = apply(baseline, scenario, table, classes, config.tolerance);
  const auto all_classes = scenario_classes(scenario, classes);

  std::map<FlowKey, FlowRole> highlights;
  for (const auto& [key, d] : outcome.diff.flow_deltas)
    if (!config.tolerance.within(d, 0.0)) highlights[key] = FlowRole::Highlighted;
  auto docs = emit_sankey(outcome.graph, highlights,
                          sankey_options(config, scenario.name.empty() ? "Scenario" : "Scenario: " + scenario.name));

  const auto before = simulate({}, ledger_from_graph(baseline, table, classes), pools, config.start_year, config.years);
  const auto after =
      simulate({}, ledger_from_graph(outcome.graph, table, all_classes), pools, config.start_year, config.years);

  Outputs out{config.out_dir, {}};
  out.add("scenario.flows.csv", io::flows_csv(outcome.graph));
  out.add("scenario.nodes.csv", io::nodes_csv(outcome.graph));
  out.add("scenario.products.csv", io::products_csv(outcome.graph));
  out.add("scenario.diff.csv", io::diff_csv(outcome.diff));
  out.add("scenario.svg", std::move(docs.svg));
  out.add("scenario.sankey.json", std::move(docs.json));
  out.add("scenario.ledger_delta.csv", io::ledger_delta_csv(compare_ledgers(before, after)));
  return out.commit({line("rerouted_volume_m3", outcome.diff.rerouted_volume),
                     line("carbon_burned_delta_tC", outcome.diff.carbon.burned),
                     line("carbon_stored_delta_tC", outcome.diff.carbon.stored_in_products),
                     line("carbon_exported_delta_tC", outcome.diff.carbon.exported)});
}

CommandResult cmd_report(const PipelineConfig& config) {
  Outputs out{config.out_dir, {}};
  DeltaReport report;
  if (config.has_input("report_table")) {
    report = build_delta_report(io::load_report_table(config.input("report_table")));
  } else {
    const auto graph = load_baseline(config);
    const auto rows = io::load_report_rows(config.input("report_rows"));
    const auto reference = io::load_observations(config.input("reference"));
    report = build_delta_report(graph, rows, reference);
    auto docs = emit_sankey(graph, {}, sankey_options(config, "Baseline"));
    out.add("baseline.svg", std::move(docs.svg));
    out.add("baseline.sankey.json", std::move(docs.json));
  }
  out.files.insert(out.files.begin(), {config.out_dir / "report.delta.csv", io::delta_csv(report)});
  std::size_t available = 0;
  for (const auto& r : report.rows) available += r.available();
  return out.commit({count("rows", report.rows.size()),
                     count("rows_with_reference", available)});
}

CommandResult cmd_carbon(const PipelineConfig& config) {
  const auto graph = load_baseline(config);
  const auto table = load_table(config);
  const auto classes = io::load_destinations(config.input("destinations"));
  const auto pools = load_pools(config);

  const auto inflows = ledger_from_graph(graph, table, classes);
  const auto ledger = simulate({}, inflows, pools, config.start_year, config.years);

  Outputs out{config.out_dir, {}};
  out.add("carbon.ledger.csv", io::ledger_csv(ledger));
  const auto& last = ledger.years.back();
  return out.commit({line("annual_inflow_tC", inflows.total().sum()),
                     line("annual_emitted_energy_tC", inflows.to_energy.sum()),
                     line("annual_exported_tC", inflows.to_export.sum()),
                     line("final_hwp_in_use_tC", last.stocks.hwp_in_use.sum()),
                     line("final_swds_tC", last.stocks.swds.sum())});
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Infeasible:
    case ErrorCode::NotConverged: return 3;
    case ErrorCode::RerouteExceedsFlow:
    case ErrorCode::UnknownEndpoint:
    case ErrorCode::CapExceeded:
    case ErrorCode::UnbalancedEdit: return 4;
    default: return 2;
  }
}

std::string error_json(const Error& error) {
  json j;
  j["error"] = std::string(to_string(error.code()));
  j["message"] = error.what();
  j["path"] = error.path().empty() ? json(nullptr) : json(error.path());
  j["row"] = error.row() == 0 ? json(nullptr) : json(error.row());
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace silvaflux
