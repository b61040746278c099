#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "silvaflux/flow_model.hpp"
#include "silvaflux/units.hpp"

namespace silvaflux {

// Edits

/// Moves `amount` (or `fraction` of the current flow) of `product` from the
/// from_node -> old_to flow onto from_node -> new_to.
struct Reroute {
  std::string name;
  std::string product;
  std::string from_node;
  std::string old_to;
  std::string new_to;
  std::optional<double> amount;
  std::optional<double> fraction;  // (0, 1]
};

struct InboundSupply {
  std::string from_node;
  std::string product;
  double amount = 0.0;
  // Take the supply out of the from_node -> divert_from flow. Without it the
  // supply is new output of from_node and its other outputs shrink to match.
  std::optional<std::string> divert_from;
};

struct InsertActor {
  std::string name;
  Node node;
  std::vector<InboundSupply> inbound;
  std::optional<DestinationClass> destination;  // for carbon accounting
};

/// Caps the extractive mass (inbound volume of `product` x yield) a node may
/// receive. Checked when applied and after every later edit.
struct CapByDeposit {
  std::string name;
  std::string node;
  std::string product;
  double cap_mass = 0.0;           // tonnes
  double yield_coefficient = 0.0;  // tonnes per m3 WFE
};

struct Scale {
  std::string name;
  FlowKey flow;
  double factor = 1.0;
};

using Edit = std::variant<Reroute, InsertActor, CapByDeposit, Scale>;

std::string_view edit_name(const Edit& edit);

/// Restricts which outbound products of `node` absorb a change of its
/// inbound volume during rebalancing.
struct AbsorbRule {
  std::string node;
  std::vector<std::string> products;
};

struct Scenario {
  std::string name;
  std::vector<Edit> edits;
  std::vector<AbsorbRule> absorb;
};

struct CarbonDelta {
  double burned = 0.0;              // tC / yr
  double stored_in_products = 0.0;  // tC / yr
  double exported = 0.0;            // tC / yr
};

struct ScenarioDiff {
  std::map<FlowKey, double> flow_deltas;          // every key of either graph
  std::map<std::string, double> throughput_deltas;  // max(in, out) per node
  CarbonDelta carbon;
  double rerouted_volume = 0.0;  // volume moved by Reroute / InsertActor edits

  ScenarioDiff& operator+=(const ScenarioDiff& other);
};

/// Flow, throughput and carbon deltas from `before` to `after`. Carbon is
/// counted on flows into sink and export nodes only.
ScenarioDiff diff_graphs(const FlowGraph& before, const FlowGraph& after,
                         const ConversionTable& table, const DestinationClasses& classes);

/// `base` plus the destination classes of actors the scenario inserts.
DestinationClasses scenario_classes(const Scenario& scenario, const DestinationClasses& base);

struct ScenarioOutcome {
  FlowGraph graph;
  ScenarioDiff diff;
};

/// Applies the edits in order against the evolving graph. After each edit,
/// transformer imbalances are pushed proportionally onto outbound flows (or
/// pulled from inbound flows when a node has no free outlet), visiting nodes
/// in longest-path order; each flow is adjusted at most once per edit.
ScenarioOutcome apply(const FlowGraph& baseline, const Scenario& scenario, const ConversionTable& table,
                      const DestinationClasses& classes = {}, BalanceTolerance tol = {});

/// Current quantity of the from_node -> old_to flow of `product`; zero when
/// the two nodes are connected by other products only.
double max_reroutable(const FlowGraph& graph, std::string_view product, std::string_view from_node,
                      std::string_view old_to);

}  // namespace silvaflux
