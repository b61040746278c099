#include "silvaflux/flow_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <utility>

#include "silvaflux/error.hpp"

namespace silvaflux {

namespace {

constexpr std::array<std::pair<ProductCategory, std::string_view>, kCategoryCount> kCategoryNames{{
    {ProductCategory::Roundwood, "roundwood"},
    {ProductCategory::Fuelwood, "fuelwood"},
    {ProductCategory::ForestChips, "forest_chips"},
    {ProductCategory::IndustrialChips, "industrial_chips"},
    {ProductCategory::Sawdust, "sawdust"},
    {ProductCategory::Bark, "bark"},
    {ProductCategory::SawnwoodSoftwood, "sawnwood_softwood"},
    {ProductCategory::SawnwoodHardwood, "sawnwood_hardwood"},
    {ProductCategory::Panel, "panel"},
    {ProductCategory::Pulp, "pulp"},
    {ProductCategory::Extractives, "extractives"},
    {ProductCategory::Other, "other"},
}};

constexpr std::array<std::pair<NodeKind, std::string_view>, 5> kKindNames{{
    {NodeKind::Source, "source"},
    {NodeKind::Transformer, "transformer"},
    {NodeKind::Sink, "sink"},
    {NodeKind::Export, "export"},
    {NodeKind::Import, "import"},
}};

bool matches(const NodeTotalKey& key, const Flow& flow) {
  const auto& endpoint = key.direction == Direction::In ? flow.key.to : flow.key.from;
  if (endpoint != key.node) return false;
  if (key.products.empty()) return true;
  return std::find(key.products.begin(), key.products.end(), flow.key.product) !=
         key.products.end();
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnknownProduct: return "UnknownProduct";
    case ErrorCode::NegativeQuantity: return "NegativeQuantity";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::UnbalancedInputs: return "UnbalancedInputs";
    case ErrorCode::RerouteExceedsFlow: return "RerouteExceedsFlow";
    case ErrorCode::UnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::UnbalancedEdit: return "UnbalancedEdit";
    case ErrorCode::NegativeStock: return "NegativeStock";
    case ErrorCode::UnclassifiedNode: return "UnclassifiedNode";
    case ErrorCode::YearMismatch: return "YearMismatch";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
  }
  return "Unknown";
}

std::string_view to_string(ProductCategory category) {
  for (const auto& [value, name] : kCategoryNames)
    if (value == category) return name;
  return "other";
}

std::optional<ProductCategory> parse_category(std::string_view text) {
  for (const auto& [value, name] : kCategoryNames)
    if (name == text) return value;
  return std::nullopt;
}

std::string_view to_string(NodeKind kind) {
  for (const auto& [value, name] : kKindNames)
    if (value == kind) return name;
  return "transformer";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  for (const auto& [value, name] : kKindNames)
    if (name == text) return value;
  return std::nullopt;
}

std::string to_string(const FlowKey& key) {
  return key.from + "->" + key.to + ":" + key.product;
}

std::optional<FlowKey> parse_flow_key(std::string_view text) {
  const auto arrow = text.find("->");
  if (arrow == std::string_view::npos) return std::nullopt;
  const auto colon = text.find(':', arrow + 2);
  if (colon == std::string_view::npos) return std::nullopt;
  FlowKey key{std::string(text.substr(0, arrow)),
              std::string(text.substr(arrow + 2, colon - arrow - 2)),
              std::string(text.substr(colon + 1))};
  if (key.from.empty() || key.to.empty() || key.product.empty()) return std::nullopt;
  return key;
}

bool BalanceTolerance::within(double residual, double scale) const {
  return std::abs(residual) <= abs + rel * std::abs(scale);
}

const Node* FlowGraph::find_node(std::string_view id) const {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const Node& n) { return n.id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

const Product* FlowGraph::find_product(std::string_view id) const {
  auto it = std::find_if(products.begin(), products.end(),
                         [&](const Product& p) { return p.id == id; });
  return it == products.end() ? nullptr : &*it;
}

const Flow* FlowGraph::find_flow(const FlowKey& key) const {
  auto it = std::find_if(flows.begin(), flows.end(), [&](const Flow& f) { return f.key == key; });
  return it == flows.end() ? nullptr : &*it;
}

Flow* FlowGraph::find_flow(const FlowKey& key) {
  auto it = std::find_if(flows.begin(), flows.end(), [&](const Flow& f) { return f.key == key; });
  return it == flows.end() ? nullptr : &*it;
}

double FlowGraph::inflow(std::string_view node) const {
  double total = 0.0;
  for (const auto& f : flows)
    if (f.key.to == node) total += f.quantity;
  return total;
}

double FlowGraph::outflow(std::string_view node) const {
  double total = 0.0;
  for (const auto& f : flows)
    if (f.key.from == node) total += f.quantity;
  return total;
}

FlowGraph merge_parallel_flows(FlowGraph graph) {
  std::map<FlowKey, Flow> merged;
  for (auto& flow : graph.flows) {
    auto [it, inserted] = merged.try_emplace(flow.key, flow);
    if (!inserted) it->second.quantity += flow.quantity;
  }
  graph.flows.clear();
  for (auto& [key, flow] : merged) graph.flows.push_back(std::move(flow));
  return graph;
}

FlowGraph canonicalized(FlowGraph graph) {
  std::sort(graph.flows.begin(), graph.flows.end(),
            [](const Flow& a, const Flow& b) { return a.key < b.key; });
  std::sort(graph.nodes.begin(), graph.nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  std::sort(graph.products.begin(), graph.products.end(),
            [](const Product& a, const Product& b) { return a.id < b.id; });
  return graph;
}

std::map<std::string, double> balance_residuals(const FlowGraph& graph) {
  std::map<std::string, double> residuals;
  for (const auto& node : graph.nodes)
    if (node.kind == NodeKind::Transformer) residuals[node.id] = 0.0;
  for (const auto& flow : graph.flows) {
    if (auto it = residuals.find(flow.key.to); it != residuals.end()) it->second += flow.quantity;
    if (auto it = residuals.find(flow.key.from); it != residuals.end()) it->second -= flow.quantity;
  }
  return residuals;
}

bool is_balanced(const FlowGraph& graph, BalanceTolerance tol) {
  const auto residuals = balance_residuals(graph);
  for (const auto& [node, residual] : residuals)
    if (!tol.within(residual, graph.inflow(node))) return false;
  return true;
}

bool structurally_equal(const FlowGraph& a, const FlowGraph& b) {
  return canonicalized(a) == canonicalized(b);
}

std::map<std::string, int> longest_path_ranks(const FlowGraph& graph) {
  std::map<std::string, std::vector<std::string>> successors;
  std::map<std::string, int> indegree;
  for (const auto& node : graph.nodes) {
    successors[node.id];
    indegree[node.id] = 0;
  }
  std::vector<FlowKey> keys;
  for (const auto& flow : graph.flows) keys.push_back(flow.key);
  std::sort(keys.begin(), keys.end());
  for (const auto& key : keys) {
    if (!successors.count(key.from) || !successors.count(key.to)) continue;
    auto& next = successors[key.from];
    if (std::find(next.begin(), next.end(), key.to) == next.end()) next.push_back(key.to);
  }

  // Drop back edges found by an iterative DFS from every unvisited node.
  enum class Mark { None, Active, Done };
  std::map<std::string, Mark> mark;
  std::set<std::pair<std::string, std::string>> back_edges;
  for (const auto& [root, unused] : successors) {
    if (mark[root] != Mark::None) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
    mark[root] = Mark::Active;
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const auto& succ = successors[id];
      if (next == succ.size()) {
        mark[id] = Mark::Done;
        stack.pop_back();
        continue;
      }
      const std::string child = succ[next++];
      if (mark[child] == Mark::Active) {
        back_edges.insert({id, child});
      } else if (mark[child] == Mark::None) {
        mark[child] = Mark::Active;
        stack.emplace_back(child, 0);
      }
    }
  }

  for (const auto& [from, succ] : successors)
    for (const auto& to : succ)
      if (!back_edges.count({from, to})) indegree[to]++;
  std::map<std::string, int> rank;
  std::set<std::string> ready;
  for (const auto& [id, deg] : indegree) {
    rank[id] = 0;
    if (deg == 0) ready.insert(id);
  }
  while (!ready.empty()) {
    const std::string id = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& to : successors[id]) {
      if (back_edges.count({id, to})) continue;
      rank[to] = std::max(rank[to], rank[id] + 1);
      if (--indegree[to] == 0) ready.insert(to);
    }
  }
  return rank;
}

std::vector<Violation> validate(const FlowGraph& graph) {
  std::vector<Violation> out;
  std::set<std::string> node_ids;
  for (const auto& node : graph.nodes) {
    if (!node_ids.insert(node.id).second)
      out.push_back({node.id, "duplicate_node", "node id '" + node.id + "' appears more than once"});
  }
  std::set<std::string> product_ids;
  for (const auto& product : graph.products) {
    if (!product_ids.insert(product.id).second)
      out.push_back({product.id, "duplicate_product",
                     "product id '" + product.id + "' appears more than once"});
  }

  std::set<FlowKey> keys;
  for (const auto& flow : graph.flows) {
    const auto name = flow.id.empty() ? to_string(flow.key) : flow.id;
    if (!(flow.quantity >= 0.0))
      out.push_back({name, "negative_quantity", "flow '" + name + "' has negative quantity"});
    if (flow.key.from == flow.key.to)
      out.push_back({name, "self_loop", "flow '" + name + "' starts and ends at the same node"});
    if (!keys.insert(flow.key).second)
      out.push_back({name, "duplicate_flow_key",
                     "flow key " + to_string(flow.key) + " appears more than once"});
    if (!graph.products.empty() && !product_ids.count(flow.key.product))
      out.push_back({name, "unknown_product",
                     "flow '" + name + "' references unknown product '" + flow.key.product + "'"});

    const Node* from = graph.find_node(flow.key.from);
    const Node* to = graph.find_node(flow.key.to);
    if (!from)
      out.push_back({name, "dangling_endpoint",
                     "flow '" + name + "' starts at unknown node '" + flow.key.from + "'"});
    if (!to)
      out.push_back({name, "dangling_endpoint",
                     "flow '" + name + "' ends at unknown node '" + flow.key.to + "'"});
    if (to && (to->kind == NodeKind::Source || to->kind == NodeKind::Import))
      out.push_back({to->id, "node_kind_inbound",
                     std::string(to_string(to->kind)) + " node '" + to->id +
                         "' cannot receive flow '" + name + "'"});
    if (from && (from->kind == NodeKind::Sink || from->kind == NodeKind::Export))
      out.push_back({from->id, "node_kind_outbound",
                     std::string(to_string(from->kind)) + " node '" + from->id +
                         "' cannot emit flow '" + name + "'"});
  }
  return out;
}

std::string_view to_string(DestinationClass cls) {
  switch (cls) {
    case DestinationClass::Energy: return "energy";
    case DestinationClass::Product: return "product";
    case DestinationClass::Export: return "export";
  }
  return "product";
}

std::optional<DestinationClass> parse_destination_class(std::string_view text) {
  if (text == "energy") return DestinationClass::Energy;
  if (text == "product") return DestinationClass::Product;
  if (text == "export") return DestinationClass::Export;
  return std::nullopt;
}

DestinationClass destination_class(const FlowGraph& graph, std::string_view node,
                                   const DestinationClasses& classes) {
  if (auto it = classes.find(node); it != classes.end()) return it->second;
  if (const Node* n = graph.find_node(node); n && n->kind == NodeKind::Export) return DestinationClass::Export;
  return DestinationClass::Product;
}

std::string target_kind(const ObservationTarget& target) {
  if (std::holds_alternative<FlowKey>(target)) return "flow";
  return std::get<NodeTotalKey>(target).direction == Direction::In ? "node_in" : "node_out";
}

std::string target_key(const ObservationTarget& target) {
  if (const auto* key = std::get_if<FlowKey>(&target)) return to_string(*key);
  const auto& node = std::get<NodeTotalKey>(target);
  std::string out = node.node;
  for (std::size_t i = 0; i < node.products.size(); ++i)
    out += (i == 0 ? ":" : "+") + node.products[i];
  return out;
}

ObservationTarget parse_target(std::string_view kind, std::string_view key) {
  if (kind == "flow") {
    auto parsed = parse_flow_key(key);
    if (!parsed)
      throw Error(ErrorCode::InvalidInput,
                  "flow target '" + std::string(key) + "' is not of the form from->to:product");
    return *parsed;
  }
  if (kind != "node_in" && kind != "node_out")
    throw Error(ErrorCode::InvalidInput,
                "target_kind must be flow, node_in or node_out, got '" + std::string(kind) + "'");
  NodeTotalKey total;
  total.direction = kind == "node_in" ? Direction::In : Direction::Out;
  const auto colon = key.find(':');
  total.node = std::string(key.substr(0, colon));
  if (colon != std::string_view::npos) {
    auto rest = key.substr(colon + 1);
    while (true) {
      const auto plus = rest.find('+');
      total.products.emplace_back(rest.substr(0, plus));
      if (plus == std::string_view::npos) break;
      rest.remove_prefix(plus + 1);
    }
  }
  if (total.node.empty() ||
      std::any_of(total.products.begin(), total.products.end(),
                  [](const std::string& p) { return p.empty(); }))
    throw Error(ErrorCode::InvalidInput, "malformed node target '" + std::string(key) + "'");
  return total;
}

std::vector<const Flow*> resolve(const FlowGraph& graph, const ObservationTarget& target) {
  std::vector<const Flow*> out;
  if (const auto* key = std::get_if<FlowKey>(&target)) {
    if (const Flow* flow = graph.find_flow(*key)) out.push_back(flow);
    return out;
  }
  const auto& node = std::get<NodeTotalKey>(target);
  for (const auto& flow : graph.flows)
    if (matches(node, flow)) out.push_back(&flow);
  return out;
}

double evaluate(const FlowGraph& graph, const ObservationTarget& target) {
  double total = 0.0;
  for (const Flow* flow : resolve(graph, target)) total += flow->quantity;
  return total;
}

}  // namespace silvaflux
