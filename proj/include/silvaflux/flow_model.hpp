#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace silvaflux {

enum class ProductCategory {
  Roundwood,
  Fuelwood,
  ForestChips,
  IndustrialChips,
  Sawdust,
  Bark,
  SawnwoodSoftwood,
  SawnwoodHardwood,
  Panel,
  Pulp,
  Extractives,
  Other,
};
inline constexpr std::size_t kCategoryCount = 12;

std::string_view to_string(ProductCategory category);
std::optional<ProductCategory> parse_category(std::string_view text);

enum class NodeKind { Source, Transformer, Sink, Export, Import };

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view text);

struct Product {
  std::string id;
  std::string label;
  ProductCategory category = ProductCategory::Other;

  bool operator==(const Product&) const = default;
};

struct Node {
  std::string id;
  std::string label;
  NodeKind kind = NodeKind::Transformer;

  bool operator==(const Node&) const = default;
};

/// Identity of a flow inside a graph. Ordered lexicographically by
/// (from, to, product); that order is the canonical unknown order used by
/// reconciliation and every emitter.
struct FlowKey {
  std::string from;
  std::string to;
  std::string product;

  auto operator<=>(const FlowKey&) const = default;
  bool operator==(const FlowKey&) const = default;
};

// "from->to:product"
std::string to_string(const FlowKey& key);
std::optional<FlowKey> parse_flow_key(std::string_view text);

struct Flow {
  std::string id;
  FlowKey key;
  double quantity = 0.0;  // m3 wood-fibre equivalent

  bool operator==(const Flow&) const = default;
};

struct BalanceTolerance {
  double rel = 1e-9;
  double abs = 1e-6;  // m3

  bool within(double residual, double scale) const;
};

/// Directed multigraph of sector nodes and product flows. A plain value:
/// operations that change a graph return a new one.
struct FlowGraph {
  std::vector<Product> products;
  std::vector<Node> nodes;
  std::vector<Flow> flows;
  std::string period;

  const Node* find_node(std::string_view id) const;
  const Product* find_product(std::string_view id) const;
  const Flow* find_flow(const FlowKey& key) const;
  Flow* find_flow(const FlowKey& key);

  double inflow(std::string_view node) const;
  double outflow(std::string_view node) const;

  bool operator==(const FlowGraph&) const = default;
};

/// Sums parallel flows sharing a (from, to, product) key; the first flow id
/// is kept. Output flows are in key order.
FlowGraph merge_parallel_flows(FlowGraph graph);

/// Copy of `graph` with flows sorted by key and nodes/products sorted by id.
FlowGraph canonicalized(FlowGraph graph);

/// Inbound minus outbound for every transformer node.
std::map<std::string, double> balance_residuals(const FlowGraph& graph);

bool is_balanced(const FlowGraph& graph, BalanceTolerance tol = {});

/// Same nodes, products and flows irrespective of vector order.
bool structurally_equal(const FlowGraph& a, const FlowGraph& b);

/// Longest-path layer of every node counted from nodes without inbound
/// flows. Cycles are cut at the back edges of a depth-first search visiting
/// nodes and flows in id/key order.
std::map<std::string, int> longest_path_ranks(const FlowGraph& graph);

struct Violation {
  std::string subject;  // flow or node id
  std::string rule;
  std::string message;
};

std::vector<Violation> validate(const FlowGraph& graph);

/// Where carbon goes when wood reaches a node.
enum class DestinationClass { Energy, Product, Export };

std::string_view to_string(DestinationClass cls);
std::optional<DestinationClass> parse_destination_class(std::string_view text);

using DestinationClasses = std::map<std::string, DestinationClass, std::less<>>;

/// Explicit class when listed, otherwise export nodes are Export and every
/// other destination is Product.
DestinationClass destination_class(const FlowGraph& graph, std::string_view node,
                                   const DestinationClasses& classes);

// Observations

enum class Direction { In, Out };

struct NodeTotalKey {
  std::string node;
  Direction direction = Direction::In;
  std::vector<std::string> products;  // empty = all products

  bool operator==(const NodeTotalKey&) const = default;
};

using ObservationTarget = std::variant<FlowKey, NodeTotalKey>;

struct Observation {
  ObservationTarget target;
  double value = 0.0;            // m3 WFE
  std::optional<double> sigma;   // m3 WFE, > 0
  bool exact = false;            // hard constraint instead of a weighted term
  std::string source;
};

std::string target_kind(const ObservationTarget& target);
std::string target_key(const ObservationTarget& target);
ObservationTarget parse_target(std::string_view kind, std::string_view key);

/// Flows whose quantities sum to the observed statistic.
std::vector<const Flow*> resolve(const FlowGraph& graph, const ObservationTarget& target);

/// Current value of the statistic in `graph`; absent flows count as zero.
double evaluate(const FlowGraph& graph, const ObservationTarget& target);

}  // namespace silvaflux
