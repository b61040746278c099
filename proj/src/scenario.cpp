#include "silvaflux/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "silvaflux/error.hpp"

namespace silvaflux {

namespace {

void require_node(const FlowGraph& g, std::string_view id, std::string_view edit) {
  if (!g.find_node(id))
    throw Error(ErrorCode::UnknownEndpoint,
                "edit '" + std::string(edit) + "': unknown node '" + std::string(id) + "'");
}

Flow& ensure_flow(FlowGraph& g, const FlowKey& key) {
  if (Flow* f = g.find_flow(key)) return *f;
  g.flows.push_back({to_string(key), key, 0.0});
  return g.flows.back();
}

bool absorbs(const std::vector<AbsorbRule>& rules, const Flow& flow) {
  for (const auto& rule : rules) {
    if (rule.node != flow.key.from) continue;
    return std::find(rule.products.begin(), rule.products.end(), flow.key.product) != rule.products.end();
  }
  return true;
}

// Settles transformer residuals left by an edit. Flows in `adjusted` are
// frozen; every flow touched here joins the set, which bounds the loop.
void rebalance(FlowGraph& g, std::set<FlowKey>& adjusted, const std::vector<AbsorbRule>& rules,
               BalanceTolerance tol, std::string_view edit) {
  const auto ranks = longest_path_ranks(g);
  for (std::size_t guard = 0; guard <= g.flows.size() + 1; ++guard) {
    std::string node;
    double residual = 0.0;
    int best_rank = 0;
    for (const auto& [id, r] : balance_residuals(g)) {
      if (tol.within(r, g.inflow(id))) continue;
      const int rank = ranks.count(id) ? ranks.at(id) : 0;
      if (node.empty() || rank < best_rank) {
        node = id;
        residual = r;
        best_rank = rank;
      }
    }
    if (node.empty()) return;

    std::vector<Flow*> outs, ins;
    double out_total = 0.0, in_total = 0.0;
    for (auto& f : g.flows) {
      if (adjusted.count(f.key)) continue;
      if (f.key.from == node && absorbs(rules, f)) {
        outs.push_back(&f);
        out_total += f.quantity;
      } else if (f.key.to == node) {
        ins.push_back(&f);
        in_total += f.quantity;
      }
    }
    const double slack = 1.0 + 1e-12;
    if (out_total > 0.0 && (residual > 0.0 || -residual <= out_total * slack)) {
      for (Flow* f : outs) {
        f->quantity = std::max(0.0, f->quantity + residual * (f->quantity / out_total));
        adjusted.insert(f->key);
      }
    } else if (in_total > 0.0 && (residual < 0.0 || residual <= in_total * slack)) {
      for (Flow* f : ins) {
        f->quantity = std::max(0.0, f->quantity - residual * (f->quantity / in_total));
        adjusted.insert(f->key);
      }
    } else {
      throw Error(ErrorCode::UnbalancedEdit,
                  "edit '" + std::string(edit) + "': node '" + node +
                      "' cannot absorb its imbalance through any adjustable flow");
    }
  }
  throw Error(ErrorCode::UnbalancedEdit,
              "edit '" + std::string(edit) + "': rebalancing did not settle");
}

double inbound_of(const FlowGraph& g, std::string_view node, std::string_view product) {
  double total = 0.0;
  for (const auto& f : g.flows)
    if (f.key.to == node && f.key.product == product) total += f.quantity;
  return total;
}

void check_cap(const FlowGraph& g, const CapByDeposit& cap) {
  const double mass = inbound_of(g, cap.node, cap.product) * cap.yield_coefficient;
  if (mass > cap.cap_mass * (1.0 + 1e-9))
    throw Error(ErrorCode::CapExceeded,
                "edit '" + cap.name + "': inbound " + cap.product + " at '" + cap.node + "' implies " +
                    std::to_string(mass) + " t of extractives, above the cap of " +
                    std::to_string(cap.cap_mass) + " t");
}

struct EditApplier {
  FlowGraph& g;
  std::set<FlowKey>& pinned;
  std::vector<CapByDeposit>& caps;
  double& rerouted;

  void operator()(const Reroute& e) {
    require_node(g, e.from_node, e.name);
    require_node(g, e.old_to, e.name);
    require_node(g, e.new_to, e.name);
    if (e.old_to == e.new_to || e.new_to == e.from_node)
      throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': new_to must differ from old_to and from_node");
    const FlowKey old_key{e.from_node, e.old_to, e.product};
    const Flow* old_flow = g.find_flow(old_key);
    if (!old_flow)
      throw Error(ErrorCode::UnknownEndpoint, "edit '" + e.name + "': no flow " + to_string(old_key));
    const double available = old_flow->quantity;
    double amount = 0.0;
    if (e.amount && !e.fraction) {
      amount = *e.amount;
    } else if (e.fraction && !e.amount) {
      if (!(*e.fraction > 0.0 && *e.fraction <= 1.0))
        throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': fraction must lie in (0, 1]");
      amount = *e.fraction == 1.0 ? available : *e.fraction * available;
    } else {
      throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': give exactly one of amount or fraction");
    }
    if (!(amount > 0.0)) throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': amount must be positive");
    if (amount > available)
      throw Error(ErrorCode::RerouteExceedsFlow, "edit '" + e.name + "': rerouting " + std::to_string(amount) +
                                                     " exceeds the " + std::to_string(available) + " available on " +
                                                     to_string(old_key));
    const FlowKey new_key{e.from_node, e.new_to, e.product};
    ensure_flow(g, new_key).quantity += amount;
    Flow* shrunk = g.find_flow(old_key);
    shrunk->quantity = amount == available ? 0.0 : shrunk->quantity - amount;
    pinned.insert(old_key);
    pinned.insert(new_key);
    rerouted += amount;
  }

  void operator()(const InsertActor& e) {
    if (e.node.id.empty()) throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': actor needs an id");
    if (g.find_node(e.node.id))
      throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': node '" + e.node.id + "' already exists");
    if (e.node.kind == NodeKind::Source || e.node.kind == NodeKind::Import)
      throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': an inserted actor must be able to receive flows");
    g.nodes.push_back(e.node);
    for (const auto& in : e.inbound) {
      require_node(g, in.from_node, e.name);
      if (!g.products.empty() && !g.find_product(in.product))
        throw Error(ErrorCode::UnknownProduct, "edit '" + e.name + "': unknown product '" + in.product + "'");
      if (!(in.amount > 0.0))
        throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': inbound amounts must be positive");
      if (in.divert_from) {
        const FlowKey source_key{in.from_node, *in.divert_from, in.product};
        Flow* source = g.find_flow(source_key);
        if (!source)
          throw Error(ErrorCode::UnknownEndpoint, "edit '" + e.name + "': no flow " + to_string(source_key));
        if (in.amount > source->quantity)
          throw Error(ErrorCode::RerouteExceedsFlow,
                      "edit '" + e.name + "': diverting " + std::to_string(in.amount) + " exceeds " +
                          to_string(source_key));
        source->quantity = in.amount == source->quantity ? 0.0 : source->quantity - in.amount;
        pinned.insert(source_key);
      }
      const FlowKey key{in.from_node, e.node.id, in.product};
      ensure_flow(g, key).quantity += in.amount;
      pinned.insert(key);
      rerouted += in.amount;
    }
  }

  void operator()(const CapByDeposit& e) {
    require_node(g, e.node, e.name);
    if (!(e.cap_mass > 0.0) || !(e.yield_coefficient > 0.0))
      throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': cap_mass and yield_coefficient must be positive");
    caps.push_back(e);
  }

  void operator()(const Scale& e) {
    Flow* flow = g.find_flow(e.flow);
    if (!flow) throw Error(ErrorCode::UnknownEndpoint, "edit '" + e.name + "': no flow " + to_string(e.flow));
    if (!(e.factor >= 0.0) || !std::isfinite(e.factor))
      throw Error(ErrorCode::InvalidInput, "edit '" + e.name + "': factor must be finite and >= 0");
    flow->quantity *= e.factor;
    pinned.insert(e.flow);
  }
};

}  // namespace

std::string_view edit_name(const Edit& edit) {
  return std::visit([](const auto& e) -> std::string_view { return e.name; }, edit);
}

ScenarioDiff& ScenarioDiff::operator+=(const ScenarioDiff& other) {
  for (const auto& [key, d] : other.flow_deltas) flow_deltas[key] += d;
  for (const auto& [node, d] : other.throughput_deltas) throughput_deltas[node] += d;
  carbon.burned += other.carbon.burned;
  carbon.stored_in_products += other.carbon.stored_in_products;
  carbon.exported += other.carbon.exported;
  rerouted_volume += other.rerouted_volume;
  return *this;
}

ScenarioDiff diff_graphs(const FlowGraph& before, const FlowGraph& after, const ConversionTable& table,
                         const DestinationClasses& classes) {
  ScenarioDiff diff;
  for (const auto& f : before.flows) diff.flow_deltas[f.key] -= f.quantity;
  for (const auto& f : after.flows) diff.flow_deltas[f.key] += f.quantity;
  for (const auto& [key, d] : diff.flow_deltas) {
    if (d == 0.0) continue;
    const FlowGraph& where = after.find_node(key.to) ? after : before;
    // Carbon only settles at terminal nodes; intermediate flows pass it on.
    const Node* to = where.find_node(key.to);
    if (!to || (to->kind != NodeKind::Sink && to->kind != NodeKind::Export)) continue;
    const double carbon = std::copysign(to_carbon(std::abs(d), key.product, table), d);
    switch (destination_class(where, key.to, classes)) {
      case DestinationClass::Energy: diff.carbon.burned += carbon; break;
      case DestinationClass::Product: diff.carbon.stored_in_products += carbon; break;
      case DestinationClass::Export: diff.carbon.exported += carbon; break;
    }
  }
  auto throughput = [](const FlowGraph& g, const std::string& id) {
    return std::max(g.inflow(id), g.outflow(id));
  };
  for (const auto& n : before.nodes) diff.throughput_deltas[n.id] -= throughput(before, n.id);
  for (const auto& n : after.nodes) diff.throughput_deltas[n.id] += throughput(after, n.id);
  return diff;
}

DestinationClasses scenario_classes(const Scenario& scenario, const DestinationClasses& base) {
  DestinationClasses out = base;
  for (const auto& edit : scenario.edits)
    if (const auto* actor = std::get_if<InsertActor>(&edit); actor && actor->destination)
      out[actor->node.id] = *actor->destination;
  return out;
}

ScenarioOutcome apply(const FlowGraph& baseline, const Scenario& scenario, const ConversionTable& table,
                      const DestinationClasses& classes, BalanceTolerance tol) {
  std::set<std::string> names;
  for (const auto& edit : scenario.edits) {
    const auto name = std::string(edit_name(edit));
    if (!name.empty() && !names.insert(name).second)
      throw Error(ErrorCode::InvalidInput, "scenario '" + scenario.name + "' repeats edit name '" + name + "'");
  }
  if (!is_balanced(baseline, tol))
    throw Error(ErrorCode::InvalidInput, "baseline graph is not balanced");

  FlowGraph g = baseline;
  std::vector<CapByDeposit> caps;
  double rerouted = 0.0;
  for (const auto& edit : scenario.edits) {
    std::set<FlowKey> adjusted;
    std::visit(EditApplier{g, adjusted, caps, rerouted}, edit);
    rebalance(g, adjusted, scenario.absorb, tol, edit_name(edit));
    std::erase_if(g.flows, [&](const Flow& f) { return f.quantity <= 0.0 && adjusted.count(f.key); });
    for (const auto& cap : caps) check_cap(g, cap);
    if (!is_balanced(g, tol))
      throw Error(ErrorCode::UnbalancedEdit, "edit '" + std::string(edit_name(edit)) + "' leaves the graph unbalanced");
  }

  ScenarioOutcome out;
  out.diff = diff_graphs(baseline, g, table, scenario_classes(scenario, classes));
  out.diff.rerouted_volume = rerouted;
  out.graph = std::move(g);
  return out;
}

double max_reroutable(const FlowGraph& graph, std::string_view product, std::string_view from_node,
                      std::string_view old_to) {
  require_node(graph, from_node, "max_reroutable");
  require_node(graph, old_to, "max_reroutable");
  bool connected = false;
  for (const auto& f : graph.flows) {
    if (f.key.from != from_node || f.key.to != old_to) continue;
    if (f.key.product == product) return f.quantity;
    connected = true;
  }
  if (!connected)
    throw Error(ErrorCode::UnknownEndpoint, "no flow from '" + std::string(from_node) + "' to '" +
                                                std::string(old_to) + "'");
  return 0.0;
}

}  // namespace silvaflux
