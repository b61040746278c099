#include <doctest.h>

#include <silvaflux/error.hpp>
#include <silvaflux/scenario.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "support/grand_est.hpp"

using namespace silvaflux;

namespace {

FlowGraph without_ids(FlowGraph g) {
  for (auto& f : g.flows) f.id = to_string(f.key);
  return canonicalized(std::move(g));
}

bool close_graphs(const FlowGraph& a, const FlowGraph& b, double rel) {
  const auto ca = without_ids(a), cb = without_ids(b);
  if (ca.nodes != cb.nodes || ca.products != cb.products || ca.flows.size() != cb.flows.size()) return false;
  for (std::size_t i = 0; i < ca.flows.size(); ++i) {
    if (ca.flows[i].key != cb.flows[i].key) return false;
    const double scale = std::max(1.0, std::abs(ca.flows[i].quantity));
    if (std::abs(ca.flows[i].quantity - cb.flows[i].quantity) > rel * scale) return false;
  }
  return true;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

// A sawmill splitting its input between two terminal buyers.
FlowGraph mill() {
  FlowGraph g;
  g.products = {{"logs", "Logs", ProductCategory::Roundwood},
                {"chips", "Chips", ProductCategory::IndustrialChips},
                {"boards", "Boards", ProductCategory::SawnwoodSoftwood}};
  g.nodes = {{"forest", "", NodeKind::Source},
             {"mill", "", NodeKind::Transformer},
             {"boiler", "", NodeKind::Sink},
             {"board_plant", "", NodeKind::Sink},
             {"port", "", NodeKind::Export}};
  auto add = [&](const char* a, const char* b, const char* p, double q) {
    FlowKey key{a, b, p};
    g.flows.push_back({to_string(key), key, q});
  };
  add("forest", "mill", "logs", 2000);
  add("mill", "boiler", "chips", 943);
  add("mill", "board_plant", "boards", 800);
  add("mill", "port", "boards", 257);
  return g;
}

// Random layered graph: sources feed transformers t0..tn-1 (feeding only
// later ones) and terminals; every transformer is balanced by construction.
FlowGraph random_graph(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nt(1, 4);
  std::uniform_real_distribution<double> q(10.0, 1000.0), w(0.1, 1.0), coin(0.0, 1.0);
  FlowGraph g;
  g.products = {{"a", "", ProductCategory::Roundwood},
                {"b", "", ProductCategory::IndustrialChips},
                {"c", "", ProductCategory::Panel}};
  const int n = nt(rng);
  g.nodes = {{"s0", "", NodeKind::Source}, {"s1", "", NodeKind::Import}};
  for (int i = 0; i < n; ++i) g.nodes.push_back({"t" + std::to_string(i), "", NodeKind::Transformer});
  g.nodes.push_back({"k_energy", "", NodeKind::Sink});
  g.nodes.push_back({"k_use", "", NodeKind::Sink});
  g.nodes.push_back({"x", "", NodeKind::Export});
  const char* products[] = {"a", "b", "c"};
  auto add = [&](const std::string& a, const std::string& b, const std::string& p, double v) {
    FlowKey key{a, b, p};
    if (Flow* f = g.find_flow(key)) {
      f->quantity += v;
      return;
    }
    g.flows.push_back({to_string(key), key, v});
  };
  add("s0", "t0", "a", q(rng));
  if (coin(rng) < 0.5) add("s1", "t0", "a", q(rng));
  if (coin(rng) < 0.5) add("s0", "k_energy", "a", q(rng));
  for (int i = 1; i < n; ++i)
    if (coin(rng) < 0.5) add(coin(rng) < 0.5 ? "s0" : "s1", "t" + std::to_string(i), "a", q(rng));
  for (int i = 0; i < n; ++i) {
    const std::string t = "t" + std::to_string(i);
    const double in = g.inflow(t);
    if (in == 0.0) {
      add("s0", t, "a", q(rng));
    }
    std::vector<std::string> targets = {"k_energy", "k_use", "x"};
    for (int j = i + 1; j < n; ++j) targets.push_back("t" + std::to_string(j));
    std::shuffle(targets.begin(), targets.end(), rng);
    targets.resize(std::min<std::size_t>(targets.size(), 2 + rng() % 3));
    std::vector<double> weights;
    double total = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) total += weights.emplace_back(w(rng));
    const double supply = g.inflow(t);
    double left = supply;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double v = k + 1 == targets.size() ? left : supply * weights[k] / total;
      left -= v;
      add(t, targets[k], products[1 + rng() % 2], v);
    }
  }
  // Exact balance for the generated transformers.
  for (const auto& [id, r] : balance_residuals(g))
    for (auto& f : g.flows)
      if (f.key.from == id) {
        f.quantity += r;
        break;
      }
  return g;
}

DestinationClasses random_classes() {
  return {{"k_energy", DestinationClass::Energy}, {"k_use", DestinationClass::Product}};
}

// A reroute that is structurally valid for `g` (target later in topological
// order than the source node), or nullopt.
std::optional<Reroute> random_reroute(const FlowGraph& g, std::mt19937_64& rng, const std::string& name) {
  std::vector<const Flow*> candidates;
  for (const auto& f : g.flows)
    if (f.quantity > 0.0) candidates.push_back(&f);
  if (candidates.empty()) return std::nullopt;
  const Flow* f = candidates[rng() % candidates.size()];
  auto order = [](const std::string& id) {
    if (id[0] == 's') return 0;
    if (id[0] == 't') return 1 + std::stoi(id.substr(1));
    return 100;
  };
  std::vector<std::string> targets;
  for (const auto& n : g.nodes)
    if (order(n.id) > order(f->key.from) && n.id != f->key.to && n.kind != NodeKind::Source &&
        n.kind != NodeKind::Import)
      targets.push_back(n.id);
  if (targets.empty()) return std::nullopt;
  std::uniform_real_distribution<double> frac(0.05, 1.0);
  Reroute r;
  r.name = name;
  r.product = f->key.product;
  r.from_node = f->key.from;
  r.old_to = f->key.to;
  r.new_to = targets[rng() % targets.size()];
  if (rng() % 2)
    r.fraction = frac(rng);
  else
    r.amount = frac(rng) * f->quantity;
  return r;
}

}  // namespace

TEST_CASE("grand-est fixture is balanced and valid") {
  const auto g = fixture::grand_est();
  CHECK(validate(g).empty());
  CHECK(is_balanced(g));
  CHECK(g.inflow("timber") == 3'208'000);
  CHECK(g.inflow("crushing") == 3'991'000);
}

TEST_CASE("scenario one: by-products move from energy to crushing") {
  const auto base = fixture::grand_est();
  const auto out = apply(base, fixture::scenario_one(), ConversionTable{}, fixture::grand_est_classes());
  CHECK(out.diff.rerouted_volume == 96'000.0);
  CHECK(out.diff.carbon.burned == -24'000.0);
  CHECK(out.diff.carbon.stored_in_products + out.diff.carbon.exported == doctest::Approx(24'000.0).epsilon(1e-12));
  CHECK(is_balanced(out.graph));
  CHECK(out.graph.find_flow({"timber", "energy", "industrial_chips"})->quantity == 81'000);
  CHECK(out.graph.find_flow({"timber", "energy", "sawdust"})->quantity == 73'000);
  CHECK(out.graph.find_flow({"timber", "crushing", "industrial_chips"})->quantity == 847'000);
  CHECK(out.graph.find_flow({"timber", "crushing", "sawdust"})->quantity == 294'000);
  // Only pulp absorbs the extra crushing input.
  CHECK(out.graph.find_flow({"crushing", "consumption", "panel"})->quantity == 1'500'000);
  const double pulp = out.graph.find_flow({"crushing", "consumption", "pulp"})->quantity +
                      out.graph.find_flow({"crushing", "export", "pulp"})->quantity;
  CHECK(pulp == doctest::Approx(1'469'000 + 96'000).epsilon(1e-12));
  CHECK(out.diff.throughput_deltas.at("crushing") == doctest::Approx(96'000).epsilon(1e-12));
  CHECK(out.diff.throughput_deltas.at("timber") == 0.0);
  // The baseline is untouched.
  CHECK(base == fixture::grand_est());
}

TEST_CASE("scenario two: bark to a new chemistry actor under the extractives cap") {
  const auto base = fixture::grand_est();
  const auto out = apply(base, fixture::scenario_two(), ConversionTable{}, fixture::grand_est_classes());
  CHECK(out.diff.rerouted_volume == 77'000.0);
  CHECK(out.diff.carbon.burned == -19'250.0);
  CHECK(out.diff.carbon.burned >= -20'000.0);
  CHECK(out.diff.carbon.stored_in_products == 19'250.0);
  CHECK(77'000.0 * 0.5064935 <= 39'000.0);
  CHECK(is_balanced(out.graph));
  CHECK(out.graph.find_node("chemical"));
  CHECK(out.graph.find_flow({"timber", "energy", "bark"})->quantity == 317'000);

  SUBCASE("a higher yield breaks the cap") {
    auto s = fixture::scenario_two();
    std::get<CapByDeposit>(s.edits[1]).yield_coefficient = 0.6;
    CHECK(code_of([&] { apply(base, s, ConversionTable{}); }) == ErrorCode::CapExceeded);
  }
  SUBCASE("a cap set first constrains a later insertion") {
    auto s = fixture::scenario_two();
    std::swap(s.edits[0], s.edits[1]);
    auto& cap = std::get<CapByDeposit>(s.edits[0]);
    cap.node = "timber";
    CHECK_NOTHROW(apply(base, s, ConversionTable{}));
    cap.cap_mass = 1.0;  // timber already takes no bark in, so still fine
    CHECK_NOTHROW(apply(base, s, ConversionTable{}));
    cap.product = "sawlogs";  // 3.2 million m3 of sawlogs is far above 1 t
    CHECK(code_of([&] { apply(base, s, ConversionTable{}); }) == ErrorCode::CapExceeded);
  }
}

TEST_CASE("empty scenario is the identity") {
  const auto base = fixture::grand_est();
  const auto out = apply(base, Scenario{}, ConversionTable{}, fixture::grand_est_classes());
  CHECK(out.graph == base);
  for (const auto& [key, d] : out.diff.flow_deltas) CHECK(d == 0.0);
  for (const auto& [node, d] : out.diff.throughput_deltas) CHECK(d == 0.0);
  CHECK(out.diff.carbon.burned == 0.0);
  CHECK(out.diff.carbon.stored_in_products == 0.0);
  CHECK(out.diff.carbon.exported == 0.0);
  CHECK(out.diff.rerouted_volume == 0.0);
}

TEST_CASE("full reroute removes the old flow") {
  const auto base = mill();
  Scenario s;
  s.edits.push_back(Reroute{"all chips", "chips", "mill", "boiler", "board_plant", {}, 1.0});
  const auto out = apply(base, s, ConversionTable{});
  CHECK_FALSE(out.graph.find_flow({"mill", "boiler", "chips"}));
  CHECK(out.graph.find_flow({"mill", "board_plant", "chips"})->quantity == 943);
  CHECK(balance_residuals(out.graph) == balance_residuals(base));
  CHECK(out.diff.rerouted_volume == 943);
}

TEST_CASE("max_reroutable") {
  auto g = mill();
  CHECK(max_reroutable(g, "chips", "mill", "boiler") == 943);
  Scenario s;
  s.edits.push_back(Reroute{"all chips", "chips", "mill", "boiler", "board_plant", 943.0, {}});
  auto after = apply(g, s, ConversionTable{}).graph;
  CHECK_FALSE(after.find_flow({"mill", "boiler", "chips"}));
  // boiler no longer connected to mill at all
  CHECK(code_of([&] { max_reroutable(after, "chips", "mill", "boiler"); }) == ErrorCode::UnknownEndpoint);
  // connected by another product only
  CHECK(max_reroutable(g, "chips", "mill", "port") == 0.0);
  CHECK(code_of([&] { max_reroutable(g, "chips", "mill", "nowhere"); }) == ErrorCode::UnknownEndpoint);
  CHECK(max_reroutable(fixture::grand_est(), "industrial_chips", "timber", "crushing") == 778'000);
}

TEST_CASE("edit errors") {
  const auto base = mill();
  auto one = [&](Edit e) {
    Scenario s;
    s.edits.push_back(std::move(e));
    return apply(base, s, ConversionTable{});
  };
  CHECK(code_of([&] { one(Reroute{"r", "chips", "mill", "boiler", "port", 944.0, {}}); }) ==
        ErrorCode::RerouteExceedsFlow);
  CHECK(code_of([&] { one(Reroute{"r", "chips", "mill", "boiler", "moon", 1.0, {}}); }) ==
        ErrorCode::UnknownEndpoint);
  CHECK(code_of([&] { one(Reroute{"r", "logs", "mill", "boiler", "port", 1.0, {}}); }) ==
        ErrorCode::UnknownEndpoint);
  CHECK(code_of([&] { one(Reroute{"r", "chips", "mill", "boiler", "port", 1.0, 0.5}); }) ==
        ErrorCode::InvalidInput);
  CHECK(code_of([&] { one(Reroute{"r", "chips", "mill", "boiler", "port", {}, 1.5}); }) ==
        ErrorCode::InvalidInput);
  CHECK(code_of([&] { one(Scale{"s", {"mill", "x", "chips"}, 2.0}); }) == ErrorCode::UnknownEndpoint);
  CHECK(code_of([&] { one(InsertActor{"i", {"boiler", "", NodeKind::Sink}, {}}); }) == ErrorCode::InvalidInput);
  CHECK(code_of([&] {
          one(InsertActor{"i", {"lab", "", NodeKind::Sink}, {{"mill", "chips", 2000.0, std::string("boiler")}}});
        }) == ErrorCode::RerouteExceedsFlow);

  Scenario dup;
  dup.edits.push_back(Scale{"same", {"mill", "boiler", "chips"}, 1.0});
  dup.edits.push_back(Scale{"same", {"mill", "boiler", "chips"}, 1.0});
  CHECK(code_of([&] { apply(base, dup, ConversionTable{}); }) == ErrorCode::InvalidInput);

  auto unbalanced = base;
  unbalanced.flows[0].quantity += 10;
  CHECK(code_of([&] { apply(unbalanced, Scenario{}, ConversionTable{}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("scale pushes the change downstream") {
  const auto base = mill();
  Scenario s;
  s.edits.push_back(Scale{"more logs", {"forest", "mill", "logs"}, 1.5});
  const auto out = apply(base, s, ConversionTable{});
  CHECK(is_balanced(out.graph));
  CHECK(out.graph.outflow("mill") == doctest::Approx(3000).epsilon(1e-12));
  CHECK(out.graph.find_flow({"mill", "boiler", "chips"})->quantity == doctest::Approx(943 * 1.5).epsilon(1e-12));
}

TEST_CASE("property: applied scenarios stay balanced") {
  std::mt19937_64 rng(11);
  int applied = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_graph(rng);
    REQUIRE(is_balanced(g));
    Scenario s;
    FlowGraph current = g;
    for (int k = 0; k < 3; ++k) {
      auto r = random_reroute(current, rng, "e" + std::to_string(k));
      if (!r) break;
      s.edits.push_back(*r);
      try {
        current = apply(current, Scenario{"", {*r}, {}}, ConversionTable{}).graph;
      } catch (const Error&) {
        s.edits.pop_back();
        break;
      }
    }
    try {
      const auto out = apply(g, s, ConversionTable{}, random_classes());
      CHECK(is_balanced(out.graph));
      ++applied;
    } catch (const Error& e) {
      CHECK(e.code() != ErrorCode::InvalidInput);
    }
  }
  CHECK(applied > 250);
}

TEST_CASE("property: sequential application composes") {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_graph(rng);
    auto r1 = random_reroute(g, rng, "first");
    if (!r1) continue;
    Scenario s1{"", {*r1}, {}};
    ScenarioOutcome o1;
    try {
      o1 = apply(g, s1, ConversionTable{}, random_classes());
    } catch (const Error&) {
      continue;
    }
    auto r2 = random_reroute(o1.graph, rng, "second");
    if (!r2) continue;
    Scenario s2{"", {*r2}, {}};
    Scenario both{"", {*r1, *r2}, {}};
    ScenarioOutcome o2, o12;
    try {
      o2 = apply(o1.graph, s2, ConversionTable{}, random_classes());
    } catch (const Error&) {
      continue;
    }
    o12 = apply(g, both, ConversionTable{}, random_classes());
    CHECK(o12.graph == o2.graph);
    auto summed = o1.diff;
    summed += o2.diff;
    for (const auto& [key, d] : o12.diff.flow_deltas) {
      const double s = summed.flow_deltas.count(key) ? summed.flow_deltas.at(key) : 0.0;
      CHECK(std::abs(d - s) <= 1e-9 * std::max(1.0, std::abs(d)) + 1e-6);
    }
    CHECK(o12.diff.carbon.burned == doctest::Approx(summed.carbon.burned).epsilon(1e-9));
    CHECK(o12.diff.rerouted_volume == doctest::Approx(summed.rerouted_volume).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("property: inverse reroute restores the graph") {
  SUBCASE("terminal destinations restore exactly") {
    const auto base = mill();
    Scenario s;
    s.edits.push_back(Reroute{"there", "chips", "mill", "boiler", "port", 400.0, {}});
    s.edits.push_back(Reroute{"back", "chips", "mill", "port", "boiler", 400.0, {}});
    const auto out = apply(base, s, ConversionTable{});
    CHECK(without_ids(out.graph) == without_ids(base));

    Scenario full;
    full.edits.push_back(Reroute{"there", "chips", "mill", "boiler", "port", {}, 1.0});
    full.edits.push_back(Reroute{"back", "chips", "mill", "port", "boiler", {}, 1.0});
    CHECK(without_ids(apply(base, full, ConversionTable{}).graph) == without_ids(base));
  }
  SUBCASE("random graphs restore up to rounding") {
    std::mt19937_64 rng(13);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const auto g = random_graph(rng);
      auto r = random_reroute(g, rng, "there");
      if (!r || !r->amount) continue;
      ScenarioOutcome there;
      try {
        there = apply(g, Scenario{"", {*r}, {}}, ConversionTable{});
      } catch (const Error&) {
        continue;
      }
      Reroute inverse = *r;
      inverse.name = "back";
      std::swap(inverse.old_to, inverse.new_to);
      const auto back = apply(there.graph, Scenario{"", {inverse}, {}}, ConversionTable{});
      CHECK(close_graphs(back.graph, g, 1e-9));
      ++checked;
    }
    CHECK(checked > 50);
  }
}

TEST_CASE("property: carbon deltas follow the flow deltas into terminals") {
  std::mt19937_64 rng(14);
  ConversionTable table;
  table.set_carbon_density("b", 0.2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_graph(rng);
    auto r = random_reroute(g, rng, "e");
    if (!r) continue;
    ScenarioOutcome out;
    try {
      out = apply(g, Scenario{"", {*r}, {}}, table, random_classes());
    } catch (const Error&) {
      continue;
    }
    double burned = 0.0, stored = 0.0, exported = 0.0;
    for (const auto& [key, d] : out.diff.flow_deltas) {
      const double c = d * table.carbon_density(key.product);
      if (key.to == "k_energy") burned += c;
      if (key.to == "k_use") stored += c;
      if (key.to == "x") exported += c;
    }
    CHECK(out.diff.carbon.burned == doctest::Approx(burned).epsilon(1e-9).scale(1.0));
    CHECK(out.diff.carbon.stored_in_products == doctest::Approx(stored).epsilon(1e-9).scale(1.0));
    CHECK(out.diff.carbon.exported == doctest::Approx(exported).epsilon(1e-9).scale(1.0));
  }
}
