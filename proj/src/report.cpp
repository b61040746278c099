#include "silvaflux/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "silvaflux/error.hpp"
#include "silvaflux/text.hpp"

namespace silvaflux {

double delta_percent(double baseline, double reference) {
  if (!(reference > 0.0))
    throw Error(ErrorCode::ZeroReference, "delta_percent needs a positive reference value");
  return 100.0 * (reference - baseline) / reference;
}

std::string DeltaRow::flag() const {
  if (!available()) return "N/A";
  return note.empty() ? "ok" : note;
}

std::string DeltaRow::display_label() const { return section.empty() ? label : section + " / " + label; }

DeltaReport build_delta_report(std::vector<DeltaRow> rows) {
  for (auto& row : rows) {
    row.delta_percent.reset();
    if (row.reference && *row.reference > 0.0) row.delta_percent = delta_percent(row.baseline, *row.reference);
  }
  return {std::move(rows)};
}

DeltaReport build_delta_report(const FlowGraph& graph, const std::vector<ReportRowSpec>& rows,
                               const std::vector<Observation>& observed) {
  std::vector<DeltaRow> out;
  for (const auto& spec : rows) {
    DeltaRow row{spec.section, spec.label, evaluate(graph, spec.target), std::nullopt, std::nullopt, spec.note};
    const auto kind = target_kind(spec.target);
    const auto key = target_key(spec.target);
    for (const auto& obs : observed) {
      if (target_kind(obs.target) != kind || target_key(obs.target) != key) continue;
      if (row.reference)
        throw Error(ErrorCode::InvalidInput, "two reference values for report row '" + row.display_label() + "'");
      row.reference = obs.value;
    }
    out.push_back(std::move(row));
  }
  return build_delta_report(std::move(out));
}

std::string_view to_string(FlowRole role) {
  switch (role) {
    case FlowRole::Regional: return "regional";
    case FlowRole::Export: return "export";
    case FlowRole::Highlighted: return "highlighted";
  }
  return "regional";
}

namespace {

constexpr double kLabelRoom = 180.0;
constexpr double kTitleHeight = 28.0;
constexpr double kSubtitleHeight = 20.0;

double header_height(const SankeyOptions& o) {
  return (o.title.empty() ? 0.0 : kTitleHeight) + (o.subtitle.empty() ? 0.0 : kSubtitleHeight);
}

// Reorders each layer by the quantity-weighted mean position of neighbours
// on the previous (down sweep) or next (up sweep) layers.
void barycenter_sweeps(std::vector<std::vector<std::string>>& layers, const std::map<std::string, int>& rank,
                       const std::vector<const Flow*>& flows, int sweeps) {
  std::map<std::string, double> pos;
  auto refresh = [&](const std::vector<std::string>& layer) {
    for (std::size_t i = 0; i < layer.size(); ++i)
      pos[layer[i]] = (static_cast<double>(i) + 0.5) / static_cast<double>(layer.size());
  };
  for (const auto& layer : layers) refresh(layer);

  auto reorder = [&](std::size_t l, bool downward) {
    std::vector<std::pair<double, std::string>> keyed;
    for (const auto& id : layers[l]) {
      double sum = 0.0, weight = 0.0;
      for (const Flow* f : flows) {
        const std::string* other = nullptr;
        if (f->key.to == id) other = &f->key.from;
        if (f->key.from == id) other = &f->key.to;
        if (!other || *other == id) continue;
        const int r = rank.at(*other);
        if (downward ? r >= static_cast<int>(l) : r <= static_cast<int>(l)) continue;
        sum += f->quantity * pos.at(*other);
        weight += f->quantity;
      }
      keyed.emplace_back(weight > 0.0 ? sum / weight : pos.at(id), id);
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < keyed.size(); ++i) layers[l][i] = keyed[i].second;
    refresh(layers[l]);
  };

  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t l = 1; l < layers.size(); ++l) reorder(l, true);
    for (std::size_t l = layers.size(); l-- > 1;) reorder(l - 1, false);
  }
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SankeyLayout layout_sankey(const FlowGraph& graph, const std::map<FlowKey, FlowRole>& highlights,
                           const SankeyOptions& options) {
  const auto rank = longest_path_ranks(graph);
  std::vector<const Flow*> flows;
  for (const auto& f : graph.flows)
    if (f.quantity > 0.0 && rank.count(f.key.from) && rank.count(f.key.to)) flows.push_back(&f);
  std::sort(flows.begin(), flows.end(), [](const Flow* a, const Flow* b) { return a->key < b->key; });

  int max_rank = 0;
  for (const auto& [id, r] : rank) max_rank = std::max(max_rank, r);
  std::vector<std::vector<std::string>> layers(static_cast<std::size_t>(max_rank) + 1);
  for (const auto& [id, r] : rank) layers[static_cast<std::size_t>(r)].push_back(id);  // map order = id order
  barycenter_sweeps(layers, rank, flows, options.sweeps);

  std::map<std::string, double> in, out;
  for (const Flow* f : flows) {
    out[f->key.from] += f->quantity;
    in[f->key.to] += f->quantity;
  }

  SankeyLayout layout;
  const double top = options.margin + header_height(options);
  std::vector<double> layer_height(layers.size(), 0.0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const auto& id : layers[l]) layer_height[l] += std::max(in[id], out[id]) * options.scale;
    if (!layers[l].empty()) layer_height[l] += options.node_gap * static_cast<double>(layers[l].size() - 1);
  }
  const double tallest = layer_height.empty() ? 0.0 : *std::max_element(layer_height.begin(), layer_height.end());

  std::map<std::string, std::size_t> box_of;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    double y = top + (tallest - layer_height[l]) / 2.0;
    for (const auto& id : layers[l]) {
      const Node* node = graph.find_node(id);
      NodeBox box;
      box.id = id;
      box.label = node && !node->label.empty() ? node->label : id;
      box.kind = node ? node->kind : NodeKind::Transformer;
      box.layer = static_cast<int>(l);
      box.x = options.margin + static_cast<double>(l) * options.layer_spacing;
      box.y = y;
      box.height = std::max(in[id], out[id]) * options.scale;
      y += box.height + options.node_gap;
      box_of[id] = layout.nodes.size();
      layout.nodes.push_back(box);
    }
  }

  for (const Flow* f : flows) {
    Ribbon r;
    r.key = f->key;
    r.value = f->quantity;
    r.width = f->quantity * options.scale;
    if (auto it = highlights.find(f->key); it != highlights.end())
      r.role = it->second;
    else if (box_of.count(f->key.to) && layout.nodes[box_of[f->key.to]].kind == NodeKind::Export)
      r.role = FlowRole::Export;
    layout.ribbons.push_back(r);
  }

  // Stack ribbons on each side of every node, ordered by the vertical
  // position of the node at the other end.
  auto stack = [&](bool outgoing) {
    std::map<std::string, std::vector<Ribbon*>> sides;
    for (auto& r : layout.ribbons) sides[outgoing ? r.key.from : r.key.to].push_back(&r);
    for (auto& [id, list] : sides) {
      auto other_y = [&](const Ribbon* r) { return layout.nodes[box_of[outgoing ? r->key.to : r->key.from]].y; };
      std::sort(list.begin(), list.end(), [&](const Ribbon* a, const Ribbon* b) {
        const double ya = other_y(a), yb = other_y(b);
        if (ya != yb) return ya < yb;
        return a->key < b->key;
      });
      const NodeBox& box = layout.nodes[box_of[id]];
      double offset = box.y;
      for (Ribbon* r : list) {
        if (outgoing) {
          r->x0 = box.x + options.node_width;
          r->y0 = offset + r->width / 2.0;
        } else {
          r->x1 = box.x;
          r->y1 = offset + r->width / 2.0;
        }
        offset += r->width;
      }
    }
  };
  stack(true);
  stack(false);

  layout.width = 2.0 * options.margin + static_cast<double>(max_rank) * options.layer_spacing + options.node_width +
                 kLabelRoom;
  layout.height = top + tallest + options.margin;
  return layout;
}

std::string render_svg(const SankeyLayout& layout, const SankeyOptions& options) {
  auto f = [](double v) { return format_fixed(v, 3); };
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(layout.width) << "\" height=\""
      << f(layout.height) << "\" viewBox=\"0 0 " << f(layout.width) << ' ' << f(layout.height) << "\">\n";
  svg << "<style>\n"
      << "path{fill:none;stroke-opacity:0.55}\n"
      << ".regional{stroke:#9e9e9e}\n"
      << ".export{stroke:#3b6fb6}\n"
      << ".highlighted{stroke:" << xml_escape(options.highlight_color) << ";stroke-opacity:0.85}\n"
      << "rect{fill:#3d3d3d}\n"
      << "text{font-family:sans-serif;font-size:11px;fill:#222}\n"
      << ".title{font-size:16px;font-weight:bold}\n"
      << ".subtitle{font-size:12px;font-style:italic}\n"
      << "</style>\n";
  double y = options.margin;
  if (!options.title.empty()) {
    svg << "<text class=\"title\" x=\"" << f(options.margin) << "\" y=\"" << f(y) << "\">"
        << xml_escape(options.title) << "</text>\n";
    y += kTitleHeight;
  }
  if (!options.subtitle.empty())
    svg << "<text class=\"subtitle\" x=\"" << f(options.margin) << "\" y=\"" << f(y) << "\">"
        << xml_escape(options.subtitle) << "</text>\n";

  svg << "<g class=\"ribbons\">\n";
  for (const auto& r : layout.ribbons) {
    const double c = std::max(std::abs(r.x1 - r.x0) / 2.0, 40.0);
    svg << "<path class=\"" << to_string(r.role) << "\" stroke-width=\"" << f(r.width) << "\" d=\"M" << f(r.x0)
        << ' ' << f(r.y0) << " C" << f(r.x0 + c) << ' ' << f(r.y0) << ' ' << f(r.x1 - c) << ' ' << f(r.y1) << ' '
        << f(r.x1) << ' ' << f(r.y1) << "\"><title>" << xml_escape(to_string(r.key)) << ' ' << f(r.value)
        << "</title></path>\n";
  }
  svg << "</g>\n<g class=\"nodes\">\n";
  for (const auto& n : layout.nodes) {
    svg << "<rect x=\"" << f(n.x) << "\" y=\"" << f(n.y) << "\" width=\"" << f(options.node_width)
        << "\" height=\"" << f(n.height) << "\"><title>" << xml_escape(n.id) << "</title></rect>\n";
    svg << "<text x=\"" << f(n.x + options.node_width + 4.0) << "\" y=\"" << f(n.y + n.height / 2.0 + 4.0)
        << "\">" << xml_escape(n.label) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

std::string sankey_interchange(const FlowGraph& graph, const SankeyLayout& layout, const SankeyOptions& options) {
  nlohmann::json doc;
  doc["title"] = options.title;
  doc["subtitle"] = options.subtitle;
  doc["period"] = graph.period;
  doc["unit"] = "m3 WFE";
  doc["nodes"] = nlohmann::json::array();
  for (const auto& n : layout.nodes)
    doc["nodes"].push_back({{"id", n.id},
                            {"label", n.label},
                            {"kind", std::string(to_string(n.kind))},
                            {"layer", n.layer},
                            {"x", n.x},
                            {"y", n.y},
                            {"height", n.height}});
  doc["links"] = nlohmann::json::array();
  for (const auto& r : layout.ribbons)
    doc["links"].push_back({{"source", r.key.from},
                            {"target", r.key.to},
                            {"product", r.key.product},
                            {"value", r.value},
                            {"width", r.width},
                            {"class", std::string(to_string(r.role))}});
  return doc.dump(2) + "\n";
}

SankeyDocuments emit_sankey(const FlowGraph& graph, const std::map<FlowKey, FlowRole>& highlights,
                            const SankeyOptions& options) {
  if (!(options.scale > 0.0) || !std::isfinite(options.scale))
    throw Error(ErrorCode::InvalidInput, "sankey scale must be positive");
  if (std::none_of(graph.flows.begin(), graph.flows.end(), [](const Flow& f) { return f.quantity > 0.0; }))
    throw Error(ErrorCode::EmptyGraph, "graph has no flows to draw");
  const auto layout = layout_sankey(graph, highlights, options);
  return {render_svg(layout, options), sankey_interchange(graph, layout, options)};
}

}  // namespace silvaflux
