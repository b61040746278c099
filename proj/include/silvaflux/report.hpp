#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "silvaflux/flow_model.hpp"

namespace silvaflux {

// Delta reports

/// 100 * (reference - baseline) / reference. The denominator is the
/// reference (observed) value, not the baseline. Throws ZeroReference when
/// reference <= 0.
double delta_percent(double baseline, double reference);

struct DeltaRow {
  std::string section;  // may be empty
  std::string label;
  double baseline = 0.0;
  std::optional<double> reference;
  std::optional<double> delta_percent;
  std::string note;  // annotation carried into the flag column

  bool available() const { return delta_percent.has_value(); }
  /// "N/A" without a usable reference, else the note, else "ok".
  std::string flag() const;
  /// "section / label", or the label alone.
  std::string display_label() const;
};

struct DeltaReport {
  std::vector<DeltaRow> rows;
};

/// Fills delta_percent for every row whose reference is present and
/// positive; other rows stay N/A.
DeltaReport build_delta_report(std::vector<DeltaRow> rows);

/// A report row: display label plus the graph statistic it reads.
struct ReportRowSpec {
  std::string section;
  std::string label;
  ObservationTarget target;
  std::string note;
};

/// Baselines evaluated on `graph`; references are the observations whose
/// target matches the row's target. Throws InvalidInput when two
/// observations share a row's target.
DeltaReport build_delta_report(const FlowGraph& graph, const std::vector<ReportRowSpec>& rows,
                               const std::vector<Observation>& observed);

// Sankey diagrams

enum class FlowRole { Regional, Export, Highlighted };

std::string_view to_string(FlowRole role);

struct SankeyOptions {
  double scale = 1.0;  // px per m3 WFE
  double layer_spacing = 240.0;
  double node_width = 14.0;
  double node_gap = 28.0;
  double margin = 48.0;
  int sweeps = 8;
  std::string title;
  std::string subtitle;
  std::string highlight_color = "#d64541";
};

struct NodeBox {
  std::string id;
  std::string label;
  NodeKind kind = NodeKind::Transformer;
  int layer = 0;
  double x = 0.0;
  double y = 0.0;
  double height = 0.0;
};

struct Ribbon {
  FlowKey key;
  double value = 0.0;  // m3 WFE
  double width = 0.0;  // px
  FlowRole role = FlowRole::Regional;
  double x0 = 0.0, y0 = 0.0;  // centre line start (source right edge)
  double x1 = 0.0, y1 = 0.0;  // centre line end (target left edge)
};

struct SankeyLayout {
  std::vector<NodeBox> nodes;
  std::vector<Ribbon> ribbons;
  double width = 0.0;
  double height = 0.0;
};

/// Layers by longest path from sources, orders each layer with barycenter
/// sweeps (ties by id), and stacks ribbons so that each node's height equals
/// the widths on its larger side. Flows into export nodes get the Export role
/// unless `highlights` says otherwise.
SankeyLayout layout_sankey(const FlowGraph& graph, const std::map<FlowKey, FlowRole>& highlights,
                           const SankeyOptions& options);

std::string render_svg(const SankeyLayout& layout, const SankeyOptions& options);

/// nodes[] / links[] interchange document at full precision.
std::string sankey_interchange(const FlowGraph& graph, const SankeyLayout& layout,
                               const SankeyOptions& options);

struct SankeyDocuments {
  std::string svg;
  std::string json;
};

/// Throws EmptyGraph for a graph without flows, InvalidInput for scale <= 0.
SankeyDocuments emit_sankey(const FlowGraph& graph, const std::map<FlowKey, FlowRole>& highlights,
                            const SankeyOptions& options);

}  // namespace silvaflux
