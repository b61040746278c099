#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "silvaflux/flow_model.hpp"

namespace silvaflux {

struct ReconcileOptions {
  double default_sigma_rel = 0.10;
  // Prior pulling flows no observation touches toward zero.
  double unobserved_sigma = 1e6;
  BalanceTolerance tolerance;
};

struct ReconcileProblem {
  FlowGraph templ;  // structure only; quantities are ignored
  std::vector<Observation> observations;
  ReconcileOptions options;
};

struct ObservationResidual {
  std::string target_kind;
  std::string target_key;
  double observed = 0.0;
  double reconciled = 0.0;
  double residual = 0.0;  // reconciled - observed
  double sigma = 0.0;     // 0 for exact observations
  std::string source;
};

struct ReconcileResult {
  FlowGraph graph;  // balanced, flows in key order
  std::vector<ObservationResidual> residuals;
  double objective = 0.0;
  // Flows no observation touches; their values come from balance alone.
  std::vector<FlowKey> underdetermined;
  std::size_t iterations = 0;
};

/// Weighted least-squares reconciliation of `observations` onto the template
/// graph, subject to transformer balance and nonnegative flows. Throws
/// Infeasible when no nonnegative balanced graph meets the exact observations.
ReconcileResult reconcile(const ReconcileProblem& problem);

/// Effective standard deviation used for an observation.
double effective_sigma(const Observation& obs, const ReconcileOptions& options);

/// Split of a market's supply under the perfect-blend assumption: local
/// production and imports mix proportionally into consumption and exports.
struct BlendSplit {
  double production_consumed = 0.0;  // pc
  double production_exported = 0.0;  // pe
  double imports_consumed = 0.0;     // ic
  double imports_exported = 0.0;     // ie
};

/// Throws NegativeQuantity for negative inputs and UnbalancedInputs when
/// consumption + exports differs from production + imports beyond `tol`.
BlendSplit perfect_blend(double production, double imports, double consumption, double exports,
                         BalanceTolerance tol = {});

}  // namespace silvaflux
