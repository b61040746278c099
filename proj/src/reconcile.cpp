#include "silvaflux/reconcile.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "silvaflux/active_set.hpp"
#include "silvaflux/error.hpp"

namespace silvaflux {

double effective_sigma(const Observation& obs, const ReconcileOptions& options) {
  if (obs.sigma) return *obs.sigma;
  return std::max(options.default_sigma_rel * obs.value, options.tolerance.abs);
}

ReconcileResult reconcile(const ReconcileProblem& problem) {
  if (auto violations = validate(problem.templ); !violations.empty())
    throw Error(ErrorCode::InvalidInput, "template graph is invalid: " + violations.front().message);
  if (problem.observations.empty())
    throw Error(ErrorCode::InvalidInput, "reconciliation needs at least one observation");
  if (!(problem.options.default_sigma_rel > 0.0))
    throw Error(ErrorCode::InvalidInput, "default_sigma_rel must be positive");

  // Unknowns in lexicographic key order.
  FlowGraph graph = problem.templ;
  std::sort(graph.flows.begin(), graph.flows.end(),
            [](const Flow& a, const Flow& b) { return a.key < b.key; });
  const auto n = static_cast<Eigen::Index>(graph.flows.size());
  std::map<FlowKey, Eigen::Index> column;
  for (Eigen::Index j = 0; j < n; ++j) column[graph.flows[static_cast<std::size_t>(j)].key] = j;

  std::vector<std::vector<Eigen::Index>> supports;
  std::vector<bool> touched(static_cast<std::size_t>(n), false);
  std::size_t soft_count = 0;
  std::size_t exact_count = 0;
  for (const auto& obs : problem.observations) {
    const auto key = target_key(obs.target);
    if (!(obs.value >= 0.0))
      throw Error(ErrorCode::InvalidInput, "observation '" + key + "' has a negative value");
    if (obs.sigma && !(*obs.sigma > 0.0))
      throw Error(ErrorCode::InvalidInput, "observation '" + key + "' has a non-positive sigma");
    std::vector<Eigen::Index> support;
    for (const Flow* flow : resolve(graph, obs.target)) support.push_back(column.at(flow->key));
    if (support.empty())
      throw Error(ErrorCode::InvalidInput,
                  "observation '" + key + "' does not resolve to any flow of the template");
    for (auto j : support) touched[static_cast<std::size_t>(j)] = true;
    supports.push_back(std::move(support));
    (obs.exact ? exact_count : soft_count)++;
  }

  std::vector<std::string> transformers;
  for (const auto& node : graph.nodes)
    if (node.kind == NodeKind::Transformer) transformers.push_back(node.id);
  std::sort(transformers.begin(), transformers.end());

  ReconcileResult result;
  for (Eigen::Index j = 0; j < n; ++j)
    if (!touched[static_cast<std::size_t>(j)])
      result.underdetermined.push_back(graph.flows[static_cast<std::size_t>(j)].key);

  const auto rows = static_cast<Eigen::Index>(soft_count + result.underdetermined.size());
  ConstrainedLsq<double> lsq;
  lsq.design = MatrixX<double>::Zero(rows, n);
  lsq.target = VectorX<double>::Zero(rows);
  lsq.eq_matrix = MatrixX<double>::Zero(static_cast<Eigen::Index>(transformers.size() + exact_count), n);
  lsq.eq_rhs = VectorX<double>::Zero(lsq.eq_matrix.rows());

  for (std::size_t t = 0; t < transformers.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& key = graph.flows[static_cast<std::size_t>(j)].key;
      if (key.to == transformers[t]) lsq.eq_matrix(row, j) += 1.0;
      if (key.from == transformers[t]) lsq.eq_matrix(row, j) -= 1.0;
    }
  }

  Eigen::Index soft_row = 0;
  auto exact_row = static_cast<Eigen::Index>(transformers.size());
  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const auto& obs = problem.observations[k];
    if (obs.exact) {
      for (auto j : supports[k]) lsq.eq_matrix(exact_row, j) = 1.0;
      lsq.eq_rhs(exact_row++) = obs.value;
      continue;
    }
    const double weight = 1.0 / effective_sigma(obs, problem.options);
    for (auto j : supports[k]) lsq.design(soft_row, j) = weight;
    lsq.target(soft_row++) = obs.value * weight;
  }
  for (const auto& key : result.underdetermined)
    lsq.design(soft_row++, column.at(key)) = 1.0 / problem.options.unobserved_sigma;

  double scale = 1.0;
  for (const auto& obs : problem.observations) scale = std::max(scale, obs.value);
  const double feasibility_tol = problem.options.tolerance.abs + problem.options.tolerance.rel * scale;

  const auto solution = solve_constrained_lsq<double>(lsq, feasibility_tol);
  if (solution.status == LsqStatus::Infeasible)
    throw Error(ErrorCode::Infeasible,
                "no nonnegative balanced flow vector satisfies the exact observations");
  if (solution.status == LsqStatus::IterationLimit)
    throw Error(ErrorCode::NotConverged, "active-set iteration limit reached");
  result.iterations = solution.iterations;

  for (Eigen::Index j = 0; j < n; ++j)
    graph.flows[static_cast<std::size_t>(j)].quantity = std::max(0.0, solution.x(j));

  for (std::size_t k = 0; k < problem.observations.size(); ++k) {
    const auto& obs = problem.observations[k];
    ObservationResidual r;
    r.target_kind = target_kind(obs.target);
    r.target_key = target_key(obs.target);
    r.observed = obs.value;
    r.reconciled = evaluate(graph, obs.target);
    r.residual = r.reconciled - r.observed;
    r.sigma = obs.exact ? 0.0 : effective_sigma(obs, problem.options);
    r.source = obs.source;
    if (!obs.exact) result.objective += (r.residual / r.sigma) * (r.residual / r.sigma);
    result.residuals.push_back(std::move(r));
  }
  result.graph = std::move(graph);
  return result;
}

BlendSplit perfect_blend(double production, double imports, double consumption, double exports,
                         BalanceTolerance tol) {
  if (production < 0.0 || imports < 0.0 || consumption < 0.0 || exports < 0.0)
    throw Error(ErrorCode::NegativeQuantity, "perfect_blend inputs must be nonnegative");
  const double supply = production + imports;
  if (!tol.within(consumption + exports - supply, supply))
    throw Error(ErrorCode::UnbalancedInputs,
                "consumption + exports must equal production + imports");
  if (supply == 0.0) return {};
  return {production * consumption / supply, production * exports / supply,
          imports * consumption / supply, imports * exports / supply};
}

}  // namespace silvaflux
