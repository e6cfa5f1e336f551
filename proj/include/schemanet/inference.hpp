// Copyright 2026 The schemanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exact posterior queries on a ground network. Variable elimination is the
// production engine; joint enumeration is the brute-force reference it is
// tested against.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "schemanet/errors.hpp"
#include "schemanet/grounder.hpp"

namespace schemanet {

/// Observed values, keyed by node index.
using Evidence = std::map<std::size_t, bool>;

inline constexpr double kImpossibleEvidenceThreshold = 1e-12;
inline constexpr std::size_t kMaxOracleNodes = 25;
inline constexpr std::size_t kMaxFactorScope = 26;

inline Evidence make_evidence(const GroundNetwork& net,
                              const std::vector<std::pair<std::string, bool>>& observed) {
  Evidence ev;
  for (const auto& [name, value] : observed) ev[net.index_of(name)] = value;
  return ev;
}

struct QueryResult {
  double p_true = 0.0;
  double evidence_probability = 1.0;
};

// ---------------------------------------------------------------------------
// Factors

/// Nonnegative table over boolean variables. `scope` is sorted and distinct;
/// bit k of a value index is the value of `scope[k]`.
struct Factor {
  std::vector<std::size_t> scope;
  std::vector<double> values;

  bool mentions(std::size_t var) const {
    return std::binary_search(scope.begin(), scope.end(), var);
  }

  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
};

namespace detail {

inline void check_scope_size(std::size_t n) {
  if (n > kMaxFactorScope)
    throw Error(ErrorCode::FactorTooLarge,
                "factor over " + std::to_string(n) + " variables exceeds the limit of " +
                    std::to_string(kMaxFactorScope));
}

// For each position of `outer`, the bit position of that variable in
// `inner`, or -1.
inline std::vector<int> positions(const std::vector<std::size_t>& outer,
                                  const std::vector<std::size_t>& inner) {
  std::vector<int> pos(outer.size(), -1);
  for (std::size_t k = 0; k < outer.size(); ++k) {
    auto it = std::lower_bound(inner.begin(), inner.end(), outer[k]);
    if (it != inner.end() && *it == outer[k]) pos[k] = static_cast<int>(it - inner.begin());
  }
  return pos;
}

inline std::size_t project(std::size_t row, const std::vector<int>& pos) {
  std::size_t out = 0;
  for (std::size_t k = 0; k < pos.size(); ++k)
    if (pos[k] >= 0 && ((row >> k) & 1U)) out |= std::size_t{1} << pos[k];
  return out;
}

}  // namespace detail

inline Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.scope.begin(), a.scope.end(), b.scope.begin(), b.scope.end(),
                 std::back_inserter(out.scope));
  detail::check_scope_size(out.scope.size());
  const auto pa = detail::positions(out.scope, a.scope);
  const auto pb = detail::positions(out.scope, b.scope);
  out.values.resize(std::size_t{1} << out.scope.size());
  for (std::size_t row = 0; row < out.values.size(); ++row)
    out.values[row] = a.values[detail::project(row, pa)] * b.values[detail::project(row, pb)];
  return out;
}

inline Factor sum_out(const Factor& f, std::size_t var) {
  auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end() || *it != var)
    throw Error(ErrorCode::VarNotInScope, "variable " + std::to_string(var) + " not in factor");
  const std::size_t bit = static_cast<std::size_t>(it - f.scope.begin());
  Factor out;
  out.scope = f.scope;
  out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(bit));
  out.values.assign(std::size_t{1} << out.scope.size(), 0.0);
  const std::size_t low = (std::size_t{1} << bit) - 1;
  for (std::size_t row = 0; row < f.values.size(); ++row) {
    const std::size_t reduced = (row & low) | ((row >> (bit + 1)) << bit);
    out.values[reduced] += f.values[row];
  }
  return out;
}

/// Fixes `var` to `value`, dropping it from the scope. Factors that do not
/// mention `var` are returned unchanged.
inline Factor restrict_factor(const Factor& f, std::size_t var, bool value) {
  auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end() || *it != var) return f;
  const std::size_t bit = static_cast<std::size_t>(it - f.scope.begin());
  Factor out;
  out.scope = f.scope;
  out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(bit));
  out.values.resize(std::size_t{1} << out.scope.size());
  const std::size_t low = (std::size_t{1} << bit) - 1;
  for (std::size_t row = 0; row < out.values.size(); ++row) {
    const std::size_t full = (row & low) | ((row >> bit) << (bit + 1)) |
                             (value ? (std::size_t{1} << bit) : 0);
    out.values[row] = f.values[full];
  }
  return out;
}

/// P(node | parents) as a factor over the node and its parents.
inline Factor cpt_factor(const GroundNetwork& net, std::size_t node) {
  const auto& parents = net.parents(node);
  const auto table = net.cpt(node);
  Factor f;
  f.scope = parents;
  f.scope.push_back(node);
  std::sort(f.scope.begin(), f.scope.end());
  detail::check_scope_size(f.scope.size());
  // Bit of each parent (and the node) inside the factor's row index.
  const auto parent_bits = detail::positions(parents, f.scope);
  const std::size_t node_bit =
      static_cast<std::size_t>(std::lower_bound(f.scope.begin(), f.scope.end(), node) -
                               f.scope.begin());
  f.values.resize(std::size_t{1} << f.scope.size());
  for (std::size_t row = 0; row < f.values.size(); ++row) {
    std::size_t cpt_row = 0;
    for (std::size_t k = 0; k < parents.size(); ++k)
      if ((row >> parent_bits[k]) & 1U) cpt_row |= std::size_t{1} << k;
    const double p = table[cpt_row];
    f.values[row] = ((row >> node_bit) & 1U) ? p : 1.0 - p;
  }
  return f;
}

/// Multiplies every factor mentioning `var`, sums `var` out, and puts the
/// result after the untouched factors.
inline std::vector<Factor> eliminate(const std::vector<Factor>& factors, std::size_t var) {
  std::vector<Factor> out;
  std::optional<Factor> product;
  for (const auto& f : factors) {
    if (!f.mentions(var)) {
      out.push_back(f);
      continue;
    }
    product = product ? multiply(*product, f) : f;
  }
  if (!product)
    throw Error(ErrorCode::VarNotInScope,
                "variable " + std::to_string(var) + " occurs in no factor");
  out.push_back(sum_out(*product, var));
  return out;
}

// ---------------------------------------------------------------------------
// Elimination order

namespace detail {

using Adjacency = std::vector<std::set<std::size_t>>;

/// Moral graph over the nodes with `active[i]`: parent-child links plus
/// links between co-parents, undirected.
inline Adjacency moral_graph(const GroundNetwork& net, const std::vector<bool>& active) {
  Adjacency adj(net.size());
  for (std::size_t c = 0; c < net.size(); ++c) {
    if (!active[c]) continue;
    std::vector<std::size_t> family;
    for (auto p : net.parents(c))
      if (active[p]) family.push_back(p);
    for (auto p : family) {
      adj[p].insert(c);
      adj[c].insert(p);
    }
    for (std::size_t i = 0; i < family.size(); ++i)
      for (std::size_t j = i + 1; j < family.size(); ++j) {
        adj[family[i]].insert(family[j]);
        adj[family[j]].insert(family[i]);
      }
  }
  return adj;
}

/// Greedy min-degree; ties go to the smaller index, which is the
/// lexicographically smaller name because nodes are sorted by name.
inline std::vector<std::size_t> min_degree_order(Adjacency adj,
                                                 const std::vector<bool>& eliminable) {
  std::set<std::size_t> pending;
  for (std::size_t i = 0; i < eliminable.size(); ++i)
    if (eliminable[i]) pending.insert(i);
  std::vector<std::size_t> order;
  while (!pending.empty()) {
    std::size_t best = *pending.begin();
    for (auto v : pending)
      if (adj[v].size() < adj[best].size()) best = v;
    order.push_back(best);
    pending.erase(best);
    const std::vector<std::size_t> nbrs(adj[best].begin(), adj[best].end());
    for (auto a : nbrs) {
      adj[a].erase(best);
      for (auto b : nbrs)
        if (a != b) adj[a].insert(b);
    }
    adj[best].clear();
  }
  return order;
}

/// Nodes with a path to some target (targets included).
inline std::vector<bool> ancestral_set(const GroundNetwork& net,
                                       const std::vector<std::size_t>& targets) {
  std::vector<bool> keep(net.size(), false);
  std::vector<std::size_t> stack(targets.begin(), targets.end());
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    if (keep[v]) continue;
    keep[v] = true;
    for (auto p : net.parents(v)) stack.push_back(p);
  }
  return keep;
}

inline void check_node(const GroundNetwork& net, std::size_t i) {
  if (i >= net.size())
    throw Error(ErrorCode::UnknownNode, "node index " + std::to_string(i) + " out of range");
}

}  // namespace detail

/// Every node outside `keep`, by greedy min-degree on the moral graph.
inline std::vector<std::size_t> elimination_order(const GroundNetwork& net,
                                                  const std::set<std::size_t>& keep) {
  for (auto k : keep) detail::check_node(net, k);
  std::vector<bool> active(net.size(), true);
  std::vector<bool> eliminable(net.size(), true);
  for (auto k : keep) eliminable[k] = false;
  return detail::min_degree_order(detail::moral_graph(net, active), eliminable);
}

// ---------------------------------------------------------------------------
// Posterior

struct PosteriorOptions {
  /// Drop nodes that are not ancestors of the query or the evidence.
  /// Results are unchanged; only the work shrinks.
  bool prune_barren = true;
  /// Explicit elimination order. Must list every unobserved non-query node
  /// that takes part in the computation; other entries are ignored.
  std::optional<std::vector<std::size_t>> order;
};

/// P(query = true | ev) by variable elimination.
inline QueryResult posterior(const GroundNetwork& net, std::size_t query, const Evidence& ev,
                             const PosteriorOptions& options = {}) {
  detail::check_node(net, query);
  for (const auto& [v, value] : ev) detail::check_node(net, v);

  std::vector<std::size_t> targets{query};
  for (const auto& [v, value] : ev) targets.push_back(v);
  std::vector<bool> active = options.prune_barren ? detail::ancestral_set(net, targets)
                                                  : std::vector<bool>(net.size(), true);

  std::vector<Factor> factors;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!active[i]) continue;
    Factor f = cpt_factor(net, i);
    for (const auto& [v, value] : ev) f = restrict_factor(f, v, value);
    factors.push_back(std::move(f));
  }

  std::vector<bool> eliminable = active;
  eliminable[query] = false;
  for (const auto& [v, value] : ev) eliminable[v] = false;

  std::vector<std::size_t> order;
  if (options.order) {
    std::vector<bool> listed(net.size(), false);
    for (auto v : *options.order) {
      detail::check_node(net, v);
      if (eliminable[v] && !listed[v]) order.push_back(v);
      listed[v] = true;
    }
    for (std::size_t i = 0; i < net.size(); ++i)
      if (eliminable[i] && !listed[i])
        throw Error(ErrorCode::InvalidEliminationOrder,
                    "elimination order omits " + net.name(i), {net.name(i)});
  } else {
    std::vector<bool> graph_nodes = active;
    for (const auto& [v, value] : ev) graph_nodes[v] = false;
    order = detail::min_degree_order(detail::moral_graph(net, graph_nodes), eliminable);
  }

  for (auto v : order) factors = eliminate(factors, v);

  Factor result{{}, {1.0}};
  for (const auto& f : factors) result = multiply(result, f);

  QueryResult r;
  r.evidence_probability = result.sum();
  if (!(r.evidence_probability > kImpossibleEvidenceThreshold))
    throw Error(ErrorCode::ImpossibleEvidence,
                "the evidence has probability " + format_probability(r.evidence_probability));
  if (auto it = ev.find(query); it != ev.end())
    r.p_true = it->second ? 1.0 : 0.0;
  else
    r.p_true = result.values[1] / r.evidence_probability;
  return r;
}

inline QueryResult posterior(const GroundNetwork& net, std::string_view query,
                             const Evidence& ev, const PosteriorOptions& options = {}) {
  return posterior(net, net.index_of(query), ev, options);
}

// ---------------------------------------------------------------------------
// Enumeration reference

namespace detail {

inline void check_oracle_size(const GroundNetwork& net) {
  if (net.size() > kMaxOracleNodes)
    throw Error(ErrorCode::TooLargeForOracle,
                std::to_string(net.size()) + " nodes exceed the enumeration limit of " +
                    std::to_string(kMaxOracleNodes));
}

/// Depth-first walk over full assignments in topological order, multiplying
/// one table entry per node. Zero-weight branches are cut; `visit` receives
/// every assignment of nonzero weight.
template <typename Visit>
void enumerate_assignments(const GroundNetwork& net, const Evidence& ev, Visit&& visit) {
  const auto& order = net.topological_order();
  std::vector<int> value(net.size(), 0);
  auto walk = [&](auto&& self, std::size_t depth, double weight) -> void {
    if (weight == 0.0) return;
    if (depth == order.size()) {
      visit(value, weight);
      return;
    }
    const std::size_t v = order[depth];
    const auto& parents = net.parents(v);
    std::size_t row = 0;
    for (std::size_t k = 0; k < parents.size(); ++k)
      if (value[parents[k]]) row |= std::size_t{1} << k;
    const double p = net.cpt(v)[row];
    auto fixed = ev.find(v);
    for (int x = 0; x <= 1; ++x) {
      if (fixed != ev.end() && fixed->second != static_cast<bool>(x)) continue;
      value[v] = x;
      self(self, depth + 1, weight * (x ? p : 1.0 - p));
    }
    value[v] = 0;
  };
  walk(walk, 0, 1.0);
}

}  // namespace detail

/// The full joint distribution as a factor over every node (scope 0..n-1).
inline Factor joint_enumerate(const GroundNetwork& net) {
  detail::check_oracle_size(net);
  Factor joint;
  for (std::size_t i = 0; i < net.size(); ++i) joint.scope.push_back(i);
  joint.values.assign(std::size_t{1} << net.size(), 0.0);
  detail::enumerate_assignments(net, {}, [&](const std::vector<int>& value, double w) {
    std::size_t row = 0;
    for (std::size_t i = 0; i < value.size(); ++i)
      if (value[i]) row |= std::size_t{1} << i;
    joint.values[row] = w;
  });
  return joint;
}

/// P(query = true | ev) by summing the joint over all assignments that agree
/// with the evidence. Shares no code with posterior().
inline QueryResult enumeration_posterior(const GroundNetwork& net, std::size_t query,
                                         const Evidence& ev) {
  detail::check_oracle_size(net);
  detail::check_node(net, query);
  for (const auto& [v, value] : ev) detail::check_node(net, v);
  double mass[2] = {0.0, 0.0};
  detail::enumerate_assignments(net, ev, [&](const std::vector<int>& value, double w) {
    mass[value[query]] += w;
  });
  QueryResult r;
  r.evidence_probability = mass[0] + mass[1];
  if (!(r.evidence_probability > kImpossibleEvidenceThreshold))
    throw Error(ErrorCode::ImpossibleEvidence,
                "the evidence has probability " + format_probability(r.evidence_probability));
  r.p_true = mass[1] / r.evidence_probability;
  return r;
}

}  // namespace schemanet
