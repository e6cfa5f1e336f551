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

// Grounding: instantiate every schema of a knowledge base with the known
// individuals, expand exists/forall combinations into deterministic Or/And
// nodes, and assemble the resulting ground Bayesian network.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "schemanet/errors.hpp"
#include "schemanet/kb_model.hpp"

namespace schemanet {

// ---------------------------------------------------------------------------
// Node identities

/// Identity of an exists/forall combination node. The bound parameter is
/// renamed to `X`, so two nodes are equal iff kind, type and the body's
/// predicate, arity and fixed arguments agree.
struct QuantifierNodeId {
  QuantKind kind = QuantKind::Exists;
  std::string type_name;
  SchemaAtom body;

  static constexpr std::string_view kBound = "X";

  static QuantifierNodeId make(QuantKind kind, std::string type_name, const QuantifierRef& q,
                               const Substitution& free_sub) {
    Substitution sub = free_sub;
    sub[q.bound_param] = std::string(kBound);
    return {kind, std::move(type_name), q.body.substitute(sub)};
  }

  /// `exists(person, sets_off_alarm/1)`, or `exists(person, likes(_,bob))`
  /// when the body has fixed arguments.
  std::string to_string() const {
    std::string out = std::string(quant_keyword(kind)) + "(" + type_name + ", ";
    bool fixed = false;
    for (const auto& a : body.args) fixed |= a != kBound;
    if (!fixed) return out + body.signature().to_string() + ")";
    std::vector<std::string> shown;
    for (const auto& a : body.args) shown.push_back(a == kBound ? "_" : a);
    return out + atom_text(body.predicate, shown) + ")";
  }

  friend auto operator<=>(const QuantifierNodeId&, const QuantifierNodeId&) = default;
};

/// A network variable: a ground proposition or a combination node. Ordered
/// and compared by canonical name.
class NodeId {
 public:
  NodeId(GroundAtom atom) : id_(std::move(atom)), name_(std::get<GroundAtom>(id_).to_string()) {}
  NodeId(QuantifierNodeId q)
      : id_(std::move(q)), name_(std::get<QuantifierNodeId>(id_).to_string()) {}

  const std::string& name() const { return name_; }
  bool is_quantifier() const { return std::holds_alternative<QuantifierNodeId>(id_); }
  const GroundAtom* atom() const { return std::get_if<GroundAtom>(&id_); }
  const QuantifierNodeId* quantifier() const { return std::get_if<QuantifierNodeId>(&id_); }

  friend bool operator==(const NodeId& a, const NodeId& b) { return a.name_ == b.name_; }
  friend auto operator<=>(const NodeId& a, const NodeId& b) { return a.name_ <=> b.name_; }

 private:
  std::variant<GroundAtom, QuantifierNodeId> id_;
  std::string name_;
};

enum class NodeKind { Chance, DetOr, DetAnd };

inline std::string_view node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Chance: return "chance";
    case NodeKind::DetOr: return "or";
    case NodeKind::DetAnd: return "and";
  }
  return "?";
}

/// Where an arc came from: schema `schema_index` under `substitution`, or
/// the fan-in of a combination node (`gathering`).
struct ArcProvenance {
  std::size_t schema_index = 0;
  Substitution substitution;
  bool gathering = false;

  friend bool operator==(const ArcProvenance&, const ArcProvenance&) = default;
};

/// Indicator table of OR/AND over `fan_in` parents. Row index bit k is the
/// truth value of parent k.
inline std::vector<double> deterministic_cpt(NodeKind kind, std::size_t fan_in) {
  std::vector<double> cpt(std::size_t{1} << fan_in);
  const std::size_t all = cpt.size() - 1;
  for (std::size_t row = 0; row < cpt.size(); ++row)
    cpt[row] = kind == NodeKind::DetOr ? (row != 0 ? 1.0 : 0.0) : (row == all ? 1.0 : 0.0);
  return cpt;
}

// ---------------------------------------------------------------------------
// Ground network

class NetworkBuilder;

/// An immutable DAG of boolean nodes, sorted by canonical name. Node `i`
/// has the ordered parent list `parents(i)` and a table `cpt(i)` of
/// 2^|parents| entries, P(node = true | row), where bit k of the row index
/// is the value of `parents(i)[k]`.
class GroundNetwork {
 public:
  using Arc = std::pair<std::size_t, std::size_t>;  // (parent, child)

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  const NodeId& node(std::size_t i) const { return nodes_.at(i); }
  const std::string& name(std::size_t i) const { return nodes_.at(i).name(); }
  const std::vector<NodeId>& nodes() const { return nodes_; }
  NodeKind kind(std::size_t i) const { return kinds_.at(i); }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  std::span<const double> cpt(std::size_t i) const { return cpts_.at(i); }
  const std::map<Arc, ArcProvenance>& provenance() const { return provenance_; }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), name,
                               [](const NodeId& n, std::string_view v) { return n.name() < v; });
    if (it == nodes_.end() || it->name() != name) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw Error(ErrorCode::UnknownNode, "no node named " + std::string(name), {std::string(name)});
  }

  std::size_t arc_count() const {
    std::size_t n = 0;
    for (const auto& p : parents_) n += p.size();
    return n;
  }

  /// Arcs sorted by (parent, child) index.
  std::vector<Arc> arcs() const {
    std::vector<Arc> out;
    for (std::size_t c = 0; c < size(); ++c)
      for (auto p : parents_[c]) out.emplace_back(p, c);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Parents before children; ties by index.
  const std::vector<std::size_t>& topological_order() const { return topo_; }

 private:
  friend class NetworkBuilder;

  std::vector<NodeId> nodes_;
  std::vector<NodeKind> kinds_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<double>> cpts_;
  std::map<Arc, ArcProvenance> provenance_;
  std::vector<std::size_t> topo_;
};

/// Collects nodes by name, then freezes them into a GroundNetwork after
/// checking the DAG and CPT invariants.
class NetworkBuilder {
 public:
  struct Entry {
    NodeId id;
    NodeKind kind;
    std::vector<std::string> parents;
    std::vector<double> cpt;
    std::vector<std::optional<ArcProvenance>> arc_provenance;  // parallel to parents
  };

  bool contains(const std::string& name) const { return entries_.contains(name); }
  const Entry* get(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Adds a node. Re-adding an identical definition is a no-op; a
  /// different one raises DuplicateNodeDefinition.
  void add(NodeId id, NodeKind kind, std::vector<std::string> parents, std::vector<double> cpt,
           std::vector<std::optional<ArcProvenance>> provenance = {}) {
    provenance.resize(parents.size());
    const std::string name = id.name();
    if (auto it = entries_.find(name); it != entries_.end()) {
      const Entry& e = it->second;
      if (e.kind == kind && e.parents == parents && e.cpt == cpt) return;
      throw Error(ErrorCode::DuplicateNodeDefinition,
                  name + " is defined twice with different parents or tables", {name});
    }
    entries_.emplace(name, Entry{std::move(id), kind, std::move(parents), std::move(cpt),
                                 std::move(provenance)});
  }

  void add_root(NodeId id, double p_true) { add(std::move(id), NodeKind::Chance, {}, {p_true}); }

  GroundNetwork build() const {
    GroundNetwork net;
    std::map<std::string, std::size_t> index;
    for (const auto& [name, e] : entries_) {
      index.emplace(name, net.nodes_.size());
      net.nodes_.push_back(e.id);
    }
    const std::size_t n = net.nodes_.size();
    net.kinds_.resize(n);
    net.parents_.resize(n);
    net.children_.resize(n);
    net.cpts_.resize(n);
    for (const auto& [name, e] : entries_) {
      const std::size_t i = index.at(name);
      net.kinds_[i] = e.kind;
      if (e.parents.size() >= 31 || e.cpt.size() != (std::size_t{1} << e.parents.size()))
        throw Error(ErrorCode::InvalidNetwork,
                    name + " has " + std::to_string(e.cpt.size()) + " table entries for " +
                        std::to_string(e.parents.size()) + " parents",
                    {name});
      for (double v : e.cpt)
        if (!(v >= 0.0 && v <= 1.0))
          throw Error(ErrorCode::InvalidNetwork, name + " has a table entry outside [0,1]",
                      {name});
      std::set<std::size_t> seen;
      for (std::size_t k = 0; k < e.parents.size(); ++k) {
        auto it = index.find(e.parents[k]);
        if (it == index.end())
          throw Error(ErrorCode::UndefinedAtom,
                      "parent " + e.parents[k] + " of " + name + " has no definition",
                      {e.parents[k]});
        if (it->second == i)
          throw Error(ErrorCode::SelfArc, name + " would be its own parent", {name});
        if (!seen.insert(it->second).second)
          throw Error(ErrorCode::InvalidNetwork, name + " lists parent " + e.parents[k] + " twice",
                      {name});
        net.parents_[i].push_back(it->second);
        net.children_[it->second].push_back(i);
        if (e.arc_provenance[k]) net.provenance_.emplace(GroundNetwork::Arc{it->second, i},
                                                         *e.arc_provenance[k]);
      }
      net.cpts_[i] = e.cpt;
    }
    for (auto& c : net.children_) std::sort(c.begin(), c.end());
    net.topo_ = topological_sort(net);
    return net;
  }

 private:
  // Kahn's algorithm, smallest ready index first. On failure, walks parent
  // links among the leftover nodes to report one cycle.
  static std::vector<std::size_t> topological_sort(const GroundNetwork& net) {
    const std::size_t n = net.size();
    std::vector<std::size_t> indegree(n);
    for (std::size_t i = 0; i < n; ++i) indegree[i] = net.parents(i).size();
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] == 0) ready.insert(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
      std::size_t v = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(v);
      for (auto c : net.children(v))
        if (--indegree[c] == 0) ready.insert(c);
    }
    if (order.size() == n) return order;

    std::size_t start = 0;
    while (indegree[start] == 0) ++start;
    // Every leftover node has a leftover parent; follow them until a repeat.
    std::vector<std::size_t> path;
    std::map<std::size_t, std::size_t> pos;
    std::size_t v = start;
    while (!pos.contains(v)) {
      pos[v] = path.size();
      path.push_back(v);
      for (auto p : net.parents(v)) {
        if (indegree[p] != 0) {
          v = p;
          break;
        }
      }
    }
    std::vector<std::string> cycle;
    for (std::size_t k = path.size(); k-- > pos[v];) cycle.push_back(net.name(path[k]));
    std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
    cycle.push_back(cycle.front());
    std::string text;
    for (std::size_t k = 0; k < cycle.size(); ++k) text += (k ? " -> " : "") + cycle[k];
    throw Error(ErrorCode::CycleDetected, "grounding produced a cycle: " + text, cycle);
  }

  std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Grounding operations

/// Substitutions for the free parameters of `schema`, drawn from the
/// individual pool. Parameters are taken in name order and the last one
/// varies fastest, so the result is lexicographic in the constants.
inline std::vector<Substitution> enumerate_substitutions(const Schema& schema,
                                                         const KnowledgeBase& kb) {
  const auto params = schema.free_params();
  if (params.empty()) return {Substitution{}};
  const auto pool = kb.individual_pool();
  if (pool.empty())
    throw Error(ErrorCode::EmptyIndividualPool,
                "schema '" + schema.to_string() + "' has parameters but no individuals are known");
  const std::vector<std::string> names(params.begin(), params.end());
  std::vector<std::size_t> digit(names.size(), 0);
  std::vector<Substitution> out;
  while (true) {
    Substitution s;
    for (std::size_t k = 0; k < names.size(); ++k) s.emplace(names[k], pool[digit[k]]);
    out.push_back(std::move(s));
    std::size_t k = names.size();
    while (k > 0) {
      --k;
      if (++digit[k] < pool.size()) break;
      digit[k] = 0;
      if (k == 0) return out;
    }
  }
}

struct QuantifierExpansion {
  QuantifierNodeId id;
  std::vector<GroundAtom> gathered;  // sorted by canonical name
  NodeKind kind = NodeKind::DetOr;
};

/// The combination node for one free substitution of a quantified schema:
/// its parents are the body instances for every member of the type.
inline QuantifierExpansion expand_quantifier(const Schema& schema, const Substitution& free_sub,
                                             const KnowledgeBase& kb) {
  if (!schema.quantifier)
    throw Error(ErrorCode::InvalidKnowledgeBase,
                "schema '" + schema.to_string() + "' has no quantifier");
  const QuantifierRef& q = *schema.quantifier;
  const TypeDecl* type = kb.find_type(q.type_name);
  if (type == nullptr)
    throw Error(ErrorCode::UndeclaredType, "type '" + q.type_name + "' is not declared",
                {q.type_name});
  QuantifierExpansion out;
  out.kind = q.kind == QuantKind::Exists ? NodeKind::DetOr : NodeKind::DetAnd;
  out.id = QuantifierNodeId::make(q.kind, q.type_name, q, free_sub);
  std::set<std::string> seen;
  for (const auto& member : type->members) {
    Substitution sub = free_sub;
    sub[q.bound_param] = member;
    GroundAtom g = q.body.instantiate(sub);
    if (seen.insert(g.to_string()).second) out.gathered.push_back(std::move(g));
  }
  std::sort(out.gathered.begin(), out.gathered.end(),
            [](const GroundAtom& a, const GroundAtom& b) { return a.to_string() < b.to_string(); });
  return out;
}

namespace detail {

class Grounding {
 public:
  explicit Grounding(const KnowledgeBase& kb) : kb_(kb) {
    for (std::size_t i = 0; i < kb.schemata.size(); ++i)
      head_.emplace(kb.schemata[i].child.signature(), i);
    for (std::size_t i = 0; i < kb.priors.size(); ++i)
      prior_.emplace(kb.priors[i].atom.signature(), i);
  }

  GroundNetwork run() {
    const bool no_individuals = kb_.individual_pool().empty();
    for (std::size_t i = 0; i < kb_.schemata.size(); ++i) {
      const Schema& s = kb_.schemata[i];
      // With nobody to instantiate them, parameterized schemata contribute
      // nothing rather than failing the whole network.
      if (no_individuals && !s.free_params().empty()) continue;
      for (const auto& sub : enumerate_substitutions(s, kb_)) instantiate(i, sub);
    }
    for (const auto& p : kb_.priors)
      if (p.atom.is_ground()) materialize(p.atom.instantiate({}));
    return builder_.build();
  }

 private:
  void instantiate(std::size_t index, const Substitution& sub) {
    const Schema& s = kb_.schemata[index];
    const GroundAtom child = s.child.instantiate(sub);
    const std::string child_name = child.to_string();

    if (s.kind != SchemaKind::Plain) {
      QuantifierExpansion ex = expand_quantifier(s, sub, kb_);
      const NodeId qnode(ex.id);
      std::vector<std::string> gathered;
      std::vector<std::optional<ArcProvenance>> prov;
      for (const auto& g : ex.gathered) {
        gathered.push_back(g.to_string());
        prov.push_back(ArcProvenance{index, sub, true});
      }
      if (!builder_.contains(qnode.name()))
        builder_.add(qnode, ex.kind, gathered, deterministic_cpt(ex.kind, gathered.size()), prov);
      const auto& rows = s.cpt.rows;
      builder_.add(NodeId(child), NodeKind::Chance, {qnode.name()},
                   {rows.at(RowKey{false}), rows.at(RowKey{true})},
                   {ArcProvenance{index, sub, false}});
      for (const auto& g : ex.gathered) materialize(g);
      return;
    }

    // Coincident substitutions can repeat a parent; keep its first position
    // and read the template on the diagonal.
    std::vector<GroundAtom> unique;
    std::vector<std::size_t> slot;  // template parent -> unique position
    for (const auto& p : s.parents) {
      GroundAtom g = std::get<SchemaAtom>(p).instantiate(sub);
      if (g == child)
        throw Error(ErrorCode::SelfArc,
                    "schema '" + s.to_string() + "' makes " + child_name + " its own parent",
                    {child_name});
      auto it = std::find(unique.begin(), unique.end(), g);
      slot.push_back(static_cast<std::size_t>(it - unique.begin()));
      if (it == unique.end()) unique.push_back(std::move(g));
    }
    std::vector<double> cpt(std::size_t{1} << unique.size());
    RowKey key(s.parents.size());
    for (std::size_t row = 0; row < cpt.size(); ++row) {
      for (std::size_t k = 0; k < key.size(); ++k) key[k] = (row >> slot[k]) & 1U;
      cpt[row] = s.cpt.rows.at(key);
    }
    std::vector<std::string> parent_names;
    for (const auto& g : unique) parent_names.push_back(g.to_string());
    builder_.add(NodeId(child), NodeKind::Chance, parent_names, std::move(cpt),
                 std::vector<std::optional<ArcProvenance>>(unique.size(),
                                                           ArcProvenance{index, sub, false}));
    for (const auto& g : unique) materialize(g);
  }

  // Ensures `atom` has a node, instantiating its defining schema or prior
  // on demand (parents may mention constants outside the pool).
  void materialize(const GroundAtom& atom) {
    if (builder_.contains(atom.to_string())) return;
    if (auto h = head_.find(atom.signature()); h != head_.end()) {
      const Schema& s = kb_.schemata[h->second];
      auto sub = match(s.child, atom);
      if (!sub)
        throw Error(ErrorCode::UndefinedAtom,
                    atom.to_string() + " is not an instance of " + s.child.to_string(),
                    {atom.to_string()});
      instantiate(h->second, *sub);
      return;
    }
    if (auto p = prior_.find(atom.signature()); p != prior_.end()) {
      const Prior& prior = kb_.priors[p->second];
      if (!match(prior.atom, atom))
        throw Error(ErrorCode::UndefinedAtom,
                    atom.to_string() + " is not an instance of " + prior.atom.to_string(),
                    {atom.to_string()});
      builder_.add_root(NodeId(atom), prior.p_true);
      return;
    }
    throw Error(ErrorCode::UndefinedAtom, atom.to_string() + " has no schema and no prior",
                {atom.to_string()});
  }

  const KnowledgeBase& kb_;
  std::map<Signature, std::size_t> head_;
  std::map<Signature, std::size_t> prior_;
  NetworkBuilder builder_;
};

}  // namespace detail

/// Instantiates every schema with every substitution of known individuals.
/// Throws InvalidKnowledgeBase if validate_kb reports anything, and
/// CycleDetected / SelfArc when the individuals close a loop.
inline GroundNetwork ground(const KnowledgeBase& kb) {
  if (auto diags = validate_kb(kb); !diags.empty()) {
    std::string msg = "knowledge base is not ground-ready:";
    for (const auto& d : diags) msg += "\n  " + d.to_string();
    throw Error(ErrorCode::InvalidKnowledgeBase, msg);
  }
  return detail::Grounding(kb).run();
}

/// Adds `constant` to the members of `type` (no-op if already present).
inline void extend_type(KnowledgeBase& kb, std::string_view type, std::string_view constant) {
  TypeDecl* t = kb.find_type(type);
  if (t == nullptr)
    throw Error(ErrorCode::UndeclaredType, "type '" + std::string(type) + "' is not declared",
                {std::string(type)});
  if (!is_constant(constant))
    throw Error(ErrorCode::InvalidKnowledgeBase,
                "'" + std::string(constant) + "' is not a constant");
  if (!t->contains(constant)) t->members.emplace_back(constant);
}

/// The network for `kb` with `constant` added to `type`. Defined as a full
/// re-grounding, so the result equals ground() of the extended knowledge
/// base; `net` is only the network being replaced.
inline GroundNetwork add_member(const GroundNetwork& /*net*/, const KnowledgeBase& kb,
                                std::string_view type, std::string_view constant) {
  KnowledgeBase extended = kb;
  extend_type(extended, type, constant);
  return ground(extended);
}

// ---------------------------------------------------------------------------
// DOT export

namespace detail {

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Graphviz digraph. Combination nodes are double circles labelled with a
/// leading ∃ or ∀.
inline std::string to_dot(const GroundNetwork& net) {
  std::ostringstream out;
  out << "digraph g {\n";
  for (std::size_t i = 0; i < net.size(); ++i) {
    const NodeId& n = net.node(i);
    out << "  " << detail::dot_quote(n.name());
    if (const auto* q = n.quantifier()) {
      const std::string label = std::string(q->kind == QuantKind::Exists ? "∃ " : "∀ ") +
                                q->type_name + " . " + q->body.to_string();
      out << " [shape=doublecircle, label=" << detail::dot_quote(label) << "];\n";
    } else {
      out << " [shape=ellipse];\n";
    }
  }
  for (const auto& [p, c] : net.arcs())
    out << "  " << detail::dot_quote(net.name(p)) << " -> " << detail::dot_quote(net.name(c))
        << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace schemanet
