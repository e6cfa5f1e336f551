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

// Background knowledge: parameterized atoms, schemata with contingency-table
// templates, quantified (exists/forall) combination schemata, type
// declarations and root priors.

#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "schemanet/errors.hpp"

namespace schemanet {

// ---------------------------------------------------------------------------
// Identifiers

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  if (!alpha(s.front())) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) {
    return alpha(c) || (c >= '0' && c <= '9') || c == '_';
  });
}

// Constants start lowercase, parameters uppercase.
inline bool is_constant(std::string_view s) {
  return is_identifier(s) && s.front() >= 'a' && s.front() <= 'z';
}

inline bool is_parameter(std::string_view s) {
  return is_identifier(s) && s.front() >= 'A' && s.front() <= 'Z';
}

/// Shortest decimal text that reads back to exactly `p`.
inline std::string format_probability(double p) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

using Substitution = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// Atoms

struct Signature {
  std::string predicate;
  std::size_t arity = 0;

  std::string to_string() const { return predicate + "/" + std::to_string(arity); }
  friend auto operator<=>(const Signature&, const Signature&) = default;
};

inline std::string atom_text(const std::string& predicate,
                             const std::vector<std::string>& args) {
  if (args.empty()) return predicate;
  std::string out = predicate + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ",";
    out += args[i];
  }
  return out + ")";
}

/// A ground proposition such as `testimony(watson)`; no parameters anywhere.
struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  Signature signature() const { return {predicate, args.size()}; }
  std::string to_string() const { return atom_text(predicate, args); }
  friend auto operator<=>(const GroundAtom&, const GroundAtom&) = default;
};

/// A predicate applied to a mix of constants and capitalized parameters.
struct SchemaAtom {
  std::string predicate;
  std::vector<std::string> args;

  std::size_t arity() const { return args.size(); }
  Signature signature() const { return {predicate, args.size()}; }

  std::set<std::string> params() const {
    std::set<std::string> out;
    for (const auto& a : args)
      if (is_parameter(a)) out.insert(a);
    return out;
  }

  bool is_ground() const { return params().empty(); }
  std::string to_string() const { return atom_text(predicate, args); }

  /// Replaces every parameter by its image under `sub`. Throws if a
  /// parameter is unbound.
  GroundAtom instantiate(const Substitution& sub) const {
    GroundAtom g{predicate, {}};
    g.args.reserve(args.size());
    for (const auto& a : args) {
      if (!is_parameter(a)) {
        g.args.push_back(a);
        continue;
      }
      auto it = sub.find(a);
      if (it == sub.end())
        throw Error(ErrorCode::InvalidKnowledgeBase,
                    "parameter " + a + " of " + to_string() + " is unbound");
      g.args.push_back(it->second);
    }
    return g;
  }

  /// Partial substitution: bound parameters are replaced, the rest stay.
  SchemaAtom substitute(const Substitution& sub) const {
    SchemaAtom out = *this;
    for (auto& a : out.args) {
      if (auto it = sub.find(a); is_parameter(a) && it != sub.end()) a = it->second;
    }
    return out;
  }

  friend auto operator<=>(const SchemaAtom&, const SchemaAtom&) = default;
};

/// One-way matching of `pattern` onto a ground atom. Returns the binding of
/// the pattern's parameters, or nullopt if `ground` is not an instance.
inline std::optional<Substitution> match(const SchemaAtom& pattern, const GroundAtom& ground) {
  if (pattern.signature() != ground.signature()) return std::nullopt;
  Substitution sub;
  for (std::size_t i = 0; i < pattern.args.size(); ++i) {
    const auto& p = pattern.args[i];
    const auto& g = ground.args[i];
    if (!is_parameter(p)) {
      if (p != g) return std::nullopt;
      continue;
    }
    auto [it, inserted] = sub.emplace(p, g);
    if (!inserted && it->second != g) return std::nullopt;
  }
  return sub;
}

/// True iff every ground instance of `specific` is an instance of `general`.
inline bool subsumes(const SchemaAtom& general, const SchemaAtom& specific) {
  if (general.signature() != specific.signature()) return false;
  std::map<std::string, std::string> binding;
  for (std::size_t i = 0; i < general.args.size(); ++i) {
    const auto& g = general.args[i];
    const auto& s = specific.args[i];
    if (!is_parameter(g)) {
      if (g != s) return false;
      continue;
    }
    auto [it, inserted] = binding.emplace(g, s);
    if (!inserted && it->second != s) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Schemata

enum class QuantKind { Exists, Forall };

inline std::string_view quant_keyword(QuantKind k) {
  return k == QuantKind::Exists ? "exists" : "forall";
}

/// `exists X in person . sets_off_alarm(X)` as a parent term.
struct QuantifierRef {
  QuantKind kind = QuantKind::Exists;
  std::string bound_param;
  std::string type_name;
  SchemaAtom body;

  /// Parameters of the body other than the bound one.
  std::set<std::string> free_params() const {
    auto p = body.params();
    p.erase(bound_param);
    return p;
  }

  std::string to_string() const {
    return std::string(quant_keyword(kind)) + " " + bound_param + " in " + type_name +
           " . " + body.to_string();
  }

  friend auto operator<=>(const QuantifierRef&, const QuantifierRef&) = default;
};

using ParentRef = std::variant<SchemaAtom, QuantifierRef>;

inline std::string parent_text(const ParentRef& p) {
  return std::visit([](const auto& v) { return v.to_string(); }, p);
}

/// Full truth assignment over the parents, in parent order.
using RowKey = std::vector<bool>;

/// Rows store P(child = true | assignment); the false case is the complement.
struct CptTemplate {
  SchemaAtom child;
  std::vector<ParentRef> parents;
  std::map<RowKey, double> rows;

  bool complete() const {
    if (parents.size() >= 31) return false;
    return rows.size() == (std::size_t{1} << parents.size());
  }

  friend bool operator==(const CptTemplate&, const CptTemplate&) = default;
};

enum class SchemaKind { Plain, Existential, Universal };

struct Schema {
  std::vector<ParentRef> parents;
  SchemaAtom child;
  CptTemplate cpt;
  SchemaKind kind = SchemaKind::Plain;
  std::optional<QuantifierRef> quantifier;

  /// Builds a schema with an empty table; kind and quantifier follow from
  /// the parents (a lone quantified parent makes the schema quantified).
  static Schema make(std::vector<ParentRef> parents, SchemaAtom child) {
    Schema s;
    s.parents = std::move(parents);
    s.child = std::move(child);
    s.cpt.child = s.child;
    s.cpt.parents = s.parents;
    for (const auto& p : s.parents) {
      if (const auto* q = std::get_if<QuantifierRef>(&p)) {
        s.quantifier = *q;
        s.kind = q->kind == QuantKind::Exists ? SchemaKind::Existential
                                              : SchemaKind::Universal;
      }
    }
    return s;
  }

  /// Parameters ranged over by substitutions: everything except a
  /// quantifier's bound parameter.
  std::set<std::string> free_params() const {
    std::set<std::string> out = child.params();
    for (const auto& p : parents) {
      if (const auto* a = std::get_if<SchemaAtom>(&p)) {
        auto ps = a->params();
        out.insert(ps.begin(), ps.end());
      } else {
        auto ps = std::get<QuantifierRef>(p).free_params();
        out.insert(ps.begin(), ps.end());
      }
    }
    return out;
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (i) out += ", ";
      out += parent_text(parents[i]);
    }
    return out + " -> " + child.to_string();
  }

  friend bool operator==(const Schema&, const Schema&) = default;
};

struct Prior {
  SchemaAtom atom;
  double p_true = 0.0;

  friend bool operator==(const Prior&, const Prior&) = default;
};

struct TypeDecl {
  std::string name;
  std::vector<std::string> members;

  bool contains(std::string_view c) const {
    return std::find(members.begin(), members.end(), c) != members.end();
  }

  friend bool operator==(const TypeDecl&, const TypeDecl&) = default;
};

struct KnowledgeBase {
  std::vector<TypeDecl> types;
  std::vector<Schema> schemata;
  std::vector<Prior> priors;
  std::set<std::string> extra_individuals;

  const TypeDecl* find_type(std::string_view name) const {
    for (const auto& t : types)
      if (t.name == name) return &t;
    return nullptr;
  }

  TypeDecl* find_type(std::string_view name) {
    for (auto& t : types)
      if (t.name == name) return &t;
    return nullptr;
  }

  /// Every declared individual: all type members plus the extra ones,
  /// sorted and distinct. Constants that occur only inside schema atoms are
  /// background knowledge and do not join the pool.
  std::vector<std::string> individual_pool() const {
    std::set<std::string> pool(extra_individuals.begin(), extra_individuals.end());
    for (const auto& t : types) pool.insert(t.members.begin(), t.members.end());
    return {pool.begin(), pool.end()};
  }

  friend bool operator==(const KnowledgeBase&, const KnowledgeBase&) = default;
};

// ---------------------------------------------------------------------------
// Classification

enum class Classification { Unique, RightMultiple, LeftMultiple, Quantified };

inline std::string_view classification_name(Classification c) {
  switch (c) {
    case Classification::Unique: return "Unique";
    case Classification::RightMultiple: return "RightMultiple";
    case Classification::LeftMultiple: return "LeftMultiple";
    case Classification::Quantified: return "Quantified";
  }
  return "?";
}

/// The parent side is the tail of the arrow, the child side its head. A
/// schema that is both left- and right-multiple reports LeftMultiple.
inline Classification classify(const Schema& schema) {
  if (schema.kind != SchemaKind::Plain) return Classification::Quantified;
  std::set<std::string> parent_params;
  for (const auto& p : schema.parents) {
    if (const auto* a = std::get_if<SchemaAtom>(&p)) {
      auto ps = a->params();
      parent_params.insert(ps.begin(), ps.end());
    }
  }
  const auto child_params = schema.child.params();
  for (const auto& p : parent_params)
    if (!child_params.contains(p)) return Classification::LeftMultiple;
  for (const auto& p : child_params)
    if (!parent_params.contains(p)) return Classification::RightMultiple;
  return Classification::Unique;
}

// ---------------------------------------------------------------------------
// Validation

enum class DiagnosticCode {
  InvalidIdentifier,
  IncompleteCpt,
  CptMismatch,
  ProbabilityOutOfRange,
  AmbiguousHead,
  UndeclaredType,
  DuplicateType,
  DuplicateMember,
  LeftMultipleRequiresQuantifier,
  MalformedQuantifier,
  PriorOnSchemaChild,
  DuplicatePrior,
  UndefinedParent,
};

inline std::string_view diagnostic_code_name(DiagnosticCode c) {
  switch (c) {
    case DiagnosticCode::InvalidIdentifier: return "InvalidIdentifier";
    case DiagnosticCode::IncompleteCpt: return "IncompleteCpt";
    case DiagnosticCode::CptMismatch: return "CptMismatch";
    case DiagnosticCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case DiagnosticCode::AmbiguousHead: return "AmbiguousHead";
    case DiagnosticCode::UndeclaredType: return "UndeclaredType";
    case DiagnosticCode::DuplicateType: return "DuplicateType";
    case DiagnosticCode::DuplicateMember: return "DuplicateMember";
    case DiagnosticCode::LeftMultipleRequiresQuantifier: return "LeftMultipleRequiresQuantifier";
    case DiagnosticCode::MalformedQuantifier: return "MalformedQuantifier";
    case DiagnosticCode::PriorOnSchemaChild: return "PriorOnSchemaChild";
    case DiagnosticCode::DuplicatePrior: return "DuplicatePrior";
    case DiagnosticCode::UndefinedParent: return "UndefinedParent";
  }
  return "?";
}

struct Diagnostic {
  DiagnosticCode code;
  std::string message;
  std::optional<std::size_t> schema_index;

  std::string to_string() const {
    std::string out = "error[" + std::string(diagnostic_code_name(code)) + "]";
    if (schema_index) out += " schema #" + std::to_string(*schema_index + 1);
    return out + ": " + message;
  }
};

namespace detail {

inline bool valid_probability(double p) { return p >= 0.0 && p <= 1.0; }

inline void check_atom_identifiers(const SchemaAtom& a, std::optional<std::size_t> schema,
                                   std::vector<Diagnostic>& out) {
  if (!is_constant(a.predicate))
    out.push_back({DiagnosticCode::InvalidIdentifier,
                   "predicate '" + a.predicate + "' must start with a lowercase letter",
                   schema});
  for (const auto& arg : a.args)
    if (!is_identifier(arg))
      out.push_back({DiagnosticCode::InvalidIdentifier,
                     "argument '" + arg + "' of " + a.to_string() + " is not an identifier",
                     schema});
}

}  // namespace detail

/// All reasons `kb` cannot be grounded; empty iff it is ground-ready.
inline std::vector<Diagnostic> validate_kb(const KnowledgeBase& kb) {
  using detail::valid_probability;
  std::vector<Diagnostic> out;

  std::set<std::string> type_names;
  for (const auto& t : kb.types) {
    if (!is_constant(t.name))
      out.push_back({DiagnosticCode::InvalidIdentifier,
                     "type name '" + t.name + "' must start with a lowercase letter", {}});
    if (!type_names.insert(t.name).second)
      out.push_back({DiagnosticCode::DuplicateType, "type '" + t.name + "' declared twice", {}});
    std::set<std::string> seen;
    for (const auto& m : t.members) {
      if (!is_constant(m))
        out.push_back({DiagnosticCode::InvalidIdentifier,
                       "member '" + m + "' of type '" + t.name + "' is not a constant", {}});
      if (!seen.insert(m).second)
        out.push_back({DiagnosticCode::DuplicateMember,
                       "'" + m + "' listed twice in type '" + t.name + "'", {}});
    }
  }
  for (const auto& c : kb.extra_individuals)
    if (!is_constant(c))
      out.push_back({DiagnosticCode::InvalidIdentifier,
                     "individual '" + c + "' is not a constant", {}});

  // Every node signature has exactly one definition: a schema head or a prior.
  std::map<Signature, std::size_t> heads;
  for (std::size_t i = 0; i < kb.schemata.size(); ++i) {
    const Schema& s = kb.schemata[i];
    auto [it, inserted] = heads.emplace(s.child.signature(), i);
    if (!inserted)
      out.push_back({DiagnosticCode::AmbiguousHead,
                     "head " + s.child.signature().to_string() + " is already defined by schema #" +
                         std::to_string(it->second + 1) + " (" +
                         kb.schemata[it->second].to_string() + ")",
                     i});
  }
  std::map<Signature, std::size_t> prior_of;
  for (std::size_t i = 0; i < kb.priors.size(); ++i) {
    const Prior& p = kb.priors[i];
    detail::check_atom_identifiers(p.atom, std::nullopt, out);
    if (!valid_probability(p.p_true))
      out.push_back({DiagnosticCode::ProbabilityOutOfRange,
                     "prior p(" + p.atom.to_string() + ") = " + format_probability(p.p_true) +
                         " is outside [0,1]",
                     {}});
    if (auto h = heads.find(p.atom.signature()); h != heads.end())
      out.push_back({DiagnosticCode::PriorOnSchemaChild,
                     "prior given for " + p.atom.to_string() + ", which is the head of schema #" +
                         std::to_string(h->second + 1),
                     {}});
    else if (!prior_of.emplace(p.atom.signature(), i).second)
      out.push_back({DiagnosticCode::DuplicatePrior,
                     "more than one prior for " + p.atom.signature().to_string(), {}});
  }

  auto check_defined = [&](const SchemaAtom& parent, std::size_t schema) {
    const SchemaAtom* def = nullptr;
    if (auto h = heads.find(parent.signature()); h != heads.end())
      def = &kb.schemata[h->second].child;
    else if (auto p = prior_of.find(parent.signature()); p != prior_of.end())
      def = &kb.priors[p->second].atom;
    if (def == nullptr) {
      out.push_back({DiagnosticCode::UndefinedParent,
                     parent.to_string() + " has neither a defining schema nor a prior", schema});
    } else if (!subsumes(*def, parent)) {
      out.push_back({DiagnosticCode::UndefinedParent,
                     parent.to_string() + " is not covered by its definition " + def->to_string(),
                     schema});
    }
  };

  for (std::size_t i = 0; i < kb.schemata.size(); ++i) {
    const Schema& s = kb.schemata[i];
    detail::check_atom_identifiers(s.child, i, out);

    std::size_t quantified = 0;
    for (const auto& p : s.parents) {
      if (const auto* a = std::get_if<SchemaAtom>(&p)) {
        detail::check_atom_identifiers(*a, i, out);
        check_defined(*a, i);
        continue;
      }
      ++quantified;
      const auto& q = std::get<QuantifierRef>(p);
      detail::check_atom_identifiers(q.body, i, out);
      if (!is_parameter(q.bound_param))
        out.push_back({DiagnosticCode::InvalidIdentifier,
                       "bound variable '" + q.bound_param + "' must be a parameter", i});
      if (!q.body.params().contains(q.bound_param))
        out.push_back({DiagnosticCode::MalformedQuantifier,
                       "bound variable " + q.bound_param + " does not occur in " +
                           q.body.to_string(),
                       i});
      if (s.child.params().contains(q.bound_param))
        out.push_back({DiagnosticCode::MalformedQuantifier,
                       "bound variable " + q.bound_param + " also occurs in the head " +
                           s.child.to_string(),
                       i});
      if (kb.find_type(q.type_name) == nullptr)
        out.push_back({DiagnosticCode::UndeclaredType,
                       "type '" + q.type_name + "' is not declared", i});
      check_defined(q.body, i);
      const auto child_params = s.child.params();
      for (const auto& fp : q.free_params())
        if (!child_params.contains(fp))
          out.push_back({DiagnosticCode::LeftMultipleRequiresQuantifier,
                         "parameter " + fp + " of " + q.body.to_string() +
                             " is neither bound nor in the head",
                         i});
    }
    if (quantified > 0 && s.parents.size() != 1)
      out.push_back({DiagnosticCode::MalformedQuantifier,
                     "a quantified schema takes exactly one parent term", i});
    if ((quantified > 0) != (s.kind != SchemaKind::Plain) ||
        (s.kind != SchemaKind::Plain && !s.quantifier))
      out.push_back({DiagnosticCode::MalformedQuantifier,
                     "schema kind does not agree with its parent terms", i});

    if (s.kind == SchemaKind::Plain && classify(s) == Classification::LeftMultiple)
      out.push_back({DiagnosticCode::LeftMultipleRequiresQuantifier,
                     "left-multiple schema '" + s.to_string() +
                         "' needs an exists/forall combination over a declared type",
                     i});

    if (s.cpt.child != s.child || s.cpt.parents != s.parents)
      out.push_back({DiagnosticCode::CptMismatch,
                     "contingency table does not condition on the schema's parents", i});
    for (const auto& [key, value] : s.cpt.rows) {
      if (key.size() != s.parents.size())
        out.push_back({DiagnosticCode::CptMismatch,
                       "contingency row has " + std::to_string(key.size()) +
                           " conditions, schema has " + std::to_string(s.parents.size()) +
                           " parents",
                       i});
      if (!valid_probability(value))
        out.push_back({DiagnosticCode::ProbabilityOutOfRange,
                       "contingency value " + format_probability(value) + " is outside [0,1]",
                       i});
    }
    if (!s.cpt.complete())
      out.push_back({DiagnosticCode::IncompleteCpt,
                     "contingency table for " + s.child.to_string() + " has " +
                         std::to_string(s.cpt.rows.size()) + " of " +
                         std::to_string(std::size_t{1} << std::min<std::size_t>(
                                            s.parents.size(), 30)) +
                         " rows",
                     i});
  }
  return out;
}

}  // namespace schemanet
