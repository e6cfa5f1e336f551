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

// Line-oriented reader for the `.skb` knowledge-base format and for run-time
// commands. One statement per line, terminated by `.`; `#` starts a comment.
//
//   type person = { john, mary }.
//   individuals { e127 }.
//   schema fire -> smells_smoke(X).
//   schema exists X in person . sets_off_alarm(X) -> alarm_sounds.
//   p(smells_smoke(X) | ~fire) = 0.01.
//   p(fire) = 0.01.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "schemanet/kb_model.hpp"

namespace schemanet {

struct SourceSpan {
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
  std::size_t length = 1;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

enum class Severity { Error, Warning };

struct ParseDiagnostic {
  SourceSpan span;
  std::string message;
  Severity severity = Severity::Error;

  std::string to_string() const {
    return std::to_string(span.line) + ":" + std::to_string(span.column) + ": " +
           (severity == Severity::Error ? "error" : "warning") + ": " + message;
  }
};

inline bool has_errors(const std::vector<ParseDiagnostic>& diags) {
  for (const auto& d : diags)
    if (d.severity == Severity::Error) return true;
  return false;
}

struct ParseResult {
  std::optional<KnowledgeBase> kb;  // absent iff some diagnostic is an error
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return kb.has_value(); }
};

struct Observe {
  GroundAtom atom;
  bool value = true;
  friend bool operator==(const Observe&, const Observe&) = default;
};

struct Query {
  GroundAtom atom;
  friend bool operator==(const Query&, const Query&) = default;
};

struct AddMember {
  std::string type_name;
  std::string constant;
  friend bool operator==(const AddMember&, const AddMember&) = default;
};

using Command = std::variant<Observe, Query, AddMember>;

struct CommandResult {
  std::optional<Command> command;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return command.has_value(); }
};

namespace detail {

enum class Tok {
  Ident, Number, LParen, RParen, Comma, Arrow, Bar, Tilde, Eq, PlusEq, Dot,
  LBrace, RBrace, End,
};

struct Token {
  Tok kind;
  std::string text;
  std::size_t column;  // 1-based
};

struct LineError {
  ParseDiagnostic diag;
};

inline std::string_view describe(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Arrow: return "'->'";
    case Tok::Bar: return "'|'";
    case Tok::Tilde: return "'~'";
    case Tok::Eq: return "'='";
    case Tok::PlusEq: return "'+='";
    case Tok::Dot: return "'.'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::End: return "end of line";
  }
  return "?";
}

inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Tokens of one line; `#` ends it. Always ends with a Tok::End.
inline std::vector<Token> lex_line(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](std::size_t col, std::size_t len, std::string msg) {
    throw LineError{{{line_no, col + 1, len == 0 ? 1 : len}, std::move(msg), Severity::Error}};
  };
  while (i < line.size()) {
    const char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      ++i;
      continue;
    }
    if (c == '#') break;
    const std::size_t start = i;
    if (is_alpha(c)) {
      while (i < line.size() && (is_alpha(line[i]) || is_digit(line[i]) || line[i] == '_')) ++i;
      out.push_back({Tok::Ident, std::string(line.substr(start, i - start)), start + 1});
      continue;
    }
    if (is_digit(c) || (c == '-' && i + 1 < line.size() && is_digit(line[i + 1]))) {
      if (c == '-') ++i;
      while (i < line.size() && is_digit(line[i])) ++i;
      if (i + 1 < line.size() && line[i] == '.' && is_digit(line[i + 1])) {
        ++i;
        while (i < line.size() && is_digit(line[i])) ++i;
      }
      if (i < line.size() && (line[i] == 'e' || line[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < line.size() && (line[j] == '+' || line[j] == '-')) ++j;
        if (j < line.size() && is_digit(line[j])) {
          i = j;
          while (i < line.size() && is_digit(line[i])) ++i;
        }
      }
      out.push_back({Tok::Number, std::string(line.substr(start, i - start)), start + 1});
      continue;
    }
    auto single = [&](Tok t) {
      out.push_back({t, std::string(1, c), start + 1});
      ++i;
    };
    switch (c) {
      case '(': single(Tok::LParen); break;
      case ')': single(Tok::RParen); break;
      case ',': single(Tok::Comma); break;
      case '|': single(Tok::Bar); break;
      case '~': single(Tok::Tilde); break;
      case '=': single(Tok::Eq); break;
      case '.': single(Tok::Dot); break;
      case '{': single(Tok::LBrace); break;
      case '}': single(Tok::RBrace); break;
      case '-':
        if (i + 1 < line.size() && line[i + 1] == '>') {
          out.push_back({Tok::Arrow, "->", start + 1});
          i += 2;
        } else {
          fail(start, 1, "unexpected '-'");
        }
        break;
      case '+':
        if (i + 1 < line.size() && line[i + 1] == '=') {
          out.push_back({Tok::PlusEq, "+=", start + 1});
          i += 2;
        } else {
          fail(start, 1, "unexpected '+'");
        }
        break;
      default: {
        std::string shown;
        if (static_cast<unsigned char>(c) >= 0x20 && static_cast<unsigned char>(c) < 0x7f)
          shown = std::string("'") + c + "'";
        else {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "0x%02x", static_cast<unsigned char>(c));
          shown = buf;
        }
        fail(start, 1, "unknown token " + shown);
      }
    }
  }
  out.push_back({Tok::End, "", line.size() + 1});
  return out;
}

/// Recursive-descent reader over the tokens of one line.
class LineParser {
 public:
  LineParser(std::vector<Token> tokens, std::size_t line_no)
      : toks_(std::move(tokens)), line_(line_no) {}

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at(Tok t, std::size_t ahead = 0) const { return peek(ahead).kind == t; }
  bool at_word(std::string_view w, std::size_t ahead = 0) const {
    return at(Tok::Ident, ahead) && peek(ahead).text == w;
  }

  const Token& advance() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  [[noreturn]] void fail(const Token& t, std::string msg) const {
    throw LineError{{span(t), std::move(msg), Severity::Error}};
  }

  SourceSpan span(const Token& t) const {
    return {line_, t.column, t.text.empty() ? 1 : t.text.size()};
  }

  const Token& expect(Tok t, std::string_view context) {
    if (!at(t))
      fail(peek(), "expected " + std::string(describe(t)) + " " + std::string(context) +
                       ", found " + found(peek()));
    return advance();
  }

  void expect_word(std::string_view w) {
    if (!at_word(w)) fail(peek(), "expected '" + std::string(w) + "', found " + found(peek()));
    advance();
  }

  static std::string found(const Token& t) {
    if (t.kind == Tok::End) return "end of line";
    return "'" + t.text + "'";
  }

  std::string constant(std::string_view what) {
    const Token& t = expect(Tok::Ident, std::string("for ") + std::string(what));
    if (!is_constant(t.text))
      fail(t, std::string(what) + " '" + t.text + "' must start with a lowercase letter");
    return t.text;
  }

  std::string parameter(std::string_view what) {
    const Token& t = expect(Tok::Ident, std::string("for ") + std::string(what));
    if (!is_parameter(t.text))
      fail(t, std::string(what) + " '" + t.text + "' must start with an uppercase letter");
    return t.text;
  }

  SchemaAtom atom() {
    SchemaAtom a;
    a.predicate = constant("predicate");
    if (!at(Tok::LParen)) return a;
    advance();
    do {
      a.args.push_back(expect(Tok::Ident, "as an argument").text);
    } while (at(Tok::Comma) && (advance(), true));
    expect(Tok::RParen, "to close the argument list");
    return a;
  }

  GroundAtom ground_atom() {
    const Token& first = peek();
    SchemaAtom a = atom();
    for (const auto& arg : a.args)
      if (!is_constant(arg))
        fail(first, "'" + arg + "' in " + a.to_string() + " must be a constant");
    return {a.predicate, a.args};
  }

  /// `exists X in type . body` starts here?
  bool at_quantifier() const {
    return (at_word("exists") || at_word("forall")) && at(Tok::Ident, 1) &&
           is_parameter(peek(1).text) && at_word("in", 2);
  }

  QuantifierRef quantifier() {
    QuantifierRef q;
    q.kind = advance().text == "exists" ? QuantKind::Exists : QuantKind::Forall;
    q.bound_param = parameter("bound variable");
    expect_word("in");
    q.type_name = constant("type name");
    expect(Tok::Dot, "after the type name");
    const Token& body_start = peek();
    q.body = atom();
    if (!q.body.params().contains(q.bound_param))
      fail(body_start, "bound variable " + q.bound_param + " does not occur in " +
                           q.body.to_string());
    return q;
  }

  ParentRef parent_term() {
    if (at_quantifier()) return quantifier();
    return atom();
  }

  std::vector<std::string> constant_list(std::string_view what) {
    std::vector<std::string> out;
    expect(Tok::LBrace, "to open the list");
    if (!at(Tok::RBrace)) {
      do {
        out.push_back(constant(what));
      } while (at(Tok::Comma) && (advance(), true));
    }
    expect(Tok::RBrace, "to close the list");
    return out;
  }

  double probability() {
    const Token& t = expect(Tok::Number, "for the probability");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
      fail(t, "malformed number '" + t.text + "'");
    if (!(v >= 0.0 && v <= 1.0)) fail(t, "probability " + t.text + " is outside [0,1]");
    return v;
  }

  void finish() {
    expect(Tok::Dot, "to end the statement");
    if (!at(Tok::End)) fail(peek(), "unexpected " + found(peek()) + " after the statement");
  }

  void finish_command() {
    if (!at(Tok::End)) fail(peek(), "unexpected " + found(peek()) + " after the command");
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

class KbReader {
 public:
  ParseResult read(std::string_view text) {
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string_view line = lines[i];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      try {
        auto tokens = lex_line(line, i + 1);
        if (tokens.size() == 1) continue;  // blank or comment
        LineParser p(std::move(tokens), i + 1);
        statement(p);
      } catch (const LineError& e) {
        diags_.push_back(e.diag);
      }
    }
    ParseResult r;
    r.diagnostics = std::move(diags_);
    if (!has_errors(r.diagnostics)) r.kb = std::move(kb_);
    return r;
  }

 private:
  void statement(LineParser& p) {
    if (p.at_word("type") && p.at(Tok::Ident, 1)) return type_decl(p);
    if (p.at_word("individuals") && p.at(Tok::LBrace, 1)) return individuals(p);
    if (p.at_word("schema")) return schema(p);
    if (p.at_word("p") && p.at(Tok::LParen, 1)) return probability(p);
    p.fail(p.peek(), "unknown statement starting with " + LineParser::found(p.peek()) +
                         " (expected type, individuals, schema or p(...))");
  }

  void type_decl(LineParser& p) {
    p.advance();
    const Token& name_tok = p.peek();
    TypeDecl t;
    t.name = p.constant("type name");
    p.expect(Tok::Eq, "after the type name");
    const Token& list_tok = p.peek();
    t.members = p.constant_list("member");
    p.finish();
    if (kb_.find_type(t.name) != nullptr) p.fail(name_tok, "type '" + t.name + "' declared twice");
    std::set<std::string> seen;
    for (const auto& m : t.members)
      if (!seen.insert(m).second) p.fail(list_tok, "'" + m + "' listed twice in type " + t.name);
    kb_.types.push_back(std::move(t));
  }

  void individuals(LineParser& p) {
    const Token& kw = p.advance();
    auto members = p.constant_list("individual");
    p.finish();
    for (auto& m : members)
      if (!kb_.extra_individuals.insert(m).second)
        diags_.push_back({p.span(kw), "individual '" + m + "' declared more than once",
                          Severity::Warning});
  }

  void schema(LineParser& p) {
    p.advance();
    std::vector<ParentRef> parents;
    const Token& first = p.peek();
    do {
      parents.push_back(p.parent_term());
    } while (p.at(Tok::Comma) && (p.advance(), true));
    p.expect(Tok::Arrow, "between the parents and the child");
    SchemaAtom child = p.atom();
    p.finish();
    bool quantified = false;
    for (const auto& pr : parents) quantified |= std::holds_alternative<QuantifierRef>(pr);
    if (quantified && parents.size() != 1)
      p.fail(first, "a quantified schema takes exactly one parent term");
    kb_.schemata.push_back(Schema::make(std::move(parents), std::move(child)));
  }

  void probability(LineParser& p) {
    p.advance();
    p.expect(Tok::LParen, "after 'p'");
    const Token& head_tok = p.peek();
    SchemaAtom head = p.atom();
    if (p.at(Tok::RParen)) {
      p.advance();
      p.expect(Tok::Eq, "before the probability");
      double v = p.probability();
      p.finish();
      kb_.priors.push_back({std::move(head), v});
      return;
    }
    p.expect(Tok::Bar, "between the child and its conditions");
    const Token& cond_tok = p.peek();
    std::vector<std::pair<ParentRef, bool>> conds;
    do {
      bool positive = true;
      if (p.at(Tok::Tilde)) {
        p.advance();
        positive = false;
      }
      conds.emplace_back(p.parent_term(), positive);
    } while (p.at(Tok::Comma) && (p.advance(), true));
    p.expect(Tok::RParen, "to close the conditional");
    p.expect(Tok::Eq, "before the probability");
    double v = p.probability();
    p.finish();

    // The nearest preceding schema with this head; a repeated head is left
    // for validate_kb to report.
    Schema* target = nullptr;
    for (auto it = kb_.schemata.rbegin(); it != kb_.schemata.rend(); ++it) {
      if (it->child.signature() == head.signature()) {
        target = &*it;
        break;
      }
    }
    if (target == nullptr)
      p.fail(head_tok, "no schema with head " + head.signature().to_string() +
                           " precedes this contingency row");
    if (target->child != head)
      p.fail(head_tok, "row head " + head.to_string() + " does not match schema head " +
                           target->child.to_string());
    if (conds.size() != target->parents.size())
      p.fail(cond_tok, "row has " + std::to_string(conds.size()) + " conditions but schema '" +
                           target->to_string() + "' has " +
                           std::to_string(target->parents.size()) + " parents");
    RowKey key;
    for (std::size_t i = 0; i < conds.size(); ++i) {
      if (conds[i].first != target->parents[i])
        p.fail(cond_tok, "condition " + std::to_string(i + 1) + " (" +
                             parent_text(conds[i].first) + ") does not match schema parent " +
                             parent_text(target->parents[i]));
      key.push_back(conds[i].second);
    }
    if (!target->cpt.rows.emplace(key, v).second)
      p.fail(head_tok, "duplicate contingency row for " + head.to_string());
  }

  KnowledgeBase kb_;
  std::vector<ParseDiagnostic> diags_;
};

}  // namespace detail

/// Parses a whole knowledge base. Schemata keep source order. Missing rows
/// are left for validate_kb.
inline ParseResult parse_kb(std::string_view text) {
  return detail::KbReader{}.read(text);
}

/// `observe a(x) = true`, `query b`, `member person += sue`.
inline CommandResult parse_command(std::string_view text) {
  using detail::LineParser;
  using detail::Tok;
  CommandResult r;
  if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
  if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
  try {
    if (text.find('\n') != std::string_view::npos)
      throw detail::LineError{{{1, text.find('\n') + 1, 1}, "a command is a single line",
                               Severity::Error}};
    LineParser p(detail::lex_line(text, 1), 1);
    if (p.at_word("observe")) {
      p.advance();
      Observe o{p.ground_atom(), true};
      p.expect(Tok::Eq, "before the observed value");
      const auto& v = p.expect(Tok::Ident, "for the observed value");
      if (v.text != "true" && v.text != "false")
        p.fail(v, "observed value must be 'true' or 'false'");
      o.value = v.text == "true";
      p.finish_command();
      r.command = o;
    } else if (p.at_word("query")) {
      p.advance();
      Query q{p.ground_atom()};
      p.finish_command();
      r.command = q;
    } else if (p.at_word("member")) {
      p.advance();
      AddMember m;
      m.type_name = p.constant("type name");
      p.expect(Tok::PlusEq, "after the type name");
      m.constant = p.constant("individual");
      p.finish_command();
      r.command = m;
    } else {
      p.fail(p.peek(), "unknown command " + LineParser::found(p.peek()) +
                           " (expected observe, query or member)");
    }
  } catch (const detail::LineError& e) {
    r.diagnostics.push_back(e.diag);
  }
  return r;
}

/// Parses a bare ground atom such as `testimony(watson)`.
inline std::optional<GroundAtom> parse_ground_atom(std::string_view text,
                                                   std::string* error = nullptr) {
  try {
    detail::LineParser p(detail::lex_line(text, 1), 1);
    GroundAtom g = p.ground_atom();
    p.finish_command();
    return g;
  } catch (const detail::LineError& e) {
    if (error) *error = e.diag.message;
    return std::nullopt;
  }
}

/// Renders `kb` in the `.skb` format; parse_kb reads it back to an equal
/// knowledge base.
inline std::string to_text(const KnowledgeBase& kb) {
  std::ostringstream out;
  auto list = [&](const auto& items) {
    out << "{";
    bool first = true;
    for (const auto& m : items) {
      out << (first ? " " : ", ") << m;
      first = false;
    }
    out << (first ? "}" : " }");
  };
  for (const auto& t : kb.types) {
    out << "type " << t.name << " = ";
    list(t.members);
    out << ".\n";
  }
  if (!kb.extra_individuals.empty()) {
    out << "individuals ";
    list(kb.extra_individuals);
    out << ".\n";
  }
  for (const auto& s : kb.schemata) {
    out << "schema " << s.to_string() << ".\n";
    for (const auto& [key, value] : s.cpt.rows) {
      out << "p(" << s.child.to_string() << " | ";
      for (std::size_t i = 0; i < key.size() && i < s.parents.size(); ++i) {
        if (i) out << ", ";
        out << (key[i] ? "" : "~") << parent_text(s.parents[i]);
      }
      out << ") = " << format_probability(value) << ".\n";
    }
  }
  for (const auto& p : kb.priors)
    out << "p(" << p.atom.to_string() << ") = " << format_probability(p.p_true) << ".\n";
  return out.str();
}

}  // namespace schemanet
