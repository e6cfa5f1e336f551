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

// The `schemanet` command line:
//
//   schemanet validate <kb>
//   schemanet ground <kb> [--member t=c1,c2]... [--dot FILE]
//   schemanet query <kb> [--member ...]... [--observe atom=bool]... --query atom...
//                   [--format plain|json]
//   schemanet run <kb> <script> [--member ...]... [--format plain|json]
//
// Exit codes: 0 success, 1 domain error, 2 I/O or usage error.

#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "schemanet/grounder.hpp"
#include "schemanet/inference.hpp"
#include "schemanet/kb_model.hpp"
#include "schemanet/kb_parser.hpp"

namespace schemanet::cli {

inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

namespace detail {

struct Exit {
  int code;
};

inline std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return ss.str();
}

/// Reads, parses and validates a knowledge base, reporting every problem.
inline KnowledgeBase load_kb(const std::string& path, std::ostream& err) {
  auto text = read_file(path);
  if (!text) {
    err << "error: cannot read " << path << "\n";
    throw Exit{kUsageError};
  }
  ParseResult parsed = parse_kb(*text);
  for (const auto& d : parsed.diagnostics) err << path << ":" << d.to_string() << "\n";
  if (!parsed.ok()) throw Exit{kDomainError};
  auto diags = validate_kb(*parsed.kb);
  for (const auto& d : diags) err << path << ": " << d.to_string() << "\n";
  if (!diags.empty()) throw Exit{kDomainError};
  return std::move(*parsed.kb);
}

/// Applies `--member type=c1,c2` flags.
inline void apply_members(KnowledgeBase& kb, const std::vector<std::string>& flags,
                          std::ostream& err) {
  for (const auto& flag : flags) {
    const auto eq = flag.find('=');
    if (eq == std::string::npos || eq == 0) {
      err << "error: --member expects type=c1,c2, got '" << flag << "'\n";
      throw Exit{kUsageError};
    }
    const std::string type = flag.substr(0, eq);
    std::string_view rest = std::string_view(flag).substr(eq + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      std::string c(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      if (c.empty()) continue;
      try {
        extend_type(kb, type, c);
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        throw Exit{kDomainError};
      }
    }
    if (kb.find_type(type) == nullptr) {
      err << "error: type '" << type << "' is not declared\n";
      throw Exit{kDomainError};
    }
  }
}

inline GroundNetwork ground_or_exit(const KnowledgeBase& kb, std::ostream& err) {
  try {
    return ground(kb);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    throw Exit{kDomainError};
  }
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Up to five node names close to `name`: same predicate or within edit
/// distance 3, nearest first.
inline std::vector<std::string> near_misses(const GroundNetwork& net, std::string_view name) {
  const std::string_view pred = name.substr(0, name.find('('));
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& n : net.nodes()) {
    const std::size_t d = edit_distance(name, n.name());
    const std::string_view npred = std::string_view(n.name()).substr(0, n.name().find('('));
    if (d <= 3 || npred == pred) scored.emplace_back(d, n.name());
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < 5; ++i) out.push_back(scored[i].second);
  return out;
}

/// Node index for an atom given on the command line. Combination nodes may
/// be named by their canonical text, e.g. `exists(person, a/1)`.
inline std::size_t resolve(const GroundNetwork& net, const std::string& text, std::ostream& err) {
  std::string name = text;
  if (!net.find(name)) {
    std::string why;
    if (auto atom = parse_ground_atom(text, &why)) name = atom->to_string();
  }
  if (auto i = net.find(name)) return *i;
  err << "error: unknown atom '" << text << "'";
  auto close = near_misses(net, name);
  if (!close.empty()) {
    err << "; did you mean";
    for (std::size_t i = 0; i < close.size(); ++i) err << (i ? ", " : " ") << close[i];
    err << "?";
  }
  err << "\n";
  throw Exit{kDomainError};
}

struct Observation {
  std::string atom;  // as typed
  bool value;
};

inline Observation parse_observation(const std::string& flag, std::ostream& err) {
  const auto eq = flag.rfind('=');
  if (eq == std::string::npos || eq == 0) {
    err << "error: --observe expects atom=true|false, got '" << flag << "'\n";
    throw Exit{kUsageError};
  }
  const std::string value = flag.substr(eq + 1);
  if (value != "true" && value != "false") {
    err << "error: observed value must be true or false, got '" << value << "'\n";
    throw Exit{kUsageError};
  }
  return {flag.substr(0, eq), value == "true"};
}

inline std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline void print_result(std::ostream& out, const std::string& format, const GroundNetwork& net,
                         std::size_t query, const Evidence& ev, const QueryResult& r) {
  if (format == "json") {
    nlohmann::ordered_json j;
    j["query"] = net.name(query);
    j["p_true"] = r.p_true;
    j["evidence_probability"] = r.evidence_probability;
    out << j.dump() << "\n";
    return;
  }
  out << "P(" << net.name(query);
  bool first = true;
  for (const auto& [v, value] : ev) {
    out << (first ? " | " : ", ") << net.name(v) << "=" << (value ? "true" : "false");
    first = false;
  }
  out << ") = " << format_fixed(r.p_true) << "\n";
}

inline int answer(std::ostream& out, std::ostream& err, const std::string& format,
                  const GroundNetwork& net, std::size_t query, const Evidence& ev, bool prune) {
  try {
    PosteriorOptions opts;
    opts.prune_barren = prune;
    print_result(out, format, net, query, ev, posterior(net, query, ev, opts));
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
}

inline int cmd_validate(const std::string& kb_path, std::ostream& out, std::ostream& err) {
  KnowledgeBase kb = load_kb(kb_path, err);
  out << kb_path << ": ok (" << kb.schemata.size() << " schemata, " << kb.priors.size()
      << " priors, " << kb.types.size() << " types)\n";
  return kOk;
}

inline int cmd_ground(const std::string& kb_path, const std::vector<std::string>& members,
                      const std::string& dot_path, std::ostream& out, std::ostream& err) {
  KnowledgeBase kb = load_kb(kb_path, err);
  apply_members(kb, members, err);
  GroundNetwork net = ground_or_exit(kb, err);
  out << net.size() << " nodes, " << net.arc_count() << " arcs\n";
  if (dot_path == "-") {
    out << to_dot(net);
  } else if (!dot_path.empty()) {
    std::ofstream f(dot_path, std::ios::binary);
    f << to_dot(net);
    if (!f) {
      err << "error: cannot write " << dot_path << "\n";
      return kUsageError;
    }
  }
  return kOk;
}

inline int cmd_query(const std::string& kb_path, const std::vector<std::string>& members,
                     const std::vector<std::string>& observe,
                     const std::vector<std::string>& queries, const std::string& format,
                     bool prune, std::ostream& out, std::ostream& err) {
  std::vector<Observation> obs;
  for (const auto& o : observe) obs.push_back(parse_observation(o, err));
  KnowledgeBase kb = load_kb(kb_path, err);
  apply_members(kb, members, err);
  GroundNetwork net = ground_or_exit(kb, err);
  Evidence ev;
  for (const auto& o : obs) ev[resolve(net, o.atom, err)] = o.value;
  std::vector<std::size_t> targets;
  for (const auto& q : queries) targets.push_back(resolve(net, q, err));
  for (auto q : targets)
    if (int rc = answer(out, err, format, net, q, ev, prune); rc != kOk) return rc;
  return kOk;
}

/// Executes a script of run-time commands in order. Membership changes
/// re-ground before the next observation or query; evidence is kept by
/// name across re-groundings.
inline int cmd_run(const std::string& kb_path, const std::string& script_path,
                   const std::vector<std::string>& members, const std::string& format,
                   bool prune, std::ostream& out, std::ostream& err) {
  KnowledgeBase kb = load_kb(kb_path, err);
  apply_members(kb, members, err);
  auto script = read_file(script_path);
  if (!script) {
    err << "error: cannot read " << script_path << "\n";
    return kUsageError;
  }
  std::vector<Command> commands;
  bool bad = false;
  const auto lines = schemanet::detail::split_lines(*script);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    CommandResult r = parse_command(line);
    for (auto d : r.diagnostics) {
      d.span.line = i + 1;
      err << script_path << ":" << d.to_string() << "\n";
    }
    if (r.ok())
      commands.push_back(*r.command);
    else
      bad = true;
  }
  if (bad) return kDomainError;

  std::optional<GroundNetwork> net;
  std::vector<std::pair<std::string, bool>> evidence;
  for (const auto& c : commands) {
    if (const auto* m = std::get_if<AddMember>(&c)) {
      try {
        extend_type(kb, m->type_name, m->constant);
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
      }
      net.reset();
      continue;
    }
    if (!net) net = ground_or_exit(kb, err);
    if (const auto* o = std::get_if<Observe>(&c)) {
      resolve(*net, o->atom.to_string(), err);
      std::erase_if(evidence, [&](const auto& e) { return e.first == o->atom.to_string(); });
      evidence.emplace_back(o->atom.to_string(), o->value);
      continue;
    }
    const auto& q = std::get<Query>(c);
    Evidence ev;
    for (const auto& [name, value] : evidence) ev[resolve(*net, name, err)] = value;
    if (int rc = answer(out, err, format, *net, resolve(*net, q.atom.to_string(), err), ev,
                        prune);
        rc != kOk)
      return rc;
  }
  return kOk;
}

}  // namespace detail

/// Runs the CLI on `args` (without the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ground parameterized probabilistic schemata into Bayesian networks and query them",
               "schemanet"};
  app.require_subcommand(1);

  std::string kb_path, script_path, dot_path, format = "plain";
  std::vector<std::string> members, observe, queries;
  bool no_prune = false;

  auto* validate = app.add_subcommand("validate", "Parse and validate a knowledge base");
  validate->add_option("kb", kb_path, "Knowledge base (.skb)")->required();

  auto* ground_cmd = app.add_subcommand("ground", "Ground a knowledge base into a network");
  ground_cmd->add_option("kb", kb_path, "Knowledge base (.skb)")->required();
  ground_cmd->add_option("--member", members, "Type members, type=c1,c2 (repeatable)");
  ground_cmd->add_option("--dot", dot_path, "Write the network as Graphviz DOT ('-' = stdout)");

  auto* query = app.add_subcommand("query", "Posterior probabilities under evidence");
  query->add_option("kb", kb_path, "Knowledge base (.skb)")->required();
  query->add_option("--member", members, "Type members, type=c1,c2 (repeatable)");
  query->add_option("--observe", observe, "Evidence, atom=true|false (repeatable)");
  query->add_option("--query", queries, "Atom to query (repeatable)")->required();
  query->add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"plain", "json"}));
  query->add_flag("--no-prune", no_prune, "Keep barren nodes during elimination");

  auto* run_cmd = app.add_subcommand("run", "Execute a script of observe/query/member commands");
  run_cmd->add_option("kb", kb_path, "Knowledge base (.skb)")->required();
  run_cmd->add_option("script", script_path, "Command script")->required();
  run_cmd->add_option("--member", members, "Type members, type=c1,c2 (repeatable)");
  run_cmd->add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"plain", "json"}));
  run_cmd->add_flag("--no-prune", no_prune, "Keep barren nodes during elimination");

  std::vector<std::string> argv_storage{"schemanet"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*validate) return detail::cmd_validate(kb_path, out, err);
    if (*ground_cmd) return detail::cmd_ground(kb_path, members, dot_path, out, err);
    if (*query)
      return detail::cmd_query(kb_path, members, observe, queries, format, !no_prune, out, err);
    return detail::cmd_run(kb_path, script_path, members, format, !no_prune, out, err);
  } catch (const detail::Exit& e) {
    return e.code;
  }
}

}  // namespace schemanet::cli
