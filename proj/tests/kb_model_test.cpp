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

#include <gtest/gtest.h>

#include <random>

#include "schemanet/kb_model.hpp"
#include "support/random_kb.hpp"

namespace schemanet {
namespace {

SchemaAtom atom(std::string pred, std::vector<std::string> args = {}) {
  return {std::move(pred), std::move(args)};
}

Schema plain(std::vector<SchemaAtom> parents, SchemaAtom child) {
  std::vector<ParentRef> refs(parents.begin(), parents.end());
  return Schema::make(std::move(refs), std::move(child));
}

std::vector<DiagnosticCode> codes(const std::vector<Diagnostic>& diags) {
  std::vector<DiagnosticCode> out;
  for (const auto& d : diags) out.push_back(d.code);
  return out;
}

TEST(Identifier, ConstantsAndParameters) {
  EXPECT_TRUE(is_constant("e127"));
  EXPECT_TRUE(is_constant("sets_off_alarm"));
  EXPECT_TRUE(is_parameter("X"));
  EXPECT_TRUE(is_parameter("Person2"));
  EXPECT_FALSE(is_constant("X"));
  EXPECT_FALSE(is_parameter("x"));
  EXPECT_FALSE(is_identifier(""));
  EXPECT_FALSE(is_identifier("_x"));
  EXPECT_FALSE(is_identifier("9a"));
  EXPECT_FALSE(is_identifier("a-b"));
}

TEST(SchemaAtom, ParamsAndInstantiate) {
  const SchemaAtom a = atom("foo", {"X", "a"});
  EXPECT_EQ(a.params(), (std::set<std::string>{"X"}));
  EXPECT_EQ(a.instantiate({{"X", "b"}}).to_string(), "foo(b,a)");
  EXPECT_EQ(atom("bar").to_string(), "bar");
  EXPECT_THROW(a.instantiate({}), Error);
}

TEST(SchemaAtom, MatchAndSubsume) {
  EXPECT_EQ(match(atom("r", {"X", "X"}), GroundAtom{"r", {"a", "a"}}),
            (Substitution{{"X", "a"}}));
  EXPECT_FALSE(match(atom("r", {"X", "X"}), GroundAtom{"r", {"a", "b"}}));
  EXPECT_FALSE(match(atom("r", {"X", "c"}), GroundAtom{"r", {"a", "b"}}));
  EXPECT_TRUE(subsumes(atom("r", {"X", "Y"}), atom("r", {"Z", "a"})));
  EXPECT_FALSE(subsumes(atom("r", {"X", "a"}), atom("r", {"Z", "Y"})));
  EXPECT_FALSE(subsumes(atom("r", {"X", "X"}), atom("r", {"a", "b"})));
}

TEST(Classify, FourCases) {
  EXPECT_EQ(classify(plain({atom("a", {"X"}), atom("b")}, atom("c", {"X"}))),
            Classification::Unique);
  EXPECT_EQ(classify(plain({atom("a"), atom("b")}, atom("c", {"Y"}))),
            Classification::RightMultiple);
  EXPECT_EQ(classify(plain({atom("a", {"X"})}, atom("b"))), Classification::LeftMultiple);
  EXPECT_EQ(classify(plain({atom("burglary"), atom("earthquake")}, atom("alarm_sound"))),
            Classification::Unique);
}

TEST(Classify, BothSidesReportsLeftMultiple) {
  EXPECT_EQ(classify(plain({atom("a", {"X"})}, atom("b", {"Y"}))),
            Classification::LeftMultiple);
}

TEST(Classify, QuantifiedSchema) {
  QuantifierRef q{QuantKind::Exists, "Y", "person", atom("sets_off_alarm", {"Y"})};
  const Schema s = Schema::make({q}, atom("alarm_sounds"));
  EXPECT_EQ(s.kind, SchemaKind::Existential);
  EXPECT_EQ(classify(s), Classification::Quantified);
  EXPECT_TRUE(s.free_params().empty());
}

TEST(Classify, TotalOnRandomPlainSchemata) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> args{"X", "Y", "a"};
  for (int i = 0; i < 500; ++i) {
    auto pick = [&] { return args[rng() % args.size()]; };
    Schema s = plain({atom("p", {pick()}), atom("q", {pick(), pick()})}, atom("c", {pick()}));
    const auto c = classify(s);
    EXPECT_NE(c, Classification::Quantified);
    EXPECT_EQ(classify(s), c);
  }
}

TEST(ValidateKb, FireAlarmFixtureIsClean) {
  const auto kb = testing::load_fixture("fire_alarm.skb");
  EXPECT_TRUE(validate_kb(kb).empty());
}

TEST(ValidateKb, BareLeftMultipleIsRejected) {
  const auto diags = validate_kb(testing::load_fixture("left_multiple.skb"));
  ASSERT_EQ(codes(diags), std::vector{DiagnosticCode::LeftMultipleRequiresQuantifier});
  EXPECT_NE(diags[0].message.find("a(X) -> b"), std::string::npos);
  EXPECT_NE(diags[0].message.find("exists/forall"), std::string::npos);
}

TEST(ValidateKb, ThreeRowsForTwoParents) {
  EXPECT_EQ(codes(validate_kb(testing::load_fixture("incomplete_cpt.skb"))),
            std::vector{DiagnosticCode::IncompleteCpt});
}

TEST(ValidateKb, AmbiguousHead) {
  EXPECT_EQ(codes(validate_kb(testing::load_fixture("ambiguous_head.skb"))),
            std::vector{DiagnosticCode::AmbiguousHead});
}

TEST(ValidateKb, UndeclaredQuantifierType) {
  KnowledgeBase kb;
  QuantifierRef q{QuantKind::Forall, "X", "board", atom("present", {"X"})};
  Schema s = Schema::make({q}, atom("meeting"));
  s.cpt.rows = {{{true}, 0.9}, {{false}, 0.1}};
  kb.schemata.push_back(s);
  kb.priors.push_back({atom("present", {"X"}), 0.5});
  EXPECT_EQ(codes(validate_kb(kb)), std::vector{DiagnosticCode::UndeclaredType});
  kb.types.push_back({"board", {}});
  EXPECT_TRUE(validate_kb(kb).empty());
}

TEST(ValidateKb, RootsNeedPriors) {
  KnowledgeBase kb;
  Schema s = plain({atom("fire")}, atom("smoke"));
  s.cpt.rows = {{{true}, 0.9}, {{false}, 0.1}};
  kb.schemata.push_back(s);
  EXPECT_EQ(codes(validate_kb(kb)), std::vector{DiagnosticCode::UndefinedParent});
  kb.priors.push_back({atom("fire"), 0.01});
  EXPECT_TRUE(validate_kb(kb).empty());
  kb.priors.push_back({atom("smoke"), 0.2});
  EXPECT_EQ(codes(validate_kb(kb)), std::vector{DiagnosticCode::PriorOnSchemaChild});
}

TEST(ValidateKb, ParentMustBeCoveredByItsDefinition) {
  KnowledgeBase kb;
  kb.priors.push_back({atom("foo", {"X", "b"}), 0.5});
  Schema s = plain({atom("foo", {"X", "a"})}, atom("c", {"X"}));
  s.cpt.rows = {{{true}, 0.9}, {{false}, 0.1}};
  kb.schemata.push_back(s);
  EXPECT_EQ(codes(validate_kb(kb)), std::vector{DiagnosticCode::UndefinedParent});
}

TEST(ValidateKb, ProbabilityRangeAndDuplicatePriors) {
  KnowledgeBase kb;
  kb.priors.push_back({atom("a"), 1.5});
  kb.priors.push_back({atom("a"), 0.5});
  EXPECT_EQ(codes(validate_kb(kb)),
            (std::vector{DiagnosticCode::ProbabilityOutOfRange, DiagnosticCode::DuplicatePrior}));
}

TEST(ValidateKb, QuantifierMisuse) {
  KnowledgeBase kb;
  kb.types.push_back({"t", {}});
  kb.priors.push_back({atom("a", {"X", "Y"}), 0.5});
  // Free parameter Y is neither bound nor in the head.
  QuantifierRef q{QuantKind::Exists, "X", "t", atom("a", {"X", "Y"})};
  Schema s = Schema::make({q}, atom("b"));
  s.cpt.rows = {{{true}, 0.9}, {{false}, 0.1}};
  kb.schemata.push_back(s);
  EXPECT_EQ(codes(validate_kb(kb)), std::vector{DiagnosticCode::LeftMultipleRequiresQuantifier});

  // Bound variable reappearing in the head.
  kb.schemata[0] = Schema::make({QuantifierRef{QuantKind::Exists, "X", "t", atom("a", {"X", "Y"})}},
                                atom("b", {"X", "Y"}));
  kb.schemata[0].cpt.rows = {{{true}, 0.9}, {{false}, 0.1}};
  EXPECT_EQ(codes(validate_kb(kb)), std::vector{DiagnosticCode::MalformedQuantifier});
}

TEST(ValidateKb, TypesAndMembers) {
  KnowledgeBase kb;
  kb.types.push_back({"t", {"a", "a"}});
  kb.types.push_back({"t", {"Bad"}});
  EXPECT_EQ(codes(validate_kb(kb)),
            (std::vector{DiagnosticCode::DuplicateMember, DiagnosticCode::DuplicateType,
                         DiagnosticCode::InvalidIdentifier}));
}

TEST(ValidateKb, AcceptedTablesAreComplete) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto kb = testing::random_kb(rng);
    ASSERT_TRUE(validate_kb(kb).empty());
    for (const auto& s : kb.schemata) {
      EXPECT_EQ(s.cpt.rows.size(), std::size_t{1} << s.parents.size());
      for (const auto& [k, v] : s.cpt.rows) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(KnowledgeBase, IndividualPoolIsSortedUnion) {
  KnowledgeBase kb;
  kb.types.push_back({"person", {"mary", "john"}});
  kb.types.push_back({"staff", {"john", "ann"}});
  kb.extra_individuals = {"e127"};
  EXPECT_EQ(kb.individual_pool(), (std::vector<std::string>{"ann", "e127", "john", "mary"}));
}

}  // namespace
}  // namespace schemanet
