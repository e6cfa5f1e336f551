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

#include <algorithm>
#include <random>

#include "schemanet/inference.hpp"
#include "support/random_kb.hpp"

namespace schemanet {
namespace {

using testing::load_fixture;
using testing::with_members;

constexpr double kTol = 1e-9;

GroundNetwork chain() {
  NetworkBuilder b;
  b.add_root(NodeId(GroundAtom{"a", {}}), 0.3);
  b.add(NodeId(GroundAtom{"b", {}}), NodeKind::Chance, {"a"}, {0.2, 0.7});
  b.add(NodeId(GroundAtom{"c", {}}), NodeKind::Chance, {"b"}, {0.1, 0.6});
  return b.build();
}

ErrorCode error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidNetwork;
}

TEST(JointEnumerate, SingleRoot) {
  NetworkBuilder b;
  b.add_root(NodeId(GroundAtom{"fire", {}}), 0.01);
  const auto joint = joint_enumerate(b.build());
  EXPECT_EQ(joint.scope, std::vector<std::size_t>{0});
  ASSERT_EQ(joint.values.size(), 2u);
  EXPECT_NEAR(joint.values[0], 0.99, kTol);
  EXPECT_NEAR(joint.values[1], 0.01, kTol);
}

TEST(JointEnumerate, TwoNodeChain) {
  const auto net = ground(load_fixture("fire_smoke.skb"));
  ASSERT_EQ(net.name(0), "fire");
  const auto joint = joint_enumerate(net);
  // Bit 0 = fire, bit 1 = smoke.
  const std::vector<double> expected{0.891, 0.01, 0.009, 0.09};
  for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(joint.values[r], expected[r], kTol) << r;
}

TEST(JointEnumerate, SumsToOne) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto net = ground(testing::random_kb(rng));
    ASSERT_NEAR(joint_enumerate(net).sum(), 1.0, kTol);
  }
}

TEST(Factor, MultiplyAndSumOutMatchDirectSummation) {
  // f(A,B) over {0,1}, g(B,C) over {1,2}.
  const Factor f{{0, 1}, {0.1, 0.2, 0.3, 0.4}};
  const Factor g{{1, 2}, {0.5, 0.6, 0.7, 0.8}};
  const auto out = eliminate({f, g}, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].scope, (std::vector<std::size_t>{0, 2}));
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      double direct = 0.0;
      for (int b = 0; b < 2; ++b) direct += f.values[a | b << 1] * g.values[b | c << 1];
      EXPECT_NEAR(out[0].values[a | c << 1], direct, 1e-15);
    }
}

TEST(Factor, EliminatingTheOnlyVariableLeavesAUnitFactor) {
  const auto out = eliminate({Factor{{4}, {0.25, 0.75}}}, 4);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].scope.empty());
  EXPECT_NEAR(out[0].values.at(0), 1.0, 1e-15);
}

TEST(Factor, UntouchedFactorsComeFirst) {
  const Factor f{{0}, {0.5, 0.5}};
  const Factor g{{1}, {0.2, 0.8}};
  const auto out = eliminate({f, g}, 1);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].scope, f.scope);
  EXPECT_TRUE(out[1].scope.empty());
}

TEST(Factor, Errors) {
  EXPECT_EQ(error_of([] { eliminate({Factor{{0}, {0.5, 0.5}}}, 3); }), ErrorCode::VarNotInScope);
  EXPECT_EQ(error_of([] { sum_out(Factor{{0}, {0.5, 0.5}}, 3); }), ErrorCode::VarNotInScope);
}

TEST(EliminationOrder, ChainKeepsTheLeaf) {
  const auto net = chain();
  EXPECT_EQ(elimination_order(net, {2}), (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(elimination_order(net, {0, 1, 2}).empty());
}

TEST(EliminationOrder, FireAlarmCoversEverythingElse) {
  const auto net =
      ground(with_members(load_fixture("fire_alarm.skb"), "person", {"john", "mary"}));
  const std::size_t fire = net.index_of("fire");
  auto order = elimination_order(net, {fire});
  EXPECT_EQ(order.size(), 8u);
  EXPECT_EQ(std::count(order.begin(), order.end(), fire), 0);
  std::sort(order.begin(), order.end());
  EXPECT_EQ(std::adjacent_find(order.begin(), order.end()), order.end());
  EXPECT_EQ(elimination_order(net, {fire}), elimination_order(net, {fire}));
}

TEST(EliminationOrder, UnknownNode) {
  EXPECT_EQ(error_of([] { elimination_order(chain(), {9}); }), ErrorCode::UnknownNode);
}

TEST(Posterior, SmokeRaisesFire) {
  const auto net = ground(load_fixture("fire_smoke.skb"));
  const auto r = posterior(net, "fire", make_evidence(net, {{"smoke", true}}));
  EXPECT_NEAR(r.p_true, 0.09 / 0.099, kTol);
  EXPECT_NEAR(r.evidence_probability, 0.099, kTol);
  EXPECT_NEAR(posterior(net, "fire", {}).p_true, 0.1, kTol);
  EXPECT_NEAR(posterior(net, "smoke", {}).p_true, 0.099, kTol);
}

TEST(Posterior, ObservedQuery) {
  const auto net = ground(load_fixture("fire_smoke.skb"));
  EXPECT_EQ(posterior(net, "fire", make_evidence(net, {{"fire", true}})).p_true, 1.0);
  EXPECT_EQ(posterior(net, "fire", make_evidence(net, {{"fire", false}})).p_true, 0.0);
}

TEST(Posterior, OrNodeOverTwoFairCoins) {
  NetworkBuilder b;
  b.add_root(NodeId(GroundAtom{"h", {"x"}}), 0.5);
  b.add_root(NodeId(GroundAtom{"h", {"y"}}), 0.5);
  b.add(NodeId(GroundAtom{"any", {}}), NodeKind::DetOr, {"h(x)", "h(y)"},
        deterministic_cpt(NodeKind::DetOr, 2));
  const auto net = b.build();
  EXPECT_NEAR(posterior(net, "any", {}).p_true, 0.75, kTol);
  EXPECT_NEAR(enumeration_posterior(net, net.index_of("any"), {}).p_true, 0.75, kTol);
}

TEST(Posterior, SensorsThroughExistential) {
  const auto net = ground(with_members(load_fixture("impossible.skb"), "sensor", {"s1", "s2"}));
  EXPECT_NEAR(posterior(net, "alarm", {}).p_true, 1.0 - 0.7 * 0.7, kTol);
  const auto r = posterior(net, "fires(s1)", make_evidence(net, {{"alarm", true}}));
  EXPECT_NEAR(r.p_true, 0.3 / 0.51, kTol);
}

TEST(Posterior, BurglaryMatchesEnumeration) {
  const auto net =
      ground(with_members(load_fixture("burglary.skb"), "witness", {"watson", "gibbons"}));
  const auto ev = make_evidence(net, {{"testimony(watson)", true}, {"testimony(gibbons)", true}});
  for (std::size_t q = 0; q < net.size(); ++q) {
    if (ev.contains(q)) continue;
    const auto ve = posterior(net, q, ev);
    const auto en = enumeration_posterior(net, q, ev);
    EXPECT_NEAR(ve.p_true, en.p_true, kTol) << net.name(q);
    EXPECT_NEAR(ve.evidence_probability, en.evidence_probability, kTol);
  }
  // Two independent testimonies say more than one.
  const auto one = make_evidence(net, {{"testimony(watson)", true}});
  EXPECT_GT(posterior(net, "burglary", ev).p_true, posterior(net, "burglary", one).p_true);
}

TEST(Posterior, ImpossibleEvidence) {
  const auto net = ground(load_fixture("impossible.skb"));
  const auto ev = make_evidence(net, {{"alarm", true}});
  const std::size_t q = net.index_of("exists(sensor, fires/1)");
  EXPECT_EQ(error_of([&] { posterior(net, q, ev); }), ErrorCode::ImpossibleEvidence);
  EXPECT_EQ(error_of([&] { enumeration_posterior(net, q, ev); }), ErrorCode::ImpossibleEvidence);
}

TEST(Posterior, UnknownNames) {
  const auto net = ground(load_fixture("fire_smoke.skb"));
  EXPECT_EQ(error_of([&] { posterior(net, "smok", {}); }), ErrorCode::UnknownNode);
  EXPECT_EQ(error_of([&] { make_evidence(net, {{"fyre", true}}); }), ErrorCode::UnknownNode);
}

TEST(Posterior, CustomOrders) {
  const auto net = chain();
  PosteriorOptions opts;
  opts.prune_barren = false;
  opts.order = std::vector<std::size_t>{1, 2};
  const double expected = posterior(net, std::size_t{0}, {}).p_true;
  EXPECT_NEAR(posterior(net, std::size_t{0}, {}, opts).p_true, expected, kTol);
  opts.order = std::vector<std::size_t>{1};
  EXPECT_EQ(error_of([&] { posterior(net, std::size_t{0}, {}, opts); }),
            ErrorCode::InvalidEliminationOrder);
}

TEST(Enumeration, RefusesLargeNetworks) {
  NetworkBuilder b;
  for (int i = 0; i < 26; ++i) b.add_root(NodeId(GroundAtom{"n", {"c" + std::to_string(i)}}), 0.5);
  const auto net = b.build();
  EXPECT_EQ(error_of([&] { joint_enumerate(net); }), ErrorCode::TooLargeForOracle);
  EXPECT_EQ(error_of([&] { enumeration_posterior(net, 0, {}); }), ErrorCode::TooLargeForOracle);
  EXPECT_NEAR(posterior(net, std::size_t{0}, {}).p_true, 0.5, kTol);
}

// ---------------------------------------------------------------------------
// Properties

TEST(InferenceProperties, OrderDoesNotMatter) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 150; ++i) {
    const auto net = ground(testing::random_kb(rng));
    const auto q = testing::random_query(rng, net);
    const auto base = posterior(net, q.query, q.evidence);
    std::vector<std::size_t> order(net.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    for (int shuffle = 0; shuffle < 3; ++shuffle) {
      std::shuffle(order.begin(), order.end(), rng);
      PosteriorOptions opts;
      opts.prune_barren = shuffle % 2 == 0;
      opts.order = order;
      const auto r = posterior(net, q.query, q.evidence, opts);
      ASSERT_NEAR(r.p_true, base.p_true, kTol);
      ASSERT_NEAR(r.evidence_probability, base.evidence_probability, kTol);
    }
  }
}

TEST(InferenceProperties, BarrenNodesDoNotMatter) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 150; ++i) {
    const auto net = ground(testing::random_kb(rng));
    const auto q = testing::random_query(rng, net);
    const auto pruned = posterior(net, q.query, q.evidence);
    const auto full = posterior(net, q.query, q.evidence, {.prune_barren = false, .order = {}});
    ASSERT_NEAR(pruned.p_true, full.p_true, kTol);
  }
}

TEST(InferenceProperties, CombinationNodesAgreeWithTheirParents) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng() % 6;
    NetworkBuilder b;
    std::vector<std::string> parents;
    double none = 1.0, all = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double p = unit(rng);
      none *= 1.0 - p;
      all *= p;
      GroundAtom a{"h", {"c" + std::to_string(k)}};
      parents.push_back(a.to_string());
      b.add_root(NodeId(a), p);
    }
    b.add(NodeId(GroundAtom{"some", {}}), NodeKind::DetOr, parents,
          deterministic_cpt(NodeKind::DetOr, n));
    b.add(NodeId(GroundAtom{"every", {}}), NodeKind::DetAnd, parents,
          deterministic_cpt(NodeKind::DetAnd, n));
    const auto net = b.build();
    ASSERT_NEAR(posterior(net, "some", {}).p_true, 1.0 - none, kTol);
    ASSERT_NEAR(posterior(net, "every", {}).p_true, all, kTol);
    // Observing the parents pins the combination exactly.
    Evidence ev;
    bool any = false;
    for (const auto& p : parents) {
      const bool v = rng() % 2;
      any |= v;
      ev[net.index_of(p)] = v;
    }
    ASSERT_EQ(posterior(net, "some", ev).p_true, any ? 1.0 : 0.0);
  }
}

}  // namespace
}  // namespace schemanet
