#include <gtest/gtest.h>

#include <cmath>

#include "crowdval/error.hpp"
#include "crowdval/trust.hpp"
#include "oracles.hpp"

using namespace crowdval;

namespace {

// m seed pairs with alternating gold answers plus two ordinary pairs.
std::vector<AnnotationPair> seeded_pairs(std::size_t m) {
  std::vector<AnnotationPair> pairs;
  for (std::size_t i = 0; i < m; ++i) {
    Decision gold = i % 2 ? Decision::NotEquivalent : Decision::Equivalent;
    SeedPair s{"s" + std::to_string(i), "t" + std::to_string(i),
               gold == Decision::Equivalent ? Polarity::Positive : Polarity::Negative, Difficulty::Trivial, gold,
               SeedProvenance::FromNonDisputed};
    pairs.push_back({"seed" + std::to_string(i), s.source, s.target, PairKind::Seed, s});
  }
  pairs.push_back({"p1", "a", "b", PairKind::ReferenceOnly, std::nullopt});
  pairs.push_back({"p2", "c", "d", PairKind::MatcherOnly, std::nullopt});
  return pairs;
}

Decision flip(Decision d) { return d == Decision::Equivalent ? Decision::NotEquivalent : Decision::Equivalent; }

DecisionMap answers(const std::vector<AnnotationPair>& pairs, std::uint64_t correct_mask) {
  DecisionMap out;
  std::size_t i = 0;
  for (const auto& p : pairs) {
    if (p.is_seed()) {
      out[p.id] = (correct_mask >> i) & 1 ? p.seed->gold_answer : flip(p.seed->gold_answer);
      ++i;
    } else {
      out[p.id] = Decision::Equivalent;
    }
  }
  return out;
}

}  // namespace

TEST(Trust, PerfectUser) {
  auto pairs = seeded_pairs(4);
  auto t = trustworthiness("u", "task", pairs, answers(pairs, 0b1111));
  EXPECT_TRUE(t.complete);
  EXPECT_EQ(t.m, 4u);
  EXPECT_EQ(t.n, 4u);
  EXPECT_EQ(t.tau, 1.0);
}

TEST(Trust, SevenOfTen) {
  auto pairs = seeded_pairs(10);
  auto t = trustworthiness("u", "task", pairs, answers(pairs, 0b0001111111));
  EXPECT_EQ(t.n, 7u);
  EXPECT_EQ(t.tau, 0.7);
}

TEST(Trust, AllWrong) {
  auto pairs = seeded_pairs(4);
  auto t = trustworthiness("u", "task", pairs, answers(pairs, 0));
  EXPECT_EQ(t.tau, 0.0);
}

TEST(Trust, IncompleteHasNoTau) {
  auto pairs = seeded_pairs(4);
  auto d = answers(pairs, 0b1111);
  d["p2"] = Decision::NA;
  auto t = trustworthiness("u", "task", pairs, d);
  EXPECT_FALSE(t.complete);
  EXPECT_FALSE(t.tau);
  EXPECT_EQ(t.n, 4u);
  d.erase("p2");
  EXPECT_FALSE(trustworthiness("u", "task", pairs, d).complete);
}

TEST(Trust, NoSeedsUnavailable) {
  auto pairs = seeded_pairs(0);
  try {
    trustworthiness("u", "task", pairs, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TrustUnavailable);
  }
}

TEST(Trust, EnumeratedPatternsExact) {
  for (std::size_t m = 1; m <= 8; ++m) {
    auto pairs = seeded_pairs(m);
    for (std::uint64_t mask = 0; mask < (1u << m); ++mask) {
      auto t = trustworthiness("u", "task", pairs, answers(pairs, mask));
      std::size_t n = static_cast<std::size_t>(std::popcount(mask));
      ASSERT_EQ(t.n, n);
      ASSERT_EQ(*t.tau, static_cast<double>(n) / static_cast<double>(m));
    }
  }
}

TEST(Agreement, SinglePerfectVoter) {
  std::vector<Vote> v{{1.0, Decision::Equivalent}};
  auto s = agreement_score("q", v);
  EXPECT_EQ(s.raw_score, 1.0);
  EXPECT_EQ(s.normalized_share, 1.0);
  EXPECT_TRUE(accept(s, 0.5, true));
}

TEST(Agreement, ThreeVotersByHand) {
  std::vector<Vote> v{{1.0, Decision::Equivalent}, {0.5, Decision::Equivalent}, {0.5, Decision::NotEquivalent}};
  auto s = agreement_score("q", v);
  EXPECT_DOUBLE_EQ(s.raw_score, 0.5);
  EXPECT_DOUBLE_EQ(s.normalized_share, 0.75);
  EXPECT_EQ(s.n_users, 3u);
  EXPECT_EQ(s.equivalent_votes, 2u);
  EXPECT_FALSE(accept(s, 0.8, true));
  EXPECT_TRUE(accept(s, 0.7, true));
}

TEST(Agreement, AllNegative) {
  std::vector<Vote> v{{1.0, Decision::NotEquivalent}, {0.3, Decision::NotEquivalent}};
  auto s = agreement_score("q", v);
  EXPECT_EQ(s.raw_score, 0.0);
  EXPECT_EQ(s.normalized_share, 0.0);
}

TEST(Agreement, ZeroTrustEverywhere) {
  std::vector<Vote> v{{0.0, Decision::Equivalent}};
  auto s = agreement_score("q", v);
  EXPECT_EQ(s.normalized_share, 0.0);
  EXPECT_FALSE(accept(s, 0.5, true));
}

TEST(Agreement, Errors) {
  std::vector<Vote> none;
  std::vector<Vote> na{{1.0, Decision::NA}};
  std::vector<Vote> big{{1.5, Decision::Equivalent}};
  auto code = [](std::span<const Vote> v) {
    try {
      agreement_score("q", v);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code(none), ErrorCode::NoVotes);
  EXPECT_EQ(code(na), ErrorCode::BadRequest);
  EXPECT_EQ(code(big), ErrorCode::BadRequest);
}

TEST(Accept, UnweightedStrictShare) {
  std::vector<Vote> three_of_five;
  for (int i = 0; i < 5; ++i) three_of_five.push_back({1.0, i < 3 ? Decision::Equivalent : Decision::NotEquivalent});
  EXPECT_TRUE(accept(agreement_score("q", three_of_five), 0.5, false));
  std::vector<Vote> two_of_four;
  for (int i = 0; i < 4; ++i) two_of_four.push_back({1.0, i < 2 ? Decision::Equivalent : Decision::NotEquivalent});
  EXPECT_FALSE(accept(agreement_score("q", two_of_four), 0.5, false));
}

TEST(Majority, Ties) {
  std::vector<Decision> one{Decision::Equivalent};
  EXPECT_TRUE(unweighted_majority("q", one, 0.5));
  std::vector<Decision> tie(50, Decision::Equivalent);
  tie.insert(tie.end(), 50, Decision::NotEquivalent);
  EXPECT_FALSE(unweighted_majority("q", tie, 0.5));
  std::vector<Decision> win(51, Decision::Equivalent);
  win.insert(win.end(), 49, Decision::NotEquivalent);
  EXPECT_TRUE(unweighted_majority("q", win, 0.5));
}

TEST(Agreement, MatchesDirectEvaluation) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<Vote> v(1 + rng.uniform_index(50));
    for (auto& x : v) {
      x.tau = rng.uniform01();
      x.decision = rng.bernoulli(0.5) ? Decision::Equivalent : Decision::NotEquivalent;
    }
    auto got = agreement_score("q", v);
    auto want = oracle::direct_score(v);
    ASSERT_NEAR(got.raw_score, want.s, 1e-12);
    ASSERT_NEAR(got.normalized_share, want.w, 1e-12);
    ASSERT_EQ(got.equivalent_votes, want.equivalent);
  }
}

TEST(Agreement, PermutationInvariant) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<Vote> v(1 + rng.uniform_index(30));
    for (auto& x : v) {
      x.tau = rng.uniform01();
      x.decision = rng.bernoulli(0.5) ? Decision::Equivalent : Decision::NotEquivalent;
    }
    auto a = agreement_score("q", v);
    rng.shuffle(v);
    auto b = agreement_score("q", v);
    ASSERT_NEAR(a.raw_score, b.raw_score, 1e-12);
    ASSERT_NEAR(a.normalized_share, b.normalized_share, 1e-12);
  }
}

// W is unchanged by scaling every τ; with equal τ weighted and unweighted
// acceptance coincide.
TEST(Agreement, ScaleInvarianceAndEqualTrust) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<Vote> v(1 + rng.uniform_index(30));
    double c = 0.05 + 0.95 * rng.uniform01();
    for (auto& x : v) {
      x.tau = 0.1 + 0.9 * rng.uniform01();
      x.decision = rng.bernoulli(0.5) ? Decision::Equivalent : Decision::NotEquivalent;
    }
    auto scaled = v;
    for (auto& x : scaled) x.tau *= c;
    ASSERT_NEAR(agreement_score("q", v).normalized_share, agreement_score("q", scaled).normalized_share, 1e-12);

    auto equal = v;
    for (auto& x : equal) x.tau = c;
    auto s = agreement_score("q", equal);
    for (double theta : {0.5, 0.6, 0.75, 0.9}) ASSERT_EQ(accept(s, theta, true), accept(s, theta, false));
  }
}

// Raising one Equivalent voter's τ never lowers W.
TEST(Agreement, MonotoneInEquivalentTrust) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<Vote> v(2 + rng.uniform_index(20));
    for (auto& x : v) {
      x.tau = rng.uniform01();
      x.decision = rng.bernoulli(0.5) ? Decision::Equivalent : Decision::NotEquivalent;
    }
    v[0].decision = Decision::Equivalent;
    double before = agreement_score("q", v).normalized_share;
    v[0].tau = std::min(1.0, v[0].tau + 0.2);
    ASSERT_GE(agreement_score("q", v).normalized_share + 1e-12, before);
  }
}
