#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cofigel/rating_matrix.hpp"
#include "test_support.hpp"

using namespace cofigel;
using namespace cofigel::testing;

namespace {

UserId U(int v) { return UserId{v}; }
ItemId I(int v) { return ItemId{v}; }

}  // namespace

TEST(RatingMatrixTable1, RanksOfTheTwoCandidates) {
  const auto m = to_matrix(table1());
  EXPECT_NEAR(*m.rank(U(4), I(1)), 1.3032, 5e-3);
  EXPECT_NEAR(*m.rank(U(4), I(3)), 0.7071, 5e-3);
}

TEST(RatingMatrixTable1, CoverageGainsOfTheTwoCandidates) {
  const auto m = to_matrix(table1());
  EXPECT_EQ(m.coverage_gain(U(4), I(1)), 2u);
  EXPECT_EQ(m.coverage_gain(U(4), I(3)), 4u);
}

TEST(RatingMatrixTable1, CosineValues) {
  const auto m = to_matrix(table1());
  EXPECT_NEAR(m.similarity(I(1), I(2)), 1.0 / (std::sqrt(5.0) * std::sqrt(2.0)), 1e-6);
  EXPECT_NEAR(m.similarity(I(1), I(6)), 3.0 / (std::sqrt(5.0) * std::sqrt(4.0)), 1e-6);
}

TEST(RatingMatrixTable1, StatusPattern) {
  const auto m = to_matrix(table1());
  // r rated, p predicted, x unpredictable
  const char* pattern[7] = {"rpxxpp", "rpxxpp", "rrxppr", "prprrr", "xprrpp", "rpxprr", "rrxprr"};
  for (int u = 1; u <= 7; ++u) {
    for (int i = 1; i <= 6; ++i) {
      const char c = pattern[u - 1][i - 1];
      const auto want = c == 'r' ? EntryStatus::rated : c == 'p' ? EntryStatus::predicted : EntryStatus::unpredictable;
      EXPECT_EQ(m.status(U(u), I(i)), want) << "u" << u << " i" << i;
    }
  }
  EXPECT_EQ(m.rated_count(), 18u);
  std::size_t covered = 0;
  for (int u = 1; u <= 7; ++u) {
    for (int i = 1; i <= 6; ++i) covered += m.status(U(u), I(i)) != EntryStatus::unpredictable;
  }
  EXPECT_EQ(covered, 34u);
  EXPECT_NEAR(static_cast<double>(covered) / 42.0, 0.810, 1e-3);
}

TEST(RatingMatrixTable1, NoCoRatingPathIsUnpredictable) {
  const auto m = to_matrix(table1());
  EXPECT_FALSE(m.rank(U(5), I(1)).has_value());
  EXPECT_EQ(m.entry(U(5), I(1), 10).status, EntryStatus::unpredictable);
}

TEST(RatingMatrixTable1, RatingI3AtU4MakesThreeCellsPredictable) {
  auto m = to_matrix(table1());
  for (int v : {3, 6, 7}) EXPECT_EQ(m.status(U(v), I(3)), EntryStatus::unpredictable);
  m.apply_rating(U(4), I(3), Rating::positive, 1.0);
  for (int v : {3, 6, 7}) EXPECT_EQ(m.status(U(v), I(3)), EntryStatus::predicted);
  for (int v : {1, 2}) EXPECT_EQ(m.status(U(v), I(3)), EntryStatus::unpredictable);
}

TEST(RatingMatrix, SimilarityIsSymmetricAndBounded) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto d = random_dense(rng);
    const auto m = to_matrix(d);
    for (int i = 1; i <= d.items; ++i) {
      for (int j = 1; j <= d.items; ++j) {
        const double s = m.similarity(I(i), I(j));
        EXPECT_EQ(s, m.similarity(I(j), I(i)));
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0 + 1e-12);
      }
    }
  }
}

TEST(RatingMatrix, ItemWithoutPositivesHasZeroSimilarity) {
  Dense d(3, 2);
  d.at(1, 1) = 0;
  d.at(1, 2) = 1;
  const auto m = to_matrix(d);
  EXPECT_EQ(m.similarity(I(1), I(2)), 0.0);
  EXPECT_EQ(m.similarity(I(1), I(1)), 0.0);
  EXPECT_EQ(m.similarity(I(2), I(2)), 1.0);
}

TEST(RatingMatrix, Preconditions) {
  auto m = to_matrix(table1());
  EXPECT_THROW(m.rank(U(1), I(1)), UsageError);
  EXPECT_THROW(m.coverage_gain(U(1), I(1)), UsageError);
  EXPECT_THROW(m.predict_user(U(1), 0), UsageError);
  EXPECT_THROW(m.apply_rating(U(1), I(1), Rating::positive, 2.0), UsageError);
  EXPECT_THROW(m.rank(U(99), I(1)), UsageError);
  EXPECT_THROW(m.similarity(I(1), I(99)), UsageError);
}

TEST(RatingMatrix, EmptyMatrixPredictsNothing) {
  const auto m = to_matrix(Dense(4, 4));
  for (int u = 1; u <= 4; ++u) {
    EXPECT_TRUE(m.predict_user(U(u), 10).empty());
    for (int i = 1; i <= 4; ++i) EXPECT_EQ(m.status(U(u), I(i)), EntryStatus::unpredictable);
  }
}

TEST(RatingMatrix, PredictUserOrderAndLabels) {
  const auto m = to_matrix(table1());
  const auto p = m.predict_user(U(4), 1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].item, I(1));
  EXPECT_EQ(p[0].label, Rating::positive);
  EXPECT_EQ(p[1].item, I(3));
  EXPECT_EQ(p[1].label, Rating::negative);
  EXPECT_EQ(p[0].rank, *m.rank(U(4), I(1)));
  EXPECT_EQ(p[1].rank, *m.rank(U(4), I(3)));
}

TEST(RatingMatrix, EqualRanksBreakTiesByItemId) {
  Dense d(2, 3);
  d.at(1, 1) = 1;
  d.at(2, 1) = 1;
  d.at(2, 2) = 1;
  d.at(2, 3) = 1;
  // u1 sees i2 and i3 with the same rank.
  const auto m = to_matrix(d);
  const auto p = m.predict_user(U(1), 1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].rank, p[1].rank);
  EXPECT_EQ(p[0].item, I(2));
  EXPECT_TRUE(m.predicted_positive(U(1), I(2), 1));
  EXPECT_FALSE(m.predicted_positive(U(1), I(3), 1));
}

TEST(RatingMatrixOracle, MatchesBruteForceOnRandomMatrices) {
  std::mt19937_64 rng(20240601);
  for (int t = 0; t < 250; ++t) {
    const auto d = random_dense(rng);
    const auto m = to_matrix(d);
    const std::size_t k = 1 + rng() % 4;
    for (int i = 1; i <= d.items; ++i) {
      for (int j = 1; j <= d.items; ++j) {
        ASSERT_NEAR(m.similarity(I(i), I(j)), oracle::sim(d, i, j), 1e-9);
      }
      std::size_t g_plus = 0;
      for (int u = 1; u <= d.users; ++u) {
        if (d.at(u, i) >= 0) {
          ASSERT_EQ(m.status(U(u), I(i)), EntryStatus::rated);
          continue;
        }
        const double want = oracle::rank(d, u, i);
        const auto got = m.rank(U(u), I(i));
        ASSERT_EQ(got.has_value(), want > 0.0) << "trial " << t;
        if (got) {
          ASSERT_NEAR(*got, want, 1e-9);
        }
        ASSERT_EQ(m.is_predictable(U(u), I(i)), oracle::predictable(d, u, i));
        ASSERT_EQ(m.coverage_gain(U(u), I(i)), oracle::coverage_gain(d, u, i)) << "trial " << t;
        const bool top = oracle::top_k(d, u, k).contains(i);
        ASSERT_EQ(m.predicted_positive(U(u), I(i), k), top) << "trial " << t;
        g_plus += top;
      }
      ASSERT_EQ(m.positive_predictions(I(i), k), g_plus);
    }
  }
}

TEST(RatingMatrixOracle, BatchRanksAreBitIdenticalToDirectRanks) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto d = random_dense(rng, 12, 15);
    const auto m = to_matrix(d);
    for (int u = 1; u <= d.users; ++u) {
      for (const auto& p : m.predict_user(U(u), 3)) {
        ASSERT_EQ(p.rank, *m.rank(U(u), p.item));
      }
    }
  }
}

namespace {

RatingMatrix random_timed(std::mt19937_64& rng, int users, int items) {
  std::vector<UserId> us;
  std::vector<ItemId> is;
  for (int u = 1; u <= users; ++u) us.emplace_back(u);
  for (int i = 1; i <= items; ++i) is.emplace_back(i);
  RatingMatrix m(us, is);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int u = 1; u <= users; ++u) {
    for (int i = 1; i <= items; ++i) {
      if (unit(rng) < 0.3) {
        // Few distinct timestamps so that conflicting equal-time entries occur.
        m.apply_rating(U(u), I(i), unit(rng) < 0.5 ? Rating::positive : Rating::negative,
                       static_cast<double>(rng() % 3));
      }
    }
  }
  return m;
}

}  // namespace

TEST(RatingMatrixMerge, CommutativeAssociativeIdempotent) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_timed(rng, 6, 6);
    const auto b = random_timed(rng, 6, 6);
    const auto c = random_timed(rng, 6, 6);
    EXPECT_TRUE(same_ratings(merge(a, b), merge(b, a)));
    EXPECT_TRUE(same_ratings(merge(merge(a, b), c), merge(a, merge(b, c))));
    EXPECT_TRUE(same_ratings(merge(a, a), a));
    auto ab = merge(a, b);
    EXPECT_FALSE(ab.merge_from(b));
    EXPECT_FALSE(ab.merge_from(a));
  }
}

TEST(RatingMatrixMerge, EarlierTimestampWinsThenLowerValue) {
  const std::vector<UserId> us{U(1)};
  const std::vector<ItemId> is{I(1)};
  RatingMatrix a(us, is), b(us, is);
  a.apply_rating(U(1), I(1), Rating::positive, 5.0);
  b.apply_rating(U(1), I(1), Rating::negative, 3.0);
  EXPECT_EQ(merge(a, b).rated(U(1), I(1))->value, Rating::negative);
  RatingMatrix c(us, is), e(us, is);
  c.apply_rating(U(1), I(1), Rating::positive, 3.0);
  e.apply_rating(U(1), I(1), Rating::negative, 3.0);
  EXPECT_EQ(merge(c, e).rated(U(1), I(1))->value, Rating::negative);
  EXPECT_EQ(merge(e, c).rated(U(1), I(1))->value, Rating::negative);
}

TEST(RatingMatrixMerge, DifferentUniversesAreUnited) {
  RatingMatrix a(std::vector<UserId>{U(1), U(2)}, std::vector<ItemId>{I(1)});
  RatingMatrix b(std::vector<UserId>{U(3), U(2)}, std::vector<ItemId>{I(2), I(1)});
  a.apply_rating(U(1), I(1), Rating::positive, 0.0);
  b.apply_rating(U(3), I(2), Rating::positive, 1.0);
  b.apply_rating(U(2), I(1), Rating::negative, 1.0);
  const auto ab = merge(a, b);
  const auto ba = merge(b, a);
  EXPECT_TRUE(same_ratings(ab, ba));
  EXPECT_EQ(ab.users(), (std::vector<UserId>{U(1), U(2), U(3)}));
  EXPECT_EQ(ab.items(), (std::vector<ItemId>{I(1), I(2)}));
  EXPECT_EQ(ab.rated_count(), 3u);
}

TEST(RatingMatrixMerge, MergeEqualsRatingTheUnion) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    auto d = random_dense(rng, 8, 8);
    Dense left(d.users, d.items), right(d.users, d.items);
    for (int u = 1; u <= d.users; ++u) {
      for (int i = 1; i <= d.items; ++i) {
        if (d.at(u, i) < 0) continue;
        (rng() % 2 ? left : right).at(u, i) = d.at(u, i);
      }
    }
    EXPECT_TRUE(same_ratings(merge(to_matrix(left), to_matrix(right)), to_matrix(d)));
  }
}
