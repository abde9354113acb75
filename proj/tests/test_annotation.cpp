#include <gtest/gtest.h>

#include <random>

#include "divlex/annotation.hpp"

using namespace divlex;
using namespace divlex::annotation;

namespace {

/// Returns a fixed prediction regardless of the text.
class FixedPredictor : public ChargePredictor {
public:
    explicit FixedPredictor(std::vector<ScoredCharge> p) : p_(std::move(p)) {}
    std::vector<ScoredCharge> predict(std::string_view) const override { return p_; }

private:
    std::vector<ScoredCharge> p_;
};

ChargeVocabulary vocab10() {
    std::vector<std::string> names;
    for (int i = 0; i < 10; ++i) names.push_back("charge" + std::string(1, static_cast<char>('a' + i)));
    return ChargeVocabulary(names);
}

FixedPredictor top_one_to_five() {
    return FixedPredictor({{1, 0.3}, {2, 0.2}, {3, 0.2}, {4, 0.2}, {5, 0.1}, {6, 0.0}});
}

}  // namespace

TEST(CandidateChargeSet, UnionOfNamesAndPrediction) {
    auto v = vocab10();
    ChargeNameMatcher m(v);
    auto pred = top_one_to_five();
    EXPECT_EQ(candidate_charge_set("the accused committed chargeh yesterday", m, pred), (std::set<ChargeId>{1, 2, 3, 4, 5, 7}));
    EXPECT_EQ(candidate_charge_set("nothing relevant", m, pred), (std::set<ChargeId>{1, 2, 3, 4, 5}));
    EXPECT_EQ(candidate_charge_set("a case of charged only", m, pred).size(), 5u);
}

TEST(CandidateChargeSet, ShortPredictionIsUnavailable) {
    auto v = vocab10();
    ChargeNameMatcher m(v);
    FixedPredictor short_pred({{1, 1.0}});
    EXPECT_THROW(candidate_charge_set("x", m, short_pred), PredictorUnavailable);
}

TEST(IntentDistribution, LevelsMapToUniformValues) {
    SortedPreference p{{{2, 3}, {1}, {5, 6}}, {4}};
    auto d = intent_distribution(p);
    EXPECT_EQ(d.at(2), 1.0);
    EXPECT_EQ(d.at(3), 1.0);
    EXPECT_EQ(d.at(1), 2.0 / 3.0);
    EXPECT_EQ(d.at(5), 1.0 / 3.0);
    EXPECT_EQ(d.at(6), 1.0 / 3.0);
    EXPECT_EQ(d.at(4), 0.0);
}

TEST(IntentDistribution, SingleLevelAndUnselectedOnly) {
    auto all = intent_distribution(SortedPreference{{{1, 2, 3}}, {}});
    for (const auto& [c, p] : all) EXPECT_EQ(p, 1.0);
    auto none = intent_distribution(SortedPreference{{}, {1, 2}});
    EXPECT_EQ(none, (IntentMap{{1, 0.0}, {2, 0.0}}));
    EXPECT_THROW(intent_distribution(SortedPreference{}), EmptyPreference);
    EXPECT_THROW(intent_distribution(SortedPreference{{{1}, {1}}, {}}), InvalidArgument);
    EXPECT_THROW(intent_distribution(SortedPreference{{{1}}, {1}}), InvalidArgument);
}

TEST(IntentDistribution, ValuesOnGridAndNonIncreasing) {
    std::mt19937 rng(6);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ChargeId> charges(1 + rng() % 10);
        std::iota(charges.begin(), charges.end(), 0);
        std::shuffle(charges.begin(), charges.end(), rng);
        SortedPreference p;
        std::size_t i = 0;
        while (i < charges.size()) {
            if (rng() % 4 == 0) {
                p.unselected.insert(charges[i++]);
                continue;
            }
            std::set<ChargeId> level;
            const std::size_t take = 1 + rng() % 3;
            for (std::size_t t = 0; t < take && i < charges.size(); ++t) level.insert(charges[i++]);
            p.levels.push_back(level);
        }
        auto d = intent_distribution(p);
        const double k = static_cast<double>(p.levels.size());
        double prev = 2.0;
        for (const auto& level : p.levels) {
            const double v = d.at(*level.begin());
            EXPECT_LT(v, prev);
            prev = v;
            for (auto c : level) EXPECT_EQ(d.at(c), v);
            EXPECT_NEAR(v * k, std::round(v * k), 1e-12);
        }
        for (auto c : p.unselected) EXPECT_EQ(d.at(c), 0.0);
    }
}

TEST(AggregateIntent, ArithmeticMean) {
    std::vector<IntentMap> two{{{1, 1.0}}, {{1, 0.0}}};
    EXPECT_EQ(aggregate_intent(two), (IntentMap{{1, 0.5}}));
    std::vector<IntentMap> one{{{1, 0.25}, {2, 1.0}}};
    EXPECT_EQ(aggregate_intent(one), one.front());
    std::vector<IntentMap> three{{{1, 1.0}, {2, 0.0}}, {{1, 2.0 / 3}, {2, 1.0 / 3}}, {{1, 1.0 / 3}, {2, 2.0 / 3}}};
    auto m = aggregate_intent(three);
    EXPECT_NEAR(m.at(1), 2.0 / 3, 1e-12);
    EXPECT_NEAR(m.at(2), 1.0 / 3, 1e-12);
}

TEST(AggregateIntent, Errors) {
    std::vector<IntentMap> none;
    EXPECT_THROW(aggregate_intent(none), EmptyInput);
    std::vector<IntentMap> mismatched{{{1, 1.0}}, {{2, 1.0}}};
    EXPECT_THROW(aggregate_intent(mismatched), MismatchedKeys);
}

TEST(AggregateIntent, MeanOfConstantsIsTheConstant) {
    std::vector<IntentMap> same(5, IntentMap{{3, 0.4}, {7, 0.9}});
    auto m = aggregate_intent(same);
    EXPECT_NEAR(m.at(3), 0.4, 1e-12);
    EXPECT_NEAR(m.at(7), 0.9, 1e-12);
}

TEST(MedianLabel, LowerMedian) {
    EXPECT_EQ(median_label({1, 2, 3}), 2);
    EXPECT_EQ(median_label({0, 0, 3}), 0);
    EXPECT_EQ(median_label({2, 3}), 2);
    EXPECT_THROW(median_label({}), EmptyInput);
}

TEST(MedianLabel, PermutationInvariantWithinRange) {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<int> g(1 + rng() % 7);
        for (auto& x : g) x = static_cast<int>(rng() % 4);
        const int m = median_label(g);
        std::shuffle(g.begin(), g.end(), rng);
        EXPECT_EQ(median_label(g), m);
        EXPECT_GE(m, *std::min_element(g.begin(), g.end()));
        EXPECT_LE(m, *std::max_element(g.begin(), g.end()));
    }
}

TEST(TripleFilter, AllThreeConditions) {
    QueryCase q;
    q.intent_dist = {{1, 0.5}, {2, 0.0}, {3, 1.0}};
    CandidateDoc d;
    d.charges = {1, 2};
    d.query_relevance = 2;
    EXPECT_TRUE(triple_needs_annotation(q, 1, d));
    EXPECT_FALSE(triple_needs_annotation(q, 2, d));
    EXPECT_FALSE(triple_needs_annotation(q, 3, d));
    d.query_relevance = 0;
    EXPECT_FALSE(triple_needs_annotation(q, 1, d));
}

TEST(TripleFilter, BreakingAConditionNeverEnables) {
    for (int mask = 0; mask < 8; ++mask) {
        QueryCase q;
        q.intent_dist = {{1, (mask & 1) ? 0.7 : 0.0}};
        CandidateDoc d;
        d.query_relevance = (mask & 2) ? 1 : 0;
        if (mask & 4) d.charges = {1};
        EXPECT_EQ(triple_needs_annotation(q, 1, d), mask == 7);
    }
}

TEST(Agreement, IdenticalAnnotators) {
    std::vector<std::vector<int>> labels{{0, 1, 2, 3, 1}, {0, 1, 2, 3, 1}};
    std::vector<std::vector<std::vector<double>>> ranks{{{3, 2, 1}, {1, 0.5, 0}}, {{3, 2, 1}, {1, 0.5, 0}}};
    auto r = agreement(labels, ranks);
    EXPECT_EQ(r.kappa(0, 1), 1.0);
    EXPECT_EQ(r.tau(0, 1), 1.0);
    EXPECT_EQ(r.tau(1, 0), 1.0);
    EXPECT_THROW(r.kappa(0, 0), InvalidArgument);
}

TEST(Agreement, ReversedRankingsAndChanceKappa) {
    std::vector<double> x{1, 2, 3, 4}, y{4, 3, 2, 1};
    EXPECT_EQ(kendall_tau_b(x, y), -1.0);
    std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    EXPECT_EQ(cohen_kappa(a, b), 0.0);
}

TEST(Agreement, SymmetricInAnnotatorOrder) {
    std::mt19937 rng(10);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> a(5 + rng() % 10), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<int>(rng() % 4);
            b[i] = static_cast<int>(rng() % 4);
        }
        EXPECT_DOUBLE_EQ(cohen_kappa(a, b), cohen_kappa(b, a));
        std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
        auto t1 = kendall_tau_b(x, y), t2 = kendall_tau_b(y, x);
        if (std::isnan(t1)) {
            EXPECT_TRUE(std::isnan(t2));
        } else {
            EXPECT_DOUBLE_EQ(t1, t2);
        }
    }
}

TEST(Agreement, NeedsTwoAnnotators) {
    std::vector<std::vector<int>> one{{1, 2}};
    EXPECT_THROW(agreement(one, {}), InsufficientAnnotators);
}

TEST(Agreement, FleissOnPerfectAgreement) {
    std::vector<std::vector<int>> labels{{0, 1, 2}, {0, 1, 2}, {0, 1, 2}};
    EXPECT_NEAR(fleiss_kappa(labels), 1.0, 1e-12);
}

TEST(Agreement, TsvHasHeaderAndPairs) {
    std::vector<std::vector<int>> labels{{0, 1, 1}, {0, 1, 0}, {1, 1, 0}};
    std::map<std::string, AgreementReport> reps{{"G1", agreement(labels, {}, {"A", "B", "C"})}};
    std::ostringstream out;
    write_agreement_tsv(out, reps);
    const auto s = out.str();
    EXPECT_EQ(s.rfind("group\tannotator_a\tannotator_b\tcohen_kappa\tkendall_tau_b\n", 0), 0u);
    EXPECT_NE(s.find("G1\tA\tB\t"), std::string::npos);
    EXPECT_NE(s.find("G1\t*\t*\t"), std::string::npos);
}
