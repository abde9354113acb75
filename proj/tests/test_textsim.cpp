#include <gtest/gtest.h>

#include <random>

#include "divlex/textsim.hpp"

using namespace divlex;
using namespace divlex::textsim;

namespace {

std::vector<std::string> numbered(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back("s" + std::to_string(i));
    return out;
}

/// Embeds "e<k>" as the k-th unit vector and anything else as zero.
class UnitProvider : public EmbeddingProvider {
public:
    std::size_t dim() const override { return 4; }
    std::vector<Embedding> embed_texts(std::span<const std::string> texts) const override {
        std::vector<Embedding> out;
        for (const auto& t : texts) {
            Embedding v(4, 0.0);
            if (t.size() == 2 && t[0] == 'e') v[static_cast<std::size_t>(t[1] - '0') % 4] = 1.0;
            out.push_back(v);
        }
        return out;
    }
};

}  // namespace

TEST(CswSlice, ShortWindowOverFiveSentences) {
    auto s = numbered(5);
    auto p = csw_slice(s, {3, 1});
    ASSERT_EQ(p.size(), 3u);
    EXPECT_EQ(p[0].sentences, (std::vector<std::string>{"s1", "s2", "s3"}));
    EXPECT_EQ(p[1].sentences, (std::vector<std::string>{"s2", "s3", "s4"}));
    EXPECT_EQ(p[2].sentences, (std::vector<std::string>{"s3", "s4", "s5"}));
}

TEST(CswSlice, SingleWindowPadded) {
    auto s = numbered(2);
    auto p = csw_slice(s, {3, 1});
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].sentences, (std::vector<std::string>{"s1", "s2", ""}));
}

TEST(CswSlice, DocumentWindowStopsAtLastSentence) {
    auto s = numbered(14);
    auto p = csw_slice(s, kDocWindow);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[1].sentences.front(), "s6");
    EXPECT_EQ(p[1].sentences[8], "s14");
    for (std::size_t i = 9; i < 13; ++i) EXPECT_EQ(p[1].sentences[i], "");
}

TEST(CswSlice, Errors) {
    std::vector<std::string> none;
    EXPECT_THROW(csw_slice(none, {3, 1}), EmptyText);
    auto s = numbered(3);
    EXPECT_THROW(csw_slice(s, {0, 1}), InvalidArgument);
    EXPECT_THROW(csw_slice(s, {3, 0}), InvalidArgument);
}

TEST(CswSlice, EverySentenceCoveredOnce) {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 40, w = 1 + rng() % 14, d = 1 + rng() % w;  // stride within the window
        auto s = numbered(n);
        auto p = csw_slice(s, {w, d});
        std::set<std::size_t> covered;
        for (std::size_t k = 0; k < p.size(); ++k) {
            ASSERT_EQ(p[k].sentences.size(), w);
            for (std::size_t i = 0; i < w; ++i) {
                const std::size_t pos = k * d + i;
                if (pos < n) {
                    EXPECT_EQ(p[k].sentences[i], s[pos]);
                    covered.insert(pos);
                } else {
                    EXPECT_EQ(p[k].sentences[i], "");
                }
            }
        }
        EXPECT_EQ(covered.size(), n);
        // The previous window must not already have reached the end.
        if (p.size() > 1) {
            EXPECT_LT((p.size() - 2) * d + w, n);
        }
    }
}

TEST(SimilarityVector, RowMaxOfMatrix) {
    std::vector<std::vector<double>> m{{0.1, 0.5, 0.2}, {0.9, 0.3, 0.4}};
    EXPECT_EQ(max_pool_rows(m), (std::vector<double>{0.5, 0.9}));
}

TEST(SimilarityVector, IdenticalPassageGivesOne) {
    HashingEmbedder e;
    std::vector<Passage> q{{{"the accused took the wallet", "", ""}}};
    std::vector<Passage> d{{{"unrelated words here", "", ""}}, {{"the accused took the wallet", "", ""}}};
    auto ts = similarity_vector(q, d, e);
    ASSERT_EQ(ts.size(), 1u);
    EXPECT_NEAR(ts[0], 1.0, 1e-12);
}

TEST(SimilarityVector, OrthogonalProviderGivesZeros) {
    UnitProvider u;
    std::vector<Passage> q{{{"e0"}}, {{"e1"}}};
    std::vector<Passage> d{{{"e2"}}, {{"e3"}}};
    EXPECT_EQ(similarity_vector(q, d, u), (std::vector<double>{0.0, 0.0}));
}

TEST(SimilarityVector, ZeroVectorCosineIsZero) {
    std::vector<double> z(4, 0.0), a{1, 0, 0, 0};
    EXPECT_EQ(cosine(z, a), 0.0);
    EXPECT_EQ(cosine(z, z), 0.0);
}

TEST(SimilarityVector, EntriesAreExactRowMaxima) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Embedding> q(1 + rng() % 6, Embedding(8)), d(1 + rng() % 6, Embedding(8));
        for (auto* side : {&q, &d}) {
            for (auto& v : *side) {
                for (auto& x : v) x = n01(rng);
            }
        }
        auto ts = similarity_vector(q, d);
        ASSERT_EQ(ts.size(), q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            double best = -2.0;
            for (const auto& dv : d) best = std::max(best, cosine(q[i], dv));
            EXPECT_EQ(ts[i], best);
            EXPECT_GE(ts[i], -1.0);
            EXPECT_LE(ts[i], 1.0);
        }
    }
}

TEST(PadFixed, BothEndsWithZeroCore) {
    std::vector<double> ts{0.3, 0.7};
    EXPECT_EQ(pad_fixed(ts, 8), (std::vector<double>{0.3, 0.7, 0, 0, 0, 0, 0.3, 0.7}));
    std::vector<double> one{0.4};
    EXPECT_EQ(pad_fixed(one, 2), (std::vector<double>{0.4, 0.4}));
    std::vector<double> long_ts(28, 0.1);
    EXPECT_THROW(pad_fixed(long_ts, 54), InputTooLong);
    EXPECT_EQ(pad_fixed(std::vector<double>(27, 0.1), 54).size(), 54u);
}

TEST(PadFixed, CopiesReadBackFromBothEnds) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> ts(1 + rng() % 27);
        for (auto& x : ts) x = std::uniform_real_distribution<double>(-1, 1)(rng);
        auto out = pad_fixed(ts);
        std::vector<double> head(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(ts.size()));
        std::vector<double> tail(out.end() - static_cast<std::ptrdiff_t>(ts.size()), out.end());
        EXPECT_EQ(head, ts);
        EXPECT_EQ(tail, ts);
        for (std::size_t i = ts.size(); i < out.size() - ts.size(); ++i) EXPECT_EQ(out[i], 0.0);
    }
}

TEST(HashingEmbedder, DeterministicAndNormalised) {
    HashingEmbedder a, b;
    auto x = a.embed_one("盗窃罪 theft of property");
    EXPECT_EQ(x, b.embed_one("盗窃罪 theft of property"));
    double norm = 0.0;
    for (double v : x) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    auto empty = a.embed_one("");
    EXPECT_TRUE(std::all_of(empty.begin(), empty.end(), [](double v) { return v == 0.0; }));
}

TEST(HashingEmbedder, BatchCompositionDoesNotMatter) {
    HashingEmbedder e(64);
    std::vector<std::string> batch{"alpha beta", "gamma delta", "alpha beta"};
    auto out = e.embed_texts(batch);
    EXPECT_EQ(out[0], out[2]);
    std::vector<std::string> single{"gamma delta"};
    EXPECT_EQ(e.embed_texts(single)[0], out[1]);
}
