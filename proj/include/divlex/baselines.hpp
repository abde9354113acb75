#pragma once

// Non-learned rankers: BM25 over a candidate pool, maximal marginal
// relevance, and IA-select (intent-aware greedy selection).

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "divlex/corpus.hpp"
#include "divlex/error.hpp"
#include "divlex/predictor.hpp"
#include "divlex/textsim.hpp"

namespace divlex::ranking {

class EmptyQuery : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct ScoredDoc {
    DocId id;
    double score = 0.0;
    bool operator==(const ScoredDoc&) const = default;
};

/// Descending score, ties by ascending id.
inline void sort_by_score(std::vector<ScoredDoc>& docs) {
    std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

inline std::vector<DocId> ids_of(const std::vector<ScoredDoc>& docs) {
    std::vector<DocId> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(d.id);
    return out;
}

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

/// Lower-cased alphanumeric words; non-ASCII code points are single tokens.
class WhitespaceTokenizer : public Tokenizer {
public:
    std::vector<std::string> tokenize(std::string_view text) const override { return word_tokens(text); }
};

/// Overlapping code-point n-grams with whitespace removed; suited to
/// unsegmented CJK text.
class CharNGramTokenizer : public Tokenizer {
public:
    explicit CharNGramTokenizer(std::size_t n = 2) : n_(n) {
        if (n_ == 0) throw InvalidArgument("n-gram size must be positive");
    }

    std::vector<std::string> tokenize(std::string_view text) const override {
        std::vector<std::string> chars;
        for (std::size_t i = 0; i < text.size();) {
            auto c = static_cast<unsigned char>(text[i]);
            std::size_t len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
            len = std::min(len, text.size() - i);
            if (!(len == 1 && std::isspace(c))) chars.emplace_back(text.substr(i, len));
            i += len;
        }
        std::vector<std::string> out;
        for (std::size_t i = 0; i + n_ <= chars.size(); ++i) {
            std::string g;
            for (std::size_t k = 0; k < n_; ++k) g += chars[i + k];
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    std::size_t n_;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct TokenizedDoc {
    DocId id;
    std::vector<std::string> tokens;
};

/// Okapi BM25 with collection statistics taken from the candidate pool.
/// idf = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays positive for
/// terms present in every document. Query terms count with multiplicity.
inline std::vector<ScoredDoc> bm25_rank(std::span<const std::string> query, std::span<const TokenizedDoc> docs,
                                        Bm25Params params = {}) {
    if (query.empty()) throw EmptyQuery("BM25 query has no tokens");
    const double n = static_cast<double>(docs.size());
    double avgdl = 0.0;
    std::vector<std::unordered_map<std::string, double>> tf(docs.size());
    std::unordered_map<std::string, double> df;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        avgdl += static_cast<double>(docs[i].tokens.size());
        for (const auto& t : docs[i].tokens) tf[i][t] += 1.0;
        for (const auto& [t, ignored] : tf[i]) df[t] += 1.0;
    }
    if (!docs.empty()) avgdl /= n;
    std::vector<ScoredDoc> out;
    out.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const double dl = static_cast<double>(docs[i].tokens.size());
        const double norm = avgdl > 0.0 ? params.k1 * (1.0 - params.b + params.b * dl / avgdl) : params.k1;
        double s = 0.0;
        for (const auto& t : query) {
            auto it = tf[i].find(t);
            if (it == tf[i].end()) continue;
            const double f = it->second;
            const double d = df[t];
            const double idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
            s += idf * f * (params.k1 + 1.0) / (f + norm);
        }
        out.push_back({docs[i].id, s});
    }
    sort_by_score(out);
    return out;
}

/// Greedy maximal marginal relevance. Each step picks
/// argmax (1 - lambda) * rel(d) - lambda * mean_{s in selected} sim(d, s);
/// the first pick is pure relevance. Ties go to the smaller id.
inline std::vector<DocId> mmr_rank(std::span<const DocId> ids, std::span<const double> relevance,
                                   const std::function<double(std::size_t, std::size_t)>& similarity, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("MMR lambda must lie in [0,1]");
    if (ids.size() != relevance.size()) throw InvalidArgument("ids and relevance differ in length");
    const std::size_t n = ids.size();
    std::vector<bool> used(n, false);
    std::vector<double> sim_sum(n, 0.0);
    std::vector<DocId> out;
    out.reserve(n);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double score = relevance[i];
            if (step > 0) score = (1.0 - lambda) * relevance[i] - lambda * sim_sum[i] / static_cast<double>(step);
            if (best == n || score > best_score || (score == best_score && ids[i] < ids[best])) {
                best = i;
                best_score = score;
            }
        }
        used[best] = true;
        out.push_back(ids[best]);
        if (lambda > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!used[i]) sim_sum[i] += similarity(i, best);
            }
        }
    }
    return out;
}

/// IA-select. Residual intent weights U start at `intents`; each step picks
/// argmax_d sum_k U_k V(d|k) and then sets U_k <- U_k (1 - V(d|k)). Ties
/// fall back to the un-discounted relevance sum_k P_k V(d|k), then to the
/// smaller id, so exhausted intents still leave a relevance order.
inline std::vector<DocId> ia_select_rank(std::span<const DocId> ids, const std::map<ChargeId, double>& intents,
                                         const std::function<double(std::size_t, ChargeId)>& value) {
    const std::size_t n = ids.size();
    std::vector<std::pair<ChargeId, double>> residual(intents.begin(), intents.end());
    std::vector<std::vector<double>> v(n, std::vector<double>(residual.size()));
    std::vector<double> base(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < residual.size(); ++k) {
            double x = value(i, residual[k].first);
            if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("per-intent relevance outside [0,1]");
            v[i][k] = x;
            base[i] += residual[k].second * x;
        }
    }
    std::vector<bool> used(n, false);
    std::vector<DocId> out;
    out.reserve(n);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double score = 0.0;
            for (std::size_t k = 0; k < residual.size(); ++k) score += residual[k].second * v[i][k];
            bool better = best == n || score > best_score ||
                          (score == best_score && (base[i] > base[best] || (base[i] == base[best] && ids[i] < ids[best])));
            if (better) {
                best = i;
                best_score = score;
            }
        }
        used[best] = true;
        out.push_back(ids[best]);
        for (std::size_t k = 0; k < residual.size(); ++k) residual[k].second *= 1.0 - v[best][k];
    }
    return out;
}

}  // namespace divlex::ranking
