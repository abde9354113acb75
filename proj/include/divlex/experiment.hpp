#pragma once

// End-to-end evaluation: every baseline and every trained ranker over the
// test split, with NDCG-IA and alpha-NDCG at the standard cutoffs.

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "divlex/baselines.hpp"
#include "divlex/corpus.hpp"
#include "divlex/features.hpp"
#include "divlex/metrics.hpp"
#include "divlex/mlp.hpp"
#include "divlex/stats.hpp"
#include "divlex/training.hpp"

namespace divlex::experiment {

inline constexpr std::size_t kColumns = 8;

inline const std::array<std::string, kColumns>& column_names() {
    static const std::array<std::string, kColumns> names{"N-IA@1", "N-IA@3", "N-IA@5", "N-IA@10",
                                                         "a-N@1",  "a-N@3",  "a-N@5",  "a-N@10"};
    return names;
}

using Scores = std::array<double, kColumns>;

enum class Baseline { kBm25, kMmr, kIaSelect, kExIaSelect };

struct EvalConfig {
    ranking::Bm25Params bm25;
    std::vector<double> mmr_lambdas{0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
    metrics::MetricOptions metric;
    std::size_t jobs = 1;
    bool char_ngram_tokens = false;  ///< BM25 over character bigrams instead of words
    double ia_max_satisfaction = 0.5;  ///< V(d|c) of the most relevant candidate
    std::uint64_t seed = 1;
};

struct NamedModel {
    std::string name;
    const model::RankerModel* model;
};

struct EvalReport {
    std::vector<std::string> methods;
    std::vector<QueryId> queries;
    std::map<std::string, std::vector<Scores>> per_query;  ///< method -> scores by query position
    std::map<std::string, std::vector<std::vector<DocId>>> rankings;
    double mmr_lambda = 0.0;

    Scores mean(const std::string& method) const {
        Scores m{};
        const auto& rows = per_query.at(method);
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < kColumns; ++c) m[c] += r[c];
        }
        for (auto& v : m) v /= rows.empty() ? 1.0 : static_cast<double>(rows.size());
        return m;
    }

    std::vector<double> column(const std::string& method, std::size_t col) const {
        std::vector<double> out;
        for (const auto& r : per_query.at(method)) out.push_back(r[col]);
        return out;
    }

    stats::PairedTTest ttest(const std::string& a, const std::string& b, std::size_t col) const {
        auto x = column(a, col);
        auto y = column(b, col);
        return stats::paired_t_test(x, y);
    }
};

inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

/// Ranks candidates of single queries with the non-learned methods.
class BaselineRanker {
public:
    BaselineRanker(const Featurizer& f, EvalConfig cfg) : f_(f), cfg_(std::move(cfg)) {
        if (cfg_.char_ngram_tokens) {
            tok_ = std::make_unique<ranking::CharNGramTokenizer>(2);
        } else {
            tok_ = std::make_unique<ranking::WhitespaceTokenizer>();
        }
    }

    std::vector<DocId> rank(Baseline method, const QueryCase& q, double mmr_lambda = 0.0) const {
        auto cands = f_.dataset().candidates(q.id);
        std::vector<DocId> ids;
        for (const auto* d : cands) ids.push_back(d->id);
        switch (method) {
            case Baseline::kBm25: {
                std::vector<ranking::TokenizedDoc> docs;
                for (const auto* d : cands) docs.push_back({d->id, tok_->tokenize(d->text())});
                auto query = tok_->tokenize(q.text());
                return ranking::ids_of(ranking::bm25_rank(query, docs, cfg_.bm25));
            }
            case Baseline::kMmr: {
                std::vector<double> rel;
                for (const auto* d : cands) rel.push_back(f_.text_relevance(q, *d));
                return ranking::mmr_rank(
                    ids, rel, [&](std::size_t i, std::size_t j) { return f_.doc_similarity(*cands[i], *cands[j]); },
                    mmr_lambda);
            }
            case Baseline::kIaSelect:
            case Baseline::kExIaSelect: {
                const auto& rep = f_.query(q.id);
                const auto& dist = method == Baseline::kIaSelect ? rep.initial : rep.walked;
                std::map<ChargeId, double> intents;
                for (std::size_t c = 0; c < dist.size(); ++c) {
                    if (dist[c] > 0.0) intents[static_cast<ChargeId>(c)] = dist[c];
                }
                auto rel = pool_relevance(q, cands);
                return ranking::ia_select_rank(ids, intents, [&](std::size_t i, ChargeId k) {
                    return cands[i]->charges.contains(k) ? rel[i] : 0.0;
                });
            }
        }
        return ids;
    }

    /// Text relevance min-max rescaled over the candidate pool and capped at
    /// ia_max_satisfaction; used as V(d|c) by the intent-aware methods.
    std::vector<double> pool_relevance(const QueryCase& q, std::span<const CandidateDoc* const> cands) const {
        std::vector<double> rel;
        for (const auto* d : cands) rel.push_back(f_.text_relevance(q, *d));
        if (rel.empty()) return rel;
        const auto [lo, hi] = std::minmax_element(rel.begin(), rel.end());
        const double a = *lo, span = *hi - *lo;
        for (auto& r : rel) r = cfg_.ia_max_satisfaction * (span > 0.0 ? (r - a) / span : 1.0);
        return rel;
    }

private:
    const Featurizer& f_;
    EvalConfig cfg_;
    std::unique_ptr<ranking::Tokenizer> tok_;
};

inline Scores score_ranking(const metrics::QueryEvaluator& ev, std::span<const DocId> ranking) {
    Scores s{};
    for (std::size_t i = 0; i < 4; ++i) {
        s[i] = ev.ndcg_ia(ranking, metrics::kCutoffs[i]);
        s[4 + i] = ev.alpha_ndcg(ranking, metrics::kCutoffs[i]);
    }
    return s;
}

inline metrics::QueryEvaluator make_evaluator(const Dataset& ds, const QueryCase& q, const metrics::MetricOptions& opts) {
    std::vector<DocId> ids;
    for (const auto* d : ds.candidates(q.id)) ids.push_back(d->id);
    return metrics::QueryEvaluator(metrics::QueryJudgments::from_dataset(ds, q), ids, opts);
}

/// Run `body(i)` for i in [0, n) on up to `jobs` threads. Each index is
/// handled exactly once; results must be written to per-index slots.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += jobs) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Mean NDCG-IA@10 of MMR on the given queries for one lambda.
inline double mmr_objective(const Featurizer& f, const BaselineRanker& ranker, const std::vector<QueryId>& queries,
                            double lambda, const metrics::MetricOptions& opts) {
    double sum = 0.0;
    for (const auto& id : queries) {
        const auto& q = f.dataset().query(id);
        auto ev = make_evaluator(f.dataset(), q, opts);
        sum += ev.ndcg_ia(ranker.rank(Baseline::kMmr, q, lambda), 10);
    }
    return queries.empty() ? 0.0 : sum / static_cast<double>(queries.size());
}

/// Evaluate baselines and models on the test split (or on `queries` when
/// given). MMR's lambda is chosen on the train split (first best on the grid).
inline EvalReport evaluate(const Featurizer& f, const std::vector<NamedModel>& models, const EvalConfig& cfg,
                           const std::vector<QueryId>* queries = nullptr) {
    const Dataset& ds = f.dataset();
    BaselineRanker ranker(f, cfg);
    EvalReport rep;
    rep.queries = queries ? *queries : ds.split.test;

    double best = -1.0;
    for (double lambda : cfg.mmr_lambdas) {
        double v = mmr_objective(f, ranker, ds.split.train, lambda, cfg.metric);
        if (v > best) {
            best = v;
            rep.mmr_lambda = lambda;
        }
    }

    struct Method {
        std::string name;
        std::function<std::vector<DocId>(const QueryCase&)> run;
    };
    std::vector<Method> methods{
        {"BM25", [&](const QueryCase& q) { return ranker.rank(Baseline::kBm25, q); }},
        {"MMR", [&](const QueryCase& q) { return ranker.rank(Baseline::kMmr, q, rep.mmr_lambda); }},
        {"IA-select", [&](const QueryCase& q) { return ranker.rank(Baseline::kIaSelect, q); }},
        {"exIA-select", [&](const QueryCase& q) { return ranker.rank(Baseline::kExIaSelect, q); }},
    };
    for (const auto& nm : models) {
        const auto* m = nm.model;
        methods.push_back({nm.name, [&f, m, seed = cfg.seed](const QueryCase& q) {
                               auto cands = f.dataset().candidates(q.id);
                               return ranking::ids_of(training::rank(*m, f, q, cands, seed));
                           }});
    }

    for (const auto& m : methods) {
        rep.methods.push_back(m.name);
        rep.per_query[m.name].resize(rep.queries.size());
        rep.rankings[m.name].resize(rep.queries.size());
    }
    parallel_for(rep.queries.size(), cfg.jobs, [&](std::size_t i) {
        const auto& q = ds.query(rep.queries[i]);
        auto ev = make_evaluator(ds, q, cfg.metric);
        for (const auto& m : methods) {
            auto ranking = m.run(q);
            rep.per_query[m.name][i] = score_ranking(ev, ranking);
            rep.rankings[m.name][i] = std::move(ranking);
        }
    });
    return rep;
}

/// Mean scores: one row per method, eight metric columns.
inline void write_table(std::ostream& out, const EvalReport& rep) {
    out << "method";
    for (const auto& c : column_names()) out << '\t' << c;
    out << '\n';
    for (const auto& m : rep.methods) {
        out << m;
        for (double v : rep.mean(m)) out << '\t' << fixed4(v);
        out << '\n';
    }
}

/// Paired two-sided t-tests for every method pair and column.
inline void write_ttests(std::ostream& out, const EvalReport& rep) {
    out << "method_a\tmethod_b\tmetric\tmean_diff\tt\tp_value\n";
    char buf[64];
    for (std::size_t a = 0; a < rep.methods.size(); ++a) {
        for (std::size_t b = a + 1; b < rep.methods.size(); ++b) {
            for (std::size_t c = 0; c < kColumns; ++c) {
                auto t = rep.ttest(rep.methods[a], rep.methods[b], c);
                out << rep.methods[a] << '\t' << rep.methods[b] << '\t' << column_names()[c] << '\t'
                    << fixed4(t.mean_diff) << '\t';
                std::snprintf(buf, sizeof buf, "%.4f\t%.6g", t.t, t.p_two_sided);
                out << buf << '\n';
            }
        }
    }
}

inline nlohmann::json to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["mmr_lambda"] = rep.mmr_lambda;
    j["methods"] = rep.methods;
    auto queries = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.queries.size(); ++i) {
        nlohmann::json q;
        q["query_id"] = rep.queries[i];
        for (const auto& m : rep.methods) {
            nlohmann::json scores;
            for (std::size_t c = 0; c < kColumns; ++c) scores[column_names()[c]] = rep.per_query.at(m)[i][c];
            q["methods"][m] = {{"scores", scores}, {"ranking", rep.rankings.at(m)[i]}};
        }
        queries.push_back(std::move(q));
    }
    j["queries"] = std::move(queries);
    return j;
}

}  // namespace divlex::experiment
