#pragma once

// Diversity evaluation: graded NDCG, intent-aware NDCG-IA, and alpha-NDCG
// over intents whose probability exceeds a threshold, with grades
// binarised at "excellent".

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divlex/corpus.hpp"
#include "divlex/error.hpp"

namespace divlex::metrics {

class MissingTriples : public Error {
public:
    using Error::Error;
};

inline constexpr std::size_t kCutoffs[] = {1, 3, 5, 10};

inline double gain(int grade) { return std::ldexp(1.0, grade) - 1.0; }
inline double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }  // rank is 1-based

/// DCG@k with gain 2^g - 1 and discount 1 / log2(rank + 1).
inline double dcg(std::span<const int> grades, std::size_t k) {
    double s = 0.0;
    for (std::size_t r = 0; r < grades.size() && r < k; ++r) s += gain(grades[r]) * discount(r + 1);
    return s;
}

/// NDCG@k of a ranked grade list against the ideal ordering of `pool`
/// (defaults to the ranked grades themselves). 0 when the ideal DCG is 0.
inline double ndcg(std::span<const int> ranked, std::size_t k, std::span<const int> pool = {}) {
    std::vector<int> ideal(pool.empty() ? ranked.begin() : pool.begin(), pool.empty() ? ranked.end() : pool.end());
    for (int g : ranked) {
        if (!valid_grade(g)) throw InvalidArgument("grade outside 0..3");
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double idcg = dcg(ideal, k);
    if (idcg <= 0.0) return 0.0;
    return dcg(ranked, k) / idcg;
}

/// Intent distribution and graded triples of one query.
struct QueryJudgments {
    std::map<ChargeId, double> intent;
    std::map<ChargeId, std::map<DocId, int>> grades;

    static QueryJudgments from_dataset(const Dataset& ds, const QueryCase& q) {
        QueryJudgments j;
        j.intent = q.intent_dist;
        for (const auto& [key, g] : ds.grades(q.id)) j.grades[key.first][key.second] = g;
        return j;
    }
};

enum class MissingPolicy { kLenient, kStrict };

struct MetricOptions {
    double alpha = 0.5;               ///< alpha-NDCG redundancy penalty
    double intent_threshold = 0.5;    ///< alpha-NDCG keeps intents with P > threshold
    int relevant_min_grade = 2;       ///< binarisation: grade >= this counts as relevant
    std::size_t exhaustive_ideal_limit = 6;  ///< exact alpha-NDCG ideal up to this many relevant docs
    std::size_t max_cutoff = 10;
    MissingPolicy missing = MissingPolicy::kLenient;
};

/// Per-query evaluator. Ideal DCGs are computed once for every cutoff up to
/// `max_cutoff`; rankings may be given as doc ids or as indices into
/// `universe()`.
class QueryEvaluator {
public:
    static constexpr std::uint32_t kUnknown = std::numeric_limits<std::uint32_t>::max();

    QueryEvaluator(QueryJudgments judgments, std::span<const DocId> universe, MetricOptions opts = {})
        : j_(std::move(judgments)), opts_(opts) {
        if (opts_.max_cutoff == 0) throw InvalidArgument("max cutoff must be >= 1");
        if (!(opts_.alpha >= 0.0 && opts_.alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0,1]");
        std::set<DocId> ids(universe.begin(), universe.end());
        for (const auto& [c, by_doc] : j_.grades) {
            for (const auto& [d, g] : by_doc) ids.insert(d);
        }
        universe_.assign(ids.begin(), ids.end());
        for (std::uint32_t i = 0; i < universe_.size(); ++i) index_[universe_[i]] = i;

        for (const auto& [c, p] : j_.intent) {
            if (p <= 0.0) continue;
            weight_sum_ += p;
            Intent in{c, p, std::vector<int>(universe_.size(), 0), {}};
            auto it = j_.grades.find(c);
            if (it != j_.grades.end()) {
                for (const auto& [d, g] : it->second) {
                    if (!valid_grade(g)) throw InvalidArgument("grade outside 0..3");
                    in.grades[index_.at(d)] = g;
                }
            }
            std::vector<int> sorted = in.grades;
            std::sort(sorted.begin(), sorted.end(), std::greater<>());
            in.idcg.resize(opts_.max_cutoff + 1, 0.0);
            for (std::size_t k = 1; k <= opts_.max_cutoff; ++k) in.idcg[k] = dcg(sorted, k);
            weighted_.push_back(std::move(in));
        }

        for (const auto& [c, p] : j_.intent) {
            if (p > opts_.intent_threshold) alpha_intents_.push_back(c);
        }
        relevant_.assign(universe_.size(), {});
        for (std::size_t a = 0; a < alpha_intents_.size(); ++a) {
            auto it = j_.grades.find(alpha_intents_[a]);
            if (it == j_.grades.end()) continue;
            for (const auto& [d, g] : it->second) {
                if (g >= opts_.relevant_min_grade) relevant_[index_.at(d)].push_back(static_cast<std::uint32_t>(a));
            }
        }
        alpha_idcg_ = alpha_ideal();
    }

    const std::vector<DocId>& universe() const noexcept { return universe_; }
    const MetricOptions& options() const noexcept { return opts_; }
    const QueryJudgments& judgments() const noexcept { return j_; }

    std::vector<std::uint32_t> to_indices(std::span<const DocId> ranking) const {
        std::vector<std::uint32_t> out;
        out.reserve(ranking.size());
        for (const auto& d : ranking) {
            auto it = index_.find(d);
            out.push_back(it == index_.end() ? kUnknown : it->second);
        }
        return out;
    }

    double ndcg_ia(std::span<const DocId> ranking, std::size_t k) const {
        if (opts_.missing == MissingPolicy::kStrict) check_complete(ranking, k);
        return ndcg_ia_idx(to_indices(ranking), k);
    }

    double alpha_ndcg(std::span<const DocId> ranking, std::size_t k) const {
        return alpha_ndcg_idx(to_indices(ranking), k);
    }

    /// Sum over intents of P(I|Q) * NDCG@k(Q|I), with the intent weights
    /// rescaled to sum to 1 (annotated intent values need not).
    double ndcg_ia_idx(std::span<const std::uint32_t> ranking, std::size_t k) const {
        check_cutoff(k);
        double total = 0.0;
        for (const auto& in : weighted_) {
            const double idcg = in.idcg[k];
            if (idcg <= 0.0) continue;
            double s = 0.0;
            for (std::size_t r = 0; r < ranking.size() && r < k; ++r) {
                if (ranking[r] == kUnknown) continue;
                s += gain(in.grades[ranking[r]]) * discount(r + 1);
            }
            total += in.p * s / idcg;
        }
        return weight_sum_ > 0.0 ? total / weight_sum_ : 0.0;
    }

    double alpha_ndcg_idx(std::span<const std::uint32_t> ranking, std::size_t k) const {
        check_cutoff(k);
        const double idcg = alpha_idcg_[k];
        if (idcg <= 0.0) return 0.0;
        return alpha_dcg(ranking, k) / idcg;
    }

    /// Ideal alpha-DCG@k used as the normaliser.
    double alpha_ideal_dcg(std::size_t k) const {
        check_cutoff(k);
        return alpha_idcg_[k];
    }

    /// NDCG@k of one intent against its own graded pool.
    double intent_ndcg(ChargeId c, std::span<const DocId> ranking, std::size_t k) const {
        check_cutoff(k);
        for (const auto& in : weighted_) {
            if (in.charge != c) continue;
            if (in.idcg[k] <= 0.0) return 0.0;
            double s = 0.0;
            auto idx = to_indices(ranking);
            for (std::size_t r = 0; r < idx.size() && r < k; ++r) {
                if (idx[r] != kUnknown) s += gain(in.grades[idx[r]]) * discount(r + 1);
            }
            return s / in.idcg[k];
        }
        return 0.0;
    }

private:
    struct Intent {
        ChargeId charge;
        double p;
        std::vector<int> grades;    // by universe index
        std::vector<double> idcg;   // by cutoff
    };

    void check_cutoff(std::size_t k) const {
        if (k < 1 || k > opts_.max_cutoff) throw InvalidArgument("cutoff outside 1.." + std::to_string(opts_.max_cutoff));
    }

    void check_complete(std::span<const DocId> ranking, std::size_t k) const {
        for (std::size_t r = 0; r < ranking.size() && r < k; ++r) {
            for (const auto& in : weighted_) {
                auto it = j_.grades.find(in.charge);
                if (it == j_.grades.end() || !it->second.contains(ranking[r])) {
                    throw MissingTriples("no grade for doc '" + ranking[r] + "' under charge " + std::to_string(in.charge));
                }
            }
        }
    }

    double alpha_dcg(std::span<const std::uint32_t> ranking, std::size_t k) const {
        std::vector<int> seen(alpha_intents_.size(), 0);
        double s = 0.0;
        for (std::size_t r = 0; r < ranking.size() && r < k; ++r) {
            if (ranking[r] == kUnknown) continue;
            double g = 0.0;
            for (auto a : relevant_[ranking[r]]) g += std::pow(1.0 - opts_.alpha, seen[a]++);
            s += g * discount(r + 1);
        }
        return s;
    }

    std::vector<double> alpha_ideal() const {
        std::vector<double> out(opts_.max_cutoff + 1, 0.0);
        std::vector<std::uint32_t> pool;
        for (std::uint32_t i = 0; i < relevant_.size(); ++i) {
            if (!relevant_[i].empty()) pool.push_back(i);
        }
        if (pool.empty()) return out;
        if (pool.size() <= opts_.exhaustive_ideal_limit) {
            for (std::size_t k = 1; k <= opts_.max_cutoff; ++k) out[k] = exhaustive_alpha_ideal(pool, k);
            return out;
        }
        // Greedy: at each rank take the doc with the largest marginal gain.
        std::vector<int> seen(alpha_intents_.size(), 0);
        std::vector<bool> used(pool.size(), false);
        double s = 0.0;
        for (std::size_t r = 1; r <= opts_.max_cutoff; ++r) {
            std::size_t best = pool.size();
            double best_gain = -1.0;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (used[i]) continue;
                double g = 0.0;
                for (auto a : relevant_[pool[i]]) g += std::pow(1.0 - opts_.alpha, seen[a]);
                if (g > best_gain) {
                    best_gain = g;
                    best = i;
                }
            }
            if (best < pool.size()) {
                used[best] = true;
                for (auto a : relevant_[pool[best]]) ++seen[a];
                s += best_gain * discount(r);
            }
            out[r] = s;
        }
        return out;
    }

    double exhaustive_alpha_ideal(const std::vector<std::uint32_t>& pool, std::size_t k) const {
        std::vector<int> seen(alpha_intents_.size(), 0);
        std::vector<bool> used(pool.size(), false);
        double best = 0.0;
        auto rec = [&](auto&& self, std::size_t depth, double acc) -> void {
            best = std::max(best, acc);
            if (depth == k) return;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (used[i]) continue;
                double g = 0.0;
                for (auto a : relevant_[pool[i]]) g += std::pow(1.0 - opts_.alpha, seen[a]);
                used[i] = true;
                for (auto a : relevant_[pool[i]]) ++seen[a];
                self(self, depth + 1, acc + g * discount(depth + 1));
                for (auto a : relevant_[pool[i]]) --seen[a];
                used[i] = false;
            }
        };
        rec(rec, 0, 0.0);
        return best;
    }

    QueryJudgments j_;
    MetricOptions opts_;
    std::vector<DocId> universe_;
    std::unordered_map<DocId, std::uint32_t> index_;
    std::vector<Intent> weighted_;
    double weight_sum_ = 0.0;
    std::vector<ChargeId> alpha_intents_;
    std::vector<std::vector<std::uint32_t>> relevant_;  // alpha-intent positions per doc
    std::vector<double> alpha_idcg_;
};

inline double ndcg_ia(const QueryJudgments& j, std::span<const DocId> ranking, std::size_t k, MetricOptions opts = {}) {
    opts.max_cutoff = std::max(opts.max_cutoff, k);
    return QueryEvaluator(j, ranking, opts).ndcg_ia(ranking, k);
}

inline double alpha_ndcg(const QueryJudgments& j, std::span<const DocId> ranking, std::size_t k, MetricOptions opts = {}) {
    opts.max_cutoff = std::max(opts.max_cutoff, k);
    return QueryEvaluator(j, ranking, opts).alpha_ndcg(ranking, k);
}

}  // namespace divlex::metrics
