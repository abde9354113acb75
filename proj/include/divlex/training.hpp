#pragma once

// Training-data synthesis for the ranking MLP. A document is placed at a
// random position of an otherwise randomly filled list; its label is the
// min-max normalised expected metric reward of that placement relative to
// every other candidate placed at the same position.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divlex/baselines.hpp"
#include "divlex/corpus.hpp"
#include "divlex/error.hpp"
#include "divlex/features.hpp"
#include "divlex/metrics.hpp"
#include "divlex/mlp.hpp"
#include "divlex/rng.hpp"

namespace divlex::training {

class PoolTooSmall : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

enum class RewardMetric { kNdcgIa, kAlphaNdcg };

inline RewardMetric parse_reward_metric(const std::string& s) {
    if (s == "ndcg-ia") return RewardMetric::kNdcgIa;
    if (s == "alpha-ndcg") return RewardMetric::kAlphaNdcg;
    throw ConfigError("unknown reward metric '" + s + "'");
}

inline std::string to_string(RewardMetric m) { return m == RewardMetric::kNdcgIa ? "ndcg-ia" : "alpha-ndcg"; }

struct RewardSpec {
    RewardMetric metric = RewardMetric::kNdcgIa;
    std::size_t list_length = 10;  ///< list size and metric cutoff
};

inline constexpr std::size_t kDefaultMcSamples = 256;

inline double reward(const metrics::QueryEvaluator& ev, std::span<const std::uint32_t> list, const RewardSpec& spec) {
    return spec.metric == RewardMetric::kNdcgIa ? ev.ndcg_ia_idx(list, spec.list_length)
                                                 : ev.alpha_ndcg_idx(list, spec.list_length);
}

/// Monte-Carlo estimate of the metric when `doc` sits at 1-based `position`,
/// `prefix` occupies the leading positions, and every other slot is drawn
/// uniformly without replacement from the rest of `pool`. Doc handles are
/// indices into `ev.universe()`.
inline double expected_reward(const metrics::QueryEvaluator& ev, std::span<const std::uint32_t> prefix,
                              std::size_t position, std::uint32_t doc, std::span<const std::uint32_t> pool,
                              const RewardSpec& spec, std::size_t mc_samples, std::uint64_t seed) {
    const std::size_t len = spec.list_length;
    if (position < 1 || position > len) throw InvalidArgument("position outside 1.." + std::to_string(len));
    if (position <= prefix.size()) throw InvalidArgument("position falls inside the fixed prefix");
    if (std::find(prefix.begin(), prefix.end(), doc) != prefix.end()) throw InvalidArgument("doc already in prefix");
    if (mc_samples == 0) throw InvalidArgument("need at least one Monte-Carlo sample");
    std::vector<std::uint32_t> rest;
    for (auto p : pool) {
        if (p != doc && std::find(prefix.begin(), prefix.end(), p) == prefix.end()) rest.push_back(p);
    }
    const std::size_t fill = len - prefix.size() - 1;
    if (rest.size() < fill) {
        throw PoolTooSmall("pool of " + std::to_string(pool.size()) + " cannot fill a list of " + std::to_string(len));
    }
    // Completions are numbered in mixed radix with the earliest open slot
    // most significant. Samples sit at evenly spaced numbers from one random
    // offset (systematic sampling), so the top slots, which carry most of the
    // variance, are covered evenly. Falls back to independent draws when the
    // count does not fit in 53 bits.
    double completions = 1.0;
    for (std::size_t i = 0; i < fill; ++i) completions *= static_cast<double>(rest.size() - i);
    const bool systematic = completions <= 9007199254740992.0;
    Rng rng(seed);
    const double step = completions / static_cast<double>(mc_samples);
    const double offset = uniform01(rng) * step;
    std::vector<std::uint32_t> list(len), avail;
    double total = 0.0;
    for (std::size_t s = 0; s < mc_samples; ++s) {
        std::vector<std::uint32_t> picked;
        if (systematic) {
            double index = std::min(std::floor(offset + static_cast<double>(s) * step), completions - 1.0);
            avail = rest;
            double block = completions;
            for (std::size_t i = 0; i < fill; ++i) {
                block /= static_cast<double>(avail.size());
                const auto choice = static_cast<std::size_t>(std::floor(index / block));
                index -= static_cast<double>(choice) * block;
                picked.push_back(avail[choice]);
                avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(choice));
            }
        } else {
            for (std::size_t i = 0; i < fill; ++i) std::swap(rest[i], rest[i + uniform_index(rng, rest.size() - i)]);
            picked.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill));
        }
        std::size_t r = 0;
        for (std::size_t i = 0; i < len; ++i) {
            if (i < prefix.size()) {
                list[i] = prefix[i];
            } else if (i + 1 == position) {
                list[i] = doc;
            } else {
                list[i] = picked[r++];
            }
        }
        total += reward(ev, list, spec);
    }
    return total / static_cast<double>(mc_samples);
}

/// Expected rewards of every non-prefix candidate at `position`, each
/// estimated with the same seed (common random numbers).
inline std::vector<double> expected_rewards(const metrics::QueryEvaluator& ev, std::span<const std::uint32_t> prefix,
                                            std::size_t position, std::span<const std::uint32_t> pool,
                                            const RewardSpec& spec, std::size_t mc_samples, std::uint64_t seed) {
    std::vector<double> out;
    for (auto a : pool) {
        if (std::find(prefix.begin(), prefix.end(), a) != prefix.end()) continue;
        out.push_back(expected_reward(ev, prefix, position, a, pool, spec, mc_samples, seed));
    }
    return out;
}

/// Min-max normalisation; 0.5 everywhere when all values are equal.
inline std::vector<double> minmax_labels(std::span<const double> values) {
    if (values.empty()) return {};
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo, max = *hi;
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(max == min ? 0.5 : (v - min) / (max - min));
    return out;
}

/// Labels of every non-prefix candidate of `pool`, in pool order.
inline std::vector<double> training_labels(const metrics::QueryEvaluator& ev, std::span<const std::uint32_t> prefix,
                                           std::size_t position, std::span<const std::uint32_t> pool,
                                           const RewardSpec& spec, std::size_t mc_samples, std::uint64_t seed) {
    return minmax_labels(expected_rewards(ev, prefix, position, pool, spec, mc_samples, seed));
}

inline double training_label(const metrics::QueryEvaluator& ev, std::span<const std::uint32_t> prefix,
                             std::size_t position, std::uint32_t doc, std::span<const std::uint32_t> pool,
                             const RewardSpec& spec, std::size_t mc_samples, std::uint64_t seed) {
    std::size_t slot = 0;
    bool found = false;
    for (auto a : pool) {
        if (std::find(prefix.begin(), prefix.end(), a) != prefix.end()) continue;
        if (a == doc) {
            found = true;
            break;
        }
        ++slot;
    }
    if (!found) throw InvalidArgument("doc is not a candidate of the pool");
    return training_labels(ev, prefix, position, pool, spec, mc_samples, seed)[slot];
}

struct TrainingSetConfig {
    std::size_t n_samples = 1'000'000;
    RewardSpec reward;
    std::size_t mc_samples = kDefaultMcSamples;
    std::uint64_t seed = 1;
    model::FeatureMode mode = model::FeatureMode::kFull;
};

/// Deterministic stream of training samples over the train split: uniform
/// query, uniform candidate, uniform position. Labels for a (query,
/// position) are computed once with a seed derived from that pair, and pair
/// features once per (query, doc), so the stream is reproducible per seed.
class TrainingStream {
public:
    TrainingStream(const Featurizer& features, std::vector<QueryId> train_queries, TrainingSetConfig cfg)
        : f_(features), cfg_(cfg), rng_(derive_seed(cfg.seed, 0x7261696eULL)) {
        const auto& ds = f_.dataset();
        for (const auto& id : train_queries) {
            const auto& q = ds.query(id);
            auto cands = ds.candidates(id);
            if (cands.empty()) continue;
            Entry e{&q, cands, {}, {}, {}, {}};
            std::vector<DocId> ids;
            for (const auto* d : cands) ids.push_back(d->id);
            metrics::MetricOptions opts;
            opts.max_cutoff = cfg_.reward.list_length;
            e.evaluator.emplace(metrics::QueryJudgments::from_dataset(ds, q), ids, opts);
            e.pool = e.evaluator->to_indices(ids);
            if (e.pool.size() < cfg_.reward.list_length) {
                throw PoolTooSmall("query '" + id + "' has " + std::to_string(e.pool.size()) + " candidates, need " +
                                   std::to_string(cfg_.reward.list_length));
            }
            e.features.resize(cands.size());
            entries_.push_back(std::move(e));
        }
        if (entries_.empty() && cfg_.n_samples > 0) throw InvalidArgument("training split is empty");
    }

    std::size_t size() const noexcept { return cfg_.n_samples; }
    std::size_t emitted() const noexcept { return emitted_; }

    std::optional<model::TrainingSample> next() {
        if (emitted_ >= cfg_.n_samples) return std::nullopt;
        ++emitted_;
        const std::size_t qi = uniform_index(rng_, entries_.size());
        auto& e = entries_[qi];
        const std::size_t di = uniform_index(rng_, e.candidates.size());
        const std::size_t position = 1 + uniform_index(rng_, cfg_.reward.list_length);
        auto& labels = e.labels[position];
        if (labels.empty()) {
            labels = training_labels(*e.evaluator, {}, position, e.pool, cfg_.reward, cfg_.mc_samples,
                                     derive_seed(cfg_.seed, qi, position));
        }
        if (!e.features[di]) e.features[di] = f_.features(*e.query, *e.candidates[di], cfg_.mode, cfg_.seed);
        return model::TrainingSample{*e.features[di], labels[di]};
    }

private:
    struct Entry {
        const QueryCase* query;
        std::vector<const CandidateDoc*> candidates;
        std::optional<metrics::QueryEvaluator> evaluator;
        std::vector<std::uint32_t> pool;
        std::map<std::size_t, std::vector<double>> labels;
        std::vector<std::optional<SparseVector>> features;
    };

    const Featurizer& f_;
    TrainingSetConfig cfg_;
    Rng rng_;
    std::vector<Entry> entries_;
    std::size_t emitted_ = 0;
};

/// Train on a stream. The first `holdout` samples (capped at a fifth of the
/// stream) are kept aside for the before/after loss report.
inline model::RankerModel train_stream(TrainingStream& stream, std::size_t text_length, std::size_t num_charges,
                                       const model::TrainConfig& cfg, model::TrainReport* report = nullptr,
                                       model::FeatureMode mode = model::FeatureMode::kFull) {
    if (stream.size() == 0) throw InvalidArgument("training needs at least one sample");
    auto m = model::RankerModel::initialize(text_length, num_charges, cfg.hidden, cfg.seed, mode);
    const std::size_t h = model::holdout_size(stream.size(), cfg.holdout);
    std::vector<model::TrainingSample> held;
    for (std::size_t i = 0; i < h; ++i) held.push_back(*stream.next());
    model::TrainReport rep;
    model::Trainer trainer(m, cfg);
    double loss = 0.0;
    std::size_t n = 0;
    std::vector<model::TrainingSample> small;  // kept only when nothing is held out
    while (auto s = stream.next()) {
        loss += trainer.add(*s);
        ++n;
        if (h == 0) small.push_back(*s);
    }
    trainer.flush();
    if (h == 0) {
        auto init = model::RankerModel::initialize(text_length, num_charges, cfg.hidden, cfg.seed, mode);
        rep.initial_holdout_mse = model::mse(init, small);
        rep.final_holdout_mse = model::mse(m, small);
    } else {
        auto init = model::RankerModel::initialize(text_length, num_charges, cfg.hidden, cfg.seed, mode);
        rep.initial_holdout_mse = model::mse(init, held);
        rep.final_holdout_mse = model::mse(m, held);
    }
    rep.final_train_mse = n ? loss / static_cast<double>(n) : 0.0;
    rep.steps = trainer.steps();
    rep.train_samples = n;
    rep.holdout_samples = h;
    if (report) *report = rep;
    return m;
}

/// Rank candidates by model score, descending; ties by ascending id.
inline std::vector<ranking::ScoredDoc> rank(const model::RankerModel& m, const Featurizer& f, const QueryCase& q,
                                            std::span<const CandidateDoc* const> candidates, std::uint64_t seed = 0) {
    std::vector<ranking::ScoredDoc> out;
    out.reserve(candidates.size());
    for (const auto* d : candidates) out.push_back({d->id, m.score(f.features(q, *d, m.mode(), seed))});
    ranking::sort_by_score(out);
    return out;
}

}  // namespace divlex::training
