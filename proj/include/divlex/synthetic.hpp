#pragma once

// Synthetic stand-in for a human-annotated diversified legal retrieval
// dataset. Charges come in confusable groups that reverse into each other
// (the planted reversal matrix); a query states the facts of one or two
// charges and its annotators also want the group mates, which the
// fact-based predictor does not see. Every document text is assembled from
// its charges' template sentences and ends with a verdict naming exactly
// those charges.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "divlex/annotation.hpp"
#include "divlex/corpus.hpp"
#include "divlex/error.hpp"
#include "divlex/predictor.hpp"
#include "divlex/rng.hpp"

namespace divlex::synthetic {

struct GeneratorConfig {
    int num_charges = 40;
    int num_queries = 106;
    double train_test_ratio = 2.0;  ///< |train| : |test|
    int docs_per_query = 30;
    int templates_per_charge = 8;
    int keywords_per_charge = 6;
    int group_shared_keywords = 2;  ///< vocabulary common to a confusable group
    int sibling_shared_keywords = 2;
    int generic_vocabulary = 160;

    double grouped_fraction = 0.8;   ///< charges that belong to a confusable group
    int max_group_size = 3;
    int planted_count_min = 20;
    int planted_count_max = 60;
    double noise_edge_prob = 0.3;
    int noise_count_max = 3;

    double charge_zipf = 1.0;       ///< popularity exponent of explicit charges (0 = uniform)
    int explicit_min = 1;
    int explicit_max = 2;
    double partner_intent_prob = 0.8;
    double partner_mention_prob = 0.9;
    double confusion_prob = 0.7;    ///< facts read like a confusable mate of the true charge
    double partner_importance_min = 0.45;
    double partner_importance_max = 0.8;
    double distractor_prob = 0.4;

    int annotator_groups = 3;
    int annotators_per_group = 3;
    double annotator_noise = 0.12;
    double selection_threshold = 0.25;

    double doc_explicit_share = 0.25;
    double doc_partner_share = 0.25;
    double doc_mixed_share = 0.25;  ///< remaining share is off-topic
    double doc_extra_charge_prob = 0.3;
    double near_miss_prob = 0.9;    ///< off-topic doc built on a lexically similar charge
    int near_miss_pool = 3;
    int case_facts_min = 2;         ///< case-specific fact sentences per query
    int case_facts_max = 3;
    double fact_paraphrase = 0.3;   ///< per-word replacement rate when a doc restates a fact
    int near_miss_facts_max = 2;
    int doc_filler_min = 4;
    int doc_filler_max = 8;

    void validate() const {
        auto positive = [](int v, const char* name) {
            if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
        };
        positive(num_charges, "num_charges");
        positive(num_queries, "num_queries");
        positive(docs_per_query, "docs_per_query");
        positive(templates_per_charge, "templates_per_charge");
        positive(keywords_per_charge, "keywords_per_charge");
        positive(generic_vocabulary, "generic_vocabulary");
        positive(explicit_min, "explicit_min");
        positive(annotator_groups, "annotator_groups");
        positive(annotators_per_group, "annotators_per_group");
        if (!(train_test_ratio > 0.0)) throw ConfigError("train_test_ratio must be positive");
        if (explicit_max < explicit_min) throw ConfigError("explicit_max < explicit_min");
        if (num_charges < 6) throw ConfigError("num_charges must be at least 6 (top-5 prediction plus one)");
        if (max_group_size < 2) throw ConfigError("max_group_size must be at least 2");
        if (num_queries < 2) throw ConfigError("num_queries must be at least 2 to split");
    }

    /// floor(n * r / (r + 1)) train queries, at least one of each side.
    std::pair<int, int> split_sizes() const {
        int train = static_cast<int>(std::floor(num_queries * train_test_ratio / (train_test_ratio + 1.0) + 1e-9));
        train = std::clamp(train, 1, num_queries - 1);
        return {train, num_queries - train};
    }
};

struct SyntheticDataset {
    Dataset dataset;
    std::vector<std::vector<ChargeId>> groups;      ///< confusable charge groups
    std::vector<std::pair<ChargeId, ChargeId>> planted;  ///< planted reversal edges
    std::vector<std::pair<ChargeId, ChargeId>> siblings; ///< lexically similar, legally unrelated
};

namespace detail {

/// Pseudo-words made of consonant-vowel syllables.
class WordFactory {
public:
    explicit WordFactory(Rng& rng) : rng_(rng) {}

    std::string fresh(int min_syllables, int max_syllables) {
        static const std::string consonants = "bcdfghklmnprstvz";
        static const std::string vowels = "aeiou";
        for (;;) {
            std::string w;
            const int n = uniform_int(rng_, min_syllables, max_syllables);
            for (int i = 0; i < n; ++i) {
                w += consonants[uniform_index(rng_, consonants.size())];
                w += vowels[uniform_index(rng_, vowels.size())];
            }
            if (uniform01(rng_) < 0.5) w += consonants[uniform_index(rng_, consonants.size())];
            if (used_.insert(w).second) return w;
        }
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

inline std::string sentence(std::vector<std::string> words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s + " .";
}

}  // namespace detail

/// Build the dataset in memory. Deterministic for a fixed (config, seed).
inline SyntheticDataset generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SyntheticDataset out;
    Dataset& ds = out.dataset;
    Rng rng(derive_seed(seed, 0x67656eULL));
    detail::WordFactory words(rng);
    const auto s = static_cast<std::size_t>(cfg.num_charges);

    // Vocabulary and lexicon.
    std::vector<std::string> names;
    for (std::size_t c = 0; c < s; ++c) names.push_back(words.fresh(2, 3) + " offense");
    ds.vocab = ChargeVocabulary(names);
    std::vector<std::string> generic;
    for (int i = 0; i < cfg.generic_vocabulary; ++i) generic.push_back(words.fresh(1, 2));
    auto filler = [&] {
        std::vector<std::string> w;
        const int n = uniform_int(rng, 6, 10);
        for (int i = 0; i < n; ++i) w.push_back(pick(generic, rng));
        return detail::sentence(std::move(w));
    };
    const std::vector<std::string> mention_heads{"the indictment also cites", "the prosecution further considered",
                                                 "the victim reported possible", "the police file mentions"};
    const std::vector<std::string> denial_heads{"the defense denies any", "counsel disputes the alleged"};
    const std::vector<std::string> verdict_heads{"the court convicts the defendant of",
                                                 "the defendant is found guilty of"};

    // Confusable groups and the planted reversal matrix.
    std::vector<ChargeId> order(s);
    for (std::size_t c = 0; c < s; ++c) order[c] = static_cast<ChargeId>(c);
    shuffle(order, rng);
    const auto grouped = static_cast<std::size_t>(std::floor(cfg.grouped_fraction * static_cast<double>(s)));
    std::vector<int> group_of(s, -1);
    for (std::size_t i = 0; i + 1 < grouped;) {
        std::size_t size = static_cast<std::size_t>(uniform_int(rng, 2, cfg.max_group_size));
        size = std::min(size, grouped - i);
        if (size < 2) break;
        std::vector<ChargeId> g(order.begin() + static_cast<std::ptrdiff_t>(i),
                                order.begin() + static_cast<std::ptrdiff_t>(i + size));
        std::sort(g.begin(), g.end());
        for (auto c : g) group_of[static_cast<std::size_t>(c)] = static_cast<int>(out.groups.size());
        out.groups.push_back(std::move(g));
        i += size;
    }
    std::map<std::pair<ChargeId, ChargeId>, std::int64_t> counts;
    for (const auto& g : out.groups) {
        for (auto a : g) {
            for (auto b : g) {
                if (a == b) continue;
                counts[{a, b}] = uniform_int(rng, cfg.planted_count_min, cfg.planted_count_max);
                out.planted.emplace_back(a, b);
            }
        }
    }
    for (std::size_t c = 0; c < s; ++c) {
        if (!bernoulli(rng, cfg.noise_edge_prob)) continue;
        auto to = static_cast<ChargeId>(uniform_index(rng, s));
        auto from = static_cast<ChargeId>(c);
        if (to == from || counts.contains({from, to})) continue;
        counts[{from, to}] = uniform_int(rng, 1, cfg.noise_count_max);
    }
    for (const auto& [key, n] : counts) ds.reversals.push_back({key.first, key.second, n});
    std::sort(out.planted.begin(), out.planted.end());

    // Lexical siblings: pairs of unrelated charges (different groups, no
    // reversals) whose fact patterns share much of their vocabulary.
    std::vector<ChargeId> sibling(s, -1);
    {
        std::vector<ChargeId> perm(s);
        for (std::size_t c = 0; c < s; ++c) perm[c] = static_cast<ChargeId>(c);
        shuffle(perm, rng);
        std::vector<ChargeId> open;
        for (auto c : perm) {
            auto it = std::find_if(open.begin(), open.end(), [&](ChargeId u) {
                const int gu = group_of[static_cast<std::size_t>(u)], gc = group_of[static_cast<std::size_t>(c)];
                return gu < 0 || gu != gc;
            });
            if (it == open.end()) {
                open.push_back(c);
                continue;
            }
            sibling[static_cast<std::size_t>(c)] = *it;
            sibling[static_cast<std::size_t>(*it)] = c;
            out.siblings.emplace_back(std::min(c, *it), std::max(c, *it));
            open.erase(it);
        }
        std::sort(out.siblings.begin(), out.siblings.end());
    }
    std::vector<std::vector<std::string>> keywords(s);
    for (const auto& g : out.groups) {
        for (int i = 0; i < cfg.group_shared_keywords; ++i) {
            auto w = words.fresh(2, 3);
            for (auto c : g) keywords[static_cast<std::size_t>(c)].push_back(w);
        }
    }
    const int shared = std::clamp(cfg.sibling_shared_keywords, 0, cfg.keywords_per_charge);
    for (const auto& [a, b] : out.siblings) {
        for (int i = 0; i < shared; ++i) {
            auto w = words.fresh(2, 3);
            keywords[static_cast<std::size_t>(a)].push_back(w);
            keywords[static_cast<std::size_t>(b)].push_back(w);
        }
    }
    for (auto& k : keywords) {
        while (static_cast<int>(k.size()) < cfg.keywords_per_charge) k.push_back(words.fresh(2, 3));
    }
    std::vector<std::vector<std::string>> bank(s);
    for (std::size_t c = 0; c < s; ++c) {
        for (int t = 0; t < cfg.templates_per_charge; ++t) {
            std::vector<std::string> w;
            for (int i = 0; i < 3; ++i) w.push_back(pick(keywords[c], rng));
            const int g = uniform_int(rng, 4, 7);
            for (int i = 0; i < g; ++i) w.push_back(pick(generic, rng));
            shuffle(w, rng);
            bank[c].push_back(detail::sentence(std::move(w)));
        }
        ds.templates.push_back({static_cast<ChargeId>(c), bank[c]});
    }

    auto mates = [&](ChargeId c) {
        std::vector<ChargeId> m;
        int g = group_of[static_cast<std::size_t>(c)];
        if (g < 0) return m;
        for (auto x : out.groups[static_cast<std::size_t>(g)]) {
            if (x != c) m.push_back(x);
        }
        return m;
    };

    // Case frequencies are skewed: a few charges account for most cases.
    // Frequent charges are the grouped ones, since reversals accumulate
    // where there are many cases.
    std::vector<double> popularity_cdf(s);
    {
        std::vector<double> w(s);
        for (std::size_t r = 0; r < s; ++r) {
            w[static_cast<std::size_t>(order[r])] = 1.0 / std::pow(static_cast<double>(r + 1), cfg.charge_zipf);
        }
        double acc = 0.0;
        for (std::size_t c = 0; c < s; ++c) popularity_cdf[c] = (acc += w[c]);
        for (auto& v : popularity_cdf) v /= acc;
    }
    auto popular_charge = [&] {
        const double u = uniform01(rng);
        auto it = std::upper_bound(popularity_cdf.begin(), popularity_cdf.end(), u);
        return static_cast<ChargeId>(std::min<std::ptrdiff_t>(it - popularity_cdf.begin(), static_cast<std::ptrdiff_t>(s) - 1));
    };

    const ChargeNameMatcher matcher(ds.vocab);
    const KeywordChargePredictor predictor(ds.vocab, ds.templates);

    std::vector<std::string> annotator_names;
    for (int g = 0; g < cfg.annotator_groups; ++g) {
        for (int a = 0; a < cfg.annotators_per_group; ++a) {
            annotator_names.push_back(std::string(1, static_cast<char>('A' + g % 26)) + std::to_string(a + 1));
        }
    }

    for (int qi = 0; qi < cfg.num_queries; ++qi) {
        QueryCase q;
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "q%04d", qi + 1);
        q.id = idbuf;
        const int group = qi % cfg.annotator_groups;
        const std::string group_name = "G" + std::to_string(group + 1);

        // Latent intents and their importance to the searcher.
        std::map<ChargeId, double> importance;
        std::set<ChargeId> explicit_charges;
        const int n_explicit = uniform_int(rng, cfg.explicit_min, cfg.explicit_max);
        while (static_cast<int>(explicit_charges.size()) < n_explicit) {
            explicit_charges.insert(popular_charge());
        }
        std::vector<std::string> sents;
        for (auto c : explicit_charges) {
            importance[c] = 1.0;
            // A confused case states its facts in the vocabulary of a mate,
            // so the prediction favours the mate; the true charge is named.
            auto source = c;
            const auto cm = mates(c);
            if (!cm.empty() && bernoulli(rng, cfg.confusion_prob)) {
                source = pick(cm, rng);
                sents.push_back(detail::sentence({pick(mention_heads, rng), pick(generic, rng), ds.vocab.name(c)}));
            }
            auto picks = bank[static_cast<std::size_t>(source)];
            shuffle(picks, rng);
            const int n = uniform_int(rng, 2, 3);
            for (int i = 0; i < n; ++i) sents.push_back(picks[static_cast<std::size_t>(i)]);
        }
        for (auto c : explicit_charges) {
            for (auto m : mates(c)) {
                if (explicit_charges.contains(m) || importance.contains(m)) continue;
                const bool wanted = bernoulli(rng, cfg.partner_intent_prob);
                if (wanted) importance[m] = uniform(rng, cfg.partner_importance_min, cfg.partner_importance_max);
                if (bernoulli(rng, wanted ? cfg.partner_mention_prob : 0.3)) {
                    if (!wanted) importance[m] = 0.05;
                    sents.push_back(detail::sentence({pick(mention_heads, rng), pick(generic, rng), ds.vocab.name(m)}));
                }
            }
        }
        if (bernoulli(rng, cfg.distractor_prob)) {
            auto c = static_cast<ChargeId>(uniform_index(rng, s));
            if (!importance.contains(c)) {
                importance[c] = 0.05;
                sents.push_back(detail::sentence({pick(denial_heads, rng), ds.vocab.name(c)}));
            }
        }
        // Case-specific facts; similar precedents restate some of them.
        std::vector<std::vector<std::string>> facts(static_cast<std::size_t>(uniform_int(rng, cfg.case_facts_min, cfg.case_facts_max)));
        for (auto& fact : facts) {
            const int n = uniform_int(rng, 6, 9);
            for (int i = 0; i < n; ++i) fact.push_back(pick(generic, rng));
            sents.push_back(detail::sentence(fact));
        }
        auto restate = [&](std::size_t n_facts) {
            std::vector<std::string> out;
            auto idx = std::vector<std::size_t>(facts.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            shuffle(idx, rng);
            for (std::size_t i = 0; i < std::min(n_facts, idx.size()); ++i) {
                auto words = facts[idx[i]];
                for (auto& w : words) {
                    if (bernoulli(rng, cfg.fact_paraphrase)) w = pick(generic, rng);
                }
                out.push_back(detail::sentence(std::move(words)));
            }
            return out;
        };
        const int fillers = uniform_int(rng, 1, 2);
        for (int i = 0; i < fillers; ++i) sents.push_back(filler());
        shuffle(sents, rng);
        q.sentences = sents;
        q.candidate_charge_set = annotation::candidate_charge_set(q.text(), matcher, predictor);

        // Annotators sort the candidate charges; their intent maps are averaged.
        std::vector<annotation::IntentMap> dists;
        for (int a = 0; a < cfg.annotators_per_group; ++a) {
            const auto& who = annotator_names[static_cast<std::size_t>(group * cfg.annotators_per_group + a)];
            const int n_levels = uniform_int(rng, 2, 4);
            std::map<int, std::set<ChargeId>> by_level;
            std::set<ChargeId> unselected;
            for (auto c : q.candidate_charge_set) {
                auto it = importance.find(c);
                double u = (it == importance.end() ? 0.0 : it->second) + normal(rng, 0.0, cfg.annotator_noise);
                if (u <= cfg.selection_threshold) {
                    unselected.insert(c);
                    continue;
                }
                const double width = (1.0 - cfg.selection_threshold) / n_levels;
                int level = static_cast<int>(std::floor((1.0 - u) / width));
                by_level[std::clamp(level, 0, n_levels - 1)].insert(c);
            }
            annotation::SortedPreference pref;
            for (auto& [lvl, set] : by_level) pref.levels.push_back(set);
            pref.unselected = unselected;
            dists.push_back(annotation::intent_distribution(pref));
            ds.preferences.push_back({who, q.id, pref.levels, pref.unselected});
        }
        q.intent_dist = annotation::aggregate_intent(dists);

        std::vector<ChargeId> explicit_intents, partner_intents, non_intents;
        for (auto c : explicit_charges) {
            if (q.intent(c) > 0.0) explicit_intents.push_back(c);
        }
        for (const auto& [c, p] : q.intent_dist) {
            if (p > 0.0 && !explicit_charges.contains(c)) partner_intents.push_back(c);
        }
        for (std::size_t c = 0; c < s; ++c) {
            if (q.intent(static_cast<ChargeId>(c)) == 0.0) non_intents.push_back(static_cast<ChargeId>(c));
        }
        if (explicit_intents.empty()) explicit_intents = partner_intents;
        // Candidates come from a lexical first-stage retrieval, so off-topic
        // documents are mostly about charges the query text resembles.
        std::vector<ChargeId> near_misses;
        for (const auto& sc : predictor.predict(q.text())) {
            if (static_cast<int>(near_misses.size()) >= cfg.near_miss_pool) break;
            if (q.intent(sc.id) == 0.0) near_misses.push_back(sc.id);
        }

        // Candidate documents.
        for (int di = 0; di < cfg.docs_per_query; ++di) {
            CandidateDoc d;
            std::snprintf(idbuf, sizeof idbuf, "-d%02d", di + 1);
            d.id = q.id + idbuf;
            d.query_id = q.id;
            const double r = uniform01(rng);
            bool near_miss = false;
            const double e = cfg.doc_explicit_share, p = e + cfg.doc_partner_share, m = p + cfg.doc_mixed_share;
            if (r < m && !explicit_intents.empty()) {
                const auto& primary = (r >= e && r < p && !partner_intents.empty()) ? partner_intents : explicit_intents;
                d.charges.insert(pick(primary, rng));
                if (r >= p && !partner_intents.empty()) d.charges.insert(pick(partner_intents, rng));
            } else if (!near_misses.empty() && bernoulli(rng, cfg.near_miss_prob)) {
                d.charges.insert(pick(near_misses, rng));
                near_miss = true;
            } else {
                d.charges.insert(pick(non_intents, rng));
            }
            if (bernoulli(rng, cfg.doc_extra_charge_prob)) d.charges.insert(static_cast<ChargeId>(uniform_index(rng, s)));

            std::map<ChargeId, int> depth;
            std::vector<std::string> body;
            for (auto c : d.charges) {
                depth[c] = uniform_int(rng, 1, 3);
                auto picks = bank[static_cast<std::size_t>(c)];
                shuffle(picks, rng);
                const auto n = std::min<std::size_t>(static_cast<std::size_t>(2 * depth[c]), picks.size());
                for (std::size_t i = 0; i < n; ++i) body.push_back(picks[i]);
            }
            int best = 0;
            for (auto c : d.charges) {
                if (q.intent(c) > 0.0) best = std::max(best, depth[c]);
            }
            const int n_facts = best > 0 ? best : (near_miss ? uniform_int(rng, 1, cfg.near_miss_facts_max) : 0);
            for (auto& f : restate(static_cast<std::size_t>(n_facts))) body.push_back(std::move(f));
            const int fill = uniform_int(rng, cfg.doc_filler_min, cfg.doc_filler_max);
            for (int i = 0; i < fill; ++i) body.push_back(filler());
            shuffle(body, rng);
            std::vector<std::string> verdict{pick(verdict_heads, rng)};
            bool first = true;
            for (auto c : d.charges) {
                if (!first) verdict.push_back("and");
                verdict.push_back(ds.vocab.name(c));
                first = false;
            }
            body.push_back(detail::sentence(std::move(verdict)));
            d.sentences = std::move(body);

            if (best > 0) {
                d.query_relevance = std::clamp(best + uniform_int(rng, -1, 1) * (bernoulli(rng, 0.5) ? 1 : 0), 1, 3);
            } else {
                d.query_relevance = bernoulli(rng, 0.1) ? 1 : 0;
            }

            // Triple labels: three annotators of the query's group, median kept.
            for (const auto& [c, pc] : q.intent_dist) {
                if (!annotation::triple_needs_annotation(q, c, d)) continue;
                std::vector<int> grades;
                for (int a = 0; a < cfg.annotators_per_group; ++a) {
                    const auto& who = annotator_names[static_cast<std::size_t>(group * cfg.annotators_per_group + a)];
                    const int g = std::clamp(depth[c] + static_cast<int>(std::lround(normal(rng, 0.0, 0.6))), 0, 3);
                    grades.push_back(g);
                    ds.annotations.push_back({who, group_name, q.id, c, d.id, g});
                }
                ds.triples.push_back({q.id, c, d.id, annotation::median_label(grades)});
            }
            ds.docs.push_back(std::move(d));
        }
        ds.queries.push_back(std::move(q));
    }

    std::vector<QueryId> ids;
    for (const auto& q : ds.queries) ids.push_back(q.id);
    shuffle(ids, rng);
    const auto [n_train, n_test] = cfg.split_sizes();
    ds.split.train.assign(ids.begin(), ids.begin() + n_train);
    ds.split.test.assign(ids.begin() + n_train, ids.end());
    std::sort(ds.split.train.begin(), ds.split.train.end());
    std::sort(ds.split.test.begin(), ds.split.test.end());
    ds.reindex();
    return out;
}

/// Generate and write a dataset directory.
inline SyntheticDataset generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed,
                                           const std::filesystem::path& dir) {
    auto out = generate_synthetic(cfg, seed);
    save_dataset(out.dataset, dir);
    return out;
}

}  // namespace divlex::synthetic
