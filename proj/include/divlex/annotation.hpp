#pragma once

// Dataset-construction math: candidate charge sets, intent distributions
// from sorted annotator preferences, label aggregation, the triple filter,
// and inter-annotator agreement.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "divlex/corpus.hpp"
#include "divlex/error.hpp"
#include "divlex/predictor.hpp"

namespace divlex::annotation {

class EmptyPreference : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};
class MismatchedKeys : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};
class EmptyInput : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};
class InsufficientAnnotators : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

using IntentMap = std::map<ChargeId, double>;

/// An annotator's ordering of a query's candidate charges, best level first.
struct SortedPreference {
    std::vector<std::set<ChargeId>> levels;
    std::set<ChargeId> unselected;

    /// Throws InvalidArgument on overlapping or empty levels.
    void validate() const {
        std::set<ChargeId> seen;
        for (const auto& level : levels) {
            if (level.empty()) throw InvalidArgument("empty preference level");
            for (auto c : level) {
                if (!seen.insert(c).second) throw InvalidArgument("charge " + std::to_string(c) + " appears in two levels");
            }
        }
        for (auto c : unselected) {
            if (seen.contains(c)) throw InvalidArgument("charge " + std::to_string(c) + " both ranked and unselected");
        }
    }
};

/// Regex-extracted charge names united with the predictor's top `top_k`.
inline std::set<ChargeId> candidate_charge_set(std::string_view text, const ChargeNameMatcher& extractor,
                                               const ChargePredictor& predictor, std::size_t top_k = 5) {
    auto prediction = predictor.predict(text);
    if (prediction.size() < top_k) {
        throw PredictorUnavailable("predictor returned " + std::to_string(prediction.size()) + " charges, need " +
                                   std::to_string(top_k));
    }
    auto out = extractor.match(text);
    for (auto c : top_charges(prediction, top_k)) out.insert(c);
    return out;
}

/// With k levels, level j (0 = best) maps to (k - j) / k; unselected maps to 0.
inline IntentMap intent_distribution(const SortedPreference& pref) {
    if (pref.levels.empty() && pref.unselected.empty()) throw EmptyPreference("preference has no charges");
    pref.validate();
    IntentMap out;
    const auto k = static_cast<double>(pref.levels.size());
    for (std::size_t j = 0; j < pref.levels.size(); ++j) {
        for (auto c : pref.levels[j]) out[c] = (k - static_cast<double>(j)) / k;
    }
    for (auto c : pref.unselected) out[c] = 0.0;
    return out;
}

/// Per-charge arithmetic mean over annotators.
inline IntentMap aggregate_intent(std::span<const IntentMap> dists) {
    if (dists.empty()) throw EmptyInput("no intent distributions to aggregate");
    IntentMap out;
    for (const auto& [c, p] : dists.front()) out[c] = 0.0;
    for (const auto& d : dists) {
        if (d.size() != out.size()) throw MismatchedKeys("annotators cover different charge sets");
        for (const auto& [c, p] : d) {
            auto it = out.find(c);
            if (it == out.end()) throw MismatchedKeys("charge " + std::to_string(c) + " missing from some annotator");
            it->second += p;
        }
    }
    for (auto& [c, p] : out) p /= static_cast<double>(dists.size());
    return out;
}

/// Median grade; the lower median for even counts.
inline int median_label(std::vector<int> grades) {
    if (grades.empty()) throw EmptyInput("median of no grades");
    std::sort(grades.begin(), grades.end());
    return grades[(grades.size() - 1) / 2];
}

/// True iff the charge is a query intent, the doc is query-relevant, and
/// the doc carries the charge.
inline bool triple_needs_annotation(const QueryCase& q, ChargeId charge, const CandidateDoc& d) {
    return q.intent(charge) > 0.0 && d.query_relevance > 0 && d.charges.contains(charge);
}

/// Cohen's kappa between two categorical label vectors over the same items.
/// When both annotators use a single identical category the chance
/// agreement is 1 and kappa is defined as 1.
inline double cohen_kappa(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw InvalidArgument("label vectors differ in length");
    if (a.empty()) throw EmptyInput("no items");
    std::map<int, double> ca, cb;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += (a[i] == b[i]) ? 1.0 : 0.0;
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    const double po = agree / n;
    double pe = 0.0;
    for (const auto& [k, v] : ca) {
        auto it = cb.find(k);
        if (it != cb.end()) pe += (v / n) * (it->second / n);
    }
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

/// Fleiss' kappa; `labels[r][i]` is rater r's category for item i.
inline double fleiss_kappa(std::span<const std::vector<int>> labels) {
    if (labels.size() < 2) throw InsufficientAnnotators("fleiss kappa needs at least two raters");
    const std::size_t items = labels.front().size();
    for (const auto& l : labels) {
        if (l.size() != items) throw InvalidArgument("raters labelled different item sets");
    }
    if (items == 0) throw EmptyInput("no items");
    const double n = static_cast<double>(labels.size());
    std::map<int, double> totals;
    double mean_p = 0.0;
    for (std::size_t i = 0; i < items; ++i) {
        std::map<int, double> counts;
        for (const auto& l : labels) counts[l[i]] += 1.0;
        double s = 0.0;
        for (const auto& [k, v] : counts) {
            s += v * (v - 1.0);
            totals[k] += v;
        }
        mean_p += s / (n * (n - 1.0));
    }
    mean_p /= static_cast<double>(items);
    double pe = 0.0;
    for (const auto& [k, v] : totals) {
        double pj = v / (n * static_cast<double>(items));
        pe += pj * pj;
    }
    if (pe >= 1.0) return mean_p >= 1.0 ? 1.0 : 0.0;
    return (mean_p - pe) / (1.0 - pe);
}

/// Kendall's tau-b between two score vectors (higher = ranked better).
/// NaN when either vector is constant.
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("rankings differ in length");
    double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) continue;
            if (dx == 0.0) {
                ties_x += 1.0;
            } else if (dy == 0.0) {
                ties_y += 1.0;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    const double denom = std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (concordant - discordant) / denom;
}

/// Pairwise agreement between annotators. Pairs are stored with i < j;
/// lookups are symmetric and the diagonal is absent.
struct AgreementReport {
    std::vector<std::string> annotators;
    std::map<std::pair<std::size_t, std::size_t>, double> pairwise_kappa;
    std::map<std::pair<std::size_t, std::size_t>, double> pairwise_kendall_tau;
    double fleiss = std::numeric_limits<double>::quiet_NaN();

    double kappa(std::size_t i, std::size_t j) const { return pairwise_kappa.at(key(i, j)); }
    double tau(std::size_t i, std::size_t j) const { return pairwise_kendall_tau.at(key(i, j)); }

    static std::pair<std::size_t, std::size_t> key(std::size_t i, std::size_t j) {
        if (i == j) throw InvalidArgument("agreement of an annotator with itself is undefined");
        return i < j ? std::pair{i, j} : std::pair{j, i};
    }
};

/// `labels[a]` holds annotator a's grades over a shared item list;
/// `rankings[a][q]` holds a's scores over query q's items (same item order
/// for every annotator). Tau is the mean tau-b over queries where it is
/// defined; NaN if none is.
inline AgreementReport agreement(std::span<const std::vector<int>> labels,
                                 std::span<const std::vector<std::vector<double>>> rankings,
                                 std::vector<std::string> names = {}) {
    const std::size_t n = std::max(labels.size(), rankings.size());
    if (n < 2) throw InsufficientAnnotators("agreement needs at least two annotators");
    if (!labels.empty() && labels.size() != n) throw InvalidArgument("label and ranking annotator counts differ");
    if (!rankings.empty() && rankings.size() != n) throw InvalidArgument("label and ranking annotator counts differ");
    AgreementReport rep;
    if (names.empty()) {
        for (std::size_t i = 0; i < n; ++i) names.push_back("A" + std::to_string(i + 1));
    }
    if (names.size() != n) throw InvalidArgument("annotator name count mismatch");
    rep.annotators = std::move(names);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!labels.empty()) rep.pairwise_kappa[{i, j}] = cohen_kappa(labels[i], labels[j]);
            if (!rankings.empty()) {
                if (rankings[i].size() != rankings[j].size()) throw InvalidArgument("annotators ranked different query sets");
                double sum = 0.0;
                std::size_t defined = 0;
                for (std::size_t q = 0; q < rankings[i].size(); ++q) {
                    double t = kendall_tau_b(rankings[i][q], rankings[j][q]);
                    if (std::isnan(t)) continue;
                    sum += t;
                    ++defined;
                }
                rep.pairwise_kendall_tau[{i, j}] =
                    defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    if (!labels.empty()) rep.fleiss = fleiss_kappa(labels);
    return rep;
}

/// Group-level agreement computed from the raw annotator files of a dataset:
/// grades on triples every group member labelled, and tau over the intent
/// values each member's preference assigns to the query's candidate charges.
inline std::map<std::string, AgreementReport> agreement_by_group(const Dataset& ds) {
    std::map<std::string, std::vector<std::string>> members;
    for (const auto& a : ds.annotations) {
        auto& m = members[a.group];
        if (std::find(m.begin(), m.end(), a.annotator) == m.end()) m.push_back(a.annotator);
    }
    std::map<std::string, AgreementReport> out;
    for (auto& [group, names] : members) {
        std::sort(names.begin(), names.end());
        if (names.size() < 2) continue;
        std::map<std::tuple<QueryId, ChargeId, DocId>, std::map<std::string, int>> items;
        std::set<QueryId> group_queries;
        for (const auto& a : ds.annotations) {
            if (a.group != group) continue;
            items[{a.query_id, a.charge_id, a.doc_id}][a.annotator] = a.grade;
            group_queries.insert(a.query_id);
        }
        std::vector<std::vector<int>> labels(names.size());
        for (const auto& [key, by] : items) {
            if (by.size() != names.size()) continue;
            for (std::size_t i = 0; i < names.size(); ++i) labels[i].push_back(by.at(names[i]));
        }
        std::map<QueryId, std::map<std::string, const AnnotatorPreference*>> prefs;
        for (const auto& p : ds.preferences) {
            if (std::find(names.begin(), names.end(), p.annotator) != names.end()) prefs[p.query_id][p.annotator] = &p;
        }
        std::vector<std::vector<std::vector<double>>> rankings(names.size());
        for (const auto& [qid, by] : prefs) {
            if (by.size() != names.size()) continue;
            std::vector<IntentMap> dists;
            for (const auto& name : names) {
                const auto* p = by.at(name);
                dists.push_back(intent_distribution(SortedPreference{p->levels, p->unselected}));
            }
            for (std::size_t i = 0; i < names.size(); ++i) {
                std::vector<double> v;
                for (const auto& [c, ignored] : dists.front()) {
                    auto it = dists[i].find(c);
                    v.push_back(it == dists[i].end() ? 0.0 : it->second);
                }
                rankings[i].push_back(std::move(v));
            }
        }
        const bool have_labels = !labels.front().empty();
        const bool have_rankings = !rankings.front().empty();
        if (!have_labels && !have_rankings) continue;
        out.emplace(group, agreement(have_labels ? std::span<const std::vector<int>>(labels) : std::span<const std::vector<int>>{},
                                     have_rankings ? std::span<const std::vector<std::vector<double>>>(rankings)
                                                   : std::span<const std::vector<std::vector<double>>>{},
                                     names));
    }
    return out;
}

/// TSV with one row per (group, annotator pair) and one Fleiss row per group.
inline void write_agreement_tsv(std::ostream& out, const std::map<std::string, AgreementReport>& reports) {
    auto fmt = [](double v) {
        if (std::isnan(v)) return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    out << "group\tannotator_a\tannotator_b\tcohen_kappa\tkendall_tau_b\n";
    for (const auto& [group, rep] : reports) {
        for (std::size_t i = 0; i < rep.annotators.size(); ++i) {
            for (std::size_t j = i + 1; j < rep.annotators.size(); ++j) {
                auto k = rep.pairwise_kappa.find({i, j});
                auto t = rep.pairwise_kendall_tau.find({i, j});
                out << group << '\t' << rep.annotators[i] << '\t' << rep.annotators[j] << '\t'
                    << fmt(k == rep.pairwise_kappa.end() ? std::nan("") : k->second) << '\t'
                    << fmt(t == rep.pairwise_kendall_tau.end() ? std::nan("") : t->second) << '\n';
            }
        }
        out << group << "\t*\t*\t" << fmt(rep.fleiss) << "\tnan\n";
    }
}

}  // namespace divlex::annotation
