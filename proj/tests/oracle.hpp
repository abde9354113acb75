#pragma once

// Slow, direct re-implementations used to cross-check the library. Nothing
// here shares code with include/divlex beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline double dcg(const std::vector<int>& grades, std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < grades.size() && i < k; ++i) s += (std::pow(2.0, grades[i]) - 1.0) / std::log2(i + 2.0);
    return s;
}

/// Ideal DCG as the maximum over every permutation of the pool.
inline double ideal_dcg(std::vector<int> pool, std::size_t k) {
    std::sort(pool.begin(), pool.end());
    double best = 0.0;
    do {
        best = std::max(best, dcg(pool, k));
    } while (std::next_permutation(pool.begin(), pool.end()));
    return best;
}

inline double ndcg(const std::vector<int>& ranked, std::size_t k, const std::vector<int>& pool) {
    double ideal = ideal_dcg(pool, k);
    return ideal == 0.0 ? 0.0 : dcg(ranked, k) / ideal;
}

struct Instance {
    std::vector<std::string> docs;                             // the universe
    std::map<int, double> intent;                              // charge -> P
    std::map<int, std::map<std::string, int>> grades;          // charge -> doc -> grade (may be sparse)
    std::vector<std::string> ranking;                          // permutation of a subset of docs

    int grade(int c, const std::string& d) const {
        auto it = grades.find(c);
        if (it == grades.end()) return 0;
        auto jt = it->second.find(d);
        return jt == it->second.end() ? 0 : jt->second;
    }
};

inline double ndcg_ia(const Instance& x, std::size_t k) {
    double total = 0.0, weight = 0.0;
    for (const auto& [c, p] : x.intent) {
        if (p <= 0.0) continue;
        weight += p;
        std::vector<int> ranked, pool;
        for (const auto& d : x.ranking) ranked.push_back(x.grade(c, d));
        for (const auto& d : x.docs) pool.push_back(x.grade(c, d));
        total += p * ndcg(ranked, k, pool);
    }
    return weight == 0.0 ? 0.0 : total / weight;
}

inline double alpha_dcg(const Instance& x, const std::vector<std::string>& list, std::size_t k, double alpha,
                        double threshold = 0.5, int min_grade = 2) {
    std::map<int, int> seen;
    double s = 0.0;
    for (std::size_t r = 0; r < list.size() && r < k; ++r) {
        double g = 0.0;
        for (const auto& [c, p] : x.intent) {
            if (p <= threshold) continue;
            if (x.grade(c, list[r]) >= min_grade) g += std::pow(1.0 - alpha, seen[c]++);
        }
        s += g / std::log2(r + 2.0);
    }
    return s;
}

inline double alpha_ndcg(const Instance& x, std::size_t k, double alpha) {
    std::vector<std::string> perm = x.docs;
    std::sort(perm.begin(), perm.end());
    double ideal = 0.0;
    do {
        ideal = std::max(ideal, alpha_dcg(x, perm, k, alpha));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return ideal == 0.0 ? 0.0 : alpha_dcg(x, x.ranking, k, alpha) / ideal;
}

/// Random instance: up to `max_docs` docs, up to `max_intents` intents, some
/// triples left ungraded, ranking a shuffled subset of the docs.
template <typename Gen>
Instance random_instance(Gen& g, int max_docs = 6, int max_intents = 4) {
    Instance x;
    std::uniform_int_distribution<int> nd(1, max_docs), ni(1, max_intents), grade(0, 3), coin(0, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = nd(g);
    for (int i = 0; i < n; ++i) x.docs.push_back("d" + std::to_string(i));
    const int m = ni(g);
    static const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int c = 0; c < m; ++c) {
        x.intent[c * 3 + 1] = coin(g) == 0 ? grid[coin(g)] : u(g);
        for (const auto& d : x.docs) {
            if (coin(g) != 0) x.grades[c * 3 + 1][d] = grade(g);
        }
    }
    x.ranking = x.docs;
    std::shuffle(x.ranking.begin(), x.ranking.end(), g);
    if (coin(g) == 0) x.ranking.resize(std::uniform_int_distribution<std::size_t>(1, x.ranking.size())(g));
    return x;
}

/// Exact expected metric: the mean over every completion of the list.
template <typename Reward>
double exhaustive_expected(std::size_t len, std::size_t position, int doc, const std::vector<int>& pool, Reward&& reward) {
    std::vector<int> rest;
    for (int p : pool) {
        if (p != doc) rest.push_back(p);
    }
    std::sort(rest.begin(), rest.end());
    const std::size_t fill = len - 1;
    double total = 0.0;
    std::size_t count = 0;
    // Every ordered selection of `fill` docs from `rest`: permute and keep
    // distinct prefixes only.
    std::set<std::vector<int>> seen;
    do {
        std::vector<int> pick(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill));
        if (!seen.insert(pick).second) continue;
        std::vector<int> list;
        std::size_t r = 0;
        for (std::size_t i = 0; i < len; ++i) list.push_back(i + 1 == position ? doc : pick[r++]);
        total += reward(list);
        ++count;
    } while (std::next_permutation(rest.begin(), rest.end()));
    return total / static_cast<double>(count);
}

}  // namespace oracle
