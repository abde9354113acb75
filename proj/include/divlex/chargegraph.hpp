#pragma once

// Charge-similarity features: the reversal-frequency graph and its
// row-stochastic transition weights, the random walk over it, query and
// document charge distributions, and their Kronecker product.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "divlex/corpus.hpp"
#include "divlex/error.hpp"
#include "divlex/predictor.hpp"
#include "divlex/sparse.hpp"

namespace divlex::chargegraph {

class NegativeFrequency : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};
class NoCharges : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};
class AllZero : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

inline constexpr double kDefaultAlpha = 0.4;
inline constexpr int kDefaultSteps = 2;
inline constexpr std::size_t kDefaultTopK = 5;
inline constexpr double kDefaultBoost = 0.3;

/// G[i][j]: how often charge i was reversed to charge j. Stored sparse.
class ReversalMatrix {
public:
    explicit ReversalMatrix(std::size_t s = 0) : rows_(s) {}

    static ReversalMatrix from_reversals(std::size_t s, std::span<const Reversal> reversals) {
        ReversalMatrix g(s);
        for (const auto& r : reversals) g.add(r.from, r.to, r.count);
        return g;
    }

    std::size_t size() const noexcept { return rows_.size(); }

    void add(ChargeId from, ChargeId to, std::int64_t count) {
        check(from);
        check(to);
        if (count < 0) throw NegativeFrequency("negative reversal frequency " + std::to_string(count));
        if (count == 0) return;
        rows_[static_cast<std::size_t>(from)][to] += count;
    }

    void set(ChargeId from, ChargeId to, std::int64_t count) {
        check(from);
        check(to);
        if (count < 0) throw NegativeFrequency("negative reversal frequency " + std::to_string(count));
        auto& row = rows_[static_cast<std::size_t>(from)];
        if (count == 0) {
            row.erase(to);
        } else {
            row[to] = count;
        }
    }

    std::int64_t at(ChargeId from, ChargeId to) const {
        const auto& row = rows_.at(static_cast<std::size_t>(from));
        auto it = row.find(to);
        return it == row.end() ? 0 : it->second;
    }

    const std::map<ChargeId, std::int64_t>& row(std::size_t i) const { return rows_.at(i); }

private:
    void check(ChargeId c) const {
        if (c < 0 || static_cast<std::size_t>(c) >= rows_.size()) throw InvalidArgument("charge id out of range");
    }
    std::vector<std::map<ChargeId, std::int64_t>> rows_;
};

/// Probability vector over the charge space.
class ChargeDistribution {
public:
    ChargeDistribution() = default;

    /// Validates non-negativity and unit mass (within 1e-9).
    explicit ChargeDistribution(std::vector<double> p) : p_(std::move(p)) {
        double sum = 0.0;
        for (double x : p_) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("charge distribution has a negative or non-finite entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("charge distribution does not sum to 1");
    }

    /// Normalise non-negative weights to unit mass.
    static ChargeDistribution normalized(std::vector<double> w) {
        double sum = 0.0;
        for (double x : w) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("negative or non-finite weight");
            sum += x;
        }
        if (sum <= 0.0) throw AllZero("all charge weights are zero");
        for (double& x : w) x /= sum;
        ChargeDistribution d;
        d.p_ = std::move(w);
        return d;
    }

    static ChargeDistribution one_hot(std::size_t s, ChargeId c) {
        std::vector<double> p(s, 0.0);
        p.at(static_cast<std::size_t>(c)) = 1.0;
        return ChargeDistribution(std::move(p));
    }

    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& values() const noexcept { return p_; }
    double sum() const noexcept {
        double s = 0.0;
        for (double x : p_) s += x;
        return s;
    }

private:
    std::vector<double> p_;
};

/// Row-stochastic transition weights with self-loop weight alpha.
class ChargeGraph {
public:
    struct Edge {
        ChargeId to;
        double weight;
        bool operator==(const Edge&) const = default;
    };

    ChargeGraph() = default;
    ChargeGraph(double alpha, std::vector<std::vector<Edge>> rows) : alpha_(alpha), rows_(std::move(rows)) {}

    /// Every charge with only a self loop; the walk is then the identity.
    static ChargeGraph identity(std::size_t s) {
        std::vector<std::vector<Edge>> rows(s);
        for (std::size_t i = 0; i < s; ++i) rows[i].push_back({static_cast<ChargeId>(i), 1.0});
        return ChargeGraph(1.0, std::move(rows));
    }

    std::size_t size() const noexcept { return rows_.size(); }
    double alpha() const noexcept { return alpha_; }
    const std::vector<Edge>& row(std::size_t i) const { return rows_.at(i); }

    double weight(ChargeId from, ChargeId to) const {
        for (const auto& e : rows_.at(static_cast<std::size_t>(from))) {
            if (e.to == to) return e.weight;
        }
        return 0.0;
    }

    std::vector<std::vector<double>> dense() const {
        std::vector<std::vector<double>> m(size(), std::vector<double>(size(), 0.0));
        for (std::size_t i = 0; i < size(); ++i) {
            for (const auto& e : rows_[i]) m[i][static_cast<std::size_t>(e.to)] = e.weight;
        }
        return m;
    }

    /// Sparse triplet dump: header lines then "from to weight" per edge.
    void save(std::ostream& out) const {
        char buf[64];
        out << "# divlex charge graph v1\n";
        out << "s " << size() << '\n';
        std::snprintf(buf, sizeof buf, "%.17g", alpha_);
        out << "alpha " << buf << '\n';
        for (std::size_t i = 0; i < size(); ++i) {
            for (const auto& e : rows_[i]) {
                std::snprintf(buf, sizeof buf, "%.17g", e.weight);
                out << i << ' ' << e.to << ' ' << buf << '\n';
            }
        }
    }

    static ChargeGraph load(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || line.rfind("# divlex charge graph", 0) != 0) throw Error("not a charge graph file");
        std::size_t s = 0;
        double alpha = 0.0;
        std::string key;
        if (!(in >> key >> s) || key != "s") throw Error("charge graph file: missing size");
        if (!(in >> key >> alpha) || key != "alpha") throw Error("charge graph file: missing alpha");
        std::vector<std::vector<Edge>> rows(s);
        std::size_t from = 0;
        ChargeId to = 0;
        double w = 0.0;
        while (in >> from >> to >> w) {
            if (from >= s || to < 0 || static_cast<std::size_t>(to) >= s) throw Error("charge graph file: edge out of range");
            rows[from].push_back({to, w});
        }
        return ChargeGraph(alpha, std::move(rows));
    }

private:
    double alpha_ = kDefaultAlpha;
    std::vector<std::vector<Edge>> rows_;
};

/// Transition weights from reversal frequencies. A row without off-diagonal
/// reversals is an identity row; otherwise it keeps alpha on the diagonal
/// and spreads 1 - alpha over its reversal targets in proportion to their
/// counts.
inline ChargeGraph build_graph(const ReversalMatrix& g, double alpha = kDefaultAlpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0,1]");
    const std::size_t s = g.size();
    std::vector<std::vector<ChargeGraph::Edge>> rows(s);
    for (std::size_t i = 0; i < s; ++i) {
        const auto self = static_cast<ChargeId>(i);
        double off = 0.0;
        for (const auto& [j, n] : g.row(i)) {
            if (n < 0) throw NegativeFrequency("negative reversal frequency");
            if (j != self) off += static_cast<double>(n);
        }
        if (off == 0.0 || alpha == 1.0) {
            rows[i].push_back({self, 1.0});
            continue;
        }
        // Keep edges in ascending target order with the self loop in place.
        bool placed = false;
        for (const auto& [j, n] : g.row(i)) {
            if (!placed && j > self) {
                rows[i].push_back({self, alpha});
                placed = true;
            }
            if (j == self || n == 0) continue;
            rows[i].push_back({j, (1.0 - alpha) * static_cast<double>(n) / off});
        }
        if (!placed) rows[i].push_back({self, alpha});
        if (alpha == 0.0) std::erase_if(rows[i], [&](const auto& e) { return e.to == self; });
    }
    return ChargeGraph(alpha, std::move(rows));
}

/// `steps` applications of p <- E^T p.
inline ChargeDistribution rwog(const ChargeDistribution& p0, const ChargeGraph& graph, int steps = kDefaultSteps) {
    if (steps < 0) throw InvalidArgument("step count must be non-negative");
    if (p0.size() != graph.size()) throw DimensionMismatch("distribution and graph sizes differ");
    std::vector<double> p = p0.values();
    std::vector<double> next(p.size());
    for (int t = 0; t < steps; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 0.0) continue;
            for (const auto& e : graph.row(i)) next[static_cast<std::size_t>(e.to)] += e.weight * p[i];
        }
        p.swap(next);
    }
    return ChargeDistribution(std::move(p));
}

/// Query distribution: predictor probability on candidate-set charges,
/// +boost on the predictor's top-k, normalised.
inline ChargeDistribution init_query_dist(std::size_t s, const std::set<ChargeId>& ccs,
                                          std::span<const ScoredCharge> prediction, std::size_t top_k = kDefaultTopK,
                                          double boost = kDefaultBoost) {
    if (ccs.empty()) throw InvalidArgument("candidate charge set is empty");
    std::vector<double> w(s, 0.0);
    for (const auto& sc : prediction) {
        if (sc.id < 0 || static_cast<std::size_t>(sc.id) >= s) throw InvalidArgument("predicted charge out of range");
        if (ccs.contains(sc.id)) w[static_cast<std::size_t>(sc.id)] = sc.prob;
    }
    for (std::size_t k = 0; k < prediction.size() && k < top_k; ++k) w[static_cast<std::size_t>(prediction[k].id)] += boost;
    return ChargeDistribution::normalized(std::move(w));
}

/// Uniform over the document's charges.
inline ChargeDistribution init_doc_dist(std::size_t s, const std::set<ChargeId>& charges) {
    if (charges.empty()) throw NoCharges("document has no charges");
    std::vector<double> w(s, 0.0);
    for (auto c : charges) {
        if (c < 0 || static_cast<std::size_t>(c) >= s) throw InvalidArgument("charge id out of range");
        w[static_cast<std::size_t>(c)] = 1.0;
    }
    return ChargeDistribution::normalized(std::move(w));
}

/// out[i*s + j] = Cq[i] * Cd[j], stored sparse.
inline SparseVector kron_feature(const ChargeDistribution& cq, const ChargeDistribution& cd) {
    if (cq.size() != cd.size()) throw DimensionMismatch("charge distributions differ in size");
    const std::size_t s = cq.size();
    SparseVector out;
    out.dim = s * s;
    for (std::size_t i = 0; i < s; ++i) {
        if (cq[i] == 0.0) continue;
        for (std::size_t j = 0; j < s; ++j) {
            if (cd[j] == 0.0) continue;
            out.push(static_cast<std::uint32_t>(i * s + j), cq[i] * cd[j]);
        }
    }
    return out;
}

}  // namespace divlex::chargegraph
