#pragma once

// Per-pair DLRM features: {T_s, 0..., T_s} from the text-similarity module
// followed by the Kronecker product of the walked query and document charge
// distributions.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divlex/chargegraph.hpp"
#include "divlex/corpus.hpp"
#include "divlex/mlp.hpp"
#include "divlex/predictor.hpp"
#include "divlex/rng.hpp"
#include "divlex/sparse.hpp"
#include "divlex/textsim.hpp"

namespace divlex {

struct DlrmConfig {
    textsim::WindowSpec query_window = textsim::kQueryWindow;
    textsim::WindowSpec doc_window = textsim::kDocWindow;
    std::size_t sim_length = textsim::kDefaultSimLength;
    double alpha = chargegraph::kDefaultAlpha;
    int query_steps = chargegraph::kDefaultSteps;
    int doc_steps = chargegraph::kDefaultSteps;
    std::size_t top_k = chargegraph::kDefaultTopK;
    double boost = chargegraph::kDefaultBoost;
};

struct QueryRepresentation {
    std::vector<textsim::Embedding> passages;
    textsim::Embedding whole;
    std::vector<ScoredCharge> prediction;
    chargegraph::ChargeDistribution initial;  // C_qo
    chargegraph::ChargeDistribution walked;   // C_q
};

struct DocRepresentation {
    std::vector<textsim::Embedding> passages;
    textsim::Embedding whole;
    std::optional<chargegraph::ChargeDistribution> walked;  // C_d; empty for docs without charges
};

/// Precomputes every query and document representation of a dataset, after
/// which all lookups are const and safe to share across threads.
class Featurizer {
public:
    Featurizer(const Dataset& ds, const textsim::EmbeddingProvider& embedder, const ChargePredictor& predictor,
               chargegraph::ChargeGraph graph, DlrmConfig cfg = {})
        : ds_(ds), graph_(std::move(graph)), cfg_(cfg) {
        const std::size_t s = ds.vocab.size();
        if (graph_.size() != s) throw DimensionMismatch("charge graph size differs from vocabulary size");
        for (const auto& q : ds.queries) {
            QueryRepresentation r;
            auto passages = textsim::csw_slice(q.sentences, cfg_.query_window);
            if (2 * passages.size() > cfg_.sim_length) {
                throw textsim::InputTooLong("query '" + q.id + "' yields " + std::to_string(passages.size()) +
                                            " passages; at most " + std::to_string(cfg_.sim_length / 2) + " fit");
            }
            r.passages = embed_with_whole(embedder, passages, q.text(), r.whole);
            r.prediction = predictor.predict(q.text());
            auto ccs = q.candidate_charge_set;
            if (ccs.empty()) {
                for (const auto& c : top_charges(r.prediction, cfg_.top_k)) ccs.insert(c);
            }
            r.initial = chargegraph::init_query_dist(s, ccs, r.prediction, cfg_.top_k, cfg_.boost);
            r.walked = chargegraph::rwog(r.initial, graph_, cfg_.query_steps);
            queries_.emplace(q.id, std::move(r));
        }
        for (const auto& d : ds.docs) {
            DocRepresentation r;
            auto passages = textsim::csw_slice(d.sentences, cfg_.doc_window);
            r.passages = embed_with_whole(embedder, passages, d.text(), r.whole);
            if (!d.charges.empty()) {
                r.walked = chargegraph::rwog(chargegraph::init_doc_dist(s, d.charges), graph_, cfg_.doc_steps);
            }
            docs_.emplace(d.id, std::move(r));
        }
    }

    const Dataset& dataset() const noexcept { return ds_; }
    const DlrmConfig& config() const noexcept { return cfg_; }
    const chargegraph::ChargeGraph& graph() const noexcept { return graph_; }
    std::size_t num_charges() const noexcept { return ds_.vocab.size(); }
    std::size_t input_dim() const noexcept { return cfg_.sim_length + num_charges() * num_charges(); }

    const QueryRepresentation& query(const std::string& id) const { return queries_.at(id); }
    const DocRepresentation& doc(const std::string& id) const { return docs_.at(id); }

    /// Padded text-similarity vector T_sim.
    std::vector<double> text_similarity(const QueryCase& q, const CandidateDoc& d) const {
        auto ts = textsim::similarity_vector(query(q.id).passages, doc(d.id).passages);
        return textsim::pad_fixed(ts, cfg_.sim_length);
    }

    /// C_qd; all-zero for a document without charges.
    SparseVector charge_similarity(const QueryCase& q, const CandidateDoc& d) const {
        const auto& dr = doc(d.id);
        if (!dr.walked) {
            SparseVector z;
            z.dim = num_charges() * num_charges();
            return z;
        }
        return chargegraph::kron_feature(query(q.id).walked, *dr.walked);
    }

    /// Whole-text cosine rescaled to [0, 1].
    double text_relevance(const QueryCase& q, const CandidateDoc& d) const {
        return (textsim::cosine(query(q.id).whole, doc(d.id).whole) + 1.0) / 2.0;
    }

    double doc_similarity(const CandidateDoc& a, const CandidateDoc& b) const {
        return textsim::cosine(doc(a.id).whole, doc(b.id).whole);
    }

    /// MLP input for a pair. Masked modes zero a block; the random mode
    /// replaces both blocks with vectors seeded by (seed, query id, doc id).
    SparseVector features(const QueryCase& q, const CandidateDoc& d, model::FeatureMode mode = model::FeatureMode::kFull,
                          std::uint64_t seed = 0) const {
        using model::FeatureMode;
        const std::size_t s = num_charges();
        SparseVector out;
        out.dim = input_dim();
        if (mode == FeatureMode::kRandom) {
            Rng rng(derive_seed(seed, fnv1a(q.id), fnv1a(d.id)));
            for (std::size_t i = 0; i < cfg_.sim_length; ++i) out.push(static_cast<std::uint32_t>(i), uniform01(rng));
            auto random_dist = [&] {
                std::vector<double> w(s, 0.0);
                for (int k = 0; k < 4; ++k) w[uniform_index(rng, s)] += uniform01(rng) + 1e-3;
                return chargegraph::ChargeDistribution::normalized(std::move(w));
            };
            auto a = random_dist();
            auto b = random_dist();
            append(out, chargegraph::kron_feature(a, b));
            return out;
        }
        if (mode != FeatureMode::kChargeOnly) {
            auto t = text_similarity(q, d);
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (t[i] != 0.0) out.push(static_cast<std::uint32_t>(i), t[i]);
            }
        }
        if (mode != FeatureMode::kTextOnly) append(out, charge_similarity(q, d));
        return out;
    }

private:
    void append(SparseVector& out, const SparseVector& charge) const {
        for (std::size_t k = 0; k < charge.nnz(); ++k) {
            out.push(static_cast<std::uint32_t>(cfg_.sim_length + charge.index[k]), charge.value[k]);
        }
    }

    static std::vector<textsim::Embedding> embed_with_whole(const textsim::EmbeddingProvider& embedder,
                                                            const std::vector<textsim::Passage>& passages,
                                                            const std::string& whole_text, textsim::Embedding& whole) {
        std::vector<std::string> texts;
        texts.reserve(passages.size() + 1);
        for (const auto& p : passages) texts.push_back(p.text());
        texts.push_back(whole_text);
        auto vecs = embedder.embed_texts(texts);
        if (vecs.size() != texts.size()) throw ProviderError("provider returned wrong number of vectors");
        for (const auto& v : vecs) {
            if (v.size() != embedder.dim()) throw ProviderError("provider returned vector of wrong dimension");
        }
        whole = std::move(vecs.back());
        vecs.pop_back();
        return vecs;
    }

    const Dataset& ds_;
    chargegraph::ChargeGraph graph_;
    DlrmConfig cfg_;
    std::unordered_map<std::string, QueryRepresentation> queries_;
    std::unordered_map<std::string, DocRepresentation> docs_;
};

}  // namespace divlex
