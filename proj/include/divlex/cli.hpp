#pragma once

// Command-line front end. `run` is the whole program; main() only forwards
// argv and the standard streams so tests can drive it in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "divlex/annotation.hpp"
#include "divlex/chargegraph.hpp"
#include "divlex/corpus.hpp"
#include "divlex/experiment.hpp"
#include "divlex/features.hpp"
#include "divlex/mlp.hpp"
#include "divlex/predictor.hpp"
#include "divlex/sidecar.hpp"
#include "divlex/synthetic.hpp"
#include "divlex/textsim.hpp"
#include "divlex/training.hpp"

namespace divlex::cli {

inline constexpr int kOk = 0;
inline constexpr int kValidationFailure = 1;
inline constexpr int kUsageError = 2;

/// Raised for bad flag combinations found after parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string embedder;
    std::size_t hash_dim = 128;
    double alpha = chargegraph::kDefaultAlpha;
    int query_steps = chargegraph::kDefaultSteps;
    int doc_steps = chargegraph::kDefaultSteps;
    std::string graph_file;

    std::string dataset;
    std::string out;

    // gen
    synthetic::GeneratorConfig gen;

    // train
    std::size_t n_samples = 100'000;
    double lr = 1e-3;
    std::size_t mc_samples = training::kDefaultMcSamples;
    std::string metric = "ndcg-ia";
    std::string mode = "full";
    std::size_t batch_size = 32;
    std::vector<std::size_t> hidden = model::default_hidden_sizes();

    // rank / eval / features
    std::vector<std::string> models;
    std::string query;
    std::string method = "dlrm";
    std::string split = "test";
    std::string json_out;
    std::string ttest_out;
    bool strict = false;
    double alpha_metric = 0.5;
};

namespace detail {

struct Providers {
    std::unique_ptr<textsim::EmbeddingProvider> embedder;
    std::unique_ptr<ChargePredictor> predictor;
};

inline Providers make_providers(const Options& o, const Dataset& ds) {
    Providers p;
    auto choice = sidecar::EmbedderChoice::parse(o.embedder);
    if (choice.use_sidecar) {
        auto client = std::make_shared<sidecar::Client>(choice.url);
        p.embedder = std::make_unique<sidecar::SidecarEmbedder>(client);
        p.predictor = std::make_unique<sidecar::SidecarChargePredictor>(client, ds.vocab.size());
    } else {
        p.embedder = std::make_unique<textsim::HashingEmbedder>(o.hash_dim);
        p.predictor = std::make_unique<KeywordChargePredictor>(ds.vocab, ds.templates);
    }
    return p;
}

inline chargegraph::ChargeGraph load_graph(const Options& o, const Dataset& ds) {
    if (!o.graph_file.empty()) {
        std::ifstream in(o.graph_file);
        if (!in) throw Error("cannot open " + o.graph_file);
        return chargegraph::ChargeGraph::load(in);
    }
    auto g = chargegraph::ReversalMatrix::from_reversals(ds.vocab.size(), ds.reversals);
    return chargegraph::build_graph(g, o.alpha);
}

inline DlrmConfig dlrm_config(const Options& o) {
    DlrmConfig c;
    c.alpha = o.alpha;
    c.query_steps = o.query_steps;
    c.doc_steps = o.doc_steps;
    return c;
}

inline std::uint64_t require_seed(const Options& o, const char* cmd) {
    if (!o.seed) throw UsageError(std::string(cmd) + ": --seed is required");
    return *o.seed;
}

inline void require(const std::string& v, const char* flag, const char* cmd) {
    if (v.empty()) throw UsageError(std::string(cmd) + ": " + flag + " is required");
}

/// Writes to the file, or to `fallback` when the path is empty or "-".
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F&& body) {
    if (path.empty() || path == "-") {
        body(fallback);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    body(f);
}

inline std::string default_model_name(model::FeatureMode m) {
    switch (m) {
        case model::FeatureMode::kFull: return "DLRM";
        case model::FeatureMode::kTextOnly: return "Text-Only";
        case model::FeatureMode::kChargeOnly: return "Charge-Only";
        case model::FeatureMode::kRandom: return "Random";
    }
    return "DLRM";
}

/// "NAME=path" or a bare path.
inline std::pair<std::string, std::string> split_model_arg(const std::string& arg) {
    auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) return {"", arg};
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

inline std::vector<QueryId> pick_queries(const Dataset& ds, const std::string& split) {
    if (split == "test") return ds.split.test;
    if (split == "train") return ds.split.train;
    if (split == "all") {
        std::vector<QueryId> all;
        for (const auto& q : ds.queries) all.push_back(q.id);
        return all;
    }
    throw UsageError("--split must be test, train or all");
}

inline metrics::MetricOptions metric_options(const Options& o) {
    metrics::MetricOptions m;
    m.alpha = o.alpha_metric;
    m.missing = o.strict ? metrics::MissingPolicy::kStrict : metrics::MissingPolicy::kLenient;
    return m;
}

}  // namespace detail

inline int cmd_gen(const Options& o, std::ostream& out) {
    detail::require(o.out, "--out", "gen");
    auto seed = detail::require_seed(o, "gen");
    auto syn = synthetic::generate_synthetic(o.gen, seed, o.out);
    out << "wrote " << o.out << ": " << syn.dataset.queries.size() << " queries, " << syn.dataset.docs.size()
        << " docs, " << syn.dataset.triples.size() << " triples\n";
    return kOk;
}

inline int cmd_validate(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "validate");
    auto ds = load_dataset(o.dataset);
    out << "ok: " << ds.vocab.size() << " charges, " << ds.queries.size() << " queries, " << ds.docs.size()
        << " docs, " << ds.triples.size() << " triples\n";
    return kOk;
}

inline int cmd_graph(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "graph");
    auto ds = load_dataset(o.dataset);
    auto g = detail::load_graph(o, ds);
    detail::emit(o.out, out, [&](std::ostream& s) { g.save(s); });
    return kOk;
}

inline int cmd_features(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "features");
    auto seed = detail::require_seed(o, "features");
    auto ds = load_dataset(o.dataset);
    auto prov = detail::make_providers(o, ds);
    Featurizer f(ds, *prov.embedder, *prov.predictor, detail::load_graph(o, ds), detail::dlrm_config(o));
    const auto mode = model::parse_feature_mode(o.mode);
    if (!o.query.empty()) (void)ds.query(o.query);
    detail::emit(o.out, out, [&](std::ostream& s) {
        for (const auto& q : ds.queries) {
            if (!o.query.empty() && q.id != o.query) continue;
            for (const auto* d : ds.candidates(q.id)) {
                auto x = f.features(q, *d, mode, seed);
                std::vector<double> t_sim(f.config().sim_length, 0.0);
                nlohmann::json c_qd = nlohmann::json::array();
                for (std::size_t k = 0; k < x.nnz(); ++k) {
                    if (x.index[k] < f.config().sim_length) {
                        t_sim[x.index[k]] = x.value[k];
                    } else {
                        c_qd.push_back({x.index[k] - f.config().sim_length, x.value[k]});
                    }
                }
                nlohmann::json rec{{"query_id", q.id}, {"doc_id", d->id}, {"t_sim", t_sim}, {"c_qd", c_qd}};
                s << rec.dump() << '\n';
            }
        }
    });
    return kOk;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    detail::require(o.dataset, "--dataset", "train");
    detail::require(o.out, "--out", "train");
    auto seed = detail::require_seed(o, "train");
    auto ds = load_dataset(o.dataset);
    auto prov = detail::make_providers(o, ds);
    Featurizer f(ds, *prov.embedder, *prov.predictor, detail::load_graph(o, ds), detail::dlrm_config(o));

    training::TrainingSetConfig tc;
    tc.n_samples = o.n_samples;
    tc.mc_samples = o.mc_samples;
    tc.seed = seed;
    tc.mode = model::parse_feature_mode(o.mode);
    tc.reward.metric = training::parse_reward_metric(o.metric);
    training::TrainingStream stream(f, ds.split.train, tc);

    model::TrainConfig mc;
    mc.learning_rate = o.lr;
    mc.batch_size = o.batch_size;
    mc.seed = seed;
    mc.hidden = o.hidden;
    model::TrainReport rep;
    auto m = training::train_stream(stream, f.config().sim_length, ds.vocab.size(), mc, &rep, tc.mode);

    auto j = m.to_json();
    j["training"] = {{"seed", seed},         {"n_samples", o.n_samples}, {"lr", o.lr},
                     {"mc_samples", o.mc_samples}, {"metric", o.metric}, {"batch_size", o.batch_size}};
    {
        std::ofstream f_out(o.out, std::ios::binary);
        if (!f_out) throw Error("cannot write " + o.out);
        f_out << j.dump() << '\n';
    }
    err << "holdout mse " << rep.initial_holdout_mse << " -> " << rep.final_holdout_mse << " over " << rep.steps
        << " steps\n";
    out << "wrote " << o.out << '\n';
    return kOk;
}

inline int cmd_rank(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "rank");
    detail::require(o.query, "--query", "rank");
    auto seed = detail::require_seed(o, "rank");
    auto ds = load_dataset(o.dataset);
    const auto& q = ds.query(o.query);
    auto prov = detail::make_providers(o, ds);
    Featurizer f(ds, *prov.embedder, *prov.predictor, detail::load_graph(o, ds), detail::dlrm_config(o));

    std::vector<DocId> ranking;
    std::map<DocId, double> scores;
    if (o.method == "dlrm") {
        if (o.models.size() != 1) throw UsageError("rank --method dlrm needs exactly one --model");
        auto m = model::RankerModel::load(detail::split_model_arg(o.models.front()).second);
        for (const auto& sd : training::rank(m, f, q, ds.candidates(q.id), seed)) {
            ranking.push_back(sd.id);
            scores[sd.id] = sd.score;
        }
    } else {
        experiment::EvalConfig ec;
        ec.seed = seed;
        experiment::BaselineRanker ranker(f, ec);
        static const std::map<std::string, experiment::Baseline> methods{
            {"bm25", experiment::Baseline::kBm25},
            {"mmr", experiment::Baseline::kMmr},
            {"ia-select", experiment::Baseline::kIaSelect},
            {"exia-select", experiment::Baseline::kExIaSelect}};
        auto it = methods.find(o.method);
        if (it == methods.end()) throw UsageError("unknown --method " + o.method);
        double lambda = 0.0;
        if (it->second == experiment::Baseline::kMmr) {
            double best = -1.0;
            for (double l : ec.mmr_lambdas) {
                double v = experiment::mmr_objective(f, ranker, ds.split.train, l, ec.metric);
                if (v > best) {
                    best = v;
                    lambda = l;
                }
            }
        }
        ranking = ranker.rank(it->second, q, lambda);
    }
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        out << (i + 1) << '\t' << ranking[i];
        if (auto s = scores.find(ranking[i]); s != scores.end()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", s->second);
            out << '\t' << buf;
        }
        out << '\n';
    }
    return kOk;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "eval");
    auto seed = detail::require_seed(o, "eval");
    auto ds = load_dataset(o.dataset);
    auto queries = detail::pick_queries(ds, o.split);
    auto prov = detail::make_providers(o, ds);
    Featurizer f(ds, *prov.embedder, *prov.predictor, detail::load_graph(o, ds), detail::dlrm_config(o));

    std::vector<model::RankerModel> models;
    std::vector<std::string> names;
    for (const auto& arg : o.models) {
        auto [name, path] = detail::split_model_arg(arg);
        models.push_back(model::RankerModel::load(path));
        if (models.back().num_charges() != ds.vocab.size()) {
            throw DimensionMismatch("model " + path + " was trained on a different charge vocabulary");
        }
        names.push_back(name.empty() ? detail::default_model_name(models.back().mode()) : name);
    }
    std::vector<experiment::NamedModel> named;
    for (std::size_t i = 0; i < models.size(); ++i) named.push_back({names[i], &models[i]});

    experiment::EvalConfig ec;
    ec.jobs = o.jobs;
    ec.seed = seed;
    ec.metric = detail::metric_options(o);
    auto rep = experiment::evaluate(f, named, ec, &queries);

    detail::emit(o.out, out, [&](std::ostream& s) { experiment::write_table(s, rep); });
    if (!o.json_out.empty()) {
        detail::emit(o.json_out, out, [&](std::ostream& s) { s << experiment::to_json(rep).dump(1) << '\n'; });
    }
    if (!o.ttest_out.empty()) {
        detail::emit(o.ttest_out, out, [&](std::ostream& s) { experiment::write_ttests(s, rep); });
    }
    return kOk;
}

inline int cmd_agreement(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "agreement");
    auto ds = load_dataset(o.dataset);
    if (ds.annotations.empty()) throw UsageError("agreement: dataset has no annotations.jsonl");
    auto reports = annotation::agreement_by_group(ds);
    detail::emit(o.out, out, [&](std::ostream& s) { annotation::write_agreement_tsv(s, reports); });
    return kOk;
}

/// One JSON line per query: its CCS and the (charge, doc) pairs that pass
/// the triple filter and so need grading.
inline int cmd_annotate_prep(const Options& o, std::ostream& out) {
    detail::require(o.dataset, "--dataset", "annotate-prep");
    auto ds = load_dataset(o.dataset);
    auto prov = detail::make_providers(o, ds);
    const ChargeNameMatcher matcher(ds.vocab);
    detail::emit(o.out, out, [&](std::ostream& s) {
        for (const auto& q : ds.queries) {
            auto ccs = annotation::candidate_charge_set(q.text(), matcher, *prov.predictor);
            nlohmann::json triples = nlohmann::json::array();
            for (auto c : ccs) {
                for (const auto* d : ds.candidates(q.id)) {
                    if (annotation::triple_needs_annotation(q, c, *d)) triples.push_back({{"charge_id", c}, {"doc_id", d->id}});
                }
            }
            nlohmann::json rec{{"query_id", q.id},
                               {"ccs", std::vector<ChargeId>(ccs.begin(), ccs.end())},
                               {"triples", triples}};
            s << rec.dump() << '\n';
        }
    });
    return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Options o;
    CLI::App app{"Diversified legal case retrieval toolkit", "divlex"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML file of option values; flags override it");

    app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--jobs", o.jobs, "Worker threads for evaluation")->check(CLI::PositiveNumber);
    app.add_option("--embedder", o.embedder, "builtin-hash, sidecar or sidecar(URL)");
    app.add_option("--hash-dim", o.hash_dim, "Dimension of the builtin embedder")->check(CLI::PositiveNumber);
    app.add_option("--alpha", o.alpha, "Self-loop weight of the charge graph")->check(CLI::Range(0.0, 1.0));
    app.add_option("--query-steps", o.query_steps, "Random-walk steps for queries")->check(CLI::NonNegativeNumber);
    app.add_option("--doc-steps", o.doc_steps, "Random-walk steps for documents")->check(CLI::NonNegativeNumber);
    app.add_option("--graph", o.graph_file, "Charge graph file (default: built from reversals)");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("--out", o.out, "Output directory");
    gen->add_option("--charges", o.gen.num_charges, "Number of charges");
    gen->add_option("--queries", o.gen.num_queries, "Number of queries");
    gen->add_option("--docs-per-query", o.gen.docs_per_query, "Candidates per query");

    auto* validate = app.add_subcommand("validate", "Check a dataset directory");
    validate->add_option("--dataset", o.dataset, "Dataset directory");

    auto* graph = app.add_subcommand("graph", "Build and dump the charge graph");
    graph->add_option("--dataset", o.dataset, "Dataset directory");
    graph->add_option("--out", o.out, "Output file (default stdout)");

    auto* features = app.add_subcommand("features", "Emit T_sim and C_qd per query-document pair");
    features->add_option("--dataset", o.dataset, "Dataset directory");
    features->add_option("--query", o.query, "Only this query");
    features->add_option("--mode", o.mode, "full, text-only, charge-only or random");
    features->add_option("--out", o.out, "Output JSONL (default stdout)");

    auto* train = app.add_subcommand("train", "Train a ranker checkpoint");
    train->add_option("--dataset", o.dataset, "Dataset directory");
    train->add_option("--out", o.out, "Checkpoint path");
    train->add_option("--samples", o.n_samples, "Training samples")->check(CLI::PositiveNumber);
    train->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    train->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per expected reward")->check(CLI::PositiveNumber);
    train->add_option("--metric", o.metric, "Reward metric: ndcg-ia or alpha-ndcg");
    train->add_option("--mode", o.mode, "full, text-only, charge-only or random");
    train->add_option("--batch-size", o.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    train->add_option("--hidden", o.hidden, "Hidden layer sizes")->delimiter(',');

    auto* rank = app.add_subcommand("rank", "Rank one query's candidates");
    rank->add_option("--dataset", o.dataset, "Dataset directory");
    rank->add_option("--query", o.query, "Query id");
    rank->add_option("--method", o.method, "dlrm, bm25, mmr, ia-select or exia-select");
    rank->add_option("--model", o.models, "Checkpoint (for --method dlrm)");

    auto* eval = app.add_subcommand("eval", "Evaluate baselines and models");
    eval->add_option("--dataset", o.dataset, "Dataset directory");
    eval->add_option("--model", o.models, "Checkpoint, optionally NAME=path; repeatable");
    eval->add_option("--out", o.out, "Report TSV (default stdout)");
    eval->add_option("--json", o.json_out, "Per-query JSON detail");
    eval->add_option("--ttests", o.ttest_out, "Pairwise t-test TSV");
    eval->add_option("--split", o.split, "test, train or all");
    eval->add_option("--alpha-metric", o.alpha_metric, "Alpha of alpha-NDCG")->check(CLI::Range(0.0, 1.0));
    eval->add_flag("--strict", o.strict, "Fail on missing triples instead of grading them 0");

    auto* agreement = app.add_subcommand("agreement", "Inter-annotator agreement report");
    agreement->add_option("--dataset", o.dataset, "Dataset directory");
    agreement->add_option("--out", o.out, "Output TSV (default stdout)");

    auto* prep = app.add_subcommand("annotate-prep", "CCS and triple worklist for annotators");
    prep->add_option("--dataset", o.dataset, "Dataset directory");
    prep->add_option("--out", o.out, "Output JSONL (default stdout)");

    // Global options may also follow the subcommand name.
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsageError;
    }

    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "gen") return cmd_gen(o, out);
        if (name == "validate") return cmd_validate(o, out);
        if (name == "graph") return cmd_graph(o, out);
        if (name == "features") return cmd_features(o, out);
        if (name == "train") return cmd_train(o, out, err);
        if (name == "rank") return cmd_rank(o, out);
        if (name == "eval") return cmd_eval(o, out);
        if (name == "agreement") return cmd_agreement(o, out);
        if (name == "annotate-prep") return cmd_annotate_prep(o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << sub->help();
        return kUsageError;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n\n" << sub->help();
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    }
    return kUsageError;
}

}  // namespace divlex::cli
