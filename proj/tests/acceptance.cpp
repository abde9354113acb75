// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "divlex/annotation.hpp"
#include "divlex/chargegraph.hpp"
#include "divlex/cli.hpp"
#include "divlex/experiment.hpp"
#include "divlex/metrics.hpp"
#include "divlex/synthetic.hpp"
#include "divlex/training.hpp"
#include "oracle.hpp"
#include "temp_dir.hpp"

using namespace divlex;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

metrics::QueryJudgments to_judgments(const oracle::Instance& x) {
    metrics::QueryJudgments j;
    for (const auto& [c, p] : x.intent) j.intent[c] = p;
    for (const auto& [c, by] : x.grades) {
        for (const auto& [d, g] : by) j.grades[c][d] = g;
    }
    return j;
}

Result metric_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto x = oracle::random_instance(rng, 6, 4);
        metrics::QueryEvaluator ev(to_judgments(x), x.docs);
        std::vector<int> grades;
        for (int i = 0, n = 1 + static_cast<int>(rng() % 6); i < n; ++i) grades.push_back(static_cast<int>(rng() % 4));
        for (std::size_t k : metrics::kCutoffs) {
            worst = std::max(worst, std::abs(metrics::ndcg(grades, k) - oracle::ndcg(grades, k, grades)));
            worst = std::max(worst, std::abs(ev.ndcg_ia(x.ranking, k) - oracle::ndcg_ia(x, k)));
            worst = std::max(worst, std::abs(ev.alpha_ndcg(x.ranking, k) - oracle::alpha_ndcg(x, k, 0.5)));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 10.0, "max |diff| " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Result intent_example() {
    annotation::SortedPreference p{{{2, 3}, {1}, {5, 6}}, {4}};
    auto d = annotation::intent_distribution(p);
    const annotation::IntentMap expect{{1, 2.0 / 3.0}, {2, 1.0}, {3, 1.0}, {4, 0.0}, {5, 1.0 / 3.0}, {6, 1.0 / 3.0}};
    std::ostringstream s;
    for (const auto& [c, v] : d) s << c << ':' << fmt("%.6f", v) << ' ';
    return {d == expect, s.str()};
}

Result graph_invariants() {
    std::mt19937_64 rng(77);
    double worst_row = 0.0, worst_mass = 0.0, worst_power = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t s = 1 + rng() % 15;
        chargegraph::ReversalMatrix g(s);
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
                if (rng() % 3 == 0) g.set(static_cast<ChargeId>(i), static_cast<ChargeId>(j), static_cast<int>(rng() % 20));
            }
        }
        auto graph = chargegraph::build_graph(g);
        auto e = graph.dense();
        for (const auto& row : e) worst_row = std::max(worst_row, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
        std::vector<double> w(s);
        for (auto& x : w) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        w[0] += 1e-3;
        auto p = chargegraph::ChargeDistribution::normalized(w);
        auto cur = p;
        for (int step = 0; step < 3; ++step) {
            cur = chargegraph::rwog(cur, graph, 1);
            worst_mass = std::max(worst_mass, std::abs(cur.sum() - 1.0));
        }
        std::vector<double> v = p.values();
        for (int step = 0; step < 2; ++step) {
            std::vector<double> next(s, 0.0);
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t j = 0; j < s; ++j) next[j] += e[i][j] * v[i];
            }
            v = next;
        }
        auto two = chargegraph::rwog(p, graph, 2);
        for (std::size_t i = 0; i < s; ++i) worst_power = std::max(worst_power, std::abs(two[i] - v[i]));
    }
    const bool ok = worst_row <= 1e-9 && worst_mass <= 1e-9 && worst_power <= 1e-9;
    return {ok, "row " + fmt("%.1e", worst_row) + ", mass " + fmt("%.1e", worst_mass) + ", (E^T)^2 p " +
                    fmt("%.1e", worst_power)};
}

Result label_bounds(const Featurizer& f) {
    training::TrainingSetConfig tc;
    tc.n_samples = 10'000;
    tc.seed = 5;
    training::TrainingStream stream(f, f.dataset().split.train, tc);
    std::size_t outside = 0;
    while (auto s = stream.next()) {
        if (!(s->label >= 0.0 && s->label <= 1.0)) ++outside;
    }

    // Small pools: compare the Monte-Carlo extremes with exhaustive enumeration.
    std::mt19937_64 rng(31);
    int agree = 0;
    const int trials = 400;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 3 + rng() % 4;
        const std::size_t len = 2 + rng() % (n - 1);
        metrics::QueryJudgments j;
        std::vector<DocId> ids;
        const int intents = 1 + static_cast<int>(rng() % 3);
        for (std::size_t i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
        for (int c = 0; c < intents; ++c) {
            j.intent[c] = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
            for (const auto& d : ids) j.grades[c][d] = static_cast<int>(rng() % 4);
        }
        metrics::MetricOptions opts;
        opts.max_cutoff = len;
        metrics::QueryEvaluator ev(j, ids, opts);
        auto pool = ev.to_indices(ids);
        training::RewardSpec spec{training::RewardMetric::kNdcgIa, len};
        const std::size_t position = 1 + rng() % len;
        auto mc = training::expected_rewards(ev, {}, position, pool, spec, 256, 1000 + static_cast<std::uint64_t>(trial));
        std::vector<double> exact;
        std::vector<int> ipool(pool.begin(), pool.end());
        for (auto d : pool) {
            exact.push_back(oracle::exhaustive_expected(len, position, static_cast<int>(d), ipool, [&](const std::vector<int>& l) {
                std::vector<std::uint32_t> u(l.begin(), l.end());
                return ev.ndcg_ia_idx(u, len);
            }));
        }
        const double hi = *std::max_element(exact.begin(), exact.end());
        const double lo = *std::min_element(exact.begin(), exact.end());
        const auto mc_hi = static_cast<std::size_t>(std::max_element(mc.begin(), mc.end()) - mc.begin());
        const auto mc_lo = static_cast<std::size_t>(std::min_element(mc.begin(), mc.end()) - mc.begin());
        if (exact[mc_hi] >= hi - 1e-12 && exact[mc_lo] <= lo + 1e-12) ++agree;
    }
    const double rate = static_cast<double>(agree) / trials;
    return {outside == 0 && rate >= 0.95,
            std::to_string(outside) + " labels outside [0,1]; extremes match " + fmt("%.1f%%", 100.0 * rate)};
}

struct Experiment {
    experiment::EvalReport report;
    double seconds = 0.0;
};

Experiment run_experiment(const Featurizer& f) {
    const auto t0 = Clock::now();
    const auto& ds = f.dataset();
    const std::vector<std::pair<std::string, model::FeatureMode>> variants{{"DLRM", model::FeatureMode::kFull},
                                                                            {"Charge-Only", model::FeatureMode::kChargeOnly},
                                                                            {"Text-Only", model::FeatureMode::kTextOnly},
                                                                            {"Random", model::FeatureMode::kRandom}};
    std::vector<model::RankerModel> models;
    models.reserve(variants.size());
    for (const auto& [name, mode] : variants) {
        training::TrainingSetConfig tc;
        tc.n_samples = 100'000;
        tc.mode = mode;
        training::TrainingStream stream(f, ds.split.train, tc);
        model::TrainConfig mc;
        mc.learning_rate = 1e-3;
        models.push_back(training::train_stream(stream, f.config().sim_length, ds.vocab.size(), mc, nullptr, mode));
    }
    std::vector<experiment::NamedModel> named;
    for (std::size_t i = 0; i < variants.size(); ++i) named.push_back({variants[i].first, &models[i]});
    Experiment e;
    e.report = experiment::evaluate(f, named, {});
    e.seconds = seconds_since(t0);
    return e;
}

constexpr std::size_t kNdcgIa10 = 3;

double mean_at10(const experiment::EvalReport& r, const std::string& m) { return r.mean(m)[kNdcgIa10]; }

Result end_to_end(const Experiment& e, double setup_seconds) {
    const auto& r = e.report;
    const double dlrm = mean_at10(r, "DLRM"), bm25 = mean_at10(r, "BM25");
    const double ex = mean_at10(r, "exIA-select"), ia = mean_at10(r, "IA-select");
    auto t = r.ttest("exIA-select", "IA-select", kNdcgIa10);
    const double total = e.seconds + setup_seconds;
    const bool margin = dlrm >= bm25 + 0.05;
    const bool ex_ok = ex >= ia && t.p_two_sided < 0.05;
    const bool time_ok = total < 15 * 60;
    std::ostringstream s;
    s << "DLRM " << fmt("%.4f", dlrm) << " vs BM25 " << fmt("%.4f", bm25) << (margin ? " (margin ok)" : " (margin < 0.05)")
      << "; exIA " << fmt("%.4f", ex) << " vs IA " << fmt("%.4f", ia) << " p=" << fmt("%.2e", t.p_two_sided) << "; "
      << fmt("%.0f", total) << " s";
    return {margin && ex_ok && time_ok, s.str()};
}

Result ablation(const Experiment& e) {
    const auto& r = e.report;
    const double full = mean_at10(r, "DLRM"), charge = mean_at10(r, "Charge-Only"), text = mean_at10(r, "Text-Only"),
                 random = mean_at10(r, "Random");
    std::ostringstream s;
    s << "DLRM " << fmt("%.4f", full) << ", Charge-Only " << fmt("%.4f", charge) << ", Text-Only " << fmt("%.4f", text)
      << ", Random " << fmt("%.4f", random);
    return {full >= charge && charge >= text && text >= random, s.str()};
}

Result agreement_stats() {
    std::vector<int> a{0, 1, 2, 3, 1, 2}, b = a;
    std::vector<double> x{3, 1, 2, 0.5}, y = x;
    const double k1 = annotation::cohen_kappa(a, b), t1 = annotation::kendall_tau_b(x, y);
    std::vector<int> c{0, 0, 1, 1}, d{0, 1, 0, 1};
    const double k0 = annotation::cohen_kappa(c, d);
    return {k1 == 1.0 && t1 == 1.0 && k0 == 0.0,
            "identical kappa " + fmt("%.3f", k1) + " tau " + fmt("%.3f", t1) + "; chance kappa " + fmt("%.3f", k0)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "divlex");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

Result determinism() {
    TempDir tmp;
    std::vector<std::string> differing;
    for (const char* run : {"a", "b"}) {
        const auto dir = tmp.path() / run;
        const auto data = (dir / "data").string();
        if (cli({"gen", "--seed", "11", "--out", data}) != 0 ||
            cli({"train", "--dataset", data, "--seed", "11", "--samples", "20000", "--out", (dir / "model.json").string()}) != 0 ||
            cli({"eval", "--dataset", data, "--seed", "11", "--model", "DLRM=" + (dir / "model.json").string(), "--out",
                 (dir / "eval.tsv").string(), "--json", (dir / "eval.json").string()}) != 0) {
            return {false, "a command failed"};
        }
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(tmp.path() / "a")) {
        if (!entry.is_regular_file()) continue;
        auto rel = fs::relative(entry.path(), tmp.path() / "a");
        ++compared;
        if (slurp(entry.path()) != slurp(tmp.path() / "b" / rel)) differing.push_back(rel.string());
    }
    std::string detail = std::to_string(compared) + " files compared";
    for (const auto& d : differing) detail += "; differs: " + d;
    return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const std::string& name, const Result& r) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << name << "  (" << r.detail << ")" << std::endl;
        if (!r.pass) ++failures;
    };

    report("metric-oracle-equivalence", metric_oracle());
    report("intent-distribution-example", intent_example());
    report("graph-invariants", graph_invariants());

    const auto t0 = Clock::now();
    auto syn = synthetic::generate_synthetic({}, 1);
    const auto& ds = syn.dataset;
    textsim::HashingEmbedder embedder;
    KeywordChargePredictor predictor(ds.vocab, ds.templates);
    Featurizer f(ds, embedder, predictor,
                 chargegraph::build_graph(chargegraph::ReversalMatrix::from_reversals(ds.vocab.size(), ds.reversals)));
    const double setup = seconds_since(t0);

    report("training-label-bounds", label_bounds(f));
    auto exp = run_experiment(f);
    report("synthetic-end-to-end-ordering", end_to_end(exp, setup));
    report("ablation-ordering", ablation(exp));
    report("agreement-statistics", agreement_stats());
    report("cli-determinism", determinism());

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
