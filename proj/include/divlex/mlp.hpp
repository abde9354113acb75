#pragma once

// The ranking MLP: ReLU hidden layers and a sigmoid output over a sparse
// input made of the text-similarity vector followed by the Kronecker charge
// feature. Trained with mean squared error and Adam.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "divlex/error.hpp"
#include "divlex/rng.hpp"
#include "divlex/sparse.hpp"

namespace divlex::model {

/// Which feature blocks reach the MLP.
enum class FeatureMode { kFull, kTextOnly, kChargeOnly, kRandom };

inline std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::kFull: return "full";
        case FeatureMode::kTextOnly: return "text-only";
        case FeatureMode::kChargeOnly: return "charge-only";
        case FeatureMode::kRandom: return "random";
    }
    return "full";
}

inline FeatureMode parse_feature_mode(const std::string& s) {
    if (s == "full") return FeatureMode::kFull;
    if (s == "text-only") return FeatureMode::kTextOnly;
    if (s == "charge-only") return FeatureMode::kChargeOnly;
    if (s == "random") return FeatureMode::kRandom;
    throw ConfigError("unknown feature mode '" + s + "'");
}

inline const std::vector<std::size_t>& default_hidden_sizes() {
    static const std::vector<std::size_t> h{128, 32, 4};
    return h;
}

struct TrainingSample {
    SparseVector features;
    double label = 0.0;
};

/// Fully connected layer; weights stored input-major (w[i * out + o]) so a
/// sparse input touches contiguous rows.
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;
    bool operator==(const Layer&) const = default;
};

class RankerModel {
public:
    static constexpr int kFormatVersion = 1;

    RankerModel() = default;

    /// He-uniform init for ReLU layers, Glorot-uniform for the output layer.
    static RankerModel initialize(std::size_t text_length, std::size_t num_charges,
                                  const std::vector<std::size_t>& hidden, std::uint64_t seed,
                                  FeatureMode mode = FeatureMode::kFull) {
        RankerModel m;
        m.text_length_ = text_length;
        m.num_charges_ = num_charges;
        m.mode_ = mode;
        m.sizes_.push_back(text_length + num_charges * num_charges);
        for (auto h : hidden) m.sizes_.push_back(h);
        m.sizes_.push_back(1);
        Rng rng(seed);
        for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
            Layer layer;
            layer.in = m.sizes_[l];
            layer.out = m.sizes_[l + 1];
            const bool last = l + 2 == m.sizes_.size();
            const double limit = last ? std::sqrt(6.0 / static_cast<double>(layer.in + layer.out))
                                      : std::sqrt(6.0 / static_cast<double>(layer.in));
            layer.w.resize(layer.in * layer.out);
            for (double& x : layer.w) x = uniform(rng, -limit, limit);
            layer.b.assign(layer.out, 0.0);
            m.layers_.push_back(std::move(layer));
        }
        return m;
    }

    std::size_t input_dim() const noexcept { return sizes_.empty() ? 0 : sizes_.front(); }
    std::size_t text_length() const noexcept { return text_length_; }
    std::size_t num_charges() const noexcept { return num_charges_; }
    FeatureMode mode() const noexcept { return mode_; }
    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    /// Ranking score in (0, 1).
    double score(const SparseVector& x) const {
        std::vector<std::vector<double>> acts;
        return forward(x, acts);
    }

    /// Forward pass keeping post-activation outputs of every layer.
    double forward(const SparseVector& x, std::vector<std::vector<double>>& acts) const {
        if (x.dim != input_dim()) {
            throw DimensionMismatch("feature length " + std::to_string(x.dim) + " does not match model input " +
                                    std::to_string(input_dim()));
        }
        acts.resize(layers_.size());
        const Layer& first = layers_.front();
        acts[0] = first.b;
        for (std::size_t k = 0; k < x.nnz(); ++k) {
            const double v = x.value[k];
            if (v == 0.0) continue;
            const double* row = &first.w[static_cast<std::size_t>(x.index[k]) * first.out];
            for (std::size_t o = 0; o < first.out; ++o) acts[0][o] += v * row[o];
        }
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            if (l > 0) {
                const Layer& layer = layers_[l];
                acts[l] = layer.b;
                const auto& prev = acts[l - 1];
                for (std::size_t i = 0; i < layer.in; ++i) {
                    if (prev[i] == 0.0) continue;
                    const double* row = &layer.w[i * layer.out];
                    for (std::size_t o = 0; o < layer.out; ++o) acts[l][o] += prev[i] * row[o];
                }
            }
            if (l + 1 < layers_.size()) {
                for (double& a : acts[l]) {
                    if (a < 0.0) a = 0.0;  // NaN passes through
                }
            } else {
                for (double& a : acts[l]) a = 1.0 / (1.0 + std::exp(-a));
            }
        }
        return acts.back()[0];
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "divlex-ranker";
        j["version"] = kFormatVersion;
        j["layer_sizes"] = sizes_;
        j["text_length"] = text_length_;
        j["num_charges"] = num_charges_;
        j["feature_mode"] = to_string(mode_);
        j["activation"] = {{"hidden", "relu"}, {"output", "sigmoid"}};
        auto layers = nlohmann::json::array();
        for (const auto& l : layers_) layers.push_back({{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}});
        j["layers"] = layers;
        return j;
    }

    static RankerModel from_json(const nlohmann::json& j) {
        try {
            if (j.at("format") != "divlex-ranker") throw Error("not a divlex ranker checkpoint");
            if (j.at("version").get<int>() != kFormatVersion) throw Error("unsupported checkpoint version");
            RankerModel m;
            m.sizes_ = j.at("layer_sizes").get<std::vector<std::size_t>>();
            m.text_length_ = j.at("text_length").get<std::size_t>();
            m.num_charges_ = j.at("num_charges").get<std::size_t>();
            m.mode_ = parse_feature_mode(j.at("feature_mode").get<std::string>());
            for (const auto& lj : j.at("layers")) {
                Layer l;
                l.in = lj.at("in").get<std::size_t>();
                l.out = lj.at("out").get<std::size_t>();
                l.w = lj.at("w").get<std::vector<double>>();
                l.b = lj.at("b").get<std::vector<double>>();
                if (l.w.size() != l.in * l.out || l.b.size() != l.out) throw Error("checkpoint layer shape mismatch");
                m.layers_.push_back(std::move(l));
            }
            if (m.sizes_.size() != m.layers_.size() + 1 || m.sizes_.back() != 1 ||
                m.sizes_.front() != m.text_length_ + m.num_charges_ * m.num_charges_) {
                throw Error("checkpoint layer sizes inconsistent");
            }
            for (std::size_t l = 0; l < m.layers_.size(); ++l) {
                if (m.layers_[l].in != m.sizes_[l] || m.layers_[l].out != m.sizes_[l + 1]) {
                    throw Error("checkpoint layer sizes inconsistent");
                }
            }
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed checkpoint: ") + e.what());
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << to_json().dump() << '\n';
    }

    static RankerModel load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path.string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error("malformed checkpoint " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }

    bool operator==(const RankerModel&) const = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<Layer> layers_;
    std::size_t text_length_ = 0;
    std::size_t num_charges_ = 0;
    FeatureMode mode_ = FeatureMode::kFull;
};

struct TrainConfig {
    double learning_rate = 1e-5;
    std::size_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;       ///< decoupled decay on weights (not biases)
    std::size_t epochs = 1;          ///< passes over an in-memory sample set
    std::size_t holdout = 1000;      ///< held-out samples (capped at a fifth of the data)
    std::uint64_t seed = 1;
    std::vector<std::size_t> hidden = default_hidden_sizes();
};

struct TrainReport {
    double initial_holdout_mse = 0.0;
    double final_holdout_mse = 0.0;
    double final_train_mse = 0.0;  ///< mean loss over the last pass
    std::size_t steps = 0;
    std::size_t train_samples = 0;
    std::size_t holdout_samples = 0;
};

inline double mse(const RankerModel& m, std::span<const TrainingSample> samples) {
    if (samples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& x : samples) {
        const double d = m.score(x.features) - x.label;
        s += d * d;
    }
    return s / static_cast<double>(samples.size());
}

/// Mini-batch Adam on squared error. Rows of the first layer are updated
/// lazily (only rows whose input was non-zero in the batch), which keeps the
/// cost proportional to feature sparsity.
class Trainer {
public:
    Trainer(RankerModel& model, const TrainConfig& cfg) : m_(model), cfg_(cfg) {
        if (cfg_.batch_size == 0) throw ConfigError("batch size must be positive");
        if (!(cfg_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        for (const auto& l : m_.layers()) {
            grads_.push_back({std::vector<double>(l.w.size(), 0.0), std::vector<double>(l.b.size(), 0.0)});
            m1_.push_back({std::vector<double>(l.w.size(), 0.0), std::vector<double>(l.b.size(), 0.0)});
            m2_.push_back({std::vector<double>(l.w.size(), 0.0), std::vector<double>(l.b.size(), 0.0)});
        }
        row_steps_.assign(m_.layers().front().in, 0);
        touched_flag_.assign(m_.layers().front().in, false);
    }

    /// Accumulate one sample; applies an update when the batch is full.
    /// Returns the sample's squared error.
    double add(const TrainingSample& s) {
        const double out = m_.forward(s.features, acts_);
        const double err = out - s.label;
        const double loss = err * err;
        if (!std::isfinite(loss)) throw NonFiniteLoss("non-finite training loss");
        backward(s.features, err, out);
        if (++in_batch_ == cfg_.batch_size) flush();
        return loss;
    }

    /// Apply a pending partial batch.
    void flush() {
        if (in_batch_ == 0) return;
        step();
        in_batch_ = 0;
    }

    std::size_t steps() const noexcept { return t_; }

private:
    struct Params {
        std::vector<double> w;
        std::vector<double> b;
    };

    void backward(const SparseVector& x, double err, double out) {
        auto& layers = m_.layers();
        const std::size_t L = layers.size();
        // d loss / d pre-activation of the output unit.
        std::vector<double> delta{2.0 * err * out * (1.0 - out)};
        for (std::size_t l = L; l-- > 0;) {
            const Layer& layer = layers[l];
            for (std::size_t o = 0; o < layer.out; ++o) grads_[l].b[o] += delta[o];
            if (l == 0) {
                for (std::size_t k = 0; k < x.nnz(); ++k) {
                    const double v = x.value[k];
                    if (v == 0.0) continue;
                    const std::size_t row = x.index[k];
                    double* g = &grads_[0].w[row * layer.out];
                    for (std::size_t o = 0; o < layer.out; ++o) g[o] += v * delta[o];
                    if (!touched_flag_[row]) {
                        touched_flag_[row] = true;
                        touched_.push_back(row);
                    }
                }
                break;
            }
            const auto& prev = acts_[l - 1];
            std::vector<double> next(layer.in, 0.0);
            for (std::size_t i = 0; i < layer.in; ++i) {
                const double* row = &layer.w[i * layer.out];
                double* g = &grads_[l].w[i * layer.out];
                double acc = 0.0;
                for (std::size_t o = 0; o < layer.out; ++o) {
                    g[o] += prev[i] * delta[o];
                    acc += row[o] * delta[o];
                }
                next[i] = prev[i] > 0.0 ? acc : 0.0;  // ReLU
            }
            delta.swap(next);
        }
    }

    void adam(double& p, double& g, double& m1, double& m2, double scale, std::size_t t, double decay = 0.0) const {
        if (decay > 0.0) p -= cfg_.learning_rate * decay * p;
        const double grad = g * scale;
        g = 0.0;
        m1 = cfg_.beta1 * m1 + (1.0 - cfg_.beta1) * grad;
        m2 = cfg_.beta2 * m2 + (1.0 - cfg_.beta2) * grad * grad;
        const double mhat = m1 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t)));
        const double vhat = m2 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t)));
        p -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }

    void step() {
        ++t_;
        const double scale = 1.0 / static_cast<double>(in_batch_);
        auto& layers = m_.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& layer = layers[l];
            for (std::size_t o = 0; o < layer.out; ++o) adam(layer.b[o], grads_[l].b[o], m1_[l].b[o], m2_[l].b[o], scale, t_);
            if (l == 0) {
                std::sort(touched_.begin(), touched_.end());
                for (auto row : touched_) {
                    const std::size_t t = ++row_steps_[row];
                    for (std::size_t o = 0; o < layer.out; ++o) {
                        const std::size_t k = row * layer.out + o;
                        adam(layer.w[k], grads_[0].w[k], m1_[0].w[k], m2_[0].w[k], scale, t, cfg_.weight_decay);
                    }
                    touched_flag_[row] = false;
                }
                touched_.clear();
                continue;
            }
            for (std::size_t k = 0; k < layer.w.size(); ++k) {
                adam(layer.w[k], grads_[l].w[k], m1_[l].w[k], m2_[l].w[k], scale, t_, cfg_.weight_decay);
            }
        }
    }

    RankerModel& m_;
    TrainConfig cfg_;
    std::vector<Params> grads_, m1_, m2_;
    std::vector<std::size_t> row_steps_;
    std::vector<bool> touched_flag_;
    std::vector<std::size_t> touched_;
    std::vector<std::vector<double>> acts_;
    std::size_t in_batch_ = 0;
    std::size_t t_ = 0;
};

inline std::size_t holdout_size(std::size_t n, std::size_t requested) {
    if (n < 2) return 0;
    return std::min(requested, n / 5);
}

/// Train a fresh model on in-memory samples. The first `holdout` samples
/// are held out; with fewer than two samples the training data is scored.
inline RankerModel train(std::span<const TrainingSample> samples, std::size_t text_length, std::size_t num_charges,
                         const TrainConfig& cfg, TrainReport* report = nullptr,
                         FeatureMode mode = FeatureMode::kFull) {
    if (samples.empty()) throw InvalidArgument("training needs at least one sample");
    auto model = RankerModel::initialize(text_length, num_charges, cfg.hidden, cfg.seed, mode);
    const std::size_t h = holdout_size(samples.size(), cfg.holdout);
    auto held = samples.subspan(0, h);
    auto fit = samples.subspan(h);
    auto scored = held.empty() ? fit : held;
    TrainReport rep;
    rep.initial_holdout_mse = mse(model, scored);
    Trainer trainer(model, cfg);
    for (std::size_t e = 0; e < std::max<std::size_t>(cfg.epochs, 1); ++e) {
        double loss = 0.0;
        for (const auto& s : fit) loss += trainer.add(s);
        trainer.flush();
        rep.final_train_mse = loss / static_cast<double>(fit.size());
    }
    rep.final_holdout_mse = mse(model, scored);
    rep.steps = trainer.steps();
    rep.train_samples = fit.size();
    rep.holdout_samples = held.size();
    if (report) *report = rep;
    return model;
}

}  // namespace divlex::model
