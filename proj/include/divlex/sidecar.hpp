#pragma once

// HTTP clients for the optional embedding / charge-prediction service.

#include <cmath>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "divlex/error.hpp"
#include "divlex/predictor.hpp"
#include "divlex/textsim.hpp"

namespace divlex::sidecar {

inline constexpr const char* kUrlEnv = "DIVLEX_SIDECAR_URL";

struct Health {
    std::string status;
    std::size_t dim = 0;
    std::size_t vocab_size = 0;
};

/// Split "http://host:port/prefix" into the client origin and a path prefix.
struct Endpoint {
    std::string origin;
    std::string prefix;

    static Endpoint parse(std::string_view url) {
        auto scheme = url.find("://");
        if (scheme == std::string_view::npos) throw ConfigError("sidecar url needs a scheme: " + std::string(url));
        auto slash = url.find('/', scheme + 3);
        Endpoint e;
        e.origin = std::string(url.substr(0, slash));
        if (slash != std::string_view::npos) {
            e.prefix = std::string(url.substr(slash));
            while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
        }
        if (e.origin.size() <= scheme + 3) throw ConfigError("sidecar url has no host: " + std::string(url));
        return e;
    }
};

class Client {
public:
    explicit Client(std::string_view url, double timeout_s = 30.0) : ep_(Endpoint::parse(url)), cli_(ep_.origin) {
        auto sec = static_cast<time_t>(timeout_s);
        auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
        cli_.set_connection_timeout(sec, usec);
        cli_.set_read_timeout(sec, usec);
        cli_.set_write_timeout(sec, usec);
    }

    Health health() const {
        auto j = get("/health");
        Health h;
        try {
            h.status = j.at("status").get<std::string>();
            h.dim = j.at("dim").get<std::size_t>();
            h.vocab_size = j.at("vocab_size").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed /health response: ") + e.what());
        }
        return h;
    }

    std::vector<textsim::Embedding> embed(std::span<const std::string> texts, std::size_t* dim_out = nullptr) const {
        nlohmann::json req{{"texts", texts}};
        auto j = post("/embed", req);
        std::vector<textsim::Embedding> out;
        try {
            auto dim = j.at("dim").get<std::size_t>();
            for (const auto& v : j.at("vectors")) {
                auto vec = v.get<std::vector<double>>();
                if (vec.size() != dim) throw ProviderError("/embed vector length differs from advertised dim");
                out.push_back(std::move(vec));
            }
            if (dim_out) *dim_out = dim;
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed /embed response: ") + e.what());
        }
        if (out.size() != texts.size()) throw ProviderError("/embed returned wrong number of vectors");
        return out;
    }

    std::vector<ScoredCharge> predict_charges(std::string_view text) const {
        nlohmann::json req{{"text", std::string(text)}};
        auto j = post("/predict_charges", req);
        std::vector<ScoredCharge> out;
        try {
            for (const auto& c : j.at("charges")) {
                out.push_back({c.at("id").get<ChargeId>(), c.at("prob").get<double>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed /predict_charges response: ") + e.what());
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!(out[i].prob >= 0.0 && out[i].prob <= 1.0)) throw ProviderError("/predict_charges prob outside [0,1]");
            if (i > 0 && out[i].prob > out[i - 1].prob) throw ProviderError("/predict_charges not sorted descending");
        }
        return out;
    }

private:
    static nlohmann::json parse_body(const httplib::Result& res, const std::string& path) {
        if (!res) throw ProviderError("sidecar " + path + ": " + httplib::to_string(res.error()));
        if (res->status == 503) throw PredictorUnavailable("sidecar " + path + ": service not ready (503)");
        if (res->status != 200) throw ProviderError("sidecar " + path + ": HTTP " + std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError("sidecar " + path + ": invalid JSON: " + e.what());
        }
    }

    nlohmann::json get(const std::string& path) const {
        std::lock_guard lock(mu_);
        return parse_body(cli_.Get(ep_.prefix + path), path);
    }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        std::lock_guard lock(mu_);
        return parse_body(cli_.Post(ep_.prefix + path, body.dump(), "application/json"), path);
    }

    Endpoint ep_;
    mutable httplib::Client cli_;
    mutable std::mutex mu_;
};

class SidecarEmbedder final : public textsim::EmbeddingProvider {
public:
    explicit SidecarEmbedder(std::shared_ptr<Client> client) : client_(std::move(client)) {
        dim_ = client_->health().dim;
        if (dim_ == 0) throw ProviderError("sidecar advertises dim 0");
    }

    std::size_t dim() const override { return dim_; }

    std::vector<textsim::Embedding> embed_texts(std::span<const std::string> texts) const override {
        if (texts.empty()) return {};
        std::size_t got = 0;
        auto out = client_->embed(texts, &got);
        if (got != dim_) throw DimensionMismatch("sidecar /embed dim differs from /health dim");
        return out;
    }

private:
    std::shared_ptr<Client> client_;
    std::size_t dim_ = 0;
};

class SidecarChargePredictor final : public ChargePredictor {
public:
    SidecarChargePredictor(std::shared_ptr<Client> client, std::size_t vocab_size)
        : client_(std::move(client)), vocab_size_(vocab_size) {}

    std::vector<ScoredCharge> predict(std::string_view text) const override {
        auto out = client_->predict_charges(text);
        for (const auto& c : out) {
            if (c.id < 0 || static_cast<std::size_t>(c.id) >= vocab_size_) {
                throw ProviderError("sidecar predicted unknown charge id " + std::to_string(c.id));
            }
        }
        return out;
    }

private:
    std::shared_ptr<Client> client_;
    std::size_t vocab_size_;
};

/// Parsed value of the `embedder` setting.
struct EmbedderChoice {
    bool use_sidecar = false;
    std::string url;

    /// Accepts "builtin-hash", "sidecar(<url>)" or bare "sidecar" (url from
    /// the environment). An empty value means builtin unless the environment
    /// variable is set.
    static EmbedderChoice parse(std::string_view value, const char* env = std::getenv(kUrlEnv)) {
        EmbedderChoice c;
        std::string env_url = env ? env : "";
        if (value.empty()) {
            if (!env_url.empty()) {
                c.use_sidecar = true;
                c.url = env_url;
            }
            return c;
        }
        if (value == "builtin-hash") return c;
        if (value == "sidecar") {
            if (env_url.empty()) throw ConfigError(std::string("embedder = sidecar needs a url or ") + kUrlEnv);
            c.use_sidecar = true;
            c.url = env_url;
            return c;
        }
        constexpr std::string_view open = "sidecar(";
        if (value.starts_with(open) && value.ends_with(')') && value.size() > open.size() + 1) {
            c.use_sidecar = true;
            c.url = std::string(value.substr(open.size(), value.size() - open.size() - 1));
            return c;
        }
        throw ConfigError("unknown embedder: " + std::string(value));
    }
};

}  // namespace divlex::sidecar
