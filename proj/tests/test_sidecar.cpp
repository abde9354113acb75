#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "divlex/sidecar.hpp"

using namespace divlex;
using namespace divlex::sidecar;
using nlohmann::json;

namespace {

/// Local stand-in for the embedding service. Responses are switchable per test.
class FakeSidecar {
public:
    FakeSidecar() {
        srv_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            if (loading) {
                res.status = 503;
                res.set_content(R"({"status":"loading"})", "application/json");
                return;
            }
            res.set_content(json{{"status", "ok"}, {"dim", dim}, {"vocab_size", 4}}.dump(), "application/json");
        });
        srv_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
            auto texts = json::parse(req.body).at("texts");
            json vecs = json::array();
            for (std::size_t i = 0; i < texts.size(); ++i) {
                std::vector<double> v(embed_dim, 0.0);
                v[i % embed_dim] = static_cast<double>(texts[i].get<std::string>().size());
                vecs.push_back(v);
            }
            res.set_content(json{{"dim", embed_dim}, {"vectors", vecs}}.dump(), "application/json");
        });
        srv_.Post("/v1/predict_charges", [this](const httplib::Request&, httplib::Response& res) {
            if (loading) {
                res.status = 503;
                return;
            }
            res.set_content(prediction.dump(), "application/json");
        });
        port_ = srv_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { srv_.listen_after_bind(); });
        srv_.wait_until_ready();
    }
    ~FakeSidecar() {
        srv_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::atomic<bool> loading{false};
    std::size_t dim = 3;
    std::size_t embed_dim = 3;
    json prediction = json{{"charges", json::array({json{{"id", 2}, {"prob", 0.7}}, json{{"id", 0}, {"prob", 0.2}}})}};

private:
    httplib::Server srv_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(Endpoint, SplitsOriginAndPrefix) {
    auto e = Endpoint::parse("http://localhost:8080/api/");
    EXPECT_EQ(e.origin, "http://localhost:8080");
    EXPECT_EQ(e.prefix, "/api");
    auto bare = Endpoint::parse("http://h:1");
    EXPECT_EQ(bare.origin, "http://h:1");
    EXPECT_EQ(bare.prefix, "");
    EXPECT_THROW(Endpoint::parse("localhost:8080"), ConfigError);
    EXPECT_THROW(Endpoint::parse("http:///x"), ConfigError);
}

TEST(EmbedderChoice, ParsesSettingAndEnvironment) {
    EXPECT_FALSE(EmbedderChoice::parse("", nullptr).use_sidecar);
    EXPECT_FALSE(EmbedderChoice::parse("builtin-hash", "http://x:1").use_sidecar);
    auto from_env = EmbedderChoice::parse("", "http://env:9");
    EXPECT_TRUE(from_env.use_sidecar);
    EXPECT_EQ(from_env.url, "http://env:9");
    auto explicit_url = EmbedderChoice::parse("sidecar(http://a:2/p)", "http://env:9");
    EXPECT_EQ(explicit_url.url, "http://a:2/p");
    EXPECT_EQ(EmbedderChoice::parse("sidecar", "http://env:9").url, "http://env:9");
    EXPECT_THROW(EmbedderChoice::parse("sidecar", nullptr), ConfigError);
    EXPECT_THROW(EmbedderChoice::parse("sidecar()", nullptr), ConfigError);
    EXPECT_THROW(EmbedderChoice::parse("word2vec", nullptr), ConfigError);
}

TEST(SidecarClient, HealthEmbedPredict) {
    FakeSidecar fake;
    auto client = std::make_shared<Client>(fake.url(), 5.0);
    auto h = client->health();
    EXPECT_EQ(h.status, "ok");
    EXPECT_EQ(h.dim, 3u);
    EXPECT_EQ(h.vocab_size, 4u);

    SidecarEmbedder emb(client);
    EXPECT_EQ(emb.dim(), 3u);
    std::vector<std::string> texts{"ab", "cde"};
    auto v = emb.embed_texts(texts);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0], (textsim::Embedding{2, 0, 0}));
    EXPECT_EQ(v[1], (textsim::Embedding{0, 3, 0}));

    SidecarChargePredictor pred(client, 4);
    auto p = pred.predict("anything");
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].id, 2);
    EXPECT_EQ(p[0].prob, 0.7);
}

TEST(SidecarClient, LoadingServiceIsUnavailable) {
    FakeSidecar fake;
    fake.loading = true;
    auto client = std::make_shared<Client>(fake.url(), 5.0);
    EXPECT_THROW(client->health(), PredictorUnavailable);
    EXPECT_THROW(client->predict_charges("x"), PredictorUnavailable);
    EXPECT_THROW(SidecarEmbedder{client}, PredictorUnavailable);
}

TEST(SidecarClient, DimensionDisagreement) {
    FakeSidecar fake;
    fake.embed_dim = 5;
    auto client = std::make_shared<Client>(fake.url(), 5.0);
    SidecarEmbedder emb(client);
    std::vector<std::string> texts{"a"};
    EXPECT_THROW(emb.embed_texts(texts), DimensionMismatch);
}

TEST(SidecarClient, RejectsBadPredictions) {
    FakeSidecar fake;
    auto client = std::make_shared<Client>(fake.url(), 5.0);
    fake.prediction = json{{"charges", json::array({json{{"id", 0}, {"prob", 0.1}}, json{{"id", 1}, {"prob", 0.6}}})}};
    EXPECT_THROW(client->predict_charges("x"), ProviderError);
    fake.prediction = json{{"charges", json::array({json{{"id", 0}, {"prob", 1.5}}})}};
    EXPECT_THROW(client->predict_charges("x"), ProviderError);
    fake.prediction = json{{"oops", 1}};
    EXPECT_THROW(client->predict_charges("x"), ProviderError);
    fake.prediction = json{{"charges", json::array({json{{"id", 9}, {"prob", 0.5}}})}};
    SidecarChargePredictor pred(client, 4);
    EXPECT_THROW(pred.predict("x"), ProviderError);
}

TEST(SidecarClient, UnreachableServer) {
    Client client("http://127.0.0.1:1", 0.5);
    EXPECT_THROW(client.health(), ProviderError);
}
