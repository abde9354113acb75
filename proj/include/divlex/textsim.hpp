#pragma once

// Text-similarity features: sliding-window passage slicing, passage
// embeddings, the query x document cosine matrix, row max-pooling and the
// fixed-length {T_s, 0..., T_s} layout.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divlex/error.hpp"
#include "divlex/rng.hpp"

namespace divlex::textsim {

class EmptyText : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};
class InputTooLong : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

using Embedding = std::vector<double>;

/// Exactly `w` sentences; trailing slots past the end of the text are "".
struct Passage {
    std::vector<std::string> sentences;

    std::string text() const {
        std::string out;
        for (const auto& s : sentences) {
            if (s.empty()) continue;
            if (!out.empty()) out += ' ';
            out += s;
        }
        return out;
    }
    bool operator==(const Passage&) const = default;
};

struct WindowSpec {
    std::size_t size = 3;
    std::size_t step = 1;
};

inline constexpr WindowSpec kQueryWindow{3, 1};
inline constexpr WindowSpec kDocWindow{13, 5};
inline constexpr std::size_t kDefaultSimLength = 54;

/// Cut with sliding windows. Windows start at the first sentence and advance
/// by `step`; the first window that reaches the last sentence is the final
/// one and is padded to `size` sentences.
inline std::vector<Passage> csw_slice(std::span<const std::string> sentences, WindowSpec spec) {
    if (spec.size < 1 || spec.step < 1) throw InvalidArgument("window size and step must be >= 1");
    if (sentences.empty()) throw EmptyText("cannot slice text without sentences");
    std::vector<Passage> out;
    for (std::size_t start = 0;; start += spec.step) {
        Passage p;
        p.sentences.reserve(spec.size);
        for (std::size_t i = start; i < start + spec.size; ++i) {
            p.sentences.push_back(i < sentences.size() ? sentences[i] : std::string());
        }
        out.push_back(std::move(p));
        if (start + spec.size >= sentences.size()) break;
    }
    return out;
}

/// Passage encoder. Implementations must be deterministic per input and
/// independent of batch composition or call order.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<Embedding> embed_texts(std::span<const std::string> texts) const = 0;

    std::vector<Embedding> embed(std::span<const Passage> passages) const {
        std::vector<std::string> texts;
        texts.reserve(passages.size());
        for (const auto& p : passages) texts.push_back(p.text());
        auto out = embed_texts(texts);
        if (out.size() != texts.size()) throw ProviderError("provider returned wrong number of vectors");
        for (const auto& v : out) {
            if (v.size() != dim()) throw ProviderError("provider returned vector of wrong dimension");
            for (double x : v) {
                if (!std::isfinite(x)) throw ProviderError("provider returned non-finite vector");
            }
        }
        return out;
    }
};

/// Decode UTF-8 into code points; invalid bytes map to themselves.
inline std::vector<char32_t> code_points(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
        if (i + len > s.size()) len = 1;
        char32_t cp = (len == 1) ? c : (len == 2) ? (c & 0x1F) : (len == 3) ? (c & 0x0F) : (c & 0x07);
        for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        if (len == 1 && c < 0x80) cp = static_cast<char32_t>(std::tolower(c));
        out.push_back(cp);
        i += len;
    }
    return out;
}

/// Signed feature hashing of character 2- and 3-grams, L2-normalised.
/// Empty text embeds to the zero vector.
class HashingEmbedder : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dim = 128) : dim_(dim) {
        if (dim_ == 0) throw InvalidArgument("embedding dimension must be positive");
    }

    std::size_t dim() const override { return dim_; }

    Embedding embed_one(std::string_view text) const {
        Embedding v(dim_, 0.0);
        auto cps = code_points(text);
        for (std::size_t n = 2; n <= 3; ++n) {
            for (std::size_t i = 0; i + n <= cps.size(); ++i) {
                std::uint64_t h = 0xcbf29ce484222325ULL ^ n;
                for (std::size_t k = 0; k < n; ++k) {
                    h ^= static_cast<std::uint64_t>(cps[i + k]);
                    h *= 0x100000001b3ULL;
                }
                h = splitmix64(h);
                v[h % dim_] += (h >> 63) ? 1.0 : -1.0;
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        return v;
    }

    std::vector<Embedding> embed_texts(std::span<const std::string> texts) const override {
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

private:
    std::size_t dim_;
};

/// Cosine similarity; 0 when either vector is zero.
inline double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

/// M[i][j] = cos(query_i, doc_j).
inline std::vector<std::vector<double>> similarity_matrix(std::span<const Embedding> query,
                                                          std::span<const Embedding> doc) {
    std::vector<std::vector<double>> m(query.size(), std::vector<double>(doc.size()));
    for (std::size_t i = 0; i < query.size(); ++i) {
        for (std::size_t j = 0; j < doc.size(); ++j) m[i][j] = cosine(query[i], doc[j]);
    }
    return m;
}

/// Row-wise max of the cosine matrix.
inline std::vector<double> max_pool_rows(const std::vector<std::vector<double>>& m) {
    std::vector<double> out;
    out.reserve(m.size());
    for (const auto& row : m) {
        if (row.empty()) throw InvalidArgument("empty similarity row");
        out.push_back(*std::max_element(row.begin(), row.end()));
    }
    return out;
}

/// T_s from precomputed passage embeddings.
inline std::vector<double> similarity_vector(std::span<const Embedding> query, std::span<const Embedding> doc) {
    if (query.empty() || doc.empty()) throw InvalidArgument("similarity needs at least one passage on each side");
    return max_pool_rows(similarity_matrix(query, doc));
}

inline std::vector<double> similarity_vector(std::span<const Passage> query, std::span<const Passage> doc,
                                             const EmbeddingProvider& provider) {
    if (query.empty() || doc.empty()) throw InvalidArgument("similarity needs at least one passage on each side");
    auto qe = provider.embed(query);
    auto de = provider.embed(doc);
    return similarity_vector(qe, de);
}

/// {T_s, zeros, T_s} of total length `length`.
inline std::vector<double> pad_fixed(std::span<const double> ts, std::size_t length = kDefaultSimLength) {
    if (ts.empty()) throw InvalidArgument("similarity vector is empty");
    if (2 * ts.size() > length) {
        throw InputTooLong("similarity vector of length " + std::to_string(ts.size()) + " does not fit twice into " +
                           std::to_string(length));
    }
    std::vector<double> out(length, 0.0);
    std::copy(ts.begin(), ts.end(), out.begin());
    std::copy(ts.begin(), ts.end(), out.end() - static_cast<std::ptrdiff_t>(ts.size()));
    return out;
}

}  // namespace divlex::textsim
