#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "divlex/corpus.hpp"
#include "divlex/error.hpp"

namespace divlex {

struct ScoredCharge {
    ChargeId id = 0;
    double prob = 0.0;
    bool operator==(const ScoredCharge&) const = default;
};

/// Legal-judgment-prediction stand-in: maps case text to charge
/// probabilities, sorted by descending probability (ties by ascending id).
class ChargePredictor {
public:
    virtual ~ChargePredictor() = default;
    virtual std::vector<ScoredCharge> predict(std::string_view text) const = 0;
};

/// Finds literal charge names in text.
class ChargeNameMatcher {
public:
    explicit ChargeNameMatcher(const ChargeVocabulary& vocab) {
        for (std::size_t i = 0; i < vocab.size(); ++i) names_.emplace_back(static_cast<ChargeId>(i), vocab.name(static_cast<ChargeId>(i)));
        // Longest first so that a name embedded in a longer one is not double counted.
        std::stable_sort(names_.begin(), names_.end(),
                         [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
    }

    std::set<ChargeId> match(std::string_view text) const {
        std::set<ChargeId> out;
        std::vector<bool> taken(text.size(), false);
        for (const auto& [id, name] : names_) {
            for (auto pos = text.find(name); pos != std::string_view::npos; pos = text.find(name, pos + 1)) {
                bool free = true;
                for (std::size_t i = pos; i < pos + name.size(); ++i) free = free && !taken[i];
                if (!free) continue;
                std::fill(taken.begin() + static_cast<std::ptrdiff_t>(pos),
                          taken.begin() + static_cast<std::ptrdiff_t>(pos + name.size()), true);
                out.insert(id);
            }
        }
        return out;
    }

private:
    std::vector<std::pair<ChargeId, std::string>> names_;
};

/// Lower-cased ASCII words; every non-ASCII code point is its own token.
inline std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size();) {
        auto c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            if (std::isalnum(c) || c == '_' || c == '-') {
                cur += static_cast<char>(std::tolower(c));
            } else {
                flush();
            }
            ++i;
            continue;
        }
        flush();
        std::size_t len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
        len = std::min(len, text.size() - i);
        out.emplace_back(text.substr(i, len));
        i += len;
    }
    flush();
    return out;
}

/// Term-frequency charge scorer over per-charge template sentences. Each
/// token is weighted by how specific it is to a charge (log(s / df) where df
/// counts the charges whose templates contain it), so shared boilerplate
/// carries no weight. Without templates it falls back to charge-name tokens.
class KeywordChargePredictor : public ChargePredictor {
public:
    KeywordChargePredictor(const ChargeVocabulary& vocab, const std::vector<ChargeTemplates>& templates)
        : num_charges_(vocab.size()) {
        std::vector<std::map<std::string, double>> tf(num_charges_);
        for (const auto& t : templates) {
            if (!vocab.contains(t.charge_id)) throw InvalidArgument("template for unknown charge");
            for (const auto& s : t.sentences) {
                for (auto& tok : word_tokens(s)) tf[static_cast<std::size_t>(t.charge_id)][tok] += 1.0;
            }
        }
        if (templates.empty()) {
            for (std::size_t c = 0; c < num_charges_; ++c) {
                for (auto& tok : word_tokens(vocab.name(static_cast<ChargeId>(c)))) tf[c][tok] += 1.0;
            }
        }
        std::unordered_map<std::string, std::size_t> df;
        for (const auto& m : tf) {
            for (const auto& [tok, n] : m) ++df[tok];
        }
        for (std::size_t c = 0; c < num_charges_; ++c) {
            double total = 0.0;
            for (const auto& [tok, n] : tf[c]) total += n;
            for (const auto& [tok, n] : tf[c]) {
                double idf = std::log(static_cast<double>(num_charges_) / static_cast<double>(df[tok]));
                if (idf <= 0.0) continue;
                weights_[tok].emplace_back(static_cast<ChargeId>(c), n / total * idf);
            }
        }
    }

    std::vector<ScoredCharge> predict(std::string_view text) const override {
        std::vector<double> score(num_charges_, 0.0);
        for (const auto& tok : word_tokens(text)) {
            auto it = weights_.find(tok);
            if (it == weights_.end()) continue;
            for (const auto& [c, w] : it->second) score[static_cast<std::size_t>(c)] += w;
        }
        double total = 0.0;
        for (double v : score) total += v;
        std::vector<ScoredCharge> out;
        out.reserve(num_charges_);
        for (std::size_t c = 0; c < num_charges_; ++c) {
            double p = total > 0.0 ? score[c] / total : 1.0 / static_cast<double>(num_charges_);
            out.push_back({static_cast<ChargeId>(c), p});
        }
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.prob > b.prob; });
        return out;
    }

private:
    std::size_t num_charges_;
    std::unordered_map<std::string, std::vector<std::pair<ChargeId, double>>> weights_;
};

/// First `k` entries of a prediction.
inline std::vector<ChargeId> top_charges(const std::vector<ScoredCharge>& prediction, std::size_t k) {
    std::vector<ChargeId> out;
    for (std::size_t i = 0; i < prediction.size() && i < k; ++i) out.push_back(prediction[i].id);
    return out;
}

}  // namespace divlex
