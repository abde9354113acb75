#pragma once

// Dataset model and the on-disk JSONL layout:
//
//   vocab.jsonl       {"id":int,"name":str}
//   queries.jsonl     {"id","sentences":[...],"ccs":[int],"intent_dist":{"<id>":float}}
//   docs.jsonl        {"id","query_id","sentences":[...],"charges":[int],"qrel":int}
//   triples.jsonl     {"query_id","charge_id","doc_id","grade"}
//   split.json        {"train":[...],"test":[...]}
//   reversals.jsonl   {"from":int,"to":int,"count":int}              (optional)
//   templates.jsonl   {"charge_id":int,"sentences":[...]}            (optional)
//   annotations.jsonl {"annotator","group","query_id","charge_id","doc_id","grade"} (optional)
//   preferences.jsonl {"annotator","query_id","levels":[[int]],"unselected":[int]} (optional)

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "divlex/error.hpp"

namespace divlex {

using ChargeId = int;
using DocId = std::string;
using QueryId = std::string;

/// Relevance grade on the four-level scale.
enum Grade : int { kIrrelevant = 0, kFair = 1, kExcellent = 2, kPerfect = 3 };

inline bool valid_grade(int g) noexcept { return g >= 0 && g <= 3; }

class ChargeVocabulary {
public:
    ChargeVocabulary() = default;

    explicit ChargeVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i].empty()) throw InvalidArgument("empty charge name at id " + std::to_string(i));
            if (!by_name_.emplace(names_[i], static_cast<ChargeId>(i)).second) {
                throw InvalidArgument("duplicate charge name '" + names_[i] + "'");
            }
        }
    }

    std::size_t size() const noexcept { return names_.size(); }
    bool contains(ChargeId id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < names_.size(); }
    const std::string& name(ChargeId id) const { return names_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    std::optional<ChargeId> find(std::string_view name) const {
        auto it = by_name_.find(std::string(name));
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const ChargeVocabulary& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, ChargeId> by_name_;
};

struct QueryCase {
    QueryId id;
    std::vector<std::string> sentences;
    std::set<ChargeId> candidate_charge_set;
    std::map<ChargeId, double> intent_dist;  // P(I_k | Q)

    std::string text() const;
    double intent(ChargeId c) const {
        auto it = intent_dist.find(c);
        return it == intent_dist.end() ? 0.0 : it->second;
    }
    bool operator==(const QueryCase&) const = default;
};

struct CandidateDoc {
    DocId id;
    QueryId query_id;
    std::vector<std::string> sentences;
    std::set<ChargeId> charges;
    int query_relevance = 0;

    std::string text() const;
    bool operator==(const CandidateDoc&) const = default;
};

struct GradedTriple {
    QueryId query_id;
    ChargeId charge_id = 0;
    DocId doc_id;
    int grade = 0;
    bool operator==(const GradedTriple&) const = default;
};

struct DatasetSplit {
    std::vector<QueryId> train;
    std::vector<QueryId> test;
    bool operator==(const DatasetSplit&) const = default;
};

struct Reversal {
    ChargeId from = 0;
    ChargeId to = 0;
    std::int64_t count = 0;
    bool operator==(const Reversal&) const = default;
};

struct ChargeTemplates {
    ChargeId charge_id = 0;
    std::vector<std::string> sentences;
    bool operator==(const ChargeTemplates&) const = default;
};

/// One annotator's grade for a (query, charge, doc) triple.
struct AnnotatorLabel {
    std::string annotator;
    std::string group;
    QueryId query_id;
    ChargeId charge_id = 0;
    DocId doc_id;
    int grade = 0;
    bool operator==(const AnnotatorLabel&) const = default;
};

/// One annotator's sorted charge preference for a query, best level first.
struct AnnotatorPreference {
    std::string annotator;
    QueryId query_id;
    std::vector<std::set<ChargeId>> levels;
    std::set<ChargeId> unselected;
    bool operator==(const AnnotatorPreference&) const = default;
};

namespace detail {
inline std::string join_sentences(const std::vector<std::string>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        if (s.empty()) continue;
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}
}  // namespace detail

inline std::string QueryCase::text() const { return detail::join_sentences(sentences); }
inline std::string CandidateDoc::text() const { return detail::join_sentences(sentences); }

/// Sentence terminators used when none are configured.
inline const std::vector<std::string>& default_terminators() {
    static const std::vector<std::string> t{"。", "！", "？", ".", "!", "?"};
    return t;
}

/// Split text after every terminator; the terminator stays attached to its
/// sentence. Whitespace between sentences is dropped, a trailing fragment
/// without terminator becomes the last sentence.
inline std::vector<std::string> split_sentences(std::string_view text,
                                                const std::vector<std::string>& terminators = default_terminators()) {
    std::vector<std::string> out;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t matched = 0;
        for (const auto& t : terminators) {
            if (!t.empty() && text.substr(i, t.size()) == t) {
                matched = std::max(matched, t.size());
            }
        }
        if (matched == 0) {
            ++i;
            continue;
        }
        i += matched;
        while (start < i && is_space(text[start])) ++start;
        out.emplace_back(text.substr(start, i - start));
        start = i;
    }
    while (start < text.size() && is_space(text[start])) ++start;
    std::size_t end = text.size();
    while (end > start && is_space(text[end - 1])) --end;
    if (end > start) out.emplace_back(text.substr(start, end - start));
    return out;
}

/// In-memory dataset. Immutable once loaded; lookups go through the index
/// built by `reindex()`.
class Dataset {
public:
    ChargeVocabulary vocab;
    std::vector<QueryCase> queries;
    std::vector<CandidateDoc> docs;
    std::vector<GradedTriple> triples;
    DatasetSplit split;
    std::vector<Reversal> reversals;
    std::vector<ChargeTemplates> templates;
    std::vector<AnnotatorLabel> annotations;
    std::vector<AnnotatorPreference> preferences;

    /// Rebuild lookup tables; call after mutating the public members.
    void reindex() {
        query_index_.clear();
        doc_index_.clear();
        docs_by_query_.clear();
        grades_.clear();
        for (std::size_t i = 0; i < queries.size(); ++i) query_index_[queries[i].id] = i;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            doc_index_[docs[i].id] = i;
            docs_by_query_[docs[i].query_id].push_back(i);
        }
        for (const auto& t : triples) grades_[t.query_id][{t.charge_id, t.doc_id}] = t.grade;
    }

    const QueryCase* find_query(std::string_view id) const {
        auto it = query_index_.find(std::string(id));
        return it == query_index_.end() ? nullptr : &queries[it->second];
    }
    const CandidateDoc* find_doc(std::string_view id) const {
        auto it = doc_index_.find(std::string(id));
        return it == doc_index_.end() ? nullptr : &docs[it->second];
    }
    const QueryCase& query(std::string_view id) const {
        if (auto* q = find_query(id)) return *q;
        throw InvalidArgument("unknown query '" + std::string(id) + "'");
    }

    /// Candidate documents of a query in file order.
    std::vector<const CandidateDoc*> candidates(std::string_view query_id) const {
        std::vector<const CandidateDoc*> out;
        auto it = docs_by_query_.find(std::string(query_id));
        if (it == docs_by_query_.end()) return out;
        for (auto i : it->second) out.push_back(&docs[i]);
        return out;
    }

    /// Graded (charge, doc) pairs of a query.
    const std::map<std::pair<ChargeId, DocId>, int>& grades(std::string_view query_id) const {
        static const std::map<std::pair<ChargeId, DocId>, int> empty;
        auto it = grades_.find(std::string(query_id));
        return it == grades_.end() ? empty : it->second;
    }

    bool operator==(const Dataset& o) const {
        return vocab == o.vocab && queries == o.queries && docs == o.docs && triples == o.triples &&
               split == o.split && reversals == o.reversals && templates == o.templates &&
               annotations == o.annotations && preferences == o.preferences;
    }

private:
    std::unordered_map<std::string, std::size_t> query_index_;
    std::unordered_map<std::string, std::size_t> doc_index_;
    std::unordered_map<std::string, std::vector<std::size_t>> docs_by_query_;
    std::unordered_map<std::string, std::map<std::pair<ChargeId, DocId>, int>> grades_;
};

namespace io {

using nlohmann::json;

namespace detail {

struct Reader {
    std::string file;
    std::size_t line = 0;

    [[noreturn]] void fail(const std::string& what) const { throw SchemaError(file, line, what); }

    const json& field(const json& rec, const char* key) const {
        auto it = rec.find(key);
        if (it == rec.end()) fail(std::string("missing field '") + key + "'");
        return *it;
    }
    std::string str(const json& rec, const char* key) const {
        const auto& v = field(rec, key);
        if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
        auto s = v.get<std::string>();
        if (s.empty()) fail(std::string("field '") + key + "' must be non-empty");
        return s;
    }
    std::int64_t integer(const json& rec, const char* key) const {
        const auto& v = field(rec, key);
        if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
        return v.get<std::int64_t>();
    }
    double number(const json& v, const std::string& what) const {
        if (!v.is_number()) fail(what + " must be a number");
        return v.get<double>();
    }
    std::vector<std::string> strings(const json& rec, const char* key) const {
        const auto& v = field(rec, key);
        if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) fail(std::string("field '") + key + "' must hold strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }
    std::set<ChargeId> charge_set(const json& v, const std::string& what) const {
        if (!v.is_array()) fail(what + " must be an array");
        std::set<ChargeId> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) fail(what + " must hold integers");
            out.insert(e.get<ChargeId>());
        }
        return out;
    }
    int grade(const json& rec) const {
        auto g = integer(rec, "grade");
        if (!valid_grade(static_cast<int>(g)) || g != static_cast<int>(g)) {
            fail("grade " + std::to_string(g) + " outside 0..3");
        }
        return static_cast<int>(g);
    }
};

template <typename F>
void for_each_record(const std::filesystem::path& path, F&& f) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    Reader r{path.filename().string(), 0};
    std::string line;
    while (std::getline(in, line)) {
        ++r.line;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            r.fail(std::string("malformed JSON: ") + e.what());
        }
        if (!rec.is_object()) r.fail("record must be a JSON object");
        f(r, rec);
    }
}

inline void write_lines(const std::filesystem::path& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& r : records) out << r.dump(-1, ' ', false, json::error_handler_t::strict) << '\n';
}

}  // namespace detail

/// Load and validate a dataset directory.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    using detail::Reader;
    if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
    Dataset ds;

    std::vector<std::string> names;
    detail::for_each_record(dir / "vocab.jsonl", [&](const Reader& r, const json& rec) {
        auto id = r.integer(rec, "id");
        if (id != static_cast<std::int64_t>(names.size())) r.fail("charge ids must be dense and ordered from 0");
        auto name = r.str(rec, "name");
        if (std::find(names.begin(), names.end(), name) != names.end()) r.fail("duplicate charge name '" + name + "'");
        names.push_back(std::move(name));
    });
    ds.vocab = ChargeVocabulary(std::move(names));
    auto check_charge = [&](const Reader& r, ChargeId c) {
        if (!ds.vocab.contains(c)) throw IntegrityError(r.file + ":" + std::to_string(r.line) + ": unknown charge id " + std::to_string(c));
    };

    std::set<std::string> seen;
    detail::for_each_record(dir / "queries.jsonl", [&](const Reader& r, const json& rec) {
        QueryCase q;
        q.id = r.str(rec, "id");
        if (!seen.insert(q.id).second) r.fail("duplicate query id '" + q.id + "'");
        q.sentences = r.strings(rec, "sentences");
        if (q.sentences.empty()) r.fail("query has no sentences");
        q.candidate_charge_set = r.charge_set(r.field(rec, "ccs"), "ccs");
        for (auto c : q.candidate_charge_set) check_charge(r, c);
        const auto& dist = r.field(rec, "intent_dist");
        if (!dist.is_object()) r.fail("intent_dist must be an object");
        for (const auto& [k, v] : dist.items()) {
            ChargeId c;
            try {
                std::size_t pos = 0;
                c = std::stoi(k, &pos);
                if (pos != k.size()) throw std::invalid_argument(k);
            } catch (const std::exception&) {
                r.fail("intent_dist key '" + k + "' is not a charge id");
            }
            double p = r.number(v, "intent_dist value");
            if (!(p >= 0.0 && p <= 1.0)) r.fail("intent probability outside [0,1]");
            if (!q.candidate_charge_set.contains(c)) {
                throw IntegrityError(r.file + ":" + std::to_string(r.line) + ": intent_dist key " + k + " not in ccs");
            }
            q.intent_dist[c] = p;
        }
        ds.queries.push_back(std::move(q));
    });
    ds.reindex();

    seen.clear();
    detail::for_each_record(dir / "docs.jsonl", [&](const Reader& r, const json& rec) {
        CandidateDoc d;
        d.id = r.str(rec, "id");
        if (!seen.insert(d.id).second) r.fail("duplicate doc id '" + d.id + "'");
        d.query_id = r.str(rec, "query_id");
        d.sentences = r.strings(rec, "sentences");
        if (d.sentences.empty()) r.fail("doc has no sentences");
        d.charges = r.charge_set(r.field(rec, "charges"), "charges");
        for (auto c : d.charges) check_charge(r, c);
        auto qrel = r.integer(rec, "qrel");
        if (!valid_grade(static_cast<int>(qrel))) r.fail("qrel outside 0..3");
        d.query_relevance = static_cast<int>(qrel);
        if (!ds.find_query(d.query_id)) {
            throw IntegrityError(r.file + ":" + std::to_string(r.line) + ": unknown query '" + d.query_id + "'");
        }
        ds.docs.push_back(std::move(d));
    });
    ds.reindex();

    std::set<std::tuple<QueryId, ChargeId, DocId>> triple_keys;
    detail::for_each_record(dir / "triples.jsonl", [&](const Reader& r, const json& rec) {
        GradedTriple t;
        t.query_id = r.str(rec, "query_id");
        t.charge_id = static_cast<ChargeId>(r.integer(rec, "charge_id"));
        t.doc_id = r.str(rec, "doc_id");
        t.grade = r.grade(rec);
        auto where = r.file + ":" + std::to_string(r.line) + ": ";
        if (!ds.find_query(t.query_id)) throw IntegrityError(where + "unknown query '" + t.query_id + "'");
        if (!ds.vocab.contains(t.charge_id)) throw IntegrityError(where + "unknown charge " + std::to_string(t.charge_id));
        const auto* d = ds.find_doc(t.doc_id);
        if (!d) throw IntegrityError(where + "unknown doc '" + t.doc_id + "'");
        if (d->query_id != t.query_id) throw IntegrityError(where + "doc '" + t.doc_id + "' belongs to another query");
        if (!triple_keys.emplace(t.query_id, t.charge_id, t.doc_id).second) r.fail("duplicate triple");
        ds.triples.push_back(std::move(t));
    });

    {
        auto path = dir / "split.json";
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path.string());
        Reader r{"split.json", 1};
        json rec;
        try {
            rec = json::parse(in);
        } catch (const json::parse_error& e) {
            r.fail(std::string("malformed JSON: ") + e.what());
        }
        if (!rec.is_object()) r.fail("split must be an object");
        ds.split.train = r.strings(rec, "train");
        ds.split.test = r.strings(rec, "test");
        std::set<std::string> all;
        for (const auto* part : {&ds.split.train, &ds.split.test}) {
            for (const auto& id : *part) {
                if (!ds.find_query(id)) throw IntegrityError("split.json: unknown query '" + id + "'");
                if (!all.insert(id).second) throw IntegrityError("split.json: query '" + id + "' listed twice");
            }
        }
        if (all.size() != ds.queries.size()) throw IntegrityError("split.json: split does not cover every query");
    }

    if (fs::exists(dir / "reversals.jsonl")) {
        detail::for_each_record(dir / "reversals.jsonl", [&](const Reader& r, const json& rec) {
            Reversal rv;
            rv.from = static_cast<ChargeId>(r.integer(rec, "from"));
            rv.to = static_cast<ChargeId>(r.integer(rec, "to"));
            rv.count = r.integer(rec, "count");
            if (rv.count < 0) r.fail("negative reversal count");
            check_charge(r, rv.from);
            check_charge(r, rv.to);
            ds.reversals.push_back(rv);
        });
    }
    if (fs::exists(dir / "templates.jsonl")) {
        detail::for_each_record(dir / "templates.jsonl", [&](const Reader& r, const json& rec) {
            ChargeTemplates t;
            t.charge_id = static_cast<ChargeId>(r.integer(rec, "charge_id"));
            check_charge(r, t.charge_id);
            t.sentences = r.strings(rec, "sentences");
            ds.templates.push_back(std::move(t));
        });
    }
    if (fs::exists(dir / "annotations.jsonl")) {
        detail::for_each_record(dir / "annotations.jsonl", [&](const Reader& r, const json& rec) {
            AnnotatorLabel a;
            a.annotator = r.str(rec, "annotator");
            a.group = r.str(rec, "group");
            a.query_id = r.str(rec, "query_id");
            a.charge_id = static_cast<ChargeId>(r.integer(rec, "charge_id"));
            a.doc_id = r.str(rec, "doc_id");
            a.grade = r.grade(rec);
            check_charge(r, a.charge_id);
            ds.annotations.push_back(std::move(a));
        });
    }
    if (fs::exists(dir / "preferences.jsonl")) {
        detail::for_each_record(dir / "preferences.jsonl", [&](const Reader& r, const json& rec) {
            AnnotatorPreference p;
            p.annotator = r.str(rec, "annotator");
            p.query_id = r.str(rec, "query_id");
            const auto& levels = r.field(rec, "levels");
            if (!levels.is_array()) r.fail("levels must be an array");
            for (const auto& l : levels) p.levels.push_back(r.charge_set(l, "level"));
            p.unselected = r.charge_set(r.field(rec, "unselected"), "unselected");
            ds.preferences.push_back(std::move(p));
        });
    }
    ds.reindex();
    return ds;
}

/// Write a dataset directory; output is byte-stable for equal inputs.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<json> recs;

    for (std::size_t i = 0; i < ds.vocab.size(); ++i) {
        recs.push_back(json{{"id", i}, {"name", ds.vocab.name(static_cast<ChargeId>(i))}});
    }
    detail::write_lines(dir / "vocab.jsonl", recs);

    recs.clear();
    for (const auto& q : ds.queries) {
        json dist = json::object();
        for (const auto& [c, p] : q.intent_dist) dist[std::to_string(c)] = p;
        recs.push_back(json{{"id", q.id},
                            {"sentences", q.sentences},
                            {"ccs", std::vector<ChargeId>(q.candidate_charge_set.begin(), q.candidate_charge_set.end())},
                            {"intent_dist", dist}});
    }
    detail::write_lines(dir / "queries.jsonl", recs);

    recs.clear();
    for (const auto& d : ds.docs) {
        recs.push_back(json{{"id", d.id},
                            {"query_id", d.query_id},
                            {"sentences", d.sentences},
                            {"charges", std::vector<ChargeId>(d.charges.begin(), d.charges.end())},
                            {"qrel", d.query_relevance}});
    }
    detail::write_lines(dir / "docs.jsonl", recs);

    recs.clear();
    for (const auto& t : ds.triples) {
        recs.push_back(json{{"query_id", t.query_id}, {"charge_id", t.charge_id}, {"doc_id", t.doc_id}, {"grade", t.grade}});
    }
    detail::write_lines(dir / "triples.jsonl", recs);

    {
        std::ofstream out(dir / "split.json", std::ios::binary);
        out << json{{"train", ds.split.train}, {"test", ds.split.test}}.dump() << '\n';
    }

    auto optional_file = [&](const char* name, bool present, auto&& build) {
        auto path = dir / name;
        if (!present) {
            fs::remove(path);
            return;
        }
        recs.clear();
        build();
        detail::write_lines(path, recs);
    };
    optional_file("reversals.jsonl", !ds.reversals.empty(), [&] {
        for (const auto& r : ds.reversals) recs.push_back(json{{"from", r.from}, {"to", r.to}, {"count", r.count}});
    });
    optional_file("templates.jsonl", !ds.templates.empty(), [&] {
        for (const auto& t : ds.templates) recs.push_back(json{{"charge_id", t.charge_id}, {"sentences", t.sentences}});
    });
    optional_file("annotations.jsonl", !ds.annotations.empty(), [&] {
        for (const auto& a : ds.annotations) {
            recs.push_back(json{{"annotator", a.annotator}, {"group", a.group}, {"query_id", a.query_id},
                                {"charge_id", a.charge_id}, {"doc_id", a.doc_id}, {"grade", a.grade}});
        }
    });
    optional_file("preferences.jsonl", !ds.preferences.empty(), [&] {
        for (const auto& p : ds.preferences) {
            json levels = json::array();
            for (const auto& l : p.levels) levels.push_back(std::vector<ChargeId>(l.begin(), l.end()));
            recs.push_back(json{{"annotator", p.annotator}, {"query_id", p.query_id}, {"levels", levels},
                                {"unselected", std::vector<ChargeId>(p.unselected.begin(), p.unselected.end())}});
        }
    });
}

}  // namespace io

using io::load_dataset;
using io::save_dataset;

}  // namespace divlex
