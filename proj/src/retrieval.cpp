#include "bidev/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "bidev/errors.hpp"
#include "bidev/util.hpp"

namespace bidev {

namespace {
constexpr const char* kIndexVersion = "bidev.index.v1";
}

std::string Document::evidence_text() const {
    if (body.empty()) return title;
    return title + "\n" + body;
}

CorpusStore::CorpusStore(std::vector<Document> docs) : docs_(std::move(docs)) {
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        auto [it, inserted] = by_id_.emplace(docs_[i].doc_id, i);
        if (!inserted) throw DuplicateDocIdError(docs_[i].doc_id);
    }
}

CorpusStore CorpusStore::load_jsonl(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for_each_jsonl_line(path, [&](int line_number, const std::string& line) {
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
            docs.push_back({record.at("doc_id").get<std::string>(),
                            record.at("title").get<std::string>(),
                            record.value("body", std::string{})});
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecordError(line_number, e.what());
        }
    });
    return CorpusStore(std::move(docs));
}

const Document* CorpusStore::find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        const bool alnum = (uc >= '0' && uc <= '9') || (uc >= 'a' && uc <= 'z') ||
                           (uc >= 'A' && uc <= 'Z');
        if (alnum) {
            current += static_cast<char>(uc >= 'A' && uc <= 'Z' ? uc - 'A' + 'a' : uc);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

RetrievalIndex RetrievalIndex::build(const std::vector<Document>& corpus) {
    RetrievalIndex index;
    index.docs_ = corpus;
    long long total_length = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto [it, inserted] = index.by_id_.emplace(corpus[i].doc_id, i);
        if (!inserted) throw DuplicateDocIdError(corpus[i].doc_id);

        const auto tokens = tokenize(corpus[i].title + " " + corpus[i].body);
        index.doc_lengths_.push_back(static_cast<int>(tokens.size()));
        total_length += static_cast<long long>(tokens.size());

        std::map<std::string, int> frequencies;
        for (const auto& token : tokens) ++frequencies[token];
        for (const auto& [term, tf] : frequencies) {
            index.postings_[term].push_back({i, tf});
            ++index.doc_frequency_[term];
        }
    }
    index.avg_doc_length_ =
        corpus.empty() ? 0.0 : static_cast<double>(total_length) / static_cast<double>(corpus.size());
    return index;
}

const Document& RetrievalIndex::doc(std::size_t doc_index) const {
    if (doc_index >= docs_.size()) throw IndexOutOfRangeError("doc_index out of range");
    return docs_[doc_index];
}

const Document* RetrievalIndex::find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

void RetrievalIndex::set_term_frequency(const std::string& term, std::size_t doc_index,
                                        int term_frequency) {
    auto it = postings_.find(term);
    if (it == postings_.end()) throw IndexOutOfRangeError("unknown term: " + term);
    for (auto& posting : it->second) {
        if (posting.doc_index == doc_index) {
            posting.term_frequency = term_frequency;
            return;
        }
    }
    throw IndexOutOfRangeError("no posting for term in document");
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& doc : docs_) {
        docs.push_back({{"doc_id", doc.doc_id}, {"title", doc.title}, {"body", doc.body}});
    }
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& posting : list) {
            entries.push_back({posting.doc_index, posting.term_frequency});
        }
        postings[term] = std::move(entries);
    }
    nlohmann::json out{{"version", kIndexVersion},
                       {"docs", std::move(docs)},
                       {"doc_lengths", doc_lengths_},
                       {"avg_doc_length", avg_doc_length_},
                       {"doc_frequency", doc_frequency_},
                       {"postings", std::move(postings)}};
    write_file_atomic(path, out.dump(2) + "\n");
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
    nlohmann::json in = nlohmann::json::parse(read_file(path));
    const std::string version = in.value("version", "");
    if (version != kIndexVersion) {
        throw IndexVersionError("index version mismatch: expected " + std::string(kIndexVersion) +
                                ", found \"" + version + "\"");
    }
    RetrievalIndex index;
    for (const auto& doc : in.at("docs")) {
        index.docs_.push_back({doc.at("doc_id").get<std::string>(),
                               doc.at("title").get<std::string>(),
                               doc.at("body").get<std::string>()});
    }
    for (std::size_t i = 0; i < index.docs_.size(); ++i) index.by_id_[index.docs_[i].doc_id] = i;
    index.doc_lengths_ = in.at("doc_lengths").get<std::vector<int>>();
    index.avg_doc_length_ = in.at("avg_doc_length").get<double>();
    index.doc_frequency_ = in.at("doc_frequency").get<std::map<std::string, int>>();
    for (const auto& [term, entries] : in.at("postings").items()) {
        std::vector<Posting> list;
        for (const auto& entry : entries) {
            list.push_back({entry.at(0).get<std::size_t>(), entry.at(1).get<int>()});
        }
        index.postings_[term] = std::move(list);
    }
    return index;
}

double bm25_score(const RetrievalIndex& index, const std::vector<std::string>& query_tokens,
                  std::size_t doc_index, const BM25Params& params) {
    if (doc_index >= index.doc_count()) throw IndexOutOfRangeError("doc_index out of range");

    // Distinct terms in first-occurrence order; summation order is part of
    // the contract so independent scorers can reproduce scores bit-exactly.
    std::vector<std::string> distinct;
    for (const auto& token : query_tokens) {
        if (std::find(distinct.begin(), distinct.end(), token) == distinct.end()) {
            distinct.push_back(token);
        }
    }

    const double n_docs = static_cast<double>(index.doc_count());
    const double doc_length = static_cast<double>(index.doc_lengths()[doc_index]);
    const double avgdl = index.avg_doc_length();

    double score = 0.0;
    for (const auto& term : distinct) {
        auto postings_it = index.postings().find(term);
        if (postings_it == index.postings().end()) continue;
        int tf = 0;
        for (const auto& posting : postings_it->second) {
            if (posting.doc_index == doc_index) {
                tf = posting.term_frequency;
                break;
            }
        }
        if (tf == 0) continue;
        const double df = static_cast<double>(index.doc_frequency().at(term));
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        const double tf_part = (static_cast<double>(tf) * (params.k1 + 1.0)) /
                               (static_cast<double>(tf) +
                                params.k1 * (1.0 - params.b + params.b * doc_length / avgdl));
        score += idf * tf_part;
    }
    return score;
}

std::vector<ScoredDocument> retrieve_top_k(const RetrievalIndex& index,
                                           const std::string& query_text, std::size_t k,
                                           const BM25Params& params) {
    if (k < 1) throw ContractError("k must be >= 1");
    const auto query_tokens = tokenize(query_text);
    if (query_tokens.empty()) throw EmptyQueryError("query tokenizes to nothing: \"" + query_text +
                                                    "\"");

    // Candidates: documents containing at least one query term. With the
    // non-negative idf everything else scores exactly 0.
    std::vector<char> is_candidate(index.doc_count(), 0);
    for (const auto& token : query_tokens) {
        auto it = index.postings().find(token);
        if (it == index.postings().end()) continue;
        for (const auto& posting : it->second) is_candidate[posting.doc_index] = 1;
    }

    std::vector<ScoredDocument> scored;
    for (std::size_t i = 0; i < index.doc_count(); ++i) {
        if (!is_candidate[i]) continue;
        const double score = bm25_score(index, query_tokens, i, params);
        if (score > 0.0) scored.push_back({index.doc(i).doc_id, score});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

}  // namespace bidev
