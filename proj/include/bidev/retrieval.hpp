#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bidev/types.hpp"

namespace bidev {

struct Document {
    std::string doc_id;
    std::string title;  // must be non-empty
    std::string body;   // may be empty

    // The text evidence paragraphs are segmented from.
    std::string evidence_text() const;
};

/// Corpus loaded from a JSON-lines file, one {"doc_id","title","body"} object
/// per line. Rejects duplicate doc_ids.
class CorpusStore {
public:
    CorpusStore() = default;
    explicit CorpusStore(std::vector<Document> docs);
    static CorpusStore load_jsonl(const std::filesystem::path& path);

    const Document* find(const std::string& doc_id) const;
    const std::vector<Document>& docs() const { return docs_; }
    std::size_t size() const { return docs_.size(); }

private:
    std::vector<Document> docs_;
    std::map<std::string, std::size_t> by_id_;
};

// Lowercases and splits on non-alphanumeric runs (ASCII); no stemming, no
// stopword removal. Empty input gives an empty list.
std::vector<std::string> tokenize(const std::string& text);

struct BM25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredDocument {
    std::string doc_id;
    double score = 0.0;
};

/// Inverted index over title + " " + body of each document, with the
/// statistics BM25 needs. Immutable after build; safe for concurrent readers.
class RetrievalIndex {
public:
    struct Posting {
        std::size_t doc_index;
        int term_frequency;
    };

    static RetrievalIndex build(const std::vector<Document>& corpus);

    std::size_t doc_count() const { return doc_lengths_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    const std::vector<int>& doc_lengths() const { return doc_lengths_; }
    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    const std::map<std::string, int>& doc_frequency() const { return doc_frequency_; }
    const Document& doc(std::size_t doc_index) const;
    const Document* find(const std::string& doc_id) const;

    // Serialization; the on-disk form is version-tagged JSON and loading a
    // mismatched version raises IndexVersionError.
    void save(const std::filesystem::path& path) const;
    static RetrievalIndex load(const std::filesystem::path& path);

    // Test hook: overwrite one posting's term frequency, leaving every other
    // statistic untouched.
    void set_term_frequency(const std::string& term, std::size_t doc_index, int term_frequency);

private:
    std::vector<Document> docs_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::string, std::vector<Posting>> postings_;
    std::map<std::string, int> doc_frequency_;
    std::vector<int> doc_lengths_;
    double avg_doc_length_ = 0.0;
};

// Okapi BM25 with the non-negative idf form ln(1 + (N - df + 0.5)/(df + 0.5)).
// Sums over distinct query terms in first-occurrence order; terms absent from
// the document contribute 0.
double bm25_score(const RetrievalIndex& index, const std::vector<std::string>& query_tokens,
                  std::size_t doc_index, const BM25Params& params = {});

// The k highest-scoring documents with score > 0, non-increasing by score,
// ties broken by ascending doc_id. Fewer than k come back when fewer score
// positive. Raises EmptyQueryError when the query tokenizes to nothing.
std::vector<ScoredDocument> retrieve_top_k(const RetrievalIndex& index,
                                           const std::string& query_text, std::size_t k,
                                           const BM25Params& params = {});

}  // namespace bidev
