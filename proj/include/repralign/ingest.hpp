#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repralign/core.hpp"

namespace repralign {

enum class MatrixFormat { Auto, Csv, Npy };

// Reads a 2-D numeric matrix. NPY: versions 1.0/2.0/3.0, little-endian
// float32/float64 (widened), C order. CSV: comma-separated numbers with an
// optional non-numeric header row; '#' lines are skipped. Auto picks NPY
// for a ".npy" extension. Errors: FormatError (with byte offset),
// NonFinite, IoError.
Matrix load_dense_matrix(const std::filesystem::path& path, MatrixFormat format = MatrixFormat::Auto);

enum class NpyDtype { Float32, Float64 };

// Writes NPY version 1.0, C order.
void save_npy(const std::filesystem::path& path, const Matrix& m, NpyDtype dtype = NpyDtype::Float64);

struct LabelSet {
    std::vector<LabelId> labels;
    std::vector<std::string> vocab;  // first-occurrence order

    // Id of a class name. Throws InvalidArgument for unknown names.
    LabelId id_of(const std::string& name) const;
};

// One label per line, or a two-column "id,label" CSV (optional header)
// whose ids are a permutation of 0..n-1 giving each label's row. Errors:
// EmptyFile, RowCountMismatch (when expected_rows is given), FormatError.
LabelSet load_labels(const std::filesystem::path& path, std::optional<std::size_t> expected_rows = {});

void save_labels(const std::filesystem::path& path, const LabelSet& labels);

struct TextDocument {
    std::string text;
    LabelId label = 0;
};

struct TextCorpus {
    std::vector<TextDocument> documents;
    std::vector<std::string> label_vocab;
    LabelId positive_class = 0;
};

// JSON Lines corpus. Label values may be strings, integers or booleans and
// are stringified for the vocabulary (first-occurrence order). The positive
// class is `positive` if given, else vocabulary id 0. Blank lines are
// skipped. Errors: BadJson(line), MissingField(line), EmptyFile,
// InvalidArgument (unknown positive label).
TextCorpus load_jsonl_corpus(const std::filesystem::path& path, const std::string& text_field,
                             const std::string& label_field, const std::optional<std::string>& positive = {});

// Lowercase and split on every run of non-alphanumeric code points.
// Alphanumeric and case mapping follow the C.UTF-8 locale when available,
// ASCII otherwise. Invalid UTF-8 bytes act as separators.
std::vector<std::string> tokenize(const std::string& text);

struct BowVocabulary {
    std::map<std::string, std::size_t> index;  // term -> column
    std::vector<std::string> terms;            // column -> term, lexicographic
    std::size_t min_count = 1;
    std::string built_from;                    // corpus fingerprint

    std::size_t size() const noexcept { return terms.size(); }
};

// Compressed sparse row term-frequency matrix.
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr;  // rows + 1
    std::vector<std::size_t> col_idx;  // ascending within a row
    std::vector<double> values;

    Matrix to_dense() const;
    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;
};

struct BowResult {
    SparseMatrix matrix;
    BowVocabulary vocabulary;
};

// 64-bit FNV-1a over texts and labels, hex encoded.
std::string corpus_fingerprint(const TextCorpus& corpus);

// Fit mode (no vocabulary): keep terms whose total count across the corpus
// is >= min_count, columns in lexicographic order. Transform mode: reuse
// the vocabulary, dropping unknown terms. Cells are raw term counts.
// Errors: EmptyVocabulary.
BowResult bow_featurize(const TextCorpus& corpus, std::size_t min_count,
                        const BowVocabulary* vocabulary = nullptr, unsigned workers = 0);

void save_vocabulary(const std::filesystem::path& path, const BowVocabulary& vocab);
BowVocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace repralign
