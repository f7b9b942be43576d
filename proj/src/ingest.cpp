#include "repralign/ingest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <locale>
#include <json.hpp>
#include <sstream>

#include "repralign/artifact.hpp"

namespace repralign {
namespace {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool parse_number(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

Error format_error(const std::string& what, std::size_t offset) {
    return Error(ErrorCode::FormatError, what + " (byte offset " + std::to_string(offset) + ")").at_offset(offset);
}

Matrix parse_csv_matrix(const std::string& text) {
    std::vector<double> data;
    std::size_t cols = 0, rows = 0;
    bool first_content = true;
    std::size_t offset = 0;
    while (offset < text.size()) {
        std::size_t end = text.find('\n', offset);
        if (end == std::string::npos) end = text.size();
        const std::string_view line = trim(std::string_view(text).substr(offset, end - offset));
        const std::size_t line_offset = offset;
        offset = end + 1;
        if (line.empty() || line.front() == '#') continue;

        const auto fields = split(line, ',');
        std::vector<double> values(fields.size());
        bool numeric = true;
        for (std::size_t c = 0; c < fields.size() && numeric; ++c) numeric = parse_number(fields[c], values[c]);
        if (!numeric) {
            if (first_content) {
                first_content = false;
                continue;  // header row
            }
            throw format_error("non-numeric CSV field on data row " + std::to_string(rows), line_offset);
        }
        first_content = false;
        if (rows == 0) {
            cols = fields.size();
        } else if (fields.size() != cols) {
            throw format_error("row " + std::to_string(rows) + " has " + std::to_string(fields.size()) +
                                   " columns, expected " + std::to_string(cols),
                               line_offset);
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!std::isfinite(values[c])) {
                throw Error(ErrorCode::NonFinite, "non-finite value at row " + std::to_string(rows) + ", column " +
                                                      std::to_string(c))
                    .at_row(rows)
                    .at_col(c);
            }
        }
        data.insert(data.end(), values.begin(), values.end());
        ++rows;
    }
    if (rows == 0) throw format_error("CSV matrix has no data rows", 0);
    return Matrix(rows, cols, std::move(data));
}

template <typename T>
T read_le(const std::string& bytes, std::size_t offset) {
    T v;
    std::memcpy(&v, bytes.data() + offset, sizeof(T));
    return v;
}

// Value text following 'key': in a Python dict literal.
std::string_view dict_value(std::string_view header, std::string_view key, std::size_t base) {
    const std::string quoted = "'" + std::string(key) + "'";
    const std::size_t pos = header.find(quoted);
    if (pos == std::string_view::npos) throw format_error("NPY header lacks " + quoted, base);
    std::size_t colon = header.find(':', pos + quoted.size());
    if (colon == std::string_view::npos) throw format_error("malformed NPY header", base + pos);
    std::string_view rest = trim(header.substr(colon + 1));
    if (!rest.empty() && rest.front() == '(') {
        const std::size_t close = rest.find(')');
        if (close == std::string_view::npos) throw format_error("unterminated NPY shape", base + pos);
        return rest.substr(0, close + 1);
    }
    const std::size_t end = rest.find_first_of(",}");
    return trim(rest.substr(0, end));
}

Matrix parse_npy(const std::string& bytes) {
    static constexpr char magic[] = "\x93NUMPY";
    if (bytes.size() < 10 || std::memcmp(bytes.data(), magic, 6) != 0) throw format_error("bad NPY magic string", 0);
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0, header_start = 0;
    if (major == 1) {
        header_len = read_le<std::uint16_t>(bytes, 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw format_error("truncated NPY preamble", 8);
        header_len = read_le<std::uint32_t>(bytes, 8);
        header_start = 12;
    } else {
        throw format_error("unsupported NPY version " + std::to_string(major), 6);
    }
    if (header_start + header_len > bytes.size()) throw format_error("truncated NPY header", header_start);
    const std::string_view header(bytes.data() + header_start, header_len);

    const std::string_view descr = dict_value(header, "descr", header_start);
    std::size_t item = 0;
    if (descr == "'<f8'") {
        item = 8;
    } else if (descr == "'<f4'") {
        item = 4;
    } else {
        throw format_error("unsupported NPY dtype " + std::string(descr) + " (need <f4 or <f8)", header_start);
    }
    if (dict_value(header, "fortran_order", header_start) != "False") {
        throw format_error("Fortran-ordered NPY arrays are not supported", header_start);
    }
    std::string_view shape = dict_value(header, "shape", header_start);
    shape = shape.substr(1, shape.size() - 2);
    std::vector<std::size_t> dims;
    for (auto part : split(shape, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || ptr != part.data() + part.size()) throw format_error("bad NPY shape", header_start);
        dims.push_back(v);
    }
    if (dims.size() != 2) throw format_error("NPY array must be 2-D", header_start);

    const std::size_t data_start = header_start + header_len;
    const std::size_t count = dims[0] * dims[1];
    if (bytes.size() - data_start < count * item) throw format_error("NPY data shorter than its shape", data_start);

    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = data_start + i * item;
        data[i] = item == 8 ? read_le<double>(bytes, at) : static_cast<double>(read_le<float>(bytes, at));
        if (!std::isfinite(data[i])) {
            throw Error(ErrorCode::NonFinite, "non-finite value at row " + std::to_string(i / dims[1]) + ", column " +
                                                  std::to_string(i % dims[1]))
                .at_row(i / dims[1])
                .at_col(i % dims[1]);
        }
    }
    return Matrix(dims[0], dims[1], std::move(data));
}

// Lines without trailing blank ones.
std::vector<std::string> content_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    while (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

bool is_index(std::string_view s) {
    s = trim(s);
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Code point classification through the C.UTF-8 locale, ASCII fallback.
class CodePointClassifier {
public:
    CodePointClassifier() {
        for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
            try {
                locale_ = std::locale(name);
                facet_ = &std::use_facet<std::ctype<wchar_t>>(locale_);
                return;
            } catch (const std::runtime_error&) {
            }
        }
    }

    bool is_alnum(char32_t c) const {
        if (c < 0x80) return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        return facet_ != nullptr && facet_->is(std::ctype_base::alnum, static_cast<wchar_t>(c));
    }

    char32_t lower(char32_t c) const {
        if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
        return facet_ != nullptr ? static_cast<char32_t>(facet_->tolower(static_cast<wchar_t>(c))) : c;
    }

private:
    std::locale locale_;
    const std::ctype<wchar_t>* facet_ = nullptr;
};

const CodePointClassifier& classifier() {
    static const CodePointClassifier instance;
    return instance;
}

// Decodes one UTF-8 sequence; returns U+FFFF-sized sentinel 0xFFFFFFFF for
// invalid bytes (consuming one byte).
char32_t decode(const std::string& s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    auto bits = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F); };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        const char32_t c = (static_cast<char32_t>(b0 & 0x1F) << 6) | bits(1);
        i += 2;
        return c >= 0x80 ? c : 0xFFFFFFFF;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        const char32_t c = (static_cast<char32_t>(b0 & 0x0F) << 12) | (bits(1) << 6) | bits(2);
        i += 3;
        return c >= 0x800 ? c : 0xFFFFFFFF;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        const char32_t c = (static_cast<char32_t>(b0 & 0x07) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3);
        i += 4;
        return c >= 0x10000 && c <= 0x10FFFF ? c : 0xFFFFFFFF;
    }
    ++i;
    return 0xFFFFFFFF;
}

void encode(char32_t c, std::string& out) {
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
}

std::string json_label_text(const nlohmann::json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    if (value.is_number_integer() || value.is_number_unsigned()) return value.dump();
    return {};
}

}  // namespace

Matrix load_dense_matrix(const std::filesystem::path& path, MatrixFormat format) {
    const std::string bytes = read_file(path);
    if (format == MatrixFormat::Auto) format = path.extension() == ".npy" ? MatrixFormat::Npy : MatrixFormat::Csv;
    return format == MatrixFormat::Npy ? parse_npy(bytes) : parse_csv_matrix(bytes);
}

void save_npy(const std::filesystem::path& path, const Matrix& m, NpyDtype dtype) {
    std::string header = "{'descr': '" + std::string(dtype == NpyDtype::Float64 ? "<f8" : "<f4") +
                         "', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                         std::to_string(m.cols()) + "), }";
    // Pad so the data starts on a 64-byte boundary; header ends in '\n'.
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (dtype == NpyDtype::Float64) {
        out.write(reinterpret_cast<const char*>(m.data().data()), static_cast<std::streamsize>(m.data().size() * 8));
    } else {
        for (double v : m.data()) {
            const auto f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

LabelId LabelSet::id_of(const std::string& name) const {
    const auto it = std::find(vocab.begin(), vocab.end(), name);
    if (it == vocab.end()) throw Error(ErrorCode::InvalidArgument, "unknown label '" + name + "'");
    return static_cast<LabelId>(it - vocab.begin());
}

LabelSet load_labels(const std::filesystem::path& path, std::optional<std::size_t> expected_rows) {
    auto lines = content_lines(read_file(path));
    if (lines.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has no labels");

    bool two_column = trim(lines.front()) == "id,label";
    if (two_column) {
        lines.erase(lines.begin());
    } else {
        two_column = std::all_of(lines.begin(), lines.end(), [](const std::string& l) {
            const auto comma = l.find(',');
            return comma != std::string::npos && is_index(std::string_view(l).substr(0, comma));
        });
    }
    if (lines.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has a header but no labels");
    // A blank line inside the file would shift every later label by a row.
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) {
            throw Error(ErrorCode::FormatError, path.string() + ": blank label on line " + std::to_string(i + 1))
                .at_row(i);
        }
    }

    std::vector<std::string> names(lines.size());
    if (two_column) {
        std::vector<std::uint8_t> seen(lines.size(), 0);
        for (const auto& line : lines) {
            const auto comma = line.find(',');
            std::size_t id = 0;
            const auto idtext = trim(std::string_view(line).substr(0, comma));
            std::from_chars(idtext.data(), idtext.data() + idtext.size(), id);
            if (id >= lines.size() || seen[id]) {
                throw Error(ErrorCode::FormatError, "label ids must be a permutation of 0.." +
                                                        std::to_string(lines.size() - 1));
            }
            seen[id] = 1;
            names[id] = std::string(trim(std::string_view(line).substr(comma + 1)));
        }
    } else {
        for (std::size_t i = 0; i < lines.size(); ++i) names[i] = std::string(trim(lines[i]));
    }
    if (expected_rows && *expected_rows != names.size()) {
        throw Error(ErrorCode::RowCountMismatch, path.string() + " has " + std::to_string(names.size()) +
                                                     " labels for " + std::to_string(*expected_rows) + " rows");
    }

    LabelSet out;
    out.labels.reserve(names.size());
    for (const auto& name : names) {
        auto it = std::find(out.vocab.begin(), out.vocab.end(), name);
        if (it == out.vocab.end()) {
            out.vocab.push_back(name);
            it = out.vocab.end() - 1;
        }
        out.labels.push_back(static_cast<LabelId>(it - out.vocab.begin()));
    }
    return out;
}

void save_labels(const std::filesystem::path& path, const LabelSet& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (LabelId id : labels.labels) out << labels.vocab.at(id) << '\n';
}

TextCorpus load_jsonl_corpus(const std::filesystem::path& path, const std::string& text_field,
                             const std::string& label_field, const std::optional<std::string>& positive) {
    const std::string text = read_file(path);
    TextCorpus corpus;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::BadJson, "line " + std::to_string(line_no) + ": " + e.what()).at_row(line_no);
        }
        if (!record.is_object()) {
            throw Error(ErrorCode::BadJson, "line " + std::to_string(line_no) + " is not a JSON object").at_row(line_no);
        }
        const auto text_it = record.find(text_field);
        if (text_it == record.end() || !text_it->is_string()) {
            throw Error(ErrorCode::MissingField, "line " + std::to_string(line_no) + " lacks string field '" +
                                                     text_field + "'")
                .at_row(line_no);
        }
        const auto label_it = record.find(label_field);
        const std::string label = label_it == record.end() ? std::string() : json_label_text(*label_it);
        if (label_it == record.end() || label.empty()) {
            throw Error(ErrorCode::MissingField, "line " + std::to_string(line_no) + " lacks label field '" +
                                                     label_field + "'")
                .at_row(line_no);
        }
        auto vit = std::find(corpus.label_vocab.begin(), corpus.label_vocab.end(), label);
        if (vit == corpus.label_vocab.end()) {
            corpus.label_vocab.push_back(label);
            vit = corpus.label_vocab.end() - 1;
        }
        corpus.documents.push_back(
            TextDocument{text_it->get<std::string>(), static_cast<LabelId>(vit - corpus.label_vocab.begin())});
    }
    if (corpus.documents.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has no records");
    if (positive) {
        const auto it = std::find(corpus.label_vocab.begin(), corpus.label_vocab.end(), *positive);
        if (it == corpus.label_vocab.end()) {
            throw Error(ErrorCode::InvalidArgument, "positive label '" + *positive + "' does not occur in the corpus");
        }
        corpus.positive_class = static_cast<LabelId>(it - corpus.label_vocab.begin());
    }
    return corpus;
}

std::vector<std::string> tokenize(const std::string& text) {
    const auto& cls = classifier();
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t c = decode(text, i);
        if (c != 0xFFFFFFFF && cls.is_alnum(c)) {
            encode(cls.lower(c), current);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Matrix SparseMatrix::to_dense() const {
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out(r, col_idx[k]) = values[k];
    }
    return out;
}

std::string corpus_fingerprint(const TextCorpus& corpus) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& doc : corpus.documents) {
        mix(doc.text.data(), doc.text.size());
        const std::string& label = corpus.label_vocab.at(doc.label);
        mix("\x1f", 1);
        mix(label.data(), label.size());
        mix("\x1e", 1);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

BowResult bow_featurize(const TextCorpus& corpus, std::size_t min_count, const BowVocabulary* vocabulary,
                        unsigned workers) {
    const std::size_t n = corpus.documents.size();
    std::vector<std::map<std::string, std::size_t>> counts(n);
    parallel_for(n, workers, [&](std::size_t d) {
        for (auto& token : tokenize(corpus.documents[d].text)) ++counts[d][std::move(token)];
    });

    BowResult result;
    if (vocabulary) {
        result.vocabulary = *vocabulary;
    } else {
        std::map<std::string, std::size_t> totals;
        for (const auto& doc : counts) {
            for (const auto& [term, c] : doc) totals[term] += c;
        }
        result.vocabulary.min_count = min_count;
        result.vocabulary.built_from = corpus_fingerprint(corpus);
        for (const auto& [term, c] : totals) {
            if (c >= min_count) {
                result.vocabulary.index.emplace(term, result.vocabulary.terms.size());
                result.vocabulary.terms.push_back(term);
            }
        }
    }
    if (result.vocabulary.size() == 0) {
        throw Error(ErrorCode::EmptyVocabulary, "no term occurs at least " + std::to_string(min_count) + " times");
    }

    SparseMatrix& m = result.matrix;
    m.rows = n;
    m.cols = result.vocabulary.size();
    m.row_ptr.push_back(0);
    for (const auto& doc : counts) {
        std::vector<std::pair<std::size_t, double>> row;
        for (const auto& [term, c] : doc) {
            const auto it = result.vocabulary.index.find(term);
            if (it != result.vocabulary.index.end()) row.emplace_back(it->second, static_cast<double>(c));
        }
        std::sort(row.begin(), row.end());
        for (const auto& [col, v] : row) {
            m.col_idx.push_back(col);
            m.values.push_back(v);
        }
        m.row_ptr.push_back(m.col_idx.size());
    }
    return result;
}

void save_vocabulary(const std::filesystem::path& path, const BowVocabulary& vocab) {
    CsvArtifact a;
    a.format = "bow-vocabulary";
    a.header = {"column", "term"};
    for (std::size_t i = 0; i < vocab.terms.size(); ++i) a.rows.push_back({std::to_string(i), vocab.terms[i]});
    a.add_meta("min_count", std::to_string(vocab.min_count));
    a.add_meta("built_from", vocab.built_from);
    write_artifact(path, a);
}

BowVocabulary load_vocabulary(const std::filesystem::path& path) {
    const CsvArtifact a = read_artifact(path, "bow-vocabulary");
    BowVocabulary vocab;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (parse_size(a.rows[i].at(0)) != i) throw Error(ErrorCode::FormatError, "vocabulary columns out of order");
        vocab.index.emplace(a.rows[i].at(1), i);
        vocab.terms.push_back(a.rows[i].at(1));
    }
    vocab.min_count = parse_size(a.meta_value("min_count"));
    vocab.built_from = a.meta_value("built_from");
    return vocab;
}

}  // namespace repralign
