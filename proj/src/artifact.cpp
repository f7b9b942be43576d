#include "repralign/artifact.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace repralign {
namespace {

constexpr std::string_view kTagPrefix = "#repralign-format: ";
constexpr std::string_view kMetaPrefix = "#meta ";

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void check_field(const std::string& field) {
    if (field.find_first_of(",\n\r") != std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "artifact field contains a separator: '" + field + "'");
    }
}

}  // namespace

const std::string* CsvArtifact::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta) {
        if (k == key) return &v;
    }
    return nullptr;
}

const std::string& CsvArtifact::meta_value(const std::string& key) const {
    if (const auto* v = find_meta(key)) return *v;
    throw Error(ErrorCode::FormatError, format + " artifact lacks metadata '" + key + "'");
}

std::string CsvArtifact::to_string() const {
    std::string out;
    out += kTagPrefix;
    out += format + "/" + std::to_string(version) + "\n";
    auto join = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            check_field(fields[i]);
            if (i) out += ',';
            out += fields[i];
        }
        out += '\n';
    };
    join(header);
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw Error(ErrorCode::InvalidArgument, "artifact row width != header width");
        join(row);
    }
    for (const auto& [k, v] : meta) {
        if (k.find('=') != std::string::npos || (k + v).find('\n') != std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "bad metadata entry '" + k + "'");
        }
        out += kMetaPrefix;
        out += k + "=" + v + "\n";
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
    if (text == "nan" || text == "NA") return std::nan("");
    if (text == "inf") return INFINITY;
    if (text == "-inf") return -INFINITY;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorCode::FormatError, "not a number: '" + text + "'");
    }
    return v;
}

std::size_t parse_size(const std::string& text) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorCode::FormatError, "not a non-negative integer: '" + text + "'");
    }
    return v;
}

void write_artifact(const std::filesystem::path& path, const CsvArtifact& artifact) {
    const std::string text = artifact.to_string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

CsvArtifact parse_artifact(const std::string& text, const std::string& expected_format, int supported_version) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || !line.starts_with(kTagPrefix)) {
        throw Error(ErrorCode::FormatError, "missing '#repralign-format' tag (byte offset 0)").at_offset(0);
    }
    const std::string tag = line.substr(kTagPrefix.size());
    const auto slash = tag.rfind('/');
    if (slash == std::string::npos) throw Error(ErrorCode::FormatError, "malformed format tag '" + tag + "'");
    CsvArtifact a;
    a.format = tag.substr(0, slash);
    if (a.format != expected_format) {
        throw Error(ErrorCode::FormatError, "expected a " + expected_format + " artifact, found " + a.format);
    }
    a.version = static_cast<int>(parse_size(tag.substr(slash + 1)));
    if (a.version != supported_version) {
        throw Error(ErrorCode::VersionMismatch, a.format + " version " + std::to_string(a.version) +
                                                   " is not supported (reader handles version " +
                                                   std::to_string(supported_version) + ")");
    }
    if (!std::getline(in, line)) throw Error(ErrorCode::FormatError, a.format + " artifact lacks a header row");
    a.header = split_fields(line);
    bool in_meta = false;
    while (std::getline(in, line)) {
        if (line.starts_with(kMetaPrefix)) {
            in_meta = true;
            const std::string entry = line.substr(kMetaPrefix.size());
            const auto eq = entry.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::FormatError, "metadata line without '='");
            a.meta.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
            continue;
        }
        if (line.empty()) continue;
        if (in_meta) throw Error(ErrorCode::FormatError, "data row after the metadata block");
        auto fields = split_fields(line);
        if (fields.size() != a.header.size()) {
            throw Error(ErrorCode::FormatError, "row " + std::to_string(a.rows.size()) + " has " +
                                                    std::to_string(fields.size()) + " fields, header has " +
                                                    std::to_string(a.header.size()));
        }
        a.rows.push_back(std::move(fields));
    }
    return a;
}

CsvArtifact read_artifact(const std::filesystem::path& path, const std::string& expected_format,
                          int supported_version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_artifact(ss.str(), expected_format, supported_version);
}

CsvArtifact dendrogram_artifact(const Dendrogram& dn) {
    CsvArtifact a;
    a.format = kDendrogramFormat;
    a.header = {"step", "left_id", "right_id", "cost", "size"};
    for (std::size_t m = 0; m < dn.merges.size(); ++m) {
        const Merge& mg = dn.merges[m];
        a.rows.push_back({std::to_string(m), std::to_string(mg.left), std::to_string(mg.right), format_double(mg.cost),
                          std::to_string(mg.size)});
    }
    a.add_meta("leaves", std::to_string(dn.leaves));
    return a;
}

Dendrogram dendrogram_from_artifact(const CsvArtifact& a) {
    if (a.header != std::vector<std::string>{"step", "left_id", "right_id", "cost", "size"}) {
        throw Error(ErrorCode::FormatError, "dendrogram header must be step,left_id,right_id,cost,size");
    }
    Dendrogram dn;
    dn.leaves = parse_size(a.meta_value("leaves"));
    for (std::size_t m = 0; m < a.rows.size(); ++m) {
        const auto& r = a.rows[m];
        if (parse_size(r[0]) != m) throw Error(ErrorCode::FormatError, "dendrogram steps out of order");
        dn.merges.push_back(Merge{parse_size(r[1]), parse_size(r[2]), parse_double(r[3]), parse_size(r[4])});
    }
    dn.check();
    return dn;
}

void save_dendrogram(const std::filesystem::path& path, const Dendrogram& dn,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
    CsvArtifact a = dendrogram_artifact(dn);
    for (const auto& [k, v] : meta) a.add_meta(k, v);
    write_artifact(path, a);
}

Dendrogram load_dendrogram(const std::filesystem::path& path) {
    return dendrogram_from_artifact(read_artifact(path, kDendrogramFormat));
}

CsvArtifact curve_artifact(const std::string& format, const std::string& index_name, const std::string& value_name,
                           const CurveSeries& curve) {
    curve.check();
    CsvArtifact a;
    a.format = format;
    a.header = {index_name, value_name};
    for (std::size_t i = 0; i < curve.index.size(); ++i) {
        a.rows.push_back({std::to_string(curve.index[i]), format_double(curve.values[i])});
    }
    a.add_meta("area", format_double(curve.area));
    return a;
}

CurveSeries curve_from_artifact(const CsvArtifact& a) {
    if (a.header.size() < 2) throw Error(ErrorCode::FormatError, "curve artifact needs two columns");
    CurveSeries c;
    for (const auto& row : a.rows) {
        c.index.push_back(parse_size(row[0]));
        c.values.push_back(parse_double(row[1]));
    }
    c.area = parse_double(a.meta_value("area"));
    c.check();
    return c;
}

}  // namespace repralign
