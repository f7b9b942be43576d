#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "repralign/core.hpp"
#include "repralign/hierclust.hpp"

namespace repralign {

// Tagged CSV file:
//   #repralign-format: <name>/<version>
//   header
//   rows...
//   #meta <key>=<value>      (trailing metadata block, in insertion order)
struct CsvArtifact {
    std::string format;
    int version = 1;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> meta;

    // First value for key, or throws FormatError.
    const std::string& meta_value(const std::string& key) const;
    const std::string* find_meta(const std::string& key) const;
    void add_meta(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }

    std::string to_string() const;
};

// Shortest decimal text that parses back to the same double ("inf", "-inf",
// "nan" for non-finite values).
std::string format_double(double v);
// Inverse of format_double. Throws FormatError.
double parse_double(const std::string& text);
std::size_t parse_size(const std::string& text);

void write_artifact(const std::filesystem::path& path, const CsvArtifact& artifact);

// Reads and checks the format tag. Errors: FormatError (missing or foreign
// tag, ragged rows), VersionMismatch (known format, unsupported version).
CsvArtifact read_artifact(const std::filesystem::path& path, const std::string& expected_format,
                          int supported_version = 1);
CsvArtifact parse_artifact(const std::string& text, const std::string& expected_format, int supported_version = 1);

inline constexpr const char* kDendrogramFormat = "dendrogram";

// Columns step,left_id,right_id,cost,size.
CsvArtifact dendrogram_artifact(const Dendrogram& dn);
Dendrogram dendrogram_from_artifact(const CsvArtifact& artifact);

void save_dendrogram(const std::filesystem::path& path, const Dendrogram& dn,
                     const std::vector<std::pair<std::string, std::string>>& meta = {});
Dendrogram load_dendrogram(const std::filesystem::path& path);

// Two-column curve (index column name, value column name).
CsvArtifact curve_artifact(const std::string& format, const std::string& index_name, const std::string& value_name,
                           const CurveSeries& curve);
CurveSeries curve_from_artifact(const CsvArtifact& artifact);

}  // namespace repralign
