#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repralign/artifact.hpp"

namespace repralign::cli {

// Everything a command needs. Defaults mirror the reference protocol:
// 10000-point subsamples, 5 seeds, N = 100..1000 step 100, 5 folds.
struct RunConfig {
    std::string command;

    std::string matrix;
    std::string labels;
    std::string corpus;
    std::string text_field = "text";
    std::string label_field = "label";
    std::string positive;

    std::size_t subsample = 10000;
    std::size_t seeds = 5;
    std::uint64_t seed_base = 0;
    bool low_memory = false;
    std::string dendrogram;  // directory with dendrogram_seed<i>.csv to reuse

    bool all_labels = false;
    std::size_t k_stride = 1;

    std::vector<std::size_t> sizes = {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    std::vector<double> lambdas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
    std::size_t folds = 5;
    std::string metric = "accuracy";
    std::string test_matrix;
    std::string test_labels;
    double test_fraction = 0.2;

    std::string cells;
    std::string x_metric = "ALC";
    std::string y_metric = "THAS";
    bool means = false;
    std::string sort_by;

    std::size_t min_count = 2;
    std::string vocab;

    bool log_x = false;

    // Not part of the provenance record: they do not change results.
    std::string out = ".";
    unsigned workers = 0;
};

// Sets one field from its textual form. Keys use snake_case field names.
// Throws InvalidArgument for unknown keys or unparsable values.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical key/value list of every provenance field, in a fixed order.
std::vector<std::pair<std::string, std::string>> serialize(const RunConfig& cfg);

// Appends serialize(cfg) as "config.<key>" metadata.
void embed(CsvArtifact& artifact, const RunConfig& cfg);

// Rebuilds a configuration from an artifact's "config.*" metadata.
RunConfig from_artifact_meta(const std::vector<std::pair<std::string, std::string>>& meta);

// Reads a TOML-style file: top-level `key = value` pairs apply to every
// command, `[command]` sections only to that command. Values may be
// quoted strings, numbers, booleans or [a, b, ...] arrays.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path, const std::string& command);

}  // namespace repralign::cli
