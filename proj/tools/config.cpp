#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace repralign::cli {
namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

Error bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    return Error(ErrorCode::InvalidArgument, "option " + key + ": '" + value + "' is not " + expected);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto t = trim(v);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw bad_value(key, v, "a non-negative integer");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto t = trim(v);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw bad_value(key, v, "a non-negative integer");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto t = trim(v);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw bad_value(key, v, "a number");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw bad_value(key, v, "a boolean");
}

std::vector<std::string> list_items(std::string v) {
    v = trim(v);
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "100,200" or "start:stop:step" (inclusive).
std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
    const auto t = trim(v);
    if (t.find(':') != std::string::npos) {
        std::stringstream ss(t);
        std::string a, b, c;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, c, ':');
        const std::size_t start = to_size(key, a), stop = to_size(key, b), step = to_size(key, c);
        if (step == 0 || start > stop) throw bad_value(key, v, "a valid start:stop:step range");
        std::vector<std::size_t> out;
        for (std::size_t x = start; x <= stop; x += step) out.push_back(x);
        return out;
    }
    std::vector<std::size_t> out;
    for (const auto& item : list_items(t)) out.push_back(to_size(key, item));
    if (out.empty()) throw bad_value(key, v, "a non-empty list");
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : list_items(v)) out.push_back(to_double(key, item));
    if (out.empty()) throw bad_value(key, v, "a non-empty list");
    return out;
}

std::string unquote(std::string v) {
    v = trim(v);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>) {
            out += format_double(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;  // null: not serialized
};

#define STRING_FIELD(name) \
    Field{#name, [](RunConfig& c, const std::string& v) { c.name = v; }, [](const RunConfig& c) { return c.name; }}
#define SIZE_FIELD(name)                                                                  \
    Field{#name, [](RunConfig& c, const std::string& v) { c.name = to_size(#name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.name); }}
#define BOOL_FIELD(name)                                                                  \
    Field{#name, [](RunConfig& c, const std::string& v) { c.name = to_bool(#name, v); }, \
          [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        STRING_FIELD(command),
        STRING_FIELD(matrix),
        STRING_FIELD(labels),
        STRING_FIELD(corpus),
        STRING_FIELD(text_field),
        STRING_FIELD(label_field),
        STRING_FIELD(positive),
        SIZE_FIELD(subsample),
        SIZE_FIELD(seeds),
        Field{"seed_base", [](RunConfig& c, const std::string& v) { c.seed_base = to_u64("seed_base", v); },
              [](const RunConfig& c) { return std::to_string(c.seed_base); }},
        BOOL_FIELD(low_memory),
        STRING_FIELD(dendrogram),
        BOOL_FIELD(all_labels),
        SIZE_FIELD(k_stride),
        Field{"sizes", [](RunConfig& c, const std::string& v) { c.sizes = to_sizes("sizes", v); },
              [](const RunConfig& c) { return join(c.sizes); }},
        Field{"lambdas", [](RunConfig& c, const std::string& v) { c.lambdas = to_doubles("lambdas", v); },
              [](const RunConfig& c) { return join(c.lambdas); }},
        SIZE_FIELD(folds),
        STRING_FIELD(metric),
        STRING_FIELD(test_matrix),
        STRING_FIELD(test_labels),
        Field{"test_fraction", [](RunConfig& c, const std::string& v) { c.test_fraction = to_double("test_fraction", v); },
              [](const RunConfig& c) { return format_double(c.test_fraction); }},
        STRING_FIELD(cells),
        STRING_FIELD(x_metric),
        STRING_FIELD(y_metric),
        BOOL_FIELD(means),
        STRING_FIELD(sort_by),
        SIZE_FIELD(min_count),
        STRING_FIELD(vocab),
        BOOL_FIELD(log_x),
        Field{"out", [](RunConfig& c, const std::string& v) { c.out = v; }, nullptr},
        Field{"workers",
              [](RunConfig& c, const std::string& v) { c.workers = static_cast<unsigned>(to_size("workers", v)); },
              nullptr},
    };
    return table;
}

#undef STRING_FIELD
#undef SIZE_FIELD
#undef BOOL_FIELD

}  // namespace

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown configuration key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> serialize(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) {
        if (f.get) out.emplace_back(f.key, f.get(cfg));
    }
    return out;
}

void embed(CsvArtifact& artifact, const RunConfig& cfg) {
    for (auto& [k, v] : serialize(cfg)) artifact.add_meta("config." + k, v);
}

RunConfig from_artifact_meta(const std::vector<std::pair<std::string, std::string>>& meta) {
    RunConfig cfg;
    bool found = false;
    for (const auto& [k, v] : meta) {
        if (k.rfind("config.", 0) == 0) {
            set_value(cfg, k.substr(7), v);
            found = true;
        }
    }
    if (!found) throw Error(ErrorCode::FormatError, "artifact carries no embedded configuration");
    return cfg;
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path, const std::string& command) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path.string());
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos && line.find('"') == std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        if (!section.empty() && section != command) continue;
        std::string key = trim(line.substr(0, eq));
        for (auto& ch : key) {
            if (ch == '-') ch = '_';
        }
        set_value(cfg, key, unquote(line.substr(eq + 1)));
    }
}

}  // namespace repralign::cli
