#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "repralign/alignment.hpp"
#include "repralign/artifact.hpp"
#include "repralign/fewshot.hpp"
#include "repralign/hierclust.hpp"
#include "repralign/ingest.hpp"
#include "repralign/quality.hpp"
#include "repralign/stats.hpp"
#include "svg.hpp"

namespace repralign::cli {
namespace fs = std::filesystem;

namespace {

// Stream tag for the seeded train/test split, kept apart from the
// per-seed streams 0..seeds-1.
constexpr std::uint64_t kSplitTag = 0x5e11u;

Seed run_seed(const RunConfig& cfg, std::size_t i) { return derive_seed(Seed{cfg.seed_base}, i); }

void validate(const RunConfig& cfg) {
    auto bad = [](const std::string& msg) { return Error(ErrorCode::InvalidArgument, msg); };
    static const std::vector<std::string> commands = {"cluster", "thas", "adbi", "alc", "correlate", "report",
                                                      "featurize"};
    if (std::find(commands.begin(), commands.end(), cfg.command) == commands.end()) {
        throw bad("unknown command '" + cfg.command + "'");
    }
    if (cfg.seeds == 0) throw bad("--seeds must be at least 1");
    if (cfg.subsample < 2) throw bad("--subsample must be at least 2");
    if (cfg.k_stride == 0) throw bad("--k-stride must be at least 1");
    if (cfg.folds < 2) throw bad("--folds must be at least 2");
    if (cfg.sizes.empty()) throw bad("--sizes must not be empty");
    if (cfg.lambdas.empty()) throw bad("--lambdas must not be empty");
    for (double l : cfg.lambdas) {
        if (!(l > 0) || !std::isfinite(l)) throw bad("--lambdas entries must be positive");
    }
    if (!(cfg.test_fraction > 0 && cfg.test_fraction < 1)) throw bad("--test-fraction must lie in (0, 1)");
    if (cfg.min_count == 0) throw bad("--min-count must be at least 1");
    parse_metric(cfg.metric);
    const bool needs_data = cfg.command != "correlate" && cfg.command != "report";
    if (cfg.command == "featurize" && cfg.corpus.empty()) throw bad("featurize needs --corpus");
    if (needs_data && cfg.corpus.empty() && (cfg.matrix.empty() || cfg.labels.empty())) {
        throw bad(cfg.command + " needs --matrix and --labels, or --corpus");
    }
    if (!needs_data && cfg.cells.empty()) throw bad(cfg.command + " needs --cells");
    if (!cfg.test_matrix.empty() != !cfg.test_labels.empty()) {
        throw bad("--test-matrix and --test-labels go together");
    }
}

std::optional<std::string> positive_name(const RunConfig& cfg) {
    if (cfg.positive.empty()) return std::nullopt;
    return cfg.positive;
}

TextCorpus load_corpus(const RunConfig& cfg) {
    return load_jsonl_corpus(cfg.corpus, cfg.text_field, cfg.label_field, positive_name(cfg));
}

EmbeddedDataset load_dataset(const RunConfig& cfg) {
    if (!cfg.corpus.empty()) {
        TextCorpus corpus = load_corpus(cfg);
        std::optional<BowVocabulary> vocab;
        if (!cfg.vocab.empty()) vocab = load_vocabulary(cfg.vocab);
        BowResult bow = bow_featurize(corpus, cfg.min_count, vocab ? &*vocab : nullptr, cfg.workers);
        std::vector<LabelId> labels;
        labels.reserve(corpus.documents.size());
        for (const auto& doc : corpus.documents) labels.push_back(doc.label);
        return validate_dataset(bow.matrix.to_dense(), std::move(labels), corpus.label_vocab, corpus.positive_class);
    }
    Matrix m = load_dense_matrix(cfg.matrix);
    LabelSet ls = load_labels(cfg.labels, m.rows());
    const LabelId positive = cfg.positive.empty() ? 0 : ls.id_of(cfg.positive);
    return validate_dataset(std::move(m), std::move(ls.labels), std::move(ls.vocab), positive);
}

// Test labels are mapped onto the training vocabulary by name.
EmbeddedDataset load_test_set(const RunConfig& cfg, const EmbeddedDataset& pool) {
    Matrix m = load_dense_matrix(cfg.test_matrix);
    LabelSet ls = load_labels(cfg.test_labels, m.rows());
    std::vector<LabelId> mapped(ls.labels.size());
    for (std::size_t i = 0; i < ls.labels.size(); ++i) {
        const std::string& name = ls.vocab[ls.labels[i]];
        const auto& v = pool.label_vocab();
        const auto it = std::find(v.begin(), v.end(), name);
        if (it == v.end()) {
            throw Error(ErrorCode::LabelOutOfRange, "test label '" + name + "' does not occur in the training labels")
                .at_row(i);
        }
        mapped[i] = static_cast<LabelId>(it - v.begin());
    }
    return validate_dataset(std::move(m), std::move(mapped), pool.label_vocab(), pool.positive_class());
}

// Per-label stratified split; every label keeps at least one point on
// each side when it has two or more.
std::pair<EmbeddedDataset, EmbeddedDataset> split_dataset(const RunConfig& cfg, const EmbeddedDataset& ds) {
    Rng rng(derive_seed(Seed{cfg.seed_base}, kSplitTag));
    std::vector<std::vector<std::size_t>> by_label(ds.num_labels());
    for (std::size_t i = 0; i < ds.size(); ++i) by_label[ds.label(i)].push_back(i);
    std::vector<std::size_t> pool, test;
    for (auto& members : by_label) {
        rng.shuffle(members);
        auto take = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(members.size())));
        if (members.size() >= 2) take = std::clamp<std::size_t>(take, 1, members.size() - 1);
        test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        pool.insert(pool.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(pool.begin(), pool.end());
    std::sort(test.begin(), test.end());
    return {select(ds, pool), select(ds, test)};
}

EmbeddedDataset draw_sample(const RunConfig& cfg, const EmbeddedDataset& ds, std::size_t i) {
    // Subsample sizes above n fall back to the full dataset.
    if (cfg.subsample >= ds.size()) return ds;
    return subsample(ds, cfg.subsample, run_seed(cfg, i));
}

fs::path seed_file(const RunConfig& cfg, const std::string& stem, std::size_t i, const std::string& suffix = "") {
    return fs::path(cfg.out) / (stem + "_seed" + std::to_string(i) + suffix + ".csv");
}

std::vector<std::pair<std::string, std::string>> sample_meta(const RunConfig& cfg, const EmbeddedDataset& sample,
                                                             std::size_t i) {
    return {{"seed", std::to_string(run_seed(cfg, i).value)}, {"subsample_size", std::to_string(sample.size())}};
}

Dendrogram cluster_sample(const RunConfig& cfg, const EmbeddedDataset& sample) {
    return ward_cluster(sample, WardOptions{cfg.low_memory, cfg.workers});
}

CsvArtifact dendrogram_record(const RunConfig& cfg, const Dendrogram& dn, const EmbeddedDataset& sample,
                              std::size_t i) {
    CsvArtifact a = dendrogram_artifact(dn);
    for (auto& [k, v] : sample_meta(cfg, sample, i)) a.add_meta(k, v);
    RunConfig c = cfg;
    c.command = "cluster";
    embed(a, c);
    return a;
}

// Reuses dendrogram_seed<i>.csv from --dendrogram when present (it must
// describe the same draw), otherwise clusters and fills the cache.
Dendrogram obtain_dendrogram(const RunConfig& cfg, const EmbeddedDataset& sample, std::size_t i) {
    if (cfg.dendrogram.empty()) return cluster_sample(cfg, sample);
    const fs::path path = fs::path(cfg.dendrogram) / ("dendrogram_seed" + std::to_string(i) + ".csv");
    if (fs::exists(path)) {
        const CsvArtifact a = read_artifact(path, kDendrogramFormat);
        for (const auto& [k, v] : sample_meta(cfg, sample, i)) {
            const std::string* got = a.find_meta(k);
            if (got && *got != v) {
                throw Error(ErrorCode::MismatchedDendrogram,
                            path.string() + " was built for " + k + "=" + *got + ", this run needs " + v);
            }
        }
        Dendrogram dn = dendrogram_from_artifact(a);
        if (dn.leaves != sample.size()) {
            throw Error(ErrorCode::MismatchedDendrogram, path.string() + " has " + std::to_string(dn.leaves) +
                                                             " leaves, the sample has " +
                                                             std::to_string(sample.size()) + " points");
        }
        return dn;
    }
    Dendrogram dn = cluster_sample(cfg, sample);
    fs::create_directories(cfg.dendrogram);
    write_artifact(path, dendrogram_record(cfg, dn, sample, i));
    return dn;
}

std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

void print_score(std::ostream& out, const std::string& name, const AveragedScore& s) {
    out << name << " = " << format_double(s.mean);
    if (s.spread_defined) out << " +- " << format_double(s.stddev);
    out << " (" << s.runs << (s.runs == 1 ? " seed)" : " seeds)") << "\n";
}

// Summary table: one row per label, std column only with several runs.
CsvArtifact summary_artifact(const std::string& format, const std::string& value, bool with_std) {
    CsvArtifact a;
    a.format = format;
    a.header = {"label", value + "_mean"};
    if (with_std) a.header.push_back(value + "_std");
    a.header.push_back("runs");
    return a;
}

void add_summary_row(CsvArtifact& a, const std::string& label, const AveragedScore& s) {
    std::vector<std::string> row = {label, format_double(s.mean)};
    if (s.spread_defined) row.push_back(format_double(s.stddev));
    row.push_back(std::to_string(s.runs));
    a.rows.push_back(std::move(row));
}

void cmd_cluster(const RunConfig& cfg, std::ostream& out) {
    const EmbeddedDataset ds = load_dataset(cfg);
    for (std::size_t i = 0; i < cfg.seeds; ++i) {
        const EmbeddedDataset sample = draw_sample(cfg, ds, i);
        const Dendrogram dn = cluster_sample(cfg, sample);
        write_artifact(seed_file(cfg, "dendrogram", i), dendrogram_record(cfg, dn, sample, i));
    }
    out << "wrote " << cfg.seeds << " dendrogram(s) to " << cfg.out << "\n";
}

void cmd_thas(const RunConfig& cfg, std::ostream& out) {
    const EmbeddedDataset ds = load_dataset(cfg);
    const auto& vocab = ds.label_vocab();
    const std::size_t labels = cfg.all_labels ? vocab.size() : 1;
    // runs[label][seed]; label 0 is the positive class unless all_labels.
    std::vector<std::vector<AlignmentResult>> runs(labels);
    std::vector<double> mean_thas_runs;
    for (std::size_t i = 0; i < cfg.seeds; ++i) {
        const EmbeddedDataset sample = draw_sample(cfg, ds, i);
        const Dendrogram dn = obtain_dendrogram(cfg, sample, i);
        std::vector<AlignmentResult> results;
        if (cfg.all_labels) {
            MultiLabelAlignment all = thas_all_labels(sample, dn);
            mean_thas_runs.push_back(all.mean_thas);
            results = std::move(all.per_label);
        } else {
            results.push_back(thas(sample, dn));
        }
        for (std::size_t l = 0; l < results.size(); ++l) {
            const AlignmentResult& r = results[l];
            CsvArtifact a = curve_artifact("alignment-curve", "k", "alignment", r.curve);
            for (auto& [k, v] : sample_meta(cfg, sample, i)) a.add_meta(k, v);
            a.add_meta("positive", vocab[r.label]);
            a.add_meta("tau", format_double(r.thas));
            embed(a, cfg);
            const std::string suffix = cfg.all_labels ? "_label" + std::to_string(r.label) : "";
            write_artifact(seed_file(cfg, "thas_curve", i, suffix), a);
            runs[l].push_back(r);
        }
    }

    const std::vector<AlignmentResult>& main_runs = runs[cfg.all_labels ? ds.positive_class() : 0];
    CurveSeries mean_curve;
    mean_curve.index = main_runs.front().curve.index;
    mean_curve.values.assign(mean_curve.index.size(), 0.0);
    for (const auto& r : main_runs) {
        for (std::size_t j = 0; j < mean_curve.values.size(); ++j) mean_curve.values[j] += r.curve.values[j];
    }
    for (double& v : mean_curve.values) v /= static_cast<double>(main_runs.size());
    mean_curve.area = mean_area(mean_curve.values);
    CsvArtifact mean_art = curve_artifact("alignment-curve", "k", "alignment", mean_curve);
    mean_art.add_meta("positive", vocab[ds.positive_class()]);
    mean_art.add_meta("seeds", std::to_string(cfg.seeds));
    embed(mean_art, cfg);
    write_artifact(fs::path(cfg.out) / "thas_curve_mean.csv", mean_art);

    CsvArtifact summary = summary_artifact("thas-summary", "tau", cfg.seeds > 1);
    for (const auto& label_runs : runs) {
        const AveragedScore s = thas_averaged(label_runs);
        add_summary_row(summary, vocab[label_runs.front().label], s);
        print_score(out, "THAS[" + vocab[label_runs.front().label] + "]", s);
    }
    if (cfg.all_labels) {
        const AveragedScore s = average_scores(mean_thas_runs);
        add_summary_row(summary, "(mean)", s);
        print_score(out, "THAS[mean over labels]", s);
    }
    embed(summary, cfg);
    write_artifact(fs::path(cfg.out) / "thas_summary.csv", summary);

    std::vector<SvgSeries> series;
    for (std::size_t i = 0; i < main_runs.size(); ++i) {
        series.push_back({"seed " + std::to_string(i), as_doubles(main_runs[i].curve.index), main_runs[i].curve.values});
    }
    series.push_back({"mean", as_doubles(mean_curve.index), mean_curve.values});
    write_text_file(fs::path(cfg.out) / "thas_curve.svg",
                    line_chart("Alignment curve (" + vocab[ds.positive_class()] + ")", "k", "alignment", series,
                               cfg.log_x));
}

void cmd_adbi(const RunConfig& cfg, std::ostream& out) {
    const EmbeddedDataset ds = load_dataset(cfg);
    std::vector<double> scores;
    std::vector<SvgSeries> series;
    for (std::size_t i = 0; i < cfg.seeds; ++i) {
        const EmbeddedDataset sample = draw_sample(cfg, ds, i);
        const Dendrogram dn = obtain_dendrogram(cfg, sample, i);
        const QualityResult q = dbi_curve(sample, dn, DbiCurveOptions{cfg.k_stride, cfg.workers});
        CsvArtifact a = curve_artifact("dbi-curve", "k", "dbi", q.curve);
        for (auto& [k, v] : sample_meta(cfg, sample, i)) a.add_meta(k, v);
        a.add_meta("stride", std::to_string(q.stride));
        a.add_meta("excluded_levels", std::to_string(q.excluded_levels));
        a.add_meta("adbi", format_double(q.adbi));
        embed(a, cfg);
        write_artifact(seed_file(cfg, "dbi_curve", i), a);
        scores.push_back(q.adbi);
        series.push_back({"seed " + std::to_string(i), as_doubles(q.curve.index), q.curve.values});
    }
    const AveragedScore s = average_scores(scores);
    CsvArtifact summary = summary_artifact("adbi-summary", "adbi", cfg.seeds > 1);
    add_summary_row(summary, ds.label_vocab()[ds.positive_class()], s);
    embed(summary, cfg);
    write_artifact(fs::path(cfg.out) / "adbi_summary.csv", summary);
    print_score(out, "ADBI", s);
    write_text_file(fs::path(cfg.out) / "dbi_curve.svg", line_chart("Davies-Bouldin curve", "k", "DBI", series, cfg.log_x));
}

void cmd_alc(const RunConfig& cfg, std::ostream& out) {
    const EmbeddedDataset ds = load_dataset(cfg);
    std::optional<EmbeddedDataset> pool, test;
    if (!cfg.test_matrix.empty()) {
        pool = ds;
        test = load_test_set(cfg, ds);
    } else {
        auto [p, t] = split_dataset(cfg, ds);
        pool = std::move(p);
        test = std::move(t);
    }
    LearningCurveOptions opts;
    opts.sizes = cfg.sizes;
    for (std::size_t i = 0; i < cfg.seeds; ++i) opts.seeds.push_back(run_seed(cfg, i));
    opts.lambda_grid = cfg.lambdas;
    opts.selection.folds = cfg.folds;
    opts.selection.metric_kind = parse_metric(cfg.metric);
    opts.workers = cfg.workers;
    const LearningCurveResult r = learning_curve(*pool, *test, opts);

    CsvArtifact a;
    a.format = "learning-curve";
    a.header = {"N", "mean_metric", "std_metric"};
    for (std::size_t j = 0; j < r.curve.index.size(); ++j) {
        a.rows.push_back({std::to_string(r.curve.index[j]), format_double(r.curve.values[j]),
                          cfg.seeds > 1 ? format_double(r.stddev[j]) : "nan"});
    }
    a.add_meta("metric_kind", std::string(metric_name(r.metric_kind)));
    a.add_meta("seeds", std::to_string(cfg.seeds));
    a.add_meta("pool_size", std::to_string(pool->size()));
    a.add_meta("test_size", std::to_string(test->size()));
    a.add_meta("flagged_cells", std::to_string(r.flagged_cells));
    a.add_meta("alc", format_double(r.alc));
    embed(a, cfg);
    write_artifact(fs::path(cfg.out) / "learning_curve.csv", a);
    out << "ALC(" << metric_name(r.metric_kind) << ") = " << format_double(r.alc);
    if (r.flagged_cells) out << " [" << r.flagged_cells << " flagged draw(s) excluded]";
    out << "\n";
    write_text_file(fs::path(cfg.out) / "learning_curve.svg",
                    line_chart("Learning curve", "N", std::string(metric_name(r.metric_kind)),
                               {{"mean", as_doubles(r.curve.index), r.curve.values}}, cfg.log_x));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
        if (!f.empty() && f.back() == '\r') f.pop_back();
        out.push_back(f);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Long-format cells: representation,dataset,metric,value (any column
// order). Empty, "NA" or "nan" values mark a missing cell.
std::vector<ReportCell> load_cells(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    std::vector<ReportCell> cells;
    std::size_t ci[4] = {};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv(line);
        if (header.empty()) {
            header = fields;
            const char* names[4] = {"representation", "dataset", "metric", "value"};
            for (int c = 0; c < 4; ++c) {
                const auto it = std::find(header.begin(), header.end(), names[c]);
                if (it == header.end()) {
                    throw Error(ErrorCode::MissingField, path + ": header lacks column '" + names[c] + "'");
                }
                ci[c] = static_cast<std::size_t>(it - header.begin());
            }
            continue;
        }
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": expected " +
                                                    std::to_string(header.size()) + " fields")
                .at_row(line_no);
        }
        ReportCell cell{fields[ci[0]], fields[ci[1]], fields[ci[2]], 0.0};
        const std::string& v = fields[ci[3]];
        try {
            cell.value = v.empty() ? std::nan("") : parse_double(v);
        } catch (const Error& e) {
            throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": " + e.message()).at_row(line_no);
        }
        cells.push_back(std::move(cell));
    }
    if (cells.empty()) throw Error(ErrorCode::EmptyFile, path + " holds no cells");
    return cells;
}

const ReportMatrix& find_metric(const std::map<std::string, ReportMatrix>& report, const std::string& metric) {
    const auto it = report.find(metric);
    if (it == report.end()) throw Error(ErrorCode::InvalidArgument, "no cells for metric '" + metric + "'");
    return it->second;
}

std::ptrdiff_t index_of(const std::vector<std::string>& v, const std::string& s) {
    const auto it = std::find(v.begin(), v.end(), s);
    return it == v.end() ? -1 : it - v.begin();
}

void cmd_correlate(const RunConfig& cfg, std::ostream& out) {
    const auto cells = load_cells(cfg.cells);
    const auto report = build_report(cells);
    const ReportMatrix& xm = find_metric(report, cfg.x_metric);
    const ReportMatrix& ym = find_metric(report, cfg.y_metric);

    std::vector<double> xs, ys;
    std::vector<std::string> tags;
    for (std::size_t r = 0; r < xm.rows.size(); ++r) {
        const auto yr = index_of(ym.rows, xm.rows[r]);
        if (yr < 0) continue;
        if (cfg.means) {
            const double x = xm.row_means[r], y = ym.row_means[static_cast<std::size_t>(yr)];
            if (std::isnan(x) || std::isnan(y)) continue;
            xs.push_back(x);
            ys.push_back(y);
            tags.push_back(xm.rows[r]);
            continue;
        }
        for (std::size_t c = 0; c < xm.cols.size(); ++c) {
            const auto yc = index_of(ym.cols, xm.cols[c]);
            if (yc < 0) continue;
            const double x = xm.at(r, c), y = ym.at(static_cast<std::size_t>(yr), static_cast<std::size_t>(yc));
            if (std::isnan(x) || std::isnan(y)) continue;
            xs.push_back(x);
            ys.push_back(y);
            tags.push_back(xm.rows[r] + "/" + xm.cols[c]);
        }
    }
    const Correlation p = pearson(xs, ys);
    const Correlation s = spearman(xs, ys);

    CsvArtifact a;
    a.format = "correlation";
    a.header = {"method", "r", "p", "n", "exact_p"};
    a.rows.push_back({"pearson", format_double(p.r), format_double(p.p), std::to_string(xs.size()),
                      p.exact_p ? "true" : "false"});
    a.rows.push_back({"spearman", format_double(s.r), format_double(s.p), std::to_string(xs.size()),
                      s.exact_p ? "true" : "false"});
    a.add_meta("x", cfg.x_metric);
    a.add_meta("y", cfg.y_metric);
    embed(a, cfg);
    write_artifact(fs::path(cfg.out) / "correlation.csv", a);

    CsvArtifact sc;
    sc.format = "scatter";
    sc.header = {"x", "y", "tag"};
    for (std::size_t i = 0; i < xs.size(); ++i) sc.rows.push_back({format_double(xs[i]), format_double(ys[i]), tags[i]});
    embed(sc, cfg);
    write_artifact(fs::path(cfg.out) / "scatter.csv", sc);
    write_text_file(fs::path(cfg.out) / "scatter.svg",
                    scatter_chart(cfg.y_metric + " vs " + cfg.x_metric, cfg.x_metric, cfg.y_metric, xs, ys, tags));

    out << cfg.x_metric << " vs " << cfg.y_metric << " over " << xs.size() << " pairs\n";
    out << "  pearson  r = " << format_double(p.r) << "  p = " << format_double(p.p) << "\n";
    out << "  spearman r = " << format_double(s.r) << "  p = " << format_double(s.p) << (s.exact_p ? " (exact)" : "")
        << "\n";
}

std::string fixed3(double v) {
    if (std::isnan(v)) return "-";
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(3);
    ss << v;
    return ss.str();
}

void print_matrix(std::ostream& out, const ReportMatrix& m) {
    std::size_t w0 = m.metric.size();
    for (const auto& r : m.rows) w0 = std::max(w0, r.size());
    std::vector<std::size_t> w;
    for (const auto& c : m.cols) w.push_back(std::max<std::size_t>(c.size(), 6));
    auto pad = [](const std::string& s, std::size_t width) { return std::string(width - std::min(width, s.size()), ' ') + s; };
    out << m.metric << std::string(w0 - m.metric.size(), ' ');
    for (std::size_t c = 0; c < m.cols.size(); ++c) out << "  " << pad(m.cols[c], w[c]);
    out << "  " << pad("mean", 6) << "\n";
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        out << m.rows[r] << std::string(w0 - m.rows[r].size(), ' ');
        for (std::size_t c = 0; c < m.cols.size(); ++c) out << "  " << pad(fixed3(m.at(r, c)), w[c]);
        out << "  " << pad(fixed3(m.row_means[r]), 6) << "\n";
    }
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
    auto report = build_report(load_cells(cfg.cells));
    std::vector<std::string> order;
    if (!cfg.sort_by.empty() && cfg.sort_by != "mean") {
        ReportMatrix key = find_metric(report, cfg.sort_by);
        key.sort_by_mean_desc();
        order = key.rows;
    }
    bool first = true;
    for (auto& [metric, m] : report) {
        if (cfg.sort_by == "mean") {
            m.sort_by_mean_desc();
        } else if (!order.empty()) {
            m.reorder(order);
        }
        CsvArtifact a;
        a.format = "report";
        a.header = {"representation"};
        a.header.insert(a.header.end(), m.cols.begin(), m.cols.end());
        a.header.push_back("mean");
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            std::vector<std::string> row = {m.rows[r]};
            for (std::size_t c = 0; c < m.cols.size(); ++c) row.push_back(format_double(m.at(r, c)));
            row.push_back(format_double(m.row_means[r]));
            a.rows.push_back(std::move(row));
        }
        a.add_meta("metric", metric);
        embed(a, cfg);
        write_artifact(fs::path(cfg.out) / ("report_" + metric + ".csv"), a);
        if (!first) out << "\n";
        first = false;
        print_matrix(out, m);
    }
}

void cmd_featurize(const RunConfig& cfg, std::ostream& out) {
    const TextCorpus corpus = load_corpus(cfg);
    std::optional<BowVocabulary> vocab;
    if (!cfg.vocab.empty()) vocab = load_vocabulary(cfg.vocab);
    const BowResult bow = bow_featurize(corpus, cfg.min_count, vocab ? &*vocab : nullptr, cfg.workers);
    const fs::path dir(cfg.out);
    save_npy(dir / "features.npy", bow.matrix.to_dense());
    LabelSet ls;
    ls.vocab = corpus.label_vocab;
    for (const auto& d : corpus.documents) ls.labels.push_back(d.label);
    save_labels(dir / "labels.txt", ls);
    save_vocabulary(dir / "vocabulary.csv", bow.vocabulary);

    CsvArtifact m;
    m.format = "featurize-manifest";
    m.header = {"key", "value"};
    m.rows = {{"documents", std::to_string(corpus.documents.size())},
              {"vocabulary_size", std::to_string(bow.vocabulary.size())},
              {"nonzeros", std::to_string(bow.matrix.values.size())},
              {"fingerprint", corpus_fingerprint(corpus)},
              {"positive", corpus.label_vocab[corpus.positive_class]},
              {"features", "features.npy"},
              {"labels", "labels.txt"},
              {"vocabulary", "vocabulary.csv"}};
    embed(m, cfg);
    write_artifact(dir / "manifest.csv", m);
    out << "featurized " << corpus.documents.size() << " documents over " << bow.vocabulary.size() << " terms\n";
}

// Reads any artifact, taking format and version from its own tag.
CsvArtifact read_tagged(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string first;
    std::getline(in, first);
    const std::string prefix = "#repralign-format: ";
    if (!first.starts_with(prefix)) {
        throw Error(ErrorCode::FormatError, path.string() + " is not a tagged artifact").at_offset(0);
    }
    const std::string tag = first.substr(prefix.size());
    const auto slash = tag.rfind('/');
    if (slash == std::string::npos) throw Error(ErrorCode::FormatError, "malformed format tag '" + tag + "'");
    return read_artifact(path, tag.substr(0, slash), static_cast<int>(parse_size(tag.substr(slash + 1))));
}

unsigned env_workers() {
    const char* v = std::getenv("REPRALIGN_WORKERS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const unsigned long n = std::strtoul(v, &end, 10);
    if (*end != '\0') throw Error(ErrorCode::InvalidArgument, "REPRALIGN_WORKERS must be a non-negative integer");
    return static_cast<unsigned>(n);
}

struct OptionSpec {
    const char* flag;
    const char* key;
    bool is_flag;
    const char* help;
    std::vector<std::string> commands;
};

const std::vector<OptionSpec>& option_specs() {
    static const std::vector<std::string> data = {"cluster", "thas", "adbi", "alc"};
    static const std::vector<std::string> sampled = {"cluster", "thas", "adbi"};
    static const std::vector<std::string> clustered = {"thas", "adbi"};
    static const std::vector<std::string> tables = {"correlate", "report"};
    static const std::vector<std::string> corpus = {"cluster", "thas", "adbi", "alc", "featurize"};
    static const std::vector<OptionSpec> specs = {
        {"--matrix", "matrix", false, "dense vectors (.npy or .csv)", data},
        {"--labels", "labels", false, "label file, one per row or id,label", data},
        {"--corpus", "corpus", false, "JSON Lines corpus, featurized as bag of words", corpus},
        {"--text-field", "text_field", false, "corpus text field", corpus},
        {"--label-field", "label_field", false, "corpus label field", corpus},
        {"--positive", "positive", false, "positive class name (default: first label)", corpus},
        {"--min-count", "min_count", false, "minimum total term count for the vocabulary", corpus},
        {"--vocab", "vocab", false, "reuse a saved vocabulary", corpus},
        {"--subsample", "subsample", false, "points per seed (capped at n)", sampled},
        {"--seeds", "seeds", false, "number of seeds", data},
        {"--seed-base", "seed_base", false, "root seed", data},
        {"--low-memory", "low_memory", true, "cluster without the pairwise cost matrix", sampled},
        {"--dendrogram", "dendrogram", false, "directory of cached dendrogram_seed<i>.csv", clustered},
        {"--all-labels", "all_labels", true, "score every label and their mean", {"thas"}},
        {"--k-stride", "k_stride", false, "evaluate every s-th level", {"adbi"}},
        {"--sizes", "sizes", false, "training sizes: a,b,c or start:stop:step", {"alc"}},
        {"--lambdas", "lambdas", false, "L2 strengths to select from", {"alc"}},
        {"--folds", "folds", false, "cross-validation folds", {"alc"}},
        {"--metric", "metric", false, "accuracy or f1", {"alc"}},
        {"--test-matrix", "test_matrix", false, "held-out vectors", {"alc"}},
        {"--test-labels", "test_labels", false, "held-out labels", {"alc"}},
        {"--test-fraction", "test_fraction", false, "seeded stratified test share without a test set", {"alc"}},
        {"--cells", "cells", false, "long CSV: representation,dataset,metric,value", tables},
        {"--x", "x_metric", false, "metric on the x axis", {"correlate"}},
        {"--y", "y_metric", false, "metric on the y axis", {"correlate"}},
        {"--means", "means", true, "correlate per-representation means", {"correlate"}},
        {"--sort-by", "sort_by", false, "'mean' or a metric whose means order all tables", {"report"}},
        {"--log-x", "log_x", true, "logarithmic x axis in figures", {"thas", "adbi", "alc"}},
    };
    return specs;
}

}  // namespace

void execute(const RunConfig& cfg, std::ostream& out) {
    validate(cfg);
    fs::create_directories(cfg.out);
    if (cfg.command == "cluster") {
        cmd_cluster(cfg, out);
    } else if (cfg.command == "thas") {
        cmd_thas(cfg, out);
    } else if (cfg.command == "adbi") {
        cmd_adbi(cfg, out);
    } else if (cfg.command == "alc") {
        cmd_alc(cfg, out);
    } else if (cfg.command == "correlate") {
        cmd_correlate(cfg, out);
    } else if (cfg.command == "report") {
        cmd_report(cfg, out);
    } else {
        cmd_featurize(cfg, out);
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Representation/task alignment measurements", "repralign"};
    app.require_subcommand(1);

    struct Bound {
        const OptionSpec* spec;
        CLI::Option* option;
        std::string text;
        bool flag = false;
    };
    std::map<std::string, std::vector<std::unique_ptr<Bound>>> bound;
    std::map<std::string, std::string> config_path;
    std::map<std::string, std::string> out_dir;
    std::map<std::string, unsigned> workers;
    std::map<std::string, CLI::Option*> workers_opt;

    static const std::vector<std::pair<std::string, std::string>> commands = {
        {"cluster", "Ward dendrograms per seed"},
        {"thas", "alignment curves and THAS"},
        {"adbi", "Davies-Bouldin curves and ADBI"},
        {"alc", "few-shot learning curve and its area"},
        {"correlate", "Pearson and Spearman correlation between two metrics"},
        {"report", "representation x dataset tables"},
        {"featurize", "bag-of-words features from a text corpus"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto& list = bound[name];
        for (const auto& spec : option_specs()) {
            if (std::find(spec.commands.begin(), spec.commands.end(), name) == spec.commands.end()) continue;
            auto b = std::make_unique<Bound>();
            b->spec = &spec;
            b->option = spec.is_flag ? sub->add_flag(spec.flag, b->flag, spec.help)
                                     : sub->add_option(spec.flag, b->text, spec.help);
            list.push_back(std::move(b));
        }
        sub->add_option("--config", config_path[name], "TOML-style config file; flags override it");
        sub->add_option("--out", out_dir[name], "output directory")->default_str(".");
        workers_opt[name] = sub->add_option("--workers", workers[name], "worker threads (0 = all cores)");
    }
    std::string rerun_artifact, rerun_out;
    unsigned rerun_workers = 0;
    CLI::App* rerun = app.add_subcommand("rerun", "repeat the run recorded in an artifact");
    rerun->add_option("artifact", rerun_artifact, "any CSV artifact written by repralign")->required();
    rerun->add_option("--out", rerun_out, "output directory")->default_str(".");
    CLI::Option* rerun_workers_opt = rerun->add_option("--workers", rerun_workers, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (rerun->parsed()) {
            cfg = from_artifact_meta(read_tagged(rerun_artifact).meta);
            cfg.out = rerun_out.empty() ? "." : rerun_out;
            cfg.workers = rerun_workers_opt->count() ? rerun_workers : env_workers();
        } else {
            std::string name;
            for (const auto& [n, h] : commands) {
                if (app.got_subcommand(n)) name = n;
            }
            cfg.command = name;
            if (!config_path[name].empty()) apply_config_file(cfg, config_path[name], name);
            cfg.command = name;
            for (const auto& b : bound[name]) {
                if (b->option->count() == 0) continue;
                set_value(cfg, b->spec->key, b->spec->is_flag ? (b->flag ? "true" : "false") : b->text);
            }
            if (!out_dir[name].empty()) cfg.out = out_dir[name];
            if (workers_opt[name]->count()) {
                cfg.workers = workers[name];
            } else if (cfg.workers == 0) {
                cfg.workers = env_workers();
            }
        }
        execute(cfg, out);
        return 0;
    } catch (const Error& e) {
        err << "error[" << error_code_name(e.code()) << "]: " << e.message() << "\n";
        return is_validation_error(e.code()) ? 2 : 3;
    } catch (const std::exception& e) {
        err << "error[Runtime]: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace repralign::cli
