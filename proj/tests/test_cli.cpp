#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "commands.hpp"
#include "oracles.hpp"
#include "repralign/artifact.hpp"
#include "repralign/ingest.hpp"

using namespace repralign;
namespace fs = std::filesystem;

namespace {

struct Workspace {
    fs::path dir;
    std::string out, err;

    Workspace() {
        static int counter = 0;
        dir = fs::temp_directory_path() / ("repralign_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string at(const std::string& name) const { return (dir / name).string(); }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "repralign");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream o, e;
        const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
        out = o.str();
        err = e.str();
        return code;
    }

    // Two separated blobs saved as NPY plus a label file.
    void blobs(std::size_t n, double gap, std::uint64_t seed = 71) {
        Rng rng(Seed{seed});
        const auto ds = oracle::blobs(rng, n, 3, gap);
        save_npy(dir / "x.npy", ds.vectors());
        LabelSet ls{{ds.labels().begin(), ds.labels().end()}, ds.label_vocab()};
        save_labels(dir / "y.txt", ls);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("thas on separated blobs reports a near-perfect score") {
    Workspace w;
    w.blobs(300, 30);
    REQUIRE(w.run({"thas", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--positive", "pos", "--subsample",
                   "200", "--seeds", "3", "--out", w.at("o")}) == 0);
    const CsvArtifact s = read_artifact(w.at("o/thas_summary.csv"), "thas-summary");
    CHECK(s.header == std::vector<std::string>{"label", "tau_mean", "tau_std", "runs"});
    CHECK(parse_double(s.rows[0][1]) >= 0.99);
    for (int i = 0; i < 3; ++i) CHECK(fs::exists(w.at("o/thas_curve_seed" + std::to_string(i) + ".csv")));
    CHECK(fs::exists(w.at("o/thas_curve_mean.csv")));
    CHECK(slurp(w.at("o/thas_curve.svg")).rfind("<svg", 0) == 0);
    const CsvArtifact c = read_artifact(w.at("o/thas_curve_seed0.csv"), "alignment-curve");
    CHECK(c.rows.size() == 200);
    CHECK(c.meta_value("positive") == "pos");
    CHECK(c.meta_value("config.subsample") == "200");
}

TEST_CASE("a single seed reports no spread") {
    Workspace w;
    w.blobs(100, 5);
    REQUIRE(w.run({"thas", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--seeds", "1", "--out", w.at("o")}) == 0);
    const CsvArtifact s = read_artifact(w.at("o/thas_summary.csv"), "thas-summary");
    CHECK(s.header == std::vector<std::string>{"label", "tau_mean", "runs"});
    CHECK(w.out.find("+-") == std::string::npos);
}

TEST_CASE("exit codes") {
    Workspace w;
    w.blobs(60, 5);
    CHECK(w.run({"thas", "--matrix", w.at("nope.npy"), "--labels", w.at("y.txt")}) == 2);
    CHECK(w.err.rfind("error[IoError]: ", 0) == 0);
    CHECK(w.run({"thas", "--bogus"}) == 2);
    CHECK(w.run({}) == 2);
    CHECK(w.run({"thas", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--seeds", "0"}) == 2);
    CHECK(w.run({"thas", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--positive", "zzz"}) == 2);
    CHECK(w.run({"--help"}) == 0);
    // Too few positives per fold is a runtime failure, not bad input.
    CHECK(w.run({"alc", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--sizes", "8", "--seeds", "2",
                 "--folds", "5", "--out", w.at("o")}) == 3);
    CHECK(w.err.find("error[DegenerateDraw]") == 0);
}

TEST_CASE("rerunning from an artifact reproduces every output byte for byte") {
    Workspace w;
    w.blobs(160, 3);
    const std::vector<std::string> data = {"--matrix", w.at("x.npy"), "--labels", w.at("y.txt")};
    auto with = [&](std::vector<std::string> a) {
        a.insert(a.begin() + 1, data.begin(), data.end());
        return a;
    };
    REQUIRE(w.run(with({"thas", "--subsample", "120", "--seeds", "2", "--all-labels", "--out", w.at("a")})) == 0);
    REQUIRE(w.run(with({"adbi", "--subsample", "120", "--seeds", "2", "--k-stride", "3", "--out", w.at("a")})) == 0);
    REQUIRE(w.run(with({"alc", "--sizes", "40:120:40", "--seeds", "2", "--lambdas", "0.01,1", "--out", w.at("a")})) == 0);
    REQUIRE(w.run(with({"cluster", "--subsample", "120", "--seeds", "1", "--out", w.at("a")})) == 0);

    for (const char* f : {"thas_summary.csv", "dbi_curve_seed1.csv", "learning_curve.csv", "dendrogram_seed0.csv"}) {
        REQUIRE(w.run({"rerun", w.at(std::string("a/") + f), "--out", w.at("b"), "--workers", "3"}) == 0);
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(w.at("b"))) {
        const auto name = entry.path().filename().string();
        CHECK_MESSAGE(slurp(entry.path()) == slurp(w.dir / "a" / name), name);
        ++compared;
    }
    CHECK(compared >= 10);
}

TEST_CASE("cached dendrograms are reused and checked") {
    Workspace w;
    w.blobs(120, 4);
    const std::vector<std::string> base = {"--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--subsample", "80",
                                           "--seeds", "2", "--dendrogram", w.at("cache")};
    auto cmd = [&](const std::string& name, const std::string& out) {
        std::vector<std::string> a = {name};
        a.insert(a.end(), base.begin(), base.end());
        a.insert(a.end(), {"--out", w.at(out)});
        return a;
    };
    REQUIRE(w.run(cmd("thas", "one")) == 0);
    CHECK(fs::exists(w.at("cache/dendrogram_seed1.csv")));
    REQUIRE(w.run(cmd("adbi", "one")) == 0);
    REQUIRE(w.run({"thas", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--subsample", "80", "--seeds", "2",
                   "--out", w.at("two")}) == 0);
    CHECK(slurp(w.at("one/thas_curve_seed1.csv")).find("alignment") != std::string::npos);
    const auto a = read_artifact(w.at("one/thas_curve_seed1.csv"), "alignment-curve");
    const auto b = read_artifact(w.at("two/thas_curve_seed1.csv"), "alignment-curve");
    CHECK(a.rows == b.rows);
    // A cache from another draw is refused.
    CHECK(w.run({"thas", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--subsample", "80", "--seeds", "2",
                 "--seed-base", "9", "--dendrogram", w.at("cache"), "--out", w.at("three")}) == 2);
    CHECK(w.err.find("MismatchedDendrogram") != std::string::npos);
}

TEST_CASE("config files apply per command and flags win") {
    Workspace w;
    w.blobs(100, 4);
    std::ofstream(w.dir / "run.toml") << "# sweep\nmatrix = \"" << w.at("x.npy") << "\"\nlabels = '" << w.at("y.txt")
                                      << "'\nseeds = 4\n\n[thas]\nsubsample = 50\n[adbi]\nsubsample = 60\n";
    REQUIRE(w.run({"thas", "--config", w.at("run.toml"), "--seeds", "2", "--out", w.at("o")}) == 0);
    const auto s = read_artifact(w.at("o/thas_summary.csv"), "thas-summary");
    CHECK(s.meta_value("config.subsample") == "50");
    CHECK(s.meta_value("config.seeds") == "2");
    std::ofstream(w.dir / "bad.toml") << "nonsense_key = 1\n";
    CHECK(w.run({"thas", "--config", w.at("bad.toml")}) == 2);
}

TEST_CASE("worker count does not change outputs") {
    Workspace w;
    w.blobs(150, 2);
    const std::vector<std::string> args = {"--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--seeds", "2",
                                           "--subsample", "100"};
    for (const char* workers : {"1", "4"}) {
        std::vector<std::string> a = {"adbi"};
        a.insert(a.end(), args.begin(), args.end());
        a.insert(a.end(), {"--workers", workers, "--out", w.at(std::string("w") + workers)});
        REQUIRE(w.run(a) == 0);
    }
    CHECK(slurp(w.at("w1/dbi_curve_seed0.csv")) == slurp(w.at("w4/dbi_curve_seed0.csv")));
    CHECK(slurp(w.at("w1/adbi_summary.csv")) == slurp(w.at("w4/adbi_summary.csv")));
}

TEST_CASE("correlate and report on the reference table") {
    Workspace w;
    const std::string cells = REPRALIGN_FIXTURE_DIR "/reference_cells.csv";
    REQUIRE(w.run({"correlate", "--cells", cells, "--y", "ADBI", "--out", w.at("c")}) == 0);
    const auto c = read_artifact(w.at("c/correlation.csv"), "correlation");
    CHECK(c.rows[0][0] == "pearson");
    CHECK(std::abs(parse_double(c.rows[0][1])) <= 0.15);
    CHECK(c.rows[0][3] == "20");
    CHECK(read_artifact(w.at("c/scatter.csv"), "scatter").rows.size() == 20);

    REQUIRE(w.run({"correlate", "--cells", cells, "--means", "--out", w.at("m")}) == 0);
    const auto m = read_artifact(w.at("m/correlation.csv"), "correlation");
    CHECK(m.rows[1][1] == "1");
    CHECK(m.rows[1][4] == "true");

    REQUIRE(w.run({"report", "--cells", cells, "--sort-by", "ALC", "--out", w.at("r")}) == 0);
    const auto alc = read_artifact(w.at("r/report_ALC.csv"), "report");
    CHECK(alc.header.back() == "mean");
    CHECK(alc.rows[0][0] == "BERT_all");
    CHECK(std::round(parse_double(alc.rows[0].back()) * 100) == 61);
    const auto adbi = read_artifact(w.at("r/report_ADBI.csv"), "report");
    CHECK(adbi.rows[0][0] == "BERT_all");  // follows the ALC order
    CHECK(w.out.find("BERT_all") != std::string::npos);

    CHECK(w.run({"correlate", "--cells", cells, "--x", "F1"}) == 2);
}

TEST_CASE("featurize writes loadable features") {
    Workspace w;
    {
        std::ofstream c(w.dir / "c.jsonl");
        for (int i = 0; i < 40; ++i) {
            c << "{\"text\": \"" << (i % 2 ? "great fun film" : "dull boring film") << " " << i % 3
              << "\", \"label\": \"" << (i % 2 ? "pos" : "neg") << "\"}\n";
        }
    }
    REQUIRE(w.run({"featurize", "--corpus", w.at("c.jsonl"), "--positive", "pos", "--out", w.at("f")}) == 0);
    const Matrix x = load_dense_matrix(w.at("f/features.npy"));
    CHECK(x.rows() == 40);
    const LabelSet y = load_labels(w.at("f/labels.txt"), 40);
    CHECK(y.vocab == std::vector<std::string>{"neg", "pos"});
    const BowVocabulary v = load_vocabulary(w.at("f/vocabulary.csv"));
    CHECK(v.size() == x.cols());
    const auto manifest = read_artifact(w.at("f/manifest.csv"), "featurize-manifest");
    CHECK(manifest.rows[0] == std::vector<std::string>{"documents", "40"});

    REQUIRE(w.run({"thas", "--matrix", w.at("f/features.npy"), "--labels", w.at("f/labels.txt"), "--positive", "pos",
                   "--seeds", "1", "--out", w.at("t")}) == 0);
    REQUIRE(w.run({"thas", "--corpus", w.at("c.jsonl"), "--positive", "pos", "--seeds", "1", "--out", w.at("u")}) == 0);
    CHECK(read_artifact(w.at("t/thas_summary.csv"), "thas-summary").rows ==
          read_artifact(w.at("u/thas_summary.csv"), "thas-summary").rows);
}

TEST_CASE("alc with an explicit test set") {
    Workspace w;
    w.blobs(200, 3, 72);
    fs::rename(w.dir / "x.npy", w.dir / "train.npy");
    fs::rename(w.dir / "y.txt", w.dir / "train.txt");
    w.blobs(80, 3, 73);
    REQUIRE(w.run({"alc", "--matrix", w.at("train.npy"), "--labels", w.at("train.txt"), "--test-matrix", w.at("x.npy"),
                   "--test-labels", w.at("y.txt"), "--sizes", "50,100", "--seeds", "2", "--metric", "f1", "--out",
                   w.at("o")}) == 0);
    const auto lc = read_artifact(w.at("o/learning_curve.csv"), "learning-curve");
    CHECK(lc.meta_value("metric_kind") == "f1");
    CHECK(lc.meta_value("test_size") == "80");
    CHECK(parse_double(lc.meta_value("alc")) > 0.8);
    CHECK(w.run({"alc", "--matrix", w.at("train.npy"), "--labels", w.at("train.txt"), "--test-matrix",
                 w.at("x.npy")}) == 2);
}

TEST_CASE("the worker environment variable is honored and validated") {
    Workspace w;
    w.blobs(60, 4);
    ::setenv("REPRALIGN_WORKERS", "2", 1);
    CHECK(w.run({"adbi", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--seeds", "1", "--out", w.at("o")}) == 0);
    ::setenv("REPRALIGN_WORKERS", "two", 1);
    CHECK(w.run({"adbi", "--matrix", w.at("x.npy"), "--labels", w.at("y.txt"), "--seeds", "1", "--out", w.at("o")}) == 2);
    ::unsetenv("REPRALIGN_WORKERS");
}
