#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "repralign/core.hpp"

using namespace repralign;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("matrix rejects data of the wrong length") {
    CHECK(code_of([] { Matrix(2, 3, std::vector<double>(5)); }) == ErrorCode::ShapeMismatch);
    Matrix m(2, 2, {1, 2, 3, 4});
    CHECK(m(1, 0) == 3);
    const std::size_t rows[] = {1};
    CHECK(m.select_rows(rows) == Matrix(1, 2, {3, 4}));
}

TEST_CASE("rng streams are reproducible and seed-dependent") {
    Rng a(Seed{7}), b(Seed{7}), c(Seed{8});
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
}

TEST_CASE("bounded draws stay in range and cover it evenly") {
    Rng rng(Seed{1});
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++hist[v];
    }
    for (int h : hist) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("uniform and normal draws have the right moments") {
    Rng rng(Seed{3});
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("derived seeds differ per tag and are stable") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(Seed{42}, t).value);
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(Seed{42}, 5).value == derive_seed(Seed{42}, 5).value);
    CHECK(derive_seed(Seed{42}, 5).value != derive_seed(Seed{43}, 5).value);
}

TEST_CASE("validate_dataset enforces its invariants") {
    const std::vector<std::string> vocab = {"a", "b"};
    SUBCASE("ok") {
        auto ds = validate_dataset(Matrix(3, 1, {0, 1, 2}), {0, 1, 0}, vocab, 1);
        CHECK(ds.size() == 3);
        CHECK(ds.positive_count() == 1);
        CHECK(ds.prevalence() == 1.0 / 3.0);
        CHECK(ds.positive_indicator() == std::vector<std::uint8_t>{0, 1, 0});
        CHECK(ds.label_counts() == std::vector<std::size_t>{2, 1});
        CHECK(ds.with_positive_class(0).positive_count() == 2);
    }
    SUBCASE("shape") {
        CHECK(code_of([&] { validate_dataset(Matrix(3, 1), {0, 1}, vocab, 0); }) == ErrorCode::ShapeMismatch);
        CHECK(code_of([&] { validate_dataset(Matrix(1, 1), {0}, vocab, 0); }) == ErrorCode::ShapeMismatch);
    }
    SUBCASE("non-finite reports the cell") {
        Matrix m(3, 2, {0, 1, 2, NAN, 4, 5});
        try {
            validate_dataset(m, {0, 1, 0}, vocab, 0);
            FAIL("no throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonFinite);
            CHECK(e.row() == 1u);
            CHECK(e.col() == 1u);
        }
    }
    SUBCASE("label out of range reports the row") {
        try {
            validate_dataset(Matrix(3, 1), {0, 1, 2}, vocab, 0);
            FAIL("no throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::LabelOutOfRange);
            CHECK(e.row() == 2u);
        }
    }
    SUBCASE("positive class must be present and not universal") {
        CHECK(code_of([&] { validate_dataset(Matrix(2, 1), {0, 0}, vocab, 1); }) == ErrorCode::DegenerateLabels);
        CHECK(code_of([&] { validate_dataset(Matrix(2, 1), {0, 0}, vocab, 0); }) == ErrorCode::DegenerateLabels);
    }
}

TEST_CASE("subsample_indices is sorted, unique, deterministic and uniform") {
    const auto a = subsample_indices(100, 30, Seed{5});
    CHECK(a.size() == 30);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 30);
    CHECK(a == subsample_indices(100, 30, Seed{5}));
    CHECK(a != subsample_indices(100, 30, Seed{6}));
    CHECK(subsample_indices(10, 10, Seed{1}).size() == 10);

    std::vector<int> hits(20, 0);
    for (std::uint64_t s = 0; s < 20000; ++s) {
        for (auto i : subsample_indices(20, 5, Seed{s})) ++hits[i];
    }
    for (int h : hits) CHECK(std::abs(h - 5000) < 300);
}

TEST_CASE("subsample keeps row order and validates size") {
    Rng rng(Seed{2});
    auto ds = oracle::random_dataset(rng, 50, 3);
    auto sub = subsample(ds, 20, Seed{9});
    const auto idx = subsample_indices(50, 20, Seed{9});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(sub.label(i) == ds.label(idx[i]));
        CHECK(sub.point(i)[0] == ds.point(idx[i])[0]);
    }
    CHECK(code_of([&] { subsample(ds, 1, Seed{0}); }) == ErrorCode::SizeOutOfRange);
    CHECK(code_of([&] { subsample(ds, 51, Seed{0}); }) == ErrorCode::SizeOutOfRange);
}

TEST_CASE("subsample reports a draw that loses the positive class") {
    std::vector<LabelId> labels(40, 1);
    labels[0] = 0;
    auto ds = validate_dataset(Matrix(40, 1), labels, {"p", "n"}, 0);
    bool saw = false;
    for (std::uint64_t s = 0; s < 20 && !saw; ++s) {
        try {
            subsample(ds, 3, Seed{s});
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateLabels);
            saw = true;
        }
    }
    CHECK(saw);
}

TEST_CASE("squared_euclidean") {
    const double a[] = {1, 2, 3}, b[] = {1, 0, 7};
    CHECK(squared_euclidean(a, b) == 20.0);
    CHECK(code_of([&] { squared_euclidean(std::span<const double>(a, 2), b); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("curve checks and mean area") {
    CurveSeries c{{1, 2, 3}, {0.5, 1.0, 1.5}, 0.0};
    CHECK_NOTHROW(c.check());
    CHECK(mean_area(c.values) == 1.0);
    c.index = {1, 1, 2};
    CHECK(code_of([&] { c.check(); }) == ErrorCode::InvalidArgument);
    c.index = {1, 2};
    CHECK(code_of([&] { c.check(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    for (unsigned w : {1u, 2u, 5u}) {
        std::vector<std::atomic<int>> seen(1000);
        parallel_for(1000, w, [&](std::size_t i) { seen[i]++; });
        for (auto& s : seen) CHECK(s.load() == 1);
    }
    CHECK_THROWS_AS(parallel_for(100, 3,
                                 [](std::size_t i) {
                                     if (i == 57) throw Error(ErrorCode::InvalidArgument, "boom");
                                 }),
                    Error);
    CHECK(resolve_workers(3) == 3);
    CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("error codes carry names and exit classes") {
    Error e(ErrorCode::NonFinite, "bad");
    CHECK(e.message() == "bad");
    CHECK(std::string(e.what()) == "NonFinite: bad");
    CHECK(error_code_name(ErrorCode::FoldTooSmall) == "FoldTooSmall");
    CHECK(is_validation_error(ErrorCode::NonFinite));
    CHECK_FALSE(is_validation_error(ErrorCode::DegenerateDraw));
    CHECK_FALSE(is_validation_error(ErrorCode::TooLargeForOracle));
}
