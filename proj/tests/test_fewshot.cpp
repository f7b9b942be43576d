#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "repralign/fewshot.hpp"

using namespace repralign;

namespace {

struct Problem {
    Matrix X;
    std::vector<std::uint8_t> y;
};

// Labels from a noisy linear rule, so the optimum is interior.
Problem random_problem(Rng& rng, std::size_t m, std::size_t d) {
    Problem p{Matrix(m, d), std::vector<std::uint8_t>(m)};
    std::vector<double> w(d);
    for (double& v : w) v = rng.normal();
    for (std::size_t i = 0; i < m; ++i) {
        double z = 0;
        for (std::size_t j = 0; j < d; ++j) {
            p.X(i, j) = rng.normal();
            z += w[j] * p.X(i, j);
        }
        p.y[i] = z + rng.normal() > 0 ? 1 : 0;
    }
    p.y[0] = 1;
    p.y[1] = 0;
    return p;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(Seed{41});
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + rng.below(6);
        const Problem p = random_problem(rng, 10 + rng.below(40), d);
        std::vector<double> w(d);
        for (double& v : w) v = rng.normal();
        const double b = rng.normal(), lambda = 0.01 + rng.uniform();
        const auto g = logistic_gradient(p.X, p.y, lambda, w, b);
        REQUIRE(g.size() == d + 1);
        const double h = 1e-5;
        for (std::size_t j = 0; j <= d; ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < d) {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd = (logistic_loss(p.X, p.y, lambda, wp, bp) - logistic_loss(p.X, p.y, lambda, wm, bm)) / (2 * h);
            CHECK(oracle::close(g[j], fd, 1e-6, 1e-8));
        }
    }
}

TEST_CASE("training finds the minimum of the convex objective") {
    Rng rng(Seed{42});
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 2 + rng.below(5);
        const Problem p = random_problem(rng, 60, d);
        const double lambda = 0.05;
        const TrainResult r = train_logistic(p.X, p.y, lambda);
        CHECK(r.converged);
        CHECK(r.gradient_norm < 1e-3);
        CHECK(r.loss == doctest::Approx(logistic_loss(p.X, p.y, lambda, r.model.weights, r.model.bias)));
        for (int probe = 0; probe < 100; ++probe) {
            const double scale = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
            auto w = r.model.weights;
            for (double& v : w) v += scale * rng.normal();
            const double b = r.model.bias + scale * rng.normal();
            CHECK(r.loss <= logistic_loss(p.X, p.y, lambda, w, b) + 1e-12);
        }
    }
}

TEST_CASE("training validates its input") {
    Matrix X(3, 1, {0, 1, 2});
    auto code = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code([&] { train_logistic(X, std::vector<std::uint8_t>{1, 1, 1}, 1.0); }) == ErrorCode::SingleClass);
    CHECK(code([&] { train_logistic(X, std::vector<std::uint8_t>{1, 0, 1}, 0.0); }) == ErrorCode::InvalidArgument);
    CHECK(code([&] { train_logistic(X, std::vector<std::uint8_t>{1, 0}, 1.0); }) == ErrorCode::InvalidArgument);
    Matrix bad(2, 1, {0, NAN});
    CHECK(code([&] { train_logistic(bad, std::vector<std::uint8_t>{1, 0}, 1.0); }) == ErrorCode::NonFinite);
    LogisticModel m{{1.0, 2.0}, 0.0, 1.0};
    CHECK(code([&] { predict_scores(m, X); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("metrics threshold strictly above one half") {
    const std::vector<std::uint8_t> gold = {1, 0, 1, 0};
    CHECK(metric(std::vector<double>{0.9, 0.1, 0.5, 0.6}, gold, MetricKind::Accuracy) == 0.5);
    // tp = 1, fp = 1, fn = 1
    CHECK(metric(std::vector<double>{0.9, 0.1, 0.5, 0.6}, gold, MetricKind::F1) == 0.5);
    CHECK(metric(std::vector<double>{0.1, 0.1, 0.1, 0.1}, gold, MetricKind::F1) == 0.0);
    CHECK_THROWS_AS(metric(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 0}, MetricKind::F1), Error);
    CHECK(parse_metric("f1") == MetricKind::F1);
    CHECK(metric_name(MetricKind::Accuracy) == "accuracy");
    CHECK_THROWS_AS(parse_metric("auc"), Error);
}

TEST_CASE("folds are stratified and deterministic") {
    std::vector<std::uint8_t> y(53, 0);
    for (std::size_t i = 0; i < 17; ++i) y[i * 3] = 1;
    const auto f = assign_folds(y, 5, Seed{3});
    CHECK(f == assign_folds(y, 5, Seed{3}));
    std::vector<int> pos(5, 0), all(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        ++all[f[i]];
        pos[f[i]] += y[i];
    }
    for (int k = 0; k < 5; ++k) {
        CHECK(pos[k] >= 3);
        CHECK(all[k] - pos[k] >= 7);
        CHECK(std::abs(all[k] - 53 / 5) <= 1);
    }
    std::vector<std::uint8_t> few = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    try {
        assign_folds(few, 5, Seed{0});
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FoldTooSmall);
    }
}

TEST_CASE("hyperparameter ties go to the smaller strength") {
    // Perfectly separable with a wide margin: every lambda is perfect.
    Matrix X(20, 1);
    std::vector<std::uint8_t> y(20);
    for (std::size_t i = 0; i < 20; ++i) {
        y[i] = i % 2;
        X(i, 0) = y[i] ? 10.0 + i : -10.0 - i;
    }
    const std::vector<double> grid = {1.0, 0.01, 0.1};
    const auto r = select_hyperparams(X, y, grid, Seed{1});
    for (double m : r.mean_metric) CHECK(m == 1.0);
    CHECK(r.lambda == 0.01);
    CHECK(r.grid == grid);
}

namespace {

EmbeddedDataset labeled(Matrix X, const std::vector<std::uint8_t>& y) {
    std::vector<LabelId> labels(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) labels[i] = y[i] ? 0 : 1;
    return validate_dataset(std::move(X), std::move(labels), {"pos", "neg"}, 0);
}

}  // namespace

TEST_CASE("learning curve on a constant representation equals the majority rate") {
    std::vector<std::uint8_t> pool_y(300), test_y(100);
    for (std::size_t i = 0; i < 300; ++i) pool_y[i] = i % 10 < 3;
    for (std::size_t i = 0; i < 100; ++i) test_y[i] = i % 4 == 0;
    const auto pool = labeled(Matrix(300, 2, 0.0), pool_y);
    const auto test = labeled(Matrix(100, 2, 0.0), test_y);
    LearningCurveOptions o;
    o.sizes = {50, 100, 200};
    o.seeds = {Seed{1}, Seed{2}, Seed{3}};
    o.lambda_grid = {0.1, 1.0};
    const auto r = learning_curve(pool, test, o);
    for (double v : r.curve.values) CHECK(v == 0.75);
    CHECK(r.alc == 0.75);
    CHECK(r.alc == mean_area(r.curve.values));
    for (double s : r.stddev) CHECK(s == 0.0);
    CHECK(r.flagged_cells == 0);
}

TEST_CASE("learning curves are reproducible and independent of workers") {
    Rng rng(Seed{43});
    const Problem p = random_problem(rng, 600, 4);
    std::vector<std::size_t> head(400), tail(200);
    std::iota(head.begin(), head.end(), 0);
    std::iota(tail.begin(), tail.end(), 400);
    auto labels_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::uint8_t> y;
        for (std::size_t i : idx) y.push_back(p.y[i]);
        return y;
    };
    const auto pool = labeled(p.X.select_rows(head), labels_of(head));
    const auto test = labeled(p.X.select_rows(tail), labels_of(tail));
    LearningCurveOptions o;
    o.sizes = {40, 80, 160};
    o.seeds = {Seed{5}, Seed{6}};
    o.workers = 1;
    const auto a = learning_curve(pool, test, o);
    o.workers = 3;
    const auto b = learning_curve(pool, test, o);
    CHECK(a.per_seed == b.per_seed);
    CHECK(a.chosen_lambda == b.chosen_lambda);
    CHECK(a.alc == b.alc);
    CHECK(a.curve.values.back() >= 0.7);
}

TEST_CASE("draws without enough of a class are flagged, then fail") {
    // Five positives in 200: small draws rarely have five of them.
    std::vector<std::uint8_t> y(200, 0);
    for (std::size_t i = 0; i < 5; ++i) y[i * 40] = 1;
    Rng rng(Seed{44});
    Matrix X(200, 2);
    for (double& v : X.data()) v = rng.normal();
    const auto pool = labeled(X, y);
    std::vector<std::uint8_t> ty = {1, 0, 1, 0};
    const auto test = labeled(Matrix(4, 2, 0.5), ty);
    LearningCurveOptions o;
    o.sizes = {20, 200};
    o.seeds = {Seed{1}, Seed{2}, Seed{3}};
    o.lambda_grid = {1.0};
    try {
        learning_curve(pool, test, o);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateDraw);
    }
    o.sizes = {200};
    const auto r = learning_curve(pool, test, o);
    CHECK(r.flagged_cells == 0);
    CHECK_THROWS_AS(learning_curve(pool, test, LearningCurveOptions{{201}, {Seed{1}}, {1.0}, {}, 1}), Error);
}

TEST_CASE("default grids") {
    CHECK(default_sizes().front() == 100);
    CHECK(default_sizes().back() == 1000);
    CHECK(default_sizes().size() == 10);
    CHECK(default_lambda_grid().front() == 1e-4);
    CHECK(default_lambda_grid().back() == 1e2);
}
