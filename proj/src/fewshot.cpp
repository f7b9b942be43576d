#include "repralign/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace repralign {
namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_training_inputs(const Matrix& X, std::span<const std::uint8_t> y, double lambda) {
    if (X.rows() != y.size()) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
                                                    " labels");
    }
    if (X.rows() < 2) throw Error(ErrorCode::InvalidArgument, "training needs at least 2 examples");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorCode::InvalidArgument, "L2 strength must be positive and finite");
    }
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t c = 0; c < X.cols(); ++c) {
            if (!std::isfinite(X(r, c))) {
                throw Error(ErrorCode::NonFinite, "non-finite feature at row " + std::to_string(r)).at_row(r).at_col(c);
            }
        }
    }
    const auto positives = std::count_if(y.begin(), y.end(), [](auto v) { return v != 0; });
    if (positives == 0 || static_cast<std::size_t>(positives) == y.size()) {
        throw Error(ErrorCode::SingleClass, "training labels contain a single class");
    }
}

// Loss and gradient over theta = [w..., b].
double evaluate(const Matrix& X, std::span<const std::uint8_t> y, double lambda, std::span<const double> theta,
                std::vector<double>* gradient) {
    const std::size_t d = X.cols();
    const std::size_t m = X.rows();
    auto w = theta.first(d);
    const double b = theta[d];
    if (gradient) gradient->assign(d + 1, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        auto x = X.row(i);
        const double z = dot(w, x) + b;
        const double t = y[i] != 0 ? 1.0 : 0.0;
        loss += softplus(z) - t * z;
        if (gradient) {
            const double r = sigmoid(z) - t;
            for (std::size_t j = 0; j < d; ++j) (*gradient)[j] += r * x[j];
            (*gradient)[d] += r;
        }
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    loss *= inv_m;
    double norm2 = 0.0;
    for (double v : w) norm2 += v * v;
    loss += 0.5 * lambda * norm2;
    if (gradient) {
        for (std::size_t j = 0; j <= d; ++j) (*gradient)[j] *= inv_m;
        for (std::size_t j = 0; j < d; ++j) (*gradient)[j] += lambda * w[j];
    }
    return loss;
}

struct Correction {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
};

}  // namespace

std::string_view metric_name(MetricKind kind) { return kind == MetricKind::Accuracy ? "accuracy" : "f1"; }

MetricKind parse_metric(std::string_view name) {
    if (name == "accuracy") return MetricKind::Accuracy;
    if (name == "f1") return MetricKind::F1;
    throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "' (expected accuracy or f1)");
}

double logistic_loss(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                     std::span<const double> weights, double bias) {
    std::vector<double> theta(weights.begin(), weights.end());
    theta.push_back(bias);
    return evaluate(X, y, lambda, theta, nullptr);
}

std::vector<double> logistic_gradient(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                                      std::span<const double> weights, double bias) {
    std::vector<double> theta(weights.begin(), weights.end());
    theta.push_back(bias);
    std::vector<double> g;
    evaluate(X, y, lambda, theta, &g);
    return g;
}

TrainResult train_logistic(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                           const TrainOptions& options) {
    check_training_inputs(X, y, lambda);
    const std::size_t p = X.cols() + 1;
    constexpr std::size_t history = 10;

    std::vector<double> theta(p, 0.0);
    std::vector<double> grad;
    double loss = evaluate(X, y, lambda, theta, &grad);

    std::deque<Correction> corrections;
    std::vector<double> direction(p), trial(p), trial_grad;
    std::vector<double> alpha(history);

    TrainResult result;
    std::size_t iter = 0;
    bool converged = false;
    for (; iter < options.max_iter; ++iter) {
        const double gnorm = std::sqrt(dot(grad, grad));
        if (gnorm <= 1e-12) {
            converged = true;
            break;
        }

        // Two-loop recursion.
        direction = grad;
        for (std::size_t c = corrections.size(); c-- > 0;) {
            const auto& cr = corrections[c];
            alpha[c] = cr.rho * dot(cr.s, direction);
            for (std::size_t j = 0; j < p; ++j) direction[j] -= alpha[c] * cr.y[j];
        }
        if (!corrections.empty()) {
            const auto& last = corrections.back();
            const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
            for (double& v : direction) v *= gamma;
        } else {
            const double scale = 1.0 / std::max(1.0, gnorm);
            for (double& v : direction) v *= scale;
        }
        for (std::size_t c = 0; c < corrections.size(); ++c) {
            const auto& cr = corrections[c];
            const double beta = cr.rho * dot(cr.y, direction);
            for (std::size_t j = 0; j < p; ++j) direction[j] += (alpha[c] - beta) * cr.s[j];
        }
        for (double& v : direction) v = -v;

        double slope = dot(grad, direction);
        if (!(slope < 0.0)) {
            corrections.clear();
            const double scale = 1.0 / std::max(1.0, gnorm);
            for (std::size_t j = 0; j < p; ++j) direction[j] = -grad[j] * scale;
            slope = dot(grad, direction);
        }

        // Backtracking Armijo line search.
        double step = 1.0;
        double trial_loss = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (std::size_t j = 0; j < p; ++j) trial[j] = theta[j] + step * direction[j];
            trial_loss = evaluate(X, y, lambda, trial, &trial_grad);
            if (std::isfinite(trial_loss) && trial_loss <= loss + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent possible at machine precision: we are at the optimum.
            converged = true;
            break;
        }

        Correction cr{std::vector<double>(p), std::vector<double>(p), 0.0};
        for (std::size_t j = 0; j < p; ++j) {
            cr.s[j] = trial[j] - theta[j];
            cr.y[j] = trial_grad[j] - grad[j];
        }
        const double sy = dot(cr.s, cr.y);
        const double decrease = loss - trial_loss;
        const double previous = loss;
        theta.swap(trial);
        grad.swap(trial_grad);
        loss = trial_loss;
        if (sy > 1e-16) {
            cr.rho = 1.0 / sy;
            corrections.push_back(std::move(cr));
            if (corrections.size() > history) corrections.pop_front();
        }
        if (decrease <= options.tol * std::max(std::abs(previous), 1e-300)) {
            ++iter;
            converged = true;
            break;
        }
    }

    result.model.weights.assign(theta.begin(), theta.end() - 1);
    result.model.bias = theta.back();
    result.model.lambda = lambda;
    result.loss = loss;
    result.gradient_norm = std::sqrt(dot(grad, grad));
    result.iterations = iter;
    result.converged = converged;
    return result;
}

std::vector<double> predict_scores(const LogisticModel& model, const Matrix& X) {
    if (X.cols() != model.weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "model expects dimension " + std::to_string(model.weights.size()) +
                                                      ", data has " + std::to_string(X.cols()));
    }
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = sigmoid(dot(model.weights, X.row(i)) + model.bias);
    return out;
}

double metric(std::span<const double> scores, std::span<const std::uint8_t> gold, MetricKind kind) {
    if (scores.size() != gold.size()) throw Error(ErrorCode::DimensionMismatch, "scores and gold differ in length");
    if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "metric of an empty set");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > 0.5;
        const bool actual = gold[i] != 0;
        if (predicted && actual) ++tp;
        else if (predicted) ++fp;
        else if (actual) ++fn;
        else ++tn;
    }
    if (kind == MetricKind::Accuracy) return static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    if (tp + fn == 0) throw Error(ErrorCode::DegenerateLabels, "F1 is undefined without gold positives");
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2}; }

std::vector<std::size_t> default_sizes() {
    std::vector<std::size_t> out;
    for (std::size_t n = 100; n <= 1000; n += 100) out.push_back(n);
    return out;
}

std::vector<std::size_t> assign_folds(std::span<const std::uint8_t> y, std::size_t folds, Seed seed) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "cross-validation needs at least 2 folds");
    if (y.size() < folds) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(y.size()) + " examples cannot fill " +
                                                    std::to_string(folds) + " folds");
    }
    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] != 0 ? positives : negatives).push_back(i);
    if (positives.size() < folds || negatives.size() < folds) {
        throw Error(ErrorCode::FoldTooSmall, "each of the " + std::to_string(folds) +
                                                 " folds needs both classes; have " + std::to_string(positives.size()) +
                                                 " positives and " + std::to_string(negatives.size()) + " negatives");
    }
    Rng rng(seed);
    rng.shuffle(positives);
    rng.shuffle(negatives);
    std::vector<std::size_t> fold(y.size());
    std::size_t next = 0;
    for (std::size_t i : positives) fold[i] = next++ % folds;
    for (std::size_t i : negatives) fold[i] = next++ % folds;
    return fold;
}

SelectionResult select_hyperparams(const Matrix& X, std::span<const std::uint8_t> y, std::span<const double> grid,
                                   Seed seed, const SelectionOptions& options) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty hyperparameter grid");
    if (X.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "rows and labels differ in length");
    const auto fold = assign_folds(y, options.folds, seed);

    // Split once; every grid entry sees the same folds.
    struct Split {
        Matrix train_x, valid_x;
        std::vector<std::uint8_t> train_y, valid_y;
    };
    std::vector<Split> splits(options.folds);
    for (std::size_t f = 0; f < options.folds; ++f) {
        std::vector<std::size_t> train_idx, valid_idx;
        for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? valid_idx : train_idx).push_back(i);
        Split& s = splits[f];
        s.train_x = X.select_rows(train_idx);
        s.valid_x = X.select_rows(valid_idx);
        for (std::size_t i : train_idx) s.train_y.push_back(y[i]);
        for (std::size_t i : valid_idx) s.valid_y.push_back(y[i]);
    }

    SelectionResult result;
    result.grid.assign(grid.begin(), grid.end());
    result.mean_metric.assign(grid.size(), 0.0);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double total = 0.0;
        for (const Split& s : splits) {
            const auto trained = train_logistic(s.train_x, s.train_y, grid[g], options.train);
            total += metric(predict_scores(trained.model, s.valid_x), s.valid_y, options.metric_kind);
        }
        const double mean = total / static_cast<double>(options.folds);
        result.mean_metric[g] = mean;
        if (mean > best || (mean == best && grid[g] < result.lambda)) {
            best = mean;
            result.lambda = grid[g];
        }
    }
    return result;
}

LearningCurveResult learning_curve(const EmbeddedDataset& pool, const EmbeddedDataset& test,
                                   const LearningCurveOptions& options) {
    if (options.sizes.empty()) throw Error(ErrorCode::InvalidArgument, "empty training-size grid");
    if (options.seeds.empty()) throw Error(ErrorCode::InvalidArgument, "no seeds");
    if (pool.dim() != test.dim()) throw Error(ErrorCode::DimensionMismatch, "pool and test dimensions differ");
    for (std::size_t i = 0; i < options.sizes.size(); ++i) {
        if (options.sizes[i] > pool.size()) {
            throw Error(ErrorCode::SizeOutOfRange, "training size " + std::to_string(options.sizes[i]) +
                                                       " exceeds pool of " + std::to_string(pool.size()));
        }
        if (i > 0 && options.sizes[i] <= options.sizes[i - 1]) {
            throw Error(ErrorCode::InvalidArgument, "training sizes must be strictly increasing");
        }
    }
    if (pool.label_vocab() != test.label_vocab() || pool.positive_class() != test.positive_class()) {
        throw Error(ErrorCode::InvalidArgument, "pool and test use different label vocabularies");
    }

    const auto pool_y = pool.positive_indicator();
    const auto test_y = test.positive_indicator();
    const std::size_t seeds = options.seeds.size();
    const std::size_t points = options.sizes.size();
    const std::size_t folds = options.selection.folds;

    LearningCurveResult result;
    result.metric_kind = options.selection.metric_kind;
    result.per_seed = Matrix(seeds, points, std::numeric_limits<double>::quiet_NaN());
    result.chosen_lambda.assign(seeds * points, std::numeric_limits<double>::quiet_NaN());

    auto usable = [&](const std::vector<std::size_t>& idx) {
        std::size_t pos = 0;
        for (std::size_t i : idx) pos += pool_y[i];
        return pos >= folds && idx.size() - pos >= folds;
    };

    parallel_for(seeds * points, options.workers, [&](std::size_t cell) {
        const std::size_t s = cell / points;
        const std::size_t p = cell % points;
        const Seed cell_seed = derive_seed(options.seeds[s], options.sizes[p]);
        auto draw = subsample_indices(pool.size(), options.sizes[p], cell_seed);
        if (!usable(draw)) {
            draw = subsample_indices(pool.size(), options.sizes[p], derive_seed(cell_seed, 1));
            if (!usable(draw)) return;  // flagged: stays NaN
        }
        const Matrix x = pool.vectors().select_rows(draw);
        std::vector<std::uint8_t> y(draw.size());
        for (std::size_t i = 0; i < draw.size(); ++i) y[i] = pool_y[draw[i]];

        const auto selection =
            select_hyperparams(x, y, options.lambda_grid, derive_seed(cell_seed, 2), options.selection);
        const auto trained = train_logistic(x, y, selection.lambda, options.selection.train);
        result.per_seed(s, p) = metric(predict_scores(trained.model, test.vectors()), test_y, result.metric_kind);
        result.chosen_lambda[cell] = selection.lambda;
    });

    result.curve.index = options.sizes;
    result.curve.values.resize(points);
    result.stddev.resize(points);
    for (std::size_t p = 0; p < points; ++p) {
        std::vector<double> column;
        for (std::size_t s = 0; s < seeds; ++s) {
            const double v = result.per_seed(s, p);
            if (std::isnan(v)) {
                ++result.flagged_cells;
            } else {
                column.push_back(v);
            }
        }
        if (column.empty()) {
            throw Error(ErrorCode::DegenerateDraw, "every draw of size " + std::to_string(options.sizes[p]) +
                                                       " lacked enough examples of a class for " +
                                                       std::to_string(folds) + "-fold selection");
        }
        const double mean = mean_area(column);
        double ss = 0.0;
        for (double v : column) ss += (v - mean) * (v - mean);
        result.curve.values[p] = mean;
        result.stddev[p] = column.size() > 1 ? std::sqrt(ss / static_cast<double>(column.size() - 1)) : 0.0;
    }
    result.alc = mean_area(result.curve.values);
    result.curve.area = result.alc;
    return result;
}

}  // namespace repralign
