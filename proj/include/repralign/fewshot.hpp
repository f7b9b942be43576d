#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "repralign/core.hpp"

namespace repralign {

enum class MetricKind { Accuracy, F1 };

std::string_view metric_name(MetricKind kind);
// Parses "accuracy" or "f1". Throws InvalidArgument.
MetricKind parse_metric(std::string_view name);

// Binary L2-regularized logistic regression (maximum entropy) model.
struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 0.0;
};

struct TrainOptions {
    double tol = 1e-9;  // stop when the relative loss decrease falls below this
    std::size_t max_iter = 500;
};

struct TrainResult {
    LogisticModel model;
    double loss = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;  // false: max_iter reached, best iterate returned
};

// Objective: mean log-loss + (lambda / 2) ||w||^2, bias unregularized.
double logistic_loss(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                     std::span<const double> weights, double bias);

// Gradient of logistic_loss; the last entry is the bias component.
std::vector<double> logistic_gradient(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                                      std::span<const double> weights, double bias);

// Deterministic full-batch L-BFGS with a backtracking Armijo line search.
// Errors: InvalidArgument (m < 2, lambda <= 0, shapes), SingleClass, NonFinite.
TrainResult train_logistic(const Matrix& X, std::span<const std::uint8_t> y, double lambda,
                           const TrainOptions& options = {});

// Sigmoid of w.x + b per row. Throws DimensionMismatch.
std::vector<double> predict_scores(const LogisticModel& model, const Matrix& X);

// Accuracy, or F1 of the positive class, thresholding scores at > 0.5.
// F1 is 0 when nothing is predicted positive. Throws DegenerateLabels for
// F1 without gold positives, InvalidArgument on empty input.
double metric(std::span<const double> scores, std::span<const std::uint8_t> gold, MetricKind kind);

// Log-spaced default grid 1e-4 .. 1e2.
std::vector<double> default_lambda_grid();

struct SelectionResult {
    double lambda = 0.0;
    std::vector<double> grid;            // as given
    std::vector<double> mean_metric;     // per grid entry
};

struct SelectionOptions {
    std::size_t folds = 5;
    MetricKind metric_kind = MetricKind::Accuracy;
    TrainOptions train;
};

// Seeded k-fold assignment: positives and negatives are shuffled separately
// and dealt round-robin, so every fold receives both classes whenever each
// class has at least `folds` members. Throws FoldTooSmall otherwise.
std::vector<std::size_t> assign_folds(std::span<const std::uint8_t> y, std::size_t folds, Seed seed);

// Cross-validated choice of the L2 strength. Returns the grid entry with
// the highest mean validation metric; ties go to the smaller lambda.
SelectionResult select_hyperparams(const Matrix& X, std::span<const std::uint8_t> y, std::span<const double> grid,
                                   Seed seed, const SelectionOptions& options = {});

struct LearningCurveOptions {
    std::vector<std::size_t> sizes;  // N grid
    std::vector<Seed> seeds;
    std::vector<double> lambda_grid = default_lambda_grid();
    SelectionOptions selection;
    unsigned workers = 0;
};

// 100, 200, ..., 1000.
std::vector<std::size_t> default_sizes();

struct LearningCurveResult {
    MetricKind metric_kind = MetricKind::Accuracy;
    CurveSeries curve;                 // mean over seeds per N; area = ALC
    std::vector<double> stddev;        // sample std over seeds per N
    Matrix per_seed;                   // seeds x sizes; NaN for flagged cells
    std::vector<double> chosen_lambda; // seeds x sizes, row-major
    std::size_t flagged_cells = 0;     // draws that lacked a class twice
    double alc = 0.0;
};

// For each (seed, N): draw N pool points, select lambda by CV, retrain on
// all N and score on the test set. A draw whose classes are too small for
// the folds is redrawn once, then flagged and excluded from the mean.
LearningCurveResult learning_curve(const EmbeddedDataset& pool, const EmbeddedDataset& test,
                                   const LearningCurveOptions& options);

}  // namespace repralign
