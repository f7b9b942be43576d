#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "repralign/error.hpp"

namespace repralign {

using LabelId = std::uint32_t;

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix select_rows(std::span<const std::size_t> indices) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Seed {
    std::uint64_t value = 0;
};

// splitmix64 step; also used to derive child seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Derive an independent seed from a parent seed and a stream tag.
Seed derive_seed(Seed parent, std::uint64_t tag);

// xoshiro256** seeded through splitmix64. The sequence is fixed across
// releases; all randomized operations in the library draw from it.
class Rng {
public:
    explicit Rng(Seed seed);

    std::uint64_t next();
    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    // Uniform double in [0, 1) with 53 random bits.
    double uniform();
    // Standard normal via Box-Muller (no cached second value).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

// A labeled set of points in a fixed representation space. Instances are
// only produced by validate_dataset (or derived operations) and always
// satisfy: n >= 2, d >= 1, finite entries, labels within the vocabulary,
// positive class present but not universal.
class EmbeddedDataset {
public:
    std::size_t size() const noexcept { return vectors_.rows(); }
    std::size_t dim() const noexcept { return vectors_.cols(); }
    std::size_t num_labels() const noexcept { return label_vocab_.size(); }

    const Matrix& vectors() const noexcept { return vectors_; }
    std::span<const double> point(std::size_t i) const { return vectors_.row(i); }
    std::span<const LabelId> labels() const noexcept { return labels_; }
    LabelId label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::string>& label_vocab() const noexcept { return label_vocab_; }
    LabelId positive_class() const noexcept { return positive_class_; }

    std::vector<std::size_t> label_counts() const;
    std::size_t positive_count() const;
    // Relative frequency of the positive class, computed as count / n.
    double prevalence() const;
    // 1 for points carrying the positive class, 0 otherwise.
    std::vector<std::uint8_t> positive_indicator() const;

    // Same points and labels, different designated positive class.
    EmbeddedDataset with_positive_class(LabelId positive) const;

private:
    friend EmbeddedDataset validate_dataset(Matrix, std::vector<LabelId>, std::vector<std::string>, LabelId);

    Matrix vectors_;
    std::vector<LabelId> labels_;
    std::vector<std::string> label_vocab_;
    LabelId positive_class_ = 0;
};

// Checks every dataset invariant and takes ownership of the inputs.
// Errors: ShapeMismatch, NonFinite(row, col), LabelOutOfRange(row),
// DegenerateLabels.
EmbeddedDataset validate_dataset(Matrix vectors, std::vector<LabelId> labels,
                                 std::vector<std::string> label_vocab, LabelId positive_class);

// Indices of a uniform sample without replacement, ascending.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t size, Seed seed);

// Uniform subsample that keeps the original relative row order.
// Errors: SizeOutOfRange unless 2 <= size <= n; DegenerateLabels if the
// sample misses the positive class (or contains nothing else).
EmbeddedDataset subsample(const EmbeddedDataset& ds, std::size_t size, Seed seed);

// Rows of ds at the given indices, re-validated.
EmbeddedDataset select(const EmbeddedDataset& ds, std::span<const std::size_t> indices);

double squared_euclidean(std::span<const double> a, std::span<const double> b);

// A metric sampled over a sweep variable (k clusters or N training points).
struct CurveSeries {
    std::vector<std::size_t> index;
    std::vector<double> values;
    double area = 0.0;

    // Throws InvalidArgument if index is not strictly increasing or the
    // lengths disagree.
    void check() const;
};

// Mean of the values; the discrete area normalized by the number of points.
double mean_area(std::span<const double> values);

// Resolves a requested worker count (0 = hardware concurrency).
unsigned resolve_workers(unsigned requested);

// Runs body(i) for i in [0, count) on up to `workers` threads. Exceptions
// from the body are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace repralign
