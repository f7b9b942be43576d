#include "repralign/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace repralign {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw Error(ErrorCode::ShapeMismatch, "matrix data has " + std::to_string(data_.size()) +
                                                  " entries, expected " + std::to_string(rows_ * cols_));
    }
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Seed derive_seed(Seed parent, std::uint64_t tag) {
    std::uint64_t state = parent.value ^ (tag * 0xd1b54a32d192ed03ULL);
    splitmix64(state);
    return Seed{splitmix64(state)};
}

Rng::Rng(Seed seed) {
    std::uint64_t state = seed.value;
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next() {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // Lemire's nearly divisionless method.
    __uint128_t m = static_cast<__uint128_t>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<__uint128_t>(next()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> EmbeddedDataset::label_counts() const {
    std::vector<std::size_t> counts(label_vocab_.size(), 0);
    for (LabelId y : labels_) ++counts[y];
    return counts;
}

std::size_t EmbeddedDataset::positive_count() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), positive_class_));
}

double EmbeddedDataset::prevalence() const {
    return static_cast<double>(positive_count()) / static_cast<double>(size());
}

std::vector<std::uint8_t> EmbeddedDataset::positive_indicator() const {
    std::vector<std::uint8_t> out(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] == positive_class_ ? 1 : 0;
    return out;
}

EmbeddedDataset EmbeddedDataset::with_positive_class(LabelId positive) const {
    return validate_dataset(vectors_, labels_, label_vocab_, positive);
}

EmbeddedDataset validate_dataset(Matrix vectors, std::vector<LabelId> labels,
                                 std::vector<std::string> label_vocab, LabelId positive_class) {
    if (vectors.rows() != labels.size()) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(vectors.rows()) + " vectors but " +
                                                  std::to_string(labels.size()) + " labels");
    }
    if (vectors.rows() < 2) throw Error(ErrorCode::ShapeMismatch, "dataset needs at least 2 points");
    if (vectors.cols() < 1) throw Error(ErrorCode::ShapeMismatch, "dataset needs dimension >= 1");
    if (label_vocab.empty()) throw Error(ErrorCode::ShapeMismatch, "empty label vocabulary");

    for (std::size_t r = 0; r < vectors.rows(); ++r) {
        auto row = vectors.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!std::isfinite(row[c])) {
                throw Error(ErrorCode::NonFinite, "non-finite value at row " + std::to_string(r) + ", column " +
                                                      std::to_string(c))
                    .at_row(r)
                    .at_col(c);
            }
        }
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= label_vocab.size()) {
            throw Error(ErrorCode::LabelOutOfRange, "label id " + std::to_string(labels[r]) + " at row " +
                                                        std::to_string(r) + " exceeds vocabulary of " +
                                                        std::to_string(label_vocab.size()))
                .at_row(r);
        }
    }
    if (positive_class >= label_vocab.size()) {
        throw Error(ErrorCode::LabelOutOfRange, "positive class id " + std::to_string(positive_class) +
                                                    " exceeds vocabulary of " + std::to_string(label_vocab.size()));
    }
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), positive_class));
    if (positives == 0 || positives == labels.size()) {
        throw Error(ErrorCode::DegenerateLabels,
                    "positive class '" + label_vocab[positive_class] + "' is " +
                        (positives == 0 ? "absent" : "carried by every point") +
                        "; precision-recall needs both positives and negatives");
    }

    EmbeddedDataset ds;
    ds.vectors_ = std::move(vectors);
    ds.labels_ = std::move(labels);
    ds.label_vocab_ = std::move(label_vocab);
    ds.positive_class_ = positive_class;
    return ds;
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t size, Seed seed) {
    if (size > n) {
        throw Error(ErrorCode::SizeOutOfRange, "sample size " + std::to_string(size) + " exceeds population " +
                                                   std::to_string(n));
    }
    // Selection sampling (Knuth, Algorithm S): one pass, output already sorted.
    Rng rng(seed);
    std::vector<std::size_t> out;
    out.reserve(size);
    std::size_t needed = size;
    for (std::size_t i = 0; i < n && needed > 0; ++i) {
        const std::size_t remaining = n - i;
        if (rng.below(remaining) < needed) {
            out.push_back(i);
            --needed;
        }
    }
    return out;
}

EmbeddedDataset select(const EmbeddedDataset& ds, std::span<const std::size_t> indices) {
    std::vector<LabelId> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) labels[i] = ds.label(indices[i]);
    return validate_dataset(ds.vectors().select_rows(indices), std::move(labels), ds.label_vocab(),
                            ds.positive_class());
}

EmbeddedDataset subsample(const EmbeddedDataset& ds, std::size_t size, Seed seed) {
    if (size < 2 || size > ds.size()) {
        throw Error(ErrorCode::SizeOutOfRange, "subsample size " + std::to_string(size) + " outside [2, " +
                                                   std::to_string(ds.size()) + "]");
    }
    const auto indices = subsample_indices(ds.size(), size, seed);
    try {
        return select(ds, indices);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateLabels) throw;
        throw Error(ErrorCode::DegenerateLabels,
                    "subsample of size " + std::to_string(size) + " with seed " + std::to_string(seed.value) +
                        " contains a single class for the positive label; use another seed or a larger size");
    }
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "vectors of dimension " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

void CurveSeries::check() const {
    if (index.size() != values.size()) {
        throw Error(ErrorCode::InvalidArgument, "curve index and values differ in length");
    }
    for (std::size_t i = 1; i < index.size(); ++i) {
        if (index[i] <= index[i - 1]) throw Error(ErrorCode::InvalidArgument, "curve index not strictly increasing");
    }
}

double mean_area(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace repralign
