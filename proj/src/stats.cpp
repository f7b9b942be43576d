#include "repralign/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "repralign/error.hpp"

namespace repralign {
namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 10000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return h;
}

void check_pairs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::TooFewPairs, "paired samples differ in length (" + std::to_string(x.size()) + " vs " +
                                                std::to_string(y.size()) + ")");
    }
    if (x.size() < 3) throw Error(ErrorCode::TooFewPairs, "correlation needs at least 3 pairs");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw Error(ErrorCode::NonFinite, "non-finite value in pair " + std::to_string(i)).at_row(i);
        }
    }
}

struct Centered {
    std::vector<double> values;
    double sum_squares = 0.0;
};

Centered center(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    Centered out;
    out.values.reserve(v.size());
    for (double x : v) {
        out.values.push_back(x - mean);
        out.sum_squares += (x - mean) * (x - mean);
    }
    return out;
}

double pearson_r(const Centered& cx, const Centered& cy) {
    double sxy = 0.0;
    for (std::size_t i = 0; i < cx.values.size(); ++i) sxy += cx.values[i] * cy.values[i];
    const double r = sxy / std::sqrt(cx.sum_squares * cy.sum_squares);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidArgument, "incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double nu) {
    if (!(nu > 0.0)) throw Error(ErrorCode::InvalidArgument, "degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * nu, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

double correlation_p_value(double r, std::size_t n) {
    if (n < 3) throw Error(ErrorCode::TooFewPairs, "correlation needs at least 3 pairs");
    const double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    // With t^2 = r^2 (n-2) / (1-r^2): nu / (nu + t^2) = 1 - r^2.
    const double nu = static_cast<double>(n - 2);
    return regularized_incomplete_beta(0.5 * nu, 0.5, 1.0 - r2);
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    check_pairs(x, y);
    const Centered cx = center(x);
    const Centered cy = center(y);
    if (cx.sum_squares == 0.0 || cy.sum_squares == 0.0) {
        throw Error(ErrorCode::ZeroVariance, "correlation is undefined for a constant sample");
    }
    Correlation out;
    out.r = pearson_r(cx, cy);
    out.p = correlation_p_value(out.r, x.size());
    return out;
}

std::vector<double> mid_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        // Positions start..end-1 (0-based) share rank mean((start+1)..end).
        const double rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t i = start; i < end; ++i) ranks[order[i]] = rank;
        start = end;
    }
    return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
    check_pairs(x, y);
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    const Centered cx = center(rx);
    const Centered cy = center(ry);
    if (cx.sum_squares == 0.0 || cy.sum_squares == 0.0) {
        throw Error(ErrorCode::ZeroVariance, "rank correlation is undefined for a constant sample");
    }
    Correlation out;
    out.r = pearson_r(cx, cy);
    const std::size_t n = x.size();
    if (n > 9) {
        out.p = correlation_p_value(out.r, n);
        return out;
    }
    // Exact: fraction of rank permutations at least as extreme.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const double norm = std::sqrt(cx.sum_squares * cy.sum_squares);
    const double observed = std::abs(out.r) - 1e-12;
    std::size_t extreme = 0, total = 0;
    do {
        double sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) sxy += cx.values[i] * cy.values[perm[i]];
        if (std::abs(sxy / norm) >= observed) ++extreme;
        ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p = static_cast<double>(extreme) / static_cast<double>(total);
    out.exact_p = true;
    return out;
}

void ReportMatrix::sort_by_mean_desc() {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::isnan(row_means[a]) ? -std::numeric_limits<double>::infinity() : row_means[a];
        const double mb = std::isnan(row_means[b]) ? -std::numeric_limits<double>::infinity() : row_means[b];
        if (ma != mb) return ma > mb;
        return rows[a] < rows[b];
    });
    std::vector<std::string> names;
    std::vector<double> values, means;
    for (std::size_t r : order) {
        names.push_back(rows[r]);
        means.push_back(row_means[r]);
        for (std::size_t c = 0; c < cols.size(); ++c) values.push_back(at(r, c));
    }
    rows = std::move(names);
    cells = std::move(values);
    row_means = std::move(means);
}

void ReportMatrix::reorder(const std::vector<std::string>& order) {
    auto rank_of = [&](const std::string& name) {
        auto it = std::find(order.begin(), order.end(), name);
        return static_cast<std::size_t>(it - order.begin());
    };
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rank_of(rows[a]) < rank_of(rows[b]); });
    std::vector<std::string> names;
    std::vector<double> values, means;
    for (std::size_t r : idx) {
        names.push_back(rows[r]);
        means.push_back(row_means[r]);
        for (std::size_t c = 0; c < cols.size(); ++c) values.push_back(at(r, c));
    }
    rows = std::move(names);
    cells = std::move(values);
    row_means = std::move(means);
}

std::map<std::string, ReportMatrix> build_report(std::span<const ReportCell> cells) {
    std::map<std::string, std::map<std::pair<std::string, std::string>, double>> by_metric;
    for (const auto& cell : cells) {
        auto& grid = by_metric[cell.metric];
        const auto key = std::make_pair(cell.representation, cell.dataset);
        if (!grid.emplace(key, cell.value).second) {
            throw Error(ErrorCode::DuplicateCell, "duplicate cell (" + cell.representation + ", " + cell.dataset +
                                                      ", " + cell.metric + ")");
        }
    }
    std::map<std::string, ReportMatrix> out;
    for (const auto& [metric, grid] : by_metric) {
        std::set<std::string> reps, datasets;
        for (const auto& [key, value] : grid) {
            reps.insert(key.first);
            datasets.insert(key.second);
        }
        ReportMatrix m;
        m.metric = metric;
        m.rows.assign(reps.begin(), reps.end());
        m.cols.assign(datasets.begin(), datasets.end());
        for (const auto& rep : m.rows) {
            double sum = 0.0;
            std::size_t present = 0;
            for (const auto& ds : m.cols) {
                auto it = grid.find({rep, ds});
                if (it == grid.end()) {
                    throw Error(ErrorCode::IncompleteGrid, "metric " + metric + " has no cell for (" + rep + ", " + ds +
                                                               "); mark missing cells explicitly");
                }
                m.cells.push_back(it->second);
                if (!std::isnan(it->second)) {
                    sum += it->second;
                    ++present;
                }
            }
            m.row_means.push_back(present ? sum / static_cast<double>(present)
                                          : std::numeric_limits<double>::quiet_NaN());
        }
        m.sort_by_mean_desc();
        out.emplace(metric, std::move(m));
    }
    return out;
}

}  // namespace repralign
