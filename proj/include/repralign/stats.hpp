#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace repralign {

struct Correlation {
    double r = 0.0;
    double p = 1.0;  // two-sided
    bool exact_p = false;  // permutation p-value rather than the t approximation
};

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double regularized_incomplete_beta(double a, double b, double x);

// CDF of Student's t with nu degrees of freedom.
double student_t_cdf(double t, double nu);

// Two-sided p-value of a correlation coefficient r over n pairs via
// t = r sqrt((n-2)/(1-r^2)) against Student-t(n-2).
double correlation_p_value(double r, std::size_t n);

// Sample Pearson correlation. Errors: TooFewPairs (< 3 or unequal
// lengths), ZeroVariance.
Correlation pearson(std::span<const double> x, std::span<const double> y);

// Mid-ranks (1-based; ties share the mean of their positions).
std::vector<double> mid_ranks(std::span<const double> values);

// Spearman's rank correlation: Pearson on mid-ranks. For n <= 9 the p-value
// is exact over all n! rank permutations, otherwise the t approximation.
Correlation spearman(std::span<const double> x, std::span<const double> y);

struct ReportCell {
    std::string representation;
    std::string dataset;
    std::string metric;
    double value = 0.0;  // NaN marks an explicitly missing cell
};

// One metric's representation x dataset table.
struct ReportMatrix {
    std::string metric;
    std::vector<std::string> rows;  // representations, by descending row mean
    std::vector<std::string> cols;  // datasets, lexicographic
    std::vector<double> cells;      // rows x cols, row-major; NaN = missing
    std::vector<double> row_means;  // mean over present cells

    double at(std::size_t r, std::size_t c) const { return cells[r * cols.size() + c]; }
    // Reorders rows by descending row mean (ties by name).
    void sort_by_mean_desc();
    // Reorders rows to follow `order`; names not in `order` go last.
    void reorder(const std::vector<std::string>& order);
};

// Builds one matrix per metric from long-format cells. The result does not
// depend on the input order. Errors: DuplicateCell; IncompleteGrid when a
// (representation, dataset) pair is neither given nor marked missing.
std::map<std::string, ReportMatrix> build_report(std::span<const ReportCell> cells);

}  // namespace repralign
