#pragma once

// Test-only reference implementations. They follow the textbook
// definitions directly and share no code with the library beyond the data
// types, so agreement between the two is evidence of correctness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "repralign/core.hpp"
#include "repralign/hierclust.hpp"

namespace oracle {

using repralign::EmbeddedDataset;
using repralign::LabelId;
using repralign::Matrix;
using repralign::Rng;

// Random points with `num_labels` classes; points 0 and 1 carry classes 0
// and 1 so the positive class (0) is present and not universal. With
// grid > 0 coordinates are small integers, which produces ties.
inline EmbeddedDataset random_dataset(Rng& rng, std::size_t n, std::size_t d, std::size_t num_labels = 2,
                                      int grid = 0) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            m(i, j) = grid > 0 ? static_cast<double>(rng.below(static_cast<std::uint64_t>(grid))) : rng.normal();
        }
    }
    std::vector<LabelId> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<LabelId>(rng.below(num_labels));
    labels[0] = 0;
    labels[1] = 1;
    std::vector<std::string> vocab;
    for (std::size_t l = 0; l < num_labels; ++l) vocab.push_back("c" + std::to_string(l));
    return repralign::validate_dataset(std::move(m), std::move(labels), std::move(vocab), 0);
}

// Gaussian blobs, one per label, centers spaced `gap` apart on axis 0.
inline EmbeddedDataset blobs(Rng& rng, std::size_t n, std::size_t d, double gap) {
    Matrix m(n, d);
    std::vector<LabelId> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<LabelId>(i % 2);
        for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.normal() + (j == 0 ? gap * labels[i] : 0.0);
    }
    return repralign::validate_dataset(std::move(m), std::move(labels), {"pos", "neg"}, 0);
}

inline double total_ssd(const EmbeddedDataset& ds) {
    std::vector<double> mean(ds.dim(), 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) mean[j] += ds.point(i)[j];
    }
    for (double& v : mean) v /= static_cast<double>(ds.size());
    double s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) s += (ds.point(i)[j] - mean[j]) * (ds.point(i)[j] - mean[j]);
    }
    return s;
}

// AP by enumerating every distinct score as a threshold: predict positive
// when score >= t and accumulate (recall gain) * precision.
inline double threshold_ap(const std::vector<double>& scores, const std::vector<std::uint8_t>& gold) {
    std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
    const double positives = static_cast<double>(std::count(gold.begin(), gold.end(), 1));
    double ap = 0.0, prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0, predicted = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                ++predicted;
                tp += gold[i];
            }
        }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    return ap;
}

// Partition of the leaves after `merges` steps, replayed with a plain
// union-find over the dendrogram. Returns a root id per point.
inline std::vector<std::size_t> replay(const repralign::Dendrogram& dn, std::size_t merges) {
    const std::size_t n = dn.leaves;
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x];
        return x;
    };
    for (std::size_t m = 0; m < merges; ++m) {
        parent[find(dn.merges[m].left)] = n + m;
        parent[find(dn.merges[m].right)] = n + m;
    }
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = find(i);
    return out;
}

// a(P) from the definition: every point gets its cluster's positive share.
inline double alignment_of(const EmbeddedDataset& ds, const std::vector<std::size_t>& cluster_of, LabelId label) {
    std::vector<double> pos(2 * ds.size(), 0.0), size(2 * ds.size(), 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        size[cluster_of[i]] += 1;
        pos[cluster_of[i]] += ds.label(i) == label ? 1 : 0;
    }
    std::vector<double> scores(ds.size());
    std::vector<std::uint8_t> gold(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        scores[i] = pos[cluster_of[i]] / size[cluster_of[i]];
        gold[i] = ds.label(i) == label ? 1 : 0;
    }
    return threshold_ap(scores, gold);
}

// Alignment curve for k = 1..n and its mean, level by level.
inline std::vector<double> brute_curve(const EmbeddedDataset& ds, const repralign::Dendrogram& dn, LabelId label) {
    const std::size_t n = ds.size();
    std::vector<double> curve(n);
    for (std::size_t k = 1; k <= n; ++k) curve[k - 1] = alignment_of(ds, replay(dn, n - k), label);
    return curve;
}

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// DBI straight from its definition for an arbitrary assignment.
inline double direct_dbi(const EmbeddedDataset& ds, const std::vector<std::size_t>& assign, std::size_t k) {
    const std::size_t d = ds.dim();
    std::vector<std::vector<double>> centroid(k, std::vector<double>(d, 0.0));
    std::vector<double> count(k, 0.0), spread(k, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        count[assign[i]] += 1;
        for (std::size_t j = 0; j < d; ++j) centroid[assign[i]][j] += ds.point(i)[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (double& v : centroid[c]) v /= count[c];
    }
    auto dist = [&](std::span<const double> a, const std::vector<double>& b) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        return std::sqrt(s);
    };
    for (std::size_t i = 0; i < ds.size(); ++i) spread[assign[i]] += dist(ds.point(i), centroid[assign[i]]) / count[assign[i]];
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double dij = dist(centroid[i], centroid[j]);
            const double s = spread[i] + spread[j];
            const double r = dij > 0 ? s / dij : (s > 0 ? INFINITY : 0.0);
            worst = std::max(worst, r);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

// A PartitionView built from scratch for an arbitrary assignment, with
// canonical cluster ids (ordered by smallest member).
inline repralign::PartitionView view_of(const EmbeddedDataset& ds, const std::vector<std::size_t>& raw) {
    std::vector<std::size_t> remap(raw.size(), SIZE_MAX);
    std::size_t k = 0;
    repralign::PartitionView pv;
    pv.assignment.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (remap[raw[i]] == SIZE_MAX) remap[raw[i]] = k++;
        pv.assignment[i] = remap[raw[i]];
    }
    pv.k = k;
    pv.num_labels = ds.num_labels();
    pv.sizes.assign(k, 0);
    pv.histograms.assign(k * pv.num_labels, 0);
    pv.centroids = Matrix(k, ds.dim());
    pv.sq_deviation.assign(k, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t c = pv.assignment[i];
        ++pv.sizes[c];
        ++pv.histograms[c * pv.num_labels + ds.label(i)];
        for (std::size_t j = 0; j < ds.dim(); ++j) pv.centroids(c, j) += ds.point(i)[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < ds.dim(); ++j) pv.centroids(c, j) /= static_cast<double>(pv.sizes[c]);
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        pv.sq_deviation[pv.assignment[i]] += repralign::squared_euclidean(ds.point(i), pv.centroids.row(pv.assignment[i]));
    }
    return pv;
}

inline bool close(double a, double b, double rel, double abs_floor = 1e-12) {
    return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace oracle
