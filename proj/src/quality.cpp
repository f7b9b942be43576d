#include "repralign/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace repralign {
namespace {

double pair_ratio(double spread_i, double spread_j, double distance) {
    const double spread = spread_i + spread_j;
    if (distance > 0.0) return spread / distance;
    return spread > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

double mean_distance_to(std::span<const double> centroid, const std::vector<std::size_t>& members,
                        const EmbeddedDataset& ds) {
    double sum = 0.0;
    for (std::size_t i : members) sum += std::sqrt(squared_euclidean(ds.point(i), centroid));
    return sum / static_cast<double>(members.size());
}

}  // namespace

double dbi(const PartitionView& pv, const EmbeddedDataset& ds) {
    if (pv.k < 2) throw Error(ErrorCode::KTooSmall, "DBI needs at least 2 clusters, got " + std::to_string(pv.k));
    if (pv.assignment.size() != ds.size() || pv.centroids.rows() != pv.k || pv.centroids.cols() != ds.dim()) {
        throw Error(ErrorCode::MismatchedPartition, "partition does not match the dataset");
    }
    std::vector<double> spread(pv.k, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t c = pv.assignment[i];
        spread[c] += std::sqrt(squared_euclidean(ds.point(i), pv.centroids.row(c)));
    }
    for (std::size_t c = 0; c < pv.k; ++c) spread[c] /= static_cast<double>(pv.sizes[c]);

    double total = 0.0;
    for (std::size_t i = 0; i < pv.k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < pv.k; ++j) {
            if (j == i) continue;
            const double d = std::sqrt(squared_euclidean(pv.centroids.row(i), pv.centroids.row(j)));
            worst = std::max(worst, pair_ratio(spread[i], spread[j], d));
        }
        total += worst;
    }
    return total / static_cast<double>(pv.k);
}

QualityResult dbi_curve(const EmbeddedDataset& ds, const Dendrogram& dn, const DbiCurveOptions& options) {
    if (options.stride < 1) throw Error(ErrorCode::InvalidArgument, "k stride must be >= 1");
    const std::size_t n = ds.size();
    PartitionStream stream(dn, ds);

    QualityResult result;
    result.stride = options.stride;
    if (n < 2) return result;

    // Centroid distances between slots, condensed upper triangle.
    auto index = [n](std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    };
    std::vector<double> distance(n * (n - 1) / 2);
    parallel_for(n - 1, options.workers, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            distance[index(i, j)] = std::sqrt(squared_euclidean(ds.point(i), ds.point(j)));
        }
    });
    std::vector<double> spread(n, 0.0);
    std::vector<std::size_t> active(n);
    for (std::size_t i = 0; i < n; ++i) active[i] = i;

    // Each row's worst ratio and the slot attaining it. After a merge only
    // the pairs involving the kept slot change, so a row is rescanned only
    // when its partner was one of the merged slots.
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<double> worst(n, 0.0);
    std::vector<std::size_t> partner(n, kNone);
    auto rescan = [&](std::size_t i) {
        double w = 0.0;
        std::size_t p = kNone;
        for (std::size_t j : active) {
            if (j == i) continue;
            const double r = pair_ratio(spread[i], spread[j], distance[index(i, j)]);
            if (r > w) {
                w = r;
                p = j;
            }
        }
        worst[i] = w;
        partner[i] = p;
    };
    auto level_value = [&] {
        double total = 0.0;
        for (std::size_t i : active) total += worst[i];
        return total / static_cast<double>(active.size());
    };
    auto wanted = [&](std::size_t k) { return k >= 2 && (k - 2) % options.stride == 0; };

    std::vector<double> levels_k_desc;
    std::vector<std::size_t> ks_desc;
    parallel_for(n, options.workers, [&](std::size_t i) { rescan(i); });
    if (wanted(n)) {
        ks_desc.push_back(n);
        levels_k_desc.push_back(level_value());
    }
    while (stream.k() > 2 && stream.advance()) {
        const std::size_t keep = stream.last_kept_slot();
        const std::size_t drop = stream.last_removed_slot();
        active.erase(std::lower_bound(active.begin(), active.end(), drop));
        spread[keep] = mean_distance_to(stream.centroid(keep), stream.members(keep), ds);
        auto centroid = stream.centroid(keep);
        for (std::size_t j : active) {
            if (j == keep) continue;
            distance[index(keep, j)] = std::sqrt(squared_euclidean(centroid, stream.centroid(j)));
        }
        rescan(keep);
        for (std::size_t i : active) {
            if (i == keep) continue;
            if (partner[i] == keep || partner[i] == drop) {
                rescan(i);
                continue;
            }
            const double r = pair_ratio(spread[i], spread[keep], distance[index(i, keep)]);
            if (r > worst[i]) {
                worst[i] = r;
                partner[i] = keep;
            }
        }
        if (wanted(stream.k())) {
            ks_desc.push_back(stream.k());
            levels_k_desc.push_back(level_value());
        }
    }

    result.curve.index.assign(ks_desc.rbegin(), ks_desc.rend());
    result.curve.values.assign(levels_k_desc.rbegin(), levels_k_desc.rend());
    std::vector<double> finite;
    for (double v : result.curve.values) {
        if (std::isfinite(v)) {
            finite.push_back(v);
        } else {
            ++result.excluded_levels;
        }
    }
    result.adbi = finite.empty() ? std::numeric_limits<double>::infinity() : mean_area(finite);
    result.curve.area = result.adbi;
    return result;
}

}  // namespace repralign
