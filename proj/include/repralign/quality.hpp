#pragma once

#include <cstddef>

#include "repralign/core.hpp"
#include "repralign/hierclust.hpp"

namespace repralign {

// Davies-Bouldin index of a partition (q = 1, p = 2):
//   DBI = (1/k) sum_i max_{j != i} (s_i + s_j) / d_ij
// with s_i the mean Euclidean distance of cluster i's members to its
// centroid and d_ij the Euclidean distance between centroids. A pair with
// coincident centroids contributes +inf when s_i + s_j > 0 and 0 when both
// clusters have zero spread. Throws KTooSmall for k < 2.
double dbi(const PartitionView& pv, const EmbeddedDataset& ds);

struct QualityResult {
    CurveSeries curve;  // k = 2, 2 + stride, ... <= n; may hold +inf entries
    double adbi = 0.0;  // mean of the finite curve values
    std::size_t stride = 1;
    std::size_t excluded_levels = 0;  // levels with an infinite DBI
};

struct DbiCurveOptions {
    std::size_t stride = 1;
    unsigned workers = 0;
};

// DBI along the dendrogram. Centroid distances live in a condensed matrix
// updated per merge, and each cluster keeps its worst ratio and partner, so
// a row is rescanned only when its partner takes part in a merge. Workers
// only speed up the initial fill.
QualityResult dbi_curve(const EmbeddedDataset& ds, const Dendrogram& dn, const DbiCurveOptions& options = {});

}  // namespace repralign
