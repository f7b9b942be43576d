#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "repralign/core.hpp"

namespace repralign {

// One agglomeration step. Leaves have ids 0..n-1; the cluster produced by
// merge m has id n+m. left < right by id.
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double cost = 0.0;  // Ward variance increase |A||B|/(|A|+|B|) * ||mu_A - mu_B||^2
    std::size_t size = 0;

    friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;

    // Verifies structure: n-1 merges, every id used once as a child and only
    // after it exists, consistent sizes, non-negative non-decreasing costs.
    // Throws MismatchedDendrogram.
    void check() const;

    friend bool operator==(const Dendrogram&, const Dendrogram&) = default;
};

struct WardOptions {
    // Recompute Ward costs from centroids instead of storing the condensed
    // n(n-1)/2 cost matrix. O(n) memory beyond the data, O(n^2 d) time.
    bool low_memory = false;
    unsigned workers = 0;
};

// Ward agglomerative clustering via the nearest-neighbor chain, O(n^2).
// Equal-cost candidates are broken by the smaller (min, max) pair of
// cluster keys, where a cluster's key is its smallest member index.
Dendrogram ward_cluster(const EmbeddedDataset& ds, const WardOptions& options = {});

// Globally greedy agglomeration recomputing every Ward cost from raw points
// at each step, O(n^3 d). Test oracle for ward_cluster; n <= 512.
Dendrogram naive_agglomerative(const EmbeddedDataset& ds);

// Flat partition of the dataset into k clusters. Cluster ids are canonical:
// clusters are numbered by their smallest member index, so two views of the
// same partition compare equal regardless of how they were produced.
struct PartitionView {
    std::size_t k = 0;
    std::size_t num_labels = 0;
    std::vector<std::size_t> assignment;  // n entries in 0..k-1
    std::vector<std::size_t> sizes;       // k
    std::vector<std::size_t> histograms;  // k x num_labels, row-major
    Matrix centroids;                     // k x d
    std::vector<double> sq_deviation;     // k, sum of squared distances to centroid

    std::span<const std::size_t> histogram(std::size_t cluster) const {
        return {histograms.data() + cluster * num_labels, num_labels};
    }
};

// Replays a dendrogram from the leaves (k = n) toward the root (k = 1),
// maintaining per-cluster size, label histogram, centroid and squared
// deviation incrementally in O(|Y| + d) per merge, plus member lists.
// Clusters live in slots; a cluster's slot is its smallest member index.
class PartitionStream {
public:
    // Throws MismatchedDendrogram if the dendrogram does not fit ds.
    PartitionStream(const Dendrogram& dn, const EmbeddedDataset& ds);

    std::size_t k() const noexcept { return k_; }
    std::size_t merges_applied() const noexcept { return applied_; }

    // Applies the next merge. Returns false once the root is reached.
    bool advance();

    // After advance(): slot that absorbed the merge and the slot that was
    // retired.
    std::size_t last_kept_slot() const noexcept { return last_kept_; }
    std::size_t last_removed_slot() const noexcept { return last_removed_; }

    bool active(std::size_t slot) const { return active_[slot] != 0; }
    // Active slots in ascending order.
    std::vector<std::size_t> active_slots() const;

    std::size_t size(std::size_t slot) const { return sizes_[slot]; }
    std::span<const std::size_t> histogram(std::size_t slot) const {
        return {histograms_.data() + slot * num_labels_, num_labels_};
    }
    std::span<const double> centroid(std::size_t slot) const { return centroids_.row(slot); }
    double sq_deviation(std::size_t slot) const { return sq_dev_[slot]; }
    const std::vector<std::size_t>& members(std::size_t slot) const { return members_[slot]; }

    PartitionView snapshot() const;

private:
    const Dendrogram* dn_;
    const EmbeddedDataset* ds_;
    std::size_t n_ = 0;
    std::size_t num_labels_ = 0;
    std::size_t k_ = 0;
    std::size_t applied_ = 0;
    std::size_t last_kept_ = 0;
    std::size_t last_removed_ = 0;
    std::vector<std::size_t> slot_of_node_;
    std::vector<std::uint8_t> active_;
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> histograms_;
    Matrix centroids_;
    std::vector<double> sq_dev_;
    std::vector<std::vector<std::size_t>> members_;
};

// Calls visit for every level k = n, n-1, ..., 1 with a full snapshot.
// O(n) per level; meant for moderate n and for tests.
void partitions(const Dendrogram& dn, const EmbeddedDataset& ds,
                const std::function<void(const PartitionView&)>& visit);

// The partition with exactly k clusters. Throws KOutOfRange.
PartitionView cut(const Dendrogram& dn, const EmbeddedDataset& ds, std::size_t k);

}  // namespace repralign
