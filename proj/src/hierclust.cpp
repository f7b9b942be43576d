#include "repralign/hierclust.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace repralign {
namespace {

// Merge recorded in execution order; child ids are leaves (< n) or n + the
// execution index of an earlier merge.
struct ExecMerge {
    std::size_t child_a;
    std::size_t child_b;
    double cost;
    std::size_t size;
};

// Renumbers execution-order merges into a cost-sorted dendrogram. Costs are
// first raised to at least their children's costs, which only moves values
// that rounding pushed below a child; stable sorting then keeps every child
// ahead of its parent.
Dendrogram build_dendrogram(std::size_t n, const std::vector<ExecMerge>& exec) {
    std::vector<double> cost(exec.size());
    for (std::size_t m = 0; m < exec.size(); ++m) {
        double c = exec[m].cost;
        for (std::size_t child : {exec[m].child_a, exec[m].child_b}) {
            if (child >= n) c = std::max(c, cost[child - n]);
        }
        cost[m] = c;
    }
    std::vector<std::size_t> order(exec.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });
    std::vector<std::size_t> rank(exec.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;

    auto remap = [&](std::size_t id) { return id < n ? id : n + rank[id - n]; };
    Dendrogram dn;
    dn.leaves = n;
    dn.merges.reserve(exec.size());
    for (std::size_t m : order) {
        const std::size_t a = remap(exec[m].child_a);
        const std::size_t b = remap(exec[m].child_b);
        dn.merges.push_back(Merge{std::min(a, b), std::max(a, b), cost[m], exec[m].size});
    }
    return dn;
}

class CondensedMatrix {
public:
    explicit CondensedMatrix(std::size_t n) : n_(n), data_(n * (n - 1) / 2) {}

    double& at(std::size_t i, std::size_t j) { return data_[index(i, j)]; }
    double at(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }

    // Entries (i, j) for j > i are contiguous.
    double* row_tail(std::size_t i) { return data_.data() + index(i, i + 1); }

private:
    std::size_t index(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return i * n_ - i * (i + 1) / 2 + (j - i - 1);
    }

    std::size_t n_;
    std::vector<double> data_;
};

double ward_cost(std::size_t size_a, std::span<const double> mean_a, std::size_t size_b,
                 std::span<const double> mean_b) {
    const double na = static_cast<double>(size_a);
    const double nb = static_cast<double>(size_b);
    return na * nb / (na + nb) * squared_euclidean(mean_a, mean_b);
}

void combine_means(std::span<double> into, std::size_t size_into, std::span<const double> other,
                   std::size_t size_other) {
    const double na = static_cast<double>(size_into);
    const double nb = static_cast<double>(size_other);
    const double total = na + nb;
    for (std::size_t j = 0; j < into.size(); ++j) into[j] = (na * into[j] + nb * other[j]) / total;
}

}  // namespace

void Dendrogram::check() const {
    if (leaves < 1) throw Error(ErrorCode::MismatchedDendrogram, "dendrogram without leaves");
    if (merges.size() != leaves - 1) {
        throw Error(ErrorCode::MismatchedDendrogram, "dendrogram over " + std::to_string(leaves) + " leaves has " +
                                                         std::to_string(merges.size()) + " merges");
    }
    std::vector<std::size_t> size(2 * leaves - 1, 0);
    std::vector<std::uint8_t> used(2 * leaves - 1, 0);
    std::fill(size.begin(), size.begin() + static_cast<std::ptrdiff_t>(leaves), 1);
    double previous = 0.0;
    for (std::size_t m = 0; m < merges.size(); ++m) {
        const Merge& mg = merges[m];
        const std::size_t limit = leaves + m;
        auto fail = [&](const std::string& why) {
            throw Error(ErrorCode::MismatchedDendrogram, "merge " + std::to_string(m) + ": " + why);
        };
        if (mg.left >= limit || mg.right >= limit) fail("references a cluster that does not exist yet");
        if (mg.left == mg.right) fail("merges a cluster with itself");
        if (used[mg.left] || used[mg.right]) fail("reuses a cluster that was already merged");
        if (!(mg.cost >= 0.0) || !std::isfinite(mg.cost)) fail("cost must be finite and non-negative");
        if (mg.cost < previous) fail("costs must be non-decreasing");
        if (mg.size != size[mg.left] + size[mg.right]) fail("size disagrees with its children");
        used[mg.left] = used[mg.right] = 1;
        size[limit] = mg.size;
        previous = mg.cost;
    }
    if (!merges.empty() && merges.back().size != leaves) {
        throw Error(ErrorCode::MismatchedDendrogram, "final merge does not cover every leaf");
    }
}

Dendrogram ward_cluster(const EmbeddedDataset& ds, const WardOptions& options) {
    const std::size_t n = ds.size();

    std::vector<std::size_t> size(n, 1);
    std::vector<std::size_t> node(n);
    std::iota(node.begin(), node.end(), 0);
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), 0);

    // Storage for one of the two cost back-ends.
    std::unique_ptr<CondensedMatrix> costs;
    Matrix means;
    if (options.low_memory) {
        means = ds.vectors();
    } else {
        costs = std::make_unique<CondensedMatrix>(n);
        parallel_for(n - 1, options.workers, [&](std::size_t i) {
            double* out = costs->row_tail(i);
            auto xi = ds.point(i);
            for (std::size_t j = i + 1; j < n; ++j) out[j - i - 1] = 0.5 * squared_euclidean(xi, ds.point(j));
        });
    }
    auto cost_between = [&](std::size_t a, std::size_t b) {
        if (costs) return costs->at(a, b);
        return ward_cost(size[a], means.row(a), size[b], means.row(b));
    };

    std::vector<ExecMerge> exec;
    exec.reserve(n - 1);
    std::vector<std::size_t> chain;
    chain.reserve(n);

    while (active.size() > 1) {
        if (chain.empty()) chain.push_back(active.front());
        const std::size_t tip = chain.back();

        // Scanning ascending slots with a strict comparison realizes the
        // (cost, min key, max key) total order for a fixed tip.
        std::size_t best = n;
        double best_cost = 0.0;
        for (std::size_t c : active) {
            if (c == tip) continue;
            const double cost = cost_between(tip, c);
            if (best == n || cost < best_cost) {
                best = c;
                best_cost = cost;
            }
        }

        if (chain.size() < 2 || chain[chain.size() - 2] != best) {
            chain.push_back(best);
            continue;
        }

        chain.pop_back();
        chain.pop_back();
        const std::size_t lo = std::min(tip, best);
        const std::size_t hi = std::max(tip, best);
        const std::size_t merged_size = size[lo] + size[hi];
        exec.push_back(ExecMerge{node[lo], node[hi], best_cost, merged_size});

        const auto hi_pos = std::lower_bound(active.begin(), active.end(), hi);
        active.erase(hi_pos);

        if (costs) {
            // Lance-Williams update for Ward on variance-increase costs.
            const double na = static_cast<double>(size[lo]);
            const double nb = static_cast<double>(size[hi]);
            const double ab = best_cost;
            for (std::size_t c : active) {
                if (c == lo) continue;
                const double nc = static_cast<double>(size[c]);
                double& ac = costs->at(lo, c);
                const double bc = costs->at(hi, c);
                ac = ((na + nc) * ac + (nb + nc) * bc - nc * ab) / (na + nb + nc);
            }
        } else {
            combine_means(means.row(lo), size[lo], means.row(hi), size[hi]);
        }
        size[lo] = merged_size;
        node[lo] = n + exec.size() - 1;
    }

    return build_dendrogram(n, exec);
}

Dendrogram naive_agglomerative(const EmbeddedDataset& ds) {
    const std::size_t n = ds.size();
    if (n > 512) {
        throw Error(ErrorCode::TooLargeForOracle, "naive agglomeration is limited to 512 points, got " +
                                                      std::to_string(n));
    }
    const std::size_t d = ds.dim();
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    std::vector<std::size_t> node(n);
    std::iota(node.begin(), node.end(), 0);
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), 0);

    std::vector<ExecMerge> exec;
    Matrix centroid(n, d);
    while (active.size() > 1) {
        for (std::size_t slot : active) {
            auto c = centroid.row(slot);
            std::fill(c.begin(), c.end(), 0.0);
            for (std::size_t i : members[slot]) {
                auto x = ds.point(i);
                for (std::size_t j = 0; j < d; ++j) c[j] += x[j];
            }
            for (auto& v : c) v /= static_cast<double>(members[slot].size());
        }
        std::size_t best_a = n, best_b = n;
        double best_cost = 0.0;
        for (std::size_t ia = 0; ia < active.size(); ++ia) {
            for (std::size_t ib = ia + 1; ib < active.size(); ++ib) {
                const std::size_t a = active[ia], b = active[ib];
                const double cost =
                    ward_cost(members[a].size(), centroid.row(a), members[b].size(), centroid.row(b));
                if (best_a == n || cost < best_cost) {
                    best_a = a;
                    best_b = b;
                    best_cost = cost;
                }
            }
        }
        const std::size_t size = members[best_a].size() + members[best_b].size();
        exec.push_back(ExecMerge{node[best_a], node[best_b], best_cost, size});
        members[best_a].insert(members[best_a].end(), members[best_b].begin(), members[best_b].end());
        members[best_b].clear();
        node[best_a] = n + exec.size() - 1;
        active.erase(std::find(active.begin(), active.end(), best_b));
    }
    return build_dendrogram(n, exec);
}

PartitionStream::PartitionStream(const Dendrogram& dn, const EmbeddedDataset& ds)
    : dn_(&dn), ds_(&ds), n_(ds.size()), num_labels_(ds.num_labels()), k_(ds.size()) {
    if (dn.leaves != ds.size()) {
        throw Error(ErrorCode::MismatchedDendrogram, "dendrogram has " + std::to_string(dn.leaves) +
                                                         " leaves but dataset has " + std::to_string(ds.size()) +
                                                         " points");
    }
    dn.check();
    slot_of_node_.assign(2 * n_ - 1, 0);
    std::iota(slot_of_node_.begin(), slot_of_node_.begin() + static_cast<std::ptrdiff_t>(n_), 0);
    active_.assign(n_, 1);
    sizes_.assign(n_, 1);
    histograms_.assign(n_ * num_labels_, 0);
    for (std::size_t i = 0; i < n_; ++i) histograms_[i * num_labels_ + ds.label(i)] = 1;
    centroids_ = ds.vectors();
    sq_dev_.assign(n_, 0.0);
    members_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) members_[i] = {i};
}

bool PartitionStream::advance() {
    if (applied_ >= dn_->merges.size()) return false;
    const Merge& mg = dn_->merges[applied_];
    const std::size_t sa = slot_of_node_[mg.left];
    const std::size_t sb = slot_of_node_[mg.right];
    const std::size_t keep = std::min(sa, sb);
    const std::size_t drop = std::max(sa, sb);

    sq_dev_[keep] = sq_dev_[sa] + sq_dev_[sb] +
                    ward_cost(sizes_[keep], centroids_.row(keep), sizes_[drop], centroids_.row(drop));
    combine_means(centroids_.row(keep), sizes_[keep], centroids_.row(drop), sizes_[drop]);
    sizes_[keep] += sizes_[drop];
    for (std::size_t y = 0; y < num_labels_; ++y) {
        histograms_[keep * num_labels_ + y] += histograms_[drop * num_labels_ + y];
    }
    auto& into = members_[keep];
    auto& from = members_[drop];
    if (into.size() < from.size()) std::swap(into, from);
    into.insert(into.end(), from.begin(), from.end());
    from.clear();
    from.shrink_to_fit();

    active_[drop] = 0;
    slot_of_node_[n_ + applied_] = keep;
    last_kept_ = keep;
    last_removed_ = drop;
    ++applied_;
    --k_;
    return true;
}

std::vector<std::size_t> PartitionStream::active_slots() const {
    std::vector<std::size_t> out;
    out.reserve(k_);
    for (std::size_t s = 0; s < n_; ++s) {
        if (active_[s]) out.push_back(s);
    }
    return out;
}

PartitionView PartitionStream::snapshot() const {
    PartitionView pv;
    pv.k = k_;
    pv.num_labels = num_labels_;
    pv.assignment.assign(n_, 0);
    pv.sizes.reserve(k_);
    pv.histograms.reserve(k_ * num_labels_);
    pv.centroids = Matrix(k_, ds_->dim());
    pv.sq_deviation.reserve(k_);
    std::size_t cluster = 0;
    for (std::size_t s = 0; s < n_; ++s) {
        if (!active_[s]) continue;
        for (std::size_t i : members_[s]) pv.assignment[i] = cluster;
        pv.sizes.push_back(sizes_[s]);
        auto h = histogram(s);
        pv.histograms.insert(pv.histograms.end(), h.begin(), h.end());
        auto c = centroids_.row(s);
        std::copy(c.begin(), c.end(), pv.centroids.row(cluster).begin());
        pv.sq_deviation.push_back(sq_dev_[s]);
        ++cluster;
    }
    return pv;
}

void partitions(const Dendrogram& dn, const EmbeddedDataset& ds,
                const std::function<void(const PartitionView&)>& visit) {
    PartitionStream stream(dn, ds);
    visit(stream.snapshot());
    while (stream.advance()) visit(stream.snapshot());
}

PartitionView cut(const Dendrogram& dn, const EmbeddedDataset& ds, std::size_t k) {
    if (k < 1 || k > ds.size()) {
        throw Error(ErrorCode::KOutOfRange, "k = " + std::to_string(k) + " outside [1, " +
                                                std::to_string(ds.size()) + "]");
    }
    PartitionStream stream(dn, ds);
    while (stream.k() > k) stream.advance();
    return stream.snapshot();
}

}  // namespace repralign
