#include "repralign/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace repralign {
namespace {

// Accumulates one AP block; shared by both scoring routes so that they
// perform identical floating-point operations.
struct ApAccumulator {
    double total_positives;
    std::size_t cum_tp = 0;
    std::size_t cum_count = 0;
    double ap = 0.0;

    void add_block(std::size_t block_tp, std::size_t block_count) {
        cum_tp += block_tp;
        cum_count += block_count;
        if (block_tp == 0) return;
        ap += (static_cast<double>(block_tp) / total_positives) *
              (static_cast<double>(cum_tp) / static_cast<double>(cum_count));
    }
};

// Exact rational score positives/size; ordered by descending value.
struct Fraction {
    std::uint64_t num;
    std::uint64_t den;
};

struct DescendingFraction {
    bool operator()(const Fraction& a, const Fraction& b) const { return a.num * b.den > b.num * a.den; }
};

struct Block {
    std::size_t positives = 0;
    std::size_t count = 0;
};

class BlockIndex {
public:
    void add(std::size_t positives, std::size_t size) {
        Block& b = blocks_[Fraction{positives, size}];
        b.positives += positives;
        b.count += size;
    }

    void remove(std::size_t positives, std::size_t size) {
        auto it = blocks_.find(Fraction{positives, size});
        it->second.positives -= positives;
        it->second.count -= size;
        if (it->second.count == 0) blocks_.erase(it);
    }

    double average_precision(std::size_t total_positives) const {
        ApAccumulator acc{static_cast<double>(total_positives)};
        for (const auto& [score, block] : blocks_) acc.add_block(block.positives, block.count);
        return acc.ap;
    }

private:
    std::map<Fraction, Block, DescendingFraction> blocks_;
};

void check_partition(const PartitionView& pv, const EmbeddedDataset& ds) {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::MismatchedPartition, why); };
    if (pv.assignment.size() != ds.size()) fail("partition covers a different number of points");
    if (pv.num_labels != ds.num_labels()) fail("partition histograms use a different label set");
    if (pv.sizes.size() != pv.k || pv.histograms.size() != pv.k * pv.num_labels) fail("inconsistent cluster tables");
    std::vector<std::size_t> recount(pv.k * pv.num_labels, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (pv.assignment[i] >= pv.k) fail("assignment outside 0..k-1");
        ++recount[pv.assignment[i] * pv.num_labels + ds.label(i)];
    }
    if (recount != pv.histograms) fail("cluster histograms disagree with dataset labels");
}

AlignmentResult thas_for_label(const EmbeddedDataset& ds, const Dendrogram& dn, LabelId label) {
    if (label >= ds.num_labels()) {
        throw Error(ErrorCode::LabelOutOfRange, "label id " + std::to_string(label) + " outside vocabulary");
    }
    const std::size_t n = ds.size();
    const std::size_t positives =
        static_cast<std::size_t>(std::count(ds.labels().begin(), ds.labels().end(), label));
    if (positives == 0 || positives == n) {
        throw Error(ErrorCode::DegenerateLabels,
                    "label '" + ds.label_vocab()[label] + "' needs both members and non-members for alignment");
    }

    PartitionStream stream(dn, ds);
    BlockIndex blocks;
    for (std::size_t i = 0; i < n; ++i) blocks.add(ds.label(i) == label ? 1 : 0, 1);

    AlignmentResult result;
    result.label = label;
    result.curve.index.resize(n);
    std::iota(result.curve.index.begin(), result.curve.index.end(), std::size_t{1});
    result.curve.values.assign(n, 0.0);
    result.curve.values[n - 1] = blocks.average_precision(positives);

    // Histogram and size of each live slot, tracked here so that removals
    // can name the exact fraction they inserted.
    std::vector<std::size_t> slot_pos(n), slot_size(n, 1);
    for (std::size_t i = 0; i < n; ++i) slot_pos[i] = ds.label(i) == label ? 1 : 0;

    while (stream.advance()) {
        const std::size_t keep = stream.last_kept_slot();
        const std::size_t drop = stream.last_removed_slot();
        blocks.remove(slot_pos[keep], slot_size[keep]);
        blocks.remove(slot_pos[drop], slot_size[drop]);
        slot_pos[keep] += slot_pos[drop];
        slot_size[keep] += slot_size[drop];
        blocks.add(slot_pos[keep], slot_size[keep]);
        result.curve.values[stream.k() - 1] = blocks.average_precision(positives);
    }
    result.thas = mean_area(result.curve.values);
    result.curve.area = result.thas;
    return result;
}

}  // namespace

ScoreMatrix label_scores(const PartitionView& pv, const EmbeddedDataset& ds) {
    check_partition(pv, ds);
    ScoreMatrix out{Matrix(ds.size(), ds.num_labels())};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t c = pv.assignment[i];
        const double size = static_cast<double>(pv.sizes[c]);
        auto hist = pv.histogram(c);
        auto row = out.scores.row(i);
        for (std::size_t y = 0; y < hist.size(); ++y) row[y] = static_cast<double>(hist[y]) / size;
    }
    return out;
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> gold) {
    if (scores.size() != gold.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scores and gold labels differ in length");
    }
    const auto positives = static_cast<std::size_t>(std::count_if(gold.begin(), gold.end(), [](auto g) { return g != 0; }));
    if (positives == 0 || positives == gold.size()) {
        throw Error(ErrorCode::DegenerateLabels, "average precision needs both positives and negatives");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    ApAccumulator acc{static_cast<double>(positives)};
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start;
        std::size_t block_tp = 0;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) {
            block_tp += gold[order[end]] != 0 ? 1 : 0;
            ++end;
        }
        acc.add_block(block_tp, end - start);
        start = end;
    }
    return acc.ap;
}

double partition_alignment(const PartitionView& pv, const EmbeddedDataset& ds) {
    const ScoreMatrix sm = label_scores(pv, ds);
    std::vector<double> column(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) column[i] = sm.scores(i, ds.positive_class());
    const auto gold = ds.positive_indicator();
    return average_precision(column, gold);
}

AlignmentResult thas(const EmbeddedDataset& ds, const Dendrogram& dn) {
    return thas_for_label(ds, dn, ds.positive_class());
}

AlignmentResult thas(const EmbeddedDataset& ds, const Dendrogram& dn, LabelId label) {
    return thas_for_label(ds, dn, label);
}

MultiLabelAlignment thas_all_labels(const EmbeddedDataset& ds, const Dendrogram& dn) {
    MultiLabelAlignment out;
    std::vector<double> scores;
    for (LabelId y = 0; y < ds.num_labels(); ++y) {
        out.per_label.push_back(thas_for_label(ds, dn, y));
        scores.push_back(out.per_label.back().thas);
    }
    out.mean_thas = mean_area(scores);
    return out;
}

AveragedScore average_scores(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyRuns, "no runs to average");
    AveragedScore out;
    out.runs = values.size();
    out.mean = mean_area(values);
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
        out.spread_defined = true;
    }
    return out;
}

AveragedScore thas_averaged(std::span<const AlignmentResult> runs) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& r : runs) values.push_back(r.thas);
    return average_scores(values);
}

}  // namespace repralign
