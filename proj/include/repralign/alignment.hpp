#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "repralign/core.hpp"
#include "repralign/hierclust.hpp"

namespace repralign {

// n x |Y| label-probability scores: each point gets its cluster's label
// frequencies.
struct ScoreMatrix {
    Matrix scores;
};

// Scores s(x, y) = #[y in C(x)] / |C(x)|. Throws MismatchedPartition if pv
// does not describe a partition of ds.
ScoreMatrix label_scores(const PartitionView& pv, const EmbeddedDataset& ds);

// Tie-grouped average precision: points are ranked by descending score,
// equal scores form one block, and AP = sum over blocks of
// (recall gained in the block) * (precision at the end of the block).
// gold[i] != 0 marks a positive. Throws DegenerateLabels without both
// positives and negatives, DimensionMismatch on length mismatch.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> gold);

// AP of the positive-class column of label_scores(pv, ds).
double partition_alignment(const PartitionView& pv, const EmbeddedDataset& ds);

struct AlignmentResult {
    LabelId label = 0;
    CurveSeries curve;  // k = 1..n, a(P_k); area is the mean
    double thas = 0.0;
};

// Alignment curve over every dendrogram level for ds.positive_class() and
// its mean. Per-level scoring works on cluster aggregates: the block
// structure of the ranking is kept in an ordered map keyed by the exact
// rational score, updated in O(log k) per merge.
AlignmentResult thas(const EmbeddedDataset& ds, const Dendrogram& dn);

// Same, scoring `label` as the positive class.
AlignmentResult thas(const EmbeddedDataset& ds, const Dendrogram& dn, LabelId label);

struct MultiLabelAlignment {
    std::vector<AlignmentResult> per_label;
    double mean_thas = 0.0;
};

// One result per label (in vocabulary order) and the mean of their scores.
// Every label must occur in ds without being universal.
MultiLabelAlignment thas_all_labels(const EmbeddedDataset& ds, const Dendrogram& dn);

struct AveragedScore {
    double mean = 0.0;
    double stddev = 0.0;       // sample standard deviation; 0 for a single run
    bool spread_defined = false;  // false when only one run was given
    std::size_t runs = 0;
};

// Mean and sample standard deviation of THAS over subsample seeds.
// Throws EmptyRuns.
AveragedScore thas_averaged(std::span<const AlignmentResult> runs);

// Mean/sample-std over plain values with the same conventions.
AveragedScore average_scores(std::span<const double> values);

}  // namespace repralign
