#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semsplat/dataset_io.hpp"
#include "semsplat/image.hpp"
#include "semsplat/mask_rle.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

inline constexpr double kDefaultTau = 0.8;
inline constexpr int kDefaultWindow = 8;
/// Nodes scoring at or below this lose all their edges before clustering.
inline constexpr double kScoreThreshold = 2.0 / 3.0;

struct MaskNode {
    int frame_index = 0;
    int mask_id = 0;
    int label = 0;
    VecX feature;  // unit length
    RleMask pixel_mask;

    /// Normalises `feature`. Throws InvalidArgument on a zero feature or an empty mask.
    static MaskNode create(int frame_index, int mask_id, int label, const VecX& feature, RleMask pixel_mask);
    static MaskNode from_record(const FeatureRecord& record);
};

struct ConsistencyGraph {
    std::vector<MaskNode> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j, sorted
    std::vector<std::vector<std::size_t>> adjacency;         // ascending neighbour indices
    double tau = kDefaultTau;
    int window = kDefaultWindow;

    bool has_edge(std::size_t i, std::size_t j) const;
};

ConsistencyGraph build_graph(std::vector<MaskNode> nodes, double tau = kDefaultTau, int window = kDefaultWindow);

/// Fraction of graph neighbours sharing the node's label; 1 for an isolated node.
double consistency_score(const ConsistencyGraph& graph, std::size_t node);

struct ClusterResult {
    std::vector<int> cluster_of;       // node -> cluster id
    std::vector<int> canonical_label;  // cluster id -> class id
    std::vector<std::vector<std::size_t>> members;
    std::vector<double> scores;        // node -> consistency score
    double score_threshold = kScoreThreshold;

    std::size_t cluster_count() const { return canonical_label.size(); }
};

/// Drops the edges of low-scoring nodes and takes connected components. Cluster ids
/// follow the smallest member index.
ClusterResult cluster(const ConsistencyGraph& graph, double score_threshold = kScoreThreshold);

/// Label each node should carry after consistency correction, or -1 to leave it alone.
/// Members of a multi-node cluster take its canonical label; a node whose edges were
/// pruned joins the neighbouring cluster whose canonical member it resembles most.
/// Either way the feature similarity to the canonical member must exceed tau.
std::vector<int> relabel_targets(const ClusterResult& result, const ConsistencyGraph& graph);

/// Writes the corrected labels into the mask regions of the affected frames, keyed by
/// frame index. Frames without an entry are skipped.
std::map<int, LabelImage> relabel_frames(const ClusterResult& result, const ConsistencyGraph& graph,
                                         std::map<int, LabelImage> frames);

/// One line per cluster: id, size, canonical label and frame span.
std::string cluster_report(const ClusterResult& result, const ConsistencyGraph& graph);

/// Sum over pixels and channels of |splatted - one_hot(updated)|. When `grad` is given,
/// scale * sign(residual) is added to it.
double frame_consistency_loss(const ImageF& splatted, const LabelImage& updated, ImageF* grad = nullptr,
                              double scale = 1.0);
double semantic_consistency_loss(const std::vector<ImageF>& splatted, const std::vector<LabelImage>& updated);

}  // namespace semsplat
