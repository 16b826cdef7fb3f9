#include "semsplat/semantic_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace semsplat {

MaskNode MaskNode::create(int frame_index, int mask_id, int label, const VecX& feature, RleMask pixel_mask) {
    const double norm = feature.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw InvalidArgument("mask " + std::to_string(mask_id) + " in frame " + std::to_string(frame_index) +
                              " has a zero or non-finite feature");
    }
    pixel_mask.validate();
    if (pixel_mask.pixel_count() == 0) {
        throw InvalidArgument("mask " + std::to_string(mask_id) + " in frame " + std::to_string(frame_index) +
                              " is empty");
    }
    return {frame_index, mask_id, label, feature / norm, std::move(pixel_mask)};
}

MaskNode MaskNode::from_record(const FeatureRecord& record) {
    const VecX feature = Eigen::Map<const VecX>(record.embedding.data(), static_cast<Eigen::Index>(record.embedding.size()));
    return create(record.frame_index, record.mask_id, record.label, feature, record.mask);
}

bool ConsistencyGraph::has_edge(std::size_t i, std::size_t j) const {
    if (i >= adjacency.size()) return false;
    return std::binary_search(adjacency[i].begin(), adjacency[i].end(), j);
}

ConsistencyGraph build_graph(std::vector<MaskNode> nodes, double tau, int window) {
    if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in (0,1]");
    if (window < 1) throw InvalidArgument("window must be >= 1");
    ConsistencyGraph g;
    g.nodes = std::move(nodes);
    g.tau = tau;
    g.window = window;
    g.adjacency.resize(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
            const auto& a = g.nodes[i];
            const auto& b = g.nodes[j];
            if (a.frame_index == b.frame_index || std::abs(a.frame_index - b.frame_index) > window) continue;
            if (a.feature.size() != b.feature.size()) throw InvalidArgument("mask features differ in dimension");
            if (a.feature.dot(b.feature) >= tau) {
                g.edges.emplace_back(i, j);
                g.adjacency[i].push_back(j);
                g.adjacency[j].push_back(i);
            }
        }
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

double consistency_score(const ConsistencyGraph& graph, std::size_t node) {
    if (node >= graph.nodes.size()) throw InvalidArgument("node index out of range");
    const auto& adj = graph.adjacency[node];
    if (adj.empty()) return 1.0;
    const int label = graph.nodes[node].label;
    const auto agree = std::count_if(adj.begin(), adj.end(), [&](std::size_t j) { return graph.nodes[j].label == label; });
    return static_cast<double>(agree) / static_cast<double>(adj.size());
}

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

ClusterResult cluster(const ConsistencyGraph& graph, double score_threshold) {
    if (!(score_threshold >= 0.0 && score_threshold < 1.0)) {
        throw InvalidArgument("cluster score threshold must lie in [0,1)");
    }
    const std::size_t n = graph.nodes.size();
    ClusterResult result;
    result.score_threshold = score_threshold;
    result.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.scores[i] = consistency_score(graph, i);

    DisjointSets sets(n);
    for (const auto& [i, j] : graph.edges) {
        if (result.scores[i] > score_threshold && result.scores[j] > score_threshold) sets.unite(i, j);
    }

    result.cluster_of.assign(n, -1);
    std::vector<int> root_cluster(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = sets.find(i);
        if (root_cluster[root] < 0) {
            root_cluster[root] = static_cast<int>(result.members.size());
            result.members.emplace_back();
        }
        result.cluster_of[i] = root_cluster[root];
        result.members[root_cluster[root]].push_back(i);
    }

    for (const auto& members : result.members) {
        std::map<int, int> votes;
        for (auto i : members) ++votes[graph.nodes[i].label];
        int best_label = votes.begin()->first;
        int best_count = 0;
        for (const auto& [label, count] : votes) {
            if (count > best_count) {
                best_label = label;
                best_count = count;
            }
        }
        result.canonical_label.push_back(best_label);
    }
    return result;
}

namespace {

/// Highest-scoring member carrying the canonical label; ties go to the lower index.
std::size_t canonical_member(const ClusterResult& result, const ConsistencyGraph& graph, int c) {
    std::size_t best = result.members[c].front();
    double best_score = -1.0;
    for (auto i : result.members[c]) {
        if (graph.nodes[i].label != result.canonical_label[c]) continue;
        if (result.scores[i] > best_score) {
            best = i;
            best_score = result.scores[i];
        }
    }
    return best;
}

}  // namespace

std::vector<int> relabel_targets(const ClusterResult& result, const ConsistencyGraph& graph) {
    const std::size_t n = graph.nodes.size();
    if (result.cluster_of.size() != n) throw InvalidArgument("cluster result does not match the graph");
    std::vector<std::size_t> canon(result.cluster_count());
    for (std::size_t c = 0; c < canon.size(); ++c) canon[c] = canonical_member(result, graph, static_cast<int>(c));

    std::vector<int> targets(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = result.cluster_of[i];
        const auto& node = graph.nodes[i];
        if (result.members[c].size() > 1) {
            const int label = result.canonical_label[c];
            if (node.label != label && node.feature.dot(graph.nodes[canon[c]].feature) > graph.tau) targets[i] = label;
            continue;
        }
        if (result.scores[i] > result.score_threshold) continue;  // genuine singleton

        int best_cluster = -1;
        double best_sim = graph.tau;
        for (auto j : graph.adjacency[i]) {
            const int cj = result.cluster_of[j];
            if (result.members[cj].size() < 2) continue;
            const double sim = node.feature.dot(graph.nodes[canon[cj]].feature);
            if (sim > best_sim || (sim == best_sim && best_cluster >= 0 && cj < best_cluster)) {
                best_sim = sim;
                best_cluster = cj;
            }
        }
        if (best_cluster >= 0 && result.canonical_label[best_cluster] != node.label) {
            targets[i] = result.canonical_label[best_cluster];
        }
    }
    return targets;
}

std::map<int, LabelImage> relabel_frames(const ClusterResult& result, const ConsistencyGraph& graph,
                                         std::map<int, LabelImage> frames) {
    const auto targets = relabel_targets(result, graph);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0) continue;
        const auto& node = graph.nodes[i];
        auto it = frames.find(node.frame_index);
        if (it == frames.end()) continue;
        LabelImage& img = it->second;
        if (node.pixel_mask.width != img.width() || node.pixel_mask.height != img.height()) {
            throw InvalidArgument("mask " + std::to_string(node.mask_id) + " of frame " +
                                  std::to_string(node.frame_index) + " does not fit the label image");
        }
        const auto label = static_cast<std::uint16_t>(targets[i]);
        node.pixel_mask.for_each_pixel([&](int u, int v) { img(u, v) = label; });
    }
    return frames;
}

std::string cluster_report(const ClusterResult& result, const ConsistencyGraph& graph) {
    std::ostringstream out;
    for (std::size_t c = 0; c < result.cluster_count(); ++c) {
        int lo = graph.nodes[result.members[c].front()].frame_index;
        int hi = lo;
        for (auto i : result.members[c]) {
            lo = std::min(lo, graph.nodes[i].frame_index);
            hi = std::max(hi, graph.nodes[i].frame_index);
        }
        out << "cluster " << c << " size " << result.members[c].size() << " label " << result.canonical_label[c]
            << " frames " << lo << "-" << hi << '\n';
    }
    return out.str();
}

double frame_consistency_loss(const ImageF& splatted, const LabelImage& updated, ImageF* grad, double scale) {
    if (!splatted.same_extent(updated)) throw InvalidArgument("splatted and updated frames differ in size");
    const int sdim = splatted.channels();
    if (grad && !grad->same_shape(splatted)) *grad = ImageF(splatted.width(), splatted.height(), sdim);
    double total = 0.0;
    for (int v = 0; v < splatted.height(); ++v) {
        for (int u = 0; u < splatted.width(); ++u) {
            const int label = updated(u, v);
            if (label >= sdim) {
                throw InvalidArgument("label " + std::to_string(label) + " exceeds semantic_dim " + std::to_string(sdim));
            }
            for (int c = 0; c < sdim; ++c) {
                const double r = splatted(u, v, c) - (c == label ? 1.0 : 0.0);
                total += std::abs(r);
                if (grad) (*grad)(u, v, c) += scale * static_cast<double>((r > 0.0) - (r < 0.0));
            }
        }
    }
    return total;
}

double semantic_consistency_loss(const std::vector<ImageF>& splatted, const std::vector<LabelImage>& updated) {
    if (splatted.size() != updated.size()) throw InvalidArgument("splatted and updated frame counts differ");
    double total = 0.0;
    for (std::size_t f = 0; f < splatted.size(); ++f) total += frame_consistency_loss(splatted[f], updated[f]);
    return total;
}

}  // namespace semsplat
