#pragma once

// Incremental candidate-edge assembly driving where attention may flow.
// Per step: the x highest-attention nodes (core nodes) contribute y
// uniformly sampled outgoing edges each; every nonzero-attention node
// contributes its existing subgraph outgoing edges and, always, its
// self-loop. The z newly sampled edges with the highest edge attention are
// then admitted into the subgraph.
//
// Gradients never flow through any of these discrete choices; parameters
// learn only through the features computed on whatever was selected.

#include <algorithm>
#include <limits>
#include <unordered_set>
#include <vector>

#include "tkgc/rng.hpp"
#include "tkgc/subgraph.hpp"
#include "tkgc/tkg.hpp"

namespace tkgc {

struct Candidate {
    int edge_id = -1;
    EntityId src = 0, dst = 0;
    bool newly_sampled = false;
    bool self_loop = false;
};

// Candidates grouped by source: all candidates sharing a frontier node are
// contiguous, which is exactly the softmax segmentation the flow needs.
struct CandidateSet {
    std::vector<Candidate> items;
    std::vector<int> frontier;        // source entity per segment
    std::vector<int> seg_offsets;     // frontier.size() + 1
};

struct FrontierNode {
    EntityId entity;
    int local_row;  // row in the attention vector
    double attention;
};

// Up to x nodes by descending attention, zeros excluded, ties by ascending
// entity id. Also reports the attention gap at the cutoff (selection margin).
inline std::vector<EntityId> select_core_nodes(std::vector<FrontierNode> frontier, int x,
                                               double* cutoff_margin = nullptr) {
    std::sort(frontier.begin(), frontier.end(), [](const FrontierNode& a, const FrontierNode& b) {
        if (a.attention != b.attention) return a.attention > b.attention;
        return a.entity < b.entity;
    });
    if (cutoff_margin) {
        *cutoff_margin = std::numeric_limits<double>::infinity();
        if (static_cast<int>(frontier.size()) > x)
            *cutoff_margin = frontier[x - 1].attention - frontier[x].attention;
    }
    std::vector<EntityId> cores;
    for (const FrontierNode& f : frontier) {
        if (static_cast<int>(cores.size()) >= x) break;
        cores.push_back(f.entity);
    }
    return cores;
}

// Assembles this step's candidate edges. `frontier` must hold every node
// with nonzero attention; iteration is by ascending entity id so the result
// is independent of map ordering. With no_subgraph set, every outgoing edge
// of every frontier node is a candidate and nothing counts as newly sampled.
template <typename T>
CandidateSet sample_candidate_edges(const TemporalKG& graph, const std::vector<EntityId>& cores,
                                    std::vector<FrontierNode> frontier, const SubgraphState<T>& subgraph, int y,
                                    rng::Stream& stream, bool exhaustive = false) {
    std::unordered_set<EntityId> core_set(cores.begin(), cores.end());

    // Core nodes sample in selection order so the RNG stream is stable.
    std::unordered_map<EntityId, std::vector<int>> sampled;
    if (!exhaustive) {
        for (EntityId c : cores) {
            int pool = graph.out_degree_no_loop(c);
            std::vector<int> picks = stream.sample_without_replacement(pool, std::min(pool, y));
            auto& lst = sampled[c];
            for (int p : picks) lst.push_back(graph.out_adj[c][p]);
            std::sort(lst.begin(), lst.end());
        }
    }

    std::sort(frontier.begin(), frontier.end(),
              [](const FrontierNode& a, const FrontierNode& b) { return a.entity < b.entity; });

    CandidateSet out;
    for (const FrontierNode& f : frontier) {
        out.frontier.push_back(f.entity);
        out.seg_offsets.push_back(static_cast<int>(out.items.size()));
        std::unordered_set<int> seen;
        auto emit = [&](int edge_id, bool newly) {
            if (!seen.insert(edge_id).second) return;
            out.items.push_back(Candidate{edge_id, f.entity, graph.edges[edge_id].object, newly,
                                          graph.is_self_loop(edge_id)});
        };
        emit(graph.self_loop_edge(f.entity), false);
        if (exhaustive) {
            for (int e : graph.out_adj[f.entity]) emit(e, false);
            continue;
        }
        auto it = subgraph.out_edges.find(f.entity);
        if (it != subgraph.out_edges.end())
            for (int e : it->second) emit(e, false);
        if (core_set.count(f.entity))
            for (int e : sampled[f.entity]) emit(e, !subgraph.contains_edge(e));
    }
    out.seg_offsets.push_back(static_cast<int>(out.items.size()));
    return out;
}

// Joint top-z over newly sampled non-self-loop candidates by edge attention,
// ties resolved toward the lower edge id. Returns the chosen edge ids plus
// the attention gap at the cutoff.
inline std::vector<int> choose_edges_to_add(const CandidateSet& candidates, const std::vector<double>& edge_attention,
                                            int z, double* cutoff_margin = nullptr) {
    std::vector<std::pair<double, int>> ranked;  // (-attention used via comparator)
    for (size_t i = 0; i < candidates.items.size(); ++i) {
        const Candidate& c = candidates.items[i];
        if (c.newly_sampled && !c.self_loop) ranked.push_back({edge_attention[i], c.edge_id});
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (cutoff_margin) {
        *cutoff_margin = std::numeric_limits<double>::infinity();
        if (static_cast<int>(ranked.size()) > z) *cutoff_margin = ranked[z - 1].first - ranked[z].first;
    }
    std::vector<int> chosen;
    for (const auto& [att, edge] : ranked) {
        if (static_cast<int>(chosen.size()) >= z) break;
        chosen.push_back(edge);
    }
    return chosen;
}

}  // namespace tkgc
