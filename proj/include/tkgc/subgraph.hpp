#pragma once

// Query-relevant subgraph: grows monotonically as the sampler admits edges,
// and carries per-member features g updated once per decoding step. Member
// features start from the global features h; entities outside the subgraph
// read as zero wherever g is consulted.

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tkgc/encoder.hpp"

namespace tkgc {

template <typename T>
struct SubgraphState {
    using Var = typename Tape<T>::Var;

    std::vector<int> members;  // entity ids, insertion order
    std::unordered_map<int, int> member_row;
    struct SubEdge {
        int edge_id;
        int src_row, dst_row;
    };
    std::vector<SubEdge> edges;
    std::unordered_set<int> edge_set;
    std::unordered_map<int, std::vector<int>> out_edges;  // entity -> member subgraph edges

    Var g;           // members.size() x d
    bool full = false;  // no_subgraph mode: every entity is a member

    int row_of(int entity) const {
        if (full) return entity;
        auto it = member_row.find(entity);
        return it == member_row.end() ? -1 : it->second;
    }

    bool contains_edge(int edge_id) const { return full || edge_set.count(edge_id) > 0; }

    int size() const { return full ? -1 : static_cast<int>(members.size()); }
};

template <typename T>
SubgraphState<T> init_subgraph(Tape<T>& tape, typename Tape<T>::Var h, const EncodedGraph& enc, EntityId query_head,
                               const ModelConfig& cfg) {
    SubgraphState<T> state;
    if (cfg.no_subgraph) {
        state.full = true;
        const TemporalKG& graph = *enc.graph;
        state.members.resize(graph.num_entities);
        for (int v = 0; v < graph.num_entities; ++v) state.members[v] = v;
        for (int e = 0; e < static_cast<int>(graph.edges.size()); ++e)
            state.edges.push_back({e, graph.edges[e].subject, graph.edges[e].object});
        state.g = h;
        return state;
    }
    state.members.push_back(query_head);
    state.member_row[query_head] = 0;
    state.g = tape.gather_rows(h, IndexVec{query_head});
    return state;
}

// q = Wc * LeakyReLU(W_present (h_head + rel_query)); the "present" weight is
// the subgraph encoder's, matching the shared-message parameterization.
template <typename T>
typename Tape<T>::Var query_context(Tape<T>& tape, typename Tape<T>::Var h, const QueryInstance& query,
                                    const ModelParams<T>& params, const ModelConfig& cfg) {
    using Var = typename Tape<T>::Var;
    Var head = tape.gather_rows(h, IndexVec{query.head});
    Var rel = tape.gather_rows(tape.param(params.store, params.subgraph.rel), IndexVec{query.relation});
    Var pre = tape.matmul(tape.add(head, rel), tape.param(params.store, params.subgraph.sign_weight(0)));
    return tape.matmul(tape.leaky_relu(pre, static_cast<T>(cfg.leaky_slope)),
                       tape.param(params.store, params.subgraph_wc));
}

// Admit edges (by graph edge id) and any new endpoint entities; new members'
// g rows start from their h rows.
template <typename T>
void add_subgraph_edges(Tape<T>& tape, SubgraphState<T>& state, typename Tape<T>::Var h, const EncodedGraph& enc,
                        const std::vector<int>& edge_ids) {
    if (state.full) return;
    const TemporalKG& graph = *enc.graph;
    std::vector<int> new_members;
    auto row_for = [&](int entity) {
        auto it = state.member_row.find(entity);
        if (it != state.member_row.end()) return it->second;
        int row = static_cast<int>(state.members.size());
        state.members.push_back(entity);
        state.member_row[entity] = row;
        new_members.push_back(entity);
        return row;
    };
    for (int e : edge_ids) {
        if (state.edge_set.count(e)) continue;
        int src = row_for(graph.edges[e].subject);
        int dst = row_for(graph.edges[e].object);
        state.edges.push_back({e, src, dst});
        state.edge_set.insert(e);
        state.out_edges[graph.edges[e].subject].push_back(e);
    }
    if (!new_members.empty())
        state.g = tape.concat_rows({state.g, tape.gather_rows(h, new_members)});
}

// One subgraph-encoder step: multi-head aggregation over incoming subgraph
// edges (falling back to the current g for members without any), then the
// query context gets concatenated and projected back to d.
template <typename T>
void subgraph_update(Tape<T>& tape, SubgraphState<T>& state, typename Tape<T>::Var q, const EncodedGraph& enc,
                     const ModelParams<T>& params, const ModelConfig& cfg) {
    using Var = typename Tape<T>::Var;
    const int n = static_cast<int>(state.members.size());
    const int E = static_cast<int>(state.edges.size());

    GnnEdgeBatch batch;
    auto src = std::make_shared<IndexVec>(E);
    auto dst = std::make_shared<IndexVec>(E);
    auto rel = std::make_shared<IndexVec>(E);
    auto buck = std::make_shared<IndexVec>(E);
    std::vector<int> signs(E), dst_of(E);
    for (int i = 0; i < E; ++i) {
        const auto& se = state.edges[i];
        (*src)[i] = se.src_row;
        (*dst)[i] = se.dst_row;
        (*rel)[i] = enc.graph->edges[se.edge_id].relation;
        (*buck)[i] = enc.bucket[se.edge_id];
        signs[i] = enc.sign[se.edge_id];
        dst_of[i] = se.dst_row;
    }
    batch.src_rows = src;
    batch.dst_rows = dst;
    batch.rel_ids = rel;
    batch.bucket_ids = buck;
    partition_by_sign(signs, batch);
    batch.by_dst = std::make_shared<const kernels::SegmentIndex>(kernels::SegmentIndex::from_ids(dst_of, n));

    Var aggregated = gnn_layer(tape, state.g, batch, params.subgraph, params, cfg);

    // Fallback mask: rows with at least one incoming subgraph edge take the
    // aggregate, the rest keep their current g.
    TensorT<T> mask(n, 1), inv(n, 1);
    for (int r = 0; r < n; ++r) {
        bool has_in = batch.by_dst->segment_size(r) > 0;
        mask.v[r] = has_in ? T(1) : T(0);
        inv.v[r] = has_in ? T(0) : T(1);
    }
    Var merged = tape.add(tape.scale_rows(aggregated, tape.constant(std::move(mask))),
                          tape.scale_rows(state.g, tape.constant(std::move(inv))));

    Var with_query = tape.concat_cols({merged, tape.repeat_row(q, n)});
    state.g = tape.matmul(with_query, tape.param(params.store, params.subgraph_wg));
}

}  // namespace tkgc
