#pragma once

// Displacement-aware attention GNN. One message/aggregation scheme serves
// both encoders: a per-edge message W_sign(dt) * (feat_src + rel + disp)
// followed by multi-head softmax attention over each node's incoming edges.
//
// The per-sign weight is picked by partitioning edges into past / present /
// future groups per query time, transforming each group with its own matrix,
// and permuting rows back into edge order. With no_displacement set, all
// edges share one weight and the displacement table is indexed by raw
// timestamp instead.

#include <array>
#include <cassert>
#include <memory>
#include <vector>

#include "tkgc/model.hpp"
#include "tkgc/tape.hpp"
#include "tkgc/tkg.hpp"

namespace tkgc {

// Edge-level inputs of one GNN pass. Row indices refer to whatever feature
// matrix the caller aggregates over (entity table for the global encoder,
// subgraph member rows for the subgraph encoder).
struct GnnEdgeBatch {
    IndexVecPtr src_rows;
    IndexVecPtr dst_rows;
    IndexVecPtr rel_ids;
    IndexVecPtr bucket_ids;
    std::array<IndexVecPtr, 3> by_sign;  // edge positions grouped past/present/future
    IndexVecPtr unpartition;             // edge position -> row in concat(by_sign)
    SegmentPtr by_dst;                   // edges grouped by destination row

    int num_edges() const { return src_rows ? static_cast<int>(src_rows->size()) : 0; }
};

// Builds the sign partition arrays for a set of per-edge signs (-1/0/+1).
inline void partition_by_sign(const std::vector<int>& signs, GnnEdgeBatch& batch) {
    auto parts = std::array<std::vector<int>, 3>{};
    for (int e = 0; e < static_cast<int>(signs.size()); ++e) parts[signs[e] + 1].push_back(e);
    auto unpart = std::make_shared<IndexVec>(signs.size());
    int row = 0;
    for (const auto& part : parts)
        for (int e : part) (*unpart)[e] = row++;
    for (int s = 0; s < 3; ++s) batch.by_sign[s] = std::make_shared<const IndexVec>(std::move(parts[s]));
    batch.unpartition = unpart;
}

// Query-time context over the full graph: per-edge displacement buckets and
// signs, plus the ready-made edge batch for the global encoder. Shared by
// every query in a batch with the same timestamp.
struct EncodedGraph {
    const TemporalKG* graph = nullptr;
    TimeId t_query = 0;
    std::vector<int> bucket;  // per edge id
    std::vector<int> sign;    // per edge id, -1/0/+1 (all 0 when no_displacement)
    GnnEdgeBatch full;
};

inline EncodedGraph build_encoded_graph(const TemporalKG& graph, TimeId t_query, const ModelConfig& cfg) {
    EncodedGraph enc;
    enc.graph = &graph;
    enc.t_query = t_query;
    const int E = static_cast<int>(graph.edges.size());
    enc.bucket.resize(E);
    enc.sign.resize(E);
    const int64_t max_bucket = cfg.disp_bucket_count(graph) - 1;
    for (int e = 0; e < E; ++e) {
        if (cfg.no_displacement) {
            enc.bucket[e] = graph.is_self_loop(e) ? t_query : static_cast<int>(graph.edges[e].time);
            enc.sign[e] = 0;
        } else {
            Displacement d = graph.edge_displacement(e, t_query, max_bucket);
            enc.bucket[e] = static_cast<int>(d.magnitude);
            enc.sign[e] = d.sign;
        }
    }

    auto src = std::make_shared<IndexVec>(E);
    auto dst = std::make_shared<IndexVec>(E);
    auto rel = std::make_shared<IndexVec>(E);
    auto buck = std::make_shared<IndexVec>(E);
    std::vector<int> dst_of(E);
    for (int e = 0; e < E; ++e) {
        (*src)[e] = graph.edges[e].subject;
        (*dst)[e] = graph.edges[e].object;
        (*rel)[e] = graph.edges[e].relation;
        (*buck)[e] = enc.bucket[e];
        dst_of[e] = graph.edges[e].object;
    }
    enc.full.src_rows = src;
    enc.full.dst_rows = dst;
    enc.full.rel_ids = rel;
    enc.full.bucket_ids = buck;
    partition_by_sign(enc.sign, enc.full);
    enc.full.by_dst =
        std::make_shared<const kernels::SegmentIndex>(kernels::SegmentIndex::from_ids(dst_of, graph.num_entities));
    return enc;
}

// One message-passing layer. `feats` provides both endpoints' features
// (dst rows double as attention queries). Nodes with no incoming edges get a
// zero row; the subgraph encoder replaces those with a fallback afterwards,
// the global encoder never sees one thanks to self-loops.
template <typename T>
typename Tape<T>::Var gnn_layer(Tape<T>& tape, typename Tape<T>::Var feats, const GnnEdgeBatch& batch,
                                const GnnLayerIds& ids, const ModelParams<T>& params, const ModelConfig& cfg,
                                std::vector<typename Tape<T>::Var>* attention_out = nullptr) {
    using Var = typename Tape<T>::Var;
    const int p = cfg.head_dim();

    Var rel_tab = tape.param(params.store, ids.rel);
    Var disp_tab = tape.param(params.store, ids.disp);

    Var x = tape.add(tape.add(tape.gather_rows(feats, batch.src_rows), tape.gather_rows(rel_tab, batch.rel_ids)),
                     tape.gather_rows(disp_tab, batch.bucket_ids));

    std::vector<Var> parts;
    for (int s = 0; s < 3; ++s) {
        if (batch.by_sign[s]->empty() && !(s == 1 && batch.num_edges() == 0)) continue;
        Var w = tape.param(params.store, ids.sign_weight(s - 1));
        parts.push_back(tape.matmul(tape.gather_rows(x, batch.by_sign[s]), w));
    }
    Var messages = tape.gather_rows(parts.size() == 1 ? parts[0] : tape.concat_rows(parts), batch.unpartition);

    Var q_all = tape.gather_rows(tape.matmul(feats, tape.param(params.store, ids.wq)), batch.dst_rows);

    std::vector<Var> heads;
    for (int k = 0; k < cfg.heads; ++k) {
        Var mk = tape.slice_cols(messages, k * p, p);
        Var keys = tape.matmul(mk, tape.param(params.store, ids.wk[k]));
        Var logits = tape.leaky_relu(tape.rowwise_dot(tape.slice_cols(q_all, k * p, p), keys),
                                     static_cast<T>(cfg.leaky_slope));
        Var att = tape.segment_softmax(logits, batch.by_dst);
        if (attention_out) attention_out->push_back(att);
        heads.push_back(tape.segment_sum(tape.scale_rows(mk, att), batch.by_dst));
    }
    return tape.concat_cols(heads);
}

// Query-conditioned features for every entity: encoder_layers rounds of
// message passing starting from the raw entity embeddings.
template <typename T>
typename Tape<T>::Var global_encode(Tape<T>& tape, const EncodedGraph& enc, const ModelParams<T>& params,
                                    const ModelConfig& cfg,
                                    std::vector<typename Tape<T>::Var>* attention_out = nullptr) {
    typename Tape<T>::Var h = tape.param(params.store, params.entity);
    if (cfg.no_global_encoder) return h;
    for (const GnnLayerIds& layer : params.global_layers) {
        assert([&] {
            for (int s = 0; s < enc.full.by_dst->num_segments; ++s)
                if (enc.full.by_dst->segment_size(s) == 0) return false;
            return true;
        }() && "self-loop augmentation guarantees every node an incoming edge");
        h = gnn_layer(tape, h, enc.full, layer, params, cfg, attention_out);
    }
    return h;
}

}  // namespace tkgc
