#pragma once

// Attention flow: a unit of attention mass starts on the query head and is
// redistributed along candidate edges by learned transition probabilities.
// Each candidate (i -> j) is scored twice with one sigmoid bilinear form --
// once against j's subgraph feature (zero when j is outside the subgraph)
// and once against j's global feature, the exploring term -- and the sum is
// softmax-normalized over i's candidates.

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "tkgc/sampler.hpp"

namespace tkgc {

template <typename T>
struct FlowState {
    using Var = typename Tape<T>::Var;

    std::vector<EntityId> locals;  // entities that may hold attention
    std::unordered_map<EntityId, int> local_row;
    Var attention;  // locals.size() x 1, sums to 1

    std::vector<double> values(const Tape<T>& tape) const {
        const auto& t = tape.value(attention);
        return std::vector<double>(t.v.begin(), t.v.end());
    }

    std::vector<FrontierNode> frontier(const Tape<T>& tape) const {
        std::vector<FrontierNode> out;
        const auto& t = tape.value(attention);
        for (size_t i = 0; i < locals.size(); ++i)
            if (t.v[i] > T(0)) out.push_back(FrontierNode{locals[i], static_cast<int>(i), static_cast<double>(t.v[i])});
        return out;
    }
};

template <typename T>
FlowState<T> init_attention(Tape<T>& tape, EntityId query_head) {
    FlowState<T> state;
    state.locals.push_back(query_head);
    state.local_row[query_head] = 0;
    state.attention = tape.constant(TensorT<T>::scalar(T(1)));
    return state;
}

template <typename T>
struct PropagationResult {
    FlowState<T> next;
    typename Tape<T>::Var edge_attention;     // candidates x 1
    std::vector<double> edge_attention_values;
};

// Transition scores + propagation in one pass over the candidate set.
// Candidates are grouped by source; every frontier node must own at least
// one candidate (its forced self-loop), which is what makes the propagation
// conserve attention mass.
template <typename T>
PropagationResult<T> propagate(Tape<T>& tape, const FlowState<T>& state, const CandidateSet& candidates,
                               const SubgraphState<T>& subgraph, typename Tape<T>::Var h, const EncodedGraph& enc,
                               const ModelParams<T>& params, const ModelConfig& cfg) {
    using Var = typename Tape<T>::Var;
    const int C = static_cast<int>(candidates.items.size());
    const int d = cfg.dim;

    for (size_t s = 0; s + 1 < candidates.seg_offsets.size(); ++s)
        if (candidates.seg_offsets[s] == candidates.seg_offsets[s + 1])
            throw std::logic_error("frontier node without candidates; self-loop inclusion is broken");

    // Member features padded with one zero row; entities outside the
    // subgraph index the pad.
    const int zero_row = subgraph.full ? -1 : static_cast<int>(subgraph.members.size());
    Var g_padded = subgraph.full
                       ? subgraph.g
                       : tape.concat_rows({subgraph.g, tape.constant(TensorT<T>(1, d))});
    auto g_row = [&](EntityId v) {
        int r = subgraph.row_of(v);
        return r >= 0 ? r : zero_row;
    };

    auto src_g = std::make_shared<IndexVec>(C);
    auto dst_g = std::make_shared<IndexVec>(C);
    auto dst_h = std::make_shared<IndexVec>(C);
    auto rel = std::make_shared<IndexVec>(C);
    auto buck = std::make_shared<IndexVec>(C);
    auto src_att = std::make_shared<IndexVec>(C);
    std::vector<int> seg_src_ids(C);
    for (int i = 0; i < C; ++i) {
        const Candidate& c = candidates.items[i];
        (*src_g)[i] = g_row(c.src);
        (*dst_g)[i] = g_row(c.dst);
        (*dst_h)[i] = c.dst;
        (*rel)[i] = enc.graph->edges[c.edge_id].relation;
        (*buck)[i] = enc.bucket[c.edge_id];
        src_att->at(i) = state.local_row.at(c.src);
    }
    int seg = 0;
    for (int i = 0; i < C; ++i) {
        while (i >= candidates.seg_offsets[seg + 1]) ++seg;
        seg_src_ids[i] = seg;
    }

    Var rel_e = tape.gather_rows(tape.param(params.store, params.subgraph.rel), rel);
    Var disp_e = tape.gather_rows(tape.param(params.store, params.subgraph.disp), buck);
    Var rt = tape.add(rel_e, disp_e);

    Var queries = tape.matmul(tape.gather_rows(g_padded, src_g), tape.param(params.store, params.flow_wq));
    Var wk = tape.param(params.store, params.flow_wk);
    Var subgraph_term =
        tape.sigmoid(tape.rowwise_dot(queries, tape.matmul(tape.add(tape.gather_rows(g_padded, dst_g), rt), wk)));
    Var exploring_term =
        tape.sigmoid(tape.rowwise_dot(queries, tape.matmul(tape.add(tape.gather_rows(h, dst_h), rt), wk)));
    Var logits = tape.add(subgraph_term, exploring_term);

    auto by_src = std::make_shared<const kernels::SegmentIndex>(
        kernels::SegmentIndex::from_ids(seg_src_ids, static_cast<int>(candidates.frontier.size())));
    Var transition = tape.segment_softmax(logits, by_src);

    Var mass_in = tape.gather_rows(state.attention, src_att);
    Var edge_att = tape.mul(transition, mass_in);

    // The next support is exactly the set of candidate targets.
    FlowState<T> next;
    std::vector<int> dst_local_ids(C);
    for (int i = 0; i < C; ++i) {
        EntityId v = candidates.items[i].dst;
        auto it = next.local_row.find(v);
        if (it == next.local_row.end()) {
            it = next.local_row.emplace(v, static_cast<int>(next.locals.size())).first;
            next.locals.push_back(v);
        }
        dst_local_ids[i] = it->second;
    }
    auto by_dst = std::make_shared<const kernels::SegmentIndex>(
        kernels::SegmentIndex::from_ids(dst_local_ids, static_cast<int>(next.locals.size())));
    next.attention = tape.segment_sum(edge_att, by_dst);

    PropagationResult<T> result;
    const auto& ev = tape.value(edge_att);
    result.edge_attention_values.assign(ev.v.begin(), ev.v.end());

    // Conservation is structural; a violation means the candidate set missed
    // an attention-holding node.
    double mass_before = 0, mass_after = 0;
    for (T x : tape.value(state.attention).v) mass_before += static_cast<double>(x);
    for (double x : result.edge_attention_values) {
        if (x < 0) throw std::logic_error("negative edge attention");
        mass_after += x;
    }
    if (std::abs(mass_after - mass_before) > 1e-6)
        throw std::logic_error("attention mass not conserved: " + std::to_string(mass_before) + " -> " +
                               std::to_string(mass_after));

    result.next = std::move(next);
    result.edge_attention = edge_att;
    return result;
}

// L = -log(a_answer + eps); a constant when the answer never entered the
// support (no gradient, counted separately as the unreached rate).
template <typename T>
typename Tape<T>::Var attention_loss(Tape<T>& tape, const FlowState<T>& state, EntityId answer,
                                     const ModelConfig& cfg) {
    auto it = state.local_row.find(answer);
    T eps = static_cast<T>(cfg.loss_epsilon);
    if (it == state.local_row.end())
        return tape.constant(TensorT<T>::scalar(-std::log(eps)));
    typename Tape<T>::Var picked = tape.gather_rows(state.attention, IndexVec{it->second});
    return tape.scale(tape.log(tape.add(picked, tape.constant(TensorT<T>::scalar(eps)))), T(-1));
}

}  // namespace tkgc
