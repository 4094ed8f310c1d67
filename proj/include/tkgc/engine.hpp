#pragma once

// One forward pass: global encode, then T rounds of
//   core selection -> candidate sampling -> transition + propagation ->
//   top-z subgraph expansion -> subgraph feature update,
// with the subgraph encoder also run once up front on the single-node
// subgraph. The prediction is the argmax of the final attention.

#include <limits>
#include <vector>

#include "tkgc/flow.hpp"

namespace tkgc {

struct TraceStep {
    std::vector<Candidate> candidates;
    std::vector<double> edge_attention;  // aligned with candidates
    std::vector<EntityId> cores;
    std::vector<int> inserted_edges;
    std::vector<std::pair<EntityId, double>> node_attention;  // after this step
};

struct ForwardTrace {
    std::vector<TraceStep> steps;
    EntityId predicted = -1;
};

template <typename T>
struct QueryRun {
    std::vector<EntityId> support;       // entities with attention rows
    std::vector<double> attention;      // aligned with support
    EntityId predicted = -1;
    double answer_attention = 0;
    bool answer_reached = false;
    typename Tape<T>::Var loss;
    typename Tape<T>::Var final_attention;
    double min_margin = std::numeric_limits<double>::infinity();  // discrete-selection gap
};

// `h` comes from global_encode and may be shared by every query with the
// same timestamp on this tape. The sampler seed fixes all stochastic
// choices, so reruns are bit-identical.
template <typename T>
QueryRun<T> run_query(Tape<T>& tape, const EncodedGraph& enc, const ModelParams<T>& params, const ModelConfig& cfg,
                      typename Tape<T>::Var h, const QueryInstance& query, uint64_t sampler_seed,
                      bool build_loss = true, ForwardTrace* trace = nullptr) {
    rng::Stream stream(sampler_seed);
    QueryRun<T> run;

    SubgraphState<T> subgraph = init_subgraph(tape, h, enc, query.head, cfg);
    typename Tape<T>::Var q = query_context(tape, h, query, params, cfg);
    subgraph_update(tape, subgraph, q, enc, params, cfg);

    FlowState<T> flow = init_attention<T>(tape, query.head);

    for (int t = 1; t <= cfg.steps; ++t) {
        auto frontier = flow.frontier(tape);

        double core_margin = std::numeric_limits<double>::infinity();
        std::vector<EntityId> cores =
            cfg.no_subgraph ? std::vector<EntityId>{}
                            : select_core_nodes(frontier, cfg.sampler.core_nodes, &core_margin);
        run.min_margin = std::min(run.min_margin, core_margin);

        CandidateSet candidates = sample_candidate_edges(*enc.graph, cores, frontier, subgraph,
                                                         cfg.sampler.edges_per_core, stream, cfg.no_subgraph);

        PropagationResult<T> prop = propagate(tape, flow, candidates, subgraph, h, enc, params, cfg);

        std::vector<int> inserted;
        if (!cfg.no_subgraph) {
            double insert_margin = std::numeric_limits<double>::infinity();
            inserted = choose_edges_to_add(candidates, prop.edge_attention_values, cfg.sampler.edges_per_step,
                                           &insert_margin);
            run.min_margin = std::min(run.min_margin, insert_margin);
            add_subgraph_edges(tape, subgraph, h, enc, inserted);
        }

        flow = std::move(prop.next);
        subgraph_update(tape, subgraph, q, enc, params, cfg);

        if (trace) {
            TraceStep step;
            step.candidates = std::move(candidates.items);
            step.edge_attention = std::move(prop.edge_attention_values);
            step.cores = std::move(cores);
            step.inserted_edges = std::move(inserted);
            auto vals = flow.values(tape);
            for (size_t i = 0; i < flow.locals.size(); ++i) step.node_attention.push_back({flow.locals[i], vals[i]});
            trace->steps.push_back(std::move(step));
        }
    }

    run.support = flow.locals;
    run.attention = flow.values(tape);
    run.final_attention = flow.attention;

    double best = -1;
    for (size_t i = 0; i < run.support.size(); ++i) {
        double a = run.attention[i];
        if (a > best || (a == best && run.predicted >= 0 && run.support[i] < run.predicted)) {
            best = a;
            run.predicted = run.support[i];
        }
    }
    auto it = flow.local_row.find(query.answer);
    if (it != flow.local_row.end() && run.attention[it->second] > 0) {
        run.answer_reached = true;
        run.answer_attention = run.attention[it->second];
    }
    if (build_loss) run.loss = attention_loss(tape, flow, query.answer, cfg);
    if (trace) trace->predicted = run.predicted;
    return run;
}

// Queries grouped by timestamp; members of a group can share one tape and
// one global encoding.
inline std::vector<std::vector<int>> group_by_time(const std::vector<QueryInstance>& queries,
                                                   const std::vector<int>& selection) {
    std::unordered_map<TimeId, int> group_of;
    std::vector<std::vector<int>> groups;
    for (int idx : selection) {
        TimeId t = queries[idx].time;
        auto it = group_of.find(t);
        if (it == group_of.end()) {
            it = group_of.emplace(t, static_cast<int>(groups.size())).first;
            groups.push_back({});
        }
        groups[it->second].push_back(idx);
    }
    return groups;
}

}  // namespace tkgc
