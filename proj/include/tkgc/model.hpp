#pragma once

// Model hyperparameters and the full learned-parameter set.
//
// Two GNN encoders share one message/attention scheme with disjoint
// parameters: a global encoder over the whole graph (query-conditioned
// through temporal displacement) and a subgraph encoder that additionally
// infuses a query context vector. A single-head scorer drives the attention
// flow transitions.

#include <stdexcept>
#include <string>
#include <vector>

#include "tkgc/param_store.hpp"
#include "tkgc/tkg.hpp"

namespace tkgc {

struct SamplerConfig {
    int core_nodes = 100;     // x: nodes whose outgoing edges get sampled
    int edges_per_core = 500;  // y: sampled edges per core node
    int edges_per_step = 500;  // z: edges admitted into the subgraph per step
};

struct ModelConfig {
    int dim = 100;           // entity/relation/displacement embedding size
    int heads = 5;           // attention heads in both encoders
    int steps = 3;           // propagation steps T
    int encoder_layers = 1;  // global encoder depth
    SamplerConfig sampler;

    // Ablation switches.
    bool no_displacement = false;  // raw timestamp embeddings, single shared weight
    bool no_subgraph = false;      // subgraph = whole graph, sampling bypassed
    bool no_global_encoder = false;  // h = raw entity embeddings

    int64_t max_disp_bucket = -1;  // -1: |T| - 1
    double leaky_slope = 0.01;
    double loss_epsilon = 1e-20;

    int head_dim() const {
        if (heads <= 0 || dim % heads != 0)
            throw std::invalid_argument("head count " + std::to_string(heads) + " must divide dim " +
                                        std::to_string(dim));
        return dim / heads;
    }

    int64_t disp_bucket_count(const TemporalKG& g) const {
        if (no_displacement) return g.num_times;  // indexed by raw TimeId
        int64_t b = max_disp_bucket >= 0 ? max_disp_bucket : std::max(g.num_times - 1, 0);
        return b + 1;
    }

    void validate() const {
        (void)head_dim();
        if (steps < 1) throw std::invalid_argument("steps must be >= 1");
        if (encoder_layers < 0) throw std::invalid_argument("encoder_layers must be >= 0");
        if (sampler.core_nodes < 1 || sampler.edges_per_core < 1 || sampler.edges_per_step < 1)
            throw std::invalid_argument("sampler sizes must be >= 1");
    }
};

// One GNN layer's parameter ids inside the store. Sign weights are full
// d x d matrices (stored input-major, applied as X * W); head k reads
// columns [k*head_dim, (k+1)*head_dim) of the query projection and owns a
// separate small key projection.
struct GnnLayerIds {
    int rel = -1;      // |R| x d relation embeddings
    int disp = -1;     // bucket x d displacement (or raw time) embeddings
    int w_sign[3] = {-1, -1, -1};  // past / present / future
    int wq = -1;       // d x d, heads stacked column-wise
    std::vector<int> wk;  // per head, head_dim x head_dim

    int sign_weight(int sign) const {
        int id = w_sign[sign + 1];
        return id >= 0 ? id : w_sign[1];
    }
};

template <typename T>
struct ModelParams {
    ParamStore<T> store;

    int entity = -1;  // |V| x d
    std::vector<GnnLayerIds> global_layers;
    GnnLayerIds subgraph;
    int subgraph_wg = -1;  // 2d x d, applied to [g~ || q]
    int subgraph_wc = -1;  // d x d, query context projection
    int flow_wq = -1;      // d x d
    int flow_wk = -1;      // d x d

    ModelParams(const ModelConfig& cfg, const TemporalKG& graph) {
        cfg.validate();
        const int d = cfg.dim;
        const int p = cfg.head_dim();
        const int R = graph.num_relations();
        const int buckets = static_cast<int>(cfg.disp_bucket_count(graph));

        entity = store.add("entity", graph.num_entities, d);

        auto add_gnn = [&](const std::string& prefix) {
            GnnLayerIds ids;
            ids.rel = store.add(prefix + ".rel", R, d);
            ids.disp = store.add(prefix + ".disp", buckets, d);
            if (cfg.no_displacement) {
                ids.w_sign[1] = store.add(prefix + ".w", d, d);  // single shared weight
            } else {
                ids.w_sign[0] = store.add(prefix + ".w_past", d, d);
                ids.w_sign[1] = store.add(prefix + ".w_present", d, d);
                ids.w_sign[2] = store.add(prefix + ".w_future", d, d);
            }
            ids.wq = store.add(prefix + ".wq", d, d);
            for (int k = 0; k < cfg.heads; ++k) ids.wk.push_back(store.add(prefix + ".wk" + std::to_string(k), p, p));
            return ids;
        };

        for (int l = 0; l < cfg.encoder_layers; ++l) global_layers.push_back(add_gnn("global.l" + std::to_string(l)));
        subgraph = add_gnn("subgraph");
        subgraph_wg = store.add("subgraph.wg", 2 * d, d);
        subgraph_wc = store.add("subgraph.wc", d, d);
        flow_wq = store.add("flow.wq", d, d);
        flow_wk = store.add("flow.wk", d, d);
    }

    void init(uint64_t seed) { store.init_uniform(seed); }
};

}  // namespace tkgc
