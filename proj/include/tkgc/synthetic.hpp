#pragma once

// Synthetic dataset generators: a tiny random event set for gradient checks
// and invariant sweeps, a deterministic two-hop temporal-rule task for
// learnability tests, and a larger event-log surrogate whose statistics
// (popularity skew, echo events, recurrences) resemble the ICEWS benchmarks
// for scaled end-to-end runs without redistributing the real files.

#include <cstdint>
#include <string>
#include <vector>

namespace tkgc::synth {

struct DatasetFiles {
    std::vector<std::string> train, valid, test;
};

// Writes train.txt / valid.txt / test.txt under dir (created if needed).
void write_dataset(const std::string& dir, const DatasetFiles& files);

struct RandomEventsSpec {
    int entities = 12;
    int relations = 4;
    int days = 10;       // timestamps 2014-03-01 + i
    int quads = 30;
    uint64_t seed = 7;
    bool mirror_eval = true;  // valid/test repeat the train quads (memorization)
};
DatasetFiles make_random_events(const RandomEventsSpec& spec);

// Queries (head, query_rel, ?, t) whose answer is fixed by a deterministic
// two-hop rule: follow the head's hop1 edge with timestamp nearest to t,
// then that node's nearest hop2 edge. Background edges live in train;
// query quads are split train/valid/test.
struct TwoHopRuleSpec {
    int heads = 30, mids = 25, tails = 25;
    int hop1_per_head = 3, hop2_per_mid = 3;
    int noise_edges = 60;
    int queries = 500;
    int horizon = 40;  // integer timestamps [0, horizon), year granularity
    double train_fraction = 0.8, valid_fraction = 0.1;
    uint64_t seed = 11;
};
DatasetFiles make_two_hop_rule(const TwoHopRuleSpec& spec);

struct SurrogateEventsSpec {
    int entities = 3000;
    int relations = 60;
    int days = 365;  // calendar 2014
    int base_events = 26000;
    double echo_prob = 0.55;    // (o, resp_rel, s, t + delay) follow-up
    double repeat_prob = 0.35;  // (s, r, o, t + period) recurrence
    double pool_prob = 0.7;     // tail drawn from the relation's frequent pool
    int pool_size = 40;
    double train_fraction = 0.8, valid_fraction = 0.1;
    uint64_t seed = 5;
};
DatasetFiles make_surrogate_events(const SurrogateEventsSpec& spec);

}  // namespace tkgc::synth
