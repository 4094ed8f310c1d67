#pragma once

// Temporal knowledge graph storage and dataset ingestion.
//
// A dataset directory holds train.txt / valid.txt / test.txt with
// tab-separated lines: subject, relation, object, timestamp. Wikidata-style
// files carry a temporal modifier between object and timestamp; it gets
// merged into the relation string before anything else happens.
//
// The graph is built from train quadruples only, then augmented: every raw
// relation r gains an inverse twin r + |R_raw| on each edge, and every
// entity gets exactly one self-loop with the reserved relation 2*|R_raw|.
// Self-loops carry no timestamp; their displacement is defined as
// (present, 0) for any query time.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace tkgc {

using EntityId = int;
using RelationId = int;
using TimeId = int;

struct Quadruple {
    EntityId subject = 0;
    RelationId relation = 0;
    EntityId object = 0;
    TimeId time = 0;  // -1 on self-loop edges
};

struct QueryInstance {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId answer = 0;  // withheld from the model at inference
    TimeId time = 0;
};

enum class Granularity { kDay, kYear };

Granularity granularity_from_string(const std::string& s);
std::string granularity_to_string(Granularity g);

// String <-> dense id mapping, ids assigned by first appearance.
struct Vocab {
    std::vector<std::string> names;
    std::unordered_map<std::string, int> ids;

    int get_or_add(const std::string& s);
    int find(const std::string& s) const;  // -1 if absent
    int size() const { return static_cast<int>(names.size()); }
};

struct CivilDate {
    int year = 0, month = 0, day = 0;
};

// Proleptic Gregorian day number (days since 1970-01-01).
int64_t days_from_civil(const CivilDate& d);
CivilDate parse_civil_date(const std::string& s);  // throws on malformed input

// Signed difference t_edge - t_query, split into sign and clamped magnitude.
struct Displacement {
    int sign = 0;          // -1 past, 0 present, +1 future
    int64_t magnitude = 0;  // |difference| in granularity units, clamped
};

class TemporalKG {
public:
    int num_entities = 0;
    int num_raw_relations = 0;
    int num_times = 0;

    std::vector<Quadruple> edges;   // raw train edges, then inverses, then self-loops
    int num_raw_edges = 0;          // leading raw segment length
    std::vector<std::vector<int>> out_adj;  // entity -> edge indices with that subject
    std::vector<std::vector<int>> in_adj;   // entity -> edge indices with that object
    std::vector<int64_t> time_ordinal;      // TimeId -> calendar ordinal
    std::vector<CivilDate> time_date;       // day granularity only

    int num_relations() const { return 2 * num_raw_relations + 1; }
    RelationId self_loop_relation() const { return 2 * num_raw_relations; }
    RelationId inverse_relation(RelationId r) const { return r + num_raw_relations; }
    bool is_self_loop(int edge_id) const { return edges[edge_id].relation == self_loop_relation(); }
    int self_loop_edge(EntityId v) const { return self_loop_base_ + v; }
    int out_degree_no_loop(EntityId v) const { return static_cast<int>(out_adj[v].size()) - 1; }

    Displacement displacement(TimeId t_edge, TimeId t_query, int64_t max_bucket) const;
    Displacement edge_displacement(int edge_id, TimeId t_query, int64_t max_bucket) const;

    // Builds adjacency and the augmentation edges from the raw segment.
    void finalize(int entities, int raw_relations, int times);

private:
    int self_loop_base_ = 0;
};

struct DatasetStats {
    int num_entities = 0;
    int num_raw_relations = 0;
    int num_relations = 0;  // with inverses and self-loop
    int num_times = 0;
    int64_t raw_train = 0, raw_valid = 0, raw_test = 0;
    int64_t augmented_edges = 0;
    int64_t train_queries = 0, valid_queries = 0, test_queries = 0;
};

struct DatasetBundle {
    Vocab entities;
    Vocab relations;  // raw relation strings only
    Vocab times;
    Granularity granularity = Granularity::kDay;

    TemporalKG graph;
    std::vector<Quadruple> raw_train, raw_valid, raw_test;
    std::vector<QueryInstance> train, valid, test;

    uint64_t fingerprint = 0;
    std::string source;

    DatasetStats stats() const;
    std::string relation_name(RelationId r) const;  // handles inverses and the self-loop
    std::string time_name(TimeId t) const;          // "-" for self-loops

    const std::vector<QueryInstance>& split(const std::string& name) const;
};

struct LoadOptions {
    int64_t max_train_quads = 0;   // 0 = all; >0 keeps the first N train lines
    bool train_reciprocal = true;  // add head-prediction instances to train queries
};

// Throws std::runtime_error with the offending file and line number on
// malformed input.
DatasetBundle load_dataset(const std::string& directory, Granularity granularity, const LoadOptions& opts = {});

// Rewrites 5-field lines (subject, relation, object, modifier, time) into
// 4-field ones with "<relation>-<modifier>". 4-field lines pass through.
std::vector<std::string> merge_temporal_modifiers(const std::vector<std::string>& raw_lines);

// Day-of-month holdout: all quadruples dated on the 5th, 15th or 25th of any
// month leave the train set and form valid/test (random halves, seeded).
// Day granularity only.
DatasetBundle make_unseen_timestamp_split(const DatasetBundle& source, uint64_t seed,
                                          const LoadOptions& opts = {});

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace tkgc
