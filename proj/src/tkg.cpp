#include "tkgc/tkg.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tkgc/rng.hpp"

namespace fs = std::filesystem;

namespace tkgc {

Granularity granularity_from_string(const std::string& s) {
    if (s == "day") return Granularity::kDay;
    if (s == "year") return Granularity::kYear;
    throw std::invalid_argument("unknown granularity '" + s + "' (expected day or year)");
}

std::string granularity_to_string(Granularity g) { return g == Granularity::kDay ? "day" : "year"; }

int Vocab::get_or_add(const std::string& s) {
    auto it = ids.find(s);
    if (it != ids.end()) return it->second;
    int id = static_cast<int>(names.size());
    names.push_back(s);
    ids.emplace(s, id);
    return id;
}

int Vocab::find(const std::string& s) const {
    auto it = ids.find(s);
    return it == ids.end() ? -1 : it->second;
}

// Howard Hinnant's algorithm; exact for the proleptic Gregorian calendar.
int64_t days_from_civil(const CivilDate& d) {
    int y = d.year;
    unsigned m = static_cast<unsigned>(d.month);
    unsigned dd = static_cast<unsigned>(d.day);
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + dd - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + static_cast<int64_t>(doe) - 719468LL;
}

CivilDate parse_civil_date(const std::string& s) {
    CivilDate d;
    int fields[3] = {0, 0, 0};
    size_t at = 0;
    for (int f = 0; f < 3; ++f) {
        size_t next = f < 2 ? s.find('-', at) : s.size();
        if (next == std::string::npos) throw std::invalid_argument("expected YYYY-MM-DD date, got '" + s + "'");
        auto res = std::from_chars(s.data() + at, s.data() + next, fields[f]);
        if (res.ec != std::errc() || res.ptr != s.data() + next)
            throw std::invalid_argument("expected YYYY-MM-DD date, got '" + s + "'");
        at = next + 1;
    }
    d.year = fields[0];
    d.month = fields[1];
    d.day = fields[2];
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
        throw std::invalid_argument("date out of range: '" + s + "'");
    return d;
}

Displacement TemporalKG::displacement(TimeId t_edge, TimeId t_query, int64_t max_bucket) const {
    int64_t delta = time_ordinal[t_edge] - time_ordinal[t_query];
    Displacement d;
    d.sign = delta < 0 ? -1 : (delta > 0 ? 1 : 0);
    d.magnitude = std::min<int64_t>(delta < 0 ? -delta : delta, max_bucket);
    return d;
}

Displacement TemporalKG::edge_displacement(int edge_id, TimeId t_query, int64_t max_bucket) const {
    if (is_self_loop(edge_id)) return Displacement{0, 0};  // staying is time-neutral
    return displacement(edges[edge_id].time, t_query, max_bucket);
}

void TemporalKG::finalize(int entities, int raw_relations, int times) {
    num_entities = entities;
    num_raw_relations = raw_relations;
    num_times = times;

    num_raw_edges = static_cast<int>(edges.size());
    edges.reserve(static_cast<size_t>(num_raw_edges) * 2 + entities);
    for (int e = 0; e < num_raw_edges; ++e) {
        const Quadruple& q = edges[e];
        edges.push_back(Quadruple{q.object, inverse_relation(q.relation), q.subject, q.time});
    }
    self_loop_base_ = static_cast<int>(edges.size());
    for (EntityId v = 0; v < entities; ++v) edges.push_back(Quadruple{v, self_loop_relation(), v, -1});

    out_adj.assign(entities, {});
    in_adj.assign(entities, {});
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
        out_adj[edges[e].subject].push_back(e);
        in_adj[edges[e].object].push_back(e);
    }
    // Self-loop last in each out list keeps sampling pools trivially loop-free.
    for (EntityId v = 0; v < entities; ++v) {
        auto& lst = out_adj[v];
        auto it = std::find(lst.begin(), lst.end(), self_loop_edge(v));
        std::rotate(it, it + 1, lst.end());
    }
}

DatasetStats DatasetBundle::stats() const {
    DatasetStats s;
    s.num_entities = entities.size();
    s.num_raw_relations = relations.size();
    s.num_relations = graph.num_relations();
    s.num_times = times.size();
    s.raw_train = static_cast<int64_t>(raw_train.size());
    s.raw_valid = static_cast<int64_t>(raw_valid.size());
    s.raw_test = static_cast<int64_t>(raw_test.size());
    s.augmented_edges = static_cast<int64_t>(graph.edges.size());
    s.train_queries = static_cast<int64_t>(train.size());
    s.valid_queries = static_cast<int64_t>(valid.size());
    s.test_queries = static_cast<int64_t>(test.size());
    return s;
}

std::string DatasetBundle::relation_name(RelationId r) const {
    int raw = relations.size();
    if (r < raw) return relations.names[r];
    if (r < 2 * raw) return relations.names[r - raw] + "^-1";
    return "<stay>";
}

std::string DatasetBundle::time_name(TimeId t) const { return t < 0 ? "-" : times.names[t]; }

const std::vector<QueryInstance>& DatasetBundle::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split '" + name + "' (expected train, valid or test)");
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t at = 0;
    while (true) {
        size_t next = line.find('\t', at);
        if (next == std::string::npos) {
            out.push_back(line.substr(at));
            break;
        }
        out.push_back(line.substr(at, next - at));
        at = next + 1;
    }
    // tolerate trailing carriage returns from CRLF files
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

const char* kModifierTokens[] = {"occurSince", "occurUntil", "since", "until"};

bool is_known_modifier(const std::string& s) {
    for (const char* m : kModifierTokens)
        if (s == m) return true;
    return false;
}

struct ParsedFile {
    std::vector<std::array<std::string, 4>> rows;  // subject, relation, object, time
};

ParsedFile read_quad_file(const fs::path& path, uint64_t& fingerprint) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string() +
                                 "; expected train.txt/valid.txt/test.txt with tab-separated "
                                 "(subject, relation, object, timestamp) lines. The ICEWS14, "
                                 "ICEWS05-15 and Wikidata11k benchmarks ship in this layout; place "
                                 "their files under the dataset directory.");
    ParsedFile pf;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        fingerprint = fnv1a64(line.data(), line.size(), fingerprint);
        if (line.empty() || line == "\r") continue;
        auto fields = split_tabs(line);
        if (fields.size() == 5) {
            if (!is_known_modifier(fields[3]))
                throw std::runtime_error(path.filename().string() + ":" + std::to_string(line_no) +
                                         ": unknown temporal modifier '" + fields[3] + "'");
            fields[1] += "-" + fields[3];
            fields.erase(fields.begin() + 3);
        }
        if (fields.size() != 4)
            throw std::runtime_error(path.filename().string() + ":" + std::to_string(line_no) + ": expected 4 (or 5) " +
                                     "tab-separated fields, got " + std::to_string(fields.size()));
        for (const auto& f : fields)
            if (f.empty())
                throw std::runtime_error(path.filename().string() + ":" + std::to_string(line_no) + ": empty field");
        pf.rows.push_back({fields[0], fields[1], fields[2], fields[3]});
    }
    return pf;
}

int64_t time_ordinal_of(const std::string& token, Granularity g, std::vector<CivilDate>* date_out) {
    if (g == Granularity::kDay) {
        CivilDate d = parse_civil_date(token);
        if (date_out) date_out->push_back(d);
        return days_from_civil(d);
    }
    int year = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), year);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw std::invalid_argument("expected integer year, got '" + token + "'");
    if (date_out) date_out->push_back(CivilDate{year, 0, 0});
    return year;
}

void append_queries(std::vector<QueryInstance>& out, const std::vector<Quadruple>& quads, int raw_relations,
                    bool reciprocal) {
    for (const Quadruple& q : quads) out.push_back(QueryInstance{q.subject, q.relation, q.object, q.time});
    if (reciprocal)
        for (const Quadruple& q : quads)
            out.push_back(QueryInstance{q.object, q.relation + raw_relations, q.subject, q.time});
}

DatasetBundle assemble_bundle(std::vector<Quadruple> train_quads, std::vector<Quadruple> valid_quads,
                              std::vector<Quadruple> test_quads, Vocab entities, Vocab relations, Vocab times,
                              Granularity granularity, std::vector<int64_t> ordinals, std::vector<CivilDate> dates,
                              const LoadOptions& opts) {
    DatasetBundle b;
    b.entities = std::move(entities);
    b.relations = std::move(relations);
    b.times = std::move(times);
    b.granularity = granularity;
    b.raw_train = std::move(train_quads);
    b.raw_valid = std::move(valid_quads);
    b.raw_test = std::move(test_quads);

    b.graph.edges = b.raw_train;
    b.graph.time_ordinal = std::move(ordinals);
    b.graph.time_date = std::move(dates);
    b.graph.finalize(b.entities.size(), b.relations.size(), b.times.size());

    append_queries(b.train, b.raw_train, b.relations.size(), opts.train_reciprocal);
    append_queries(b.valid, b.raw_valid, b.relations.size(), true);
    append_queries(b.test, b.raw_test, b.relations.size(), true);
    return b;
}

}  // namespace

std::vector<std::string> merge_temporal_modifiers(const std::vector<std::string>& raw_lines) {
    std::vector<std::string> out;
    out.reserve(raw_lines.size());
    for (const std::string& line : raw_lines) {
        auto fields = split_tabs(line);
        if (fields.size() != 5) {
            out.push_back(line);
            continue;
        }
        if (!is_known_modifier(fields[3]))
            throw std::runtime_error("unknown temporal modifier '" + fields[3] + "' in line: " + line);
        out.push_back(fields[0] + "\t" + fields[1] + "-" + fields[3] + "\t" + fields[2] + "\t" + fields[4]);
    }
    return out;
}

DatasetBundle load_dataset(const std::string& directory, Granularity granularity, const LoadOptions& opts) {
    fs::path dir(directory);
    uint64_t fingerprint = 0xcbf29ce484222325ULL;
    ParsedFile files[3];
    const char* names[3] = {"train.txt", "valid.txt", "test.txt"};
    for (int i = 0; i < 3; ++i) files[i] = read_quad_file(dir / names[i], fingerprint);

    if (files[0].rows.empty()) throw std::runtime_error("empty train file in " + directory);
    if (opts.max_train_quads > 0 && static_cast<int64_t>(files[0].rows.size()) > opts.max_train_quads)
        files[0].rows.resize(opts.max_train_quads);

    // Vocabularies over train + valid + test so evaluation ranks every entity,
    // ids in first-appearance order.
    Vocab entities, relations, times;
    std::vector<int64_t> ordinals;
    std::vector<CivilDate> dates;
    std::vector<Quadruple> quads[3];
    for (int i = 0; i < 3; ++i) {
        quads[i].reserve(files[i].rows.size());
        for (size_t r = 0; r < files[i].rows.size(); ++r) {
            const auto& row = files[i].rows[r];
            Quadruple q;
            q.subject = entities.get_or_add(row[0]);
            q.relation = relations.get_or_add(row[1]);
            q.object = entities.get_or_add(row[2]);
            int before = times.size();
            q.time = times.get_or_add(row[3]);
            if (times.size() > before) {
                try {
                    ordinals.push_back(time_ordinal_of(row[3], granularity, granularity == Granularity::kDay
                                                                                ? &dates
                                                                                : nullptr));
                } catch (const std::exception& e) {
                    throw std::runtime_error(std::string(names[i]) + ":" + std::to_string(r + 1) + ": " + e.what());
                }
            }
        }
    }

    DatasetBundle b = assemble_bundle(std::move(quads[0]), std::move(quads[1]), std::move(quads[2]),
                                      std::move(entities), std::move(relations), std::move(times), granularity,
                                      std::move(ordinals), std::move(dates), opts);
    b.fingerprint = fingerprint;
    b.source = directory;
    return b;
}

DatasetBundle make_unseen_timestamp_split(const DatasetBundle& source, uint64_t seed, const LoadOptions& opts) {
    if (source.granularity != Granularity::kDay)
        throw std::runtime_error("unseen-timestamp split requires day granularity");

    std::vector<Quadruple> all;
    all.reserve(source.raw_train.size() + source.raw_valid.size() + source.raw_test.size());
    for (const auto* part : {&source.raw_train, &source.raw_valid, &source.raw_test})
        all.insert(all.end(), part->begin(), part->end());

    auto held_out = [&](const Quadruple& q) {
        int day = source.graph.time_date[q.time].day;
        return day == 5 || day == 15 || day == 25;
    };

    std::vector<Quadruple> train_quads, excluded;
    for (const Quadruple& q : all) (held_out(q) ? excluded : train_quads).push_back(q);

    rng::Stream stream(rng::derive(seed, {rng::kSplit}));
    std::vector<int> order(excluded.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    stream.shuffle(order);
    std::vector<Quadruple> valid_quads, test_quads;
    for (size_t i = 0; i < order.size(); ++i)
        (i < order.size() / 2 ? valid_quads : test_quads).push_back(excluded[order[i]]);

    if (opts.max_train_quads > 0 && static_cast<int64_t>(train_quads.size()) > opts.max_train_quads)
        train_quads.resize(opts.max_train_quads);

    DatasetBundle b = assemble_bundle(std::move(train_quads), std::move(valid_quads), std::move(test_quads),
                                      source.entities, source.relations, source.times, source.granularity,
                                      source.graph.time_ordinal, source.graph.time_date, opts);
    b.fingerprint = rng::derive(source.fingerprint, {rng::kSplit, seed});
    b.source = source.source + "#unseen_time";
    return b;
}

}  // namespace tkgc
