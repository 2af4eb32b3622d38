#include "zklab/runner.hpp"

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace zklab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kArtifactVersion = "zklab-run-1";

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

long long parse_ll(const std::string& s, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 0);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw ConfigError(what + ": not an integer: '" + s + "'");
    return v;
}

double parse_dbl(const std::string& s, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw ConfigError(what + ": not a number: '" + s + "'");
    return v;
}

std::string read_text_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_json_text(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(what + ": malformed JSON");
    return j;
}

json load_json_file(const fs::path& p) { return parse_json_text(read_text_file(p), p.string()); }

const json& field(const json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(what + ": missing field '" + key + "'");
    return j[key];
}

long long json_int(const json& j, const char* key, const std::string& what) {
    const json& v = field(j, key, what);
    if (!v.is_number_integer()) throw ConfigError(what + ": field '" + key + "' must be an integer");
    return v.get<long long>();
}

long long json_int_or(const json& j, const char* key, long long fallback, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return json_int(j, key, what);
}

bool json_bool_or(const json& j, const char* key, bool fallback, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    const json& v = j[key];
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) return v.get<long long>() != 0;
    throw ConfigError(what + ": field '" + std::string(key) + "' must be a boolean");
}

std::string digest_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64_str(bytes));
    return buf;
}

std::string fmt_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Collects everything written under one run directory so the manifest can
// list sizes and digests without re-reading the tree.
class Emitter {
  public:
    explicit Emitter(fs::path root) : root_(std::move(root)) {}

    void text(const std::string& rel, const std::string& content) {
        fs::path p = root_ / rel;
        std::error_code ec;
        if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + p.string());
        out << content;
        out.flush();
        if (!out) throw ConfigError("write failed: " + p.string());
        entries_.push_back({rel, content.size(), digest_hex(content)});
    }

    void json_file(const std::string& rel, const json& j) { text(rel, j.dump(2) + "\n"); }

    const fs::path& root() const { return root_; }
    const std::vector<ManifestEntry>& entries() const { return entries_; }

  private:
    fs::path root_;
    std::vector<ManifestEntry> entries_;
};

// ---- name tables ----

std::string shape_name(Shape s) {
    switch (s) {
        case Shape::QAM3: return "qam3";
        case Shape::IP3: return "ip3";
        case Shape::QAM2K1: return "qam2k1";
    }
    return "?";
}

Shape parse_shape(const std::string& s, const std::string& what) {
    if (s == "qam3") return Shape::QAM3;
    if (s == "ip3") return Shape::IP3;
    if (s == "qam2k1") return Shape::QAM2K1;
    throw ConfigError(what + ": unknown shape '" + s + "'");
}

// ---- graph and spec JSON ----

std::vector<std::pair<int, int>> graph_edges(const Graph& g) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < g.v; ++i)
        for (int j = i + 1; j < g.v; ++j)
            if ((g.adj >> pair_index(g.v, i, j)) & 1) edges.push_back({i, j});
    return edges;
}

json graph_to_json(const Graph& g) {
    json edges = json::array();
    for (auto [i, j] : graph_edges(g)) edges.push_back(json::array({i, j}));
    return json{{"v", g.v}, {"edges", edges}};
}

std::vector<std::pair<int, int>> edges_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": edge list must be an array");
    std::vector<std::pair<int, int>> out;
    for (const json& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
            throw ConfigError(what + ": each edge must be a pair of vertex indices");
        out.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    return out;
}

json spec_summary_json(const ProtocolSpec& spec) {
    json j;
    j["shape"] = shape_name(spec.shape);
    j["k"] = spec.k;
    j["message_bits"] = spec.message_bits;
    j["final_bits"] = spec.final_bits;
    j["final_quantum"] = spec.final_quantum;
    j["coin_bits"] = spec.coin_bits;
    j["ip3_response"] = spec.ip3_response == Ip3Response::Echo ? "echo" : "const0";
    j["predicate"] = spec.predicate ? spec.predicate->type_name() : "none";
    j["eps_c"] = spec.eps_c;
    j["eps_s"] = spec.eps_s;
    return j;
}

ProtocolSpec blind_coin_template(int n1, int coin_bits) {
    ProtocolSpec s;
    s.shape = Shape::IP3;
    s.k = 1;
    s.message_bits = {n1, 1};
    s.coin_bits = coin_bits;
    s.final_bits = coin_bits;
    s.ip3_response = Ip3Response::Const0;
    s.predicate = std::make_shared<BlindCoinPredicate>();
    s.eps_s = 1.0 / double(u64{1} << coin_bits);
    s.validate();
    return s;
}

}  // namespace

// ---- RunConfig ----

std::map<std::string, std::string> RunConfig::parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

void RunConfig::load_file(const std::filesystem::path& path) {
    for (auto& [k, v] : parse_kv_text(read_text_file(path)))
        kv.emplace(k, v);  // existing (flag-provided) values win
}

std::string RunConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

std::string RunConfig::require_str(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end() || it->second.empty())
        throw ConfigError("missing required config key '" + key + "'");
    return it->second;
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    return parse_ll(it->second, "config key '" + key + "'");
}

double RunConfig::get_real(const std::string& key, double fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    return parse_dbl(it->second, "config key '" + key + "'");
}

u64 RunConfig::enum_limit() const {
    if (const char* env = std::getenv("ZKLAB_ENUM_LIMIT")) {
        std::string s = trim(env);
        if (!s.empty()) {
            long long v = parse_ll(s, "ZKLAB_ENUM_LIMIT");
            if (v <= 0) throw ConfigError("ZKLAB_ENUM_LIMIT must be positive");
            return static_cast<u64>(v);
        }
    }
    long long v = get_int("enum_limit", static_cast<long long>(kDefaultEnumLimit));
    if (v <= 0) throw ConfigError("enum_limit must be positive");
    return static_cast<u64>(v);
}

// ---- hash function records ----

std::string hash_function_to_json(const HashFunction& h) {
    json j;
    j["m"] = h.m;
    j["n1"] = h.n1;
    j["n2"] = h.n2;
    j["coefficients"] = h.coefficients;
    return j.dump(2) + "\n";
}

HashFunction hash_function_from_json(const std::string& text) {
    json j = parse_json_text(text, "hash function");
    HashFunction h;
    h.m = static_cast<int>(json_int(j, "m", "hash function"));
    h.n1 = static_cast<int>(json_int(j, "n1", "hash function"));
    h.n2 = static_cast<int>(json_int(j, "n2", "hash function"));
    const json& cs = field(j, "coefficients", "hash function");
    if (!cs.is_array()) throw ConfigError("hash function: 'coefficients' must be an array");
    for (const json& c : cs) {
        if (!c.is_number_integer() || c.get<long long>() < 0)
            throw ConfigError("hash function: coefficients must be nonnegative integers");
        h.coefficients.push_back(c.get<u64>());
    }
    h.validate();
    return h;
}

// ---- instance and simulator files ----

InstanceBundle load_spec_file(const std::filesystem::path& path) {
    json j = load_json_file(path);
    std::string what = "spec file " + path.string();
    std::string kind = field(j, "kind", what).is_string() ? j["kind"].get<std::string>() : "";
    InstanceBundle b;
    b.kind = kind;
    if (kind == "gi") {
        int v = static_cast<int>(json_int(j, "v", what));
        Graph g0 = graph_from_edges(v, edges_from_json(field(j, "edges0", what), what));
        Graph g1 = graph_from_edges(v, edges_from_json(field(j, "edges1", what), what));
        int copies = static_cast<int>(json_int_or(j, "copies", 1, what));
        Shape shape = Shape::QAM3;
        if (j.contains("shape")) {
            if (!j["shape"].is_string()) throw ConfigError(what + ": 'shape' must be a string");
            shape = parse_shape(j["shape"].get<std::string>(), what);
        }
        b.gi = gi_instance(g0, g1, copies, shape);
        b.spec = b.gi->spec;
    } else if (kind == "seq_gi") {
        int v = static_cast<int>(json_int(j, "v", what));
        Graph g0 = graph_from_edges(v, edges_from_json(field(j, "edges0", what), what));
        Graph g1 = graph_from_edges(v, edges_from_json(field(j, "edges1", what), what));
        b.seq = seq_gi_instance(g0, g1);
        b.spec = b.seq->spec;
    } else if (kind == "regression") {
        b.spec = regression_spec();
    } else if (kind == "blind_coin") {
        int n1 = static_cast<int>(json_int_or(j, "n1", 2, what));
        int cb = static_cast<int>(json_int_or(j, "coin_bits", 2, what));
        b.spec = blind_coin_template(n1, cb);
    } else {
        throw ConfigError(what + ": unknown instance kind '" + kind + "'");
    }
    return b;
}

QueryAlgorithm load_simulator_file(const std::filesystem::path& path, const InstanceBundle& inst) {
    json j = load_json_file(path);
    std::string what = "simulator file " + path.string();
    std::string kind = field(j, "kind", what).is_string() ? j["kind"].get<std::string>() : "";
    if (kind == "gi_witness") {
        if (!inst.gi) throw ConfigError(what + ": gi_witness needs a 'gi' instance");
        return gi_witness_simulator(*inst.gi);
    }
    if (kind == "seq_gi_witness") {
        if (!inst.seq) throw ConfigError(what + ": seq_gi_witness needs a 'seq_gi' instance");
        return seq_gi_witness_simulator(*inst.seq);
    }
    if (kind == "fixed_output") {
        const json& ms = field(j, "messages", what);
        if (!ms.is_array()) throw ConfigError(what + ": 'messages' must be an array");
        std::vector<u64> msgs;
        for (const json& m : ms) {
            if (!m.is_number_integer()) throw ConfigError(what + ": messages must be integers");
            msgs.push_back(m.get<u64>());
        }
        u64 final_value = static_cast<u64>(json_int_or(j, "final", 0, what));
        return fixed_output_simulator(inst.spec, msgs, final_value);
    }
    if (kind == "probe_reencode") {
        u64 probe = static_cast<u64>(json_int_or(j, "probe", 0, what));
        return probe_reencode_simulator(inst.spec, probe);
    }
    if (kind == "regression_adversary") {
        if (inst.kind != "regression")
            throw ConfigError(what + ": regression_adversary needs the 'regression' instance");
        bool full = json_bool_or(j, "full_prefix", true, what);
        return regression_adversary(full);
    }
    throw ConfigError(what + ": unknown simulator kind '" + kind + "'");
}

TabulatedProver load_prover_file(const std::filesystem::path& path, const InstanceBundle& inst) {
    json j = load_json_file(path);
    std::string what = "prover file " + path.string();
    std::string kind = field(j, "kind", what).is_string() ? j["kind"].get<std::string>() : "";
    if (kind == "honest_gi") {
        if (!inst.gi || !inst.gi->witness)
            throw ConfigError(what + ": honest_gi needs a 'gi' instance with isomorphic graphs");
        return honest_gi_prover(inst.gi->g0, inst.gi->g1, inst.gi->copies, *inst.gi->witness,
                                inst.spec.shape);
    }
    if (kind == "honest_seq_gi") {
        if (!inst.seq || !inst.seq->witness)
            throw ConfigError(what + ": honest_seq_gi needs a 'seq_gi' instance with a witness");
        return honest_seq_gi_prover(inst.seq->g0, inst.seq->g1, *inst.seq->witness);
    }
    if (kind == "fixed_transcript") {
        const json& ms = field(j, "messages", what);
        if (!ms.is_array()) throw ConfigError(what + ": 'messages' must be an array");
        std::vector<u64> msgs;
        for (const json& m : ms) {
            if (!m.is_number_integer()) throw ConfigError(what + ": messages must be integers");
            msgs.push_back(m.get<u64>());
        }
        u64 final_value = static_cast<u64>(json_int_or(j, "final", 0, what));
        return fixed_transcript_prover(inst.spec, msgs, final_value);
    }
    throw ConfigError(what + ": unknown prover kind '" + kind + "'");
}

namespace {

// ---- diagnostics serialization ----

json chain_json(const ChainReport& ch) {
    json lines = json::array();
    for (const ChainLine& l : ch.lines)
        lines.push_back(json{{"name", l.name}, {"lhs", l.lhs}, {"rhs", l.rhs},
                             {"slack", l.slack}, {"ok", l.ok}});
    return json{{"lines", lines}, {"all_ok", ch.all_ok},
                {"final_lower_bound", ch.final_lower_bound}};
}

std::string chain_csv(const ChainReport& ch) {
    std::string out = "name,lhs,rhs,slack,ok\n";
    for (const ChainLine& l : ch.lines) {
        out += l.name + "," + fmt_real(l.lhs) + "," + fmt_real(l.rhs) + "," + fmt_real(l.slack) +
               "," + (l.ok ? "1" : "0") + "\n";
    }
    return out;
}

std::string s_table_csv(const DiagnosticsReport& rep) {
    std::string out = "round,prefix,s,beta\n";
    for (size_t r = 0; r < rep.round_stats.size(); ++r) {
        const MinEntropyStats& st = rep.round_stats[r];
        for (const auto& [prefix, s] : st.s_table) {
            out += std::to_string(r) + "," + std::to_string(prefix) + "," + fmt_real(s) + "," +
                   std::to_string(st.beta_table.at(prefix)) + "\n";
        }
    }
    return out;
}

bool diagnostics_verdict(const DiagnosticsReport& rep, json* parts) {
    bool bounds_ok = true;
    for (const MinEntropyStats& st : rep.round_stats) bounds_ok = bounds_ok && st.bound_holds;
    bool chain_ok = rep.chain.all_ok;
    bool mass_ok = rep.good_mass_ok;
    bool routes_agree = std::abs(rep.cheat_prob - rep.cheat_closed_form) <= 1e-10;
    bool within_optimal = !rep.optimal_cheat_value ||
                          rep.cheat_prob <= *rep.optimal_cheat_value + 1e-10;
    bool predictor_ok = true;
    for (bool v : rep.predictor_violation) predictor_ok = predictor_ok && !v;
    if (parts) {
        (*parts)["min_entropy_bounds_ok"] = bounds_ok;
        (*parts)["chain_ok"] = chain_ok;
        (*parts)["good_mass_ok"] = mass_ok;
        (*parts)["cheat_routes_agree"] = routes_agree;
        (*parts)["cheat_within_optimal"] = within_optimal;
        (*parts)["predictor_ok"] = predictor_ok;
    }
    return bounds_ok && chain_ok && mass_ok && routes_agree && within_optimal && predictor_ok;
}

json diagnostics_json(const DiagnosticsReport& rep) {
    json j;
    j["shape"] = shape_name(rep.shape);
    j["q"] = rep.q;
    j["c"] = rep.c;
    j["t"] = rep.t;
    j["delta"] = rep.delta;
    j["delta_auto"] = rep.delta_auto;
    j["monte_carlo"] = rep.monte_carlo;
    j["samples"] = rep.samples;
    j["q_interval"] = json::array({rep.q_low3, rep.q_high3});

    json rounds = json::array();
    for (size_t r = 0; r < rep.round_stats.size(); ++r) {
        const MinEntropyStats& st = rep.round_stats[r];
        json jr;
        jr["width"] = st.width;
        jr["expected_s"] = st.expected_s;
        jr["bound"] = st.bound;
        jr["bound_holds"] = st.bound_holds;
        jr["prefix_count"] = st.s_table.size();
        if (r < rep.round_good.size()) {
            const GoodSet& g = rep.round_good[r];
            jr["good"] = json{{"delta", g.delta}, {"threshold", g.threshold}, {"mass", g.mass},
                              {"mass_ok", g.mass_ok}, {"member_count", g.members.size()}};
        }
        if (r < rep.predictor_lower_bound.size()) {
            jr["predictor_lower_bound"] = rep.predictor_lower_bound[r];
            jr["predictor_violation"] = static_cast<bool>(rep.predictor_violation[r]);
        }
        rounds.push_back(jr);
    }
    j["rounds"] = rounds;
    j["good_intersection_mass"] = rep.good_intersection_mass;
    j["good_mass_ok"] = rep.good_mass_ok;

    j["cheat"] = json{{"prob", rep.cheat_prob}, {"closed_form", rep.cheat_closed_form}};
    if (rep.optimal_cheat_value)
        j["cheat"]["optimal"] = *rep.optimal_cheat_value;
    else
        j["cheat"]["optimal"] = nullptr;

    j["chain"] = chain_json(rep.chain);

    json verdicts = json::object();
    bool ok = diagnostics_verdict(rep, &verdicts);
    j["verdicts"] = verdicts;
    j["verdicts_ok"] = ok;
    return j;
}

struct ExpResult {
    json report;
    bool ok = true;
};

// ---- experiments ----

ExpResult exp_hash_audit(Emitter& em, const std::string& prefix, int n1, int n2, int t,
                         u64 limit) {
    HashFamily fam(n1, n2, t);
    UniformityAuditResult pa = point_uniformity_audit(fam, limit);
    TupleAuditResult ta = t_universality_audit(fam, t, limit);

    json j;
    j["family"] = json{{"n1", fam.n1}, {"n2", fam.n2}, {"t", fam.t}, {"m", fam.m},
                       {"size", fam.size()}};
    if (fam.size() <= 4096) {
        json members = json::array();
        for (u64 i = 0; i < fam.size(); ++i) members.push_back(fam.at(i).coefficients);
        j["members"] = members;
    }
    j["point_audit"] = json{{"points_checked", pa.points_checked},
                            {"max_count_deviation", pa.max_count_deviation},
                            {"evaluations", pa.evaluations}, {"pass", pa.pass()}};
    j["tuple_audit"] = json{{"tuples_checked", ta.tuples_checked},
                            {"max_count_deviation", ta.max_count_deviation},
                            {"evaluations", ta.evaluations}, {"pass", ta.pass()}};
    bool ok = pa.pass() && ta.pass();
    j["verdicts_ok"] = ok;
    em.json_file(prefix + "report.json", j);
    return {std::move(j), ok};
}

ExpResult exp_search_classical(Emitter& em, const std::string& prefix, int t_max, int n2_max,
                               u64 limit) {
    json rows = json::array();
    std::string csv = "t,n2,measured,bound,slack\n";
    bool ok = true;
    for (int t = 0; t <= t_max; ++t) {
        int n1 = 1;
        while ((u64{1} << n1) < static_cast<u64>(t + 1)) ++n1;
        for (int n2 = 1; n2 <= n2_max; ++n2) {
            double closed = classical_optimal_search(t, n1, n2);
            double bound = classical_search_bound(t, n2);
            double slack = bound - closed;
            json row{{"t", t}, {"n1", n1}, {"n2", n2}, {"measured", closed}, {"bound", bound},
                     {"slack", slack}};
            if (t <= 2 && n1 <= 2 && n2 <= 2) {
                double dp = classical_adaptive_optimum(t, n1, n2, limit);
                row["adaptive_dp"] = dp;
                ok = ok && std::abs(dp - closed) <= 1e-12;
            } else {
                row["adaptive_dp"] = nullptr;
            }
            ok = ok && closed <= bound + 1e-12;
            rows.push_back(row);
            csv += std::to_string(t) + "," + std::to_string(n2) + "," + fmt_real(closed) + "," +
                   fmt_real(bound) + "," + fmt_real(slack) + "\n";
        }
    }
    json j{{"rows", rows}, {"verdicts_ok", ok}};
    em.json_file(prefix + "report.json", j);
    em.text(prefix + "sweep.csv", csv);
    return {std::move(j), ok};
}

ExpResult exp_search_grover(Emitter& em, const std::string& prefix, int t_max, int n2_max) {
    json rows = json::array();
    std::string csv = "t,n2,measured,bound,slack\n";
    bool ok = true;
    for (int t = 0; t <= t_max; ++t)
        for (int n2 = 1; n2 <= n2_max; ++n2) {
            GroverResult g = grover_search(t, n2);
            double slack = g.bound - g.simulated;
            bool row_ok = std::abs(g.simulated - g.closed_form) <= 1e-9 && g.queries == t &&
                          (t == 0 || g.simulated <= g.bound + 1e-12);
            ok = ok && row_ok;
            rows.push_back(json{{"t", t}, {"n2", n2}, {"measured", g.simulated},
                                {"closed_form", g.closed_form}, {"bound", g.bound},
                                {"slack", slack}, {"queries", g.queries}, {"ok", row_ok}});
            csv += std::to_string(t) + "," + std::to_string(n2) + "," + fmt_real(g.simulated) +
                   "," + fmt_real(g.bound) + "," + fmt_real(slack) + "\n";
        }
    json j{{"rows", rows}, {"verdicts_ok", ok}};
    em.json_file(prefix + "report.json", j);
    em.text(prefix + "sweep.csv", csv);
    return {std::move(j), ok};
}

ExpResult exp_search_equiv(Emitter& em, const std::string& prefix, u64 limit) {
    json rows = json::array();
    std::string csv = "t,n2,measured,bound,slack\n";
    bool all_tight = true;
    double worst_control = 0.0;
    for (const SearchTestAlg& s : equivalence_suite()) {
        EquivalenceResult main = twise_equivalence_check(s.alg, s.n1, s.n2, 2 * s.t + 1, limit);
        EquivalenceResult ctrl = twise_equivalence_check(s.alg, s.n1, s.n2, 1, limit);
        all_tight = all_tight && main.tv_distance <= 1e-10;
        worst_control = std::max(worst_control, ctrl.tv_distance);
        rows.push_back(json{{"name", s.name}, {"t", s.t}, {"n1", s.n1}, {"n2", s.n2},
                            {"measured", main.tv_distance}, {"bound", 1e-10},
                            {"slack", 1e-10 - main.tv_distance},
                            {"control_tv", ctrl.tv_distance},
                            {"family_size", main.family_size},
                            {"function_count", main.function_count}});
        csv += std::to_string(s.t) + "," + std::to_string(s.n2) + "," +
               fmt_real(main.tv_distance) + "," + fmt_real(1e-10) + "," +
               fmt_real(1e-10 - main.tv_distance) + "\n";
    }
    bool ok = all_tight && worst_control > 1e-3;
    json j{{"rows", rows}, {"worst_control_tv", worst_control},
           {"control_separates", worst_control > 1e-3}, {"verdicts_ok", ok}};
    em.json_file(prefix + "report.json", j);
    em.text(prefix + "sweep.csv", csv);
    return {std::move(j), ok};
}

ExpResult exp_search_reduce(Emitter& em, const std::string& prefix, u64 limit) {
    struct Case {
        std::string name;
        SearchInstance inst;
        QueryAlgorithm alg;
    };
    std::vector<Case> cases;
    {
        Case c;
        c.name = "h_query_fold";
        c.inst = SearchInstance::single_target(1, 1, 1, 0);
        c.alg.num_qubits = 2;
        c.alg.query_budget = 1;
        c.alg.steps = {Step::gate1(Step::Gate::H, 0), Step::oracle(0, {0}, {1}), Step::cx(1, 0)};
        c.alg.output_registers = {{0}};
        cases.push_back(c);
    }
    {
        Case c;
        c.name = "ry_wide_targets";
        c.inst.n1 = 1;
        c.inst.n2 = 2;
        c.inst.t = 1;
        c.inst.beta_table = {2, 1};
        c.alg.num_qubits = 3;
        c.alg.query_budget = 1;
        c.alg.steps = {Step::gate1(Step::Gate::RY, 0, 0.9), Step::oracle(0, {0}, {1, 2}),
                       Step::cx(1, 0)};
        c.alg.output_registers = {{0}};
        cases.push_back(c);
    }
    {
        Case c;
        c.name = "blind_guess";
        c.inst = SearchInstance::single_target(1, 1, 0, 1);
        c.alg.num_qubits = 1;
        c.alg.query_budget = 0;
        c.alg.steps = {Step::gate1(Step::Gate::H, 0)};
        c.alg.output_registers = {{0}};
        cases.push_back(c);
    }

    json rows = json::array();
    std::string csv = "t,n2,measured,bound,slack\n";
    bool ok = true;
    for (const Case& c : cases) {
        BExactResult r = algorithm_B_exact(c.alg, c.inst, limit);
        bool row_ok = r.max_x_queries <= 2 * c.inst.t &&
                      std::abs(r.success_b - r.success_f) <= 1e-10 &&
                      std::abs(r.success_f - r.success_uniform_f) <= 1e-10 &&
                      r.max_pointwise_diff <= 1e-10;
        ok = ok && row_ok;
        rows.push_back(json{{"name", c.name}, {"n1", c.inst.n1}, {"n2", c.inst.n2},
                            {"t", c.inst.t}, {"x_budget", 2 * c.inst.t},
                            {"max_x_queries", r.max_x_queries}, {"success_b", r.success_b},
                            {"success_f", r.success_f},
                            {"success_uniform_f", r.success_uniform_f},
                            {"max_pointwise_diff", r.max_pointwise_diff},
                            {"combos", r.combos}, {"ok", row_ok}});
        csv += std::to_string(c.inst.t) + "," + std::to_string(c.inst.n2) + "," +
               fmt_real(r.success_b) + "," + fmt_real(r.success_uniform_f) + "," +
               fmt_real(r.success_b - r.success_uniform_f) + "\n";
    }
    json j{{"rows", rows}, {"verdicts_ok", ok}};
    em.json_file(prefix + "report.json", j);
    em.text(prefix + "sweep.csv", csv);
    return {std::move(j), ok};
}

ExpResult exp_protocol_run(Emitter& em, const std::string& prefix, const InstanceBundle& inst,
                           const TabulatedProver& prover) {
    Verifier v = inst.spec.shape == Shape::IP3 ? Verifier::honest_ip() : Verifier::honest_arthur();
    TranscriptDistribution td = run_protocol(inst.spec, prover, v);

    double total = 0.0;
    std::string csv = "packed,prob\n";
    for (const auto& [packed, p] : td.classical) {
        total += p;
        csv += std::to_string(packed) + "," + fmt_real(p) + "\n";
    }
    for (const auto& [packed, pf] : td.quantum_finals) {
        total += pf.first;
        csv += std::to_string(packed) + "," + fmt_real(pf.first) + "\n";
    }
    bool ok = std::abs(total - 1.0) <= 1e-9;
    json j;
    j["spec"] = spec_summary_json(inst.spec);
    j["acceptance"] = td.acceptance;
    j["transcript_count"] = td.classical.size() + td.quantum_finals.size();
    j["total_mass"] = total;
    j["verdicts_ok"] = ok;
    em.json_file(prefix + "report.json", j);
    em.text(prefix + "transcript.csv", csv);
    return {std::move(j), ok};
}

ExpResult exp_protocol_compose(Emitter& em, const std::string& prefix, const InstanceBundle& inst,
                               int copies, u64 limit) {
    ProtocolSpec composed = parallel_compose(inst.spec, copies);
    json j;
    j["base_spec"] = spec_summary_json(inst.spec);
    j["composed_spec"] = spec_summary_json(composed);
    j["copies"] = copies;

    std::optional<double> base_opt, comp_opt;
    try {
        base_opt = optimal_cheat(inst.spec, limit);
    } catch (const LimitError&) {}
    try {
        comp_opt = optimal_cheat(composed, limit);
    } catch (const LimitError&) {}
    j["base_optimal_cheat"] = base_opt ? json(*base_opt) : json(nullptr);
    j["composed_optimal_cheat"] = comp_opt ? json(*comp_opt) : json(nullptr);

    bool ok = true;
    if (base_opt && comp_opt) {
        double expect = std::pow(*base_opt, copies);
        j["product_law_expected"] = expect;
        ok = std::abs(*comp_opt - expect) <= 1e-9;
        j["product_law_ok"] = ok;
    } else {
        j["product_law_expected"] = nullptr;
        j["product_law_ok"] = nullptr;
    }
    j["verdicts_ok"] = ok;
    em.json_file(prefix + "report.json", j);
    return {std::move(j), ok};
}

ExpResult exp_gi_build(Emitter& em, const std::string& prefix, const InstanceBundle& inst,
                       u64 limit) {
    json j;
    json instance;
    bool ok = true;
    if (inst.gi) {
        const GiInstance& gi = *inst.gi;
        instance = json{{"kind", "gi"}, {"v", gi.g0.v},
                        {"edges0", graph_to_json(gi.g0)["edges"]},
                        {"edges1", graph_to_json(gi.g1)["edges"]},
                        {"copies", gi.copies}, {"shape", shape_name(gi.spec.shape)}};
        j["witness"] = gi.witness ? json(*gi.witness) : json(nullptr);
        if (gi.witness) {
            TabulatedProver honest =
                honest_gi_prover(gi.g0, gi.g1, gi.copies, *gi.witness, gi.spec.shape);
            Verifier v = gi.spec.shape == Shape::IP3 ? Verifier::honest_ip()
                                                     : Verifier::honest_arthur();
            double acc = run_protocol(gi.spec, honest, v).acceptance;
            j["honest_acceptance"] = acc;
            ok = ok && acc >= 1.0 - 1e-9;
        }
    } else if (inst.seq) {
        const SeqGiInstance& sq = *inst.seq;
        instance = json{{"kind", "seq_gi"}, {"v", sq.g0.v},
                        {"edges0", graph_to_json(sq.g0)["edges"]},
                        {"edges1", graph_to_json(sq.g1)["edges"]}};
        j["witness"] = sq.witness ? json(*sq.witness) : json(nullptr);
        if (sq.witness) {
            TabulatedProver honest = honest_seq_gi_prover(sq.g0, sq.g1, *sq.witness);
            double acc = run_protocol(sq.spec, honest, Verifier::honest_arthur()).acceptance;
            j["honest_acceptance"] = acc;
            ok = ok && acc >= 1.0 - 1e-9;
        }
    } else {
        throw ConfigError("gi-build: instance kind '" + inst.kind + "' has no graphs");
    }
    j["instance"] = instance;
    j["spec"] = spec_summary_json(inst.spec);
    try {
        j["optimal_cheat"] = optimal_cheat(inst.spec, limit);
    } catch (const LimitError&) {
        j["optimal_cheat"] = nullptr;
    }
    j["verdicts_ok"] = ok;
    em.json_file(prefix + "report.json", j);
    em.json_file(prefix + "instance.json", instance);
    return {std::move(j), ok};
}

ExpResult exp_extract(Emitter& em, const std::string& prefix, Shape want,
                      const ProtocolSpec& spec, const QueryAlgorithm& sim, int t,
                      const ZOptions& opts, bool with_markov) {
    if (spec.shape != want)
        throw ConfigError("extract: spec shape is " + shape_name(spec.shape) +
                          " but the subcommand expects " + shape_name(want));
    DiagnosticsReport rep = run_extraction_diagnostics(spec, sim, t, opts);
    json j = diagnostics_json(rep);
    bool ok = j["verdicts_ok"].get<bool>();

    if (with_markov) {
        if (spec.shape != Shape::IP3)
            throw ConfigError("extract: the factorization check needs a private-coin spec");
        Ip3FunctionJoint fj = build_ip3_function_joint(spec, sim, t, opts.enum_limit,
                                                       opts.qubit_cap);
        double l1 = markov_network_check(fj);
        double broken = markov_network_check(break_ip3_joint(fj));
        // when the response echoes the coins, the forcibly correlated final is
        // already determined by (alpha, beta), so only hidden-coin specs can
        // expose the planted break
        bool control_applies = spec.ip3_response == Ip3Response::Const0;
        bool markov_ok = l1 <= 1e-10 && (!control_applies || broken > 0.1);
        j["markov"] = json{{"function_count", fj.function_count}, {"max_l1", l1},
                           {"broken_max_l1", broken}, {"factorizes", l1 <= 1e-10},
                           {"control_applies", control_applies},
                           {"control_detects_break", broken > 0.1}};
        j["verdicts"]["markov_ok"] = markov_ok;
        ok = ok && markov_ok;
        j["verdicts_ok"] = ok;
    }

    em.json_file(prefix + "report.json", j);
    em.text(prefix + "chain.csv", chain_csv(rep.chain));
    em.text(prefix + "s_table.csv", s_table_csv(rep));
    return {std::move(j), ok};
}

ZOptions options_from(const RunConfig& cfg) {
    ZOptions o;
    o.c = cfg.get_real("c", 10.0);
    std::string d = cfg.get_str("delta", "auto");
    if (d != "auto") o.delta = parse_dbl(d, "config key 'delta'");
    o.enum_limit = cfg.enum_limit();
    o.qubit_cap = static_cast<int>(cfg.get_int("qubit_cap", kDefaultQubitCap));
    std::string mode = cfg.get_str("mode", "auto");
    if (mode == "auto")
        o.mode = ZMode::Auto;
    else if (mode == "exact")
        o.mode = ZMode::Exact;
    else if (mode == "mc")
        o.mode = ZMode::MonteCarlo;
    else
        throw ConfigError("config key 'mode': expected auto, exact, or mc");
    o.mc_samples = static_cast<u64>(cfg.get_int("samples", 4096));
    o.seed = cfg.seed();
    o.wrong_mode_hash = cfg.get_int("wrong_mode_hash", 0) != 0;
    return o;
}

Shape extract_shape_of(const std::string& sub) {
    if (sub == "extract-zq3") return Shape::QAM3;
    if (sub == "extract-zip3") return Shape::IP3;
    return Shape::QAM2K1;
}

// Fixed catalog of experiments at pinned parameters; the full-suite runs
// back the reproducibility check, so every input is deterministic here.
bool run_suite(Emitter& em, const RunConfig& cfg) {
    u64 limit = cfg.enum_limit();
    ZOptions base = options_from(cfg);
    bool ok = true;

    ok &= exp_hash_audit(em, "hash_2_1_3/", 2, 1, 3, limit).ok;
    ok &= exp_hash_audit(em, "hash_2_2_3/", 2, 2, 3, limit).ok;
    ok &= exp_hash_audit(em, "hash_3_2_3/", 3, 2, 3, limit).ok;

    ok &= exp_search_classical(em, "search_classical/", 4, 6, limit).ok;
    ok &= exp_search_grover(em, "search_grover/", 3, 4).ok;
    ok &= exp_search_equiv(em, "search_equiv/", limit).ok;
    ok &= exp_search_reduce(em, "search_reduce/", limit).ok;

    Graph path3 = graph_from_edges(3, {{0, 1}, {1, 2}});
    Graph path3b = graph_from_edges(3, {{1, 2}, {0, 2}});
    Graph tri3 = graph_from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    Graph edge2 = graph_from_edges(2, {{0, 1}});

    {
        GiInstance gi = gi_instance(path3, path3b, 1, Shape::QAM3);
        ok &= exp_extract(em, "extract_gi_witness/", Shape::QAM3, gi.spec,
                          gi_witness_simulator(gi), 1, base, false).ok;
    }
    {
        GiInstance gi = gi_instance(path3, tri3, 1, Shape::QAM3);
        std::vector<u64> msgs{gi.g0.adj};
        ok &= exp_extract(em, "extract_gi_ignoring/", Shape::QAM3, gi.spec,
                          fixed_output_simulator(gi.spec, msgs, 0), 0, base, false).ok;
    }
    {
        GiInstance gi = gi_instance(edge2, edge2, 1, Shape::IP3);
        ok &= exp_extract(em, "extract_ip3_witness/", Shape::IP3, gi.spec,
                          gi_witness_simulator(gi), 1, base, true).ok;
    }
    {
        ProtocolSpec blind = blind_coin_template(2, 2);
        std::vector<u64> msgs{1};
        ok &= exp_extract(em, "extract_blind_guess/", Shape::IP3, blind,
                          fixed_output_simulator(blind, msgs, 2), 0, base, true).ok;
    }
    {
        SeqGiInstance sq = seq_gi_instance(edge2, edge2);
        ok &= exp_extract(em, "extract_seq_toy/", Shape::QAM2K1, sq.spec,
                          seq_gi_witness_simulator(sq), 2, base, false).ok;
    }
    {
        ProtocolSpec reg = regression_spec();
        ZOptions opts = base;
        opts.mode = ZMode::MonteCarlo;
        opts.mc_samples = static_cast<u64>(cfg.get_int("regression_samples", 2048));
        opts.qubit_cap = std::max(opts.qubit_cap, 23);
        ok &= exp_extract(em, "extract_regression/", Shape::QAM2K1, reg,
                          regression_adversary(true), 1, opts, false).ok;
    }
    {
        InstanceBundle b;
        b.kind = "gi";
        b.gi = gi_instance(path3, tri3, 1, Shape::QAM3);
        b.spec = b.gi->spec;
        ok &= exp_protocol_compose(em, "compose_gi/", b, 2, limit).ok;
    }

    std::vector<fs::path> plot_inputs = {em.root() / "extract_gi_witness" / "report.json",
                                         em.root() / "extract_seq_toy" / "report.json",
                                         em.root() / "search_grover" / "report.json"};
    em.text("plot.csv", emit_plot_data(plot_inputs));

    json names = json::array();
    for (const ManifestEntry& e : em.entries()) names.push_back(e.name);
    em.json_file("report.json", json{{"experiments", names}, {"verdicts_ok", ok}});
    return ok;
}

bool dispatch(Emitter& em, const RunConfig& cfg) {
    const std::string& sub = cfg.subcommand;
    u64 limit = cfg.enum_limit();

    if (sub == "hash-audit") {
        int n1 = static_cast<int>(cfg.get_int("n1", 2));
        int n2 = static_cast<int>(cfg.get_int("n2", 2));
        int t = static_cast<int>(cfg.get_int("t", 3));
        return exp_hash_audit(em, "", n1, n2, t, limit).ok;
    }
    if (sub == "protocol-run") {
        InstanceBundle inst = load_spec_file(cfg.require_str("spec"));
        TabulatedProver prover = load_prover_file(cfg.require_str("prover"), inst);
        return exp_protocol_run(em, "", inst, prover).ok;
    }
    if (sub == "protocol-compose") {
        InstanceBundle inst = load_spec_file(cfg.require_str("spec"));
        int copies = static_cast<int>(cfg.get_int("copies", 2));
        if (copies < 1) throw ConfigError("config key 'copies': must be at least 1");
        return exp_protocol_compose(em, "", inst, copies, limit).ok;
    }
    if (sub == "gi-build") {
        InstanceBundle inst = load_spec_file(cfg.require_str("spec"));
        return exp_gi_build(em, "", inst, limit).ok;
    }
    if (sub == "extract-zq3" || sub == "extract-zip3" || sub == "extract-zk") {
        InstanceBundle inst = load_spec_file(cfg.require_str("spec"));
        QueryAlgorithm sim = load_simulator_file(cfg.require_str("simulator"), inst);
        int t = static_cast<int>(cfg.get_int("t", 1));
        bool markov = cfg.get_int("markov", 0) != 0;
        return exp_extract(em, "", extract_shape_of(sub), inst.spec, sim, t, options_from(cfg),
                           markov).ok;
    }
    if (sub == "searchlab-classical") {
        return exp_search_classical(em, "", static_cast<int>(cfg.get_int("t", 4)),
                                    static_cast<int>(cfg.get_int("n2", 6)), limit).ok;
    }
    if (sub == "searchlab-grover") {
        return exp_search_grover(em, "", static_cast<int>(cfg.get_int("t", 3)),
                                 static_cast<int>(cfg.get_int("n2", 4))).ok;
    }
    if (sub == "searchlab-equiv") return exp_search_equiv(em, "", limit).ok;
    if (sub == "searchlab-reduce") return exp_search_reduce(em, "", limit).ok;
    if (sub == "suite") return run_suite(em, cfg);
    if (sub == "plot-data") {
        std::vector<fs::path> paths;
        for (const std::string& p : split_list(cfg.require_str("reports"), ','))
            paths.push_back(p);
        em.text("plot.csv", emit_plot_data(paths));
        return true;
    }
    throw ConfigError("unknown subcommand '" + sub + "'");
}

std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunManifest run(const RunConfig& cfg) {
    fs::path dir = cfg.out_dir();
    std::error_code ec;
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir))
            throw ConfigError("output path exists and is not a directory: " + dir.string());
        if (!fs::is_empty(dir))
            throw ConfigError("output directory is not empty: " + dir.string());
    } else if (!fs::create_directories(dir, ec) || ec) {
        throw ConfigError("cannot create output directory: " + dir.string());
    }

    Emitter em(dir);
    bool ok = true;
    try {
        ok = dispatch(em, cfg);

        json m;
        m["artifact_version"] = kArtifactVersion;
        m["subcommand"] = cfg.subcommand;
        m["seed"] = cfg.seed();
        m["generated_at"] = timestamp_utc();  // the one timestamp; reports stay byte-stable
        m["config"] = cfg.kv;
        json files = json::array();
        for (const ManifestEntry& e : em.entries())
            files.push_back(json{{"name", e.name}, {"bytes", e.bytes}, {"digest", e.digest}});
        m["files"] = files;
        m["verdicts_ok"] = ok;

        std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write manifest.json");
        out << m.dump(2) << "\n";
        out.flush();
        if (!out) throw ConfigError("write failed: manifest.json");
    } catch (...) {
        fs::remove_all(dir, ec);
        throw;
    }

    RunManifest rm;
    rm.subcommand = cfg.subcommand;
    rm.artifact_version = kArtifactVersion;
    rm.seed = cfg.seed();
    rm.verdicts_ok = ok;
    rm.dir = dir;
    rm.files = em.entries();
    return rm;
}

std::string emit_plot_data(const std::vector<std::filesystem::path>& report_paths) {
    std::string out = "series,x,y\n";
    for (const fs::path& p : report_paths) {
        std::string label = p.stem().string();
        if (label == "report" && p.has_parent_path() && !p.parent_path().filename().empty())
            label = p.parent_path().filename().string();

        if (p.extension() == ".csv") {
            // chain tables pass through row for row, keeping the slack column bytes
            std::istringstream in(read_text_file(p));
            std::string line;
            bool header = true;
            int idx = 0;
            while (std::getline(in, line)) {
                if (header) {
                    header = false;
                    continue;
                }
                if (trim(line).empty()) continue;
                std::vector<std::string> cols = split_list(line, ',');
                if (cols.size() < 4) throw ConfigError(p.string() + ": expected chain rows");
                out += label + "/chain_slack," + std::to_string(idx++) + "," + cols[3] + "\n";
            }
            continue;
        }

        json j = load_json_file(p);
        if (j.contains("chain") && j["chain"].is_object() && j["chain"].contains("lines")) {
            int idx = 0;
            for (const json& l : j["chain"]["lines"])
                out += label + "/chain_slack," + std::to_string(idx++) + "," +
                       fmt_real(l.value("slack", 0.0)) + "\n";
        }
        if (j.contains("rounds") && j["rounds"].is_array()) {
            int idx = 0;
            for (const json& r : j["rounds"])
                out += label + "/expected_s," + std::to_string(idx++) + "," +
                       fmt_real(r.value("expected_s", 0.0)) + "\n";
        }
        if (j.contains("rows") && j["rows"].is_array()) {
            for (const json& r : j["rows"]) {
                if (!r.contains("t") || !r.contains("n2") || !r.contains("measured")) continue;
                out += label + "/n2=" + std::to_string(r["n2"].get<long long>()) + "," +
                       std::to_string(r["t"].get<long long>()) + "," +
                       fmt_real(r["measured"].get<double>()) + "\n";
            }
        }
        if (j.contains("acceptance") && j["acceptance"].is_number())
            out += label + "/acceptance,0," + fmt_real(j["acceptance"].get<double>()) + "\n";
    }
    return out;
}

}  // namespace zklab
