#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "zklab/runner.hpp"

using namespace zklab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("zklab_runner_" + tag);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out << content;
}

std::string rehash(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64_str(bytes)));
    return buf;
}

const char* kGiSpec =
    R"({"kind": "gi", "v": 3, "edges0": [[0,1],[1,2]], "edges1": [[1,2],[0,2]], "copies": 1, "shape": "qam3"})";
const char* kWitnessSim = R"({"kind": "gi_witness"})";

}  // namespace

TEST_CASE("config text parses, trims, and rejects malformed lines") {
    auto kv = RunConfig::parse_kv_text("# banner\n t = 3 \nout=/tmp/x # trailing\n\nname = a b\n");
    CHECK(kv.at("t") == "3");
    CHECK(kv.at("out") == "/tmp/x");
    CHECK(kv.at("name") == "a b");
    CHECK_THROWS_AS(RunConfig::parse_kv_text("just words\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse_kv_text("= 4\n"), ConfigError);

    RunConfig cfg;
    cfg.kv = {{"t", "3"}, {"c", "2.5"}, {"bad", "x"}};
    CHECK(cfg.get_int("t", 0) == 3);
    CHECK(cfg.get_real("c", 0.0) == doctest::Approx(2.5));
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(cfg.get_int("bad", 0), ConfigError);
    CHECK_THROWS_AS(cfg.require_str("nope"), ConfigError);
    CHECK(cfg.seed() == 1);

    setenv("ZKLAB_ENUM_LIMIT", "8", 1);
    CHECK(cfg.enum_limit() == 8);
    setenv("ZKLAB_ENUM_LIMIT", "junk", 1);
    CHECK_THROWS_AS(cfg.enum_limit(), ConfigError);
    unsetenv("ZKLAB_ENUM_LIMIT");
    CHECK(cfg.enum_limit() == kDefaultEnumLimit);
}

TEST_CASE("hash function records round trip through json") {
    HashFamily fam(2, 2, 3);
    HashFunction h = fam.at(37);
    HashFunction back = hash_function_from_json(hash_function_to_json(h));
    CHECK(back.m == h.m);
    CHECK(back.n1 == h.n1);
    CHECK(back.n2 == h.n2);
    CHECK(back.coefficients == h.coefficients);
    for (u64 a = 0; a < 4; ++a) CHECK(back.eval(a) == h.eval(a));
    CHECK_THROWS_AS(hash_function_from_json("{\"m\": 1}"), ConfigError);
    CHECK_THROWS_AS(hash_function_from_json("not json"), ConfigError);
}

TEST_CASE("hash audit run lists the full family and digests match the files") {
    fs::path dir = fresh_dir("hash");
    RunConfig cfg;
    cfg.subcommand = "hash-audit";
    cfg.kv = {{"n1", "2"}, {"n2", "2"}, {"t", "3"}, {"out", dir.string()}};
    RunManifest m = run(cfg);
    CHECK(m.verdicts_ok);
    REQUIRE(m.files.size() == 1);
    CHECK(m.files[0].name == "report.json");

    std::string text = slurp(dir / "report.json");
    CHECK(m.files[0].digest == rehash(text));
    json rep = json::parse(text);
    CHECK(rep["family"]["size"] == 64);
    CHECK(rep["members"].size() == 64);
    CHECK(rep["point_audit"]["max_count_deviation"] == 0);
    CHECK(rep["tuple_audit"]["max_count_deviation"] == 0);

    json man = json::parse(slurp(dir / "manifest.json"));
    CHECK(man["subcommand"] == "hash-audit");
    CHECK(man["verdicts_ok"] == true);
    REQUIRE(man["files"].size() == 1);
    CHECK(man["files"][0]["digest"] == m.files[0].digest);
    fs::remove_all(dir);
}

TEST_CASE("extraction runs are reproducible and refuse dirty output directories") {
    fs::path work = fresh_dir("extract_work");
    fs::create_directories(work);
    spill(work / "gi.json", kGiSpec);
    spill(work / "sim.json", kWitnessSim);

    auto make_cfg = [&](const fs::path& out) {
        RunConfig cfg;
        cfg.subcommand = "extract-zq3";
        cfg.kv = {{"spec", (work / "gi.json").string()},
                  {"simulator", (work / "sim.json").string()},
                  {"t", "1"}, {"seed", "5"}, {"out", out.string()}};
        return cfg;
    };

    fs::path d1 = work / "run1";
    fs::path d2 = work / "run2";
    RunManifest m1 = run(make_cfg(d1));
    RunManifest m2 = run(make_cfg(d2));
    CHECK(m1.verdicts_ok);
    REQUIRE(m1.files.size() == m2.files.size());
    for (size_t i = 0; i < m1.files.size(); ++i) {
        CHECK(m1.files[i].name == m2.files[i].name);
        CHECK(m1.files[i].digest == m2.files[i].digest);
    }

    json rep = json::parse(slurp(d1 / "report.json"));
    CHECK(rep["q"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rep["chain"]["all_ok"] == true);
    CHECK(rep["verdicts_ok"] == true);
    CHECK(slurp(d1 / "chain.csv") == slurp(d2 / "chain.csv"));
    CHECK(slurp(d1 / "s_table.csv").rfind("round,prefix,s,beta\n", 0) == 0);

    // an already-populated target is refused before anything is written
    CHECK_THROWS_AS(run(make_cfg(d1)), ConfigError);
    CHECK(fs::exists(d1 / "report.json"));
    fs::remove_all(work);
}

TEST_CASE("failed runs leave no partial output directory behind") {
    fs::path work = fresh_dir("fail_work");
    fs::create_directories(work);
    spill(work / "bad.json", R"({"kind": "unheard_of"})");
    spill(work / "gi.json", kGiSpec);
    spill(work / "mismatch.json", R"({"kind": "regression_adversary"})");

    fs::path out = work / "out";
    RunConfig cfg;
    cfg.subcommand = "extract-zq3";
    cfg.kv = {{"spec", (work / "bad.json").string()},
              {"simulator", (work / "sim.json").string()}, {"out", out.string()}};
    CHECK_THROWS_AS(run(cfg), ConfigError);
    CHECK_FALSE(fs::exists(out));

    cfg.kv["spec"] = (work / "gi.json").string();
    cfg.kv["simulator"] = (work / "mismatch.json").string();
    CHECK_THROWS_AS(run(cfg), ConfigError);
    CHECK_FALSE(fs::exists(out));

    cfg.subcommand = "no-such-mode";
    CHECK_THROWS_AS(run(cfg), ConfigError);
    CHECK_FALSE(fs::exists(out));
    fs::remove_all(work);
}

TEST_CASE("honest protocol run accepts with certainty") {
    fs::path work = fresh_dir("proto_work");
    fs::create_directories(work);
    spill(work / "gi.json", kGiSpec);
    spill(work / "prover.json", R"({"kind": "honest_gi"})");

    RunConfig cfg;
    cfg.subcommand = "protocol-run";
    cfg.kv = {{"spec", (work / "gi.json").string()},
              {"prover", (work / "prover.json").string()},
              {"out", (work / "out").string()}};
    RunManifest m = run(cfg);
    CHECK(m.verdicts_ok);
    json rep = json::parse(slurp(work / "out" / "report.json"));
    CHECK(rep["acceptance"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(slurp(work / "out" / "transcript.csv").rfind("packed,prob\n", 0) == 0);
    fs::remove_all(work);
}

TEST_CASE("plot data has a stable header and keeps chain rows") {
    CHECK(emit_plot_data({}) == "series,x,y\n");
    CHECK_THROWS_AS(emit_plot_data({fs::path("/no/such/report.json")}), ConfigError);

    fs::path work = fresh_dir("plot_work");
    fs::create_directories(work);
    spill(work / "gi.json", kGiSpec);
    spill(work / "sim.json", kWitnessSim);
    RunConfig cfg;
    cfg.subcommand = "extract-zq3";
    cfg.kv = {{"spec", (work / "gi.json").string()},
              {"simulator", (work / "sim.json").string()},
              {"t", "1"}, {"out", (work / "out").string()}};
    run(cfg);

    json rep = json::parse(slurp(work / "out" / "report.json"));
    size_t chain_lines = rep["chain"]["lines"].size();

    auto count_rows = [](const std::string& csv, const std::string& needle) {
        size_t n = 0, pos = 0;
        while ((pos = csv.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };

    std::string from_json = emit_plot_data({work / "out" / "report.json"});
    CHECK(count_rows(from_json, "out/chain_slack,") == chain_lines);
    CHECK(count_rows(from_json, "out/expected_s,") == rep["rounds"].size());

    std::string from_csv = emit_plot_data({work / "out" / "chain.csv"});
    CHECK(count_rows(from_csv, "/chain_slack,") == chain_lines);
    fs::remove_all(work);
}

TEST_CASE("grover subcommand emits the sweep format the plotter understands") {
    fs::path dir = fresh_dir("grover");
    RunConfig cfg;
    cfg.subcommand = "searchlab-grover";
    cfg.kv = {{"t", "3"}, {"n2", "2"}, {"out", dir.string()}};
    RunManifest m = run(cfg);
    CHECK(m.verdicts_ok);
    CHECK(slurp(dir / "sweep.csv").rfind("t,n2,measured,bound,slack\n", 0) == 0);

    std::string plot = emit_plot_data({dir / "report.json"});
    size_t rows_n2_2 = 0, pos = 0;
    while ((pos = plot.find("/n2=2,", pos)) != std::string::npos) {
        ++rows_n2_2;
        pos += 4;
    }
    CHECK(rows_n2_2 == 4);  // one point per query budget 0..3
    fs::remove_all(dir);
}
