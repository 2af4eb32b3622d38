#include <cstdio>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "zklab/runner.hpp"

namespace {

struct Pending {
    std::string sub;
    std::map<std::string, std::string> kv;
    std::string config_file;
};

// every flag funnels into the same flat key=value map the config file uses,
// so the two sources share one schema; flags win over file entries
void opt(CLI::App* cmd, Pending& p, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        "--" + key, [&p, key](const std::string& v) { p.kv[key] = v; }, help);
}

CLI::App* leaf(CLI::App* parent, Pending& p, const std::string& name, const std::string& subname,
               const std::string& help) {
    CLI::App* cmd = parent->add_subcommand(name, help);
    cmd->callback([&p, subname] { p.sub = subname; });
    cmd->add_option("--config", p.config_file, "key = value config file");
    opt(cmd, p, "out", "run directory (must not already hold files)");
    opt(cmd, p, "enum_limit", "enumeration ceiling (ZKLAB_ENUM_LIMIT overrides)");
    return cmd;
}

void extract_options(CLI::App* cmd, Pending& p) {
    opt(cmd, p, "spec", "instance description file (json)");
    opt(cmd, p, "simulator", "simulator description file (json)");
    opt(cmd, p, "t", "simulator query budget");
    opt(cmd, p, "c", "constant in the min-entropy bound (default 10)");
    opt(cmd, p, "delta", "good-set mass parameter, a float or 'auto'");
    opt(cmd, p, "mode", "hash averaging: auto, exact, or mc");
    opt(cmd, p, "samples", "tuples drawn in mc mode");
    opt(cmd, p, "seed", "rng seed");
    opt(cmd, p, "qubit_cap", "simulation width ceiling");
    opt(cmd, p, "wrong_mode_hash", "1 hashes only the preceding message (regression mode)");
    opt(cmd, p, "markov", "1 adds the coin-function factorization check (private-coin only)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hash-verifier protocol and extraction experiments"};
    app.require_subcommand(1);
    Pending p;

    {
        CLI::App* c = leaf(&app, p, "hash-audit", "hash-audit",
                           "enumerate one hash family and audit its output counts");
        opt(c, p, "n1", "input bits");
        opt(c, p, "n2", "output bits");
        opt(c, p, "t", "tuple length audited (family degree)");
    }
    {
        CLI::App* grp = app.add_subcommand("protocol", "run or compose protocol specs");
        grp->require_subcommand(1);
        CLI::App* r = leaf(grp, p, "run", "protocol-run", "honest run of a prover against a spec");
        opt(r, p, "spec", "instance description file (json)");
        opt(r, p, "prover", "prover description file (json)");
        CLI::App* c = leaf(grp, p, "compose", "protocol-compose",
                           "parallel-compose a spec and compare optimal cheat values");
        opt(c, p, "spec", "instance description file (json)");
        opt(c, p, "copies", "parallel copies (default 2)");
    }
    {
        CLI::App* grp = app.add_subcommand("gi", "graph-pair instance helpers");
        grp->require_subcommand(1);
        CLI::App* b = leaf(grp, p, "build", "gi-build",
                           "build a graph-pair instance, find a witness, report the spec");
        opt(b, p, "spec", "instance description file (json)");
    }
    {
        CLI::App* grp = app.add_subcommand("extract", "run a simulator against hash verifiers");
        grp->require_subcommand(1);
        extract_options(leaf(grp, p, "zq3", "extract-zq3", "three-message public-coin runs"), p);
        extract_options(leaf(grp, p, "zip3", "extract-zip3", "three-message private-coin runs"), p);
        extract_options(leaf(grp, p, "zk", "extract-zk", "2k+1-message runs"), p);
    }
    {
        CLI::App* grp = app.add_subcommand("searchlab", "query-search sweeps");
        grp->require_subcommand(1);
        CLI::App* c = leaf(grp, p, "classical", "searchlab-classical",
                           "adaptive classical search optimum sweep");
        opt(c, p, "t", "max query budget");
        opt(c, p, "n2", "max output bits");
        CLI::App* g = leaf(grp, p, "grover", "searchlab-grover",
                           "amplitude amplification sweep against the closed form");
        opt(g, p, "t", "max query budget");
        opt(g, p, "n2", "max output bits");
        leaf(grp, p, "equiv", "searchlab-equiv",
             "hash-family versus all-functions equivalence checks");
        leaf(grp, p, "reduce", "searchlab-reduce",
             "target search to single-point location reduction checks");
    }
    {
        CLI::App* s = leaf(&app, p, "suite", "suite", "every experiment at pinned parameters");
        opt(s, p, "seed", "rng seed");
        opt(s, p, "samples", "tuples drawn in mc mode");
        opt(s, p, "regression_samples", "tuples for the regression experiment");
    }
    {
        CLI::App* c = leaf(&app, p, "plot-data", "plot-data",
                           "flatten reports into a long-format series,x,y table");
        opt(c, p, "reports", "comma-separated report paths");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    zklab::RunConfig cfg;
    cfg.subcommand = p.sub;
    cfg.kv = p.kv;
    try {
        if (!p.config_file.empty()) cfg.load_file(p.config_file);
        zklab::RunManifest m = zklab::run(cfg);
        std::printf("%s: wrote %zu files to %s\n", m.subcommand.c_str(), m.files.size(),
                    m.dir.string().c_str());
        if (!m.verdicts_ok) {
            std::fprintf(stderr, "%s: verdict failure, see report.json\n", m.subcommand.c_str());
            return 4;
        }
        return 0;
    } catch (const zklab::LimitError& e) {  // covers budget overruns too
        std::fprintf(stderr, "limit: %s\n", e.what());
        return 3;
    } catch (const zklab::ConfigError& e) {
        std::fprintf(stderr, "config: %s\n", e.what());
        return 2;
    } catch (const zklab::DomainError& e) {
        std::fprintf(stderr, "domain: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
