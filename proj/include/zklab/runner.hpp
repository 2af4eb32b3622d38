#pragma once

#include <filesystem>

#include "zklab/extract.hpp"
#include "zklab/searchlab.hpp"

namespace zklab {

// Flat key=value configuration. Values resolved from a config file and
// command-line flags; flags win. All getters throw ConfigError naming the
// offending key.
struct RunConfig {
    std::string subcommand;
    std::map<std::string, std::string> kv;

    static std::map<std::string, std::string> parse_kv_text(const std::string& text);
    void load_file(const std::filesystem::path& path);  // file fills only unset keys

    bool has(const std::string& key) const { return kv.count(key) > 0; }
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_real(const std::string& key, double fallback) const;

    u64 seed() const { return static_cast<u64>(get_int("seed", 1)); }
    // config value, overridden by the ZKLAB_ENUM_LIMIT environment variable
    u64 enum_limit() const;
    std::filesystem::path out_dir() const { return require_str("out"); }
};

struct ManifestEntry {
    std::string name;  // path relative to the run directory
    u64 bytes = 0;
    std::string digest;  // fnv1a-64 of the file contents, hex
};

struct RunManifest {
    std::string subcommand;
    std::string artifact_version;
    u64 seed = 1;
    bool verdicts_ok = true;
    std::filesystem::path dir;
    std::vector<ManifestEntry> files;
};

// Executes one experiment into a fresh directory: report.json plus CSV
// tables, then manifest.json. On any error the partially written directory
// is removed and the error rethrown.
RunManifest run(const RunConfig& config);

// Long-format (series,x,y) CSV built from previously written reports.
std::string emit_plot_data(const std::vector<std::filesystem::path>& report_paths);

// ---- JSON bridges (implementation keeps the JSON library out of the core) ----

std::string hash_function_to_json(const HashFunction& h);
HashFunction hash_function_from_json(const std::string& text);

// Problem instances are described by kind + parameters; predicates are code,
// so specs serialize as instance descriptions rather than raw tables.
struct InstanceBundle {
    std::string kind;
    ProtocolSpec spec;
    std::optional<GiInstance> gi;
    std::optional<SeqGiInstance> seq;
};

InstanceBundle load_spec_file(const std::filesystem::path& path);
QueryAlgorithm load_simulator_file(const std::filesystem::path& path, const InstanceBundle& inst);
TabulatedProver load_prover_file(const std::filesystem::path& path, const InstanceBundle& inst);

}  // namespace zklab
