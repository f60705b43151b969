#pragma once

#include "mfnet/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfnet {

struct SimulateBlock {
    std::vector<long long> M_list;
    double rho = 0.0;
    double t_max = 0.0;
    double sample_dt = 0.0; // 0 means t_max / 10
    int replicas = 1;
    std::string placement = "origin";  // origin | uniform
    std::string origin = "";           // node name for "origin"; first node if empty
    bool record_events = false;
    std::optional<std::uint64_t> seed;
};

struct NlmpBlock {
    int L = 20;
    double dt = 0.0;           // 0 picks default_dt
    double T = 10.0;
    double rho = 0.05;
    double sample_every = 0.0; // 0 means T / 100
    std::string overflow = "track";
    nlohmann::json initial;    // {"kind": "color", "color": "O.O"} or {"kind": "file", "path": ...}
};

struct FixpointBlock {
    double rho = 0.0;
    int L = 40;
};

struct ContractionBlock {
    double K = 10.0;
    int pairs = 20;
    int L = 20;
    std::optional<std::uint64_t> seed;
};

struct MarginBlock {
    double rho = 0.01;
    double K = 10.0;
    int L = 16;
    int contraction_pairs = 20;
    int lipschitz_pairs = 100;
    std::vector<double> rho_grid; // empty keeps the default grid
    std::optional<std::uint64_t> seed;
};

struct CompareBlock {
    std::vector<long long> M_list;
    double rho = 0.0;
    double burn_in = 50.0;
    double t_max = 2e4;
    int replicas = 8;
    double relax_t_max = 8.0;
    double relax_dt = 0.05;
    long long client_samples = 100000;
    std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
    std::filesystem::path network_file; // resolved against the config directory
    std::uint64_t seed = 0;
    nlohmann::json raw;
    std::optional<SimulateBlock> simulate;
    std::optional<NlmpBlock> nlmp;
    std::optional<FixpointBlock> fixpoint;
    std::optional<ContractionBlock> contraction;
    std::optional<MarginBlock> margin;
    std::optional<CompareBlock> compare;
};

/// Parses and validates a config document. Throws ParseError with the JSON
/// pointer of the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
/// Reads the file; syntax errors carry line and column.
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Hash of the canonical config JSON followed by the canonical network JSON.
std::uint64_t config_hash(const ExperimentConfig& cfg, const ElementaryNetwork& net);

/// Runs the command line. Returns 0 on success, 1 on validation failures and
/// 2 on numerical failures. Diagnostics go to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mfnet
