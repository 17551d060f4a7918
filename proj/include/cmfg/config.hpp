#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmfg/agents.hpp"
#include "cmfg/model.hpp"
#include "cmfg/retro.hpp"
#include "cmfg/solvers.hpp"

namespace cmfg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    int nx = 33;
    int ny = 33;
    int nt = 64;
};

struct CarlemanRunConfig {
    std::string theorem = "5.1";
    int suite_size = 20;
    std::vector<double> lambda_list = {1, 2, 5, 10};
    std::vector<double> s_list = {2, 3, 4};
    uint64_t seed = 7;
};

struct AppConfig {
    ModelParams model;
    SolverConfig solver;
    GridSpec grid;
    SimConfig sim;
    RetroConfig retro;
    CarlemanRunConfig carleman;

    Grid make_grid() const { return Grid::square(grid.nx, grid.ny); }
    TimeGrid make_time() const { return TimeGrid::make(model.T, grid.nt); }
};

/// Parse and validate a JSON config; unknown fields are rejected, missing
/// fields take the documented defaults. Throws ConfigError naming the
/// offending field and bound.
AppConfig load_config(const std::string& path);
AppConfig parse_config_json(const std::string& text);

/// Resolved config echoed back as JSON (also embedded in the manifest).
std::string config_to_json(const AppConfig& cfg);

struct ManifestEntry {
    std::string path;
    uint64_t bytes = 0;
    std::string checksum;  // fnv1a-64 of the file contents
};

struct RunManifest {
    std::string command;
    std::string config_json;
    uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::string version;
    std::vector<ManifestEntry> outputs;
};

uint64_t fnv1a_file(const std::string& path);
std::string iso_now();

/// Written atomically (tmp file + rename) at the end of a run.
void write_manifest(const RunManifest& m, const std::string& path);

extern const char* kVersion;

}  // namespace cmfg
