#pragma once
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "crowsim/lattice.hpp"
#include "crowsim/scattering.hpp"

namespace crowsim {

struct OmegaGridSpec {
    double min = -4.0;
    double max = 4.0;
    int count = 201;
    std::vector<double> build() const;
};

struct CrowSpec {
    int n = 10;
    double nu = 2.0;
};

struct DefectSpec {
    int x = 0;  // 0-based internal coordinates
    int y = 0;
    double U = 5.0;
};

// One resolved run description. JSON configs and CLI flags both land here;
// probe and defect coordinates are 1-based on the wire and 0-based in this
// struct.
struct ExperimentConfig {
    int nx = 10, ny = 10;
    double alpha = 0.25;
    Boundary boundary = Boundary::Open;
    double kappa = 1.0;

    int inX = 1, inY = 0, outX = 8, outY = 0;
    double nu = 6.0;

    OmegaGridSpec omegaGrid;
    double probeOmega = 1.5;

    int realizations = 50;
    double disorderWidth = 0.4;
    double magneticDisorderWidth = 0.0;
    double lossRate = 0.0;
    std::uint64_t seed = 0;
    bool hasSeed = false;

    int alphaCount = 10;
    double threshold = 0.005;

    std::vector<int> crowSizes{10, 20, 40};
    std::vector<int> latticeSizes{10, 12, 14};
    std::optional<CrowSpec> crow;
    std::optional<DefectSpec> defect;

    double edgeWeightThreshold = 0.5;
    double degeneracyWindow = 0.05;

    double finesse = 300.0;
    double scattererEps = 0.05;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Ensemble statistics on the frequency grid. Delay entries are skipped
// where a realization reports nan (reflection below the phase floor); a
// grid point with no usable realization stays nan. Std is population std.
struct EnsembleStats {
    std::vector<double> omega;
    std::vector<double> meanRPrime, stdRPrime;
    std::vector<double> meanDelay, stdDelay;
    std::vector<std::uint64_t> perRealizationSeeds;
};

struct EnsembleResult {
    EnsembleStats lattice;
    std::optional<EnsembleStats> crow;
};

// Disorder realization k draws onsite energies from child_seed(seed, k) and
// scatterer strengths/phases from child_seed(child_seed(seed, k), 1), so
// the two channels never share a stream and the set is reproducible for
// any worker count.
EnsembleResult run_transport_ensemble(const ExperimentConfig& cfg);

enum class SweepFamily { Crow, Lattice };

struct SweepRow {
    SweepFamily family;
    int size;
    int proxy;  // resonators traversed between probes
    double mean;
    double stddev;
};

// Crow family: end-to-end transfer at omega = 0. Lattice family: square
// lattices at the configured flux probed along the lower edge at probeOmega.
std::vector<SweepRow> run_size_sweep(const ExperimentConfig& cfg, SweepFamily family);

// Writes classification.csv, dispersion.csv, currents.csv (and
// currents-defect.csv when a defect is configured) into outDir.
void run_edge_state_report(const ExperimentConfig& cfg, const std::string& outDir);

// Fixed battery of chain-matrix identities; writes tmatrix-checks.csv.
// Returns the number of failed checks.
int run_tmatrix_checks(const ExperimentConfig& cfg, const std::string& outDir);

int worker_count();

int run_cli(int argc, char** argv);

} // namespace crowsim
