#pragma once
#include "crowsim/lattice.hpp"
#include "crowsim/scattering.hpp"
#include <optional>
#include <vector>

namespace crowsim {

struct EigenSet {
    // ascending by real part; imaginary parts are exactly zero on the
    // Hermitian path
    std::vector<std::complex<double>> values;
    Eigen::MatrixXcd vectors;  // columns, matching values
    bool hermitian = true;
    std::vector<double> realValues() const;
};

// Dense eigensolver wrapper: self-adjoint path when isHermitian, general
// complex path otherwise. Dimension cap 4096.
EigenSet eigensolve(const HamiltonianMatrix& h);

struct ButterflyMap {
    std::vector<double> alphaGrid;
    std::vector<double> omegaGrid;
    Eigen::MatrixXd reflectivity;  // rows alpha, cols omega; NaN for skipped alpha
    double threshold = 0.005;
    bool supported(int ia, int iw) const { return reflectivity(ia, iw) > threshold; }
};

// R'(omega) column per flux value. Incommensurate torus fluxes are skipped
// with a warning and leave a NaN column.
ButterflyMap butterfly_scan(const LatticeSpec& tmpl, const std::vector<double>& alphaGrid,
                            const std::vector<double>& omegaGrid, const ProbeSpec& probe,
                            double threshold = 0.005);

struct Bond {
    int i = 0, j = 0;          // flat indices, i < j
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double current = 0.0;      // current i -> j; j -> i is its negative
};

struct CurrentField {
    std::vector<Bond> bonds;
    // signed sum of currents out of a flat site index
    double divergence(int site) const;
};

// current(i->j) = 2*Im(psi_i^* H_ij psi_j) for every off-diagonal entry,
// stored once with i < j.
CurrentField bond_current(const HamiltonianMatrix& h, const Eigen::VectorXcd& psi);

enum class EdgeSide { Lower, Upper };

struct DispersionPoint {
    double energy = 0.0;
    double KLambda = 0.0;
    EdgeSide edge = EdgeSide::Lower;
};

// Edge wavenumber extraction on a single-spin open-boundary block. A state
// qualifies when its perimeter weight passes the edge threshold and the
// designated edge row holds clearly more than a uniform row share; KLambda
// is the amplitude-weighted circular mean of consecutive-site phase steps
// along that row. States with fewer than 2 significant row amplitudes are
// skipped with a diagnostic.
std::vector<DispersionPoint> edge_dispersion(const HamiltonianMatrix& hSingleSpin,
                                             EdgeSide edge,
                                             double edgeWeightThreshold = 0.5);

enum class StateClass { Edge, Bulk };

// Edge iff probability on perimeter sites >= threshold.
StateClass classify_state(const Eigen::VectorXcd& psi, const LatticeSpec& spec,
                          double threshold = 0.5);
double perimeter_weight(const Eigen::VectorXcd& psi, const LatticeSpec& spec);

// Equal partition of N sorted eigenvalues into q magnetic bands of N/q.
// Valid when every internal boundary is either a real gap (>= window) or a
// band touching (<= 1e-6); the Hofstadter clusters at even q touch at zero.
struct BandPartition {
    int q = 0;
    std::vector<std::pair<double, double>> bands;  // [min, max] per band
    bool valid = false;
};
BandPartition magnetic_bands(std::vector<double> sortedValues, int q, double window = 0.05);

// alpha = p/q with gcd(p, q) = 1, |denominator| <= maxDen; false if none fits
bool rationalize_alpha(double alpha, int maxDen, int& p, int& q);

// Magnetic band gap bracketing omega0 on the clean torus spectrum of spec,
// shrunk by `shrink` at both ends; bandBelow/bandAbove are the adjacent bands.
struct EdgeBandWindow {
    double lo = 0.0, hi = 0.0;
    std::pair<double, double> bandBelow, bandAbove;
};
std::optional<EdgeBandWindow> edge_band_window(const LatticeSpec& spec, double omega0,
                                               double shrink);

} // namespace crowsim
