#pragma once
#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace crowsim {

enum class Boundary { Open, Torus };

// Up = counter-clockwise circulation, stored first; Down = clockwise.
enum class Spin { Up, Down };

struct LatticeSpec {
    int nx = 1;              // columns
    int ny = 1;              // rows
    double alpha = 0.0;      // flux quanta per plaquette, interpreted mod 1
    Boundary boundary = Boundary::Open;
    double kappa = 1.0;      // tunneling rate, the global energy unit
};

// Flattened basis index: Up block first, row-major (y outer, x inner).
int site_index(const LatticeSpec& spec, int x, int y, Spin s);

struct HamiltonianMatrix {
    Eigen::MatrixXcd m;
    int nx = 0, ny = 0;
    double kappa = 1.0;
    bool isHermitian = true;
    int dim() const { return static_cast<int>(m.rows()); }
    int sites() const { return nx * ny; }
    // true when only one spin block is stored (analysis matrices)
    bool singleSpin() const { return dim() == sites(); }
};

struct OnsiteEntry {
    int x = 0, y = 0;
    double U = 0.0;          // frequency mismatch, applied to both spins
};

struct MagneticScatterer {
    int x = 0, y = 0;
    double strengthEpsF = 0.0;  // the product eps*F; sign meaningful
    double phase = 0.0;         // stored mod 2*pi
};

struct DisorderSpec {
    std::vector<OnsiteEntry> onsite;
    std::vector<MagneticScatterer> magneticScatterers;
    double lossRate = 0.0;      // kappa_in, uniform on every diagonal entry
};

// Magnetic tight-binding Hamiltonian in Landau gauge: x hops carry
// -kappa*exp(-i*2*pi*alpha*y*sigma), y hops carry -kappa. Torus boundary
// adds wrap bonds with phases chosen so every plaquette, wrap plaquettes
// included, encloses flux 2*pi*alpha; this requires nx*ny*alpha integral.
HamiltonianMatrix build_h0(const LatticeSpec& spec);

// Every vertical bond carries the 2x2 spin matrix -kappa*[[1,eps],[eps,1]];
// x bonds as in build_h0. Warns above |eps| = 0.3 (first-order derivation).
HamiltonianMatrix build_spin_flip(const LatticeSpec& spec, double epsilon);

// build_h0 hopping plus the on-site spin mixing -(4*eps*kappa*F/pi)*sigma_x.
HamiltonianMatrix build_zeeman(const LatticeSpec& spec, double epsilon, double finesse);

// Adds onsite shifts (+U, both spins), magnetic scatterers
// (2*strengthEpsF*kappa/pi)*[[0,e^{-i phi}],[e^{i phi},0]], and uniform loss
// -i*lossRate on every diagonal entry (clears isHermitian).
HamiltonianMatrix apply_disorder(const HamiltonianMatrix& h, const LatticeSpec& spec,
                                 const DisorderSpec& dis);

// Gaussian on-site disorder, std width*kappa, filled row-major by (y, x).
DisorderSpec sample_onsite_disorder(const LatticeSpec& spec, double width, std::uint64_t seed);

// A scatterer at every site: Gaussian strengthEpsF (std strengthWidth),
// uniform phase in [0, 2*pi); per site one normal then one uniform draw,
// row-major by (y, x).
DisorderSpec sample_magnetic_disorder(const LatticeSpec& spec, double strengthWidth,
                                      std::uint64_t seed);

// 1D open chain of n resonators, nearest-neighbor -kappa, both spin blocks.
HamiltonianMatrix build_crow_chain(int n, double kappa);

// Up-spin square block wrapped for single-circulation analyses.
HamiltonianMatrix up_block(const HamiltonianMatrix& h);

// Time-reversal partner: swap spin blocks and conjugate. Drives the Down
// circulation of the original system.
HamiltonianMatrix time_reverse(const HamiltonianMatrix& h);

} // namespace crowsim
