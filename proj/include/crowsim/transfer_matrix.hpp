#pragma once
#include <Eigen/Dense>
#include <array>
#include <complex>

namespace crowsim {

// 4x4 map of (a, b, c, d) field amplitudes across one unit cell of the 1D
// resonator/waveguide chain. (a, b) ride one waveguide arm, (c, d) the
// other; a and c are the right-movers.
using TransferMatrix = Eigen::Matrix4cd;

struct ChainParams {
    double r = 0.0;            // coupler reflection, in (0, 1)
    double t = 0.0;            // coupler transmission, r^2 + t^2 = 1
    double betaR = 0.0;        // resonator half-perimeter phase
    double betaL = 0.0;        // waveguide arm phase
    double alphaPhase = 0.0;   // 2*pi*alpha*y arm imbalance
    double finesse() const { return M_PI / (1.0 - r * r); }
};

// On-resonance encoding R = n*lambda0 and L = (2p+1)*lambda0/4 with p odd;
// the detuning delta = Delta/(2*kappa) rides on top through the round-trip
// phase budget 4*kappa = (1 - r^2) c / R.
ChainParams chain_params(double deltaOver2kappa, double finesse, int n = 1, int pOdd = 1,
                         double alphaPhase = 0.0);

TransferMatrix m_res(double betaR);
TransferMatrix m_wg(double betaL, double alphaPhase);
TransferMatrix m_cpl(std::complex<double> r, std::complex<double> t);
// scatterers placed symmetrically in both waveguide arms, coupling (a,d)
// and (b,c); r_s = i*eps*sqrt(1 - eps^2/4), t_s = 1 - eps^2/2
TransferMatrix m_scatt(double epsilon);
// one scatterer in a single arm, coupling (a,d) only; the backscattering
// disorder cell uses this
TransferMatrix m_scatt_single_arm(double epsilon);

enum class CellVariant { Plain, WaveguideScatterer, ResonatorScatterer };

// Ordered constituent product for the chosen variant. A lossless coupler
// needs a pi/2 phase between r and t; placing it on the transmission keeps
// the tight-binding sign convention, so the cells use m_cpl(r, i*t).
TransferMatrix unit_cell(const ChainParams& p, CellVariant v, double epsilon = 0.0);

struct BlochSolution {
    std::array<std::complex<double>, 4> eigenvalues;
    std::array<std::complex<double>, 4> KLambda;  // -i log eigenvalue
    int propagatingCount = 0;                     // | |lambda| - 1 | <= 1e-8
};
BlochSolution bloch_dispersion(const TransferMatrix& m);

struct SpinFlipEigenvalues {
    // closed forms: right-movers then left-movers, each +/- branch
    std::array<std::complex<double>, 4> values;
    // first-order dispersions cos(KLambda) = -delta/(1 +/- eps)
    double cosKPlus = 0.0, cosKMinus = 0.0;
};
SpinFlipEigenvalues spin_flip_eigenvalues(double deltaOver2kappa, double epsilon);

// Block conversion S = [[A - B D^-1 C, B D^-1], [-D^-1 C, D^-1]] of a
// transfer matrix in a (forward pair, backward pair) mode basis. Throws in
// the evanescent regime (singular D block).
Eigen::Matrix4cd s_matrix(const TransferMatrix& m);

// Columns: forward and backward Bloch modes of a propagating-cell matrix,
// per arm block, flux-normalized (|v1|^2 - |v2|^2 = +/-1) with the largest
// component rotated real; order (fwd arm1, fwd arm2, bwd arm1, bwd arm2).
Eigen::Matrix4cd bloch_mode_basis(const TransferMatrix& m0);

// S-matrix of two plain cells with one single-arm scatterer in between, in
// the Bloch mode basis of the plain cell tuned so cos(KLambda) is the Bloch
// phase requested.
Eigen::Matrix4cd disorder_cell_s(double KLambda, double finesse, double epsilon,
                                 int n = 1, int pOdd = 1);

struct ScatteringAmplitudes {
    std::complex<double> tUp, rUp, tDown, rDown;
};

// Magnetic-disorder scattering on the 1D tight-binding chain: an incoming
// spin-up Bloch wave at wavenumber KLambda hits one spin-mixing site of
// strength epsilonPrime. First order by default; exact solves the matching
// linear system.
ScatteringAmplitudes model_scattering_solution(double KLambda, double epsilonPrime,
                                               bool exact = false);

// omega(K) = -2*kappa*cos(KLambda + alphaPhase) - i*(2/pi)*mu*kappa*F;
// the imaginary part is -kappa_in with kappa_in = 2*mu*kappa*F/pi.
std::complex<double> lossy_dispersion(double KLambda, double mu, double finesse,
                                      double kappa, double alphaPhase = 0.0);

} // namespace crowsim
