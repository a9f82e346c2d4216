#pragma once
#include "crowsim/lattice.hpp"
#include <vector>

namespace crowsim {

struct ProbeSpec {
    int inX = 0, inY = 0;
    int outX = 0, outY = 0;
    double nu = 1.0;            // waveguide-induced decay rate, units of kappa
    // coincident in/out is only meaningful for the single-resonator
    // closed-form mode and must be requested explicitly
    bool allowCoincident = false;
};

struct TransportCoefficients {
    double omega = 0.0;
    std::complex<double> t;       // forward transmission, input waveguide
    std::complex<double> r;       // back-reflection, input waveguide
    std::complex<double> rPrime;  // drop-channel reflection, output waveguide
    std::complex<double> tPrime;  // output-waveguide forward leakage
    double RPrime() const { return std::norm(rPrime); }
};

struct TransportSpectrum {
    std::vector<double> omega;
    std::vector<TransportCoefficients> coeff;
};

// Diagonal self-energy: -i*nu/2 at the Up and Down entries of inSite and
// outSite (each running-wave direction couples to one circulation sense;
// both circulations decay). Coincident probes add: -i*nu per entry.
HamiltonianMatrix self_energy(const ProbeSpec& probe, const LatticeSpec& spec);

// Solves (omega*I - H - Sigma) g = e_source. Throws if the residual of the
// factored solve exceeds 1e-10 (decoupled-state singularity), reporting it.
Eigen::VectorXcd greens_column(const HamiltonianMatrix& h, const HamiltonianMatrix& sigma,
                               double omega, int source);

// Input drives the Up circulation at inSite. t = 1 - i*nu*G_{in^,in^} and
// r' = -i*nu*G_{out^,in^}; the backward channels route through the Down
// entries: r = -i*nu*G_{inv,in^}, t' = -i*nu*G_{outv,in^}.
TransportCoefficients transport(const HamiltonianMatrix& h, const ProbeSpec& probe,
                                double omega);

// One factorization per frequency; grid must be strictly increasing.
TransportSpectrum transport_spectrum(const HamiltonianMatrix& h, const ProbeSpec& probe,
                                     const std::vector<double>& omegaGrid);

// Group delay d arg r'/d omega: central differences on the unwrapped phase,
// one-sided at the ends. Points with |r'| < 1e-8 get a NaN sentinel.
std::vector<double> group_delay(const TransportSpectrum& s);

} // namespace crowsim
