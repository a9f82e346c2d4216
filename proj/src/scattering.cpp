#include "crowsim/scattering.hpp"
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace crowsim {

namespace {
const std::complex<double> I{0.0, 1.0};

void validate_probe(const ProbeSpec& p, const LatticeSpec& spec) {
    auto inRange = [&](int x, int y) {
        return x >= 0 && x < spec.nx && y >= 0 && y < spec.ny;
    };
    if (!inRange(p.inX, p.inY) || !inRange(p.outX, p.outY))
        throw std::invalid_argument("probe site out of range");
    if (p.nu <= 0.0) throw std::invalid_argument("probe rate nu must be positive");
    if (p.inX == p.outX && p.inY == p.outY && !p.allowCoincident)
        throw std::invalid_argument("coincident probe sites need allowCoincident");
}
} // namespace

HamiltonianMatrix self_energy(const ProbeSpec& probe, const LatticeSpec& spec) {
    validate_probe(probe, spec);
    HamiltonianMatrix sig;
    sig.nx = spec.nx;
    sig.ny = spec.ny;
    sig.kappa = spec.kappa;
    sig.isHermitian = false;
    sig.m = Eigen::MatrixXcd::Zero(2 * spec.nx * spec.ny, 2 * spec.nx * spec.ny);
    const std::complex<double> half = -I * (probe.nu / 2.0);
    for (Spin s : {Spin::Up, Spin::Down}) {
        sig.m(site_index(spec, probe.inX, probe.inY, s),
              site_index(spec, probe.inX, probe.inY, s)) += half;
        sig.m(site_index(spec, probe.outX, probe.outY, s),
              site_index(spec, probe.outX, probe.outY, s)) += half;
    }
    return sig;
}

Eigen::VectorXcd greens_column(const HamiltonianMatrix& h, const HamiltonianMatrix& sigma,
                               double omega, int source) {
    if (source < 0 || source >= h.dim())
        throw std::invalid_argument("source index out of range");
    Eigen::MatrixXcd A = -h.m - sigma.m;
    A.diagonal().array() += omega;
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(h.dim());
    e(source) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    Eigen::VectorXcd g = lu.solve(e);
    double resid = (A * g - e).norm();
    if (!(resid <= 1e-10)) {
        std::ostringstream os;
        os << "singular linear system at omega=" << omega << ", residual norm " << resid;
        throw std::runtime_error(os.str());
    }
    return g;
}

TransportCoefficients transport(const HamiltonianMatrix& h, const ProbeSpec& probe,
                                double omega) {
    LatticeSpec spec{h.nx, h.ny, 0.0, Boundary::Open, h.kappa};
    HamiltonianMatrix sig = self_energy(probe, spec);
    int inU = site_index(spec, probe.inX, probe.inY, Spin::Up);
    int inD = site_index(spec, probe.inX, probe.inY, Spin::Down);
    int outU = site_index(spec, probe.outX, probe.outY, Spin::Up);
    int outD = site_index(spec, probe.outX, probe.outY, Spin::Down);
    Eigen::VectorXcd g = greens_column(h, sig, omega, inU);
    TransportCoefficients c;
    c.omega = omega;
    c.t = 1.0 - I * probe.nu * g(inU);
    c.rPrime = -I * probe.nu * g(outU);
    c.r = -I * probe.nu * g(inD);
    c.tPrime = -I * probe.nu * g(outD);
    return c;
}

TransportSpectrum transport_spectrum(const HamiltonianMatrix& h, const ProbeSpec& probe,
                                     const std::vector<double>& omegaGrid) {
    for (size_t i = 1; i < omegaGrid.size(); ++i)
        if (!(omegaGrid[i] > omegaGrid[i - 1]))
            throw std::invalid_argument("omega grid must be strictly increasing");
    TransportSpectrum s;
    s.omega = omegaGrid;
    s.coeff.reserve(omegaGrid.size());
    for (double w : omegaGrid) s.coeff.push_back(transport(h, probe, w));
    return s;
}

std::vector<double> group_delay(const TransportSpectrum& s) {
    const size_t n = s.omega.size();
    if (n < 3) throw std::invalid_argument("group delay needs at least 3 grid points");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> phase(n), delay(n, nan);
    std::vector<bool> ok(n);
    for (size_t i = 0; i < n; ++i) {
        ok[i] = std::abs(s.coeff[i].rPrime) >= 1e-8;
        phase[i] = std::arg(s.coeff[i].rPrime);
    }
    // unwrap: keep increments within (-pi, pi]
    double shift = 0.0;
    for (size_t i = 1; i < n; ++i) {
        double d = phase[i] + shift - phase[i - 1];
        while (d > M_PI) { shift -= 2.0 * M_PI; d -= 2.0 * M_PI; }
        while (d < -M_PI) { shift += 2.0 * M_PI; d += 2.0 * M_PI; }
        phase[i] += shift;
    }
    for (size_t i = 0; i < n; ++i) {
        if (!ok[i]) continue;
        size_t lo = (i == 0) ? 0 : i - 1;
        size_t hi = (i == n - 1) ? i : i + 1;
        delay[i] = (phase[hi] - phase[lo]) / (s.omega[hi] - s.omega[lo]);
    }
    return delay;
}

} // namespace crowsim
