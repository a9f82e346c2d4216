#include "crowsim/lattice.hpp"
#include "crowsim/rng.hpp"
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace crowsim {

namespace {

constexpr int kDimCap = 4096;
const std::complex<double> I{0.0, 1.0};

void validate(const LatticeSpec& spec) {
    if (spec.nx < 1 || spec.ny < 1)
        throw std::invalid_argument("lattice dimensions must be positive");
    if (spec.kappa <= 0.0)
        throw std::invalid_argument("kappa must be positive");
    if (2 * spec.nx * spec.ny > kDimCap)
        throw std::invalid_argument("lattice dimension exceeds dense cap 4096");
}

double sgn(Spin s) { return s == Spin::Up ? 1.0 : -1.0; }

HamiltonianMatrix blank(const LatticeSpec& spec) {
    HamiltonianMatrix h;
    h.nx = spec.nx;
    h.ny = spec.ny;
    h.kappa = spec.kappa;
    h.m = Eigen::MatrixXcd::Zero(2 * spec.nx * spec.ny, 2 * spec.nx * spec.ny);
    return h;
}

void add_bond(HamiltonianMatrix& h, int to, int from, std::complex<double> amp) {
    h.m(to, from) += amp;
    h.m(from, to) += std::conj(amp);
}

// x hops carry exp(-i*2*pi*alpha*y*sigma) everywhere, wrap included; the
// only y bond with a phase is the wrap (x, ny-1) -> (x, 0), which carries
// exp(+i*2*pi*alpha*ny*x*sigma) so that wrap plaquettes enclose the same
// flux as bulk ones. Consistent iff the total flux nx*ny*alpha is integral.
void add_hopping(HamiltonianMatrix& h, const LatticeSpec& spec, Spin s) {
    const double k = spec.kappa;
    const double a = spec.alpha;
    const bool torus = spec.boundary == Boundary::Torus;
    for (int y = 0; y < spec.ny; ++y) {
        for (int x = 0; x < spec.nx; ++x) {
            if (x + 1 < spec.nx || (torus && spec.nx >= 2)) {
                int xn = (x + 1) % spec.nx;
                std::complex<double> amp = -k * std::exp(-I * (2.0 * M_PI * a * y * sgn(s)));
                add_bond(h, site_index(spec, xn, y, s), site_index(spec, x, y, s), amp);
            }
            if (y + 1 < spec.ny) {
                add_bond(h, site_index(spec, x, y + 1, s), site_index(spec, x, y, s), -k);
            } else if (torus && spec.ny >= 2) {
                std::complex<double> amp =
                    -k * std::exp(I * (2.0 * M_PI * a * spec.ny * x * sgn(s)));
                add_bond(h, site_index(spec, x, 0, s), site_index(spec, x, y, s), amp);
            }
        }
    }
}

void check_torus_flux(const LatticeSpec& spec) {
    if (spec.boundary != Boundary::Torus) return;
    double total = spec.nx * spec.ny * spec.alpha;
    if (std::abs(total - std::round(total)) > 1e-9)
        throw std::invalid_argument("incommensurate torus flux");
}

} // namespace

int site_index(const LatticeSpec& spec, int x, int y, Spin s) {
    int off = (s == Spin::Up) ? 0 : spec.nx * spec.ny;
    return off + y * spec.nx + x;
}

HamiltonianMatrix build_h0(const LatticeSpec& spec) {
    validate(spec);
    check_torus_flux(spec);
    HamiltonianMatrix h = blank(spec);
    add_hopping(h, spec, Spin::Up);
    add_hopping(h, spec, Spin::Down);
    return h;
}

HamiltonianMatrix build_spin_flip(const LatticeSpec& spec, double epsilon) {
    validate(spec);
    check_torus_flux(spec);
    if (std::abs(epsilon) > 0.3)
        std::fprintf(stderr, "warning: spin-flip epsilon %.3g beyond first-order regime\n",
                     epsilon);
    HamiltonianMatrix h = blank(spec);
    add_hopping(h, spec, Spin::Up);
    add_hopping(h, spec, Spin::Down);
    const double fk = spec.kappa * epsilon;
    for (int y = 0; y < spec.ny; ++y) {
        bool wrap = (y + 1 == spec.ny);
        if (wrap && (spec.boundary != Boundary::Torus || spec.ny < 2)) continue;
        int yn = wrap ? 0 : y + 1;
        for (int x = 0; x < spec.nx; ++x) {
            add_bond(h, site_index(spec, x, yn, Spin::Up), site_index(spec, x, y, Spin::Down), -fk);
            add_bond(h, site_index(spec, x, yn, Spin::Down), site_index(spec, x, y, Spin::Up), -fk);
        }
    }
    return h;
}

HamiltonianMatrix build_zeeman(const LatticeSpec& spec, double epsilon, double finesse) {
    validate(spec);
    check_torus_flux(spec);
    if (finesse < 1.0) throw std::invalid_argument("finesse must be >= 1");
    if (!std::isfinite(epsilon * finesse))
        throw std::invalid_argument("epsilon*finesse must be finite");
    HamiltonianMatrix h = build_h0(spec);
    const double zee = 4.0 * epsilon * spec.kappa * finesse / M_PI;
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x) {
            int u = site_index(spec, x, y, Spin::Up);
            int d = site_index(spec, x, y, Spin::Down);
            h.m(u, d) += -zee;
            h.m(d, u) += -zee;
        }
    return h;
}

HamiltonianMatrix apply_disorder(const HamiltonianMatrix& h, const LatticeSpec& spec,
                                 const DisorderSpec& dis) {
    HamiltonianMatrix out = h;
    auto checkSite = [&](int x, int y) {
        if (x < 0 || x >= spec.nx || y < 0 || y >= spec.ny)
            throw std::invalid_argument("disorder site out of range");
    };
    for (const auto& e : dis.onsite) {
        checkSite(e.x, e.y);
        out.m(site_index(spec, e.x, e.y, Spin::Up), site_index(spec, e.x, e.y, Spin::Up)) += e.U;
        out.m(site_index(spec, e.x, e.y, Spin::Down), site_index(spec, e.x, e.y, Spin::Down)) += e.U;
    }
    const std::complex<double> I{0.0, 1.0};
    for (const auto& s : dis.magneticScatterers) {
        checkSite(s.x, s.y);
        int u = site_index(spec, s.x, s.y, Spin::Up);
        int d = site_index(spec, s.x, s.y, Spin::Down);
        std::complex<double> amp =
            (2.0 * s.strengthEpsF * spec.kappa / M_PI) * std::exp(-I * s.phase);
        out.m(u, d) += amp;
        out.m(d, u) += std::conj(amp);
    }
    if (dis.lossRate > 0.0) {
        out.m.diagonal().array() -= I * dis.lossRate;
        out.isHermitian = false;
    }
    return out;
}

DisorderSpec sample_onsite_disorder(const LatticeSpec& spec, double width, std::uint64_t seed) {
    validate(spec);
    if (width < 0.0) throw std::invalid_argument("disorder width must be >= 0");
    DisorderSpec dis;
    RandomSource rng(seed);
    dis.onsite.reserve(static_cast<size_t>(spec.nx) * spec.ny);
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x)
            dis.onsite.push_back({x, y, width * spec.kappa * rng.normal()});
    return dis;
}

DisorderSpec sample_magnetic_disorder(const LatticeSpec& spec, double strengthWidth,
                                      std::uint64_t seed) {
    validate(spec);
    if (strengthWidth < 0.0) throw std::invalid_argument("strength width must be >= 0");
    DisorderSpec dis;
    RandomSource rng(seed);
    dis.magneticScatterers.reserve(static_cast<size_t>(spec.nx) * spec.ny);
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x) {
            double strength = strengthWidth * rng.normal();
            double phase = 2.0 * M_PI * rng.uniform();
            dis.magneticScatterers.push_back({x, y, strength, phase});
        }
    return dis;
}

HamiltonianMatrix build_crow_chain(int n, double kappa) {
    if (n < 2) throw std::invalid_argument("chain needs at least 2 resonators");
    LatticeSpec spec{n, 1, 0.0, Boundary::Open, kappa};
    return build_h0(spec);
}

HamiltonianMatrix up_block(const HamiltonianMatrix& h) {
    HamiltonianMatrix out;
    out.nx = h.nx;
    out.ny = h.ny;
    out.kappa = h.kappa;
    out.isHermitian = h.isHermitian;
    out.m = h.m.topLeftCorner(h.sites(), h.sites());
    return out;
}

HamiltonianMatrix time_reverse(const HamiltonianMatrix& h) {
    if (h.singleSpin())
        throw std::invalid_argument("time reversal needs both spin blocks");
    int n = h.sites();
    HamiltonianMatrix out = h;
    Eigen::MatrixXcd c = h.m.conjugate();
    out.m.topLeftCorner(n, n) = c.bottomRightCorner(n, n);
    out.m.bottomRightCorner(n, n) = c.topLeftCorner(n, n);
    out.m.topRightCorner(n, n) = c.bottomLeftCorner(n, n);
    out.m.bottomLeftCorner(n, n) = c.topRightCorner(n, n);
    return out;
}

} // namespace crowsim
