#include "crowsim/spectral.hpp"
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace crowsim {

std::vector<double> EigenSet::realValues() const {
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i) out[i] = values[i].real();
    return out;
}

EigenSet eigensolve(const HamiltonianMatrix& h) {
    if (h.dim() > 4096) throw std::invalid_argument("dimension exceeds dense cap 4096");
    EigenSet out;
    out.hermitian = h.isHermitian;
    if (h.isHermitian) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.m);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("eigensolver failed to converge (self-adjoint path)");
        out.values.reserve(h.dim());
        for (int i = 0; i < h.dim(); ++i) out.values.emplace_back(es.eigenvalues()(i), 0.0);
        out.vectors = es.eigenvectors();
    } else {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h.m);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("eigensolver failed to converge (general path)");
        std::vector<int> order(h.dim());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return es.eigenvalues()(a).real() < es.eigenvalues()(b).real();
        });
        out.values.reserve(h.dim());
        out.vectors.resize(h.dim(), h.dim());
        for (int i = 0; i < h.dim(); ++i) {
            out.values.push_back(es.eigenvalues()(order[i]));
            out.vectors.col(i) = es.eigenvectors().col(order[i]);
        }
    }
    return out;
}

ButterflyMap butterfly_scan(const LatticeSpec& tmpl, const std::vector<double>& alphaGrid,
                            const std::vector<double>& omegaGrid, const ProbeSpec& probe,
                            double threshold) {
    ButterflyMap map;
    map.alphaGrid = alphaGrid;
    map.omegaGrid = omegaGrid;
    map.threshold = threshold;
    map.reflectivity.resize(alphaGrid.size(), omegaGrid.size());
    map.reflectivity.setConstant(std::numeric_limits<double>::quiet_NaN());
    for (size_t ia = 0; ia < alphaGrid.size(); ++ia) {
        LatticeSpec spec = tmpl;
        spec.alpha = alphaGrid[ia];
        HamiltonianMatrix h;
        try {
            h = build_h0(spec);
        } catch (const std::invalid_argument& e) {
            std::fprintf(stderr, "warning: alpha=%.6g skipped: %s\n", spec.alpha, e.what());
            continue;
        }
        TransportSpectrum s = transport_spectrum(h, probe, omegaGrid);
        for (size_t iw = 0; iw < omegaGrid.size(); ++iw)
            map.reflectivity(ia, iw) = s.coeff[iw].RPrime();
    }
    return map;
}

double CurrentField::divergence(int site) const {
    double sum = 0.0;
    for (const auto& b : bonds) {
        if (b.i == site) sum += b.current;
        else if (b.j == site) sum -= b.current;
    }
    return sum;
}

CurrentField bond_current(const HamiltonianMatrix& h, const Eigen::VectorXcd& psi) {
    if (psi.size() != h.dim()) throw std::invalid_argument("state size mismatch");
    CurrentField field;
    const int n = h.sites();
    auto coords = [&](int flat) {
        int s = flat % n;  // strip the spin offset
        return std::pair<int, int>{s % h.nx, s / h.nx};
    };
    for (int i = 0; i < h.dim(); ++i)
        for (int j = i + 1; j < h.dim(); ++j) {
            if (std::abs(h.m(i, j)) < 1e-14) continue;
            double cur = 2.0 * std::imag(std::conj(psi(i)) * h.m(i, j) * psi(j));
            auto [x1, y1] = coords(i);
            auto [x2, y2] = coords(j);
            field.bonds.push_back({i, j, x1, y1, x2, y2, cur});
        }
    return field;
}

double perimeter_weight(const Eigen::VectorXcd& psi, const LatticeSpec& spec) {
    const int n = spec.nx * spec.ny;
    double w = 0.0, total = 0.0;
    for (int i = 0; i < psi.size(); ++i) {
        int s = i % n;
        int x = s % spec.nx, y = s / spec.nx;
        double p = std::norm(psi(i));
        total += p;
        if (x == 0 || x == spec.nx - 1 || y == 0 || y == spec.ny - 1) w += p;
    }
    return total > 0.0 ? w / total : 0.0;
}

StateClass classify_state(const Eigen::VectorXcd& psi, const LatticeSpec& spec,
                          double threshold) {
    return perimeter_weight(psi, spec) >= threshold ? StateClass::Edge : StateClass::Bulk;
}

std::vector<DispersionPoint> edge_dispersion(const HamiltonianMatrix& hSingleSpin,
                                             EdgeSide edge, double edgeWeightThreshold) {
    if (!hSingleSpin.singleSpin())
        throw std::invalid_argument("edge dispersion analyzes a single spin block");
    const int nx = hSingleSpin.nx, ny = hSingleSpin.ny;
    const int row = (edge == EdgeSide::Lower) ? 0 : ny - 1;
    LatticeSpec spec{nx, ny, 0.0, Boundary::Open, hSingleSpin.kappa};
    EigenSet es = eigensolve(hSingleSpin);
    std::vector<DispersionPoint> out;
    for (size_t k = 0; k < es.values.size(); ++k) {
        Eigen::VectorXcd psi = es.vectors.col(static_cast<int>(k));
        if (perimeter_weight(psi, spec) < edgeWeightThreshold) continue;
        double rowWeight = 0.0;
        for (int x = 0; x < nx; ++x) rowWeight += std::norm(psi(row * nx + x));
        // require clearly more than a uniform row share on the designated row
        if (rowWeight < 1.5 / ny) continue;
        int significant = 0;
        for (int x = 0; x < nx; ++x)
            if (std::abs(psi(row * nx + x)) >= 1e-8) ++significant;
        if (significant < 2) {
            std::fprintf(stderr,
                         "edge dispersion: state %zu at E=%.6g skipped, fewer than 2 "
                         "significant edge amplitudes\n",
                         k, es.values[k].real());
            continue;
        }
        std::complex<double> acc{0.0, 0.0};
        for (int x = 0; x + 1 < nx; ++x)
            acc += psi(row * nx + x + 1) * std::conj(psi(row * nx + x));
        out.push_back({es.values[k].real(), std::arg(acc), edge});
    }
    return out;
}

BandPartition magnetic_bands(std::vector<double> vals, int q, double window) {
    BandPartition part;
    part.q = q;
    if (q < 1 || vals.empty() || vals.size() % q != 0) return part;
    std::sort(vals.begin(), vals.end());
    const size_t m = vals.size() / q;
    part.valid = true;
    for (int b = 0; b < q; ++b) {
        part.bands.push_back({vals[b * m], vals[(b + 1) * m - 1]});
        if (b + 1 < q) {
            double gap = vals[(b + 1) * m] - vals[(b + 1) * m - 1];
            if (gap < window && gap > 1e-6) part.valid = false;
        }
    }
    return part;
}

bool rationalize_alpha(double alpha, int maxDen, int& p, int& q) {
    for (int den = 1; den <= maxDen; ++den) {
        double num = alpha * den;
        if (std::abs(num - std::round(num)) < 1e-9) {
            p = static_cast<int>(std::round(num));
            q = den;
            int g = std::gcd(std::abs(p), q);
            if (g > 1) { p /= g; q /= g; }
            return true;
        }
    }
    return false;
}

std::optional<EdgeBandWindow> edge_band_window(const LatticeSpec& spec, double omega0,
                                               double shrink) {
    int p = 0, q = 0;
    if (!rationalize_alpha(spec.alpha, 64, p, q)) return std::nullopt;
    LatticeSpec torus = spec;
    torus.boundary = Boundary::Torus;
    EigenSet es = eigensolve(up_block(build_h0(torus)));
    BandPartition part = magnetic_bands(es.realValues(), q);
    if (!part.valid) return std::nullopt;
    for (size_t b = 0; b + 1 < part.bands.size(); ++b) {
        if (part.bands[b].second < omega0 && omega0 < part.bands[b + 1].first) {
            EdgeBandWindow w;
            w.bandBelow = part.bands[b];
            w.bandAbove = part.bands[b + 1];
            w.lo = part.bands[b].second + shrink;
            w.hi = part.bands[b + 1].first - shrink;
            if (w.lo >= w.hi) return std::nullopt;
            return w;
        }
    }
    return std::nullopt;
}

} // namespace crowsim
