#include "crowsim/transfer_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowsim {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

Eigen::Matrix4cd diag_phases(double p0, double p1, double p2, double p3) {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    m(0, 0) = std::exp(kI * p0);
    m(1, 1) = std::exp(kI * p1);
    m(2, 2) = std::exp(kI * p2);
    m(3, 3) = std::exp(kI * p3);
    return m;
}

} // namespace

ChainParams chain_params(double deltaOver2kappa, double finesse, int n, int pOdd,
                         double alphaPhase) {
    if (!(finesse > M_PI)) {
        throw std::invalid_argument("chain_params: finesse must exceed pi");
    }
    if (n < 1) {
        throw std::invalid_argument("chain_params: resonator winding n must be >= 1");
    }
    if (pOdd < 1 || pOdd % 2 == 0) {
        throw std::invalid_argument("chain_params: arm length index p must be odd and positive");
    }
    ChainParams p;
    p.t = std::sqrt(M_PI / finesse);
    p.r = std::sqrt(1.0 - p.t * p.t);
    p.alphaPhase = alphaPhase;
    const double d = deltaOver2kappa;
    p.betaR = 2.0 * M_PI * n + M_PI * d / (2.0 * finesse);
    p.betaL = (2.0 * pOdd + 1.0) * M_PI / 2.0
            + (2.0 * pOdd + 1.0) * M_PI * d / (8.0 * n * finesse);
    return p;
}

TransferMatrix m_res(double betaR) {
    return diag_phases(betaR, -betaR, betaR, -betaR);
}

TransferMatrix m_wg(double betaL, double alphaPhase) {
    return diag_phases(betaL + alphaPhase, -betaL + alphaPhase,
                       betaL - alphaPhase, -betaL - alphaPhase);
}

TransferMatrix m_cpl(std::complex<double> r, std::complex<double> t) {
    if (std::abs(t) < 1e-14) {
        throw std::invalid_argument("m_cpl: transmission must be nonzero");
    }
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    const std::complex<double> a = (t * t - r * r) / t;
    const std::complex<double> b = r / t;
    const std::complex<double> dinv = 1.0 / t;
    m(0, 0) = a;
    m(0, 1) = b;
    m(1, 0) = -b;
    m(1, 1) = dinv;
    m(2, 2) = a;
    m(2, 3) = b;
    m(3, 2) = -b;
    m(3, 3) = dinv;
    return m;
}

TransferMatrix m_scatt(double epsilon) {
    if (std::abs(epsilon) >= 2.0) {
        throw std::invalid_argument("m_scatt: |epsilon| must be below 2");
    }
    const double ts = 1.0 - epsilon * epsilon / 2.0;
    const std::complex<double> rs = kI * epsilon * std::sqrt(1.0 - epsilon * epsilon / 4.0);
    const std::complex<double> a = (ts * ts - rs * rs) / ts;
    const std::complex<double> b = rs / ts;
    const std::complex<double> dinv = 1.0 / ts;
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    m(0, 0) = a;
    m(0, 3) = b;
    m(1, 1) = dinv;
    m(1, 2) = -b;
    m(2, 1) = b;
    m(2, 2) = a;
    m(3, 0) = -b;
    m(3, 3) = dinv;
    return m;
}

TransferMatrix m_scatt_single_arm(double epsilon) {
    if (std::abs(epsilon) >= 2.0) {
        throw std::invalid_argument("m_scatt_single_arm: |epsilon| must be below 2");
    }
    const double ts = 1.0 - epsilon * epsilon / 2.0;
    const std::complex<double> rs = kI * epsilon * std::sqrt(1.0 - epsilon * epsilon / 4.0);
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Identity();
    m(0, 0) = (ts * ts - rs * rs) / ts;
    m(0, 3) = rs / ts;
    m(3, 0) = -rs / ts;
    m(3, 3) = 1.0 / ts;
    return m;
}

TransferMatrix unit_cell(const ChainParams& p, CellVariant v, double epsilon) {
    const TransferMatrix c = m_cpl(p.r, kI * p.t);
    switch (v) {
    case CellVariant::Plain:
        return c * m_wg(p.betaL, p.alphaPhase) * c * m_res(p.betaR);
    case CellVariant::WaveguideScatterer: {
        const TransferMatrix resHalf = m_res(p.betaR / 2.0);
        const TransferMatrix wgHalf = m_wg(p.betaL / 2.0, p.alphaPhase / 2.0);
        return resHalf * resHalf * c * wgHalf * m_scatt(epsilon) * wgHalf * c;
    }
    case CellVariant::ResonatorScatterer: {
        const TransferMatrix resHalf = m_res(p.betaR / 2.0);
        const TransferMatrix wgHalf = m_wg(p.betaL / 2.0, p.alphaPhase / 2.0);
        return resHalf * m_scatt(epsilon) * resHalf * c * wgHalf * wgHalf * c;
    }
    }
    throw std::logic_error("unit_cell: unknown variant");
}

BlochSolution bloch_dispersion(const TransferMatrix& m) {
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(m, false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("bloch_dispersion: eigenvalue iteration failed");
    }
    std::array<std::complex<double>, 4> lam;
    for (int i = 0; i < 4; ++i) lam[i] = solver.eigenvalues()(i);
    std::sort(lam.begin(), lam.end(), [](const auto& a, const auto& b) {
        const double ka = std::arg(a), kb = std::arg(b);
        if (ka != kb) return ka < kb;
        return std::abs(a) < std::abs(b);
    });
    BlochSolution out;
    for (int i = 0; i < 4; ++i) {
        out.eigenvalues[i] = lam[i];
        out.KLambda[i] = -kI * std::log(lam[i]);
        if (std::abs(std::abs(lam[i]) - 1.0) <= 1e-8) ++out.propagatingCount;
    }
    return out;
}

SpinFlipEigenvalues spin_flip_eigenvalues(double deltaOver2kappa, double epsilon) {
    const double d = deltaOver2kappa;
    const double e = epsilon;
    if (std::abs(e) >= 2.0) {
        throw std::invalid_argument("spin_flip_eigenvalues: |epsilon| must be below 2");
    }
    const double s = e * std::sqrt(4.0 - e * e);
    const double denom = 2.0 - e * e;
    auto branch = [&](double sgn) {
        // sgn = +1 right-movers, -1 left-movers (epsilon -> -epsilon)
        const double lin = sgn * s;
        const std::complex<double> radicand =
            denom * denom + (4.0 * lin - 4.0 - 4.0 * e * e + e * e * e * e) * d * d;
        const std::complex<double> root = std::sqrt(radicand);
        const std::complex<double> base = (2.0 - lin) * d;
        return std::array<std::complex<double>, 2>{
            -(base + kI * root) / denom,
            -(base - kI * root) / denom};
    };
    SpinFlipEigenvalues out;
    const auto fwd = branch(+1.0);
    const auto bwd = branch(-1.0);
    out.values = {fwd[0], fwd[1], bwd[0], bwd[1]};
    out.cosKPlus = -d / (1.0 + e);
    out.cosKMinus = -d / (1.0 - e);
    return out;
}

Eigen::Matrix4cd s_matrix(const TransferMatrix& m) {
    const Eigen::Matrix2cd a = m.topLeftCorner<2, 2>();
    const Eigen::Matrix2cd b = m.topRightCorner<2, 2>();
    const Eigen::Matrix2cd c = m.bottomLeftCorner<2, 2>();
    const Eigen::Matrix2cd d = m.bottomRightCorner<2, 2>();
    Eigen::FullPivLU<Eigen::Matrix2cd> lu(d);
    if (!lu.isInvertible()) {
        throw std::runtime_error("s_matrix: evanescent transfer matrix, backward block is singular");
    }
    const Eigen::Matrix2cd dinv = lu.inverse();
    Eigen::Matrix4cd s;
    s.topLeftCorner<2, 2>() = a - b * dinv * c;
    s.topRightCorner<2, 2>() = b * dinv;
    s.bottomLeftCorner<2, 2>() = -dinv * c;
    s.bottomRightCorner<2, 2>() = dinv;
    return s;
}

namespace {

// One 2x2 arm block of a plain cell: pick the two Bloch modes apart by the
// sign of the flux v^dag sigma_z v, normalize the flux to +/-1, and rotate
// the largest component real positive.
void arm_modes(const Eigen::Matrix2cd& block, Eigen::Vector2cd& fwd, Eigen::Vector2cd& bwd) {
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> solver(block, true);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("bloch_mode_basis: eigenvalue iteration failed");
    }
    bool haveFwd = false, haveBwd = false;
    for (int i = 0; i < 2; ++i) {
        Eigen::Vector2cd v = solver.eigenvectors().col(i);
        const double flux = std::norm(v(0)) - std::norm(v(1));
        if (std::abs(flux) < 1e-10) {
            throw std::runtime_error("bloch_mode_basis: evanescent mode carries no flux");
        }
        v /= std::sqrt(std::abs(flux));
        const int big = std::norm(v(0)) >= std::norm(v(1)) ? 0 : 1;
        v *= std::abs(v(big)) / v(big);
        if (flux > 0.0 && !haveFwd) {
            fwd = v;
            haveFwd = true;
        } else if (flux < 0.0 && !haveBwd) {
            bwd = v;
            haveBwd = true;
        }
    }
    if (!haveFwd || !haveBwd) {
        throw std::runtime_error("bloch_mode_basis: could not split forward and backward modes");
    }
}

} // namespace

Eigen::Matrix4cd bloch_mode_basis(const TransferMatrix& m0) {
    if (m0.topRightCorner<2, 2>().cwiseAbs().maxCoeff() > 1e-12 ||
        m0.bottomLeftCorner<2, 2>().cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("bloch_mode_basis: cell must be arm-block-diagonal");
    }
    Eigen::Vector2cd fwdDown, bwdDown, fwdUp, bwdUp;
    arm_modes(m0.topLeftCorner<2, 2>(), fwdDown, bwdDown);
    arm_modes(m0.bottomRightCorner<2, 2>(), fwdUp, bwdUp);
    Eigen::Matrix4cd v = Eigen::Matrix4cd::Zero();
    v.block<2, 1>(0, 0) = fwdDown;
    v.block<2, 1>(2, 1) = fwdUp;
    v.block<2, 1>(0, 2) = bwdDown;
    v.block<2, 1>(2, 3) = bwdUp;
    return v;
}

Eigen::Matrix4cd disorder_cell_s(double KLambda, double finesse, double epsilon,
                                 int n, int pOdd) {
    const ChainParams p = chain_params(-std::cos(KLambda), finesse, n, pOdd, 0.0);
    const TransferMatrix m0 = unit_cell(p, CellVariant::Plain);
    const TransferMatrix m = m0 * m_scatt_single_arm(epsilon) * m0;
    const Eigen::Matrix4cd v = bloch_mode_basis(m0);
    const Eigen::Matrix4cd mTilde = v.inverse() * m * v;
    return s_matrix(mTilde);
}

ScatteringAmplitudes model_scattering_solution(double KLambda, double epsilonPrime,
                                               bool exact) {
    const double sk = std::sin(KLambda);
    if (std::abs(sk) < 1e-9) {
        throw std::runtime_error("model_scattering_solution: band-edge divergence at sin(K) = 0");
    }
    ScatteringAmplitudes out;
    if (!exact) {
        out.tUp = 1.0;
        out.rUp = 0.0;
        out.tDown = kI * epsilonPrime / (2.0 * sk);
        out.rDown = out.tDown;
        return out;
    }
    // Wave matching at the spin-mixing site: unknowns (tUp, tDown, rUp, rDown).
    const std::complex<double> eik = std::exp(kI * KLambda);
    const std::complex<double> emk = std::exp(-kI * KLambda);
    const double energy = -2.0 * std::cos(KLambda);
    Eigen::Matrix4cd a = Eigen::Matrix4cd::Zero();
    Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
    // continuity: 1 + rUp = tUp, rDown = tDown
    a(0, 0) = 1.0;
    a(0, 2) = -1.0;
    rhs(0) = 1.0;
    a(1, 1) = 1.0;
    a(1, 3) = -1.0;
    // E tUp = -(e^{-iK} + rUp e^{iK} + tUp e^{iK}) - eps' tDown
    a(2, 0) = energy + eik;
    a(2, 1) = epsilonPrime;
    a(2, 2) = eik;
    rhs(2) = -emk;
    // E tDown = -e^{iK} (rDown + tDown) - eps' tUp
    a(3, 0) = epsilonPrime;
    a(3, 1) = energy + eik;
    a(3, 3) = eik;
    const Eigen::Vector4cd x = a.fullPivLu().solve(rhs);
    out.tUp = x(0);
    out.tDown = x(1);
    out.rUp = x(2);
    out.rDown = x(3);
    return out;
}

std::complex<double> lossy_dispersion(double KLambda, double mu, double finesse,
                                      double kappa, double alphaPhase) {
    return std::complex<double>(-2.0 * kappa * std::cos(KLambda + alphaPhase),
                                -2.0 * mu * kappa * finesse / M_PI);
}

} // namespace crowsim
