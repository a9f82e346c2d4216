#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crowsim/transfer_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

using namespace crowsim;
using cplx = std::complex<double>;
const cplx I{0.0, 1.0};

namespace {

double max_abs(const Eigen::Matrix4cd& m) { return m.cwiseAbs().maxCoeff(); }

// flux signature: right-movers a, c carry +1, left-movers b, d carry -1
Eigen::Matrix4cd flux_form() {
    Eigen::Matrix4cd s = Eigen::Matrix4cd::Zero();
    s(0, 0) = 1.0;
    s(1, 1) = -1.0;
    s(2, 2) = 1.0;
    s(3, 3) = -1.0;
    return s;
}

double flux_defect(const Eigen::Matrix4cd& m) {
    Eigen::Matrix4cd s = flux_form();
    return max_abs(m.adjoint() * s * m - s);
}

// swap the two waveguide arms: (a, b) <-> (c, d)
Eigen::Matrix4cd arm_swap() {
    Eigen::Matrix4cd p = Eigen::Matrix4cd::Zero();
    p(0, 2) = 1.0;
    p(1, 3) = 1.0;
    p(2, 0) = 1.0;
    p(3, 1) = 1.0;
    return p;
}

std::vector<cplx> sorted_eigs(const TransferMatrix& m) {
    BlochSolution b = bloch_dispersion(m);
    std::vector<cplx> v(b.eigenvalues.begin(), b.eigenvalues.end());
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
        return std::arg(a) != std::arg(b) ? std::arg(a) < std::arg(b)
                                          : std::abs(a) < std::abs(b);
    });
    return v;
}

double set_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double worst = 0.0;
    for (cplx x : a) {
        double best = 1e18;
        for (cplx y : b) best = std::min(best, std::abs(x - y));
        worst = std::max(worst, best);
    }
    return worst;
}

} // namespace

TEST_CASE("identity couplers and scatterers") {
    CHECK(max_abs(m_cpl(0.0, 1.0) - Eigen::Matrix4cd::Identity()) == 0.0);
    CHECK(max_abs(m_scatt(0.0) - Eigen::Matrix4cd::Identity()) == 0.0);
    CHECK(max_abs(m_scatt_single_arm(0.0) - Eigen::Matrix4cd::Identity()) == 0.0);
    CHECK(max_abs(m_res(0.0) - Eigen::Matrix4cd::Identity()) <= 1e-15);
    CHECK(max_abs(m_wg(0.0, 0.0) - Eigen::Matrix4cd::Identity()) <= 1e-15);
}

TEST_CASE("coupler entries for a real splitting ratio") {
    Eigen::Matrix4cd m = m_cpl(0.6, 0.8);
    Eigen::Matrix4cd e = Eigen::Matrix4cd::Zero();
    // per arm: [[(t^2 - r^2)/t, r/t], [-r/t, 1/t]]
    e(0, 0) = 0.35;
    e(0, 1) = 0.75;
    e(1, 0) = -0.75;
    e(1, 1) = 1.25;
    e.block<2, 2>(2, 2) = e.block<2, 2>(0, 0);
    CHECK(max_abs(m - e) <= 1e-15);
    CHECK_THROWS_AS(m_cpl(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("scatterer entries couple the counterpropagating cross pairs") {
    const double eps = 0.1;
    const double ts = 1.0 - eps * eps / 2.0;
    const cplx rs = I * eps * std::sqrt(1.0 - eps * eps / 4.0);
    Eigen::Matrix4cd m = m_scatt(eps);

    // (ts^2 - rs^2)/ts reduces to 1/ts for the lossless parametrization
    CHECK(std::abs(m(0, 0) - (ts * ts - rs * rs) / ts) <= 1e-15);
    CHECK(std::abs(m(0, 0) - 1.0 / ts) <= 1e-15);
    CHECK(std::abs(m(0, 3) - rs / ts) <= 1e-15);
    CHECK(std::abs(m(1, 2) + rs / ts) <= 1e-15);
    CHECK(std::abs(m(2, 1) - rs / ts) <= 1e-15);
    CHECK(std::abs(m(3, 0) + rs / ts) <= 1e-15);
    CHECK(std::abs(m(1, 1) - 1.0 / ts) <= 1e-15);
    // uncross pairs untouched
    CHECK(std::abs(m(0, 1)) == 0.0);
    CHECK(std::abs(m(0, 2)) == 0.0);

    Eigen::Matrix4cd single = m_scatt_single_arm(eps);
    CHECK(std::abs(single(0, 3) - rs / ts) <= 1e-15);
    CHECK(std::abs(single(1, 1) - 1.0) == 0.0);
    CHECK(std::abs(single(2, 2) - 1.0) == 0.0);

    CHECK_THROWS_AS(m_scatt(2.0), std::invalid_argument);
    CHECK_THROWS_AS(m_scatt_single_arm(-2.0), std::invalid_argument);
}

TEST_CASE("phase elements are pure diagonals") {
    Eigen::Matrix4cd r = m_res(0.7);
    CHECK(std::abs(r(0, 0) - std::exp(I * 0.7)) <= 1e-15);
    CHECK(std::abs(r(1, 1) - std::exp(-I * 0.7)) <= 1e-15);
    CHECK(std::abs(r(2, 2) - std::exp(I * 0.7)) <= 1e-15);
    CHECK(std::abs(r(3, 3) - std::exp(-I * 0.7)) <= 1e-15);

    // the arm imbalance phi adds on arm 1 and subtracts on arm 2
    Eigen::Matrix4cd w = m_wg(0.4, 0.15);
    CHECK(std::abs(w(0, 0) - std::exp(I * 0.55)) <= 1e-15);
    CHECK(std::abs(w(1, 1) - std::exp(I * (-0.4 + 0.15))) <= 1e-15);
    CHECK(std::abs(w(2, 2) - std::exp(I * (0.4 - 0.15))) <= 1e-15);
    CHECK(std::abs(w(3, 3) - std::exp(I * (-0.4 - 0.15))) <= 1e-15);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) CHECK(std::abs(w(i, j)) == 0.0);
}

TEST_CASE("every lossless constituent conserves flux") {
    CHECK(flux_defect(m_cpl(0.6, I * 0.8)) <= 1e-14);
    CHECK(flux_defect(m_res(0.7)) <= 1e-14);
    CHECK(flux_defect(m_wg(0.4, 0.15)) <= 1e-14);
    CHECK(flux_defect(m_scatt(0.3)) <= 1e-14);
    CHECK(flux_defect(m_scatt_single_arm(0.3)) <= 1e-14);

    // cell products multiply entries of order sqrt(F/pi), so allow roundoff growth
    ChainParams p = chain_params(0.3, 300.0);
    CHECK(flux_defect(unit_cell(p, CellVariant::Plain)) <= 1e-10);
    CHECK(flux_defect(unit_cell(p, CellVariant::WaveguideScatterer, 0.05)) <= 1e-10);
    CHECK(flux_defect(unit_cell(p, CellVariant::ResonatorScatterer, 0.05)) <= 1e-10);
}

TEST_CASE("chain parameters encode the detuning in the phase budget") {
    const double F = 300.0, d = 0.3;
    ChainParams p = chain_params(d, F, 2, 3);
    CHECK(std::abs(p.r * p.r + p.t * p.t - 1.0) <= 1e-15);
    CHECK(std::abs(p.t - std::sqrt(M_PI / F)) <= 1e-15);
    CHECK(std::abs(p.finesse() - F) <= 1e-9);
    CHECK(std::abs(p.betaR - (4.0 * M_PI + M_PI * d / (2.0 * F))) <= 1e-15);
    CHECK(std::abs(p.betaL - (7.0 * M_PI / 2.0 + 7.0 * M_PI * d / (16.0 * F))) <= 1e-14);

    CHECK(std::abs(chain_params(0.0, F).betaR - 2.0 * M_PI) <= 1e-15);
    CHECK(std::abs(chain_params(0.0, F).betaL - 3.0 * M_PI / 2.0) <= 1e-15);

    CHECK_THROWS_AS(chain_params(0.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(chain_params(0.0, F, 0), std::invalid_argument);
    CHECK_THROWS_AS(chain_params(0.0, F, 1, 2), std::invalid_argument);
    CHECK_THROWS_AS(chain_params(0.0, F, 1, -1), std::invalid_argument);
}

TEST_CASE("plain cell disperses as cos K = -delta") {
    const double F = 300.0;

    SUBCASE("band center") {
        BlochSolution b = bloch_dispersion(unit_cell(chain_params(0.0, F), CellVariant::Plain));
        CHECK(b.propagatingCount == 4);
        for (cplx ev : b.eigenvalues) {
            CHECK(std::abs(std::abs(ev) - 1.0) <= 1e-10);
            CHECK(std::abs(ev.real()) <= 1e-10);
        }
    }

    SUBCASE("linear regime inside the band") {
        for (double d : {-0.8, -0.4, -0.1, 0.1, 0.4, 0.8}) {
            BlochSolution b =
                bloch_dispersion(unit_cell(chain_params(d, F), CellVariant::Plain));
            CHECK(b.propagatingCount == 4);
            for (int i = 0; i < 4; ++i) {
                if (std::abs(std::abs(b.eigenvalues[i]) - 1.0) > 1e-8) continue;
                double c = std::cos(b.KLambda[i].real());
                CHECK(std::abs(c + d) <= 5.0 / F);
            }
        }
    }

    SUBCASE("band edge dichotomy") {
        BlochSolution inside =
            bloch_dispersion(unit_cell(chain_params(1.0 - 5.0 / F, F), CellVariant::Plain));
        CHECK(inside.propagatingCount == 4);
        BlochSolution outside =
            bloch_dispersion(unit_cell(chain_params(1.0 + 5.0 / F, F), CellVariant::Plain));
        CHECK(outside.propagatingCount == 0);
    }
}

TEST_CASE("swapping the arms flips the sign of the gauge phase") {
    const double F = 300.0;
    Eigen::Matrix4cd p = arm_swap();
    for (double phi : {0.37, -0.9}) {
        TransferMatrix plus = unit_cell(chain_params(0.2, F, 1, 1, phi), CellVariant::Plain);
        TransferMatrix minus = unit_cell(chain_params(0.2, F, 1, 1, -phi), CellVariant::Plain);
        CHECK(max_abs(p * plus * p - minus) <= 1e-12);

        TransferMatrix wplus =
            unit_cell(chain_params(0.2, F, 1, 1, phi), CellVariant::WaveguideScatterer, 0.05);
        TransferMatrix wminus =
            unit_cell(chain_params(0.2, F, 1, 1, -phi), CellVariant::WaveguideScatterer, 0.05);
        CHECK(max_abs(p * wplus * p - wminus) <= 1e-12);
    }
}

TEST_CASE("scatterer variants at zero strength keep the plain spectrum") {
    ChainParams p = chain_params(0.25, 300.0);
    std::vector<cplx> plain = sorted_eigs(unit_cell(p, CellVariant::Plain));
    std::vector<cplx> wg = sorted_eigs(unit_cell(p, CellVariant::WaveguideScatterer, 0.0));
    std::vector<cplx> res = sorted_eigs(unit_cell(p, CellVariant::ResonatorScatterer, 0.0));
    CHECK(set_distance(plain, wg) <= 1e-9);
    CHECK(set_distance(plain, res) <= 1e-9);
}

TEST_CASE("spin-flip eigenvalue closed forms") {
    const double d = 0.3, eps = 0.05;
    SpinFlipEigenvalues sf = spin_flip_eigenvalues(d, eps);

    SUBCASE("propagating regime sits on the unit circle") {
        for (cplx ev : sf.values) CHECK(std::abs(std::abs(ev) - 1.0) <= 1e-10);
    }

    SUBCASE("dispersion splits as -delta over one plus or minus epsilon") {
        CHECK(std::abs(sf.cosKPlus + d / (1.0 + eps)) <= 1e-12);
        CHECK(std::abs(sf.cosKMinus + d / (1.0 - eps)) <= 1e-12);
    }

    SUBCASE("closed forms match the numerical cell spectrum") {
        const double F = 300.0;
        TransferMatrix cell =
            unit_cell(chain_params(d, F), CellVariant::WaveguideScatterer, eps);
        std::vector<cplx> numeric = sorted_eigs(cell);
        std::vector<cplx> closed(sf.values.begin(), sf.values.end());
        CHECK(set_distance(closed, numeric) <= 5.0 / F);
    }

    SUBCASE("numerical split follows both branches") {
        const double F = 300.0;
        for (double dd : {-0.8, -0.4, 0.1, 0.4, 0.8}) {
            TransferMatrix cell =
                unit_cell(chain_params(dd, F), CellVariant::WaveguideScatterer, eps);
            BlochSolution b = bloch_dispersion(cell);
            for (int i = 0; i < 4; ++i) {
                if (std::abs(std::abs(b.eigenvalues[i]) - 1.0) > 1e-8) continue;
                double c = std::cos(b.KLambda[i].real());
                double devPlus = std::abs(c + dd / (1.0 + eps));
                double devMinus = std::abs(c + dd / (1.0 - eps));
                CHECK(std::min(devPlus, devMinus) <= 5.0 / F);
            }
        }
    }

    CHECK_THROWS_AS(spin_flip_eigenvalues(0.0, 2.5), std::invalid_argument);
}

TEST_CASE("s-matrix block conversion") {
    SUBCASE("identity maps to identity") {
        CHECK(max_abs(s_matrix(Eigen::Matrix4cd::Identity()) -
                      Eigen::Matrix4cd::Identity()) == 0.0);
    }

    SUBCASE("mode-basis free propagation is a pure phase") {
        const double F = 300.0, K = M_PI / 3.0;
        Eigen::Matrix4cd s = disorder_cell_s(K, F, 0.0);
        // scalar times identity, unimodular, phase 2K up to the 1/F dispersion error
        CHECK(max_abs(s - s(0, 0) * Eigen::Matrix4cd::Identity()) <= 1e-8);
        CHECK(std::abs(std::abs(s(0, 0)) - 1.0) <= 1e-8);
        CHECK(std::abs(std::arg(s(0, 0)) - 2.0 * K) <= 5.0 / F);
    }

    SUBCASE("a singular backward block is rejected") {
        Eigen::Matrix4cd m = Eigen::Matrix4cd::Identity();
        m(2, 2) = 1.0;
        m(2, 3) = 1.0;
        m(3, 2) = 1.0;
        m(3, 3) = 1.0;
        CHECK_THROWS_AS(s_matrix(m), std::runtime_error);
    }
}

TEST_CASE("bloch mode basis") {
    const double F = 300.0;

    SUBCASE("evanescent cells carry no flux to normalize") {
        TransferMatrix cell = unit_cell(chain_params(1.2, F), CellVariant::Plain);
        CHECK_THROWS_AS(bloch_mode_basis(cell), std::runtime_error);
    }

    SUBCASE("arm-mixing cells are rejected") {
        TransferMatrix cell =
            unit_cell(chain_params(0.2, F), CellVariant::WaveguideScatterer, 0.1);
        CHECK_THROWS_AS(bloch_mode_basis(cell), std::invalid_argument);
    }

    SUBCASE("the basis diagonalizes the plain cell") {
        TransferMatrix cell = unit_cell(chain_params(0.2, F), CellVariant::Plain);
        Eigen::Matrix4cd v = bloch_mode_basis(cell);
        Eigen::Matrix4cd d = v.inverse() * cell * v;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) CHECK(std::abs(d(i, j)) <= 1e-9);
        // forward columns first: |lambda| = 1 and positive group direction
        for (int i = 0; i < 4; ++i) CHECK(std::abs(std::abs(d(i, i)) - 1.0) <= 1e-9);
    }
}

TEST_CASE("disorder cell scattering") {
    const double F = 300.0;

    SUBCASE("unitary in the propagating regime") {
        Eigen::Matrix4cd s = disorder_cell_s(M_PI / 2.0, F, 0.01);
        CHECK(max_abs(s.adjoint() * s - Eigen::Matrix4cd::Identity()) <= 1e-8);
    }

    SUBCASE("first-order backscattering amplitude") {
        const double eps = 1e-3, K = M_PI / 2.0;
        Eigen::Matrix4cd s = disorder_cell_s(K, F, eps);
        double predicted = eps * F / (M_PI * std::sin(K));
        CHECK(std::abs(std::abs(s(1, 0)) - predicted) / predicted <= 0.05);
    }
}

TEST_CASE("single spin-mixing site on the tight-binding chain") {
    SUBCASE("zero strength is perfect transmission") {
        ScatteringAmplitudes a = model_scattering_solution(M_PI / 3.0, 0.0, true);
        CHECK(std::abs(a.tUp - 1.0) <= 1e-14);
        CHECK(std::abs(a.rUp) <= 1e-14);
        CHECK(std::abs(a.tDown) <= 1e-14);
        CHECK(std::abs(a.rDown) <= 1e-14);
    }

    SUBCASE("exact solve matches the closed form") {
        for (auto [K, eps] : {std::pair{0.2, 0.05}, std::pair{0.5, 0.1},
                              std::pair{-0.4, 0.08}, std::pair{M_PI / 2.0, 1.9099}}) {
            ScatteringAmplitudes a = model_scattering_solution(K, eps, true);
            cplx c = eps / (2.0 * std::sin(K));
            cplx tUp = 1.0 / (1.0 + c * c);
            cplx tDown = I * c / (1.0 + c * c);
            CHECK(std::abs(a.tUp - tUp) <= 1e-12);
            CHECK(std::abs(a.tDown - tDown) <= 1e-12);
            CHECK(std::abs(a.rDown - tDown) <= 1e-12);
            CHECK(std::abs(a.rUp - (tUp - 1.0)) <= 1e-12);
        }
    }

    SUBCASE("exact solve conserves flux") {
        for (double eps : {0.01, 0.1, 1.0}) {
            ScatteringAmplitudes a = model_scattering_solution(M_PI / 3.0, eps, true);
            double total = std::norm(a.tUp) + std::norm(a.tDown) + std::norm(a.rUp) +
                           std::norm(a.rDown);
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }

    SUBCASE("first order is the small-strength limit") {
        for (double K : {M_PI / 3.0, M_PI / 2.0, 2.0 * M_PI / 3.0}) {
            for (double eps : {0.01, 0.1}) {
                ScatteringAmplitudes lin = model_scattering_solution(K, eps, false);
                ScatteringAmplitudes ex = model_scattering_solution(K, eps, true);
                cplx want = I * eps / (2.0 * std::sin(K));
                CHECK(std::abs(lin.tDown - want) <= 1e-15);
                CHECK(std::abs(lin.rDown - want) <= 1e-15);
                CHECK(std::abs(lin.tUp - 1.0) <= 1e-15);
                CHECK(std::abs(lin.rUp) <= 1e-15);
                CHECK(std::abs(lin.tUp - ex.tUp) <= eps * eps);
                CHECK(std::abs(lin.tDown - ex.tDown) <= eps * eps);
                CHECK(std::abs(lin.rUp - ex.rUp) <= eps * eps);
                CHECK(std::abs(lin.rDown - ex.rDown) <= eps * eps);
            }
        }
    }

    SUBCASE("band edges diverge") {
        CHECK_THROWS_AS(model_scattering_solution(0.0, 0.1, true), std::runtime_error);
        CHECK_THROWS_AS(model_scattering_solution(M_PI, 0.1, false), std::runtime_error);
    }
}

TEST_CASE("lossy dispersion closed form") {
    cplx w = lossy_dispersion(0.7, 0.01, 300.0, 1.3, 0.2);
    CHECK(std::abs(w.real() - (-2.0 * 1.3 * std::cos(0.9))) <= 1e-12);
    CHECK(std::abs(w.imag() - (-2.0 * 0.01 * 1.3 * 300.0 / M_PI)) <= 1e-12);
    CHECK(lossy_dispersion(0.7, 0.0, 300.0, 1.0).imag() == 0.0);
}
