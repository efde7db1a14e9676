#include "twisted_affine/gauge.hpp"
#include "twisted_affine/riccati.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace twisted_affine;

TEST(SolveA, InitialCondition) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    cplx a = solve_A(m, 0.0, cplx(3.0, 2.0));
    EXPECT_EQ(a, cplx(-2.0, 3.0));
    EXPECT_EQ(solve_A(ModelSpec::cir(0.3, 1.0, 0.2), 0.0, cplx(3.0, 2.0)), cplx(-2.0, 3.0));
}

TEST(SolveA, OuClosedForm) {
    cplx a = solve_A(ModelSpec::ou(0.2, 0.5, 0.0), 2.0, 1.0);
    EXPECT_NEAR(a.real(), 0.0, 1e-16);
    EXPECT_NEAR(a.imag(), 0.36787944117144233, 1e-15);
}

TEST(SolveA, VasicekAffineOde) {
    // dA/dt = -kappa A - 1
    ModelSpec m = ModelSpec::vasicek(0.2, 0.5, 0.1);
    cplx xi(0.7, 0.3);
    auto s = solve_riccati_rk4(m, JumpSpec::none(), 3.0, xi);
    EXPECT_LT(std::abs(solve_A(m, 3.0, xi) - s.A), 1e-10);
}

TEST(SolveA, SquareRootClosedFormMatchesRk4) {
    for (ModelSpec m : {ModelSpec::cir(0.3, 1.0, 0.2), ModelSpec::square_root(0.3, 1.0, 0.2)}) {
        for (cplx xi : {cplx(1.0, 0.0), cplx(-3.0, 1.5), cplx(8.0, -2.0)}) {
            for (double T : {0.3, 1.0, 4.0}) {
                auto rk = solve_riccati_rk4(m, JumpSpec::none(), T, xi);
                EXPECT_LT(std::abs(solve_A(m, T, xi) - rk.A), 1e-9);
                EXPECT_LT(std::abs(B0_closed(m, T, xi) - rk.B0), 1e-9);
            }
        }
    }
}

TEST(SolveA, BlowUpIsReported) {
    // real i xi beyond the unstable root explodes in finite time
    ModelSpec m = ModelSpec::square_root(0.2, 1.0, 0.1);
    cplx xi(0.0, -60.0);
    for (auto f : {std::function<void()>([&] { solve_A(m, 5.0, xi); }),
                   std::function<void()>([&] { solve_riccati_rk4(m, JumpSpec::none(), 5.0, xi); })}) {
        try {
            f();
            FAIL();
        } catch (const NumericalError& e) {
            EXPECT_EQ(e.code(), ErrorCode::BlowUp);
            EXPECT_NE(std::string(e.what()).find("t = "), std::string::npos);
        }
    }
    EXPECT_NO_THROW(solve_A(m, 1.0, xi));
}

TEST(SolveA, OdeResidual) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ut(0.1, 5.0), ux(-4.0, 4.0), uy(-0.8, 0.8);
    for (ModelSpec m : {ModelSpec::ou(0.2, 0.8, 0.1), ModelSpec::vasicek(0.2, 0.8, 0.1), ModelSpec::square_root(0.3, 1.0, 0.2),
                        ModelSpec::cir(0.3, 1.0, 0.2)}) {
        for (int k = 0; k < 20; ++k) {
            const double t = ut(rng), h = 1e-3;
            const cplx xi(ux(rng), uy(rng));
            cplx d = (-solve_A(m, t + 2 * h, xi) + 8.0 * solve_A(m, t + h, xi) - 8.0 * solve_A(m, t - h, xi) +
                      solve_A(m, t - 2 * h, xi)) /
                     (12.0 * h);
            EXPECT_LT(std::abs(d - symbol_L(m, 1, -I * solve_A(m, t, xi))), 1e-8) << model_kind_name(m.kind);
        }
    }
}

TEST(SolveA, DecaySlope) {
    for (ModelSpec m : {ModelSpec::ou(0.2, 0.7, 0.0), ModelSpec::square_root(0.2, 0.7, 0.1)}) {
        const cplx xi(1.5, 0.2);
        // least-squares slope of log |A| over T in [1, 10]
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const int n = 19;
        for (int i = 0; i < n; ++i) {
            const double T = 1.0 + 0.5 * i, y = std::log(std::abs(solve_A(m, T, xi)));
            sx += T;
            sy += y;
            sxx += T * T;
            sxy += T * y;
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        EXPECT_LE(slope, -0.9 * m.kappa);
    }
}

TEST(MultiOu, MatrixExponential) {
    Eigen::MatrixXd k(2, 2);
    k << 1.0, 0.3, 0.0, 2.0;
    ModelSpec m = ModelSpec::multi_ou(k, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.2);
    CVec xi(2);
    xi << cplx(1.0, 0.1), cplx(-0.5, 0.0);
    const double T = 0.8, h = 1e-4;
    CVec a = solve_A(m, T, xi);
    // dA/dt = -kappa' A
    CVec d = (solve_A(m, T + h, xi) - solve_A(m, T - h, xi)) / (2.0 * h);
    CVec rhs = -(k.transpose().cast<cplx>() * a);
    EXPECT_LT((d - rhs).norm(), 1e-7);
    EXPECT_LT((solve_A(m, 0.0, xi) - I * xi).norm(), 1e-15);
}

TEST(IntegrateB, ZeroSymbol) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    EXPECT_EQ(integrate_B(m, [](cplx) { return cplx(0.0); }, 5.0, 1.0), cplx(0.0));
}

TEST(IntegrateB, OuDiffusionPart) {
    ModelSpec m = ModelSpec::ou(0.2, 0.5, 0.0);
    const double expect = -0.02 * (1.0 - std::exp(-1.0));
    cplx q = integrate_B(m, [&](cplx eta) { return symbol_L(m, 0, eta); }, 1.0, 1.0);
    EXPECT_NEAR(q.real(), expect, 1e-15);
    EXPECT_NEAR(B0_closed(m, 1.0, 1.0).real(), expect, 1e-15);
    EXPECT_NEAR(q.imag(), 0.0, 1e-16);
}

TEST(IntegrateB, ClosedFormsMatchQuadrature) {
    for (ModelKind k : {ModelKind::OU, ModelKind::Vasicek, ModelKind::SquareRoot, ModelKind::CIR}) {
        ModelSpec m = ModelSpec::make(k, 0.25, 0.9, 0.15);
        for (cplx xi : {cplx(1.0, 0.0), cplx(-2.0, 0.5)}) {
            cplx q = integrate_B(m, [&](cplx eta) { return symbol_L(m, 0, eta); }, 3.0, xi);
            EXPECT_LT(std::abs(q - B0_closed(m, 3.0, xi)), 1e-12) << model_kind_name(k);
        }
    }
}

TEST(IntegrateB, LongHorizonJumpPartIsGauge) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    JumpSpec j = JumpSpec::double_exponential(1.0, 0.0, 10.0, -10.0);
    cplx bj = integrate_B(m, [&](cplx eta) { return symbol_LJ(j, eta); }, 60.0, 1.0);
    EXPECT_LT(std::abs(bj - (-I) * phi_contour(m, j, 0.0, 1.0)), 1e-8);
}

TEST(IntegrateB, StripViolationNamesTime) {
    // A(s, xi) = i xi e^{-s}: Im(-i A) = Im(xi) e^{-s} leaves (lm, lp) near s = 0
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    JumpSpec j = JumpSpec::double_exponential(1.0, 1.0, 2.0, -2.0);
    try {
        integrate_B(m, [&](cplx eta) { return symbol_LJ(j, eta); }, 1.0, cplx(0.0, 3.0));
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.code(), ErrorCode::StripViolation);
        EXPECT_NE(std::string(e.what()).find("s = "), std::string::npos);
    }
}

TEST(Chf, ZeroMaturity) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    JumpSpec j = JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0);
    cplx v = chf(m, j, 0.0, 0.4, 2.0);
    EXPECT_LT(std::abs(v - std::exp(I * 0.8)), 1e-15);
}

TEST(Chf, OuGaussian) {
    const double s = 0.2, k = 0.5, th = 0.1, T = 1.0, x = 0.3;
    ModelSpec m = ModelSpec::ou(s, k, th);
    const double mean = th + (x - th) * std::exp(-k * T), var = s * s * (1.0 - std::exp(-2.0 * k * T)) / (2.0 * k);
    for (cplx xi : {cplx(2.0, 0.0), cplx(-1.0, 0.7)}) {
        cplx expect = std::exp(I * xi * mean - 0.5 * var * xi * xi);
        EXPECT_LT(std::abs(chf(m, JumpSpec::none(), T, x, xi) - expect), 1e-15);
    }
}

TEST(Chf, VasicekBondPrice) {
    const double s = 0.2, k = 0.5, th = 0.1, T = 4.0, x = 0.03;
    ModelSpec m = ModelSpec::vasicek(s, k, th);
    const double B = (1.0 - std::exp(-k * T)) / k;
    const double A = (th - s * s / (2.0 * k * k)) * (B - T) - s * s * B * B / (4.0 * k);
    EXPECT_NEAR(chf(m, JumpSpec::none(), T, x, 0.0).real(), std::exp(A - B * x), 1e-14);
}

TEST(Chf, CirBondPrice) {
    const double s = 0.3, k = 1.0, th = 0.2, T = 3.0, x = 0.05;
    ModelSpec m = ModelSpec::cir(s, k, th);
    const double g = std::sqrt(k * k + 2.0 * s * s), e = std::exp(g * T) - 1.0;
    const double den = (g + k) * e + 2.0 * g;
    const double B = 2.0 * e / den;
    const double A = std::pow(2.0 * g * std::exp(0.5 * (k + g) * T) / den, 2.0 * k * th / (s * s));
    EXPECT_NEAR(chf(m, JumpSpec::none(), T, x, 0.0).real(), A * std::exp(-B * x), 1e-14);
}

TEST(Chf, JumpSystemMatchesRk4) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    JumpSpec j = JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0);
    auto a = solve_riccati(m, j, 0.5, 1.0);
    auto b = solve_riccati(m, j, 0.5, 1.0, RiccatiMethod::RK4Adaptive);
    EXPECT_LT(std::abs(a.A - b.A), 1e-10);
    EXPECT_LT(std::abs(a.B0 - b.B0), 1e-10);
    EXPECT_LT(std::abs(a.BJ - b.BJ), 1e-10);
    EXPECT_EQ(b.method, RiccatiMethod::RK4Adaptive);
}

TEST(Chf, HermitianSymmetryAndBound) {
    JumpSpec j = JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0);
    for (ModelSpec m : {ModelSpec::ou(0.2, 1.0, 0.1), ModelSpec::square_root(0.2, 1.0, 0.1)}) {
        for (double xr : {-3.0, 0.5, 6.0}) {
            cplx xi(xr, 0.4);
            cplx a = chf(m, j, 2.0, 0.2, -std::conj(xi)), b = chf(m, j, 2.0, 0.2, xi);
            EXPECT_LT(std::abs(a - std::conj(b)), 1e-10);
            EXPECT_LE(std::abs(chf(m, j, 2.0, 0.2, xr)), 1.0 + 1e-14);
        }
    }
}

TEST(Chf, MultiOuDecouples) {
    Eigen::MatrixXd k = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    Eigen::MatrixXd s = Eigen::Vector2d(0.2, 0.3).asDiagonal();
    ModelSpec mo = ModelSpec::multi_ou(k, Eigen::Vector2d(0.1, -0.1), s);
    JumpSpec j = JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0);
    Eigen::VectorXd x = Eigen::Vector2d(0.2, 0.4);
    CVec xi(2);
    xi << cplx(1.0, 0.0), cplx(-0.5, 0.0);
    cplx expect = chf(ModelSpec::ou(0.2, 1.0, 0.1), j, 1.5, 0.2, xi(0)) *
                  chf(ModelSpec::ou(0.3, 2.0, -0.1), JumpSpec::none(), 1.5, 0.4, xi(1));
    EXPECT_LT(std::abs(chf(mo, j, 1.5, x, xi) - expect), 1e-12);
}
