#include "twisted_affine/eigenbasis.hpp"

#include <gtest/gtest.h>

using namespace twisted_affine;

namespace {

// L_n^a(y) = sum_k (-1)^k C(n + a, n - k) y^k / k!
double laguerre_sum(int n, double a, double y) {
    long double s = 0.0L;
    for (int k = 0; k <= n; ++k) {
        long double lc = std::lgamma(n + a + 1.0L) - std::lgamma(n - k + 1.0L) - std::lgamma(k + a + 1.0L);
        s += ((k % 2) ? -1.0L : 1.0L) * std::exp(lc) * std::pow(static_cast<long double>(y), k) / std::tgamma(k + 1.0L);
    }
    return static_cast<double>(s);
}

std::vector<Polynomial> hermite_polys(int N) {
    std::vector<Polynomial> h = {Polynomial::constant(1.0), Polynomial::z()};
    for (int k = 1; k < N; ++k) h.push_back(Polynomial::z() * h[k] + (-static_cast<double>(k)) * h[k - 1]);
    return h;
}

std::vector<Polynomial> laguerre_polys(int N, double a) {
    std::vector<Polynomial> l = {Polynomial::constant(1.0), Polynomial({1.0 + a, -1.0})};
    for (int k = 1; k < N; ++k)
        l.push_back((1.0 / (k + 1.0)) * (Polynomial({2.0 * k + 1.0 + a, -1.0}) * l[k] + (-(k + a)) * l[k - 1]));
    return l;
}

Contour contour_at(double omega) {
    Contour c;
    c.omega = omega;
    c.n_points = 0;
    return c;
}

}  // namespace

TEST(Basis, UnitOu) {
    EigenBasis b = build_basis(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0));
    EXPECT_EQ(b.family, PolyFamily::Hermite);
    EXPECT_NEAR(b.scale, 1.0, 1e-15);
    EXPECT_EQ(b.center, 0.0);
    EXPECT_EQ(b.rate, 1.0);
    EXPECT_EQ(b.eigen_shift, 0.0);
    EXPECT_EQ(b.conj_a, 0.0);
}

TEST(Basis, Vasicek) {
    const double s = 0.2, k = 0.5, th = 0.1;
    EigenBasis b = build_basis(ModelSpec::vasicek(s, k, th));
    EXPECT_NEAR(b.center, -0.06, 1e-15);
    EXPECT_NEAR(b.conj_a, 1.0 / k, 1e-15);
    EXPECT_EQ(b.rate, k);
    // the lowest eigenvalue is the long bond yield, -log P(T) / T as T -> infinity
    auto log_bond = [&](double T) {
        const double B = (1.0 - std::exp(-k * T)) / k;
        return (th - s * s / (2.0 * k * k)) * (B - T) - s * s * B * B / (4.0 * k);
    };
    const double slope = -(log_bond(400.0) - log_bond(200.0)) / 200.0;
    EXPECT_NEAR(b.eigen_shift, slope, 1e-12);
    EXPECT_NEAR(b.eigen_shift, 0.02, 1e-15);
}

TEST(Basis, SquareRoot) {
    EigenBasis b = build_basis(ModelSpec::square_root(0.2, 1.0, 0.1));
    EXPECT_EQ(b.family, PolyFamily::Laguerre);
    EXPECT_NEAR(b.alpha, 4.0, 1e-14);
    EXPECT_NEAR(b.scale, 0.02, 1e-16);
    EXPECT_EQ(b.eigen_shift, 0.0);
}

TEST(Basis, Cir) {
    const double s = 0.3, k = 1.0, th = 0.2;
    EigenBasis b = build_basis(ModelSpec::cir(s, k, th));
    const double g = std::sqrt(k * k + 2.0 * s * s);
    EXPECT_NEAR(b.rate, g, 1e-14);
    // long yield of the CIR bond
    EXPECT_NEAR(b.eigen_shift, 2.0 * k * th / (k + g), 1e-14);
    const double k1 = b.rate, th1 = k * th / k1;
    EXPECT_NEAR(b.alpha, 2.0 * k1 * th1 / (s * s) - 1.0, 1e-13);
    EXPECT_NEAR(b.scale, s * s / (2.0 * k1), 1e-15);
    for (int n = 0; n < 5; ++n) EXPECT_LT(b.eigenvalue(n), b.eigenvalue(n + 1));
}

TEST(Basis, MultiOuUnsupported) {
    ModelSpec mo = ModelSpec::multi_ou(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                                       Eigen::MatrixXd::Identity(2, 2));
    EXPECT_THROW(build_basis(mo), ValidationError);
}

TEST(EvalEigen, Values) {
    EigenBasis h = build_basis(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0));
    EXPECT_EQ(eval_eigen(h, 0, 3.7), 1.0);
    EXPECT_NEAR(eval_eigen(h, 2, 2.0), 3.0, 1e-15);
    EigenBasis l = build_basis(ModelSpec::square_root(0.2, 1.0, 0.1));
    EXPECT_NEAR(eval_eigen(l, 1, 0.02), 4.0, 1e-14);
    EXPECT_THROW(eval_eigen(l, 1, -0.01), NumericalError);
}

TEST(EvalEigen, LaguerreExplicitSum) {
    EigenBasis l = build_basis(ModelSpec::square_root(0.3, 1.0, 0.2));
    for (int n : {0, 3, 8, 15})
        for (double y : {0.1, 2.0, 9.0}) {
            double ref = laguerre_sum(n, l.alpha, y);
            EXPECT_NEAR(eval_eigen(l, n, y * l.scale), ref, 1e-11 * std::max(1.0, std::abs(ref)));
        }
}

TEST(FtWeighted, ClosedFormPoints) {
    EigenBasis h = build_basis(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0));
    EXPECT_NEAR(ft_weighted_eigen(h, 0, 0.0).real(), std::sqrt(2.0 * PI), 1e-15);
    cplx v = ft_weighted_eigen(h, 3, 1.0);
    EXPECT_LT(std::abs(v - std::sqrt(2.0 * PI) * I * std::exp(-0.5)), 1e-15);
    EigenBasis l = build_basis(ModelSpec::square_root(0.2, 1.0, 0.1));
    EXPECT_NEAR(ft_weighted_eigen(l, 0, 0.0).real(), 24.0, 1e-12);
    EXPECT_THROW(ft_weighted_eigen(l, 2, cplx(0.0, 1.0)), NumericalError);
}

TEST(FtWeighted, MatchesDirectQuadrature) {
    EigenBasis h = build_basis(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0));
    EigenBasis l = build_basis(ModelSpec::square_root(0.2, 1.0, 0.1));
    for (int n = 0; n <= 6; ++n) {
        for (cplx z : {cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(-2.5, 0.0), cplx(0.8, -0.5)}) {
            auto fh = [&](double y) { return std::exp(-I * y * z) * std::exp(-0.5 * y * y) * eval_eigen(h, n, y); };
            cplx dh = integrate_gk(fh, -14.0, 14.0, 1e-14);
            EXPECT_LT(std::abs(dh - ft_weighted_eigen(h, n, z)), 1e-8 * std::max(1.0, std::abs(dh)));
            auto fl = [&](double y) {
                return std::exp(-I * y * z) * std::pow(y, l.alpha) * std::exp(-y) * eval_eigen(l, n, y * l.scale);
            };
            cplx dl = integrate_gk(fl, 0.0, 30.0, 1e-14) + integrate_gk(fl, 30.0, 200.0, 1e-14);
            EXPECT_LT(std::abs(dl - ft_weighted_eigen(l, n, z)), 1e-8 * std::max(1.0, std::abs(dl)));
        }
    }
}

TEST(Orthogonality, GaussRules) {
    EigenBasis h = build_basis(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0));
    EigenBasis l = build_basis(ModelSpec::square_root(0.3, 1.0, 0.2));
    GaussRule gh = gauss_hermite_prob(200), gl = gauss_laguerre(200, l.alpha);
    for (int m = 0; m <= 8; ++m) {
        for (int n = 0; n <= 8; ++n) {
            long double ih = 0.0L, il = 0.0L;
            for (int i = 0; i < 200; ++i) {
                ih += gh.w[i] * hermite_all(8, gh.x[i])[m] * hermite_all(8, gh.x[i])[n];
                auto lv = laguerre_all(8, l.alpha, gl.x[i]);
                il += gl.w[i] * lv[m] * lv[n];
            }
            if (m == n) {
                EXPECT_NEAR(static_cast<double>(ih) / h.norm(n), 1.0, 1e-10);
                EXPECT_NEAR(static_cast<double>(il) / l.norm(n), 1.0, 1e-10);
            } else {
                EXPECT_LT(std::abs(static_cast<double>(ih)) / h.norm(std::max(m, n)), 1e-10);
                EXPECT_LT(std::abs(static_cast<double>(il)) / l.norm(std::max(m, n)), 1e-10);
            }
        }
    }
}

TEST(EigenRelation, HermiteOperator) {
    // u'' - y u' = -n u
    auto h = hermite_polys(12);
    for (int n = 0; n <= 12; ++n) {
        Polynomial d1 = h[n].derivative(), d2 = d1.derivative();
        for (double y = -4.0; y <= 4.0; y += 0.5) {
            double r = d2(y) - y * d1(y) + n * h[n](y);
            EXPECT_LT(std::abs(r), 1e-8 * std::max(1.0, std::abs(h[n](y))));
            EXPECT_NEAR(h[n](y), static_cast<double>(hermite_all(n, y)[n]), 1e-9 * std::max(1.0, std::abs(h[n](y))));
        }
    }
}

TEST(EigenRelation, LaguerreOperator) {
    // y u'' + (a + 1 - y) u' = -n u
    const double a = 2.3;
    auto l = laguerre_polys(12, a);
    for (int n = 0; n <= 12; ++n) {
        Polynomial d1 = l[n].derivative(), d2 = d1.derivative();
        for (double y = 0.0; y <= 10.0; y += 0.5) {
            double r = y * d2(y) + (a + 1.0 - y) * d1(y) + n * l[n](y);
            EXPECT_LT(std::abs(r), 1e-8 * std::max(1.0, std::abs(l[n](y))));
        }
    }
}

TEST(Twist, TrivialGaugeIsIdentity) {
    GaugeFn g = make_gauge(ModelSpec::ou(0.2, 1.0, 0.0), JumpSpec::none());
    auto c = twisted_polynomial(g, 5);
    for (int l = 0; l < 5; ++l) EXPECT_EQ(c[l], cplx(0.0));
    EXPECT_EQ(c[5], cplx(1.0));
}

TEST(Twist, FirstDegree) {
    GaugeFn g = make_gauge(ModelSpec::ou(0.2, 1.0, 0.0), JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0));
    const double h = 1e-4;
    cplx p = (g(h) - g(-h)) / (2.0 * h);
    auto c = twisted_polynomial(g, 1);
    EXPECT_EQ(c[1], cplx(1.0));
    EXPECT_LT(std::abs(c[0] - p), 1e-8);
}

TEST(Twist, SecondDegree) {
    GaugeFn g = make_gauge(ModelSpec::ou(0.2, 1.0, 0.0), JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0));
    auto F = [&](double z) { return std::exp(I * g(z)); };
    const double h = 1e-3;
    cplx f1 = (F(h) - F(-h)) / (2.0 * h);
    cplx f2 = (F(h) - 2.0 * F(0.0) + F(-h)) / (h * h);
    auto c = twisted_polynomial(g, 2);
    // e^{i Phi(D)} x^2 = x^2 - 2 i F'(0) x - F''(0)
    EXPECT_LT(std::abs(c[2] - 1.0), 1e-14);
    EXPECT_LT(std::abs(c[1] - (-2.0 * I * f1)), 1e-7);
    EXPECT_LT(std::abs(c[0] - (-f2)), 1e-6);
}

TEST(Twist, CauchyMatchesClosedForm) {
    for (ModelSpec m : {ModelSpec::ou(0.2, 1.0, 0.0), ModelSpec::cir(0.2, 1.0, 0.1)}) {
        GaugeFn g = make_gauge(m, JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0));
        for (double sign : {1.0, -1.0}) {
            TwistSeries ts = twist_taylor(g, 20, sign);
            auto tc = twist_taylor_closed(g, 20, sign);
            for (int j = 0; j <= 20; ++j)
                EXPECT_LT(std::abs(ts.t[j] - tc[j]) * std::pow(ts.radius, j), 1e-10) << j;
        }
    }
}

TEST(TwistedContour, TrivialGauge) {
    EigenBasis h = build_basis(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0));
    GaugeFn gh = make_gauge(ModelSpec::ou(std::sqrt(2.0), 1.0, 0.0), JumpSpec::none());
    for (double x : {-1.0, 0.0, 2.5}) EXPECT_NEAR(twisted_eigen_contour(gh, h, 0, x, contour_at(0.0)).real(), 1.0, 1e-15);
    ModelSpec sq = ModelSpec::square_root(0.2, 1.0, 0.1);
    EigenBasis l = build_basis(sq);
    GaugeFn gl = make_gauge(sq, JumpSpec::none());
    const double omega = laguerre_contour_omega(gl, l);
    cplx v = twisted_eigen_contour(gl, l, 1, 0.02, contour_at(omega));
    EXPECT_NEAR(v.real(), 4.0, 1e-10);
    EXPECT_NEAR(v.imag(), 0.0, 1e-10);
    for (int n : {3, 8})
        for (double x : {0.05, 0.3})
            EXPECT_NEAR(twisted_eigen_contour(gl, l, n, x, contour_at(omega)).real(), eval_eigen(l, n, x),
                        1e-9 * std::max(1.0, std::abs(eval_eigen(l, n, x))));
}

TEST(TwistedContour, HermiteAgreesWithPolynomialRoute) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    GaugeFn g = make_gauge(m, JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0));
    EigenBasis b = build_basis(m);
    auto poly = twisted_polynomial(g, 2);  // e^{i Phi(D)} x^2 in x
    // u_2 = (x / s)^2 - 1
    const double s = b.scale;
    cplx via_poly = poly[0] / (s * s) - 1.0;
    cplx via_contour = twisted_eigen_contour(g, b, 2, 0.0, contour_at(0.5), 1.0);
    EXPECT_LT(std::abs(via_poly - via_contour), 1e-8 * std::abs(via_poly));
}

TEST(TwistedContour, LaguerreUpwardJumpsAgreeWithDerivativeRoute) {
    JumpSpec up = JumpSpec::exponential_positive(1.0, 10.0);
    for (ModelSpec m : {ModelSpec::square_root(0.2, 1.0, 0.1), ModelSpec::cir(0.2, 1.0, 0.1)}) {
        GaugeFn g = make_gauge(m, up);
        EigenBasis b = build_basis(m);
        const double omega = laguerre_contour_omega(g, b);
        EXPECT_LT(omega, -4.0);
        EXPECT_GT(omega, -6.0);
        for (double sign : {1.0, -1.0}) {
            auto ts = twist_taylor(g, 8, sign);
            for (double x : {0.05, 0.1, 0.3}) {
                auto ref = twisted_eigen_all(b, ts.t, 8, x);
                for (int n : {0, 1, 3, 8}) {
                    cplx v = twisted_eigen_contour(g, b, n, x, contour_at(omega), sign);
                    EXPECT_LT(std::abs(v - ref[n]), 1e-8 * std::max(1.0, std::abs(ref[n])))
                        << model_kind_name(m.kind) << " n = " << n << " x = " << x;
                }
            }
        }
    }
}

TEST(TwistedContour, LaguerreRejectsDownwardJumps) {
    ModelSpec m = ModelSpec::square_root(0.2, 1.0, 0.1);
    GaugeFn g = make_gauge(m, JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0));
    EigenBasis b = build_basis(m);
    EXPECT_THROW(twisted_eigen_contour(g, b, 2, 0.1, contour_at(-5.0)), ValidationError);
    EXPECT_THROW(twisted_eigen_contour(make_gauge(m, JumpSpec::none()), b, 2, 0.1, contour_at(0.5)), NumericalError);
}
