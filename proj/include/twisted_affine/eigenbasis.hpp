#pragma once

#include "twisted_affine/core_types.hpp"
#include "twisted_affine/gauge.hpp"
#include "twisted_affine/quadrature.hpp"

#include <string>
#include <vector>

namespace twisted_affine {

enum class PolyFamily { Hermite, Laguerre };

// u_n(x) = p_n((x - center) / scale) for the diffusion left after the
// exponential conjugation e^{conj_a x}. Hermite: probabilists' H_n with weight
// e^{-y^2/2}, generator rate * (d^2/dy^2 - y d/dy). Laguerre: L_n^{(alpha)} with
// weight y^alpha e^{-y}, generator rate * (y d^2/dy^2 + (alpha + 1 - y) d/dy).
struct EigenBasis {
    PolyFamily family = PolyFamily::Hermite;
    double alpha = 0.0;
    double scale = 1.0;
    double center = 0.0;
    double conj_a = 0.0;  // payoff is multiplied by e^{conj_a x}, the price by e^{-conj_a x}
    double eigen_shift = 0.0;
    double rate = 1.0;
    ModelSpec reduced;
    std::string weight;

    double eigenvalue(int n) const { return eigen_shift + rate * n; }
    double to_scaled(double x) const { return (x - center) / scale; }

    // int u_n^2 w dy
    double norm(int n) const {
        if (family == PolyFamily::Hermite) return std::sqrt(2.0 * PI) * std::tgamma(n + 1.0);
        return std::exp(std::lgamma(n + alpha + 1.0) - std::lgamma(n + 1.0));
    }
};

inline EigenBasis build_basis(const ModelSpec& m) {
    if (m.kind == ModelKind::MultiOU)
        throw ValidationError("model.kind", "eigenfunction expansion supports one-factor models only");
    MeasureChange mc = reduce_model(m);
    EigenBasis b;
    b.reduced = mc.shifted;
    b.conj_a = -mc.a_inf(0);
    b.eigen_shift = -mc.diffusion_constant;
    const ModelSpec& r = mc.shifted;
    const double s2 = r.sigma * r.sigma;
    if (r.kind == ModelKind::OU) {
        b.family = PolyFamily::Hermite;
        b.scale = r.sigma / std::sqrt(2.0 * r.kappa);
        b.center = r.theta;
        b.rate = r.kappa;
        b.weight = "exp(-y^2/2)";
    } else {
        b.family = PolyFamily::Laguerre;
        b.scale = s2 / (2.0 * r.kappa);
        b.center = 0.0;
        b.alpha = 2.0 * r.kappa * r.theta / s2 - 1.0;
        b.rate = r.kappa;
        b.weight = "y^alpha exp(-y)";
        if (!(b.alpha > -1.0)) throw ValidationError("model", "Laguerre parameter must exceed -1");
    }
    return b;
}

using lcplx = std::complex<long double>;

inline std::vector<long double> hermite_all(int N, long double y) {
    std::vector<long double> h(N + 1);
    h[0] = 1.0L;
    if (N >= 1) h[1] = y;
    for (int k = 1; k < N; ++k) h[k + 1] = y * h[k] - k * h[k - 1];
    return h;
}

inline std::vector<long double> laguerre_all(int N, long double alpha, long double y) {
    std::vector<long double> l(N + 1);
    l[0] = 1.0L;
    if (N >= 1) l[1] = 1.0L + alpha - y;
    for (int k = 1; k < N; ++k) l[k + 1] = ((2.0L * k + 1.0L + alpha - y) * l[k] - (k + alpha) * l[k - 1]) / (k + 1.0L);
    return l;
}

inline double eval_eigen(const EigenBasis& b, int n, double x) {
    if (n < 0) throw ValidationError("n", "must be >= 0");
    const double y = b.to_scaled(x);
    if (b.family == PolyFamily::Hermite) return static_cast<double>(hermite_all(n, y)[n]);
    if (y < 0.0) throw NumericalError(ErrorCode::Domain, "Laguerre basis evaluated outside x >= 0");
    return static_cast<double>(laguerre_all(n, b.alpha, y)[n]);
}

// Transform of w u_n in the scaled coordinate y, int e^{-i y zeta} w(y) p_n(y) dy.
inline cplx ft_weighted_eigen(const EigenBasis& b, int n, cplx zeta) {
    if (b.family == PolyFamily::Hermite)
        return std::sqrt(2.0 * PI) * std::pow(-I * zeta, n) * std::exp(-0.5 * zeta * zeta);
    if (!(zeta.imag() < 1.0))
        throw NumericalError(ErrorCode::Domain, "Laguerre weighted transform needs Im zeta < 1");
    const cplx q = 1.0 + I * zeta;
    const double lg = std::lgamma(n + b.alpha + 1.0) - std::lgamma(n + 1.0);
    return std::pow(I * zeta, n) * std::exp(lg - (n + b.alpha + 1.0) * std::log(q));
}

// Taylor coefficients t_j of e^{sign i Phi} at 0 by the Cauchy integral on a
// circle well inside the disc of analyticity. A second radius guards the
// estimate.
struct TwistSeries {
    std::vector<cplx> t;
    double radius = 0.0;
    double disagreement = 0.0;
};

inline std::vector<cplx> cauchy_taylor(const std::function<cplx(cplx)>& F, int N, double rho, int M) {
    std::vector<cplx> vals(M);
    parallel_for(M, [&](std::size_t m) { vals[m] = F(rho * std::exp(I * (2.0 * PI * m / M))); }, 8);
    std::vector<cplx> t(N + 1);
    std::vector<cplx> terms(M);
    for (int j = 0; j <= N; ++j) {
        for (int m = 0; m < M; ++m) terms[m] = vals[m] * std::exp(-I * (2.0 * PI * j * m / M));
        t[j] = pairwise_sum(terms) / static_cast<double>(M) / std::pow(rho, j);
    }
    return t;
}

inline TwistSeries twist_taylor(const GaugeFn& g, int N, double sign = 1.0) {
    TwistSeries s;
    s.t.assign(N + 1, 0.0);
    if (g.trivial()) {
        s.t[0] = 1.0;
        s.radius = INF;
        return s;
    }
    const double R = g.analytic_radius();
    const double rho = std::isfinite(R) ? 0.6 * R : 10.0;
    s.radius = rho;
    auto F = [&](cplx z) { return std::exp(sign * I * g(z)); };
    const int M = 256;
    s.t = cauchy_taylor(F, N, rho, M);
    const double rho2 = 0.75 * rho;
    std::vector<cplx> t2 = cauchy_taylor(F, N, rho2, M);
    double fmax = 0.0;
    for (int m = 0; m < 16; ++m) fmax = std::max(fmax, std::abs(F(rho * std::exp(I * (2.0 * PI * m / 16)))));
    for (int j = 0; j <= N; ++j)
        s.disagreement = std::max(s.disagreement, std::abs(s.t[j] - t2[j]) * std::pow(rho2, j) / fmax);
    if (s.disagreement > 1e-9)
        throw NumericalError(ErrorCode::DerivativeEstimate, "Cauchy estimates of the twist coefficients disagree");
    return s;
}

// Same coefficients from the closed-form derivatives of Phi, when Phi is a sum
// of logarithms: F' = i Phi' F gives n f_n = sum_k k i phi_k f_{n-k}.
inline std::vector<cplx> twist_taylor_closed(const GaugeFn& g, int N, double sign = 1.0) {
    std::vector<cplx> f(N + 1, 0.0);
    if (g.trivial()) {
        f[0] = 1.0;
        return f;
    }
    if (g.method != GaugeMethod::ClosedForm)
        throw ValidationError("twist_taylor_closed", "gauge has no closed form");
    std::vector<cplx> phi(N + 1, 0.0);
    phi[0] = g(0.0);
    for (int k = 1; k <= N; ++k)
        for (std::size_t p = 0; p < g.pf.poles.size(); ++p)
            phi[k] += g.pf.residues[p] * ((k % 2 == 1) ? 1.0 : -1.0) / (static_cast<double>(k) * std::pow(-g.pf.poles[p], k));
    f[0] = std::exp(sign * I * phi[0]);
    for (int n = 1; n <= N; ++n) {
        cplx acc = 0.0;
        for (int k = 1; k <= n; ++k) acc += static_cast<double>(k) * sign * I * phi[k] * f[n - k];
        f[n] = acc / static_cast<double>(n);
    }
    return f;
}

// Coefficients (ascending powers of x) of e^{i Phi(D)} x^n.
inline std::vector<cplx> twisted_polynomial(const GaugeFn& g, int n) {
    std::vector<cplx> t = g.method == GaugeMethod::ClosedForm || g.trivial() ? twist_taylor_closed(g, n)
                                                                               : twist_taylor(g, n).t;
    std::vector<cplx> c(n + 1);
    for (int l = 0; l <= n; ++l) {
        const int j = n - l;
        const double ratio = std::exp(std::lgamma(n + 1.0) - std::lgamma(l + 1.0));
        c[l] = t[j] * std::pow(-I, j) * ratio;
    }
    return c;
}

// (e^{i Phi(D)} u_n)(x) for n = 0..N from the Taylor coefficients t_j of
// e^{i Phi}: sum_j t_j (-i/s)^j d^j/dy^j p_n(y).
inline std::vector<cplx> twisted_eigen_all(const EigenBasis& b, const std::vector<cplx>& t, int N, double x) {
    const long double y = b.to_scaled(x);
    if (b.family == PolyFamily::Laguerre && y < 0.0L)
        throw NumericalError(ErrorCode::Domain, "Laguerre basis evaluated outside x >= 0");
    const int J = std::min<int>(N, static_cast<int>(t.size()) - 1);
    std::vector<lcplx> e(J + 1);
    lcplx mis(0.0L, -1.0L / b.scale);
    lcplx pw(1.0L, 0.0L);
    for (int j = 0; j <= J; ++j) {
        e[j] = lcplx(t[j].real(), t[j].imag()) * pw;
        pw *= mis;
    }
    std::vector<cplx> out(N + 1);
    if (b.family == PolyFamily::Hermite) {
        std::vector<long double> h = hermite_all(N, y);
        for (int n = 0; n <= N; ++n) {
            lcplx acc = 0.0L;
            long double ff = 1.0L;  // n! / (n - j)!
            for (int j = 0; j <= std::min(n, J); ++j) {
                acc += e[j] * ff * h[n - j];
                ff *= static_cast<long double>(n - j);
            }
            out[n] = cplx(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
        }
    } else {
        // d^j L_n^{a} = (-1)^j L_{n-j}^{a+j}
        std::vector<std::vector<long double>> tab(J + 1);
        for (int j = 0; j <= J; ++j) tab[j] = laguerre_all(N - j, static_cast<long double>(b.alpha) + j, y);
        for (int n = 0; n <= N; ++n) {
            lcplx acc = 0.0L;
            for (int j = 0; j <= std::min(n, J); ++j) acc += e[j] * ((j % 2) ? -1.0L : 1.0L) * tab[j][n - j];
            out[n] = cplx(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
        }
    }
    return out;
}

// Transform of the (unweighted) Laguerre eigenfunction 1_{x>0} L_n^a(x/s),
// given by the integral for Im xi < 0 and by continuation elsewhere off 0.
inline cplx ft_laguerre_eigen(const EigenBasis& b, int n, cplx xi, bool continued = false) {
    if (!continued && !(xi.imag() < 0.0)) throw NumericalError(ErrorCode::Domain, "transform of u_n needs Im xi < 0");
    const cplx z = I * b.scale * xi;
    cplx acc = 0.0;
    cplx zpow = 1.0 / z;
    for (int k = 0; k <= n; ++k) {
        // (-1)^k C(n + a, n - k) / z^{k+1}
        const double lc = std::lgamma(n + b.alpha + 1.0) - std::lgamma(n - k + 1.0) - std::lgamma(k + b.alpha + 1.0);
        acc += ((k % 2) ? -1.0 : 1.0) * std::exp(lc) * zpow;
        zpow /= z;
    }
    return b.scale * acc;
}

// Line for the Laguerre contour route: halfway between 0 and the nearest
// singularity of Phi below the real axis.
inline double laguerre_contour_omega(const GaugeFn& g, const EigenBasis& b) {
    double lo = -2.0 / b.scale;
    if (!g.trivial())
        for (cplx p : gauge_singularities(g.model, g.jump))
            if (p.imag() < 0.0) lo = std::max(lo, p.imag());
    return 0.5 * lo;
}

// (e^{sign i Phi(D)} u_n)(x) by Fourier inversion. Laguerre bases use a line
// below the origin bent upwards in the wings so that e^{i x xi} decays (needs
// x > 0). The inversion acts on u_n cut off at 0, which matches the polynomial
// route only when e^{i Phi} is analytic above the line, i.e. when the jumps
// cannot leave the half-line. Polynomials on the whole line have no classical
// transform, so Hermite bases fall back to the Cauchy-circle derivatives.
inline cplx twisted_eigen_contour(const GaugeFn& g, const EigenBasis& b, int n, double x, const Contour& c,
                                  double sign = -1.0) {
    if (b.family == PolyFamily::Hermite) {
        TwistSeries ts = twist_taylor(g, n, sign);
        return twisted_eigen_all(b, ts.t, n, x)[n];
    }
    if (!(c.omega < 0.0)) throw NumericalError(ErrorCode::Domain, "Laguerre contour needs omega < 0");
    if (!(x > 0.0)) throw NumericalError(ErrorCode::Domain, "Laguerre contour route needs x > 0");
    if (!g.trivial() && g.method != GaugeMethod::ClosedForm)
        throw ValidationError("twisted_eigen_contour", "Laguerre contour route needs a closed-form gauge");
    if (!g.trivial())
        for (cplx p : gauge_singularities(g.model, g.jump))
            if (p.imag() >= c.omega - 1e-12)
                throw ValidationError("jump", "Laguerre contour route needs every singularity of Phi below the line "
                                              "(no downward jumps)");
    const double bscale = std::min(1.0, 1.0 / b.scale);
    const double beta = 0.5 * bscale;
    const double U = std::acosh(1.0 + 60.0 / (x * beta));
    const int half = std::max(c.n_points / 2, static_cast<int>(std::ceil(U / 0.004)));
    const double h = U / half;
    std::vector<cplx> terms(2 * half + 1);
    parallel_for(terms.size(), [&](std::size_t k) {
        const double u = (static_cast<int>(k) - half) * h;
        const cplx xi(bscale * std::sinh(u), c.omega + beta * (std::cosh(u) - 1.0));
        const cplx dxi(bscale * std::cosh(u), beta * std::sinh(u));
        cplx gauge = g.trivial() ? cplx(1.0) : std::exp(sign * I * phi_closed_form(g.pf, g.reference, xi));
        terms[k] = h * dxi * std::exp(I * x * xi) * gauge * ft_laguerre_eigen(b, n, xi, true);
    });
    return pairwise_sum(terms) / (2.0 * PI);
}

}  // namespace twisted_affine
