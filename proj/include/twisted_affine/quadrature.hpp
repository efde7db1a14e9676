#pragma once

#include "twisted_affine/core_types.hpp"
#include "twisted_affine/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <functional>
#include <string>
#include <vector>

namespace twisted_affine {

enum class QuadRule { Trapezoid, SinhAccelerated };

inline const char* quad_rule_name(QuadRule r) {
    return r == QuadRule::Trapezoid ? "trapezoid" : "sinh";
}

// Horizontal line Im xi = omega. For the sinh rule the nodes are
// i*omega + b*sinh(u) with u in [-asinh(half_width/b), asinh(half_width/b)].
struct Contour {
    double omega = 0.0;
    double half_width = 0.0;
    int n_points = 0;
    QuadRule rule = QuadRule::Trapezoid;
    double sinh_scale = 1.0;

    bool is_auto() const { return n_points <= 0 || !(half_width > 0.0); }

    void validate() const {
        if (!std::isfinite(omega)) throw ValidationError("contour.omega", "must be finite");
        if (!(half_width > 0.0) || !std::isfinite(half_width)) throw ValidationError("contour.half_width", "must be > 0");
        if (n_points < 3 || n_points % 2 == 0) throw ValidationError("contour.points", "must be odd and >= 3");
        if (!(sinh_scale > 0.0)) throw ValidationError("contour.sinh_scale", "must be > 0");
    }
};

struct ContourGrid {
    std::vector<cplx> xi;
    std::vector<double> w;  // d xi along the line, real because the line is horizontal
};

inline ContourGrid make_grid(const Contour& c) {
    c.validate();
    ContourGrid g;
    const int n = c.n_points, half = n / 2;
    g.xi.resize(n);
    g.w.resize(n);
    if (c.rule == QuadRule::Trapezoid) {
        const double h = c.half_width / half;
        for (int k = -half; k <= half; ++k) {
            g.xi[k + half] = cplx(k * h, c.omega);
            g.w[k + half] = h;
        }
    } else {
        const double b = c.sinh_scale;
        const double U = std::asinh(c.half_width / b);
        const double h = U / half;
        for (int k = -half; k <= half; ++k) {
            const double u = k * h;
            g.xi[k + half] = cplx(b * std::sinh(u), c.omega);
            g.w[k + half] = b * std::cosh(u) * h;
        }
    }
    return g;
}

struct InverseFtResult {
    cplx value;
    double end_decay = 0.0;  // |w f| at the truncation ends relative to its maximum
};

inline double end_decay_ratio(const ContourGrid& g, const std::vector<cplx>& fhat) {
    double peak = 0.0;
    for (std::size_t k = 0; k < fhat.size(); ++k) peak = std::max(peak, std::abs(fhat[k]) * g.w[k]);
    if (peak == 0.0) return 0.0;
    const std::size_t n = fhat.size();
    double ends = std::max(std::abs(fhat[0]) * g.w[0], std::abs(fhat[n - 1]) * g.w[n - 1]);
    return ends / peak;
}

// (2 pi)^{-1} int e^{i x xi} fhat(xi) d xi over the sampled line.
inline InverseFtResult inverse_ft(const ContourGrid& g, const std::vector<cplx>& fhat, double x,
                                  double decay_tol = 1e-12) {
    if (fhat.size() != g.xi.size()) throw ValidationError("inverse_ft", "grid size mismatch");
    InverseFtResult r;
    r.end_decay = end_decay_ratio(g, fhat);
    if (r.end_decay > decay_tol)
        throw NumericalError(ErrorCode::TailDecay,
                             "integrand has not decayed at the truncation ends (ratio " + std::to_string(r.end_decay) +
                                 "); increase the half width");
    std::vector<cplx> terms(fhat.size());
    for (std::size_t k = 0; k < fhat.size(); ++k) terms[k] = g.w[k] * std::exp(I * x * g.xi[k]) * fhat[k];
    r.value = pairwise_sum(terms) / (2.0 * PI);
    return r;
}

// Trapezoid transform sum_k e^{-i k xi} v(k) dk at xi = xi_r + i*omega.
inline std::vector<cplx> forward_ft_curve(const std::vector<double>& k, const std::vector<double>& v, double omega,
                                          const std::vector<double>& xi_grid, double tail_tol = 1e-8) {
    const std::size_t n = k.size();
    if (n < 3 || v.size() != n) throw ValidationError("forward_ft_curve", "need at least 3 samples of equal length");
    const double dk = (k[n - 1] - k[0]) / static_cast<double>(n - 1);
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(k[i] - k[i - 1] - dk) > 1e-8 * std::max(1.0, std::abs(dk)))
            throw ValidationError("forward_ft_curve", "strike grid must be uniform in log strike");
    std::vector<double> damped(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        damped[i] = std::exp(omega * k[i]) * v[i];
        peak = std::max(peak, std::abs(damped[i]));
    }
    if (peak > 0.0 && std::max(std::abs(damped.front()), std::abs(damped.back())) > tail_tol * peak)
        throw NumericalError(ErrorCode::TailDecay, "damped curve does not decay at the grid ends; extend the tails");
    std::vector<cplx> out(xi_grid.size());
    parallel_for(xi_grid.size(), [&](std::size_t j) {
        std::vector<cplx> terms(n);
        for (std::size_t i = 0; i < n; ++i) {
            double wt = (i == 0 || i == n - 1) ? 0.5 * dk : dk;
            terms[i] = wt * damped[i] * std::exp(-I * k[i] * xi_grid[j]);
        }
        out[j] = pairwise_sum(terms);
    });
    return out;
}

// (2 pi)^{-1} int e^{-i Phi(xi)} Ghat(xi) wun_hat(-xi) d xi. wun_hat(-xi) plays
// the role of the complex conjugate on a shifted line.
inline cplx parseval_coeff(const std::function<cplx(cplx)>& Ghat, const std::function<cplx(cplx)>& phi,
                           const std::function<cplx(cplx)>& wun_hat, const Contour& c) {
    ContourGrid g = make_grid(c);
    std::vector<cplx> terms(g.xi.size());
    parallel_for(g.xi.size(), [&](std::size_t k) {
        cplx xi = g.xi[k];
        cplx gauge = phi ? std::exp(-I * phi(xi)) : cplx(1.0);
        terms[k] = g.w[k] * gauge * Ghat(xi) * wun_hat(-xi);
    });
    return pairwise_sum(terms) / (2.0 * PI);
}

// Adaptive Gauss-Kronrod on a real interval for complex integrands.
inline cplx integrate_gk(const std::function<cplx(double)>& f, double a, double b, double tol = 1e-12,
                         double* err = nullptr, unsigned max_depth = 18) {
    double e = 0.0;
    cplx v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, tol, &e);
    if (err) *err = e;
    return v;
}

// Integral of f along the straight segment z0 -> z1.
inline cplx integrate_segment(const std::function<cplx(cplx)>& f, cplx z0, cplx z1, double tol = 1e-13,
                              double* err = nullptr) {
    const cplx dz = z1 - z0;
    if (dz == 0.0) {
        if (err) *err = 0.0;
        return 0.0;
    }
    return dz * integrate_gk([&](double t) { return f(z0 + t * dz); }, 0.0, 1.0, tol, err);
}

// Gauss rules: Golub-Welsch nodes polished by Newton steps, weights from the
// classical closed forms in extended precision. Eigenvector weights lose all
// relative accuracy at the outer nodes, where high-degree polynomials are huge.
namespace detail {

// p_n and p_{n-1} at x
inline std::pair<long double, long double> hermite_pair(int n, long double x) {
    long double p0 = 1.0L, p1 = x;
    if (n == 0) return {p0, 0.0L};
    for (int k = 1; k < n; ++k) {
        long double p2 = x * p1 - k * p0;
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}

inline std::pair<long double, long double> laguerre_pair(int n, long double a, long double x) {
    long double p0 = 1.0L, p1 = 1.0L + a - x;
    if (n == 0) return {p0, 0.0L};
    for (int k = 1; k < n; ++k) {
        long double p2 = ((2.0L * k + 1.0L + a - x) * p1 - (k + a) * p0) / (k + 1.0L);
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}

inline Eigen::VectorXd jacobi_nodes(const Eigen::VectorXd& diag, const Eigen::VectorXd& off) {
    const auto n = diag.size();
    Eigen::MatrixXd J = diag.asDiagonal();
    for (Eigen::Index k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = off(k - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

}  // namespace detail

struct GaussRule {
    std::vector<double> x, w;
};

// weight e^{-x^2/2} on the real line
inline GaussRule gauss_hermite_prob(int n) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n), o(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) o(k - 1) = std::sqrt(static_cast<double>(k));
    Eigen::VectorXd nodes = detail::jacobi_nodes(d, o);
    GaussRule r;
    const long double lfact = std::lgamma(n + 1.0L);
    for (int i = 0; i < n; ++i) {
        long double x = nodes(i);
        for (int it = 0; it < 3; ++it) {
            auto [p, q] = detail::hermite_pair(n, x);
            x -= p / (n * q);
        }
        const long double q = detail::hermite_pair(n, x).second;
        r.x.push_back(static_cast<double>(x));
        // n! sqrt(2 pi) / (n He_{n-1}(x))^2
        const long double lw = lfact + 0.5L * std::log(2.0L * PI) - 2.0L * std::log(std::fabs(n * q));
        r.w.push_back(static_cast<double>(std::exp(lw)));
    }
    return r;
}

// weight x^alpha e^{-x} on (0, inf)
inline GaussRule gauss_laguerre(int n, double alpha) {
    Eigen::VectorXd d(n), o(std::max(n - 1, 0));
    for (int k = 0; k < n; ++k) {
        d(k) = 2.0 * k + alpha + 1.0;
        if (k > 0) o(k - 1) = std::sqrt(k * (k + alpha));
    }
    Eigen::VectorXd nodes = detail::jacobi_nodes(d, o);
    GaussRule r;
    const long double a = alpha;
    const long double lc = std::lgamma(n + a + 1.0L) - std::lgamma(n + 1.0L);
    for (int i = 0; i < n; ++i) {
        long double x = nodes(i);
        for (int it = 0; it < 3; ++it) {
            // x L_n' = n L_n - (n + a) L_{n-1}
            auto [p, q] = detail::laguerre_pair(n, a, x);
            x -= p * x / (n * p - (n + a) * q);
        }
        const long double next = detail::laguerre_pair(n + 1, a, x).first;
        r.x.push_back(static_cast<double>(x));
        // Gamma(n + a + 1) x / (n! (n + 1)^2 L_{n+1}(x)^2)
        const long double lw = lc + std::log(x) - 2.0L * std::log((n + 1.0L) * std::fabs(next));
        r.w.push_back(static_cast<double>(std::exp(lw)));
    }
    return r;
}

// Chooses a line discretisation for an integrand f on Im xi = omega. The
// truncation point comes from a geometric probe at |Re xi| = 2^j; d is the
// distance from the line to the nearest singularity of f.
// freq bounds |x - k| for the e^{i (x - k) xi} oscillation left in f; the
// step is shrunk to resolve it, up to max_points nodes.
inline Contour auto_contour(const std::function<cplx(cplx)>& f, double omega, double d, double rel_tol = 1e-16,
                            int min_points = 513, double freq = 0.0, int max_points = 65537) {
    const int jmin = -4, jmax = 27;
    std::vector<double> probe;
    double peak = std::abs(f(cplx(0.0, omega)));
    for (int j = jmin; j <= jmax; ++j) {
        const double t = std::ldexp(1.0, j);
        double v = std::max(std::abs(f(cplx(t, omega))), std::abs(f(cplx(-t, omega)))) * t;
        if (!std::isfinite(v)) v = INF;
        probe.push_back(v);
        if (std::isfinite(v)) peak = std::max(peak, v);
    }
    int jstar = jmax;
    for (int j = jmax; j >= jmin; --j) {
        if (probe[j - jmin] > rel_tol * peak) break;
        jstar = j;
    }
    const double L = std::ldexp(1.0, std::max(jstar, 0));
    Contour c;
    c.omega = omega;
    d = std::max(std::min(d, 4.0), 1e-3);
    if (L <= 1024.0) {
        double h = std::min(2.0 * PI * d / 40.0, L / 256.0);
        if (freq > 0.0) h = std::min(h, 2.0 * PI / (8.0 * freq));
        h = std::max(h, L / (max_points / 2));
        int half = static_cast<int>(std::ceil(L / h));
        c.rule = QuadRule::Trapezoid;
        c.half_width = L;
        c.n_points = std::max(2 * half + 1, min_points | 1);
    } else {
        c.rule = QuadRule::SinhAccelerated;
        c.sinh_scale = std::min(1.0, d);
        c.half_width = L;
        const double U = std::asinh(L / c.sinh_scale);
        double h = 0.01;
        if (freq > 0.0) h = std::min(h, 2.0 * PI / (8.0 * freq * L));
        h = std::max(h, U / (max_points / 2));
        c.n_points = std::max(2 * static_cast<int>(std::ceil(U / h)) + 1, min_points | 1);
    }
    return c;
}

}  // namespace twisted_affine
