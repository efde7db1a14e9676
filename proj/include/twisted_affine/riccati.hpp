#pragma once

#include "twisted_affine/core_types.hpp"
#include "twisted_affine/quadrature.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <functional>
#include <sstream>

namespace twisted_affine {

enum class RiccatiMethod { ClosedForm, RK4Adaptive };

struct RiccatiSolution {
    double T = 0.0;
    cplx xi;
    cplx A;
    CVec A_vec;  // MultiOU only
    cplx B0;
    cplx BJ;
    RiccatiMethod method = RiccatiMethod::ClosedForm;
    double est_error = 0.0;
};

namespace detail {

inline void check_A(cplx A, double t, cplx xi) {
    if (!std::isfinite(A.real()) || !std::isfinite(A.imag()) || std::abs(A) > 1e8 * (1.0 + std::abs(xi))) {
        std::ostringstream os;
        os << "A(t, xi) blew up at t = " << t;
        throw NumericalError(ErrorCode::BlowUp, os.str());
    }
}

// Square-root family dA/dt = s2/2 A^2 - kappa A - delta written around the
// stable root r1, which keeps the principal branch valid for every t.
struct SqrtRiccati {
    double s2, kappa, delta, gamma, r1, r2;
    cplx g0;
    bool stationary = false;

    SqrtRiccati(const ModelSpec& m, cplx xi) {
        s2 = m.sigma * m.sigma;
        kappa = m.kappa;
        delta = m.kind == ModelKind::CIR ? 1.0 : 0.0;
        gamma = std::sqrt(kappa * kappa + 2.0 * s2 * delta);
        r1 = (kappa - gamma) / s2;
        r2 = (kappa + gamma) / s2;
        cplx u = I * xi;
        if (std::abs(u - r2) < 1e-300) {
            stationary = true;
            g0 = 0.0;
        } else {
            g0 = (u - r1) / (u - r2);
        }
    }
    cplx A(double t) const {
        if (stationary) return r2;
        cplx gt = g0 * std::exp(-gamma * t);
        return (r1 - r2 * gt) / (1.0 - gt);
    }
    cplx intA(double t) const {
        if (stationary) return r2 * t;
        cplx gt = g0 * std::exp(-gamma * t);
        return r1 * t - (2.0 / s2) * std::log((1.0 - gt) / (1.0 - g0));
    }
};

}  // namespace detail

inline cplx solve_A(const ModelSpec& m, double T, cplx xi) {
    if (T < 0.0) throw ValidationError("T", "must be >= 0");
    const cplx u = I * xi;
    if (T == 0.0) return u;
    cplx A;
    switch (m.kind) {
        case ModelKind::OU: A = u * std::exp(-m.kappa * T); break;
        case ModelKind::Vasicek: {
            const double q = 1.0 / m.kappa;
            A = (u + q) * std::exp(-m.kappa * T) - q;
            break;
        }
        case ModelKind::SquareRoot:
        case ModelKind::CIR: {
            detail::SqrtRiccati r(m, xi);
            // 1 - g0 e^{-gamma t} vanishes only for real g0 > 1
            if (!r.stationary && std::abs(r.g0.imag()) <= 1e-14 * std::abs(r.g0) && r.g0.real() > 1.0 &&
                T >= std::log(r.g0.real()) / r.gamma) {
                std::ostringstream os;
                os << "A(t, xi) blew up at t = " << std::log(r.g0.real()) / r.gamma;
                throw NumericalError(ErrorCode::BlowUp, os.str());
            }
            A = r.A(T);
            break;
        }
        case ModelKind::MultiOU: throw ValidationError("solve_A", "MultiOU takes a vector argument");
    }
    detail::check_A(A, T, xi);
    return A;
}

inline CVec solve_A(const ModelSpec& m, double T, const CVec& xi) {
    if (m.kind != ModelKind::MultiOU) {
        CVec r(1);
        r(0) = solve_A(m, T, xi(0));
        return r;
    }
    if (T < 0.0) throw ValidationError("T", "must be >= 0");
    Eigen::MatrixXd E = (-T * m.kappa_m.transpose()).exp();
    return E.cast<cplx>() * (I * xi);
}

// B0 = int_0^T L_0(-i A(s, xi)) ds.
inline cplx B0_closed(const ModelSpec& m, double T, cplx xi) {
    const cplx u = I * xi;
    const double s2 = m.sigma * m.sigma, k = m.kappa;
    switch (m.kind) {
        case ModelKind::OU: {
            const double e1 = -std::expm1(-k * T), e2 = -std::expm1(-2.0 * k * T);
            return s2 * u * u * e2 / (4.0 * k) + m.theta * u * e1;
        }
        case ModelKind::Vasicek: {
            const double q = 1.0 / k;
            const cplx p = u + q;
            const double e1 = -std::expm1(-k * T), e2 = -std::expm1(-2.0 * k * T);
            cplx intA = p * e1 / k - q * T;
            cplx intA2 = p * p * e2 / (2.0 * k) - 2.0 * p * q * e1 / k + q * q * T;
            return 0.5 * s2 * intA2 + k * m.theta * intA;
        }
        case ModelKind::SquareRoot:
        case ModelKind::CIR: return k * m.theta * detail::SqrtRiccati(m, xi).intA(T);
        case ModelKind::MultiOU: break;
    }
    throw ValidationError("B0_closed", "MultiOU takes a vector argument");
}

// int_0^T symbol(-i A(s, xi)) ds by adaptive Gauss-Kronrod on s.
inline cplx integrate_B(const ModelSpec& m, const std::function<cplx(cplx)>& symbol, double T, cplx xi,
                        double tol = 1e-12, double* err = nullptr) {
    if (T <= 0.0) {
        if (err) *err = 0.0;
        return 0.0;
    }
    auto f = [&](double s) -> cplx {
        try {
            return symbol(-I * solve_A(m, s, xi));
        } catch (const NumericalError& e) {
            std::ostringstream os;
            os << e.what() << " (A(s, xi) at s = " << s << ")";
            throw NumericalError(e.code(), os.str());
        }
    };
    // split long horizons so every panel sees O(1) decay
    const double rate = std::max(m.decay_rate(), 1e-3);
    const int panels = std::max(1, std::min(64, static_cast<int>(std::ceil(T * rate / 2.0))));
    cplx total = 0.0;
    double e_total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double e = 0.0;
        total += integrate_gk(f, T * p / panels, T * (p + 1) / panels, tol, &e);
        e_total += e;
    }
    if (err) *err = e_total;
    return total;
}

inline cplx integrate_B(const ModelSpec& m, const std::function<cplx(const CVec&)>& symbol, double T,
                        const CVec& xi, double tol = 1e-12, double* err = nullptr) {
    if (T <= 0.0) return 0.0;
    auto f = [&](double s) -> cplx { return symbol(-I * solve_A(m, s, xi)); };
    const double rate = std::max(m.decay_rate(), 1e-3);
    const int panels = std::max(1, std::min(64, static_cast<int>(std::ceil(T * rate / 2.0))));
    cplx total = 0.0;
    double e_total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double e = 0.0;
        total += integrate_gk(f, T * p / panels, T * (p + 1) / panels, tol, &e);
        e_total += e;
    }
    if (err) *err = e_total;
    return total;
}

struct Rk4Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double blow_up = 1e8;
};

// Adaptive RK4 with step doubling on the system (A, B0, BJ), treated as six
// real equations. Used as the oracle for the closed forms.
inline RiccatiSolution solve_riccati_rk4(const ModelSpec& m, const JumpSpec& jump, double T, cplx xi,
                                         Rk4Options opt = {}) {
    if (m.kind == ModelKind::MultiOU) throw ValidationError("solve_riccati_rk4", "one-factor models only");
    using State = std::array<cplx, 3>;
    auto rhs = [&](const State& y) -> State {
        const cplx eta = -I * y[0];
        return {symbol_L(m, 1, eta), symbol_L(m, 0, eta), symbol_LJ(jump, eta)};
    };
    auto axpy = [](const State& y, double h, const State& k) {
        State r;
        for (int i = 0; i < 3; ++i) r[i] = y[i] + h * k[i];
        return r;
    };
    auto step = [&](const State& y, double h) {
        State k1 = rhs(y), k2 = rhs(axpy(y, h / 2, k1)), k3 = rhs(axpy(y, h / 2, k2)), k4 = rhs(axpy(y, h, k3));
        State r;
        for (int i = 0; i < 3; ++i) r[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return r;
    };
    State y = {I * xi, 0.0, 0.0};
    double t = 0.0, h = std::min(T, 0.01 / std::max(1.0, std::abs(xi)));
    double err_acc = 0.0;
    while (t < T) {
        if (t + h > T) h = T - t;
        if (h < 1e-14 * std::max(1.0, T)) {
            std::ostringstream os;
            os << "RK4 step underflow at t = " << t;
            throw NumericalError(ErrorCode::StepUnderflow, os.str());
        }
        State full = step(y, h);
        State half = step(step(y, h / 2), h / 2);
        double err = 0.0, scale = 0.0;
        for (int i = 0; i < 3; ++i) {
            err = std::max(err, std::abs(half[i] - full[i]) / 15.0);
            scale = std::max(scale, std::abs(half[i]));
        }
        const double tol = opt.abs_tol + opt.rel_tol * scale;
        if (err <= tol) {
            t += h;
            for (int i = 0; i < 3; ++i) y[i] = half[i] + (half[i] - full[i]) / 15.0;
            err_acc += err;
            if (!std::isfinite(std::abs(y[0])) || std::abs(y[0]) > opt.blow_up * (1.0 + std::abs(xi))) {
                std::ostringstream os;
                os << "A(t, xi) blew up at t = " << t;
                throw NumericalError(ErrorCode::BlowUp, os.str());
            }
        }
        const double fac = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 2.0;
        h *= std::min(2.0, std::max(0.2, fac));
    }
    RiccatiSolution s;
    s.T = T;
    s.xi = xi;
    s.A = y[0];
    s.B0 = y[1];
    s.BJ = y[2];
    s.method = RiccatiMethod::RK4Adaptive;
    s.est_error = err_acc;
    return s;
}

inline RiccatiSolution solve_riccati(const ModelSpec& m, const JumpSpec& jump, double T, cplx xi,
                                     RiccatiMethod method = RiccatiMethod::ClosedForm) {
    if (method == RiccatiMethod::RK4Adaptive) return solve_riccati_rk4(m, jump, T, xi);
    RiccatiSolution s;
    s.T = T;
    s.xi = xi;
    s.method = RiccatiMethod::ClosedForm;
    s.A = solve_A(m, T, xi);
    s.B0 = B0_closed(m, T, xi);
    double e = 0.0;
    if (!jump.is_none()) s.BJ = integrate_B(m, [&](cplx eta) { return symbol_LJ(jump, eta); }, T, xi, 1e-12, &e);
    s.est_error = e;
    return s;
}

inline cplx chf(const ModelSpec& m, const JumpSpec& jump, double T, double x, cplx xi) {
    RiccatiSolution s = solve_riccati(m, jump, T, xi);
    return std::exp(s.A * x + s.B0 + s.BJ);
}

inline cplx B0_multi(const ModelSpec& m, double T, const CVec& xi) {
    return integrate_B(m, [&](const CVec& eta) { return symbol_L(m, 0, eta); }, T, xi);
}

inline cplx chf(const ModelSpec& m, const JumpSpec& jump, double T, const Eigen::VectorXd& x, const CVec& xi) {
    if (m.kind != ModelKind::MultiOU) return chf(m, jump, T, x(0), xi(0));
    CVec A = solve_A(m, T, xi);
    cplx B0 = B0_multi(m, T, xi);
    cplx BJ = 0.0;
    if (!jump.is_none()) BJ = integrate_B(m, [&](const CVec& eta) { return symbol_LJ(m, jump, eta); }, T, xi);
    return std::exp((x.cast<cplx>().transpose() * A)(0) + B0 + BJ);
}

}  // namespace twisted_affine
