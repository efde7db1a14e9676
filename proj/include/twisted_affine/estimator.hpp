#pragma once

#include "twisted_affine/core_types.hpp"
#include "twisted_affine/pricer.hpp"
#include "twisted_affine/quadrature.hpp"
#include "twisted_affine/riccati.hpp"

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <optional>
#include <string>
#include <vector>

namespace twisted_affine {

struct MarketSlice {
    double T = 10.0;
    double x = 0.0;
    ModelSpec model;
    OptionStyle style = OptionStyle::Put;
    ModelForm form = ModelForm::Exponential;
    std::vector<double> strikes;
    std::vector<double> prices;

    // log strike for the exponential model, strike otherwise
    std::vector<double> k_grid() const {
        std::vector<double> k(strikes.size());
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = form == ModelForm::Exponential ? std::log(strikes[i]) : strikes[i];
        return k;
    }

    void validate() const {
        if (model.kind == ModelKind::MultiOU) throw ValidationError("model.kind", "jump recovery supports one-factor models only");
        if (!(T > 0.0)) throw ValidationError("option.maturity", "must be > 0");
        if (strikes.size() < 16 || prices.size() != strikes.size())
            throw ValidationError("curve", "need at least 16 (strike, price) pairs");
        for (std::size_t i = 0; i < strikes.size(); ++i) {
            if (form == ModelForm::Exponential && !(strikes[i] > 0.0)) throw ValidationError("curve.strike", "must be > 0");
            if (i > 0 && !(strikes[i] > strikes[i - 1])) throw ValidationError("curve.strike", "must be strictly increasing");
            if (!(prices[i] >= 0.0) || !std::isfinite(prices[i])) throw ValidationError("curve.price", "must be >= 0");
        }
    }
};

// Synthetic slice from the iFT pricer, for tests and the self-test.
inline MarketSlice synthesize_slice(const ModelSpec& m, const JumpSpec& jump, OptionStyle style, ModelForm form,
                                    double T, double x, const std::vector<double>& strikes) {
    MarketSlice s;
    s.T = T;
    s.x = x;
    s.model = m;
    s.style = style;
    s.form = form;
    s.strikes = strikes;
    std::vector<PriceResult> r = price_ift_strikes(m, jump, style, form, T, x, strikes);
    s.prices.resize(strikes.size());
    for (std::size_t i = 0; i < r.size(); ++i) s.prices[i] = std::max(0.0, r[i].price);
    return s;
}

// Variance of X_T under the diffusion part, from the curvature of log chf at 0.
inline double diffusion_variance(const ModelSpec& m, double T, double x) {
    auto lc = [&](double xi) { return solve_A(m, T, xi) * x + B0_closed(m, T, xi); };
    const double h = 1e-3;
    cplx d2 = (-lc(2 * h) + 16.0 * lc(h) - 30.0 * lc(0.0) + 16.0 * lc(-h) - lc(-2 * h)) / (12.0 * h * h);
    return std::max(-d2.real(), 1e-8);
}

struct FitResult {
    JumpSpec jump;
    double residual = 0.0;  // weighted RMS
    bool converged = false;
    bool lambda_identified = true;
    int iterations = 0;
    std::string note;
};

struct RecoveredJump {
    double T = 0.0;
    double x = 0.0;
    double omega = 0.0;
    ModelSpec model;
    std::vector<cplx> xi;
    std::vector<cplx> W;  // transform of the normalised curve, chf * Ghat0
    std::vector<cplx> h;
    std::vector<cplx> phi;
    std::vector<cplx> LJ;
    std::vector<double> sigma_LJ;
    std::vector<bool> masked;
    std::vector<bool> low_accuracy;
    double truncation_factor = 0.0;  // e^{-delta T}
    cplx normalization = 0.0;        // value subtracted to enforce L_J(0) = 0
    double differentiation_gap = 0.0;  // step h vs 2h, relative to max |L_J|
    std::optional<FitResult> fit;
};

struct RecoveryOptions {
    std::optional<double> omega;
    double xi_max = 10.0;
    int points_per_unit = 20;
    double reference_extra_variance = 0.02;
    std::optional<bool> normalize;  // default: only for discounted models
};

inline double default_recovery_omega(OptionStyle style, ModelForm form) {
    if (style == OptionStyle::Put) return 4.0;
    return form == ModelForm::Exponential ? -5.0 : -4.0;
}

namespace detail {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Reference curve from a Gaussian X_T and its transform; subtracting it leaves
// a residual that decays at both ends of the strike grid.
struct GaussianReference {
    ModelForm form;
    OptionStyle style;
    double D, F, m, v;

    double v1(double k) const {
        const double sd = std::sqrt(v);
        double put;
        if (form == ModelForm::Exponential) {
            const double d = (k - m) / sd;
            put = std::exp(k) * norm_cdf(d) - F * norm_cdf(d - sd);
        } else {
            const double z = (k - F) / sd;
            put = (k - F) * norm_cdf(z) + sd * std::exp(-0.5 * z * z) / std::sqrt(2.0 * PI);
        }
        const double K = form == ModelForm::Exponential ? std::exp(k) : k;
        double price = style == OptionStyle::Put ? put : put + F - K;
        price *= D;
        return form == ModelForm::Exponential ? price / K : price;
    }
    cplx W(cplx xi) const { return D * std::exp(I * xi * m - 0.5 * v * xi * xi) * payoff_ft0(form, xi); }
};

}  // namespace detail

inline std::vector<double> recovery_grid(const RecoveryOptions& opt) {
    const int n = static_cast<int>(std::lround(2.0 * opt.xi_max * opt.points_per_unit)) + 1;
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = -opt.xi_max + 2.0 * opt.xi_max * i / (n - 1);
    return g;
}

// h = log(W / Ghat0) - A x - B0 on the line Im xi = omega, where
// W(xi) = int e^{i k xi} V1(k) dk and V1 is the price divided by the strike
// (exponential model) or the price itself (arithmetic model).
inline RecoveredJump recover_h(const MarketSlice& s, const RecoveryOptions& opt = {}) {
    s.validate();
    RecoveredJump r;
    r.T = s.T;
    r.x = s.x;
    r.model = s.model;
    r.omega = opt.omega ? *opt.omega : default_recovery_omega(s.style, s.form);
    if (s.style == OptionStyle::Put && !(r.omega > 0.0)) throw ValidationError("estimation.omega", "puts need omega > 0");
    if (s.style == OptionStyle::Call && !(r.omega < (s.form == ModelForm::Exponential ? -1.0 : 0.0)))
        throw ValidationError("estimation.omega", "calls need omega < -1 (exponential) or < 0 (arithmetic)");

    const std::vector<double> k = s.k_grid();
    const std::size_t n = k.size();
    std::vector<double> v1(n);
    for (std::size_t i = 0; i < n; ++i) v1[i] = s.form == ModelForm::Exponential ? s.prices[i] / s.strikes[i] : s.prices[i];

    detail::GaussianReference ref{s.form, s.style, 1.0, 0.0, 0.0, 0.0};
    // jumps in a discounted model move the bond price too, so D is read off the
    // deep in-the-money end where the price is linear in K with slope +-D
    ref.D = chf(s.model, JumpSpec::none(), s.T, s.x, 0.0).real();
    if (s.model.discounted()) {
        const std::size_t q = std::max<std::size_t>(n / 20, 2);
        const std::size_t a = s.style == OptionStyle::Put ? n - q : 0, b = s.style == OptionStyle::Put ? n - 1 : q - 1;
        ref.D = std::abs(s.prices[b] - s.prices[a]) / (s.strikes[b] - s.strikes[a]);
        if (!(ref.D > 0.0)) throw NumericalError(ErrorCode::TailDecay, "strike range too narrow to estimate the bond price");
    }
    if (s.style == OptionStyle::Put) ref.F = s.strikes.back() - s.prices.back() / ref.D;
    else ref.F = s.prices.front() / ref.D + s.strikes.front();
    ref.v = diffusion_variance(s.model, s.T, s.x) + opt.reference_extra_variance;
    if (s.form == ModelForm::Exponential) {
        if (!(ref.F > 0.0)) throw NumericalError(ErrorCode::TailDecay, "strike range too narrow to estimate the forward");
        ref.m = std::log(ref.F) - 0.5 * ref.v;
    } else {
        ref.m = ref.F;
    }
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = v1[i] - ref.v1(k[i]);

    std::vector<double> xr = recovery_grid(opt), neg(xr.size());
    for (std::size_t j = 0; j < xr.size(); ++j) neg[j] = -xr[j];
    // the damped residual has to be negligible at both ends against the damped curve
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::exp(-r.omega * k[i]) * v1[i]);
    const double ends = std::max(std::exp(-r.omega * k.front()) * std::abs(resid.front()),
                                 std::exp(-r.omega * k.back()) * std::abs(resid.back()));
    if (!(ends <= 1e-3 * peak))
        throw NumericalError(ErrorCode::TailDecay, "damped curve does not decay at the strike range ends for this omega");
    std::vector<cplx> Wres = forward_ft_curve(k, resid, -r.omega, neg, INF);

    const std::size_t J = xr.size();
    r.xi.resize(J);
    r.W.resize(J);
    r.h.resize(J);
    r.masked.assign(J, false);
    std::vector<double> phase(J), logmod(J);
    for (std::size_t j = 0; j < J; ++j) {
        const cplx xi(xr[j], r.omega);
        r.xi[j] = xi;
        r.W[j] = Wres[j] + ref.W(xi);
        const cplx q = r.W[j] / payoff_ft0(s.form, xi);
        if (!(std::abs(q) > 1e-280) || !std::isfinite(std::abs(q))) {
            r.masked[j] = true;
            continue;
        }
        phase[j] = std::arg(q);
        logmod[j] = std::log(std::abs(q));
    }
    // unwrap outward from the point nearest Re xi = 0
    std::size_t c = 0;
    for (std::size_t j = 1; j < J; ++j)
        if (std::abs(xr[j]) < std::abs(xr[c])) c = j;
    auto unwrap = [&](std::size_t from, std::size_t to) {
        if (r.masked[to] || r.masked[from]) return;
        double d = phase[to] - phase[from];
        phase[to] -= 2.0 * PI * std::round(d / (2.0 * PI));
    };
    for (std::size_t j = c + 1; j < J; ++j) unwrap(j - 1, j);
    for (std::size_t j = c; j-- > 0;) unwrap(j + 1, j);
    for (std::size_t j = 0; j < J; ++j) {
        if (r.masked[j]) {
            r.h[j] = cplx(NAN, NAN);
            continue;
        }
        const cplx xi = r.xi[j];
        r.h[j] = cplx(logmod[j], phase[j]) - solve_A(s.model, s.T, xi) * s.x - B0_closed(s.model, s.T, xi);
    }

    // propagated noise scale of W and of its xi-derivative, per unit relative price error
    double sw = 0.0, swp = 0.0;
    const double dk = (k.back() - k.front()) / (n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(-k[i] * r.omega) * v1[i] * dk;
        sw += e * e;
        swp += (k[i] - ref.m) * (k[i] - ref.m) * e * e;
    }
    sw = std::sqrt(sw);
    swp = std::sqrt(swp);
    r.sigma_LJ.resize(J);
    for (std::size_t j = 0; j < J; ++j)
        r.sigma_LJ[j] = std::abs(symbol_L(s.model, 1, r.xi[j])) * (sw + swp) / std::abs(r.W[j]);
    r.truncation_factor = std::exp(-s.model.decay_rate() * s.T);
    return r;
}

// Phi ~ i h for long maturities; the error is O(e^{-delta T}).
inline RecoveredJump recover_phi(RecoveredJump r) {
    r.phi.resize(r.h.size());
    for (std::size_t j = 0; j < r.h.size(); ++j) r.phi[j] = I * r.h[j];
    return r;
}

// L_J = L_1 Phi' with fourth-order differences (one-sided at the two ends of
// the grid, flagged as lower accuracy).
inline RecoveredJump recover_LJ(RecoveredJump r, std::optional<bool> normalize = {}) {
    if (r.phi.size() != r.xi.size()) r = recover_phi(std::move(r));
    const std::size_t J = r.phi.size();
    if (J < 5) throw ValidationError("estimation.grid", "need at least 5 grid points");
    const double dx = (r.xi.back().real() - r.xi.front().real()) / (J - 1);
    const std::vector<cplx>& p = r.phi;
    r.LJ.assign(J, cplx(NAN, NAN));
    r.low_accuracy.assign(J, false);
    auto ok = [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i <= b; ++i)
            if (r.masked[i]) return false;
        return true;
    };
    for (std::size_t j = 0; j < J; ++j) {
        cplx d;
        if (j >= 2 && j + 2 < J) {
            if (!ok(j - 2, j + 2)) continue;
            d = (-p[j + 2] + 8.0 * p[j + 1] - 8.0 * p[j - 1] + p[j - 2]) / (12.0 * dx);
        } else if (j < 2) {
            if (!ok(0, 4)) continue;
            d = j == 0 ? (-25.0 * p[0] + 48.0 * p[1] - 36.0 * p[2] + 16.0 * p[3] - 3.0 * p[4]) / (12.0 * dx)
                       : (-3.0 * p[0] - 10.0 * p[1] + 18.0 * p[2] - 6.0 * p[3] + p[4]) / (12.0 * dx);
            r.low_accuracy[j] = true;
        } else {
            if (!ok(J - 5, J - 1)) continue;
            const std::size_t e = J - 1;
            d = j == e ? (25.0 * p[e] - 48.0 * p[e - 1] + 36.0 * p[e - 2] - 16.0 * p[e - 3] + 3.0 * p[e - 4]) / (12.0 * dx)
                       : (3.0 * p[e] + 10.0 * p[e - 1] - 18.0 * p[e - 2] + 6.0 * p[e - 3] - p[e - 4]) / (12.0 * dx);
            r.low_accuracy[j] = true;
        }
        r.LJ[j] = symbol_L(r.model, 1, r.xi[j]) * d;
    }
    double gap = 0.0, scale = 0.0;
    for (std::size_t j = 4; j + 4 < J; ++j) {
        if (!ok(j - 4, j + 4)) continue;
        cplx d2 = (-p[j + 4] + 8.0 * p[j + 2] - 8.0 * p[j - 2] + p[j - 4]) / (24.0 * dx);
        gap = std::max(gap, std::abs(symbol_L(r.model, 1, r.xi[j]) * d2 - r.LJ[j]));
        scale = std::max(scale, std::abs(r.LJ[j]));
    }
    r.differentiation_gap = gap / std::max(scale, 1e-12);
    if (r.differentiation_gap > 0.25)
        throw NumericalError(ErrorCode::DerivativeEstimate, "xi grid too coarse: step-halving disagreement in L_J");
    const bool norm = normalize ? *normalize : r.model.discounted();
    if (norm) {
        // least-squares quadratic in xi over the central part, evaluated at 0
        Eigen::MatrixXcd M(0, 3);
        Eigen::VectorXcd b(0);
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < J; ++j)
            if (!r.low_accuracy[j] && std::isfinite(r.LJ[j].real()) && std::abs(r.xi[j].real()) <= 2.0) idx.push_back(j);
        if (idx.size() >= 3) {
            M.resize(idx.size(), 3);
            b.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const cplx z = r.xi[idx[i]];
                M(i, 0) = 1.0;
                M(i, 1) = z;
                M(i, 2) = z * z;
                b(i) = r.LJ[idx[i]];
            }
            Eigen::VectorXcd c = M.colPivHouseholderQr().solve(b);
            r.normalization = c(0);
            for (auto& v : r.LJ) v -= r.normalization;
        }
    }
    return r;
}

namespace detail {

// Parameter vector: (c_plus, c_minus, lambda_plus, mu = -lambda_minus), with
// the inactive side dropped for one-sided families.
struct JumpFitFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    JumpFamily family;
    std::vector<cplx> xi, eta, target;
    std::vector<double> w;
    int n_in;

    int inputs() const { return n_in; }
    int values() const { return static_cast<int>(2 * xi.size()); }

    static JumpSpec unpack(JumpFamily f, const Eigen::VectorXd& p) {
        JumpSpec j;
        j.family = f;
        if (f == JumpFamily::DoubleExponential) {
            j.c_plus = p(0);
            j.c_minus = p(1);
            j.lambda_plus = p(2);
            j.lambda_minus = -p(3);
        } else if (f == JumpFamily::ExponentialNegative) {
            j.c_plus = p(0);
            j.lambda_plus = p(1);
        } else {
            j.c_minus = p(0);
            j.lambda_minus = -p(1);
        }
        return j;
    }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        JumpSpec j = unpack(family, p);
        for (std::size_t i = 0; i < xi.size(); ++i) {
            cplx model = symbol_LJ_unchecked(j, xi[i]) - symbol_LJ_unchecked(j, eta[i]);
            cplx d = (model - target[i]) * w[i];
            if (!std::isfinite(d.real()) || !std::isfinite(d.imag())) d = cplx(1e10, 1e10);
            f(2 * i) = d.real();
            f(2 * i + 1) = d.imag();
        }
        return 0;
    }
};

}  // namespace detail

// Weighted least squares of a parametric family against the recovered L_J,
// using the exact finite-maturity relation L_J(xi) - L_J(-i A(T, xi)).
inline FitResult fit_jump_params(const RecoveredJump& r, JumpFamily family, const JumpSpec* initial = nullptr,
                                 double xi_fit_max = INF) {
    if (family != JumpFamily::DoubleExponential && family != JumpFamily::ExponentialPositive &&
        family != JumpFamily::ExponentialNegative)
        throw ValidationError("estimation.family", "parametric fits support exponential jump families");
    if (r.LJ.size() != r.xi.size()) throw ValidationError("fit_jump_params", "L_J not recovered");
    detail::JumpFitFunctor fn;
    fn.family = family;
    for (std::size_t j = 0; j < r.xi.size(); ++j) {
        if (!std::isfinite(r.LJ[j].real()) || r.low_accuracy[j]) continue;
        if (std::abs(r.xi[j].real()) > xi_fit_max) continue;
        fn.xi.push_back(r.xi[j]);
        fn.eta.push_back(-I * solve_A(r.model, r.T, r.xi[j]));
        fn.target.push_back(r.LJ[j] + r.normalization);
        fn.w.push_back(r.sigma_LJ.size() == r.xi.size() ? 1.0 / r.sigma_LJ[j] : 1.0);
    }
    if (fn.xi.size() < 4) throw NumericalError(ErrorCode::FitNonConvergence, "too few usable grid points for the fit");
    const double wmax = *std::max_element(fn.w.begin(), fn.w.end());
    for (auto& v : fn.w) v /= wmax;

    const double lam0 = std::max(8.0, std::abs(r.omega) + 3.0);
    Eigen::VectorXd p;
    if (family == JumpFamily::DoubleExponential) {
        p.resize(4);
        p << 0.8, 0.8, lam0, lam0;
        if (initial) p << initial->c_plus, initial->c_minus, initial->lambda_plus, -initial->lambda_minus;
    } else {
        p.resize(2);
        p << 0.8, lam0;
        if (initial)
            p << (family == JumpFamily::ExponentialNegative ? initial->c_plus : initial->c_minus),
                (family == JumpFamily::ExponentialNegative ? initial->lambda_plus : -initial->lambda_minus);
    }
    fn.n_in = static_cast<int>(p.size());
    Eigen::NumericalDiff<detail::JumpFitFunctor> nd(fn);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::JumpFitFunctor>> lm(nd);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 4000;
    Eigen::LevenbergMarquardtSpace::Status st = lm.minimize(p);

    FitResult out;
    out.jump = detail::JumpFitFunctor::unpack(family, p);
    out.iterations = static_cast<int>(lm.iter);
    Eigen::VectorXd f(fn.values());
    fn(p, f);
    out.residual = std::sqrt(f.squaredNorm() / fn.values());
    out.converged = st == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                    st == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                    st == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                    st == Eigen::LevenbergMarquardtSpace::XtolTooSmall || st == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                    st == Eigen::LevenbergMarquardtSpace::GtolTooSmall ||
                    st == Eigen::LevenbergMarquardtSpace::CosinusTooSmall;
    if (!out.converged) out.note = "solver stopped before convergence; best iterate returned";
    double csum = out.jump.c_plus + out.jump.c_minus;
    double scale = 0.0;
    for (const cplx& v : fn.target) scale = std::max(scale, std::abs(v));
    if (csum < 1e-6 || scale < 1e-10) {
        out.lambda_identified = false;
        out.note = "jump intensity is zero; rates are not identified";
    }
    return out;
}

struct EstimateReport {
    RecoveredJump recovered;
    std::vector<double> omegas_tried;
    std::vector<std::string> omega_notes;
    double consistency = 0.0;  // max relative spread of fitted parameters between admissible lines
};

// Full pipeline. Without an explicit omega, up to three candidate lines are
// tried; the first admissible one is used and the fitted parameters of the
// admissible lines are compared.
inline EstimateReport estimate_jumps(const MarketSlice& s, RecoveryOptions opt, std::optional<JumpFamily> family) {
    EstimateReport rep;
    std::vector<double> candidates;
    if (opt.omega) {
        candidates = {*opt.omega};
    } else if (s.style == OptionStyle::Put) {
        candidates = {4.0, 2.0, 1.0};
    } else {
        candidates = s.form == ModelForm::Exponential ? std::vector<double>{-5.0, -3.0, -2.0}
                                                      : std::vector<double>{-4.0, -2.0, -1.0};
    }
    std::vector<RecoveredJump> good;
    for (double w : candidates) {
        rep.omegas_tried.push_back(w);
        RecoveryOptions o = opt;
        o.omega = w;
        try {
            RecoveredJump r = recover_LJ(recover_phi(recover_h(s, o)), opt.normalize);
            if (family) r.fit = fit_jump_params(r, *family);
            good.push_back(std::move(r));
            rep.omega_notes.push_back("ok");
        } catch (const NumericalError& e) {
            rep.omega_notes.push_back(e.what());
        }
        if (good.size() == 2 || (opt.omega && !good.empty())) break;
    }
    if (good.empty()) throw NumericalError(ErrorCode::TailDecay, "no admissible transform line for this slice");
    if (good.size() == 2 && good[0].fit && good[1].fit) {
        const JumpSpec &a = good[0].fit->jump, &b = good[1].fit->jump;
        auto rel = [](double u, double v) { return std::abs(u - v) / std::max(std::abs(u), 1e-12); };
        rep.consistency = std::max({rel(a.c_plus, b.c_plus), rel(a.c_minus, b.c_minus),
                                    std::isfinite(a.lambda_plus) ? rel(a.lambda_plus, b.lambda_plus) : 0.0,
                                    std::isfinite(a.lambda_minus) ? rel(a.lambda_minus, b.lambda_minus) : 0.0});
    }
    rep.recovered = std::move(good[0]);
    return rep;
}

}  // namespace twisted_affine
