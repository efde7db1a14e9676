#pragma once

#include "twisted_affine/core_types.hpp"
#include "twisted_affine/eigenbasis.hpp"
#include "twisted_affine/gauge.hpp"
#include "twisted_affine/quadrature.hpp"
#include "twisted_affine/riccati.hpp"

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace twisted_affine {

enum class OptionStyle { Call, Put };
enum class ModelForm { Exponential, Arithmetic };

struct OptionSpec {
    OptionStyle style = OptionStyle::Put;
    double strike = 1.0;
    double maturity = 1.0;
    ModelForm form = ModelForm::Exponential;

    void validate() const {
        if (!std::isfinite(strike)) throw ValidationError("option.strike", "must be finite");
        if (form == ModelForm::Exponential && !(strike > 0.0))
            throw ValidationError("option.strike", "must be > 0 for the exponential model");
        if (!(maturity > 0.0) || !std::isfinite(maturity)) throw ValidationError("option.maturity", "must be > 0");
    }
};

// Payoff transform with K = 1 (exponential) or K = 0 (arithmetic).
inline cplx payoff_ft0(ModelForm form, cplx xi) {
    if (std::abs(xi.imag()) < 1e-14) throw NumericalError(ErrorCode::Domain, "payoff transform on the real axis");
    if (form == ModelForm::Arithmetic) return -1.0 / (xi * xi);
    if (std::abs(xi + I) < 1e-14) throw NumericalError(ErrorCode::Domain, "payoff transform at xi = -i");
    return -1.0 / (xi * (xi + I));
}

inline cplx payoff_ft(const OptionSpec& o, cplx xi) {
    if (o.form == ModelForm::Arithmetic) return std::exp(-I * o.strike * xi) * payoff_ft0(o.form, xi);
    return std::exp((1.0 - I * xi) * std::log(o.strike)) * payoff_ft0(o.form, xi);
}

// Admissible interval for the pricing line of the payoff and the jump strip.
inline Strip payoff_strip(const OptionSpec& o, const Strip& jump) {
    Strip s = jump;
    if (o.style == OptionStyle::Put) {
        s.lower = std::max(s.lower, 0.0);
    } else {
        s.upper = std::min(s.upper, o.form == ModelForm::Exponential ? -1.0 : 0.0);
    }
    return s;
}

inline double default_omega(const OptionSpec& o, const Strip& jump) {
    Strip s = payoff_strip(o, jump);
    if (!(s.lower < s.upper)) throw ValidationError("contour.omega", "no admissible pricing line for this payoff");
    if (o.style == OptionStyle::Put) return std::isfinite(s.upper) ? std::min(1.0, 0.5 * (s.lower + s.upper)) : 1.0;
    const double target = o.form == ModelForm::Exponential ? -2.0 : -1.0;
    return std::isfinite(s.lower) ? std::max(target, 0.5 * (s.lower + s.upper)) : target;
}

inline void check_omega(const OptionSpec& o, const Strip& jump, double omega) {
    Strip s = payoff_strip(o, jump);
    if (!s.contains(omega)) {
        std::ostringstream os;
        os << "pricing line omega = " << omega << " outside (" << s.lower << ", " << s.upper << ")";
        throw ValidationError("contour.omega", os.str());
    }
}

// Distance from the line Im xi = omega to the nearest singularity of the
// payoff transform or of the characteristic function.
inline double line_clearance(const OptionSpec& o, const JumpSpec& jump, double omega) {
    double d = std::abs(omega);
    if (o.form == ModelForm::Exponential) d = std::min(d, std::abs(omega + 1.0));
    for (cplx p : jump.poles()) d = std::min(d, std::abs(omega - p.imag()));
    return d;
}

struct PriceResult {
    double price = 0.0;
    double est_error = 0.0;
    int n_terms = 0;
    std::string method;
    double imag_residue = 0.0;
    double end_decay = 0.0;
    Contour contour;
    std::vector<cplx> terms;
};

inline double forward_price(const ModelSpec& m, const JumpSpec& j, double T, double x,
                            ModelForm form = ModelForm::Exponential) {
    const cplx c0 = chf(m, j, T, x, 0.0);
    if (form == ModelForm::Exponential) return (chf(m, j, T, x, -I) / c0).real();
    const double h = 1e-4;
    cplx d = (-chf(m, j, T, x, 2.0 * h) + 8.0 * chf(m, j, T, x, h) - 8.0 * chf(m, j, T, x, -h) +
              chf(m, j, T, x, -2.0 * h)) /
             (12.0 * h);
    return (-I * d / c0).real();
}

// Prices for several strikes sharing one set of characteristic-function values.
inline std::vector<PriceResult> price_ift_strikes(const ModelSpec& m, const JumpSpec& jump, OptionStyle style,
                                                  ModelForm form, double T, double x,
                                                  const std::vector<double>& strikes, Contour contour = {},
                                                  std::optional<double> omega_opt = {}) {
    if (strikes.empty()) return {};
    OptionSpec ref{style, strikes[strikes.size() / 2], T, form};
    for (double K : strikes) OptionSpec{style, K, T, form}.validate();
    if (contour.is_auto()) {
        const double omega = omega_opt ? *omega_opt : default_omega(ref, jump.strip());
        check_omega(ref, jump.strip(), omega);
        const double d = line_clearance(ref, jump, omega);
        const double mean = forward_price(m, jump, T, x, ModelForm::Arithmetic);
        double freq = 0.0;
        for (double K : strikes) freq = std::max(freq, std::abs(mean - (form == ModelForm::Exponential ? std::log(K) : K)));
        contour = auto_contour([&](cplx xi) { return chf(m, jump, T, x, xi) * payoff_ft(ref, xi); }, omega, d, 1e-16,
                               513, freq);
    }
    check_omega(ref, jump.strip(), contour.omega);
    ContourGrid g = make_grid(contour);
    std::vector<cplx> cf(g.xi.size());
    parallel_for(g.xi.size(), [&](std::size_t k) { cf[k] = chf(m, jump, T, x, g.xi[k]) * g.w[k]; }, 4);
    std::vector<PriceResult> out(strikes.size());
    parallel_for(strikes.size(), [&](std::size_t s) {
        OptionSpec o{style, strikes[s], T, form};
        std::vector<cplx> f(g.xi.size());
        double peak = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            f[k] = cf[k] * payoff_ft(o, g.xi[k]);
            peak = std::max(peak, std::abs(f[k]));
        }
        cplx v = pairwise_sum(f) / (2.0 * PI);
        // same rule at twice the step: the even nodes about the centre
        const std::size_t mid = f.size() / 2;
        std::vector<cplx> coarse;
        for (std::size_t k = mid % 2; k < f.size(); k += 2) coarse.push_back(2.0 * f[k]);
        const double coarse_v = (pairwise_sum(coarse) / (2.0 * PI)).real();
        PriceResult& r = out[s];
        r.price = v.real();
        r.imag_residue = std::abs(v.imag());
        r.end_decay = peak > 0.0 ? std::max(std::abs(f.front()), std::abs(f.back())) / peak : 0.0;
        r.est_error = std::max(r.end_decay * peak * contour.half_width, std::abs(coarse_v - v.real()));
        r.n_terms = contour.n_points;
        r.method = "ift";
        r.contour = contour;
    });
    return out;
}

inline PriceResult price_ift(const ModelSpec& m, const JumpSpec& jump, const OptionSpec& o, double x,
                             const Contour& contour = {}, std::optional<double> omega = {}) {
    o.validate();
    return price_ift_strikes(m, jump, o.style, o.form, o.maturity, x, {o.strike}, contour, omega)[0];
}

// ---------------------------------------------------------------------------
// Subordinators

enum class SubordinatorFamily { None, Gamma, InverseGaussian, TemperedStable };

inline const char* subordinator_family_name(SubordinatorFamily f) {
    switch (f) {
        case SubordinatorFamily::None: return "None";
        case SubordinatorFamily::Gamma: return "Gamma";
        case SubordinatorFamily::InverseGaussian: return "InverseGaussian";
        case SubordinatorFamily::TemperedStable: return "TemperedStable";
    }
    return "?";
}

// Laplace exponent psi(l) = gamma l + int (1 - e^{-l s}) F(ds), with
//   Gamma:            F(ds) = shape s^{-1} e^{-rate s} ds
//   InverseGaussian:  F(ds) = shape (2 pi)^{-1/2} s^{-3/2} e^{-rate^2 s / 2} ds
//   TemperedStable:   F(ds) = shape s^{-1-stable_alpha} e^{-rate s} ds
struct SubordinatorSpec {
    double gamma = 1.0;
    SubordinatorFamily family = SubordinatorFamily::None;
    double shape = 1.0;
    double rate = 1.0;
    double stable_alpha = 0.5;

    void validate() const;
};

inline cplx laplace_exponent(const SubordinatorSpec& s, cplx lam) {
    if (lam.real() < -1e-14) throw NumericalError(ErrorCode::Domain, "Laplace exponent needs Re lambda >= 0");
    cplx v = s.gamma * lam;
    switch (s.family) {
        case SubordinatorFamily::None: break;
        case SubordinatorFamily::Gamma: v += s.shape * std::log(1.0 + lam / s.rate); break;
        case SubordinatorFamily::InverseGaussian: v += s.shape * (std::sqrt(s.rate * s.rate + 2.0 * lam) - s.rate); break;
        case SubordinatorFamily::TemperedStable: {
            const double a = s.stable_alpha;
            v += s.shape * std::tgamma(-a) * (std::pow(s.rate, a) - std::pow(s.rate + lam, a));
            break;
        }
    }
    return v;
}

inline double levy_density(const SubordinatorSpec& s, double y) {
    switch (s.family) {
        case SubordinatorFamily::None: return 0.0;
        case SubordinatorFamily::Gamma: return s.shape * std::exp(-s.rate * y) / y;
        case SubordinatorFamily::InverseGaussian:
            return s.shape / std::sqrt(2.0 * PI) * std::pow(y, -1.5) * std::exp(-0.5 * s.rate * s.rate * y);
        case SubordinatorFamily::TemperedStable: return s.shape * std::pow(y, -1.0 - s.stable_alpha) * std::exp(-s.rate * y);
    }
    return 0.0;
}

inline void SubordinatorSpec::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("subordinator.gamma", "must be >= 0");
    if (family != SubordinatorFamily::None) {
        if (!(shape > 0.0)) throw ValidationError("subordinator.shape", "must be > 0");
        if (!(rate > 0.0)) throw ValidationError("subordinator.rate", "must be > 0");
        if (family == SubordinatorFamily::TemperedStable && !(stable_alpha > 0.0 && stable_alpha < 1.0))
            throw ValidationError("subordinator.stable_alpha", "must lie in (0, 1)");
    }
    // increasing and concave on a grid
    double prev = 0.0, prev_slope = INF;
    for (int k = 1; k <= 200; ++k) {
        const double l = 0.05 * k * k;
        const double v = laplace_exponent(*this, l).real();
        const double slope = (v - prev) / (l - 0.05 * (k - 1) * (k - 1));
        if (slope < -1e-12 || slope > prev_slope * (1.0 + 1e-9) + 1e-12)
            throw ValidationError("subordinator", "Laplace exponent is not increasing and concave");
        prev = v;
        prev_slope = slope;
    }
}

// ---------------------------------------------------------------------------
// Twisted eigenfunction expansion

struct ExpansionOptions {
    int N = 40;
    Contour contour;  // coefficient line; auto when n_points == 0
    bool has_omega = false;
    double omega = 0.0;  // pricing line of the original payoff
    bool check_convergence = true;
};

// b_n (normalised coefficients), twisted eigenfunctions at x and eigenvalues of
// the problem after conjugation by e^{conj_a x}; the price is
// e^{-conj_a x} sum_n b_n f(lambda_n) P_n(x) with f = e^{-T lambda}.
struct ExpansionTerms {
    EigenBasis basis;
    GaugeFn gauge;
    std::vector<cplx> coeff;
    std::vector<cplx> twisted;
    std::vector<double> lambda;
    double prefactor = 1.0;
    Contour contour;
    double twist_check = 0.0;
};

inline ExpansionTerms expansion_terms(const ModelSpec& m, const JumpSpec& jump, const OptionSpec& o, double x,
                                      const ExpansionOptions& opt) {
    o.validate();
    if (opt.N < 0 || opt.N > 200) throw ValidationError("expansion.N", "must lie in [0, 200]");
    ExpansionTerms t;
    t.basis = build_basis(m);
    const EigenBasis& b = t.basis;
    t.gauge = make_gauge(m, jump);
    const GaugeFn& g = t.gauge;
    const double a = -b.conj_a;  // a_inf
    const int N = opt.N;

    double omega = opt.has_omega ? opt.omega : default_omega(o, jump.strip());
    if (!opt.contour.is_auto()) omega = opt.contour.omega;
    check_omega(o, jump.strip(), omega);
    const double wline = omega + a;
    if (b.family == PolyFamily::Laguerre && !(wline > -1.0 / b.scale))
        throw ValidationError("contour.omega", "line below the convergence half-plane of the Laguerre transforms");
    for (cplx p : gauge_singularities(g.model, g.jump))
        if (std::abs(p.imag() - wline) < 1e-8) throw ValidationError("contour.omega", "line passes through a singularity of Phi");

    const double s = b.scale, c0 = b.center;
    // the shifted line may run through xi = 0, where z^0 must stay 1
    auto log_power = [](cplx z, int n) { return n == 0 ? cplx(0.0) : static_cast<double>(n) * std::log(z); };
    auto weight_n = [&](cplx xi, int n) -> cplx {
        if (b.family == PolyFamily::Hermite)
            return std::exp(log_power(I * s * xi, n) - 0.5 * s * s * xi * xi - std::lgamma(n + 1.0));
        return std::exp(log_power(-I * s * xi, n) - (n + b.alpha + 1.0) * std::log(1.0 - I * s * xi));
    };
    auto gphi = [&](cplx xi) {
        return std::exp(-I * g(xi) + I * c0 * xi) * payoff_ft(o, xi - I * a);
    };

    if (opt.contour.is_auto()) {
        double d = std::min(std::abs(omega), o.form == ModelForm::Exponential ? std::abs(omega + 1.0) : INF);
        for (cplx p : gauge_singularities(g.model, g.jump)) d = std::min(d, std::abs(wline - p.imag()));
        auto probe = [&](cplx xi) {
            return gphi(xi) * (std::abs(weight_n(xi, 0)) + std::abs(weight_n(xi, N)));
        };
        t.contour = auto_contour(probe, wline, d);
    } else {
        t.contour = opt.contour;
        t.contour.omega = wline;
    }
    ContourGrid grid = make_grid(t.contour);
    const std::size_t K = grid.xi.size();
    std::vector<cplx> base(K);
    std::vector<cplx> ratio(K);
    parallel_for(K, [&](std::size_t k) {
        const cplx xi = grid.xi[k];
        base[k] = grid.w[k] * gphi(xi);
        if (b.family == PolyFamily::Hermite) {
            ratio[k] = I * s * xi;
            base[k] *= std::exp(-0.5 * s * s * xi * xi);
        } else {
            const cplx q = 1.0 - I * s * xi;
            ratio[k] = -I * s * xi / q;
            base[k] *= std::exp(-(b.alpha + 1.0) * std::log(q));
        }
    }, 64);
    t.coeff.assign(N + 1, 0.0);
    parallel_for(N + 1, [&](std::size_t n) {
        std::vector<cplx> terms(K);
        for (std::size_t k = 0; k < K; ++k) {
            cplx w = base[k];
            if (n > 0) {
                if (b.family == PolyFamily::Hermite)
                    w *= std::exp(static_cast<double>(n) * std::log(ratio[k]) - std::lgamma(n + 1.0));
                else
                    w *= std::exp(static_cast<double>(n) * std::log(ratio[k]));
            }
            terms[k] = w;
        }
        t.coeff[n] = pairwise_sum(terms) / (2.0 * PI);
    }, 1);

    TwistSeries ts = twist_taylor(g, N);
    t.twist_check = ts.disagreement;
    t.twisted = twisted_eigen_all(b, ts.t, N, x);
    t.lambda.resize(N + 1);
    for (int n = 0; n <= N; ++n) t.lambda[n] = b.eigenvalue(n) - g.jump_constant.real();
    t.prefactor = std::exp(-b.conj_a * x);
    return t;
}

inline PriceResult sum_expansion(const ExpansionTerms& t, const std::function<cplx(double)>& factor,
                                 bool check_convergence, const std::string& method) {
    const int N = static_cast<int>(t.coeff.size()) - 1;
    PriceResult r;
    r.terms.resize(N + 1);
    double peak = 0.0;
    for (int n = 0; n <= N; ++n) {
        r.terms[n] = t.prefactor * t.coeff[n] * factor(t.lambda[n]) * t.twisted[n];
        peak = std::max(peak, std::abs(r.terms[n]));
    }
    cplx v = pairwise_sum(r.terms);
    double tail = 0.0;
    for (int n = std::max(0, N - 2); n <= N; ++n) tail = std::max(tail, std::abs(r.terms[n]));
    r.price = v.real();
    r.imag_residue = std::abs(v.imag());
    r.est_error = std::abs(r.terms[N]);
    r.n_terms = N + 1;
    r.method = method;
    r.contour = t.contour;
    if (check_convergence && N >= 3 && tail > 1e-6 * peak) {
        std::ostringstream os;
        os << "eigenfunction series not converging (last terms " << tail << " vs largest " << peak
           << "); increase T or N, or use price-ift";
        throw NumericalError(ErrorCode::Truncation, os.str());
    }
    return r;
}

inline PriceResult price_eigen(const ModelSpec& m, const JumpSpec& jump, const OptionSpec& o, double x,
                               const ExpansionOptions& opt = {}) {
    ExpansionTerms t = expansion_terms(m, jump, o, x, opt);
    const double T = o.maturity;
    return sum_expansion(t, [&](double l) { return cplx(std::exp(-T * l)); }, opt.check_convergence, "eigen");
}

inline PriceResult price_subordinated(const ModelSpec& m, const JumpSpec& jump, const SubordinatorSpec& sub,
                                      const OptionSpec& o, double x, const ExpansionOptions& opt = {}) {
    sub.validate();
    ExpansionTerms t = expansion_terms(m, jump, o, x, opt);
    const double T = o.maturity;
    for (double l : t.lambda)
        if (l < 0.0) throw NumericalError(ErrorCode::Domain, "negative eigenvalue; subordination undefined");
    return sum_expansion(t, [&](double l) { return std::exp(-T * laplace_exponent(sub, l)); }, opt.check_convergence,
                         "subordinated");
}

}  // namespace twisted_affine
