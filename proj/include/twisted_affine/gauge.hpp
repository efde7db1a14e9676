#pragma once

#include "twisted_affine/core_types.hpp"
#include "twisted_affine/quadrature.hpp"
#include "twisted_affine/riccati.hpp"

#include <sstream>

namespace twisted_affine {

enum class GaugeMethod { ClosedForm, ContourQuad, LongRunIntegral, MeasureChanged };

inline const char* gauge_method_name(GaugeMethod m) {
    switch (m) {
        case GaugeMethod::ClosedForm: return "closed_form";
        case GaugeMethod::ContourQuad: return "contour_quad";
        case GaugeMethod::LongRunIntegral: return "long_run";
        case GaugeMethod::MeasureChanged: return "measure_changed";
    }
    return "?";
}

inline cplx symbol_LJ_prime(const JumpSpec& j, cplx xi) {
    switch (j.family) {
        case JumpFamily::None: return 0.0;
        case JumpFamily::Custom: {
            const cplx z = I * xi;
            const auto& r = *j.custom;
            cplx d = r.den(z);
            return I * (r.num.derivative()(z) * d - r.num(z) * r.den.derivative()(z)) / (d * d);
        }
        default: {
            cplx v = 0.0;
            if (j.c_plus != 0.0) {
                cplx q = j.lambda_plus + I * xi;
                v -= j.c_plus * I * j.lambda_plus / (q * q);
            }
            if (j.c_minus != 0.0) {
                const double mu = -j.lambda_minus;
                cplx q = mu - I * xi;
                v += j.c_minus * I * mu / (q * q);
            }
            return v;
        }
    }
}

// L_J / L_1 = sum_k residue_k / (eta - pole_k) when the jump part is of
// exponential type and every pole is simple.
struct PartialFractions {
    bool valid = false;
    std::vector<cplx> poles;
    std::vector<cplx> residues;
};

inline PartialFractions gauge_partial_fractions(const ModelSpec& m, const JumpSpec& j) {
    PartialFractions pf;
    if (m.kind == ModelKind::MultiOU || !j.exponential_type()) return pf;
    std::vector<cplx> jp, jr;
    if (j.c_plus != 0.0) {
        jp.push_back(I * j.lambda_plus);
        jr.push_back(-I * j.c_plus * j.lambda_plus);
    }
    if (j.c_minus != 0.0) {
        jp.push_back(I * j.lambda_minus);
        jr.push_back(I * j.c_minus * (-j.lambda_minus));
    }
    std::vector<cplx> zeros = symbol_L1_zeros(m);
    if (zeros.size() == 2 && std::abs(zeros[0] - zeros[1]) < 1e-8 * (1.0 + std::abs(zeros[0]))) return pf;
    for (std::size_t k = 0; k < jp.size(); ++k) {
        for (cplx q : zeros)
            if (std::abs(q - jp[k]) < 1e-8 * (1.0 + std::abs(q))) return pf;
        pf.poles.push_back(jp[k]);
        pf.residues.push_back(jr[k] / symbol_L(m, 1, jp[k]));
    }
    for (cplx q : zeros) {
        cplx r = symbol_LJ_unchecked(j, q) / symbol_L1_prime(m, q);
        if (std::abs(r) <= 1e-14 * (1.0 + j.c_plus + j.c_minus)) continue;
        pf.poles.push_back(q);
        pf.residues.push_back(r);
    }
    pf.valid = true;
    return pf;
}

// Points where Phi may be singular: jump poles and non-removable zeros of L_1.
inline std::vector<cplx> gauge_singularities(const ModelSpec& m, const JumpSpec& j) {
    std::vector<cplx> s;
    if (j.is_none()) return s;
    s = j.poles();
    if (m.kind == ModelKind::MultiOU) return s;
    for (cplx q : symbol_L1_zeros(m)) {
        cplx lj = symbol_LJ_unchecked(j, q);
        if (std::abs(lj) > 1e-13 * (1.0 + j.c_plus + j.c_minus)) s.push_back(q);
    }
    return s;
}

inline double distance_to_segment(cplx p, cplx a, cplx b) {
    cplx d = b - a;
    double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(p - a);
    double t = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(p - (a + t * d));
}

inline void check_segment(const ModelSpec& m, const JumpSpec& j, cplx a, cplx xi) {
    for (cplx p : gauge_singularities(m, j)) {
        if (distance_to_segment(p, a, xi) < 1e-10 * std::max(1.0, std::abs(p))) {
            std::ostringstream os;
            os << "contour from " << a << " to " << xi << " crosses a singular point eta = " << p;
            throw NumericalError(ErrorCode::ContourCrossing, os.str());
        }
    }
    if (!j.strip().contains(a.imag()) || !j.strip().contains(xi.imag())) {
        std::ostringstream os;
        os << "contour endpoint outside the jump strip (" << j.lambda_minus << ", " << j.lambda_plus << ")";
        throw NumericalError(ErrorCode::StripViolation, os.str());
    }
}

inline cplx phi_closed_form(const PartialFractions& pf, cplx a, cplx xi) {
    cplx v = 0.0;
    for (std::size_t k = 0; k < pf.poles.size(); ++k)
        v += pf.residues[k] * std::log((xi - pf.poles[k]) / (a - pf.poles[k]));
    return v;
}

// L_J / L_1 with the removable zero of L_1 handled by its limit.
inline cplx gauge_integrand(const ModelSpec& m, const JumpSpec& j, cplx eta) {
    cplx l1 = symbol_L(m, 1, eta);
    cplx d1 = symbol_L1_prime(m, eta);
    if (std::abs(l1) <= 1e-14 * (std::abs(d1) + 1.0)) return symbol_LJ_prime(j, eta) / d1;
    return symbol_LJ(j, eta) / l1;
}

inline cplx phi_contour_quadrature(const ModelSpec& m, const JumpSpec& j, cplx a, cplx xi, double* err = nullptr) {
    return integrate_segment([&](cplx eta) { return gauge_integrand(m, j, eta); }, a, xi, 1e-13, err);
}

// Phi(a; xi) = int over the segment a -> xi of L_J / L_1.
inline cplx phi_contour(const ModelSpec& m, const JumpSpec& j, cplx a, cplx xi, bool force_quadrature = false) {
    if (m.kind == ModelKind::MultiOU) throw ValidationError("phi_contour", "one-factor models only");
    if (j.is_none() || xi == a) return 0.0;
    check_segment(m, j, a, xi);
    if (!force_quadrature) {
        PartialFractions pf = gauge_partial_fractions(m, j);
        if (pf.valid) return phi_closed_form(pf, a, xi);
    }
    return phi_contour_quadrature(m, j, a, xi);
}

// Two-leg path a -> corner -> xi, for path-independence checks and for strips
// where the straight segment passes too close to a pole.
inline cplx phi_polyline(const ModelSpec& m, const JumpSpec& j, const std::vector<cplx>& pts,
                         bool force_quadrature = false) {
    cplx v = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        cplx seg_a = pts[k - 1], seg_b = pts[k];
        if (seg_a == seg_b) continue;
        check_segment(m, j, seg_a, seg_b);
        PartialFractions pf = gauge_partial_fractions(m, j);
        v += (!force_quadrature && pf.valid) ? phi_closed_form(pf, seg_a, seg_b)
                                             : phi_contour_quadrature(m, j, seg_a, seg_b);
    }
    return v;
}

struct PhiValue {
    cplx value;
    double error = 0.0;
    double horizon = 0.0;
};

// Smallest doubling horizon with |A(H, xi)| < 1e-8 (1 + |xi|), capped at 200 / delta.
inline double longrun_horizon(const ModelSpec& m, const CVec& xi, double requested) {
    const double delta = m.decay_rate();
    const double cap = 200.0 / delta;
    const double target = 1e-8 * (1.0 + xi.norm());
    auto size_at = [&](double H) { return solve_A(m, H, xi).norm(); };
    if (requested > 0.0) {
        if (size_at(requested) >= target)
            throw NumericalError(ErrorCode::NoDecay, "A(H, xi) has not decayed at the requested horizon");
        return requested;
    }
    double H = 1.0 / delta;
    while (H <= cap) {
        if (size_at(H) < target) return H;
        H *= 1.25;
    }
    throw NumericalError(ErrorCode::NoDecay,
                         "A(s, xi) does not decay; use phi_contour or the measure-change shift for this model");
}

inline PhiValue phi_longrun(const ModelSpec& m, const JumpSpec& j, const CVec& xi, double horizon = 0.0) {
    PhiValue r;
    if (j.is_none()) return r;
    const double H = longrun_horizon(m, xi, horizon);
    double e = 0.0;
    cplx b;
    if (m.kind == ModelKind::MultiOU)
        b = integrate_B(m, [&](const CVec& eta) { return symbol_LJ(m, j, eta); }, H, xi, 1e-13, &e);
    else
        b = integrate_B(m, [&](cplx eta) { return symbol_LJ(j, eta); }, H, xi(0), 1e-13, &e);
    r.value = I * b;
    const double delta = m.decay_rate();
    const double tail = std::abs(symbol_LJ_prime(j, 0.0)) * solve_A(m, H, xi).norm() / delta;
    r.error = e + tail;
    r.horizon = H;
    return r;
}

inline PhiValue phi_longrun(const ModelSpec& m, const JumpSpec& j, cplx xi, double horizon = 0.0) {
    CVec v(1);
    v(0) = xi;
    return phi_longrun(m, j, v, horizon);
}

// Conjugation by e^{a x} that removes the discount term: the shifted model has
// symbols L(xi - i a) - L(-i a), and diffusion_constant = L_0(-i a).
struct MeasureChange {
    Eigen::VectorXd a_inf;
    ModelSpec shifted;
    double diffusion_constant = 0.0;
};

inline Eigen::VectorXd find_a_infinity(const ModelSpec& m) {
    Eigen::VectorXd a;
    switch (m.kind) {
        case ModelKind::OU:
        case ModelKind::SquareRoot: a = Eigen::VectorXd::Zero(1); break;
        case ModelKind::Vasicek: a = Eigen::VectorXd::Constant(1, -1.0 / m.kappa); break;
        case ModelKind::CIR: {
            const double s2 = m.sigma * m.sigma;
            const double gamma = std::sqrt(m.kappa * m.kappa + 2.0 * s2);
            // s2/2 a^2 - kappa a - 1 = 0, root with the smaller magnitude
            a = Eigen::VectorXd::Constant(1, -2.0 / (m.kappa + gamma));
            break;
        }
        case ModelKind::MultiOU: {
            Eigen::MatrixXd kt = m.kappa_m.transpose();
            a = -kt.fullPivLu().solve(m.d);
            break;
        }
    }
    for (int j = 1; j <= m.dim(); ++j) {
        CVec arg = (-I) * a.cast<cplx>();
        cplx res = symbol_L(m, j, arg);
        if (std::abs(res) > 1e-10 * (1.0 + a.norm()))
            throw NumericalError(ErrorCode::Domain, "no real a_inf solves L_j(-i a_inf) = 0");
    }
    return a;
}

inline MeasureChange reduce_model(const ModelSpec& m) {
    MeasureChange mc;
    mc.a_inf = find_a_infinity(m);
    switch (m.kind) {
        case ModelKind::OU:
        case ModelKind::SquareRoot: mc.shifted = m; break;
        case ModelKind::Vasicek: {
            const double k2 = m.kappa * m.kappa;
            mc.shifted = ModelSpec::ou(m.sigma, m.kappa, m.theta - m.sigma * m.sigma / k2);
            mc.diffusion_constant = m.sigma * m.sigma / (2.0 * k2) - m.theta;
            break;
        }
        case ModelKind::CIR: {
            const double a = mc.a_inf(0);
            const double k1 = m.kappa - m.sigma * m.sigma * a;
            mc.shifted = ModelSpec::square_root(m.sigma, k1, m.kappa * m.theta / k1);
            mc.diffusion_constant = m.kappa * m.theta * a;
            break;
        }
        case ModelKind::MultiOU: {
            const Eigen::VectorXd& a = mc.a_inf;
            Eigen::VectorXd theta1 =
                m.theta_v + m.kappa_m.fullPivLu().solve(m.Sigma * m.Sigma.transpose() * a);
            mc.shifted = ModelSpec::multi_ou(m.kappa_m, theta1, m.Sigma, Eigen::VectorXd::Zero(m.dim()), 0.0,
                                             m.jump_direction);
            Eigen::VectorXd sa = m.Sigma.transpose() * a;
            mc.diffusion_constant = 0.5 * sa.squaredNorm() + (m.kappa_m * m.theta_v).dot(a) - m.d0;
            break;
        }
    }
    return mc;
}

inline JumpSpec shift_jump(const ModelSpec& m, const JumpSpec& j, const Eigen::VectorXd& a) {
    if (m.kind == ModelKind::MultiOU) return shift_jump(j, m.jump_direction.dot(a));
    return shift_jump(j, a(0));
}

struct MeasureChangedPhi {
    cplx phi;
    cplx constant;  // L_J(-i a_inf), the shift of the eigenvalues
    double error = 0.0;
};

inline MeasureChangedPhi phi_measure_change(const ModelSpec& m, const JumpSpec& j, const Eigen::VectorXd& a_inf,
                                            const CVec& xi) {
    MeasureChangedPhi r;
    if (j.is_none()) return r;
    MeasureChange mc = reduce_model(m);
    if ((mc.a_inf - a_inf).norm() > 1e-10 * (1.0 + a_inf.norm()))
        throw ValidationError("a_inf", "does not solve L_j(-i a_inf) = 0 for this model");
    CVec arg = (-I) * a_inf.cast<cplx>();
    r.constant = m.kind == ModelKind::MultiOU ? symbol_LJ(m, j, arg) : symbol_LJ(j, arg(0));
    PhiValue v = phi_longrun(mc.shifted, shift_jump(m, j, a_inf), xi);
    r.phi = v.value;
    r.error = v.error;
    return r;
}

inline MeasureChangedPhi phi_measure_change(const ModelSpec& m, const JumpSpec& j, const Eigen::VectorXd& a_inf,
                                            cplx xi) {
    CVec v(1);
    v(0) = xi;
    return phi_measure_change(m, j, a_inf, v);
}

// Gauge function bundled with the (possibly shifted) problem it solves. For
// discounted one-factor models the problem is the measure-changed one and the
// reference point is 0, where Phi vanishes.
struct GaugeFn {
    ModelSpec model;  // problem whose EE equation Phi satisfies
    JumpSpec jump;
    GaugeMethod method = GaugeMethod::ClosedForm;
    cplx reference = 0.0;
    Eigen::VectorXd a_inf;
    cplx jump_constant = 0.0;
    double diffusion_constant = 0.0;
    PartialFractions pf;
    std::vector<cplx> grid;
    std::vector<cplx> values;
    std::vector<int> branch_log;

    bool trivial() const { return jump.is_none(); }

    cplx operator()(cplx xi) const {
        if (trivial() || xi == reference) return 0.0;
        switch (method) {
            case GaugeMethod::ClosedForm:
                check_segment(model, jump, reference, xi);
                return phi_closed_form(pf, reference, xi);
            case GaugeMethod::ContourQuad:
                check_segment(model, jump, reference, xi);
                return phi_contour_quadrature(model, jump, reference, xi);
            case GaugeMethod::LongRunIntegral:
            case GaugeMethod::MeasureChanged: {
                cplx v = phi_longrun(model, jump, xi).value;
                if (reference != 0.0) v -= phi_longrun(model, jump, reference).value;
                return v;
            }
        }
        return 0.0;
    }

    // Radius of the disc around 0 on which Phi is analytic.
    double analytic_radius() const {
        double r = INF;
        for (cplx p : gauge_singularities(model, jump)) r = std::min(r, std::abs(p));
        return r;
    }

    // Evaluates Phi on a grid and records any 2 pi i jumps between neighbours.
    void tabulate(const std::vector<cplx>& pts) {
        grid = pts;
        values.assign(pts.size(), 0.0);
        parallel_for(pts.size(), [&](std::size_t k) { values[k] = (*this)(pts[k]); }, 8);
        branch_log.assign(pts.size(), 0);
        double rmax = 0.0;
        for (cplx r : pf.residues) rmax = std::max(rmax, std::abs(r));
        for (std::size_t k = 1; k < values.size(); ++k) {
            const cplx jump_k = values[k] - values[k - 1];
            if (rmax > 0.0 && std::abs(jump_k) > PI * rmax) branch_log[k] = 1;
        }
    }
};

inline GaugeFn make_gauge(const ModelSpec& model, const JumpSpec& jump, cplx reference = 0.0,
                          bool force_quadrature = false) {
    GaugeFn g;
    if (model.kind == ModelKind::MultiOU) {
        MeasureChange mc = reduce_model(model);
        g.model = mc.shifted;
        g.a_inf = mc.a_inf;
        g.diffusion_constant = mc.diffusion_constant;
        g.jump = shift_jump(model, jump, mc.a_inf);
        CVec arg = (-I) * mc.a_inf.cast<cplx>();
        g.jump_constant = jump.is_none() ? cplx(0.0) : symbol_LJ(model, jump, arg);
        g.method = model.discounted() ? GaugeMethod::MeasureChanged : GaugeMethod::LongRunIntegral;
        return g;
    }
    MeasureChange mc = reduce_model(model);
    g.model = mc.shifted;
    g.a_inf = mc.a_inf;
    g.diffusion_constant = mc.diffusion_constant;
    g.jump = shift_jump(jump, mc.a_inf(0));
    g.jump_constant = jump.is_none() ? cplx(0.0) : symbol_LJ(jump, -I * mc.a_inf(0));
    g.reference = reference;
    g.pf = gauge_partial_fractions(g.model, g.jump);
    g.method = (g.pf.valid && !force_quadrature) ? GaugeMethod::ClosedForm : GaugeMethod::ContourQuad;
    return g;
}

// |sum_j L_j d_j Phi - L_J| with d Phi from 4th-order central differences.
inline double ee_residual(const ModelSpec& m, const JumpSpec& j, const std::function<cplx(cplx)>& phi, cplx xi,
                          double h = 1e-3, double tol = 1e-6) {
    auto d4 = [&](double s) {
        return (-phi(xi + 2.0 * s) + 8.0 * phi(xi + s) - 8.0 * phi(xi - s) + phi(xi - 2.0 * s)) / (12.0 * s);
    };
    cplx dphi = d4(h);
    cplx dphi2 = d4(2.0 * h);
    cplx l1 = symbol_L(m, 1, xi);
    double richardson = std::abs(l1) * std::abs(dphi - dphi2) / 15.0;
    if (richardson > tol)
        throw NumericalError(ErrorCode::DerivativeEstimate, "finite-difference step too coarse for the EE residual");
    return std::abs(l1 * dphi - symbol_LJ(j, xi));
}

inline double ee_residual(const GaugeFn& g, cplx xi, double h = 1e-3) {
    return ee_residual(g.model, g.jump, [&](cplx z) { return g(z); }, xi, h);
}

inline double ee_residual_multi(const ModelSpec& m, const JumpSpec& j, const CVec& xi, double h = 1e-3) {
    const int n = m.dim();
    auto phi = [&](const CVec& z) { return phi_longrun(m, j, z).value; };
    cplx sum = 0.0;
    for (int k = 0; k < n; ++k) {
        CVec e = CVec::Zero(n);
        e(k) = h;
        cplx d = (-phi(xi + 2.0 * e) + 8.0 * phi(xi + e) - 8.0 * phi(xi - e) + phi(xi - 2.0 * e)) / (12.0 * h);
        sum += symbol_L(m, k + 1, xi) * d;
    }
    return std::abs(sum - symbol_LJ(m, j, xi));
}

}  // namespace twisted_affine
