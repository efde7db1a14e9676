#include "twisted_affine/config.hpp"
#include "twisted_affine/eigenbasis.hpp"
#include "twisted_affine/estimator.hpp"
#include "twisted_affine/gauge.hpp"
#include "twisted_affine/parallel.hpp"
#include "twisted_affine/pricer.hpp"
#include "twisted_affine/riccati.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>

using namespace twisted_affine;

namespace {

struct Flags {
    std::string config;
    std::string output;
    std::optional<double> omega;
    std::optional<double> half_width;
    std::optional<int> points;
    std::string rule;
    int threads = 0;
    std::optional<int> N;
    double xi_min = -10.0, xi_max = 10.0;
    int n_xi = 101;
    std::string curve;
};

class Csv {
public:
    explicit Csv(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ValidationError("output", "cannot open '" + path + "'");
        }
        out().setf(std::ios::scientific);
        out() << std::setprecision(16);
    }
    std::ostream& out() { return file_ ? *file_ : std::cout; }
    void header(std::initializer_list<const char*> cols) {
        bool first = true;
        for (const char* c : cols) {
            out() << (first ? "" : ",") << c;
            first = false;
        }
        out() << '\n';
    }
    template <class... Ts>
    void row(const Ts&... v) {
        bool first = true;
        ((out() << (first ? "" : ",") << v, first = false), ...);
        out() << '\n';
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

RunConfig load(const Flags& f) {
    RunConfig c = load_config(f.config);
    if (f.omega) c.omega = *f.omega;
    if (f.half_width) c.contour.half_width = *f.half_width;
    if (f.points) c.contour.n_points = *f.points;
    if (!f.rule.empty()) {
        if (f.rule == "trapezoid") c.contour.rule = QuadRule::Trapezoid;
        else if (f.rule == "sinh") c.contour.rule = QuadRule::SinhAccelerated;
        else throw ValidationError("--rule", "expected trapezoid or sinh");
    }
    if (f.N) {
        if (*f.N < 0 || *f.N > 200) throw ValidationError("--N", "must lie in [0, 200]");
        c.expansion.N = *f.N;
    }
    if (!c.contour.is_auto()) {
        c.contour.omega = c.omega.value_or(0.0);
        c.contour.validate();
    }
    if (!f.output.empty()) c.output = f.output;
    return c;
}

ExpansionOptions expansion_options(const RunConfig& c) {
    ExpansionOptions o = c.expansion;
    if (c.omega) {
        o.has_omega = true;
        o.omega = *c.omega;
    }
    if (!c.contour.is_auto()) o.contour = c.contour;
    return o;
}

std::vector<double> xi_grid(const Flags& f) {
    if (f.n_xi < 2) throw ValidationError("--n", "must be >= 2");
    if (!(f.xi_max > f.xi_min)) throw ValidationError("--xi-max", "must exceed --xi-min");
    std::vector<double> g(f.n_xi);
    for (int i = 0; i < f.n_xi; ++i) g[i] = f.xi_min + (f.xi_max - f.xi_min) * i / (f.n_xi - 1);
    return g;
}

int cmd_price_eigen(const Flags& f, bool subordinated) {
    RunConfig c = load(f);
    c.require_option();
    if (subordinated && !c.subordinator) throw ValidationError("subordinator", "section missing");
    const ExpansionOptions opt = expansion_options(c);
    std::vector<PriceResult> rs;
    for (double K : c.strikes) {
        OptionSpec o = c.option(K);
        rs.push_back(subordinated ? price_subordinated(c.model, c.jump, *c.subordinator, o, c.x_scalar(), opt)
                                  : price_eigen(c.model, c.jump, o, c.x_scalar(), opt));
    }
    Csv csv(c.output);
    csv.header({"strike", "maturity", "price", "method", "est_error", "n_terms"});
    for (std::size_t i = 0; i < rs.size(); ++i)
        csv.row(c.strikes[i], *c.maturity, rs[i].price, rs[i].method, rs[i].est_error, rs[i].n_terms);
    return 0;
}

int cmd_price_ift(const Flags& f) {
    RunConfig c = load(f);
    c.require_option();
    if (c.model.kind == ModelKind::MultiOU) throw ValidationError("model.kind", "price-ift supports one-factor models");
    std::vector<PriceResult> rs =
        price_ift_strikes(c.model, c.jump, *c.style, c.form, *c.maturity, c.x_scalar(), c.strikes, c.contour, c.omega);
    Csv csv(c.output);
    csv.header({"strike", "maturity", "price", "method", "est_error", "n_terms"});
    for (std::size_t i = 0; i < rs.size(); ++i)
        csv.row(c.strikes[i], *c.maturity, rs[i].price, rs[i].method, rs[i].est_error, rs[i].n_terms);
    return 0;
}

int cmd_phi_table(const Flags& f) {
    RunConfig c = load(f);
    const double w = c.omega.value_or(0.0);
    Csv csv(c.output);
    if (c.model.kind == ModelKind::MultiOU) {
        // Phi along the first coordinate axis
        GaugeFn g = make_gauge(c.model, c.jump);
        csv.header({"xi_re", "xi_im", "phi_re", "phi_im", "phi_error"});
        for (double xr : xi_grid(f)) {
            CVec xi = CVec::Zero(c.model.dim());
            xi(0) = cplx(xr, w);
            PhiValue p = g.jump.is_none() ? PhiValue{} : phi_longrun(g.model, g.jump, xi);
            csv.row(xr, w, p.value.real(), p.value.imag(), p.error);
        }
        return 0;
    }
    GaugeFn g = make_gauge(c.model, c.jump);
    csv.header({"xi_re", "xi_im", "phi_re", "phi_im", "ee_residual"});
    for (double xr : xi_grid(f)) {
        const cplx xi(xr, w);
        const cplx p = g(xi);
        csv.row(xr, w, p.real(), p.imag(), ee_residual(g, xi));
    }
    return 0;
}

int cmd_chf_table(const Flags& f) {
    RunConfig c = load(f);
    if (!c.maturity) throw ValidationError("option.maturity", "missing");
    const double w = c.omega.value_or(0.0);
    Csv csv(c.output);
    if (c.model.kind == ModelKind::MultiOU) {
        csv.header({"xi_re", "xi_im", "chf_re", "chf_im"});
        for (double xr : xi_grid(f)) {
            CVec xi = CVec::Zero(c.model.dim());
            xi(0) = cplx(xr, w);
            const cplx v = chf(c.model, c.jump, *c.maturity, c.x, xi);
            csv.row(xr, w, v.real(), v.imag());
        }
        return 0;
    }
    csv.header({"xi_re", "xi_im", "A_re", "A_im", "B0_re", "B0_im", "BJ_re", "BJ_im", "chf_re", "chf_im"});
    for (double xr : xi_grid(f)) {
        const cplx xi(xr, w);
        RiccatiSolution s = solve_riccati(c.model, c.jump, *c.maturity, xi);
        const cplx v = std::exp(s.A * c.x_scalar() + s.B0 + s.BJ);
        csv.row(xr, w, s.A.real(), s.A.imag(), s.B0.real(), s.B0.imag(), s.BJ.real(), s.BJ.imag(), v.real(), v.imag());
    }
    return 0;
}

int cmd_eigen_table(const Flags& f) {
    RunConfig c = load(f);
    c.require_option();
    ExpansionTerms t = expansion_terms(c.model, c.jump, c.option(c.strikes.front()), c.x_scalar(), expansion_options(c));
    Csv csv(c.output);
    csv.header({"n", "lambda", "coeff_re", "coeff_im", "twisted_re", "twisted_im", "term_re", "term_im"});
    for (std::size_t n = 0; n < t.coeff.size(); ++n) {
        const cplx term = t.prefactor * t.coeff[n] * std::exp(-*c.maturity * t.lambda[n]) * t.twisted[n];
        csv.row(n, t.lambda[n], t.coeff[n].real(), t.coeff[n].imag(), t.twisted[n].real(), t.twisted[n].imag(),
                term.real(), term.imag());
    }
    return 0;
}

int cmd_estimate(const Flags& f) {
    RunConfig c = load(f);
    EstimationConfig e = c.estimation.value_or(EstimationConfig{});
    if (!f.curve.empty()) e.curve_path = f.curve;
    if (e.curve_path.empty()) throw ValidationError("estimation.curve", "missing");
    if (!c.style) throw ValidationError("option.style", "missing");
    if (!c.maturity) throw ValidationError("option.maturity", "missing");
    MarketSlice s;
    s.T = *c.maturity;
    s.x = c.x_scalar();
    s.model = c.model;
    s.style = *c.style;
    s.form = c.form;
    std::tie(s.strikes, s.prices) = read_curve_csv(e.curve_path);
    RecoveryOptions opt;
    opt.omega = c.omega ? c.omega : e.omega;
    opt.xi_max = e.xi_max;
    opt.points_per_unit = e.points_per_unit;
    opt.normalize = e.normalize;
    EstimateReport rep = estimate_jumps(s, opt, e.family);
    const RecoveredJump& r = rep.recovered;
    Csv csv(c.output);
    csv.header({"xi_re", "xi_im", "h_re", "h_im", "phi_re", "phi_im", "LJ_re", "LJ_im"});
    for (std::size_t j = 0; j < r.xi.size(); ++j)
        csv.row(r.xi[j].real(), r.xi[j].imag(), r.h[j].real(), r.h[j].imag(), r.phi[j].real(), r.phi[j].imag(),
                r.LJ[j].real(), r.LJ[j].imag());
    std::ostream& rpt = std::cerr;
    rpt << std::setprecision(10);
    rpt << "report omega " << r.omega << "\n";
    rpt << "report truncation_factor " << r.truncation_factor << "\n";
    rpt << "report normalization " << r.normalization.real() << " " << r.normalization.imag() << "\n";
    rpt << "report differentiation_gap " << r.differentiation_gap << "\n";
    std::size_t masked = std::count(r.masked.begin(), r.masked.end(), true);
    rpt << "report masked_points " << masked << "\n";
    if (rep.consistency > 0.0) rpt << "report omega_consistency " << rep.consistency << "\n";
    if (r.fit) {
        const FitResult& fr = *r.fit;
        rpt << "fit c_plus " << fr.jump.c_plus << "\n"
            << "fit c_minus " << fr.jump.c_minus << "\n"
            << "fit lambda_plus " << fr.jump.lambda_plus << "\n"
            << "fit lambda_minus " << fr.jump.lambda_minus << "\n"
            << "fit residual " << fr.residual << "\n"
            << "fit converged " << (fr.converged ? "true" : "false") << "\n";
        if (!fr.note.empty()) rpt << "fit note " << fr.note << "\n";
    }
    return 0;
}

// Oracle gaps on the configured model: EE residual, eigen vs iFT prices and,
// for one-factor OU-type models with two-sided jumps, the jump-recovery round trip.
int cmd_selftest(const Flags& f) {
    RunConfig c = load(f);
    c.require_option();
    if (c.model.kind == ModelKind::MultiOU) throw ValidationError("model.kind", "selftest supports one-factor models");
    Csv csv(c.output);
    csv.header({"check", "gap", "tolerance", "status"});
    bool all = true;
    auto report = [&](const std::string& name, double gap, double tol) {
        const bool ok = gap < tol;
        all = all && ok;
        csv.row(name, gap, tol, ok ? "PASS" : "FAIL");
    };

    GaugeFn g = make_gauge(c.model, c.jump);
    double ee = 0.0;
    for (int i = 0; i <= 20; ++i) ee = std::max(ee, ee_residual(g, cplx(-5.0 + 0.5 * i, 0.0)));
    report("ee_residual", ee, 1e-8);

    const double ptol = c.model.square_root_family() ? 1e-5 : 1e-6;
    std::vector<PriceResult> ift =
        price_ift_strikes(c.model, c.jump, *c.style, c.form, *c.maturity, c.x_scalar(), c.strikes);
    for (std::size_t i = 0; i < c.strikes.size(); ++i) {
        PriceResult e = price_eigen(c.model, c.jump, c.option(c.strikes[i]), c.x_scalar(), expansion_options(c));
        const double scale = std::max(std::abs(ift[i].price), 1e-12);
        std::ostringstream name;
        name << "eigen_vs_ift_K" << c.strikes[i];
        report(name.str(), std::abs(e.price - ift[i].price) / scale, ptol);
    }

    if ((c.model.kind == ModelKind::OU || c.model.kind == ModelKind::Vasicek) &&
        c.jump.family == JumpFamily::DoubleExponential && c.form == ModelForm::Exponential) {
        const double T = 10.0 / c.model.kappa;
        const double var = diffusion_variance(c.model, T, c.x_scalar()) + 0.02;
        const double F = forward_price(c.model, c.jump, T, c.x_scalar(), ModelForm::Exponential);
        std::vector<double> K(2001);
        for (int i = 0; i < 2001; ++i) K[i] = std::exp(std::log(F) + (-8.0 + 16.0 * i / 2000.0) * std::sqrt(var));
        MarketSlice s = synthesize_slice(c.model, c.jump, OptionStyle::Put, ModelForm::Exponential, T, c.x_scalar(), K);
        RecoveryOptions opt;
        opt.omega = std::min(4.0, 0.5 * c.jump.lambda_plus);
        RecoveredJump r = recover_LJ(recover_phi(recover_h(s, opt)));
        double err = 0.0;
        for (std::size_t j = 0; j < r.xi.size(); ++j) {
            if (std::abs(r.xi[j].real()) > 5.0 || r.low_accuracy[j]) continue;
            const cplx t = symbol_LJ(c.jump, r.xi[j]);
            err = std::max(err, std::abs(r.LJ[j] - t) / std::abs(t));
        }
        report("jump_recovery_round_trip", err, 1e-2);
    }
    if (!all) throw NumericalError(ErrorCode::Quadrature, "selftest: oracle gap above tolerance");
    return 0;
}

std::string quoted(const std::string& s) {
    std::string o = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') o += '\\';
        o += ch == '\n' ? ' ' : ch;
    }
    return o + "\"";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Option pricing in affine jump-diffusion models by twisted eigenfunction expansion"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", f.config, "INI config file")->required();
        sub->add_option("-o,--output", f.output, "output CSV (default stdout)");
        sub->add_option("--omega", f.omega, "integration line Im xi = omega");
        sub->add_option("--half-width", f.half_width, "contour half-width");
        sub->add_option("--points", f.points, "contour points (odd)");
        sub->add_option("--rule", f.rule, "trapezoid or sinh");
        sub->add_option("--threads", f.threads, "worker threads (0: TWISTED_AFFINE_THREADS or hardware)");
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--xi-min", f.xi_min, "first grid point (real part)");
        sub->add_option("--xi-max", f.xi_max, "last grid point (real part)");
        sub->add_option("--n", f.n_xi, "number of grid points");
    };

    CLI::App* pe = app.add_subcommand("price-eigen", "price by twisted eigenfunction expansion");
    CLI::App* pi = app.add_subcommand("price-ift", "price by inverse Fourier transform");
    CLI::App* ps = app.add_subcommand("price-sub", "price under a subordinated time change");
    CLI::App* ph = app.add_subcommand("phi-table", "tabulate the gauge function");
    CLI::App* ch = app.add_subcommand("chf-table", "tabulate the characteristic function");
    CLI::App* et = app.add_subcommand("eigen-table", "expansion terms for the first strike");
    CLI::App* ej = app.add_subcommand("estimate-jumps", "recover the jump exponent from a long-maturity curve");
    CLI::App* st = app.add_subcommand("selftest", "oracle comparisons on the configured model");
    for (CLI::App* s : {pe, pi, ps, ph, ch, et, ej, st}) add_common(s);
    for (CLI::App* s : {pe, ps, et}) s->add_option("--N", f.N, "number of expansion terms");
    add_grid(ph);
    add_grid(ch);
    ej->add_option("--curve", f.curve, "CSV of strike,price");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (f.threads < 0) throw ValidationError("--threads", "must be >= 0");
        if (f.threads > 0) set_max_threads(f.threads);
        if (*pe) return cmd_price_eigen(f, false);
        if (*ps) return cmd_price_eigen(f, true);
        if (*pi) return cmd_price_ift(f);
        if (*ph) return cmd_phi_table(f);
        if (*ch) return cmd_chf_table(f);
        if (*et) return cmd_eigen_table(f);
        if (*ej) return cmd_estimate(f);
        if (*st) return cmd_selftest(f);
    } catch (const ValidationError& e) {
        std::cerr << "error kind=validation field=" << e.field() << " message=" << quoted(e.what()) << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error kind=numerical code=" << error_code_name(e.code()) << " message=" << quoted(e.what()) << "\n";
        return 3;
    }
    return 0;
}
