#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace twisted_affine {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
inline constexpr cplx I{0.0, 1.0};
inline constexpr double PI = 3.14159265358979323846;
inline constexpr double INF = std::numeric_limits<double>::infinity();

enum class ErrorCode {
    Domain,
    StripViolation,
    PoleProximity,
    ContourCrossing,
    StepUnderflow,
    BlowUp,
    NoDecay,
    Truncation,
    Quadrature,
    DerivativeEstimate,
    TailDecay,
    LogSingularity,
    FitNonConvergence,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::Domain: return "domain";
        case ErrorCode::StripViolation: return "strip_violation";
        case ErrorCode::PoleProximity: return "pole_proximity";
        case ErrorCode::ContourCrossing: return "contour_crossing";
        case ErrorCode::StepUnderflow: return "step_underflow";
        case ErrorCode::BlowUp: return "blow_up";
        case ErrorCode::NoDecay: return "no_decay";
        case ErrorCode::Truncation: return "truncation";
        case ErrorCode::Quadrature: return "quadrature";
        case ErrorCode::DerivativeEstimate: return "derivative_estimate";
        case ErrorCode::TailDecay: return "tail_decay";
        case ErrorCode::LogSingularity: return "log_singularity";
        case ErrorCode::FitNonConvergence: return "fit_non_convergence";
    }
    return "unknown";
}

// Bad input: a config field, a parameter range or an unsupported combination.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& msg)
        : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class NumericalError : public std::runtime_error {
public:
    NumericalError(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct Strip {
    double lower = -INF;
    double upper = INF;
    bool contains(double im) const { return im > lower && im < upper; }
};

// ---------------------------------------------------------------------------
// Diffusion models

enum class ModelKind { OU, Vasicek, SquareRoot, CIR, MultiOU };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::OU: return "OU";
        case ModelKind::Vasicek: return "Vasicek";
        case ModelKind::SquareRoot: return "SquareRoot";
        case ModelKind::CIR: return "CIR";
        case ModelKind::MultiOU: return "MultiOU";
    }
    return "?";
}

struct ModelSpec {
    ModelKind kind = ModelKind::OU;
    double sigma = 0.0;
    double kappa = 0.0;
    double theta = 0.0;

    // MultiOU: generator 1/2<Sigma'D, Sigma'D> + <kappa(theta - x), D> - <d, x> - d0.
    Eigen::MatrixXd kappa_m;
    Eigen::MatrixXd Sigma;
    Eigen::VectorXd theta_v;
    Eigen::VectorXd d;
    double d0 = 0.0;
    // The jump part of a MultiOU model moves the state along this direction.
    Eigen::VectorXd jump_direction;

    static ModelSpec make(ModelKind k, double sigma, double kappa, double theta) {
        ModelSpec m;
        m.kind = k;
        m.sigma = sigma;
        m.kappa = kappa;
        m.theta = theta;
        m.validate();
        return m;
    }
    static ModelSpec ou(double s, double k, double t) { return make(ModelKind::OU, s, k, t); }
    static ModelSpec vasicek(double s, double k, double t) { return make(ModelKind::Vasicek, s, k, t); }
    static ModelSpec square_root(double s, double k, double t) { return make(ModelKind::SquareRoot, s, k, t); }
    static ModelSpec cir(double s, double k, double t) { return make(ModelKind::CIR, s, k, t); }

    static ModelSpec multi_ou(const Eigen::MatrixXd& kappa, const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& Sigma, Eigen::VectorXd d = {}, double d0 = 0.0,
                              Eigen::VectorXd direction = {}) {
        ModelSpec m;
        m.kind = ModelKind::MultiOU;
        m.kappa_m = kappa;
        m.theta_v = theta;
        m.Sigma = Sigma;
        const auto n = kappa.rows();
        m.d = d.size() ? d : Eigen::VectorXd::Zero(n);
        m.d0 = d0;
        if (direction.size()) {
            m.jump_direction = direction;
        } else {
            m.jump_direction = Eigen::VectorXd::Zero(n);
            if (n > 0) m.jump_direction(0) = 1.0;
        }
        m.validate();
        return m;
    }

    int dim() const { return kind == ModelKind::MultiOU ? static_cast<int>(kappa_m.rows()) : 1; }

    bool discounted() const {
        if (kind == ModelKind::Vasicek || kind == ModelKind::CIR) return true;
        if (kind == ModelKind::MultiOU) return d.size() && (d.norm() > 0.0 || d0 != 0.0);
        return false;
    }

    bool square_root_family() const { return kind == ModelKind::SquareRoot || kind == ModelKind::CIR; }

    // Exponential decay rate of A(t, xi) after any discount shift.
    double decay_rate() const {
        switch (kind) {
            case ModelKind::OU:
            case ModelKind::Vasicek:
            case ModelKind::SquareRoot: return kappa;
            case ModelKind::CIR: return std::sqrt(kappa * kappa + 2.0 * sigma * sigma);
            case ModelKind::MultiOU: {
                Eigen::EigenSolver<Eigen::MatrixXd> es(kappa_m);
                return es.eigenvalues().real().minCoeff();
            }
        }
        return kappa;
    }

    void validate() const {
        if (kind == ModelKind::MultiOU) {
            const auto n = kappa_m.rows();
            if (n < 1 || kappa_m.cols() != n) throw ValidationError("model.kappa", "must be a square matrix");
            if (theta_v.size() != n) throw ValidationError("model.theta", "dimension mismatch");
            if (Sigma.rows() != n || Sigma.cols() != n) throw ValidationError("model.Sigma", "dimension mismatch");
            if (d.size() != n) throw ValidationError("model.d", "dimension mismatch");
            if (jump_direction.size() != n) throw ValidationError("model.jump_direction", "dimension mismatch");
            if (!kappa_m.allFinite() || !Sigma.allFinite() || !theta_v.allFinite() || !d.allFinite() || !std::isfinite(d0))
                throw ValidationError("model", "non-finite parameter");
            Eigen::EigenSolver<Eigen::MatrixXd> es(kappa_m);
            if (es.eigenvalues().real().minCoeff() <= 0.0)
                throw ValidationError("model.kappa", "eigenvalues must have positive real part");
            Eigen::FullPivLU<Eigen::MatrixXd> lu(Sigma);
            if (!lu.isInvertible()) throw ValidationError("model.Sigma", "must be invertible");
            return;
        }
        if (!std::isfinite(sigma) || !(sigma > 0.0)) throw ValidationError("model.sigma", "must be > 0");
        if (!std::isfinite(kappa) || !(kappa > 0.0)) throw ValidationError("model.kappa", "must be > 0");
        if (!std::isfinite(theta)) throw ValidationError("model.theta", "must be finite");
        if (square_root_family()) {
            if (!(theta > 0.0)) throw ValidationError("model.theta", "must be > 0 for square-root models");
            if (2.0 * kappa * theta < sigma * sigma * (1.0 - 1e-14))
                throw ValidationError("model", "Feller condition 2*kappa*theta >= sigma^2 violated");
        }
    }
};

// Symbols of the generator under d/dx <-> i xi. j = 0 is the state-independent
// part, j = 1..m multiply x_j.
inline cplx symbol_L(const ModelSpec& m, int j, cplx xi) {
    if (m.kind == ModelKind::MultiOU) throw ValidationError("symbol_L", "MultiOU symbols take a vector argument");
    if (j < 0 || j > 1) throw ValidationError("symbol_L", "index out of range");
    const double s2 = m.sigma * m.sigma;
    switch (m.kind) {
        case ModelKind::OU:
        case ModelKind::Vasicek:
            if (j == 0) return -0.5 * s2 * xi * xi + I * m.kappa * m.theta * xi;
            return -I * m.kappa * xi - (m.kind == ModelKind::Vasicek ? 1.0 : 0.0);
        case ModelKind::SquareRoot:
        case ModelKind::CIR:
            if (j == 0) return I * m.kappa * m.theta * xi;
            return -0.5 * s2 * xi * xi - I * m.kappa * xi - (m.kind == ModelKind::CIR ? 1.0 : 0.0);
        default: break;
    }
    return 0.0;
}

inline cplx symbol_L(const ModelSpec& m, int j, const CVec& xi) {
    if (m.kind != ModelKind::MultiOU) {
        if (xi.size() != 1) throw ValidationError("symbol_L", "dimension mismatch");
        return symbol_L(m, j, xi(0));
    }
    const int n = m.dim();
    if (j < 0 || j > n) throw ValidationError("symbol_L", "index out of range");
    if (xi.size() != n) throw ValidationError("symbol_L", "dimension mismatch");
    if (j == 0) {
        CVec st = m.Sigma.transpose().cast<cplx>() * xi;
        Eigen::VectorXd kt = m.kappa_m * m.theta_v;
        cplx quad = (st.transpose() * st)(0);
        return -0.5 * quad + I * (kt.cast<cplx>().transpose() * xi)(0) - m.d0;
    }
    cplx kx = (m.kappa_m.col(j - 1).cast<cplx>().transpose() * xi)(0);
    return -I * kx - m.d(j - 1);
}

// Derivative of L_1 for one-factor models.
inline cplx symbol_L1_prime(const ModelSpec& m, cplx xi) {
    if (m.square_root_family()) return -m.sigma * m.sigma * xi - I * m.kappa;
    return -I * m.kappa;
}

// Zeros of L_1 (one-factor models).
inline std::vector<cplx> symbol_L1_zeros(const ModelSpec& m) {
    const double s2 = m.sigma * m.sigma;
    const double c = (m.kind == ModelKind::Vasicek || m.kind == ModelKind::CIR) ? -1.0 : 0.0;
    if (!m.square_root_family()) return {cplx(c) / (I * m.kappa)};
    // -s2/2 z^2 - i kappa z + c = 0
    cplx a = -0.5 * s2, b = -I * m.kappa;
    cplx disc = std::sqrt(b * b - 4.0 * a * c);
    return {(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)};
}

// ---------------------------------------------------------------------------
// Rational functions of z = i xi with real coefficients.

class Polynomial {
public:
    std::vector<double> c;  // ascending powers

    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs) : c(std::move(coeffs)) { trim(); }
    static Polynomial constant(double v) { return Polynomial({v}); }
    static Polynomial z() { return Polynomial({0.0, 1.0}); }

    int degree() const { return c.empty() ? -1 : static_cast<int>(c.size()) - 1; }
    bool is_zero() const { return c.empty(); }

    void trim() {
        while (!c.empty() && c.back() == 0.0) c.pop_back();
    }

    template <class T>
    T operator()(T z) const {
        T r{};
        for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * z + *it;
        return r;
    }

    Polynomial derivative() const {
        std::vector<double> d;
        for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
        return Polynomial(d);
    }

    // p(z + a)
    Polynomial shifted(double a) const {
        std::vector<double> r(c.begin(), c.end());
        const std::size_t n = r.size();
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t k = n - 1; k > i; --k) r[k - 1] += a * r[k];
        return Polynomial(r);
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<double> r(std::max(a.c.size(), b.c.size()), 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i) r[i] += a.c[i];
        for (std::size_t i = 0; i < b.c.size(); ++i) r[i] += b.c[i];
        return Polynomial(r);
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.c.empty() || b.c.empty()) return Polynomial();
        std::vector<double> r(a.c.size() + b.c.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i)
            for (std::size_t j = 0; j < b.c.size(); ++j) r[i + j] += a.c[i] * b.c[j];
        return Polynomial(r);
    }
    friend Polynomial operator*(double s, const Polynomial& a) { return Polynomial::constant(s) * a; }

    std::vector<cplx> roots() const {
        const int n = degree();
        if (n < 1) return {};
        Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
        for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[i] / c[n];
        Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
        std::vector<cplx> r(n);
        for (int i = 0; i < n; ++i) r[i] = es.eigenvalues()(i);
        return r;
    }
};

class RationalSymbol {
public:
    Polynomial num{std::vector<double>{0.0}};
    Polynomial den{std::vector<double>{1.0}};
    std::string source;

    RationalSymbol() = default;
    RationalSymbol(Polynomial n, Polynomial d) : num(std::move(n)), den(std::move(d)) {
        if (den.is_zero()) throw ValidationError("jump.expr", "denominator is identically zero");
        // normalise so that the leading denominator coefficient is one
        double lead = den.c.back();
        for (auto& v : num.c) v /= lead;
        for (auto& v : den.c) v /= lead;
    }

    // Grammar: sums, products, quotients, integer powers, parentheses,
    // decimal numbers and the variable z (= i xi).
    static RationalSymbol parse(const std::string& text);

    cplx eval_z(cplx z) const { return num(z) / den(z); }
    cplx operator()(cplx xi) const { return eval_z(I * xi); }

    // Poles in the xi plane, skipping those cancelled by a numerator zero.
    std::vector<cplx> poles_xi() const {
        std::vector<cplx> out;
        for (cplx zp : den.roots()) {
            double scale = 0.0, zk = 1.0;
            for (double v : num.c) {
                scale += std::abs(v) * zk;
                zk *= std::abs(zp);
            }
            if (std::abs(num(zp)) <= 1e-10 * scale) continue;
            out.push_back(-I * zp);
        }
        return out;
    }

    // R(z + a) - R(a): the symbol xi -> L(xi - i a) - L(-i a).
    RationalSymbol shifted(double a) const {
        Polynomial n = num.shifted(a), d = den.shifted(a);
        double c0 = eval_z(cplx(a)).real();
        RationalSymbol r(n + (-c0) * d, d);
        r.source = "(" + source + ") shifted by " + std::to_string(a);
        return r;
    }
};

namespace detail {

struct Rational {
    Polynomial n, d;
};

inline Rational r_add(const Rational& a, const Rational& b) { return {a.n * b.d + b.n * a.d, a.d * b.d}; }
inline Rational r_neg(const Rational& a) { return {(-1.0) * a.n, a.d}; }
inline Rational r_mul(const Rational& a, const Rational& b) { return {a.n * b.n, a.d * b.d}; }
inline Rational r_div(const Rational& a, const Rational& b) {
    if (b.n.is_zero()) throw ValidationError("jump.expr", "division by zero");
    return {a.n * b.d, a.d * b.n};
}

class ExprParser {
public:
    explicit ExprParser(const std::string& s) : s_(s) {}

    Rational parse() {
        Rational r = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return r;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError("jump.expr", msg + " at position " + std::to_string(pos_));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char ch) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    Rational expr() {
        Rational r = term();
        for (;;) {
            if (eat('+')) r = r_add(r, term());
            else if (eat('-')) r = r_add(r, r_neg(term()));
            else return r;
        }
    }
    Rational term() {
        Rational r = unary();
        for (;;) {
            if (eat('*')) r = r_mul(r, unary());
            else if (eat('/')) r = r_div(r, unary());
            else return r;
        }
    }
    Rational unary() {
        if (eat('-')) return r_neg(unary());
        if (eat('+')) return unary();
        return power();
    }
    Rational power() {
        Rational base = atom();
        if (!eat('^')) return base;
        skip();
        bool neg = false;
        if (eat('-')) neg = true;
        skip();
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) fail("expected integer exponent");
        int e = std::stoi(s_.substr(start, pos_ - start));
        if (e > 16) fail("exponent too large");
        Rational r{Polynomial::constant(1.0), Polynomial::constant(1.0)};
        for (int k = 0; k < e; ++k) r = r_mul(r, base);
        if (neg) r = r_div(Rational{Polynomial::constant(1.0), Polynomial::constant(1.0)}, r);
        return r;
    }
    Rational atom() {
        skip();
        if (eat('(')) {
            Rational r = expr();
            if (!eat(')')) fail("expected ')'");
            return r;
        }
        if (pos_ < s_.size() && (s_[pos_] == 'z' || s_[pos_] == 'Z')) {
            ++pos_;
            return {Polynomial::z(), Polynomial::constant(1.0)};
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        if (start == pos_) fail("expected number, 'z' or '('");
        double v = 0.0;
        try {
            v = std::stod(s_.substr(start, pos_ - start));
        } catch (...) {
            fail("bad number");
        }
        return {Polynomial::constant(v), Polynomial::constant(1.0)};
    }
};

}  // namespace detail

inline RationalSymbol RationalSymbol::parse(const std::string& text) {
    detail::ExprParser p(text);
    detail::Rational r = p.parse();
    RationalSymbol out(r.n, r.d);
    out.source = text;
    return out;
}

// ---------------------------------------------------------------------------
// Jump part

enum class JumpFamily { None, DoubleExponential, ExponentialPositive, ExponentialNegative, Custom };

inline const char* jump_family_name(JumpFamily f) {
    switch (f) {
        case JumpFamily::None: return "None";
        case JumpFamily::DoubleExponential: return "DoubleExponential";
        case JumpFamily::ExponentialPositive: return "ExponentialPositive";
        case JumpFamily::ExponentialNegative: return "ExponentialNegative";
        case JumpFamily::Custom: return "Custom";
    }
    return "?";
}

namespace detail {

// c_plus: intensity of downward jumps with rate lambda_plus.
// c_minus: intensity of upward jumps with rate -lambda_minus.
inline cplx de_symbol(double cp, double cm, double lp, double lm, cplx xi) {
    cplx v = 0.0;
    if (cp != 0.0) v -= cp * I * xi / (lp + I * xi);
    if (cm != 0.0) v += cm * I * xi / (-lm - I * xi);
    return v;
}

}  // namespace detail

struct JumpSpec {
    JumpFamily family = JumpFamily::None;
    double c_plus = 0.0;
    double c_minus = 0.0;
    double lambda_plus = INF;
    double lambda_minus = -INF;
    std::shared_ptr<const RationalSymbol> custom;

    static JumpSpec none() { return {}; }

    static JumpSpec double_exponential(double cp, double cm, double lp, double lm) {
        JumpSpec j;
        j.family = JumpFamily::DoubleExponential;
        j.c_plus = cp;
        j.c_minus = cm;
        j.lambda_plus = lp;
        j.lambda_minus = lm;
        j.validate();
        return j;
    }
    // Upward jumps, mean size 1/rate.
    static JumpSpec exponential_positive(double c, double rate) {
        JumpSpec j;
        j.family = JumpFamily::ExponentialPositive;
        j.c_minus = c;
        j.lambda_minus = -rate;
        j.validate();
        return j;
    }
    // Downward jumps, mean size 1/rate.
    static JumpSpec exponential_negative(double c, double rate) {
        JumpSpec j;
        j.family = JumpFamily::ExponentialNegative;
        j.c_plus = c;
        j.lambda_plus = rate;
        j.validate();
        return j;
    }
    static JumpSpec custom_symbol(const std::string& expr) {
        JumpSpec j;
        j.family = JumpFamily::Custom;
        j.custom = std::make_shared<RationalSymbol>(RationalSymbol::parse(expr));
        j.set_custom_strip();
        j.validate();
        return j;
    }
    static JumpSpec custom_symbol(RationalSymbol r) {
        JumpSpec j;
        j.family = JumpFamily::Custom;
        j.custom = std::make_shared<RationalSymbol>(std::move(r));
        j.set_custom_strip();
        j.validate();
        return j;
    }

    bool is_none() const { return family == JumpFamily::None; }
    bool exponential_type() const {
        return family == JumpFamily::DoubleExponential || family == JumpFamily::ExponentialPositive ||
               family == JumpFamily::ExponentialNegative;
    }

    Strip strip() const { return {lambda_minus, lambda_plus}; }

    void validate() const {
        if (family == JumpFamily::None || family == JumpFamily::Custom) {
            if (family == JumpFamily::Custom) {
                if (!custom) throw ValidationError("jump.expr", "missing expression");
                if (!(lambda_minus < 0.0 && 0.0 < lambda_plus))
                    throw ValidationError("jump.expr", "symbol has a pole on the real axis");
                cplx at0 = (*custom)(0.0);
                if (!(std::abs(at0) <= 1e-12)) throw ValidationError("jump.expr", "symbol must vanish at xi = 0");
            }
            return;
        }
        if (!(c_plus >= 0.0) || !std::isfinite(c_plus)) throw ValidationError("jump.c_plus", "must be >= 0");
        if (!(c_minus >= 0.0) || !std::isfinite(c_minus)) throw ValidationError("jump.c_minus", "must be >= 0");
        if (family == JumpFamily::DoubleExponential || family == JumpFamily::ExponentialNegative)
            if (!(lambda_plus > 0.0) || !std::isfinite(lambda_plus))
                throw ValidationError("jump.lambda_plus", "must be > 0");
        if (family == JumpFamily::DoubleExponential || family == JumpFamily::ExponentialPositive)
            if (!(lambda_minus < 0.0) || !std::isfinite(lambda_minus))
                throw ValidationError("jump.lambda_minus", "must be < 0");
    }

    // Poles of L_J in the xi plane.
    std::vector<cplx> poles() const {
        std::vector<cplx> p;
        if (exponential_type()) {
            if (c_plus != 0.0 && std::isfinite(lambda_plus)) p.push_back(I * lambda_plus);
            if (c_minus != 0.0 && std::isfinite(lambda_minus)) p.push_back(I * lambda_minus);
        } else if (family == JumpFamily::Custom) {
            p = custom->poles_xi();
        }
        return p;
    }

private:
    void set_custom_strip() {
        lambda_plus = INF;
        lambda_minus = -INF;
        for (cplx p : custom->poles_xi()) {
            if (p.imag() > 0.0) lambda_plus = std::min(lambda_plus, p.imag());
            else lambda_minus = std::max(lambda_minus, p.imag());
        }
    }
};

// L_J without strip checks, for internal callers that already know the point
// is admissible (e.g. parameter fits on a fixed grid).
inline cplx symbol_LJ_unchecked(const JumpSpec& j, cplx xi) {
    switch (j.family) {
        case JumpFamily::None: return 0.0;
        case JumpFamily::Custom: return (*j.custom)(xi);
        default: return detail::de_symbol(j.c_plus, j.c_minus, j.lambda_plus, j.lambda_minus, xi);
    }
}

inline cplx symbol_LJ(const JumpSpec& j, cplx xi) {
    if (j.family == JumpFamily::None) return 0.0;
    const double im = xi.imag();
    if (!(im < j.lambda_plus && im > j.lambda_minus))
        throw NumericalError(ErrorCode::StripViolation,
                             "L_J evaluated outside its strip at Im xi = " + std::to_string(im));
    for (cplx p : j.poles()) {
        double tol = 1e-10 * std::max(1.0, std::abs(p));
        if (std::abs(xi - p) < tol)
            throw NumericalError(ErrorCode::PoleProximity, "L_J evaluated at a pole");
    }
    return symbol_LJ_unchecked(j, xi);
}

// L_J(-i a) - L_J(xi - i a) shifted symbol: xi -> L_J(xi - i a) - L_J(-i a).
// For exponential families this stays in the family with rescaled parameters.
inline JumpSpec shift_jump(const JumpSpec& j, double a) {
    if (a == 0.0 || j.is_none()) return j;
    const double b = -a;  // shift point -i a = i b
    if (!(b < j.lambda_plus && b > j.lambda_minus))
        throw NumericalError(ErrorCode::StripViolation, "measure-change point lies outside the jump strip");
    if (j.family == JumpFamily::Custom) return JumpSpec::custom_symbol(j.custom->shifted(a));
    JumpSpec s = j;
    if (j.c_plus != 0.0) {
        s.c_plus = j.c_plus * j.lambda_plus / (j.lambda_plus - b);
        s.lambda_plus = j.lambda_plus - b;
    } else if (std::isfinite(j.lambda_plus)) {
        s.lambda_plus = j.lambda_plus - b;
    }
    if (j.c_minus != 0.0) {
        const double mu = -j.lambda_minus;
        s.c_minus = j.c_minus * mu / (mu + b);
        s.lambda_minus = j.lambda_minus - b;
    } else if (std::isfinite(j.lambda_minus)) {
        s.lambda_minus = j.lambda_minus - b;
    }
    return s;
}

struct SymbolEval {
    int j = 0;
    cplx value;
    Strip strip;
};

inline SymbolEval evaluate_symbol(const ModelSpec& m, const JumpSpec& jump, int j, cplx xi) {
    // j = -1 selects the jump symbol
    if (j < 0) return {j, symbol_LJ(jump, xi), jump.strip()};
    return {j, symbol_L(m, j, xi), Strip{}};
}

// Jump symbol of a MultiOU model: L_J(<v, xi>).
inline cplx symbol_LJ(const ModelSpec& m, const JumpSpec& j, const CVec& xi) {
    if (m.kind != ModelKind::MultiOU) return symbol_LJ(j, xi(0));
    return symbol_LJ(j, (m.jump_direction.cast<cplx>().transpose() * xi)(0));
}

}  // namespace twisted_affine
