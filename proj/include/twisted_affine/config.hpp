#pragma once

#include "twisted_affine/estimator.hpp"
#include "twisted_affine/pricer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace twisted_affine {

struct EstimationConfig {
    std::string curve_path;  // CSV with header strike,price
    std::optional<double> omega;
    std::optional<JumpFamily> family;
    double xi_max = 10.0;
    int points_per_unit = 20;
    std::optional<bool> normalize;
};

struct RunConfig {
    ModelSpec model;
    JumpSpec jump;
    Eigen::VectorXd x;
    std::optional<OptionStyle> style;
    ModelForm form = ModelForm::Exponential;
    std::vector<double> strikes;
    std::optional<double> maturity;
    Contour contour;
    std::optional<double> omega;
    ExpansionOptions expansion;
    std::optional<SubordinatorSpec> subordinator;
    std::optional<EstimationConfig> estimation;
    std::string output;

    double x_scalar() const { return x.size() > 0 ? x(0) : 0.0; }

    // option section for pricing subcommands
    void require_option() const {
        if (!style) throw ValidationError("option.style", "missing");
        if (!maturity) throw ValidationError("option.maturity", "missing");
        if (strikes.empty()) throw ValidationError("option.strike", "missing");
        for (double K : strikes) OptionSpec{*style, K, *maturity, form}.validate();
    }
    OptionSpec option(double K) const { return OptionSpec{*style, K, *maturity, form}; }
};

namespace detail {

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, s.find_last_not_of(" \t\r\n") - a + 1);
}

inline double parse_number(const std::string& field, const std::string& text) {
    const std::string t = trim(text);
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw ValidationError(field, "not a number: '" + t + "'");
    }
    if (pos != t.size()) throw ValidationError(field, "not a number: '" + t + "'");
    return v;
}

inline std::vector<double> parse_list(const std::string& field, const std::string& text, char sep = ',') {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!trim(item).empty()) out.push_back(parse_number(field, item));
    return out;
}

// rows separated by ';', entries by ','
inline Eigen::MatrixXd parse_matrix(const std::string& field, const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string row;
    while (std::getline(ss, row, ';'))
        if (!trim(row).empty()) rows.push_back(parse_list(field, row));
    if (rows.empty()) throw ValidationError(field, "empty matrix");
    Eigen::MatrixXd M(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw ValidationError(field, "ragged matrix");
        for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
    }
    return M;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    Eigen::VectorXd r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r(i) = v[i];
    return r;
}

class Section {
public:
    Section(const boost::property_tree::ptree* t, std::string name) : t_(t), name_(std::move(name)) {}

    bool present() const { return t_ != nullptr; }
    std::string path(const std::string& key) const { return name_ + "." + key; }

    std::optional<std::string> get_str(const std::string& key) const {
        if (!t_) return std::nullopt;
        auto v = t_->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return trim(*v);
    }
    std::string str(const std::string& key) const {
        auto v = get_str(key);
        if (!v) throw ValidationError(path(key), "missing");
        return *v;
    }
    std::optional<double> get_num(const std::string& key) const {
        auto v = get_str(key);
        if (!v) return std::nullopt;
        return parse_number(path(key), *v);
    }
    double num(const std::string& key) const { return parse_number(path(key), str(key)); }
    double num(const std::string& key, double fallback) const { return get_num(key).value_or(fallback); }
    std::optional<bool> get_bool(const std::string& key) const {
        auto v = get_str(key);
        if (!v) return std::nullopt;
        const std::string s = lower(*v);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ValidationError(path(key), "expected true or false");
    }

private:
    const boost::property_tree::ptree* t_;
    std::string name_;
};

inline ModelSpec parse_model(const Section& s) {
    if (!s.present()) throw ValidationError("model", "section missing");
    const std::string kind = lower(s.str("kind"));
    if (kind == "multi_ou") {
        Eigen::MatrixXd K = parse_matrix(s.path("kappa"), s.str("kappa"));
        Eigen::MatrixXd S = parse_matrix(s.path("sigma"), s.str("sigma"));
        Eigen::VectorXd th = to_vector(parse_list(s.path("theta"), s.str("theta")));
        Eigen::VectorXd d = s.get_str("d") ? to_vector(parse_list(s.path("d"), *s.get_str("d"))) : Eigen::VectorXd();
        Eigen::VectorXd dir = s.get_str("jump_direction")
                                  ? to_vector(parse_list(s.path("jump_direction"), *s.get_str("jump_direction")))
                                  : Eigen::VectorXd();
        return ModelSpec::multi_ou(K, th, S, d, s.num("d0", 0.0), dir);
    }
    ModelKind k;
    if (kind == "ou") k = ModelKind::OU;
    else if (kind == "vasicek") k = ModelKind::Vasicek;
    else if (kind == "square_root") k = ModelKind::SquareRoot;
    else if (kind == "cir") k = ModelKind::CIR;
    else throw ValidationError(s.path("kind"), "unknown model kind '" + kind + "'");
    ModelSpec m;
    m.kind = k;
    m.sigma = s.num("sigma");
    m.kappa = s.num("kappa");
    m.theta = s.num("theta", 0.0);
    m.validate();
    return m;
}

inline JumpFamily parse_family(const std::string& field, const std::string& name) {
    const std::string f = lower(name);
    if (f == "none") return JumpFamily::None;
    if (f == "double_exponential") return JumpFamily::DoubleExponential;
    if (f == "exponential_positive") return JumpFamily::ExponentialPositive;
    if (f == "exponential_negative") return JumpFamily::ExponentialNegative;
    if (f == "custom") return JumpFamily::Custom;
    throw ValidationError(field, "unknown jump family '" + name + "'");
}

inline JumpSpec parse_jump(const Section& s) {
    if (!s.present()) return JumpSpec::none();
    JumpSpec j;
    switch (parse_family(s.path("family"), s.str("family"))) {
        case JumpFamily::None: return JumpSpec::none();
        case JumpFamily::DoubleExponential:
            j = JumpSpec::double_exponential(s.num("c_plus"), s.num("c_minus"), s.num("lambda_plus"),
                                             s.num("lambda_minus"));
            break;
        case JumpFamily::ExponentialPositive: j = JumpSpec::exponential_positive(s.num("c"), s.num("rate")); break;
        case JumpFamily::ExponentialNegative: j = JumpSpec::exponential_negative(s.num("c"), s.num("rate")); break;
        case JumpFamily::Custom: j = JumpSpec::custom_symbol(s.get_str("symbol") ? s.str("symbol") : s.str("expr")); break;
    }
    return j;
}

inline SubordinatorSpec parse_subordinator(const Section& s) {
    SubordinatorSpec sub;
    sub.gamma = s.num("gamma", 1.0);
    const std::string f = lower(s.get_str("family").value_or("none"));
    if (f == "none") sub.family = SubordinatorFamily::None;
    else if (f == "gamma") sub.family = SubordinatorFamily::Gamma;
    else if (f == "inverse_gaussian") sub.family = SubordinatorFamily::InverseGaussian;
    else if (f == "tempered_stable") sub.family = SubordinatorFamily::TemperedStable;
    else throw ValidationError(s.path("family"), "unknown subordinator family '" + f + "'");
    if (sub.family != SubordinatorFamily::None) {
        sub.shape = s.num("shape");
        sub.rate = s.num("rate");
    }
    if (sub.family == SubordinatorFamily::TemperedStable) sub.stable_alpha = s.num("alpha");
    sub.validate();
    return sub;
}

}  // namespace detail

inline RunConfig parse_config_tree(const boost::property_tree::ptree& pt) {
    auto section = [&](const std::string& name) {
        auto c = pt.get_child_optional(name);
        return detail::Section(c ? &*c : nullptr, name);
    };
    RunConfig c;
    c.model = detail::parse_model(section("model"));
    c.jump = detail::parse_jump(section("jump"));
    c.jump.validate();

    detail::Section st = section("state");
    const int dim = c.model.dim();
    c.x = Eigen::VectorXd::Zero(dim);
    if (auto xs = st.get_str("x")) {
        Eigen::VectorXd v = detail::to_vector(detail::parse_list(st.path("x"), *xs));
        if (v.size() != dim) throw ValidationError(st.path("x"), "dimension does not match the model");
        c.x = v;
    }

    detail::Section op = section("option");
    if (op.present()) {
        if (auto s = op.get_str("style")) {
            const std::string v = detail::lower(*s);
            if (v == "put") c.style = OptionStyle::Put;
            else if (v == "call") c.style = OptionStyle::Call;
            else throw ValidationError(op.path("style"), "expected put or call");
        }
        if (auto f = op.get_str("form")) {
            const std::string v = detail::lower(*f);
            if (v == "exponential") c.form = ModelForm::Exponential;
            else if (v == "arithmetic") c.form = ModelForm::Arithmetic;
            else throw ValidationError(op.path("form"), "expected exponential or arithmetic");
        }
        if (auto k = op.get_str("strike")) c.strikes = detail::parse_list(op.path("strike"), *k);
        // lo, hi, n: geometric for the exponential model, uniform otherwise
        if (auto g = op.get_str("strike_grid")) {
            std::vector<double> v = detail::parse_list(op.path("strike_grid"), *g);
            if (v.size() != 3 || !(v[1] > v[0]) || v[2] < 2 || v[2] != std::floor(v[2]))
                throw ValidationError(op.path("strike_grid"), "expected lo, hi, n with lo < hi and integer n >= 2");
            const bool geo = c.form == ModelForm::Exponential;
            if (geo && !(v[0] > 0.0)) throw ValidationError(op.path("strike_grid"), "lo must be > 0");
            const int n = static_cast<int>(v[2]);
            for (int i = 0; i < n; ++i) {
                const double u = static_cast<double>(i) / (n - 1);
                c.strikes.push_back(geo ? std::exp(std::log(v[0]) + u * (std::log(v[1]) - std::log(v[0])))
                                        : v[0] + u * (v[1] - v[0]));
            }
        }
        c.maturity = op.get_num("maturity");
        if (c.maturity && !(*c.maturity > 0.0)) throw ValidationError(op.path("maturity"), "must be > 0");
    }

    detail::Section ct = section("contour");
    if (ct.present()) {
        c.omega = ct.get_num("omega");
        c.contour.half_width = ct.num("half_width", 0.0);
        c.contour.n_points = static_cast<int>(ct.num("points", 0.0));
        c.contour.sinh_scale = ct.num("sinh_scale", 1.0);
        const std::string rule = detail::lower(ct.get_str("rule").value_or("trapezoid"));
        if (rule == "trapezoid") c.contour.rule = QuadRule::Trapezoid;
        else if (rule == "sinh") c.contour.rule = QuadRule::SinhAccelerated;
        else throw ValidationError(ct.path("rule"), "expected trapezoid or sinh");
    }

    detail::Section ex = section("expansion");
    if (ex.present()) {
        const double N = ex.num("N", 40.0);
        if (N != std::floor(N) || N < 0 || N > 200) throw ValidationError(ex.path("N"), "must be an integer in [0, 200]");
        c.expansion.N = static_cast<int>(N);
        c.expansion.check_convergence = ex.get_bool("check_convergence").value_or(true);
    }

    detail::Section sb = section("subordinator");
    if (sb.present()) c.subordinator = detail::parse_subordinator(sb);

    detail::Section es = section("estimation");
    if (es.present()) {
        EstimationConfig e;
        e.curve_path = es.get_str("curve").value_or("");
        e.omega = es.get_num("omega");
        if (auto f = es.get_str("family")) {
            JumpFamily fam = detail::parse_family(es.path("family"), *f);
            if (fam != JumpFamily::None) e.family = fam;
        }
        e.xi_max = es.num("xi_max", 10.0);
        if (!(e.xi_max > 0.0)) throw ValidationError(es.path("xi_max"), "must be > 0");
        e.points_per_unit = static_cast<int>(es.num("points_per_unit", 20.0));
        if (e.points_per_unit < 2) throw ValidationError(es.path("points_per_unit"), "must be >= 2");
        e.normalize = es.get_bool("normalize");
        c.estimation = e;
    }

    detail::Section out = section("output");
    c.output = out.get_str("path").value_or("");
    return c;
}

inline RunConfig parse_config_string(const std::string& text) {
    boost::property_tree::ptree pt;
    std::istringstream is(text);
    try {
        boost::property_tree::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ValidationError("config", e.message() + " at line " + std::to_string(e.line()));
    }
    return parse_config_tree(pt);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str());
}

// CSV of (strike, price). A header row, if present, selects the columns named
// strike and price, so price-ift output can be read directly.
inline std::pair<std::vector<double>, std::vector<double>> read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("estimation.curve", "cannot open '" + path + "'");
    std::vector<double> K, V;
    std::size_t ik = 0, iv = 1;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (K.empty() && std::isalpha(static_cast<unsigned char>(line[0]))) {
            std::vector<std::string> cols;
            std::stringstream ss(line);
            std::string col;
            while (std::getline(ss, col, ',')) cols.push_back(detail::lower(detail::trim(col)));
            auto pos = [&](const char* name) {
                auto it = std::find(cols.begin(), cols.end(), name);
                if (it == cols.end()) throw ValidationError("estimation.curve", std::string("no column '") + name + "'");
                return static_cast<std::size_t>(it - cols.begin());
            };
            ik = pos("strike");
            iv = pos("price");
            continue;
        }
        const std::string where = "curve line " + std::to_string(lineno);
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() <= std::max(ik, iv)) throw ValidationError(where, "too few columns");
        K.push_back(detail::parse_number(where, cells[ik]));
        V.push_back(detail::parse_number(where, cells[iv]));
    }
    return {K, V};
}

}  // namespace twisted_affine
