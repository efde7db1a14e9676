#include "twisted_affine/pricer.hpp"

#include <gtest/gtest.h>

using namespace twisted_affine;

namespace {

const JumpSpec de = JumpSpec::double_exponential(1.0, 0.5, 10.0, -10.0);

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Payoff, CallTransformAtMinusTwoI) {
    cplx v = payoff_ft0(ModelForm::Exponential, cplx(0.0, -2.0));
    EXPECT_NEAR(v.real(), 0.5, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

TEST(Payoff, ExponentialTransformsMatchIntegrals) {
    for (double K : {0.7, 1.0, 1.6}) {
        const double k = std::log(K);
        OptionSpec call{OptionStyle::Call, K, 1.0, ModelForm::Exponential};
        OptionSpec put{OptionStyle::Put, K, 1.0, ModelForm::Exponential};
        for (double xr : {0.0, 1.3, -4.0}) {
            cplx xc(xr, -2.0), xp(xr, 1.5);
            auto fc = [&](double x) { return std::exp(-I * x * xc) * (std::exp(x) - K); };
            auto fp = [&](double x) { return std::exp(-I * x * xp) * (K - std::exp(x)); };
            cplx ic = integrate_gk(fc, k, k + 50.0, 1e-14);
            cplx ip = integrate_gk(fp, k - 50.0, k, 1e-14);
            EXPECT_LT(std::abs(payoff_ft(call, xc) - ic), 1e-12);
            EXPECT_LT(std::abs(payoff_ft(put, xp) - ip), 1e-12);
        }
    }
}

TEST(Payoff, StrikeScaling) {
    OptionSpec a{OptionStyle::Put, 1.0, 1.0, ModelForm::Exponential}, b{OptionStyle::Put, 2.5, 1.0, ModelForm::Exponential};
    const cplx xi(0.8, 0.6);
    cplx ratio = payoff_ft(b, xi) / payoff_ft(a, xi);
    EXPECT_LT(std::abs(ratio - std::exp((1.0 - I * xi) * std::log(2.5))), 1e-14);
}

TEST(Payoff, ArithmeticPut) {
    OptionSpec p{OptionStyle::Put, 0.0, 1.0, ModelForm::Arithmetic};
    cplx v = payoff_ft(p, I);
    EXPECT_NEAR(v.real(), 1.0, 1e-15);
    auto f = [&](double x) { return std::exp(-I * x * cplx(0.4, 1.0)) * (0.3 - x); };
    OptionSpec p3{OptionStyle::Put, 0.3, 1.0, ModelForm::Arithmetic};
    EXPECT_LT(std::abs(payoff_ft(p3, cplx(0.4, 1.0)) - integrate_gk(f, 0.3 - 60.0, 0.3, 1e-14)), 1e-12);
}

TEST(Payoff, DomainErrors) {
    EXPECT_THROW(payoff_ft0(ModelForm::Exponential, 1.0), NumericalError);
    EXPECT_THROW(payoff_ft0(ModelForm::Exponential, -I), NumericalError);
    OptionSpec put{OptionStyle::Put, 1.0, 1.0, ModelForm::Exponential};
    EXPECT_THROW(check_omega(put, de.strip(), -0.5), ValidationError);
    EXPECT_THROW(check_omega(put, de.strip(), 10.5), ValidationError);
    OptionSpec call{OptionStyle::Call, 1.0, 1.0, ModelForm::Exponential};
    EXPECT_THROW(check_omega(call, de.strip(), -0.5), ValidationError);
    EXPECT_NO_THROW(check_omega(call, de.strip(), -2.0));
    EXPECT_THROW((OptionSpec{OptionStyle::Put, -1.0, 1.0, ModelForm::Exponential}.validate()), ValidationError);
}

TEST(PriceIft, DegenerateMaturity) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    OptionSpec put{OptionStyle::Put, 1.0, 1e-8, ModelForm::Exponential};
    // at-the-money: value of order sigma sqrt(T)
    EXPECT_LT(std::abs(price_ift(m, JumpSpec::none(), put, 0.0).price), 1e-5);
    for (double K : {0.7, 1.3}) {
        PriceResult r = price_ift(m, JumpSpec::none(), {OptionStyle::Put, K, 1e-8, ModelForm::Exponential}, 0.0);
        const double intrinsic = std::max(K - 1.0, 0.0);
        EXPECT_NEAR(r.price, intrinsic, 1e-6);
        EXPECT_LE(std::abs(r.price - intrinsic), r.est_error);
    }
}

TEST(PriceIft, BachelierForArithmeticOu) {
    const double s = 0.2, k = 0.5, th = 0.1, x = 0.3, T = 2.0;
    ModelSpec m = ModelSpec::ou(s, k, th);
    const double mu = th + (x - th) * std::exp(-k * T), sd = std::sqrt(s * s * (1.0 - std::exp(-2.0 * k * T)) / (2.0 * k));
    for (double K : {0.0, 0.2, 0.5}) {
        const double d = (K - mu) / sd;
        const double put = (K - mu) * norm_cdf(d) + sd * std::exp(-0.5 * d * d) / std::sqrt(2.0 * PI);
        const double call = put + mu - K;
        EXPECT_NEAR(price_ift(m, JumpSpec::none(), {OptionStyle::Put, K, T, ModelForm::Arithmetic}, x).price, put, 1e-12);
        EXPECT_NEAR(price_ift(m, JumpSpec::none(), {OptionStyle::Call, K, T, ModelForm::Arithmetic}, x).price, call, 1e-12);
    }
}

TEST(PriceIft, ContourShiftInvariance) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    OptionSpec put{OptionStyle::Put, 1.0, 2.0, ModelForm::Exponential};
    const double ref = price_ift(m, de, put, 0.0, {}, 1.0).price;
    for (double w : {0.3, 3.0, 7.0}) EXPECT_LT(std::abs(price_ift(m, de, put, 0.0, {}, w).price - ref), 1e-11);
}

TEST(PriceIft, PutCallParity) {
    // the square-root flow leaves any jump strip, so CIR is checked jump-free
    for (ModelSpec m : {ModelSpec::ou(0.2, 1.0, 0.0), ModelSpec::vasicek(0.1, 0.5, 0.05), ModelSpec::cir(0.2, 1.0, 0.1)}) {
        const JumpSpec& de = m.kind == ModelKind::CIR ? JumpSpec::none() : ::de;
        const double T = 3.0, x = 0.05;
        const double F = chf(m, de, T, x, -I).real(), D = chf(m, de, T, x, 0.0).real();
        for (double K : {0.8, 1.0, 1.25}) {
            double c = price_ift(m, de, {OptionStyle::Call, K, T, ModelForm::Exponential}, x).price;
            double p = price_ift(m, de, {OptionStyle::Put, K, T, ModelForm::Exponential}, x).price;
            EXPECT_LT(rel(c - p, F - K * D), 1e-8) << model_kind_name(m.kind);
            EXPECT_GE(p, std::max(K * D - F, 0.0) - 1e-14);
            EXPECT_GE(c, std::max(F - K * D, 0.0) - 1e-14);
        }
    }
}

TEST(PriceIft, StrikeBatchMatchesSingle) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    std::vector<double> ks = {0.8, 1.0, 1.2};
    auto batch = price_ift_strikes(m, de, OptionStyle::Put, ModelForm::Exponential, 2.0, 0.0, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        EXPECT_EQ(batch[i].method, "ift");
        EXPECT_LT(std::abs(batch[i].price - price_ift(m, de, {OptionStyle::Put, ks[i], 2.0, ModelForm::Exponential}, 0.0).price),
                  1e-13);
    }
}

TEST(PriceEigen, WeightSurrogateIsSingleTerm) {
    // price the payoff-independent coefficient structure: with no jumps the
    // twisted functions are the plain eigenfunctions
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    ExpansionTerms t = expansion_terms(m, JumpSpec::none(), {OptionStyle::Put, 1.0, 5.0, ModelForm::Exponential}, 0.1, {});
    EigenBasis b = build_basis(m);
    for (int n = 0; n <= 10; ++n) {
        EXPECT_NEAR(t.twisted[n].real(), eval_eigen(b, n, 0.1), 1e-12 * std::max(1.0, std::abs(eval_eigen(b, n, 0.1))));
        EXPECT_NEAR(t.lambda[n], b.eigenvalue(n), 1e-14);
    }
}

TEST(PriceEigen, AgreesWithIft) {
    for (ModelSpec m : {ModelSpec::ou(0.2, 1.0, 0.0), ModelSpec::vasicek(0.1, 0.5, 0.05)}) {
        for (const JumpSpec& j : {JumpSpec::none(), de}) {
            const double T = 5.0, x = 0.05;
            const double F = forward_price(m, j, T, x);
            for (OptionStyle st : {OptionStyle::Put, OptionStyle::Call}) {
                for (double r : {0.8, 1.0, 1.2}) {
                    OptionSpec o{st, r * F, T, ModelForm::Exponential};
                    double e = price_eigen(m, j, o, x).price, f = price_ift(m, j, o, x).price;
                    EXPECT_LT(rel(e, f), 1e-6) << model_kind_name(m.kind) << " " << jump_family_name(j.family);
                }
            }
        }
    }
}

TEST(PriceEigen, SquareRootFamilyAgreesWithIft) {
    const JumpSpec none = JumpSpec::none();
    for (ModelSpec m : {ModelSpec::square_root(0.2, 1.0, 0.1), ModelSpec::cir(0.2, 1.0, 0.1)}) {
        const double T = 5.0, x = 0.1;
        for (OptionStyle st : {OptionStyle::Put, OptionStyle::Call}) {
            OptionSpec o{st, forward_price(m, none, T, x), T, ModelForm::Exponential};
            EXPECT_LT(rel(price_eigen(m, none, o, x).price, price_ift(m, none, o, x).price), 1e-5);
        }
    }
}

TEST(PriceEigen, ShiftedLineThroughOrigin) {
    // kappa = 1 moves the default put line omega = 1 onto Im xi = 0
    const ModelSpec v = ModelSpec::vasicek(0.1, 1.0, 0.05);
    const OptionSpec o{OptionStyle::Put, forward_price(v, JumpSpec::none(), 2.0, 0.05), 2.0, ModelForm::Exponential};
    const double ift = price_ift(v, JumpSpec::none(), o, 0.05).price;
    EXPECT_LT(std::abs(price_eigen(v, JumpSpec::none(), o, 0.05).price / ift - 1.0), 1e-8);
}

TEST(PriceEigen, ArithmeticForm) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    OptionSpec o{OptionStyle::Put, 0.05, 4.0, ModelForm::Arithmetic};
    EXPECT_LT(rel(price_eigen(m, de, o, 0.0).price, price_ift(m, de, o, 0.0).price), 1e-6);
}

TEST(PriceEigen, LongMaturitySlopeIsLowestEigenvalue) {
    ModelSpec m = ModelSpec::vasicek(0.1, 0.5, 0.05);
    OptionSpec a{OptionStyle::Put, 1.0, 20.0, ModelForm::Exponential}, b{OptionStyle::Put, 1.0, 40.0, ModelForm::Exponential};
    ExpansionTerms t = expansion_terms(m, de, a, 0.0, {});
    const double slope = -(std::log(price_eigen(m, de, b, 0.0).price) - std::log(price_eigen(m, de, a, 0.0).price)) / 20.0;
    EXPECT_NEAR(slope, t.lambda[0], 1e-5);
}

TEST(PriceEigen, TailBoundCoversRemainder) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    OptionSpec o{OptionStyle::Put, 1.0, 2.0, ModelForm::Exponential};
    ExpansionOptions o40, o80;
    o40.N = 40;
    o80.N = 80;
    PriceResult r40 = price_eigen(m, de, o, 0.0, o40), r80 = price_eigen(m, de, o, 0.0, o80);
    EXPECT_GE(std::max(r40.est_error, 1e-14), std::abs(r40.price - r80.price));
    EXPECT_EQ(r40.n_terms, 41);
}

TEST(PriceEigen, ShortMaturityIsTruncationError) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    try {
        price_eigen(m, de, {OptionStyle::Put, 1.0, 0.01, ModelForm::Exponential}, 0.0);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.code(), ErrorCode::Truncation);
        EXPECT_NE(std::string(e.what()).find("price-ift"), std::string::npos);
    }
}

TEST(Laplace, ClosedFormsMatchLevyIntegrals) {
    std::vector<SubordinatorSpec> subs = {{0.0, SubordinatorFamily::Gamma, 1.5, 2.0, 0.5},
                                          {0.0, SubordinatorFamily::InverseGaussian, 0.8, 1.2, 0.5},
                                          {0.0, SubordinatorFamily::TemperedStable, 0.7, 1.5, 0.4}};
    for (const auto& s : subs) {
        EXPECT_EQ(laplace_exponent(s, 0.0), cplx(0.0));
        for (double l : {0.5, 3.0}) {
            // y = u^4 removes the algebraic singularity at the origin
            auto f = [&](double u) {
                const double y = u * u * u * u;
                return cplx(-std::expm1(-l * y) * levy_density(s, y) * 4.0 * u * u * u);
            };
            cplx ref = 0.0;
            for (double a = 0.0; a < 3.5; a += 0.25) ref += integrate_gk(f, a, a + 0.25, 1e-13);
            EXPECT_LT(std::abs(laplace_exponent(s, l) - ref), 1e-9) << subordinator_family_name(s.family);
        }
    }
    SubordinatorSpec drift{1.0, SubordinatorFamily::None};
    EXPECT_EQ(laplace_exponent(drift, 3.0), cplx(3.0));
    EXPECT_THROW(laplace_exponent(drift, -1.0), NumericalError);
    EXPECT_THROW((SubordinatorSpec{1.0, SubordinatorFamily::TemperedStable, 1.0, 1.0, 1.5}.validate()), ValidationError);
}

TEST(Subordination, DriftIsTimeChange) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    OptionSpec o{OptionStyle::Put, 1.0, 2.5, ModelForm::Exponential};
    OptionSpec o2{OptionStyle::Put, 1.0, 5.0, ModelForm::Exponential};
    SubordinatorSpec one{1.0, SubordinatorFamily::None}, two{2.0, SubordinatorFamily::None};
    EXPECT_NEAR(price_subordinated(m, de, one, o, 0.0).price, price_eigen(m, de, o, 0.0).price, 1e-15);
    EXPECT_NEAR(price_subordinated(m, de, two, o, 0.0).price, price_eigen(m, de, o2, 0.0).price, 1e-15);
}

TEST(Subordination, TermFactorsDecrease) {
    ModelSpec m = ModelSpec::ou(0.2, 1.0, 0.0);
    SubordinatorSpec g{0.2, SubordinatorFamily::Gamma, 3.0, 1.0, 0.5};
    ExpansionTerms t = expansion_terms(m, de, {OptionStyle::Put, 1.0, 5.0, ModelForm::Exponential}, 0.0, {});
    double prev = INF;
    for (double l : t.lambda) {
        double f = std::exp(-5.0 * laplace_exponent(g, l).real());
        EXPECT_LT(f, prev);
        prev = f;
    }
    PriceResult a = price_subordinated(m, de, g, {OptionStyle::Put, 1.0, 5.0, ModelForm::Exponential}, 0.0);
    EXPECT_GT(a.price, 0.0);
    EXPECT_EQ(a.method, "subordinated");
}
