#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "fieldattr/regime.hpp"
#include "helpers.hpp"

using namespace fieldattr;

namespace {

// Exhaustive marginalization over all 2^(T-1) regime paths; one hidden state
// per transition, stationary initial law, shared OU variance. Long double
// accumulation in plain (non-log) space.
double enum_loglik(const RegimeParams& p, const std::vector<double>& psi,
                   const std::vector<double>* field) {
    const int m = static_cast<int>(psi.size()) - 1;   // transitions
    const long double a = std::exp(-(long double)p.theta);
    const long double var = (long double)p.sigma * p.sigma * (1 - a * a) / (2 * (long double)p.theta);
    const long double norm = 1.0L / std::sqrt(2 * 3.141592653589793238462643383279503L * var);
    long double pi0[2];
    long double denom = (long double)p.p_cs + p.p_sc;
    if (denom > 0) {
        pi0[0] = p.p_sc / denom;
        pi0[1] = p.p_cs / denom;
    } else {
        pi0[0] = pi0[1] = 0.5L;
    }
    const long double trans[2][2] = {{1 - (long double)p.p_cs, (long double)p.p_cs},
                                     {(long double)p.p_sc, 1 - (long double)p.p_sc}};
    const long double mu[2] = {p.mu_calm, p.mu_stress};
    long double total = 0;
    for (int path = 0; path < (1 << m); ++path) {
        long double w = 0;   // log weight of this path
        int prev = -1;
        for (int j = 0; j < m; ++j) {
            int s = (path >> j) & 1;
            w += std::log(j == 0 ? pi0[s] : trans[prev][s]);
            long double v = field ? (*field)[static_cast<std::size_t>(j)] : 0.0L;
            long double eq = mu[s] + ((long double)p.beta / p.theta) * v;
            long double mean = a * psi[static_cast<std::size_t>(j)] + (1 - a) * eq;
            long double z = psi[static_cast<std::size_t>(j) + 1] - mean;
            w += std::log(norm) - z * z / (2 * var);
            prev = s;
        }
        total += std::exp(w);
    }
    return static_cast<double>(std::log(total));
}

// Synthetic two-regime OU data from an oracle-side generator.
struct RegimeWorld {
    std::vector<double> psi;
    std::vector<int> states;
};

RegimeWorld gen_regime(std::size_t n, const RegimeParams& p, const std::vector<double>* field,
                       std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    double a = std::exp(-p.theta);
    double sd = p.sigma * std::sqrt((1 - a * a) / (2 * p.theta));
    RegimeWorld w;
    w.psi.resize(n);
    w.states.resize(n);
    int s = ud(g) < p.p_sc / (p.p_cs + p.p_sc) ? 0 : 1;
    w.psi[0] = (s == 0 ? p.mu_calm : p.mu_stress);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        w.states[t] = s;
        double v = field ? (*field)[t] : 0.0;
        double eq = (s == 0 ? p.mu_calm : p.mu_stress) + p.beta / p.theta * v;
        w.psi[t + 1] = a * w.psi[t] + (1 - a) * eq + sd * nd(g);
        s = (s == 0) ? (ud(g) < p.p_cs ? 1 : 0) : (ud(g) < p.p_sc ? 0 : 1);
    }
    w.states[n - 1] = s;
    return w;
}

}  // namespace

TEST(Regime, StatsIdentities) {
    RegimeParams p;
    p.p_cs = 0.01170;
    p.p_sc = 0.8940;
    p.theta = 0.02348;
    p.sigma = 0.01;
    RegimeStats s = regime_stats(p);
    EXPECT_NEAR(s.expected_calm_days, 85.5, 85.5 * 0.005);
    EXPECT_NEAR(s.expected_stress_days, 1.12, 1.12 * 0.005);
    EXPECT_NEAR(s.stationary_calm, 0.9871, 0.9871 * 0.005);
    EXPECT_NEAR(s.stationary_stress, 0.0129, 0.0129 * 0.005);
    EXPECT_NEAR(s.calm_relaxation_days, 42.6, 42.6 * 0.005);
    // Long-double reference arithmetic.
    EXPECT_NEAR(s.expected_calm_days, static_cast<double>(1.0L / 0.01170L), 1e-10);
    EXPECT_NEAR(s.stationary_calm, static_cast<double>(0.8940L / (0.01170L + 0.8940L)), 1e-12);
    EXPECT_NEAR(s.stationary_calm + s.stationary_stress, 1.0, 1e-12);
}

TEST(Regime, StatsGuards) {
    RegimeParams p;
    p.p_cs = 0.0;
    p.p_sc = 0.5;
    p.theta = 0.1;
    EXPECT_THROW(regime_stats(p), std::runtime_error);
    p.p_cs = 0.5;
    p.theta = 0.0;
    EXPECT_THROW(regime_stats(p), std::runtime_error);
}

TEST(Regime, HamiltonMatchesEnumerationBare) {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        RegimeParams p;
        p.theta = 0.02 + 0.3 * ud(g);
        p.mu_calm = 0.2 + 0.2 * ud(g);
        p.mu_stress = p.mu_calm + 0.1 + 0.3 * ud(g);
        p.sigma = 0.005 + 0.03 * ud(g);
        p.p_cs = 0.02 + 0.4 * ud(g);
        p.p_sc = 0.02 + 0.4 * ud(g);
        RegimeWorld w = gen_regime(10, p, nullptr, 100 + rep);
        ObservableSeries s = tst::make_series(w.psi);
        double got = hamilton_loglik(p, s).loglik;
        double want = enum_loglik(p, w.psi, nullptr);
        ASSERT_NEAR(got, want, 1e-8) << "rep " << rep;
    }
}

TEST(Regime, HamiltonMatchesEnumerationWithField) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        RegimeParams p;
        p.theta = 0.05 + 0.2 * ud(g);
        p.mu_calm = 0.25;
        p.mu_stress = 0.5 + 0.2 * ud(g);
        p.sigma = 0.01 + 0.02 * ud(g);
        p.p_cs = 0.05 + 0.3 * ud(g);
        p.p_sc = 0.05 + 0.3 * ud(g);
        p.beta = -0.01 + 0.02 * ud(g);
        auto field = tst::ar1(10, 0.9, 3.0, 0.1, 500 + rep);
        RegimeWorld w = gen_regime(10, p, &field, 900 + rep);
        ObservableSeries s = tst::make_series(w.psi);
        ObservableSeries f = tst::make_series(field, "v");
        double got = hamilton_loglik(p, s, &f).loglik;
        double want = enum_loglik(p, w.psi, &field);
        ASSERT_NEAR(got, want, 1e-8) << "rep " << rep;
    }
}

TEST(Regime, HamiltonGuards) {
    RegimeParams p;
    p.theta = 0.1;
    p.sigma = 0.01;
    p.p_cs = 0.1;
    p.p_sc = 0.2;
    p.mu_calm = 0.3;
    p.mu_stress = 0.5;
    ObservableSeries s = tst::make_series({0.3, 0.31, 0.32});
    EXPECT_NO_THROW(hamilton_loglik(p, s));
    RegimeParams bad = p;
    bad.theta = -0.1;
    EXPECT_THROW(hamilton_loglik(bad, s), std::runtime_error);
    bad = p;
    bad.p_cs = 1.5;
    EXPECT_THROW(hamilton_loglik(bad, s), std::runtime_error);
    ObservableSeries f = tst::make_series({1.0, 2.0});
    EXPECT_THROW(hamilton_loglik(p, s, &f), std::runtime_error);  // misaligned
}

TEST(Regime, FitRecoversSeparatedRegimes) {
    RegimeParams truth;
    truth.theta = 0.08;
    truth.mu_calm = 0.30;
    truth.mu_stress = 0.55;
    truth.sigma = 0.012;
    truth.p_cs = 0.02;
    truth.p_sc = 0.10;
    RegimeWorld w = gen_regime(3000, truth, nullptr, 21);
    ObservableSeries s = tst::make_series(w.psi);
    RegimeFit f = fit_rs(false, s, nullptr, 1);
    EXPECT_TRUE(f.converged);
    EXPECT_EQ(f.k, 6);
    EXPECT_LE(f.params.mu_calm, f.params.mu_stress);
    // MLE dominance against the generating parameters.
    EXPECT_GE(f.loglik, hamilton_loglik(truth, s).loglik - 1e-3);
    EXPECT_NEAR(f.params.mu_calm, truth.mu_calm, 0.04);
    EXPECT_NEAR(f.params.mu_stress, truth.mu_stress, 0.06);
    RegimeStats st = regime_stats(f.params);
    RegimeStats want = regime_stats(truth);
    EXPECT_NEAR(st.stationary_calm, want.stationary_calm, 0.08);
    // Information criteria arithmetic.
    EXPECT_NEAR(f.bic, 6.0 * std::log(static_cast<double>(f.n_trans)) - 2.0 * f.loglik, 1e-9);
    EXPECT_NEAR(f.aic, 12.0 - 2.0 * f.loglik, 1e-9);
}

TEST(Regime, LrtArithmeticAndNesting) {
    RegimeFit nested, full;
    nested.loglik = -100.0;
    nested.k = 6;
    full.loglik = -95.0;
    full.k = 7;
    LrtResult r = lrt(nested, full);
    EXPECT_NEAR(r.chi2, 10.0, 1e-12);
    EXPECT_EQ(r.df, 1);
    EXPECT_NEAR(r.p, chi2_sf(10.0, 1.0), 1e-12);
    EXPECT_THROW(lrt(full, nested), std::runtime_error);
}

TEST(Regime, FieldLrtDetectsPlantedCoupling) {
    const std::size_t n = 2500;
    auto field = tst::ar1(n, 0.97, 3.0, 0.08, 31);
    RegimeParams truth;
    truth.theta = 0.06;
    truth.mu_calm = -0.8;   // with beta v / theta ~ +1.1 the level sits near 0.3
    truth.mu_stress = -0.55;
    truth.sigma = 0.012;
    truth.p_cs = 0.02;
    truth.p_sc = 0.10;
    truth.beta = 0.022;
    RegimeWorld w = gen_regime(n, truth, &field, 32);
    ObservableSeries s = tst::make_series(w.psi);
    ObservableSeries f = tst::make_series(field, "v");
    RegimeFit bare = fit_rs(false, s, nullptr, 2);
    RegimeFit with = fit_rs(true, s, &f, 2);
    EXPECT_EQ(with.k, 7);
    LrtResult r = lrt(bare, with);
    EXPECT_LT(r.p, 0.01);

    // Null world: no coupling; the statistic must stay chi-square small.
    RegimeParams null_truth = truth;
    null_truth.beta = 0.0;
    null_truth.mu_calm = 0.30;
    null_truth.mu_stress = 0.55;
    RegimeWorld wn = gen_regime(n, null_truth, nullptr, 33);
    ObservableSeries sn = tst::make_series(wn.psi);
    ObservableSeries fn = tst::make_series(tst::ar1(n, 0.97, 3.0, 0.08, 34), "v");
    LrtResult rn = lrt(fit_rs(false, sn, nullptr, 3), fit_rs(true, sn, &fn, 3));
    EXPECT_LT(rn.chi2, 15.0);
}

TEST(Regime, FitGuards) {
    ObservableSeries tiny = tst::make_series({0.1, 0.2, 0.3});
    EXPECT_THROW(fit_rs(false, tiny, nullptr, 1), std::runtime_error);
    ObservableSeries s = tst::make_series(tst::ar1(100, 0.9, 0.4, 0.01, 41));
    EXPECT_THROW(fit_rs(true, s, nullptr, 1), std::runtime_error);  // field model, no field
}
