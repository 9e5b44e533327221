#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "fieldattr/diagnostics.hpp"
#include "fieldattr/stats.hpp"
#include "helpers.hpp"

using namespace fieldattr;

namespace {

std::vector<long double> ref_acf(const std::vector<double>& x, long max_lag) {
    const long n = static_cast<long>(x.size());
    long double m = 0;
    for (double v : x) m += v;
    m /= n;
    long double c0 = 0;
    for (double v : x) c0 += (v - m) * (v - m);
    std::vector<long double> acf(static_cast<std::size_t>(max_lag) + 1, 1.0L);
    for (long l = 1; l <= max_lag; ++l) {
        long double c = 0;
        for (long t = 0; t + l < n; ++t) c += (x[static_cast<std::size_t>(t)] - m) * (x[static_cast<std::size_t>(t + l)] - m);
        acf[static_cast<std::size_t>(l)] = c / c0;
    }
    return acf;
}

ObservableSeries band_series(const std::vector<double>& v) { return tst::make_series(v, "vix"); }

}  // namespace

TEST(Diagnostics, AcfSummaryMatchesLongDoubleOracle) {
    auto x = tst::ar1(1000, 0.9, 5.0, 1.0, 11);
    ObservableSeries s = tst::make_series(x);
    AcfSummary a = acf_summary(s, 80);
    auto ref = ref_acf(x, 80);
    ASSERT_EQ(a.acf.size(), 81u);
    EXPECT_DOUBLE_EQ(a.acf[0], 1.0);
    for (std::size_t l = 1; l <= 80; ++l)
        EXPECT_NEAR(a.acf[l], static_cast<double>(ref[l]), 1e-12) << "lag " << l;

    const double thresh = std::exp(-1.0);
    long expect_ef = -1;
    for (long l = 1; l <= 80; ++l)
        if (static_cast<double>(ref[static_cast<std::size_t>(l)]) < thresh) { expect_ef = l; break; }
    ASSERT_TRUE(a.efolding_lag.has_value());
    EXPECT_EQ(*a.efolding_lag, expect_ef);

    long double i60 = 0, i90 = 0;
    for (long l = 1; l <= 60; ++l) i60 += ref[static_cast<std::size_t>(l)];
    for (long l = 1; l <= 80; ++l) i90 += ref[static_cast<std::size_t>(l)];   // truncated at max_lag
    EXPECT_NEAR(a.integrated_60, static_cast<double>(i60), 1e-10);
    EXPECT_NEAR(a.integrated_90, static_cast<double>(i90), 1e-10);
}

TEST(Diagnostics, AcfGuards) {
    ObservableSeries flat = tst::make_series(std::vector<double>(300, 2.0));
    EXPECT_THROW(acf_summary(flat, 50), std::runtime_error);
    ObservableSeries shorty = tst::make_series(tst::gaussian(50, 0.0, 1.0, 1));
    EXPECT_THROW(acf_summary(shorty, 50), std::runtime_error);
    // Alternating series: acf(1) < 0 < 1/e, so the e-folding lag is 1.
    std::vector<double> alt(400);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = (i % 2 == 0) ? 1.0 : -1.0;
    AcfSummary a = acf_summary(tst::make_series(alt), 10);
    ASSERT_TRUE(a.efolding_lag.has_value());
    EXPECT_EQ(*a.efolding_lag, 1);
}

TEST(Diagnostics, QuietSegmentsStrictDaily) {
    std::vector<double> v(400, 25.0);
    for (std::size_t t = 0; t < 150; ++t) v[t] = 16.0;
    v[0] = 15.0;     // boundary values count as inside
    v[149] = 18.0;
    for (std::size_t t = 200; t < 340; ++t) v[t] = 17.0;
    ObservableSeries vix = band_series(v);
    QuietSpec spec;
    spec.mode = QuietSpec::Mode::STRICT_DAILY;
    spec.band_lo = 15.0;
    spec.band_hi = 18.0;
    spec.min_len = 120;
    auto segs = quiet_segments(vix, spec);
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[0].begin, 0u);
    EXPECT_EQ(segs[0].end, 150u);
    EXPECT_EQ(segs[0].length(), 150u);
    EXPECT_EQ(segs[0].begin_date, vix.dates[0]);
    EXPECT_EQ(segs[0].end_date, vix.dates[149]);
    EXPECT_EQ(segs[1].begin, 200u);
    EXPECT_EQ(segs[1].end, 340u);

    // A run shorter than min_len is dropped.
    spec.min_len = 141;
    auto longer = quiet_segments(vix, spec);
    ASSERT_EQ(longer.size(), 1u);
    EXPECT_EQ(longer[0].begin, 0u);

    QuietSpec bad = spec;
    bad.band_lo = 18.0;
    bad.band_hi = 15.0;
    EXPECT_THROW(quiet_segments(vix, bad), std::runtime_error);
    bad = spec;
    bad.min_len = 0;
    EXPECT_THROW(quiet_segments(vix, bad), std::runtime_error);
    bad = spec;
    bad.min_len = 400;
    EXPECT_THROW(quiet_segments(vix, bad), std::runtime_error);
}

TEST(Diagnostics, QuietSegmentsRollingMedianBridgesSpikes) {
    std::vector<double> v(200, 16.0);
    v[50] = 30.0;
    v[120] = 30.0;
    ObservableSeries vix = band_series(v);
    QuietSpec spec;
    spec.band_lo = 15.0;
    spec.band_hi = 18.0;
    spec.min_len = 100;

    spec.mode = QuietSpec::Mode::STRICT_DAILY;
    EXPECT_TRUE(quiet_segments(vix, spec).empty());   // spikes break every run below min_len

    spec.mode = QuietSpec::Mode::ROLLING_MEDIAN;
    spec.median_window = 5;
    auto segs = quiet_segments(vix, spec);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].begin, 4u);   // first w-1 days carry no defined median
    EXPECT_EQ(segs[0].end, 200u);

    spec.median_window = 500;
    EXPECT_THROW(quiet_segments(vix, spec), std::runtime_error);
}

TEST(Diagnostics, PooledAcfSingleFullSegmentEqualsPlainAcf) {
    auto x = tst::ar1(600, 0.92, 16.0, 0.4, 3);
    ObservableSeries s = tst::make_series(x);
    QuietSegment seg;
    seg.begin = 0;
    seg.end = s.size();
    seg.begin_date = s.dates.front();
    seg.end_date = s.dates.back();
    AcfSummary pooled = pooled_quiet_acf(s, {seg}, 60);
    AcfSummary plain = acf_summary(s, 60);
    ASSERT_EQ(pooled.acf.size(), plain.acf.size());
    for (std::size_t l = 0; l < pooled.acf.size(); ++l)
        EXPECT_DOUBLE_EQ(pooled.acf[l], plain.acf[l]);
    EXPECT_EQ(pooled.efolding_lag, plain.efolding_lag);
}

TEST(Diagnostics, PooledAcfMatchesPairCountWeights) {
    auto x = tst::ar1(300, 0.85, 0.0, 1.0, 7);
    ObservableSeries s = tst::make_series(x);
    QuietSegment a, b;
    a.begin = 10;  a.end = 40;    // length 30
    b.begin = 100; b.end = 150;   // length 50
    a.begin_date = s.dates[a.begin];
    a.end_date = s.dates[a.end - 1];
    b.begin_date = s.dates[b.begin];
    b.end_date = s.dates[b.end - 1];
    const long max_lag = 40;
    AcfSummary pooled = pooled_quiet_acf(s, {a, b}, max_lag);
    // Feasible truncation: longest segment supplies up to lag 49, so 40 stands.
    ASSERT_EQ(pooled.acf.size(), 41u);

    std::vector<double> xa(x.begin() + 10, x.begin() + 40);
    std::vector<double> xb(x.begin() + 100, x.begin() + 150);
    auto ra = ref_acf(xa, 29);
    auto rb = ref_acf(xb, 40);
    for (long l = 1; l <= max_lag; ++l) {
        long double num = 0, den = 0;
        if (30 - l >= 1) { num += (30.0L - l) * ra[static_cast<std::size_t>(l)]; den += 30.0L - l; }
        if (50 - l >= 1) { num += (50.0L - l) * rb[static_cast<std::size_t>(l)]; den += 50.0L - l; }
        EXPECT_NEAR(pooled.acf[static_cast<std::size_t>(l)], static_cast<double>(num / den), 1e-12)
            << "lag " << l;
    }

    // Truncation by the longest segment: max_lag beyond every length.
    AcfSummary trunc = pooled_quiet_acf(s, {a, b}, 200);
    EXPECT_EQ(trunc.acf.size(), 50u);   // lags 0..49

    QuietSegment outside = b;
    outside.end = 400;
    EXPECT_THROW(pooled_quiet_acf(s, {outside}, 40), std::runtime_error);
    QuietSegment wrong_date = a;
    wrong_date.begin_date = "1999-01-01";
    EXPECT_THROW(pooled_quiet_acf(s, {wrong_date}, 40), std::runtime_error);
    EXPECT_THROW(pooled_quiet_acf(s, {}, 40), std::runtime_error);
}

TEST(Diagnostics, EpisodeBootstrapSingleSegmentIsDegenerate) {
    auto x = tst::ar1(500, 0.9, 0.0, 1.0, 9);
    ObservableSeries s = tst::make_series(x);
    QuietSegment seg;
    seg.begin = 0;
    seg.end = 400;
    seg.begin_date = s.dates[0];
    seg.end_date = s.dates[399];
    EpisodeBootstrap eb = episode_bootstrap(s, {seg}, 100, 42, 80);
    ASSERT_TRUE(eb.point.has_value());
    EXPECT_EQ(eb.draws, 100);
    EXPECT_EQ(eb.n_defined, 100);
    EXPECT_DOUBLE_EQ(eb.ci_lo, static_cast<double>(*eb.point));
    EXPECT_DOUBLE_EQ(eb.ci_hi, static_cast<double>(*eb.point));
}

TEST(Diagnostics, EpisodeBootstrapDeterministicAndOrdered) {
    auto x = tst::ar1(800, 0.93, 0.0, 1.0, 13);
    ObservableSeries s = tst::make_series(x);
    std::vector<QuietSegment> segs;
    for (std::size_t b : {0u, 300u, 550u}) {
        QuietSegment g;
        g.begin = b;
        g.end = b + 200;
        g.begin_date = s.dates[g.begin];
        g.end_date = s.dates[g.end - 1];
        segs.push_back(g);
    }
    EpisodeBootstrap e1 = episode_bootstrap(s, segs, 150, 7, 100);
    EpisodeBootstrap e2 = episode_bootstrap(s, segs, 150, 7, 100);
    EXPECT_EQ(e1.point, e2.point);
    EXPECT_DOUBLE_EQ(e1.ci_lo, e2.ci_lo);
    EXPECT_DOUBLE_EQ(e1.ci_hi, e2.ci_hi);
    EXPECT_EQ(e1.n_defined, e2.n_defined);
    EXPECT_LE(e1.ci_lo, e1.ci_hi);
    EXPECT_GE(e1.ci_lo, 1.0);
    EXPECT_LE(e1.n_defined, e1.draws);
    EXPECT_THROW(episode_bootstrap(s, {}, 10, 1, 50), std::runtime_error);
}

TEST(Diagnostics, FieldStrippedResidualSubtractsConditionalEquilibrium) {
    ModelFit f;
    f.family = Family::OU_FIELD;
    f.names = {"theta", "mu", "beta", "sigma"};
    f.params = {0.02, -0.6, 0.01, 0.01};
    auto pv = tst::gaussian(50, 0.4, 0.05, 3);
    auto fv = tst::gaussian(50, 3.0, 0.3, 4);
    ObservableSeries psi = tst::make_series(pv, "psi");
    ObservableSeries field = tst::make_series(fv, "field");
    ObservableSeries r = field_stripped_residual(f, psi, field);
    ASSERT_EQ(r.size(), psi.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
        double eq = -0.6 + (0.01 / 0.02) * fv[t];
        EXPECT_NEAR(r.values[t], pv[t] - eq, 1e-14);
    }
    ObservableSeries off = field;
    off.dates[0] = "1990-01-01";
    EXPECT_THROW(field_stripped_residual(f, psi, off), std::runtime_error);
}

TEST(Diagnostics, GrangerMatchesTwoRegressionOracle) {
    // x drives y with one lag; x is autonomous.
    const std::size_t n = 1500;
    std::mt19937_64 g(17);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> x(n), y(n);
    x[0] = 0.0;
    y[0] = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        x[t] = 0.8 * x[t - 1] + nd(g);
        y[t] = 0.3 * y[t - 1] + 0.4 * x[t - 1] + nd(g);
    }
    const int max_lag = 5;
    GrangerPair pair = granger(x, y, max_lag);

    // Oracle for a direction at lag p with conditioning drop = max_lag.
    auto dir_stats = [&](const std::vector<double>& target, const std::vector<double>& cross,
                         int p, double* rss_u_out = nullptr) {
        const long n_eff = static_cast<long>(n) - max_lag;
        Eigen::MatrixXd Xu(n_eff, 2 * p + 1), Xr(n_eff, p + 1);
        Eigen::VectorXd yy(n_eff);
        for (long t = 0; t < n_eff; ++t) {
            long idx = max_lag + t;
            Xu(t, 0) = 1.0;
            Xr(t, 0) = 1.0;
            for (int j = 1; j <= p; ++j) {
                Xu(t, j) = target[static_cast<std::size_t>(idx - j)];
                Xu(t, p + j) = cross[static_cast<std::size_t>(idx - j)];
                Xr(t, j) = target[static_cast<std::size_t>(idx - j)];
            }
            yy(t) = target[static_cast<std::size_t>(idx)];
        }
        auto rss = [&](const Eigen::MatrixXd& X) {
            Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * yy);
            return (yy - X * b).squaredNorm();
        };
        double rss_u = rss(Xu), rss_r = rss(Xr);
        if (rss_u_out) *rss_u_out = rss_u;
        double df2 = static_cast<double>(n_eff - 2 * p - 1);
        double F = ((rss_r - rss_u) / p) / (rss_u / df2);
        return std::pair<double, double>(std::max(0.0, F), f_sf(std::max(0.0, F), p, df2));
    };

    // Shared lag equals the argmin of the summed concentrated AIC.
    int best_p = 1;
    double best_aic = 1e300;
    for (int p = 1; p <= max_lag; ++p) {
        double aic = 0.0;
        for (int d = 0; d < 2; ++d) {
            double rss_u = 0.0;
            dir_stats(d == 0 ? y : x, d == 0 ? x : y, p, &rss_u);
            const double n_eff = static_cast<double>(n) - max_lag;
            aic += n_eff * std::log(rss_u / n_eff) + 2.0 * (2 * p + 1);
        }
        if (aic < best_aic) { best_aic = aic; best_p = p; }
    }
    EXPECT_EQ(pair.x_to_y.lag, best_p);
    EXPECT_EQ(pair.y_to_x.lag, best_p);

    auto fwd = dir_stats(y, x, best_p);
    auto rev = dir_stats(x, y, best_p);
    EXPECT_NEAR(pair.x_to_y.F, fwd.first, 1e-8 * (1.0 + fwd.first));
    EXPECT_NEAR(pair.x_to_y.p, fwd.second, 1e-10);
    EXPECT_NEAR(pair.y_to_x.F, rev.first, 1e-8 * (1.0 + rev.first));
    EXPECT_NEAR(pair.y_to_x.p, rev.second, 1e-10);

    // The planted direction is overwhelming, the reverse is quiet.
    EXPECT_LT(pair.x_to_y.p, 1e-6);
    EXPECT_GT(pair.y_to_x.p, 0.01);
    EXPECT_FALSE(pair.x_to_y.differenced);
}

TEST(Diagnostics, GrangerDifferencedEqualsGrangerOfDiffs) {
    const std::size_t n = 900;
    std::mt19937_64 g(23);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> x(n), y(n);
    x[0] = 0.0;
    y[0] = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        x[t] = x[t - 1] + nd(g);
        y[t] = y[t - 1] + 0.5 * (x[t - 1] - x[t > 1 ? t - 2 : 0]) + nd(g);
    }
    GrangerPair a = granger(x, y, 4, true);
    std::vector<double> dx, dy;
    for (std::size_t t = 1; t < n; ++t) {
        dx.push_back(x[t] - x[t - 1]);
        dy.push_back(y[t] - y[t - 1]);
    }
    GrangerPair b = granger(dx, dy, 4, false);
    EXPECT_EQ(a.x_to_y.lag, b.x_to_y.lag);
    EXPECT_DOUBLE_EQ(a.x_to_y.F, b.x_to_y.F);
    EXPECT_DOUBLE_EQ(a.y_to_x.F, b.y_to_x.F);
    EXPECT_TRUE(a.x_to_y.differenced);
    EXPECT_LT(a.x_to_y.p, 0.001);
}

TEST(Diagnostics, GrangerGuards) {
    std::vector<double> x(50, 0.0), y(40, 0.0);
    EXPECT_THROW(granger(x, y, 5), std::runtime_error);
    auto z = tst::gaussian(20, 0.0, 1.0, 1);
    EXPECT_THROW(granger(z, z, 10), std::runtime_error);
}
