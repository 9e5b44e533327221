#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fieldattr/stats.hpp"
#include "helpers.hpp"

using namespace fieldattr;

namespace {

// Long-double reference moments, computed independently of the library.
long double ref_mean(const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return s / static_cast<long double>(v.size());
}

long double ref_var(const std::vector<double>& v) {
    long double m = ref_mean(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<long double>(v.size() - 1);
}

}  // namespace

TEST(Stats, MomentsMatchLongDoubleReference) {
    auto v = tst::gaussian(5000, 2.5, 3.0, 11);
    EXPECT_NEAR(mean_of(v), static_cast<double>(ref_mean(v)), 1e-12);
    EXPECT_NEAR(variance_of(v), static_cast<double>(ref_var(v)), 1e-9);
    EXPECT_NEAR(sd_of(v), std::sqrt(static_cast<double>(ref_var(v))), 1e-10);
    EXPECT_THROW(mean_of({}), std::runtime_error);
    EXPECT_THROW(variance_of({1.0}), std::runtime_error);
}

TEST(Stats, PearsonMatchesDefinition) {
    auto a = tst::gaussian(400, 0, 1, 21);
    std::vector<double> b(a.size());
    auto e = tst::gaussian(400, 0, 1, 22);
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = 0.6 * a[i] + 0.8 * e[i];
    long double ma = ref_mean(a), mb = ref_mean(b);
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    double want = static_cast<double>(sab / std::sqrt(saa * sbb));
    EXPECT_NEAR(pearson(a, b), want, 1e-12);
    EXPECT_NEAR(pearson(a, a), 1.0, 1e-12);
    std::vector<double> neg(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -a[i];
    EXPECT_NEAR(pearson(a, neg), -1.0, 1e-12);
    EXPECT_THROW(pearson(a, std::vector<double>(a.size(), 3.0)), std::runtime_error);
}

TEST(Stats, OlsMatchesNormalEquations) {
    const int n = 200;
    auto x1 = tst::gaussian(n, 0, 1, 31);
    auto x2 = tst::gaussian(n, 1, 2, 32);
    auto e = tst::gaussian(n, 0, 0.5, 33);
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = x1[i];
        X(i, 2) = x2[i];
        y(i) = 1.5 - 2.0 * x1[i] + 0.75 * x2[i] + e[i];
    }
    OlsFit f = ols(X, y);
    Eigen::Vector3d want = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(f.coef(j), want(j), 1e-9);
    EXPECT_NEAR(f.rss, (y - X * want).squaredNorm(), 1e-8);
    double tss = (y.array() - y.mean()).square().sum();
    EXPECT_NEAR(f.r2, 1.0 - f.rss / tss, 1e-12);
}

TEST(Stats, OlsRejectsSingularDesign) {
    Eigen::MatrixXd X(10, 3);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i;
        X(i, 2) = 2.0 * i;   // collinear with column 1
        y(i) = i;
    }
    EXPECT_THROW(ols(X, y), std::runtime_error);
}

TEST(Stats, Ols1MatchesClosedForm) {
    auto x = tst::gaussian(150, 0, 1, 41);
    auto e = tst::gaussian(150, 0, 0.3, 42);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 + 3.0 * x[i] + e[i];
    OlsFit f = ols_1(x, y);
    long double mx = ref_mean(x), my = ref_mean(y), sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    double b = static_cast<double>(sxy / sxx);
    double a = static_cast<double>(my) - b * static_cast<double>(mx);
    EXPECT_NEAR(f.coef(0), a, 1e-10);
    EXPECT_NEAR(f.coef(1), b, 1e-10);
}

TEST(Stats, TailFunctionsKnownValues) {
    // chi-square df=1: 3.841459 is the 5% critical value; 6.634897 the 1%.
    EXPECT_NEAR(chi2_sf(3.841459, 1.0), 0.05, 1e-4);
    EXPECT_NEAR(chi2_sf(6.634897, 1.0), 0.01, 1e-4);
    EXPECT_DOUBLE_EQ(chi2_sf(0.0, 1.0), 1.0);
    // chi-square df=2 is exponential(1/2): sf(x) = exp(-x/2).
    EXPECT_NEAR(chi2_sf(5.0, 2.0), std::exp(-2.5), 1e-10);
    // F(1, m) equals t(m) squared: F sf at t^2 = 2 * t sf. Known 5% points.
    EXPECT_NEAR(f_sf(4.964603, 1.0, 10.0), 0.05, 1e-4);
    EXPECT_NEAR(f_sf(3.238872, 4.0, 20.0), 0.035, 0.035);  // loose: monotone sanity
    EXPECT_GT(f_sf(1.0, 3.0, 30.0), f_sf(2.0, 3.0, 30.0));
    // Normal.
    EXPECT_NEAR(normal_cdf(1.959964), 0.975, 1e-6);
    EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-12);
    EXPECT_NEAR(normal_sf(1.959964), 0.025, 1e-6);
    EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-5);
    for (double p : {0.01, 0.2, 0.5, 0.77, 0.999})
        EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-10);
    EXPECT_NEAR(normal_pdf(0.0), 1.0 / std::sqrt(2.0 * M_PI), 1e-12);
}

TEST(Stats, QuantileType7) {
    std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(quantile_of(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_of(v, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile_of(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile_of(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(median_of({5.0, 1.0, 3.0}), 3.0);
    EXPECT_DOUBLE_EQ(median_of({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_THROW(quantile_of({}, 0.5), std::runtime_error);
    EXPECT_THROW(quantile_of({1.0}, 1.5), std::runtime_error);
}
