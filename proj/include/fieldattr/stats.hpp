#pragma once

// Small shared statistics layer: moments, OLS with standard errors, and
// distribution tails (delegated to Boost.Math rather than hand-rolled
// incomplete gamma/beta).

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fieldattr {

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::runtime_error("mean_of: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample variance (divide by n-1).
inline double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) throw std::runtime_error("variance_of: need at least 2 points");
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double sd_of(const std::vector<double>& v) { return std::sqrt(variance_of(v)); }

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw std::runtime_error("pearson: bad inputs");
    double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) throw std::runtime_error("pearson: zero variance");
    return sab / std::sqrt(saa * sbb);
}

struct OlsFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::VectorXd residuals;
    double rss = 0.0;
    double tss = 0.0;   // centered total sum of squares
    double r2 = 0.0;
    long n = 0;
    long k = 0;
};

// Least squares with a rank check; singular design is an error because the
// Granger and decomposition paths must fail loudly rather than return an
// arbitrary pseudo-inverse solution.
inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw std::runtime_error("ols: row mismatch");
    if (X.rows() <= X.cols()) throw std::runtime_error("ols: more regressors than observations");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw std::runtime_error("ols: singular design matrix");
    OlsFit f;
    f.n = X.rows();
    f.k = X.cols();
    f.coef = qr.solve(y);
    f.residuals = y - X * f.coef;
    f.rss = f.residuals.squaredNorm();
    double ym = y.mean();
    f.tss = (y.array() - ym).matrix().squaredNorm();
    f.r2 = f.tss > 0.0 ? 1.0 - f.rss / f.tss : 0.0;
    double sigma2 = f.rss / static_cast<double>(f.n - f.k);
    Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
    f.se = (sigma2 * xtx_inv.diagonal().array()).sqrt().matrix();
    return f;
}

inline OlsFit ols_1(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::runtime_error("ols_1: length mismatch");
    Eigen::MatrixXd X(static_cast<long>(x.size()), 2);
    Eigen::VectorXd Y(static_cast<long>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        X(static_cast<long>(i), 0) = 1.0;
        X(static_cast<long>(i), 1) = x[i];
        Y(static_cast<long>(i)) = y[i];
    }
    return ols(X, Y);
}

inline double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

inline double f_sf(double x, double d1, double d2) {
    if (x <= 0.0) return 1.0;
    boost::math::fisher_f dist(d1, d2);
    return boost::math::cdf(boost::math::complement(dist, x));
}

inline double normal_cdf(double z) {
    static const boost::math::normal dist(0.0, 1.0);
    return boost::math::cdf(dist, z);
}

inline double normal_sf(double z) {
    static const boost::math::normal dist(0.0, 1.0);
    return boost::math::cdf(boost::math::complement(dist, z));
}

inline double normal_quantile(double p) {
    static const boost::math::normal dist(0.0, 1.0);
    return boost::math::quantile(dist, p);
}

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Linear-interpolated quantile of a copy-sorted sample (type-7, the numpy
// default), used by the bootstrap CI and median splits.
inline double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) throw std::runtime_error("quantile_of: empty");
    if (q < 0.0 || q > 1.0) throw std::runtime_error("quantile_of: q outside [0,1]");
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

inline double median_of(std::vector<double> v) { return quantile_of(std::move(v), 0.5); }

}  // namespace fieldattr
