#pragma once

// AR(p) marginal fit of a field series, persistence-matched Gaussian
// surrogates, and the placebo gate: does replacing the real field by
// AR-matched fakes destroy the model-comparison gain?

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/ou_models.hpp"
#include "fieldattr/rng.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"
#include "fieldattr/twod.hpp"

namespace fieldattr {

struct ARFit {
    int p = 0;
    double intercept = 0.0;
    std::vector<double> coeffs;
    std::vector<double> coeff_se;
    double intercept_se = 0.0;
    double noise_var = 0.0;   // conditional MLE, RSS/n_eff
    double aic = 0.0;
};

namespace detail {

struct ArLsq {
    OlsFit ols_fit;
    double noise_var;
    double loglik;
    long n_eff;
};

// Conditional least squares of x_t on (1, x_{t-1..t-p}), conditioning on the
// first `drop` observations (drop >= p). Concentrated Gaussian loglik.
inline ArLsq ar_least_squares(const std::vector<double>& x, int p, int drop) {
    const long n = static_cast<long>(x.size());
    const long n_eff = n - drop;
    if (n_eff <= p + 2) throw std::runtime_error("fit_ar: series too short for requested order");
    Eigen::MatrixXd X(n_eff, p + 1);
    Eigen::VectorXd y(n_eff);
    for (long t = 0; t < n_eff; ++t) {
        long idx = drop + t;
        X(t, 0) = 1.0;
        for (int j = 1; j <= p; ++j) X(t, j) = x[static_cast<std::size_t>(idx - j)];
        y(t) = x[static_cast<std::size_t>(idx)];
    }
    ArLsq r;
    r.ols_fit = ols(X, y);
    r.n_eff = n_eff;
    r.noise_var = r.ols_fit.rss / static_cast<double>(n_eff);
    r.loglik = -0.5 * static_cast<double>(n_eff) *
               (std::log(2.0 * std::numbers::pi * r.noise_var) + 1.0);
    return r;
}

}  // namespace detail

// AIC order selection over p = 1..p_max on a common conditioning sample (the
// first p_max observations are dropped for every candidate so logliks are
// comparable), then a refit at the chosen order conditioning on only its own
// first p values. k = p + 2 (intercept, p coefficients, noise variance).
inline ARFit fit_ar(const ObservableSeries& series, int p_max = 10) {
    if (static_cast<int>(series.size()) <= p_max + 10)
        throw std::runtime_error("fit_ar: need more than p_max + 10 observations");
    check_series(series);
    const std::vector<double>& x = series.values;
    int best_p = 1;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= p_max; ++p) {
        detail::ArLsq r = detail::ar_least_squares(x, p, p_max);
        double aic = 2.0 * (p + 2) - 2.0 * r.loglik;
        if (aic < best_aic) {
            best_aic = aic;
            best_p = p;
        }
    }
    detail::ArLsq r = detail::ar_least_squares(x, best_p, best_p);
    ARFit f;
    f.p = best_p;
    f.intercept = r.ols_fit.coef(0);
    f.intercept_se = r.ols_fit.se(0);
    for (int j = 1; j <= best_p; ++j) {
        f.coeffs.push_back(r.ols_fit.coef(j));
        f.coeff_se.push_back(r.ols_fit.se(j));
    }
    f.noise_var = r.noise_var;
    f.aic = 2.0 * (best_p + 2) -
            2.0 * (-0.5 * static_cast<double>(r.n_eff) *
                   (std::log(2.0 * std::numbers::pi * r.noise_var) + 1.0));
    return f;
}

// Largest companion-matrix eigenvalue modulus; >= 1 means the AR recursion
// does not decay.
inline double ar_spectral_radius(const std::vector<double>& coeffs) {
    const int p = static_cast<int>(coeffs.size());
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p, p);
    for (int j = 0; j < p; ++j) comp(0, j) = coeffs[static_cast<std::size_t>(j)];
    for (int i = 1; i < p; ++i) comp(i, i - 1) = 1.0;
    return comp.eigenvalues().cwiseAbs().maxCoeff();
}

// `count` independent AR paths with Gaussian innovations, burn-in discarded,
// each affinely rescaled to hit (target_mean, target_sd) exactly in sample
// (sd with the n-1 convention). The affine map leaves autocorrelations
// untouched, which is the whole point of the surrogate law.
inline std::vector<std::vector<double>> gen_surrogates(const ARFit& ar, long n_obs, int count,
                                                       double target_mean, double target_sd,
                                                       std::uint64_t seed) {
    if (n_obs < 3) throw std::runtime_error("gen_surrogates: n_obs too small");
    if (!(ar.noise_var > 0.0)) throw std::runtime_error("gen_surrogates: invalid AR fit");
    double rad = ar_spectral_radius(ar.coeffs);
    if (rad >= 1.0)
        throw std::runtime_error("gen_surrogates: explosive AR (spectral radius " +
                                 std::to_string(rad) + ")");
    const int p = ar.p;
    const long burn = 1000;
    const double noise_sd = std::sqrt(ar.noise_var);
    double csum = 0.0;
    for (double c : ar.coeffs) csum += c;
    const double uncond_mean = ar.intercept / (1.0 - csum);

    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(count));
    Philox base(seed, 0);
    for (int i = 0; i < count; ++i) {
        Philox rng = base.substream("surrogate").substream(static_cast<std::uint64_t>(i));
        std::vector<double> x(static_cast<std::size_t>(burn + n_obs), uncond_mean);
        for (long t = p; t < burn + n_obs; ++t) {
            double m = ar.intercept;
            for (int j = 0; j < p; ++j) m += ar.coeffs[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(t - 1 - j)];
            x[static_cast<std::size_t>(t)] = m + noise_sd * rng.normal();
        }
        std::vector<double> v(x.begin() + burn, x.end());
        double m = mean_of(v);
        double s = sd_of(v);
        if (!(s > 0.0)) throw std::runtime_error("gen_surrogates: degenerate surrogate path");
        for (double& z : v) z = target_mean + (z - m) * (target_sd / s);
        out.push_back(std::move(v));
    }
    return out;
}

enum class PlaceboComparison { ONE_D, TWO_D };

struct PlaceboReport {
    double real_gain = 0.0;
    std::vector<double> placebo_gains;
    double empirical_p = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    double max = 0.0;
    int n_requested = 0;
    int n_failed = 0;
};

namespace detail {

// Gain convention, 1D: BIC(bare) - BIC(field); positive favors the field.
inline double gain_1d(const ObservableSeries& psi, const ObservableSeries& field,
                      double bare_bic, std::uint64_t fit_seed) {
    ModelSpec spec;
    spec.family = Family::OU_FIELD;
    spec.fields = {field};
    ModelFit m2 = fit(spec, psi, fit_seed);
    return bare_bic - m2.bic;
}

// Gain convention, 2D: BIC(decoupled) - min over coupled structures; positive
// means some cross-coupling beats none.
inline double gain_2d(const ObservableSeries& psi, const ObservableSeries& field) {
    AlignedPair pair;
    pair.dates = psi.dates;
    pair.x = psi.values;
    pair.y = field.values;
    Var1Fit dec = fit_var1(pair, Var1Structure::DECOUPLED);
    Var1Fit ff = fit_var1(pair, Var1Structure::FEEDFORWARD);
    Var1Fit bi = fit_var1(pair, Var1Structure::BIDIRECTIONAL);
    return dec.bic - std::min(ff.bic, bi.bic);
}

}  // namespace detail

// The placebo gate. Fits the AR marginal law of the real field, draws `count`
// persistence-matched surrogates, and records the model-comparison gain with
// each surrogate in place of the real field. empirical_p is the fraction of
// surrogate gains at or above the real one. Surrogate fit failures are
// excluded; more than 5% of them aborts the run.
inline PlaceboReport placebo_gate(const ObservableSeries& series, const ObservableSeries& real_field,
                                  int count, std::uint64_t seed,
                                  PlaceboComparison comparison = PlaceboComparison::ONE_D) {
    if (series.dates != real_field.dates)
        throw std::runtime_error("placebo_gate: series and field must be aligned");
    if (count < 1) throw std::runtime_error("placebo_gate: count must be >= 1");

    PlaceboReport rep;
    rep.n_requested = count;

    double bare_bic = 0.0;
    if (comparison == PlaceboComparison::ONE_D) {
        ModelSpec m0;
        m0.family = Family::OU_BARE;
        ModelFit f0 = fit(m0, series, derive_seed(seed, "placebo-m0", 0));
        bare_bic = f0.bic;
        rep.real_gain = detail::gain_1d(series, real_field, bare_bic, derive_seed(seed, "placebo-real", 0));
    } else {
        rep.real_gain = detail::gain_2d(series, real_field);
    }

    ARFit ar = fit_ar(real_field);
    double tgt_mean = mean_of(real_field.values);
    double tgt_sd = sd_of(real_field.values);
    auto paths = gen_surrogates(ar, static_cast<long>(series.size()), count, tgt_mean, tgt_sd,
                                derive_seed(seed, "placebo-surrogates", 0));

    for (int i = 0; i < count; ++i) {
        ObservableSeries fake;
        fake.label = "surrogate_" + std::to_string(i);
        fake.dates = series.dates;
        fake.values = paths[static_cast<std::size_t>(i)];
        try {
            double g = comparison == PlaceboComparison::ONE_D
                           ? detail::gain_1d(series, fake, bare_bic,
                                             derive_seed(seed, "placebo-fit", static_cast<std::uint64_t>(i)))
                           : detail::gain_2d(series, fake);
            rep.placebo_gains.push_back(g);
        } catch (const std::runtime_error&) {
            ++rep.n_failed;
        }
    }
    if (rep.n_failed * 20 > count)
        throw std::runtime_error("placebo_gate: " + std::to_string(rep.n_failed) + " of " +
                                 std::to_string(count) + " surrogate fits failed (>5%)");
    if (rep.placebo_gains.empty()) throw std::runtime_error("placebo_gate: no surrogate fits succeeded");

    long at_or_above = 0;
    for (double g : rep.placebo_gains)
        if (g >= rep.real_gain) ++at_or_above;
    rep.empirical_p = static_cast<double>(at_or_above) / static_cast<double>(rep.placebo_gains.size());
    rep.mean = mean_of(rep.placebo_gains);
    rep.sd = rep.placebo_gains.size() > 1 ? sd_of(rep.placebo_gains) : 0.0;
    rep.max = *std::max_element(rep.placebo_gains.begin(), rep.placebo_gains.end());
    return rep;
}

}  // namespace fieldattr
