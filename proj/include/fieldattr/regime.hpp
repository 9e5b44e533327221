#pragma once

// Two-state Gaussian Hamilton filter for the constrained regime-switching
// models. Only the equilibrium mean switches between states; theta, sigma and
// the field loading are shared. One hidden state per transition, so a series
// of length T carries T-1 state draws. State 0 is "calm", state 1 "stress";
// fitted output is canonicalized so mu_calm <= mu_stress.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/optimize.hpp"
#include "fieldattr/ou_models.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"

namespace fieldattr {

struct RegimeParams {
    double theta = 0.0;
    double mu_calm = 0.0;
    double mu_stress = 0.0;
    double beta = 0.0;    // 0 for the field-free model
    double sigma = 0.0;
    double p_cs = 0.0;    // calm -> stress per day
    double p_sc = 0.0;    // stress -> calm per day
};

struct RegimeStats {
    double expected_calm_days;
    double expected_stress_days;
    double stationary_calm;
    double stationary_stress;
    double calm_relaxation_days;
};

struct HamiltonResult {
    double loglik;
    std::vector<std::array<double, 2>> filtered;   // one per transition
};

inline RegimeStats regime_stats(const RegimeParams& p) {
    if (!(p.p_cs > 0.0 && p.p_cs < 1.0 && p.p_sc > 0.0 && p.p_sc < 1.0))
        throw std::runtime_error("regime_stats: transition probabilities must lie in (0,1)");
    if (!(p.theta > 0.0)) throw std::runtime_error("regime_stats: theta must be positive");
    RegimeStats s{};
    s.expected_calm_days = 1.0 / p.p_cs;
    s.expected_stress_days = 1.0 / p.p_sc;
    s.stationary_calm = p.p_sc / (p.p_cs + p.p_sc);
    s.stationary_stress = p.p_cs / (p.p_cs + p.p_sc);
    s.calm_relaxation_days = 1.0 / p.theta;
    return s;
}

// Forward filter over the two regimes. The per-state observation density is
// the exact OU one-step law with the state's mean; accumulation happens in
// log space with max-subtraction so stress-era underflow cannot occur.
// field may be empty (field-free model); otherwise it must be aligned.
inline HamiltonResult hamilton_loglik(const RegimeParams& p, const ObservableSeries& series,
                                      const ObservableSeries* field = nullptr) {
    if (series.size() < 2) throw std::runtime_error("hamilton_loglik: need at least 2 observations");
    check_series(series);
    if (field && field->dates != series.dates)
        throw std::runtime_error("hamilton_loglik: field not aligned with observable");
    if (!(p.theta > 0.0 && p.sigma > 0.0))
        throw std::runtime_error("hamilton_loglik: theta and sigma must be positive");
    if (!(p.p_cs >= 0.0 && p.p_cs <= 1.0 && p.p_sc >= 0.0 && p.p_sc <= 1.0))
        throw std::runtime_error("hamilton_loglik: transition probabilities outside [0,1]");

    const double a = std::exp(-p.theta);
    const double var = p.sigma * p.sigma * (1.0 - a * a) / (2.0 * p.theta);
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    const std::array<double, 2> mu = {p.mu_calm, p.mu_stress};

    // Stationary initial distribution; degenerate chains fall back to the
    // absorbing state that the dynamics imply.
    std::array<double, 2> pred;
    double denom = p.p_cs + p.p_sc;
    if (denom > 0.0)
        pred = {p.p_sc / denom, p.p_cs / denom};
    else
        pred = {0.5, 0.5};

    HamiltonResult out;
    out.loglik = 0.0;
    const std::size_t n = series.size();
    out.filtered.reserve(n - 1);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        double v = field ? field->values[t] : 0.0;
        std::array<double, 2> logjoint;
        for (int s = 0; s < 2; ++s) {
            double eq = mu[s] + (p.beta / p.theta) * v;
            double mean = a * series.values[t] + (1.0 - a) * eq;
            double z = series.values[t + 1] - mean;
            double logf = log_norm - 0.5 * z * z / var;
            logjoint[s] = (pred[s] > 0.0 ? std::log(pred[s]) : -1e300) + logf;
        }
        double m = std::max(logjoint[0], logjoint[1]);
        double sum = std::exp(logjoint[0] - m) + std::exp(logjoint[1] - m);
        out.loglik += m + std::log(sum);
        std::array<double, 2> filt = {std::exp(logjoint[0] - m) / sum, std::exp(logjoint[1] - m) / sum};
        out.filtered.push_back(filt);
        pred = {filt[0] * (1.0 - p.p_cs) + filt[1] * p.p_sc,
                filt[0] * p.p_cs + filt[1] * (1.0 - p.p_sc)};
    }
    if (std::isnan(out.loglik)) throw std::runtime_error("hamilton_loglik: NaN encountered");
    return out;
}

struct RegimeFit {
    RegimeParams params;
    bool with_field = false;
    double loglik = 0.0;
    long n_trans = 0;
    int k = 0;
    double aic = 0.0;
    double bic = 0.0;
    bool converged = false;
    std::string first_date, last_date;
};

// MLE of the regime model. Means are box-constrained: the field-free model
// keeps both means inside [0,1] (the observable's range); the field-coupled
// model lets mu_calm roam [-2,1] because the field term shifts the effective
// equilibrium into range (the published analogue sits near -0.6), while
// mu_stress stays in [0,1] with its optimum typically on the upper bound.
// Set pin_mu_stress to fix mu_stress = 1 exactly.
inline RegimeFit fit_rs(bool with_field, const ObservableSeries& series,
                        const ObservableSeries* field, std::uint64_t seed,
                        bool pin_mu_stress = false) {
    if (series.size() < 16) throw std::runtime_error("fit_rs: series too short");
    check_series(series);
    if (with_field && !field) throw std::runtime_error("fit_rs: field model requires a field series");
    if (with_field && field->dates != series.dates)
        throw std::runtime_error("fit_rs: field not aligned with observable");
    double psi_sd = 0.0;
    try {
        psi_sd = sd_of(series.values);
    } catch (...) {
    }
    if (!(psi_sd > 0.0)) throw std::runtime_error("fit_rs: degenerate (constant) series");
    double psi_mean = mean_of(series.values);

    std::vector<std::vector<double>> lin_fields;
    if (with_field) lin_fields.push_back(field->values);
    detail::OlsPreseed ps = detail::ols_preseed(series.values, lin_fields, 1.0);
    if (!ps.usable) {
        ps.theta = 0.05;
        ps.mu = psi_mean;
        ps.sigma = std::max(1e-9, psi_sd * std::sqrt(0.1));
        ps.beta.assign(lin_fields.size(), 0.0);
    }
    double theta_lo = std::max(1e-6, ps.theta / 8.0);
    double theta_hi = std::max(theta_lo * 2.0, std::min(4.0, ps.theta * 8.0));
    double sigma_lo = std::max(1e-12, ps.sigma / 8.0);
    double sigma_hi = std::max(sigma_lo * 2.0, ps.sigma * 8.0);

    double mu_calm_lo = with_field ? -2.0 : 0.0;
    double clamp_lo = mu_calm_lo + 1e-6, clamp_hi = 1.0 - 1e-6;
    double mu_seed = std::min(std::max(ps.mu, clamp_lo), clamp_hi);

    std::vector<ParamSpec> specs = {
        {"theta", ParamSpec::Scale::Log, theta_lo, theta_hi},
        {"mu_calm", ParamSpec::Scale::Box, mu_calm_lo, 1.0},
    };
    std::vector<double> preseed = {ps.theta, mu_seed};
    if (!pin_mu_stress) {
        specs.push_back({"mu_stress", ParamSpec::Scale::Box, 0.0, 1.0});
        preseed.push_back(0.9);
    }
    specs.push_back({"sigma", ParamSpec::Scale::Log, sigma_lo, sigma_hi});
    specs.push_back({"p_cs", ParamSpec::Scale::Box, 0.0, 1.0});
    specs.push_back({"p_sc", ParamSpec::Scale::Box, 0.0, 1.0});
    preseed.insert(preseed.end(), {ps.sigma, 0.05, 0.3});
    if (with_field) {
        double fld_sd = field->size() > 1 ? sd_of(field->values) : 0.0;
        double bhat = ps.beta.empty() ? 0.0 : ps.beta[0];
        double hw = 4.0 * std::abs(bhat) + 4.0 * ps.theta * psi_sd / std::max(fld_sd, 1e-9) + 1e-6;
        specs.push_back({"beta", ParamSpec::Scale::Linear, bhat - hw, bhat + hw});
        preseed.push_back(bhat);
    }

    auto unpack = [&](const std::vector<double>& x) {
        RegimeParams p;
        std::size_t i = 0;
        p.theta = x[i++];
        p.mu_calm = x[i++];
        p.mu_stress = pin_mu_stress ? 1.0 : x[i++];
        p.sigma = x[i++];
        p.p_cs = x[i++];
        p.p_sc = x[i++];
        p.beta = with_field ? x[i++] : 0.0;
        return p;
    };
    auto obj = [&](const std::vector<double>& x) {
        try {
            return hamilton_loglik(unpack(x), series, with_field ? field : nullptr).loglik;
        } catch (const std::runtime_error&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    MaximizeResult r = maximize(specs, obj, seed, {preseed});

    RegimeFit out;
    out.params = unpack(r.params);
    if (out.params.mu_calm > out.params.mu_stress) {
        std::swap(out.params.mu_calm, out.params.mu_stress);
        std::swap(out.params.p_cs, out.params.p_sc);
    }
    out.with_field = with_field;
    out.loglik = r.loglik;
    out.n_trans = static_cast<long>(series.size()) - 1;
    out.k = with_field ? 7 : 6;
    if (pin_mu_stress) --out.k;
    out.aic = 2.0 * out.k - 2.0 * out.loglik;
    out.bic = out.k * std::log(static_cast<double>(out.n_trans)) - 2.0 * out.loglik;
    out.converged = r.converged;
    out.first_date = series.dates.front();
    out.last_date = series.dates.back();
    return out;
}

struct LrtResult {
    double chi2;
    int df;
    double p;
};

template <class FitNested, class FitFull>
inline LrtResult lrt(const FitNested& nested, const FitFull& full) {
    if (nested.n_trans != full.n_trans)
        throw std::runtime_error("lrt: fits are on different samples");
    if (full.k <= nested.k) throw std::runtime_error("lrt: full model must have more parameters");
    if (full.loglik < nested.loglik - 1e-6)
        throw std::runtime_error("lrt: full-model loglik below nested loglik; optimizer failure");
    LrtResult r{};
    r.chi2 = std::max(0.0, 2.0 * (full.loglik - nested.loglik));
    r.df = full.k - nested.k;
    r.p = chi2_sf(r.chi2, static_cast<double>(r.df));
    return r;
}

}  // namespace fieldattr
