#pragma once

// One-dimensional model hierarchy over a slow observable psi with optional
// exogenous fields v (log VIX and friends): exact one-step Gaussian
// transitions for the OU families, Euler one-step transitions for the
// quartic-drift and heteroskedastic variants, maximum likelihood fitting,
// information criteria, and the derived attribution quantities.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/optimize.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"

namespace fieldattr {

enum class Family { OU_BARE, OU_FIELD, OU_FIELD_HETERO, QUARTIC, QUARTIC_FIELD, OU_MULTIFIELD };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::OU_BARE: return "ou_bare";
        case Family::OU_FIELD: return "ou_field";
        case Family::OU_FIELD_HETERO: return "ou_field_hetero";
        case Family::QUARTIC: return "quartic";
        case Family::QUARTIC_FIELD: return "quartic_field";
        case Family::OU_MULTIFIELD: return "ou_multifield";
    }
    return "?";
}

inline int field_arity(Family f) {
    switch (f) {
        case Family::OU_BARE:
        case Family::QUARTIC: return 0;
        case Family::OU_MULTIFIELD: return 2;
        default: return 1;
    }
}

inline std::vector<std::string> param_names(Family f) {
    switch (f) {
        case Family::OU_BARE: return {"theta", "mu", "sigma"};
        case Family::OU_FIELD: return {"theta", "mu", "beta", "sigma"};
        case Family::OU_FIELD_HETERO: return {"theta", "mu", "beta", "sigma0", "sigma1"};
        case Family::QUARTIC: return {"a2", "a4", "mu", "sigma"};
        case Family::QUARTIC_FIELD: return {"a2", "a4", "mu", "beta", "sigma"};
        case Family::OU_MULTIFIELD: return {"theta", "mu", "beta1", "beta2", "sigma"};
    }
    return {};
}

struct ModelSpec {
    Family family = Family::OU_BARE;
    std::vector<ObservableSeries> fields;
    double dt = 1.0;
};

struct ModelFit {
    Family family = Family::OU_BARE;
    std::vector<std::string> names;
    std::vector<double> params;
    double loglik = 0.0;
    long n_trans = 0;
    int k = 0;
    double aic = 0.0;
    double bic = 0.0;
    bool converged = false;
    std::string first_date, last_date;

    double param(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return params[i];
        throw std::runtime_error(std::string("ModelFit: no parameter '") + name + "'");
    }
};

struct StepMoments {
    double mean;
    double var;
};

// Exact OU transition over an interval dt with the field held constant at v:
// mean relaxes toward mu + (beta/theta) v, variance is the stationary-bridge
// expression. Field-free callers pass beta=0.
inline StepMoments exact_step(double theta, double mu, double sigma, double beta, double psi,
                              double v, double dt = 1.0) {
    double a = std::exp(-theta * dt);
    double eq = mu + (beta / theta) * v;
    double mean = a * psi + (1.0 - a) * eq;
    double var = sigma * sigma * (1.0 - a * a) / (2.0 * theta);
    return {mean, var};
}

// One-step predictive moments for any family at given external parameters.
// v2 is only read by OU_MULTIFIELD.
inline StepMoments step_moments(Family f, const std::vector<double>& p, double psi, double v1,
                                double v2, double dt = 1.0) {
    switch (f) {
        case Family::OU_BARE:
            return exact_step(p[0], p[1], p[2], 0.0, psi, 0.0, dt);
        case Family::OU_FIELD:
            return exact_step(p[0], p[1], p[3], p[2], psi, v1, dt);
        case Family::OU_MULTIFIELD: {
            double theta = p[0], mu = p[1], sigma = p[4];
            double a = std::exp(-theta * dt);
            double eq = mu + (p[2] * v1 + p[3] * v2) / theta;
            return {a * psi + (1.0 - a) * eq, sigma * sigma * (1.0 - a * a) / (2.0 * theta)};
        }
        case Family::OU_FIELD_HETERO: {
            double theta = p[0], mu = p[1], beta = p[2], s = p[3] + p[4] * psi;
            double drift = -theta * (psi - mu) + beta * v1;
            return {psi + drift * dt, s * s * dt};
        }
        case Family::QUARTIC: {
            double a2 = p[0], a4 = p[1], mu = p[2], sigma = p[3];
            double x = psi - mu;
            return {psi + (-a2 * x - a4 * x * x * x) * dt, sigma * sigma * dt};
        }
        case Family::QUARTIC_FIELD: {
            double a2 = p[0], a4 = p[1], mu = p[2], beta = p[3], sigma = p[4];
            double x = psi - mu;
            return {psi + (-a2 * x - a4 * x * x * x + beta * v1) * dt, sigma * sigma * dt};
        }
    }
    throw std::runtime_error("step_moments: unknown family");
}

namespace detail {

constexpr double kLog2Pi = 1.8378770664093453;

inline bool is_linear_ou(Family f) {
    return f == Family::OU_BARE || f == Family::OU_FIELD || f == Family::OU_MULTIFIELD;
}

// Sufficient statistics of the transitions (psi_t, psi_{t+1}, v_t): means and
// centered cross moments. For the linear OU families the one-step mean is
// affine in (psi, v), so the Gaussian loglik reduces to a quadratic form in
// these numbers and each optimizer evaluation costs O(1) instead of O(n).
struct TransStats {
    double n = 0;
    double mp1 = 0, mp = 0, mv1 = 0, mv2 = 0;                       // means
    double cp1p1 = 0, cp1p = 0, cp1v1 = 0, cp1v2 = 0;               // centered sums
    double cpp = 0, cpv1 = 0, cpv2 = 0, cv1v1 = 0, cv1v2 = 0, cv2v2 = 0;
};

inline TransStats trans_stats(const std::vector<double>& psi, const std::vector<double>& v1,
                              const std::vector<double>& v2) {
    TransStats s;
    const std::size_t n = psi.size() - 1;
    s.n = static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
        s.mp1 += psi[t + 1];
        s.mp += psi[t];
        if (!v1.empty()) s.mv1 += v1[t];
        if (!v2.empty()) s.mv2 += v2[t];
    }
    s.mp1 /= s.n;
    s.mp /= s.n;
    s.mv1 /= s.n;
    s.mv2 /= s.n;
    for (std::size_t t = 0; t < n; ++t) {
        double P1 = psi[t + 1] - s.mp1;
        double P = psi[t] - s.mp;
        double V1 = v1.empty() ? 0.0 : v1[t] - s.mv1;
        double V2 = v2.empty() ? 0.0 : v2[t] - s.mv2;
        s.cp1p1 += P1 * P1;
        s.cp1p += P1 * P;
        s.cp1v1 += P1 * V1;
        s.cp1v2 += P1 * V2;
        s.cpp += P * P;
        s.cpv1 += P * V1;
        s.cpv2 += P * V2;
        s.cv1v1 += V1 * V1;
        s.cv1v2 += V1 * V2;
        s.cv2v2 += V2 * V2;
    }
    return s;
}

// Loglik of psi' ~ N(a psi + c + d1 v1 + d2 v2, q) from the statistics. All
// d-terms enter as d*(...) so a zero loading reproduces the field-free
// arithmetic bit for bit (the nesting identity tests rely on this).
inline double gauss_loglik_from_stats(const TransStats& s, double a, double c, double d1, double d2,
                                      double q) {
    if (!(q > 0.0)) return -std::numeric_limits<double>::infinity();
    double k0 = (s.mp1 - a * s.mp - c) - d1 * s.mv1 - d2 * s.mv2;
    double sw2 = s.cp1p1 + a * (a * s.cpp - 2.0 * s.cp1p) +
                 d1 * (d1 * s.cv1v1 - 2.0 * s.cp1v1 + 2.0 * a * s.cpv1) +
                 d2 * (d2 * s.cv2v2 - 2.0 * s.cp1v2 + 2.0 * a * s.cpv2 + 2.0 * d1 * s.cv1v2);
    double sse = sw2 + s.n * k0 * k0;
    return -0.5 * s.n * (kLog2Pi + std::log(q)) - 0.5 * sse / q;
}

// Maps linear-OU external parameters to the discrete affine form.
struct LinearForm {
    double a, c, d1, d2, q;
};

inline LinearForm linear_form(Family f, const std::vector<double>& p, double dt) {
    LinearForm lf{0, 0, 0, 0, 0};
    double theta = p[0], mu = p[1];
    double sigma = f == Family::OU_BARE ? p[2] : (f == Family::OU_FIELD ? p[3] : p[4]);
    lf.a = std::exp(-theta * dt);
    lf.c = (1.0 - lf.a) * mu;
    if (f == Family::OU_FIELD) lf.d1 = (1.0 - lf.a) * (p[2] / theta);
    if (f == Family::OU_MULTIFIELD) {
        lf.d1 = (1.0 - lf.a) * (p[2] / theta);
        lf.d2 = (1.0 - lf.a) * (p[3] / theta);
    }
    lf.q = sigma * sigma * (1.0 - lf.a * lf.a) / (2.0 * theta);
    return lf;
}

inline double loglik_from_stats(Family f, const std::vector<double>& p, const TransStats& s,
                                double dt) {
    if (!(p[0] > 0.0)) return -std::numeric_limits<double>::infinity();
    LinearForm lf = linear_form(f, p, dt);
    return gauss_loglik_from_stats(s, lf.a, lf.c, lf.d1, lf.d2, lf.q);
}

inline double loglik_impl(Family f, const std::vector<double>& p, const std::vector<double>& psi,
                          const std::vector<double>& v1, const std::vector<double>& v2, double dt,
                          const std::vector<std::string>* dates) {
    if (is_linear_ou(f)) {
        if (!(p[0] > 0.0)) return -std::numeric_limits<double>::infinity();
        return loglik_from_stats(f, p, trans_stats(psi, v1, v2), dt);
    }
    double ll = 0.0;
    const std::size_t n = psi.size();
    for (std::size_t t = 0; t + 1 < n; ++t) {
        double a = v1.empty() ? 0.0 : v1[t];
        double b = v2.empty() ? 0.0 : v2[t];
        if (f == Family::OU_FIELD_HETERO) {
            double s = p[3] + p[4] * psi[t];
            if (!(s > 0.0)) {
                if (dates)
                    throw std::runtime_error("non-positive state-dependent sigma at " + (*dates)[t]);
                return -std::numeric_limits<double>::infinity();
            }
        }
        StepMoments m = step_moments(f, p, psi[t], a, b, dt);
        if (!(m.var > 0.0)) return -std::numeric_limits<double>::infinity();
        double z = psi[t + 1] - m.mean;
        ll += -0.5 * (kLog2Pi + std::log(m.var) + z * z / m.var);
    }
    return ll;
}

inline void check_spec_alignment(const ModelSpec& spec, const ObservableSeries& series) {
    if (static_cast<int>(spec.fields.size()) != field_arity(spec.family))
        throw std::runtime_error(std::string("model ") + family_name(spec.family) + " expects " +
                                 std::to_string(field_arity(spec.family)) + " field(s), got " +
                                 std::to_string(spec.fields.size()));
    for (const auto& fld : spec.fields)
        if (fld.dates != series.dates)
            throw std::runtime_error("field '" + fld.label + "' is not aligned with the observable");
}

}  // namespace detail

inline double loglik(const ModelSpec& spec, const std::vector<double>& params,
                     const ObservableSeries& series) {
    if (series.size() < 2) throw std::runtime_error("loglik: need at least 2 observations");
    check_series(series);
    detail::check_spec_alignment(spec, series);
    if (params.size() != param_names(spec.family).size())
        throw std::runtime_error("loglik: wrong parameter count");
    const std::vector<double> empty;
    const std::vector<double>& v1 = spec.fields.empty() ? empty : spec.fields[0].values;
    const std::vector<double>& v2 = spec.fields.size() > 1 ? spec.fields[1].values : empty;
    return detail::loglik_impl(spec.family, params, series.values, v1, v2, spec.dt, &series.dates);
}

namespace detail {

struct OlsPreseed {
    double theta = 0.05, mu = 0.0, sigma = 0.01;
    std::vector<double> beta;   // one per field
    bool usable = false;
};

// Exact MLE of the discrete AR form psi' = a psi + c + sum d_i v_i + eps via
// OLS, mapped back to (theta, mu, beta_i, sigma). For the exact-OU families
// this mapping IS the continuous-parameter MLE whenever a lands in (0,1).
inline OlsPreseed ols_preseed(const std::vector<double>& psi,
                              const std::vector<std::vector<double>>& fields, double dt) {
    OlsPreseed out;
    const long n = static_cast<long>(psi.size()) - 1;
    const long k = 2 + static_cast<long>(fields.size());
    if (n <= k) return out;
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (long t = 0; t < n; ++t) {
        X(t, 0) = 1.0;
        X(t, 1) = psi[static_cast<std::size_t>(t)];
        for (std::size_t j = 0; j < fields.size(); ++j)
            X(t, 2 + static_cast<long>(j)) = fields[j][static_cast<std::size_t>(t)];
        y(t) = psi[static_cast<std::size_t>(t) + 1];
    }
    OlsFit f;
    try {
        f = ols(X, y);
    } catch (const std::runtime_error&) {
        return out;
    }
    double a = f.coef(1);
    double q = f.rss / static_cast<double>(n);
    if (!(a > 1e-8 && a < 1.0 - 1e-8) || !(q > 0.0)) return out;
    out.theta = -std::log(a) / dt;
    out.mu = f.coef(0) / (1.0 - a);
    for (std::size_t j = 0; j < fields.size(); ++j)
        out.beta.push_back(out.theta * f.coef(2 + static_cast<long>(j)) * dt / (1.0 - a));
    out.sigma = std::sqrt(2.0 * out.theta * q / (1.0 - a * a));
    out.usable = out.theta > 0.0 && out.sigma > 0.0;
    return out;
}

}  // namespace detail

inline ModelFit fit(const ModelSpec& spec, const ObservableSeries& series, std::uint64_t seed) {
    if (series.size() < 8) throw std::runtime_error("fit: series too short");
    check_series(series);
    detail::check_spec_alignment(spec, series);
    const std::vector<double>& psi = series.values;
    double psi_mean = mean_of(psi);
    double psi_sd;
    try {
        psi_sd = sd_of(psi);
    } catch (...) {
        psi_sd = 0.0;
    }
    // relative threshold: a constant series still shows ~1e-16 of rounding
    // noise in the two-pass sd, which must not be mistaken for dynamics
    if (!(psi_sd > 1e-12 * (1.0 + std::abs(psi_mean))))
        throw std::runtime_error("fit: degenerate (constant) series");

    std::vector<std::vector<double>> fvals;
    for (const auto& f : spec.fields) fvals.push_back(f.values);
    const double dt = spec.dt;

    // Preseed from the linear-AR closed form; quartic/hetero reuse its theta
    // and sigma scales.
    std::vector<std::vector<double>> lin_fields = fvals;
    if (spec.family == Family::QUARTIC) lin_fields.clear();
    if (spec.family == Family::QUARTIC_FIELD) lin_fields = {fvals[0]};
    detail::OlsPreseed ps = detail::ols_preseed(psi, lin_fields, dt);
    if (!ps.usable) {
        ps.theta = 0.05;
        ps.mu = psi_mean;
        ps.sigma = std::max(1e-9, psi_sd * std::sqrt(0.1));
        ps.beta.assign(lin_fields.size(), 0.0);
        ps.usable = true;
    }
    double theta_lo = std::max(1e-6, ps.theta / 8.0);
    double theta_hi = std::max(theta_lo * 2.0, std::min(4.0 / dt, ps.theta * 8.0));
    double sigma_lo = std::max(1e-12, ps.sigma / 8.0);
    double sigma_hi = std::max(sigma_lo * 2.0, ps.sigma * 8.0);
    double mu_hw = 8.0 * psi_sd + 4.0 * std::abs(ps.mu - psi_mean) + 1e-3;

    std::vector<double> fld_sd;
    for (const auto& v : fvals) fld_sd.push_back(v.size() > 1 ? sd_of(v) : 0.0);
    auto beta_hw = [&](std::size_t j, double beta_hat) {
        double scale = ps.theta * psi_sd / std::max(fld_sd.empty() ? 0.0 : fld_sd[j], 1e-9);
        return 4.0 * std::abs(beta_hat) + 4.0 * scale + 1e-6;
    };

    std::vector<ParamSpec> specs;
    std::vector<double> preseed;
    switch (spec.family) {
        case Family::OU_BARE:
            specs = {{"theta", ParamSpec::Scale::Log, theta_lo, theta_hi},
                     {"mu", ParamSpec::Scale::Linear, ps.mu - mu_hw, ps.mu + mu_hw},
                     {"sigma", ParamSpec::Scale::Log, sigma_lo, sigma_hi}};
            preseed = {ps.theta, ps.mu, ps.sigma};
            break;
        case Family::OU_FIELD:
            specs = {{"theta", ParamSpec::Scale::Log, theta_lo, theta_hi},
                     {"mu", ParamSpec::Scale::Linear, ps.mu - mu_hw, ps.mu + mu_hw},
                     {"beta", ParamSpec::Scale::Linear, ps.beta[0] - beta_hw(0, ps.beta[0]),
                      ps.beta[0] + beta_hw(0, ps.beta[0])},
                     {"sigma", ParamSpec::Scale::Log, sigma_lo, sigma_hi}};
            preseed = {ps.theta, ps.mu, ps.beta[0], ps.sigma};
            break;
        case Family::OU_MULTIFIELD:
            specs = {{"theta", ParamSpec::Scale::Log, theta_lo, theta_hi},
                     {"mu", ParamSpec::Scale::Linear, ps.mu - mu_hw, ps.mu + mu_hw},
                     {"beta1", ParamSpec::Scale::Linear, ps.beta[0] - beta_hw(0, ps.beta[0]),
                      ps.beta[0] + beta_hw(0, ps.beta[0])},
                     {"beta2", ParamSpec::Scale::Linear, ps.beta[1] - beta_hw(1, ps.beta[1]),
                      ps.beta[1] + beta_hw(1, ps.beta[1])},
                     {"sigma", ParamSpec::Scale::Log, sigma_lo, sigma_hi}};
            preseed = {ps.theta, ps.mu, ps.beta[0], ps.beta[1], ps.sigma};
            break;
        case Family::OU_FIELD_HETERO: {
            double psi_absmax = 0.0;
            for (double x : psi) psi_absmax = std::max(psi_absmax, std::abs(x));
            double s1_hw = 4.0 * ps.sigma / std::max(psi_absmax, 1e-9);
            specs = {{"theta", ParamSpec::Scale::Log, theta_lo, theta_hi},
                     {"mu", ParamSpec::Scale::Linear, ps.mu - mu_hw, ps.mu + mu_hw},
                     {"beta", ParamSpec::Scale::Linear, ps.beta[0] - beta_hw(0, ps.beta[0]),
                      ps.beta[0] + beta_hw(0, ps.beta[0])},
                     {"sigma0", ParamSpec::Scale::Log, sigma_lo, sigma_hi},
                     {"sigma1", ParamSpec::Scale::Linear, -s1_hw, s1_hw}};
            preseed = {ps.theta, ps.mu, ps.beta[0], ps.sigma, 0.0};
            break;
        }
        case Family::QUARTIC:
        case Family::QUARTIC_FIELD: {
            bool with_field = spec.family == Family::QUARTIC_FIELD;
            // Regress increments on centered powers for the cubic scale.
            const long n = static_cast<long>(psi.size()) - 1;
            Eigen::MatrixXd X(n, with_field ? 4 : 3);
            Eigen::VectorXd y(n);
            for (long t = 0; t < n; ++t) {
                double xc = psi[static_cast<std::size_t>(t)] - psi_mean;
                X(t, 0) = 1.0;
                X(t, 1) = xc;
                X(t, 2) = xc * xc * xc;
                if (with_field) X(t, 3) = fvals[0][static_cast<std::size_t>(t)];
                y(t) = psi[static_cast<std::size_t>(t) + 1] - psi[static_cast<std::size_t>(t)];
            }
            double a4_hat = 0.0;
            try {
                OlsFit f = ols(X, y);
                a4_hat = std::max(0.0, -f.coef(2) / dt);
            } catch (const std::runtime_error&) {
            }
            double a4_hi = std::max(8.0 * a4_hat, 8.0 * ps.theta / std::max(psi_sd * psi_sd, 1e-12));
            double a4_seed = std::min(std::max(a4_hat, 1e-4 * a4_hi), 0.9 * a4_hi);
            specs = {{"a2", ParamSpec::Scale::Log, theta_lo, theta_hi},
                     {"a4", ParamSpec::Scale::Box, 0.0, a4_hi},
                     {"mu", ParamSpec::Scale::Linear, ps.mu - mu_hw, ps.mu + mu_hw}};
            preseed = {ps.theta, a4_seed, ps.mu};
            if (with_field) {
                specs.push_back({"beta", ParamSpec::Scale::Linear, ps.beta[0] - beta_hw(0, ps.beta[0]),
                                 ps.beta[0] + beta_hw(0, ps.beta[0])});
                preseed.push_back(ps.beta[0]);
            }
            specs.push_back({"sigma", ParamSpec::Scale::Log, sigma_lo, sigma_hi});
            preseed.push_back(ps.sigma);
            break;
        }
    }

    const std::vector<double> empty;
    const std::vector<double>& v1 = fvals.empty() ? empty : fvals[0];
    const std::vector<double>& v2 = fvals.size() > 1 ? fvals[1] : empty;
    MaximizeResult r;
    if (detail::is_linear_ou(spec.family)) {
        detail::TransStats st = detail::trans_stats(psi, v1, v2);
        auto obj = [&st, f = spec.family, dt](const std::vector<double>& p) {
            return detail::loglik_from_stats(f, p, st, dt);
        };
        r = maximize(specs, obj, seed, {preseed});
    } else {
        auto obj = [&](const std::vector<double>& p) {
            return detail::loglik_impl(spec.family, p, psi, v1, v2, dt, nullptr);
        };
        r = maximize(specs, obj, seed, {preseed});
    }

    ModelFit out;
    out.family = spec.family;
    out.names = param_names(spec.family);
    out.params = r.params;
    out.loglik = r.loglik;
    out.n_trans = static_cast<long>(series.size()) - 1;
    out.k = static_cast<int>(out.params.size());
    out.aic = 2.0 * out.k - 2.0 * out.loglik;
    out.bic = out.k * std::log(static_cast<double>(out.n_trans)) - 2.0 * out.loglik;
    out.converged = r.converged;
    out.first_date = series.dates.front();
    out.last_date = series.dates.back();
    return out;
}

struct AttributionSummary {
    double tau_auto;
    double tau_cond;
    double chi;
    double scpa;
};

inline AttributionSummary attribution(const ModelFit& fit0, const ModelFit& fit2) {
    if (fit0.family != Family::OU_BARE) throw std::runtime_error("attribution: first fit must be the bare OU model");
    if (fit2.family != Family::OU_FIELD) throw std::runtime_error("attribution: second fit must be the field OU model");
    if (fit0.n_trans != fit2.n_trans || fit0.first_date != fit2.first_date ||
        fit0.last_date != fit2.last_date)
        throw std::runtime_error("attribution: fits are on different samples");
    AttributionSummary s{};
    s.tau_auto = 1.0 / fit0.param("theta");
    s.tau_cond = 1.0 / fit2.param("theta");
    s.chi = fit2.param("beta") / fit2.param("theta");
    s.scpa = 1.0 - s.tau_cond / s.tau_auto;
    return s;
}

inline double mu_eff(const ModelFit& fit2, double v) {
    if (field_arity(fit2.family) != 1)
        throw std::runtime_error("mu_eff: fit is not a single-field model");
    return fit2.param("mu") + fit2.param("beta") / fit2.param("theta") * v;
}

// Probability-integral-transform series: u_t = Phi((psi_{t+1} - m_t)/sqrt(q_t)),
// dated at the predicted observation.
inline ObservableSeries pit_series(const ModelFit& fit, const ObservableSeries& series,
                                   const std::vector<ObservableSeries>& fields, double dt = 1.0) {
    if (static_cast<int>(fields.size()) != field_arity(fit.family))
        throw std::runtime_error("pit_series: field arity mismatch");
    for (const auto& f : fields)
        if (f.dates != series.dates) throw std::runtime_error("pit_series: fields not aligned");
    ObservableSeries u;
    u.label = "pit";
    for (std::size_t t = 0; t + 1 < series.size(); ++t) {
        double v1 = fields.empty() ? 0.0 : fields[0].values[t];
        double v2 = fields.size() > 1 ? fields[1].values[t] : 0.0;
        StepMoments m = step_moments(fit.family, fit.params, series.values[t], v1, v2, dt);
        u.dates.push_back(series.dates[t + 1]);
        u.values.push_back(normal_cdf((series.values[t + 1] - m.mean) / std::sqrt(m.var)));
    }
    return u;
}

// Kolmogorov-Smirnov distance from the uniform distribution on (0,1).
inline double ks_uniform(std::vector<double> u) {
    if (u.empty()) throw std::runtime_error("ks_uniform: empty sample");
    std::sort(u.begin(), u.end());
    double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - u[i]));
        d = std::max(d, std::abs(u[i] - static_cast<double>(i) / n));
    }
    return d;
}

inline double ks_critical_5pct(std::size_t n) {
    return 1.358 / std::sqrt(static_cast<double>(n));
}

}  // namespace fieldattr
