#pragma once

// Ground-truth generators and brute-force oracles. Everything here is driven
// by the counter-based generator in rng.hpp, so a (spec, seed) pair pins the
// output bit-for-bit. The exact simulators are what the estimators are graded
// against; the Euler oracle is deliberately dumb so it cannot share a bug
// with the closed forms.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fieldattr/market_data.hpp"
#include "fieldattr/ou_models.hpp"
#include "fieldattr/rng.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/twod.hpp"

namespace fieldattr {

// ---------------------------------------------------------------------------
// Civil-date arithmetic (proleptic Gregorian, days since 1970-01-01).

inline long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

inline void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long yr = static_cast<long>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yr + (m <= 2));
}

// 0 = Sunday ... 6 = Saturday.
inline int weekday_from_days(long z) {
    long w = (z + 4) % 7;
    return static_cast<int>(w < 0 ? w + 7 : w);
}

inline long parse_civil(const std::string& iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw std::runtime_error("parse_civil: expected YYYY-MM-DD, got '" + iso + "'");
    int y = std::stoi(iso.substr(0, 4));
    unsigned m = static_cast<unsigned>(std::stoi(iso.substr(5, 2)));
    unsigned d = static_cast<unsigned>(std::stoi(iso.substr(8, 2)));
    return days_from_civil(y, m, d);
}

inline std::string format_civil(long z) {
    int y;
    unsigned m, d;
    civil_from_days(z, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

// n consecutive weekdays starting at the first weekday >= start.
inline std::vector<std::string> weekday_calendar(long n, const std::string& start = "2004-01-02") {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    long z = parse_civil(start);
    while (static_cast<long>(out.size()) < n) {
        int w = weekday_from_days(z);
        if (w != 0 && w != 6) out.push_back(format_civil(z));
        ++z;
    }
    return out;
}

// ---------------------------------------------------------------------------
// SDE pieces shared by the oracle and the sub-stepped simulators.

inline double family_drift(Family f, const std::vector<double>& p, double psi, double v1,
                           double v2) {
    switch (f) {
        case Family::OU_BARE: return -p[0] * (psi - p[1]);
        case Family::OU_FIELD: return -p[0] * (psi - p[1]) + p[2] * v1;
        case Family::OU_MULTIFIELD: return -p[0] * (psi - p[1]) + p[2] * v1 + p[3] * v2;
        case Family::OU_FIELD_HETERO: return -p[0] * (psi - p[1]) + p[2] * v1;
        case Family::QUARTIC: {
            double x = psi - p[2];
            return -p[0] * x - p[1] * x * x * x;
        }
        case Family::QUARTIC_FIELD: {
            double x = psi - p[2];
            return -p[0] * x - p[1] * x * x * x + p[3] * v1;
        }
    }
    throw std::runtime_error("family_drift: unknown family");
}

inline double family_vol(Family f, const std::vector<double>& p, double psi) {
    switch (f) {
        case Family::OU_BARE: return p[2];
        case Family::OU_FIELD: return p[3];
        case Family::OU_MULTIFIELD: return p[4];
        case Family::OU_FIELD_HETERO: return p[3] + p[4] * psi;
        case Family::QUARTIC: return p[3];
        case Family::QUARTIC_FIELD: return p[4];
    }
    throw std::runtime_error("family_vol: unknown family");
}

namespace detail_syn {

inline bool exact_family(Family f) {
    return f == Family::OU_BARE || f == Family::OU_FIELD || f == Family::OU_MULTIFIELD;
}

inline void check_explosion(double psi) {
    if (!std::isfinite(psi) || std::abs(psi) > 1e6)
        throw std::runtime_error("simulate_1d: path exploded (|psi| > 1e6)");
}

}  // namespace detail_syn

// ---------------------------------------------------------------------------
// simulate_1d: exact one-day transitions for the linear-OU families,
// dt=1e-3 Euler sub-steps aggregated to daily for the rest. Fields are held
// at their left-endpoint value across each day, matching the transition
// convention the likelihood uses. Default start: stationary draw for the
// exact families, the drift minimum mu for the nonlinear ones.
inline ObservableSeries simulate_1d(Family f, const std::vector<double>& p, long n,
                                    std::uint64_t seed,
                                    const std::vector<ObservableSeries>& fields = {},
                                    std::optional<double> psi0 = {}) {
    int arity = field_arity(f);
    if (static_cast<int>(fields.size()) != arity)
        throw std::runtime_error("simulate_1d: family " + std::string(family_name(f)) +
                                 " needs " + std::to_string(arity) + " field series, got " +
                                 std::to_string(fields.size()));
    if (n < 2) throw std::runtime_error("simulate_1d: need n >= 2");
    if (p.size() != param_names(f).size())
        throw std::runtime_error("simulate_1d: wrong parameter count");
    for (const auto& fs : fields) {
        check_series(fs);
        if (static_cast<long>(fs.values.size()) < n)
            throw std::runtime_error("simulate_1d: field series shorter than n");
    }
    if (arity == 2 && fields[0].dates != fields[1].dates)
        throw std::runtime_error("simulate_1d: field calendars disagree");

    ObservableSeries out;
    out.label = std::string("sim_") + family_name(f);
    if (arity > 0)
        out.dates.assign(fields[0].dates.begin(), fields[0].dates.begin() + n);
    else
        out.dates = weekday_calendar(n);
    out.values.resize(static_cast<std::size_t>(n));

    auto v1 = [&](long t) { return arity >= 1 ? fields[0].values[static_cast<std::size_t>(t)] : 0.0; };
    auto v2 = [&](long t) { return arity >= 2 ? fields[1].values[static_cast<std::size_t>(t)] : 0.0; };

    Philox rng = Philox(seed, 0).substream("simulate-1d");

    double psi;
    if (psi0) {
        psi = *psi0;
    } else if (detail_syn::exact_family(f)) {
        double theta = p[0], mu = p[1];
        double beta1 = 0.0, beta2 = 0.0, sigma = p.back();
        if (f == Family::OU_FIELD) beta1 = p[2];
        if (f == Family::OU_MULTIFIELD) { beta1 = p[2]; beta2 = p[3]; }
        double eq = mu + (beta1 * v1(0) + beta2 * v2(0)) / theta;
        double sd = sigma / std::sqrt(2.0 * theta);
        psi = eq + sd * rng.normal();
    } else {
        // nonlinear families: start at the drift minimum
        psi = (f == Family::OU_FIELD_HETERO) ? p[1] : p[2];
    }
    out.values[0] = psi;

    const bool exact = detail_syn::exact_family(f);
    const double sub_dt = 1e-3;
    const long n_sub = 1000;

    for (long t = 0; t + 1 < n; ++t) {
        if (exact) {
            StepMoments m = step_moments(f, p, psi, v1(t), v2(t), 1.0);
            psi = m.mean + std::sqrt(m.var) * rng.normal();
        } else {
            double a = v1(t), b = v2(t);
            for (long s = 0; s < n_sub; ++s) {
                double drift = family_drift(f, p, psi, a, b);
                double vol = family_vol(f, p, psi);
                psi += drift * sub_dt + vol * std::sqrt(sub_dt) * rng.normal();
                detail_syn::check_explosion(psi);
            }
        }
        detail_syn::check_explosion(psi);
        out.values[static_cast<std::size_t>(t + 1)] = psi;
    }
    return out;
}

// ---------------------------------------------------------------------------
// simulate_var1: exact discrete stepping of the 2D linear system. Noise is
// shaped with the symmetric square root of Q so rank-deficient covariances
// are fine. Starts at the system mean.
inline AlignedPair simulate_var1(const LinearSystem2D& sys, long n, std::uint64_t seed) {
    if (n < 2) throw std::runtime_error("simulate_var1: need n >= 2");
    Eigen::EigenSolver<Eigen::Matrix2d> es(sys.A);
    for (int i = 0; i < 2; ++i)
        if (es.eigenvalues()(i).real() >= 0.0)
            throw std::runtime_error("simulate_var1: drift matrix is not stable");

    Discretization d = discretize(sys, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(d.q);
    if (qe.info() != Eigen::Success)
        throw std::runtime_error("simulate_var1: eigen decomposition of Q failed");
    Eigen::Vector2d ev = qe.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::Matrix2d root = qe.eigenvectors() * ev.asDiagonal();

    Philox rng = Philox(seed, 0).substream("simulate-var1");
    AlignedPair out;
    out.dates = weekday_calendar(n);
    out.x.resize(static_cast<std::size_t>(n));
    out.y.resize(static_cast<std::size_t>(n));

    Eigen::Vector2d x = sys.mean;
    for (long t = 0; t < n; ++t) {
        out.x[static_cast<std::size_t>(t)] = x(0);
        out.y[static_cast<std::size_t>(t)] = x(1);
        if (t + 1 == n) break;
        Eigen::Vector2d z(rng.normal(), rng.normal());
        x = d.intercept + d.phi * x + root * z;
        if (!x.allFinite()) throw std::runtime_error("simulate_var1: path exploded");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Brute-force Euler oracle for the one-day transition moments. Deliberately
// naive: n_paths independent substreams, fixed-step Euler, compensated
// accumulation so the answer does not depend on summation order.

struct EulerOracle {
    double mean = 0.0;
    double var = 0.0;
    double se_mean = 0.0;
    double se_var = 0.0;
    long n_paths = 0;
};

namespace detail_syn {

struct Kahan {
    double sum = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

}  // namespace detail_syn

inline EulerOracle euler_oracle(Family f, const std::vector<double>& p, double psi0, double v,
                                long n_paths = 100000, double dt = 1e-3,
                                std::uint64_t seed = 1) {
    if (n_paths < 2) throw std::runtime_error("euler_oracle: need n_paths >= 2");
    long n_steps = std::lround(1.0 / dt);
    Philox base = Philox(seed, 0).substream("euler-oracle");
    std::vector<double> finals(static_cast<std::size_t>(n_paths));
    double sqrt_dt = std::sqrt(dt);
    for (long i = 0; i < n_paths; ++i) {
        Philox rng = base.substream(static_cast<std::uint64_t>(i));
        double psi = psi0;
        for (long s = 0; s < n_steps; ++s) {
            double drift = family_drift(f, p, psi, v, 0.0);
            double vol = family_vol(f, p, psi);
            psi += drift * dt + vol * sqrt_dt * rng.normal();
        }
        finals[static_cast<std::size_t>(i)] = psi;
    }
    detail_syn::Kahan s1;
    for (double x : finals) s1.add(x);
    double mean = s1.sum / static_cast<double>(n_paths);
    detail_syn::Kahan s2, s4;
    for (double x : finals) {
        double d2 = (x - mean) * (x - mean);
        s2.add(d2);
        s4.add(d2 * d2);
    }
    double np = static_cast<double>(n_paths);
    EulerOracle out;
    out.n_paths = n_paths;
    out.mean = mean;
    out.var = s2.sum / (np - 1.0);
    out.se_mean = std::sqrt(out.var / np);
    // se of the sample variance from the fourth central moment
    double m4 = s4.sum / np;
    double m2 = s2.sum / np;
    double var_of_var = (m4 - m2 * m2 * (np - 3.0) / (np - 1.0)) / np;
    out.se_var = std::sqrt(std::max(var_of_var, 0.0));
    return out;
}

// ---------------------------------------------------------------------------
// Planted market worlds. A hidden persistent driver u sets both the log-VIX
// level (instantly) and the equilibrium of a slowly relaxing correlation
// state (with lag), so the field genuinely leads the market mode. Per-stock
// volatilities are constant, which makes the mechanical proxy a function of
// the correlation structure alone: the informational channel is the only
// honest explanation, which is exactly what the decomposition tests need.

struct PlantedWorldParams {
    long n_stocks = 12;
    long n_days = 1600;       // price rows; the panel drops the first date
    double phi_u = 0.98;      // AR(1) persistence of the hidden driver
    double s_u = 0.15;        // innovation sd of the driver
    double theta_x = 0.08;    // relaxation rate of the correlation state
    double s_x = 0.02;        // noise on the correlation state
    double alpha1 = 0.9;      // driver -> correlation-state equilibrium gain
    double rho_lo = 0.08;     // correlation band
    double rho_hi = 0.70;
    double c0 = 2.9;          // log VIX intercept (exp(2.9) ~ 18)
    double c1 = 0.35;         // driver -> log VIX gain
    double vix_noise = 0.02;  // iid log VIX measurement noise
    double vol_lo = 0.008;    // per-stock constant daily vols
    double vol_hi = 0.025;
};

struct PlantedWorld {
    ReturnPanel panel;
    ObservableSeries vix;         // level, on all price dates
    std::vector<std::string> price_dates;
    Eigen::MatrixXd prices;       // n_stocks x n_days
    std::vector<double> rho;      // pairwise correlation path, per price date
    std::vector<double> u;        // hidden driver, per price date
};

inline PlantedWorld planted_world(const PlantedWorldParams& w, std::uint64_t seed) {
    if (w.n_stocks < 3 || w.n_days < 10) throw std::runtime_error("planted_world: too small");
    if (!(w.rho_lo > 0.0 && w.rho_hi < 1.0 && w.rho_lo < w.rho_hi))
        throw std::runtime_error("planted_world: correlation band must sit inside (0,1)");
    const long n = w.n_days;
    const long ns = w.n_stocks;
    Philox base = Philox(seed, 0).substream("planted-world");
    Philox rng_u = base.substream("driver");
    Philox rng_x = base.substream("corr-state");
    Philox rng_r = base.substream("returns");
    Philox rng_v = base.substream("vix");
    Philox rng_s = base.substream("vols");

    std::vector<double> vols(static_cast<std::size_t>(ns));
    for (auto& s : vols) s = rng_s.uniform(w.vol_lo, w.vol_hi);

    PlantedWorld out;
    out.price_dates = weekday_calendar(n);
    out.u.resize(static_cast<std::size_t>(n));
    out.rho.resize(static_cast<std::size_t>(n));
    out.vix.label = "vix_close";
    out.vix.dates = out.price_dates;
    out.vix.values.resize(static_cast<std::size_t>(n));

    double u_sd = w.s_u / std::sqrt(1.0 - w.phi_u * w.phi_u);
    double u = u_sd * rng_u.normal();
    double x = w.alpha1 * u;  // start at the current equilibrium
    auto squash = [&](double xi) {
        return w.rho_lo + (w.rho_hi - w.rho_lo) / (1.0 + std::exp(-xi));
    };

    out.prices.resize(ns, n);
    Eigen::VectorXd logp(ns);
    for (long i = 0; i < ns; ++i) logp(i) = std::log(100.0 + 10.0 * static_cast<double>(i));
    for (long i = 0; i < ns; ++i) out.prices(i, 0) = std::exp(logp(i));

    for (long t = 0; t < n; ++t) {
        out.u[static_cast<std::size_t>(t)] = u;
        double rho = squash(x);
        out.rho[static_cast<std::size_t>(t)] = rho;
        out.vix.values[static_cast<std::size_t>(t)] =
            std::exp(w.c0 + w.c1 * u + w.vix_noise * rng_v.normal());
        if (t + 1 == n) break;
        // returns realized over day t -> t+1 carry the correlation state at t+1
        double rho_next = squash(x + w.theta_x * (w.alpha1 * u - x));
        double f = rng_r.normal();
        for (long i = 0; i < ns; ++i) {
            double e = rng_r.normal();
            double r = vols[static_cast<std::size_t>(i)] *
                       (std::sqrt(rho_next) * f + std::sqrt(1.0 - rho_next) * e);
            logp(i) += r;
            out.prices(i, t + 1) = std::exp(logp(i));
        }
        x += w.theta_x * (w.alpha1 * u - x) + w.s_x * rng_x.normal();
        u = w.phi_u * u + w.s_u * rng_u.normal();
    }

    std::vector<std::string> tickers(static_cast<std::size_t>(ns));
    for (long i = 0; i < ns; ++i) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "S%02d", static_cast<int>(i));
        tickers[static_cast<std::size_t>(i)] = buf;
    }
    out.panel = panel_from_prices(tickers, out.price_dates, out.prices);
    return out;
}

// Planted lead-lag pair for direction-recovery tests: x is autonomous AR(1),
// y is built from lagged x plus independent noise, so causality runs x -> y
// and only x -> y.
inline AlignedPair planted_granger_pair(long n, std::uint64_t seed, double phi = 0.9,
                                        double b1 = 0.8, double b2 = 0.4) {
    if (n < 20) throw std::runtime_error("planted_granger_pair: need n >= 20");
    Philox rng = Philox(seed, 0).substream("planted-granger");
    std::size_t m = static_cast<std::size_t>(n) + 2;
    std::vector<double> x(m), y(m);
    double x_sd = 1.0 / std::sqrt(1.0 - phi * phi);
    x[0] = x_sd * rng.normal();
    y[0] = rng.normal();
    for (std::size_t t = 1; t < m; ++t) {
        x[t] = phi * x[t - 1] + rng.normal();
        double lag2 = t >= 2 ? x[t - 2] : 0.0;
        y[t] = b1 * x[t - 1] + b2 * lag2 + rng.normal();
    }
    AlignedPair out;
    out.dates = weekday_calendar(n);
    out.x.assign(x.begin() + 2, x.end());
    out.y.assign(y.begin() + 2, y.end());
    return out;
}

}  // namespace fieldattr
