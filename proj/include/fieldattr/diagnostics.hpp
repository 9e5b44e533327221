#pragma once

// Model-free persistence diagnostics: ACF summaries, quiet-regime
// segmentation and pooling, the episode bootstrap, field-stripped residuals,
// and bivariate Granger tests.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/ou_models.hpp"
#include "fieldattr/rng.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"

namespace fieldattr {

struct AcfSummary {
    std::vector<double> acf;             // lags 0..L
    std::optional<long> efolding_lag;    // first lag with acf < 1/e
    double integrated_60 = 0.0;          // sum over lags 1..min(L,60)
    double integrated_90 = 0.0;          // sum over lags 1..min(L,90)
};

namespace detail_diag {

// Biased autocovariance normalization: divide by n, subtract the sample mean
// of the given range.
inline std::vector<double> acf_of_range(const double* x, long n, long max_lag) {
    double mean = 0.0;
    for (long t = 0; t < n; ++t) mean += x[t];
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (long t = 0; t < n; ++t) c0 += (x[t] - mean) * (x[t] - mean);
    c0 /= static_cast<double>(n);
    if (!(c0 > 0.0)) throw std::runtime_error("acf: constant series has no autocorrelation");
    std::vector<double> acf(static_cast<std::size_t>(max_lag) + 1);
    acf[0] = 1.0;
    for (long l = 1; l <= max_lag; ++l) {
        double c = 0.0;
        for (long t = 0; t + l < n; ++t) c += (x[t] - mean) * (x[t + l] - mean);
        acf[static_cast<std::size_t>(l)] = c / static_cast<double>(n) / c0;
    }
    return acf;
}

inline AcfSummary summarize(std::vector<double> acf) {
    AcfSummary s;
    s.acf = std::move(acf);
    const double thresh = std::exp(-1.0);
    for (std::size_t l = 1; l < s.acf.size(); ++l) {
        if (s.acf[l] < thresh) {
            s.efolding_lag = static_cast<long>(l);
            break;
        }
    }
    for (std::size_t l = 1; l < s.acf.size() && l <= 60; ++l) s.integrated_60 += s.acf[l];
    for (std::size_t l = 1; l < s.acf.size() && l <= 90; ++l) s.integrated_90 += s.acf[l];
    return s;
}

}  // namespace detail_diag

inline AcfSummary acf_summary(const ObservableSeries& series, long max_lag = 120) {
    if (static_cast<long>(series.size()) <= max_lag + 1)
        throw std::runtime_error("acf_summary: series must be longer than max_lag + 1");
    check_series(series);
    return detail_diag::summarize(
        detail_diag::acf_of_range(series.values.data(), static_cast<long>(series.size()), max_lag));
}

struct QuietSpec {
    enum class Mode { STRICT_DAILY, ROLLING_MEDIAN } mode = Mode::STRICT_DAILY;
    long median_window = 20;   // trailing, used by ROLLING_MEDIAN
    double band_lo = 15.0;
    double band_hi = 18.0;
    long min_len = 120;
};

struct QuietSegment {
    std::size_t begin = 0, end = 0;   // half-open index range
    std::string begin_date, end_date;
    std::size_t length() const { return end - begin; }
};

// Maximal contiguous runs where the (raw or trailing-rolling-median) field
// level stays inside [band_lo, band_hi], kept if at least min_len days long.
// In ROLLING_MEDIAN mode the first window-1 days carry no defined median and
// cannot belong to a segment.
inline std::vector<QuietSegment> quiet_segments(const ObservableSeries& vix, const QuietSpec& spec) {
    if (!(spec.band_lo < spec.band_hi)) throw std::runtime_error("quiet_segments: band_lo must be < band_hi");
    if (spec.min_len < 1) throw std::runtime_error("quiet_segments: min_len must be >= 1");
    if (static_cast<long>(vix.size()) <= spec.min_len)
        throw std::runtime_error("quiet_segments: series not longer than min_len");
    check_series(vix);

    const std::size_t n = vix.size();
    std::vector<bool> in_band(n, false);
    if (spec.mode == QuietSpec::Mode::STRICT_DAILY) {
        for (std::size_t t = 0; t < n; ++t)
            in_band[t] = vix.values[t] >= spec.band_lo && vix.values[t] <= spec.band_hi;
    } else {
        const std::size_t w = static_cast<std::size_t>(spec.median_window);
        if (w < 1 || n < w) throw std::runtime_error("quiet_segments: median window larger than series");
        std::vector<double> buf;
        for (std::size_t t = w - 1; t < n; ++t) {
            buf.assign(vix.values.begin() + static_cast<long>(t - w + 1),
                       vix.values.begin() + static_cast<long>(t + 1));
            double med = median_of(buf);
            in_band[t] = med >= spec.band_lo && med <= spec.band_hi;
        }
    }

    std::vector<QuietSegment> out;
    std::size_t t = 0;
    while (t < n) {
        if (!in_band[t]) {
            ++t;
            continue;
        }
        std::size_t b = t;
        while (t < n && in_band[t]) ++t;
        if (t - b >= static_cast<std::size_t>(spec.min_len)) {
            QuietSegment s;
            s.begin = b;
            s.end = t;
            s.begin_date = vix.dates[b];
            s.end_date = vix.dates[t - 1];
            out.push_back(std::move(s));
        }
    }
    return out;
}

// Pair-count-weighted pooling of per-segment ACFs: pooled(l) is the
// w_seg(l) = len_seg - l weighted mean of segment ACFs (segment means, biased
// normalization). Truncated at the largest lag any segment can supply.
inline AcfSummary pooled_quiet_acf(const ObservableSeries& series,
                                   const std::vector<QuietSegment>& segments, long max_lag) {
    if (segments.empty()) throw std::runtime_error("pooled_quiet_acf: no segments");
    check_series(series);
    std::size_t max_len = 0;
    for (const auto& s : segments) {
        if (s.end > series.size() || s.begin >= s.end)
            throw std::runtime_error("pooled_quiet_acf: segment outside series");
        if (!s.begin_date.empty() && series.dates[s.begin] != s.begin_date)
            throw std::runtime_error("pooled_quiet_acf: segment dates do not match the series calendar");
        max_len = std::max(max_len, s.length());
    }
    long feasible = std::min<long>(max_lag, static_cast<long>(max_len) - 1);
    if (feasible < 1) throw std::runtime_error("pooled_quiet_acf: segments too short for any lag");

    std::vector<std::vector<double>> seg_acf;
    for (const auto& s : segments)
        seg_acf.push_back(detail_diag::acf_of_range(series.values.data() + s.begin,
                                                    static_cast<long>(s.length()),
                                                    std::min<long>(feasible, static_cast<long>(s.length()) - 1)));
    std::vector<double> pooled(static_cast<std::size_t>(feasible) + 1, 0.0);
    pooled[0] = 1.0;
    for (long l = 1; l <= feasible; ++l) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            long len = static_cast<long>(segments[i].length());
            if (len - l < 1) continue;
            double w = static_cast<double>(len - l);
            num += w * seg_acf[i][static_cast<std::size_t>(l)];
            den += w;
        }
        pooled[static_cast<std::size_t>(l)] = num / den;
    }
    return detail_diag::summarize(std::move(pooled));
}

struct EpisodeBootstrap {
    std::optional<long> point;      // pooled e-folding of the real segments
    double ci_lo = 0.0, ci_hi = 0.0;
    long n_defined = 0;             // draws with a defined e-folding lag
    long draws = 0;
};

// Resample the qualifying segments with replacement (same count), recompute
// the pooled e-folding per draw, and take the percentile 2.5/97.5 interval
// over draws where the lag is defined.
inline EpisodeBootstrap episode_bootstrap(const ObservableSeries& series,
                                          const std::vector<QuietSegment>& segments, long draws,
                                          std::uint64_t seed, long max_lag = 120) {
    if (segments.empty()) throw std::runtime_error("episode_bootstrap: no segments");
    EpisodeBootstrap out;
    out.draws = draws;
    out.point = pooled_quiet_acf(series, segments, max_lag).efolding_lag;

    Philox rng = Philox(seed, 0).substream("episode-bootstrap");
    std::vector<double> efolds;
    std::vector<QuietSegment> resampled(segments.size());
    for (long d = 0; d < draws; ++d) {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(segments.size()));
            if (j >= segments.size()) j = segments.size() - 1;
            resampled[i] = segments[j];
        }
        auto ef = pooled_quiet_acf(series, resampled, max_lag).efolding_lag;
        if (ef) efolds.push_back(static_cast<double>(*ef));
    }
    out.n_defined = static_cast<long>(efolds.size());
    if (efolds.empty()) throw std::runtime_error("episode_bootstrap: every draw had an undefined e-folding lag");
    out.ci_lo = quantile_of(efolds, 0.025);
    out.ci_hi = quantile_of(efolds, 0.975);
    return out;
}

// eps(t) = psi1(t) - mu_eff(v_t): the observable with the fitted conditional
// equilibrium subtracted pointwise.
inline ObservableSeries field_stripped_residual(const ModelFit& fit2, const ObservableSeries& psi1,
                                                const ObservableSeries& field) {
    if (field.dates != psi1.dates)
        throw std::runtime_error("field_stripped_residual: field not aligned with observable");
    ObservableSeries out;
    out.label = "field_stripped_residual";
    out.dates = psi1.dates;
    out.values.reserve(psi1.size());
    for (std::size_t t = 0; t < psi1.size(); ++t)
        out.values.push_back(psi1.values[t] - mu_eff(fit2, field.values[t]));
    return out;
}

enum class GrangerDirection { X_TO_Y, Y_TO_X };

struct GrangerResult {
    GrangerDirection direction;
    int lag = 0;
    double F = 0.0;
    double p = 1.0;
    bool differenced = false;
};

struct GrangerPair {
    GrangerResult x_to_y;
    GrangerResult y_to_x;
};

namespace detail_diag {

struct DirFit {
    double rss_u, rss_r;
    long n_eff;
    int p;
};

// Unrestricted: target on own + cross lags; restricted: own lags only. All
// regressions condition on the same first `drop` observations.
inline DirFit granger_dir(const std::vector<double>& target, const std::vector<double>& cross,
                          int p, int drop) {
    const long n = static_cast<long>(target.size());
    const long n_eff = n - drop;
    if (n_eff <= 2 * p + 2) throw std::runtime_error("granger: sample too short");
    Eigen::MatrixXd Xu(n_eff, 2 * p + 1), Xr(n_eff, p + 1);
    Eigen::VectorXd y(n_eff);
    for (long t = 0; t < n_eff; ++t) {
        long idx = drop + t;
        Xu(t, 0) = 1.0;
        Xr(t, 0) = 1.0;
        for (int j = 1; j <= p; ++j) {
            Xu(t, j) = target[static_cast<std::size_t>(idx - j)];
            Xu(t, p + j) = cross[static_cast<std::size_t>(idx - j)];
            Xr(t, j) = target[static_cast<std::size_t>(idx - j)];
        }
        y(t) = target[static_cast<std::size_t>(idx)];
    }
    DirFit f;
    f.rss_u = ols(Xu, y).rss;
    f.rss_r = ols(Xr, y).rss;
    f.n_eff = n_eff;
    f.p = p;
    return f;
}

}  // namespace detail_diag

// Bivariate Granger tests in both directions. The lag is chosen once, shared
// across directions, as the p in 1..max_lag minimizing the summed Gaussian
// concentrated AIC of the two unrestricted models on a common conditioning
// sample (the first max_lag observations are never targets).
inline GrangerPair granger(std::vector<double> x, std::vector<double> y, int max_lag = 10,
                           bool differenced = false) {
    if (x.size() != y.size()) throw std::runtime_error("granger: unequal lengths");
    if (differenced) {
        std::vector<double> dx, dy;
        for (std::size_t t = 1; t < x.size(); ++t) {
            dx.push_back(x[t] - x[t - 1]);
            dy.push_back(y[t] - y[t - 1]);
        }
        x = std::move(dx);
        y = std::move(dy);
    }
    if (static_cast<long>(x.size()) <= 3 * max_lag)
        throw std::runtime_error("granger: need more than 3*max_lag observations");

    int best_p = 1;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= max_lag; ++p) {
        auto fy = detail_diag::granger_dir(y, x, p, max_lag);
        auto fx = detail_diag::granger_dir(x, y, p, max_lag);
        double aic = 0.0;
        for (const auto& f : {fy, fx}) {
            double sig2 = f.rss_u / static_cast<double>(f.n_eff);
            aic += static_cast<double>(f.n_eff) * std::log(sig2) + 2.0 * (2 * p + 1);
        }
        if (aic < best_aic) {
            best_aic = aic;
            best_p = p;
        }
    }

    auto make = [&](const std::vector<double>& target, const std::vector<double>& cross,
                    GrangerDirection dir) {
        auto f = detail_diag::granger_dir(target, cross, best_p, max_lag);
        GrangerResult r;
        r.direction = dir;
        r.lag = best_p;
        r.differenced = differenced;
        double df2 = static_cast<double>(f.n_eff - 2 * best_p - 1);
        r.F = ((f.rss_r - f.rss_u) / static_cast<double>(best_p)) / (f.rss_u / df2);
        r.F = std::max(0.0, r.F);
        r.p = f_sf(r.F, static_cast<double>(best_p), df2);
        return r;
    };
    GrangerPair pair;
    pair.x_to_y = make(y, x, GrangerDirection::X_TO_Y);
    pair.y_to_x = make(x, y, GrangerDirection::Y_TO_X);
    return pair;
}

inline GrangerPair granger(const AlignedPair& pair, int max_lag = 10, bool differenced = false) {
    return granger(pair.x, pair.y, max_lag, differenced);
}

}  // namespace fieldattr
