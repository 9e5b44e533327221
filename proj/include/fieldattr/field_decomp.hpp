#pragma once

// Mechanical/informational decomposition of the field. The mechanical proxy
// rebuilds an implied-volatility-like series from actual correlations with
// per-stock volatilities frozen at a recipe-chosen statistic; the
// informational residual is what is left of log VIX after removing the log
// proxy; the sequential R-squared split attributes shared explanatory power.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/market_data.hpp"
#include "fieldattr/ou_models.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"

namespace fieldattr {

struct DecompRecipe {
    enum class Freeze { FULL_MEDIAN, FULL_MEAN, PRE_SPLIT_MEDIAN } freeze = Freeze::FULL_MEDIAN;
    enum class Weights { EQUAL, INVERSE_VOL, VOL_SHARE } weights = Weights::EQUAL;
    std::string split_date;   // required by PRE_SPLIT_MEDIAN

    std::string name() const {
        std::string f = freeze == Freeze::FULL_MEDIAN ? "full_median"
                        : freeze == Freeze::FULL_MEAN ? "full_mean"
                                                      : "pre_split_median";
        std::string w = weights == Weights::EQUAL        ? "equal"
                        : weights == Weights::INVERSE_VOL ? "inverse_vol"
                                                          : "vol_share";
        return f + "/" + w;
    }
};

struct DecompResult {
    double mech_fraction = 0.0;
    double info_fraction = 0.0;
    double r2_full = 0.0;
    double r2_mech = 0.0;
    double dbic_mech_only = 0.0;
    double dbic_info_only = 0.0;
    double dbic_actual = 0.0;
    double partial_residual_corr = 0.0;
};

// Frozen per-stock volatility per the recipe, from the rolling volatility
// panel whose columns end on the correlation window end dates.
inline std::vector<double> frozen_vols(const ReturnPanel& panel, const Eigen::MatrixXd& vol_panel,
                                       const std::vector<std::string>& end_dates,
                                       const DecompRecipe& recipe) {
    const long n = vol_panel.rows();
    const long m = vol_panel.cols();
    long limit = m;
    if (recipe.freeze == DecompRecipe::Freeze::PRE_SPLIT_MEDIAN) {
        if (recipe.split_date.empty())
            throw std::runtime_error("frozen_vols: PRE_SPLIT_MEDIAN requires a split date");
        limit = 0;
        while (limit < m && end_dates[static_cast<std::size_t>(limit)] < recipe.split_date) ++limit;
        if (limit == 0 || limit == m)
            throw std::runtime_error("frozen_vols: split date " + recipe.split_date + " not inside the sample");
    }
    std::vector<double> s(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(limit));
        for (long j = 0; j < limit; ++j) row.push_back(vol_panel(i, j));
        s[static_cast<std::size_t>(i)] = recipe.freeze == DecompRecipe::Freeze::FULL_MEAN
                                             ? mean_of(row)
                                             : median_of(std::move(row));
        if (!(s[static_cast<std::size_t>(i)] > 0.0))
            throw std::runtime_error("frozen_vols: zero frozen volatility for " +
                                     panel.tickers[static_cast<std::size_t>(i)]);
    }
    return s;
}

inline std::vector<double> recipe_weights(const std::vector<double>& s, DecompRecipe::Weights w) {
    std::vector<double> out(s.size());
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = w == DecompRecipe::Weights::EQUAL         ? 1.0
                 : w == DecompRecipe::Weights::INVERSE_VOL ? 1.0 / s[i]
                                                           : s[i];
        total += out[i];
    }
    for (double& x : out) x /= total;
    return out;
}

// VIX_mech(t) = c * sqrt(sum_ij w_i w_j s_i s_j C_ij(t)) on the dates where
// the observed VIX exists; c matches the observed sample mean on that
// intersection exactly.
inline ObservableSeries mechanical_proxy(const ReturnPanel& panel,
                                         const std::vector<CorrelationWindow>& corrs,
                                         const DecompRecipe& recipe, const ObservableSeries& vix) {
    if (corrs.empty()) throw std::runtime_error("mechanical_proxy: no correlation windows");
    check_series(vix);
    const long W = panel.n_days() - static_cast<long>(corrs.size()) + 1;
    if (W < 2) throw std::runtime_error("mechanical_proxy: correlation windows do not match the panel");
    Eigen::MatrixXd vol_panel = rolling_volatility(panel, W);

    std::vector<std::string> end_dates;
    end_dates.reserve(corrs.size());
    for (const auto& c : corrs) end_dates.push_back(c.end_date);

    std::vector<double> s = frozen_vols(panel, vol_panel, end_dates, recipe);
    std::vector<double> w = recipe_weights(s, recipe.weights);
    Eigen::VectorXd ws(static_cast<long>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) ws(static_cast<long>(i)) = w[i] * s[i];

    ObservableSeries raw;
    raw.label = "vix_mech_raw";
    for (const auto& c : corrs) {
        double v = ws.dot(c.matrix * ws);
        if (!(v >= 0.0))
            throw std::runtime_error("mechanical_proxy: negative portfolio variance at " + c.end_date);
        raw.dates.push_back(c.end_date);
        raw.values.push_back(std::sqrt(v));
    }

    AlignedPair ap = align(raw, vix);
    double mean_raw = mean_of(ap.x);
    double mean_vix = mean_of(ap.y);
    if (!(mean_raw > 0.0)) throw std::runtime_error("mechanical_proxy: degenerate proxy");
    double c = mean_vix / mean_raw;

    ObservableSeries out;
    out.label = "vix_mech_" + recipe.name();
    out.dates = ap.dates;
    out.values.reserve(ap.size());
    for (double x : ap.x) out.values.push_back(c * x);
    return out;
}

struct InfoResidual {
    ObservableSeries residual;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
};

// OLS of log VIX on the log proxy; the residual is the informational field.
inline InfoResidual informational_residual(const ObservableSeries& log_vix,
                                           const ObservableSeries& mech) {
    AlignedPair ap = align(log_vix, mech);
    if (ap.size() < 3) throw std::runtime_error("informational_residual: need at least 3 aligned points");
    std::vector<double> mech_log;
    mech_log.reserve(ap.size());
    for (double v : ap.y) {
        if (!(v > 0.0)) throw std::runtime_error("informational_residual: non-positive proxy value");
        mech_log.push_back(std::log(v));
    }
    OlsFit f = ols_1(mech_log, ap.x);
    InfoResidual out;
    out.gamma0 = f.coef(0);
    out.gamma1 = f.coef(1);
    out.residual.label = "info_residual";
    out.residual.dates = ap.dates;
    for (long i = 0; i < f.residuals.size(); ++i) out.residual.values.push_back(f.residuals(i));
    return out;
}

struct R2Split {
    double f_mech = 0.0;
    double f_info = 0.0;
    double r2_mech = 0.0;
    double r2_full = 0.0;
};

// Sequential R-squared attribution: the mechanical share is what the log
// proxy alone explains of psi1, relative to the proxy plus the informational
// residual together. f_info = 1 - f_mech exactly.
inline R2Split r2_split(const ObservableSeries& psi1, const ObservableSeries& mech_log,
                        const ObservableSeries& info_residual) {
    auto aligned = align_many({&psi1, &mech_log, &info_residual});
    const auto& p = aligned[0].values;
    const auto& m = aligned[1].values;
    const auto& r = aligned[2].values;
    const long n = static_cast<long>(p.size());
    Eigen::VectorXd y(n);
    Eigen::MatrixXd X1(n, 2), X2(n, 3);
    for (long i = 0; i < n; ++i) {
        y(i) = p[static_cast<std::size_t>(i)];
        X1(i, 0) = 1.0;
        X1(i, 1) = m[static_cast<std::size_t>(i)];
        X2(i, 0) = 1.0;
        X2(i, 1) = m[static_cast<std::size_t>(i)];
        X2(i, 2) = r[static_cast<std::size_t>(i)];
    }
    R2Split out;
    out.r2_mech = ols(X1, y).r2;
    out.r2_full = ols(X2, y).r2;
    if (!(out.r2_full > 0.0)) throw std::runtime_error("r2_split: zero full R2; fractions undefined");
    out.f_mech = out.r2_mech / out.r2_full;
    out.f_info = 1.0 - out.f_mech;
    return out;
}

// Three standalone field fits against the same-sample bare baseline, plus the
// fraction split and the partial correlation of psi1 with the informational
// field given the mechanical one. All gains are BIC(bare) - BIC(field).
inline DecompResult standalone_field_fits(const ObservableSeries& psi1,
                                          const ObservableSeries& actual_field,
                                          const ObservableSeries& mech_field,
                                          const ObservableSeries& info_field, std::uint64_t seed) {
    auto aligned = align_many({&psi1, &actual_field, &mech_field, &info_field});
    const ObservableSeries& p = aligned[0];

    ModelSpec m0spec;
    m0spec.family = Family::OU_BARE;
    ModelFit m0 = fit(m0spec, p, derive_seed(seed, "decomp-m0", 0));
    auto field_fit = [&](const ObservableSeries& f, std::uint64_t i) {
        ModelSpec s;
        s.family = Family::OU_FIELD;
        s.fields = {f};
        return fit(s, p, derive_seed(seed, "decomp-m2", i));
    };
    ModelFit fa = field_fit(aligned[1], 0);
    ModelFit fm = field_fit(aligned[2], 1);
    ModelFit fi = field_fit(aligned[3], 2);

    DecompResult out;
    out.dbic_actual = m0.bic - fa.bic;
    out.dbic_mech_only = m0.bic - fm.bic;
    out.dbic_info_only = m0.bic - fi.bic;

    R2Split split = r2_split(p, aligned[2], aligned[3]);
    out.mech_fraction = split.f_mech;
    out.info_fraction = split.f_info;
    out.r2_mech = split.r2_mech;
    out.r2_full = split.r2_full;

    // Partial correlation: residualize both psi1 and the info field on the
    // mechanical field, then correlate.
    OlsFit rp = ols_1(aligned[2].values, p.values);
    OlsFit ri = ols_1(aligned[2].values, aligned[3].values);
    std::vector<double> a(rp.residuals.data(), rp.residuals.data() + rp.residuals.size());
    std::vector<double> b(ri.residuals.data(), ri.residuals.data() + ri.residuals.size());
    out.partial_residual_corr = pearson(a, b);
    return out;
}

struct RecipeRow {
    DecompRecipe recipe;
    DecompResult result;
    std::string error;   // nonempty if this recipe failed
    bool ok() const { return error.empty(); }
};

inline std::vector<DecompRecipe> default_recipes(const std::string& split_date) {
    using F = DecompRecipe::Freeze;
    using W = DecompRecipe::Weights;
    return {{F::FULL_MEDIAN, W::EQUAL, ""},
            {F::FULL_MEAN, W::EQUAL, ""},
            {F::PRE_SPLIT_MEDIAN, W::EQUAL, split_date},
            {F::FULL_MEDIAN, W::INVERSE_VOL, ""},
            {F::FULL_MEDIAN, W::VOL_SHARE, ""}};
}

// One decomposition per recipe; a failing recipe is recorded and does not
// abort the rest of the grid.
inline std::vector<RecipeRow> recipe_grid(const ReturnPanel& panel,
                                          const std::vector<CorrelationWindow>& corrs,
                                          const ObservableSeries& log_vix,
                                          const ObservableSeries& psi1,
                                          const std::vector<DecompRecipe>& recipes,
                                          std::uint64_t seed) {
    if (recipes.empty()) throw std::runtime_error("recipe_grid: no recipes");
    ObservableSeries vix_level = log_vix;
    vix_level.label = "vix_level";
    for (double& v : vix_level.values) v = std::exp(v);

    std::vector<RecipeRow> rows;
    for (std::size_t i = 0; i < recipes.size(); ++i) {
        RecipeRow row;
        row.recipe = recipes[i];
        try {
            ObservableSeries proxy = mechanical_proxy(panel, corrs, recipes[i], vix_level);
            InfoResidual info = informational_residual(log_vix, proxy);
            ObservableSeries mech_log = log_series(proxy, "mech_log");
            row.result = standalone_field_fits(psi1, log_vix, mech_log, info.residual,
                                               derive_seed(seed, "recipe", i));
        } catch (const std::runtime_error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace fieldattr
