#pragma once

// Anchored chronological holdouts and the raw-return window sweep. Splits are
// calendar-anchored: train is everything strictly before the split date, test
// is everything from it on, parameters are frozen at training values and the
// test side is scored with the same exact one-step likelihood the fits use.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fieldattr/market_data.hpp"
#include "fieldattr/ou_models.hpp"
#include "fieldattr/rng.hpp"
#include "fieldattr/series.hpp"

namespace fieldattr {

struct SplitResult {
    std::string nominal_date;   // requested calendar split
    std::string split_date;     // first observation date in the test range
    long n_train = 0;
    long n_test = 0;
    long n_test_trans = 0;      // scored transitions (segment-aware)
    double m0_train_ll_per_obs = 0.0;
    double m2_train_ll_per_obs = 0.0;
    double m0_test_ll_per_obs = 0.0;
    double m2_test_ll_per_obs = 0.0;
    double gap = 0.0;           // m2_test - m0_test, per observation
    double m2_ratio = 0.0;      // m2 test per-obs / m2 train per-obs
};

namespace detail_oos {

// Score a frozen model over one contiguous run of observations.
struct SegmentScore {
    double loglik = 0.0;
    long n_trans = 0;
};

inline SegmentScore score_segments(Family family, const std::vector<double>& params,
                                   const ObservableSeries& psi, const ObservableSeries& field,
                                   const std::vector<std::vector<long>>& segments) {
    SegmentScore total;
    for (const auto& seg : segments) {
        if (seg.size() < 2) continue;
        ObservableSeries sp;
        sp.label = psi.label;
        ModelSpec spec;
        spec.family = family;
        if (field_arity(family) > 0) spec.fields.emplace_back();
        for (long idx : seg) {
            std::size_t i = static_cast<std::size_t>(idx);
            sp.dates.push_back(psi.dates[i]);
            sp.values.push_back(psi.values[i]);
            if (!spec.fields.empty()) {
                spec.fields[0].dates.push_back(field.dates[i]);
                spec.fields[0].values.push_back(field.values[i]);
            }
        }
        if (!spec.fields.empty()) spec.fields[0].label = field.label;
        total.loglik += loglik(spec, params, sp);
        total.n_trans += static_cast<long>(seg.size()) - 1;
    }
    return total;
}

}  // namespace detail_oos

// Exclusion is a closed date interval dropped from the test range before
// scoring; the survivors split into contiguous segments and no transition is
// evaluated across the gap (or across the train/test boundary).
inline std::vector<SplitResult> anchored_oos(
    const ObservableSeries& psi1, const ObservableSeries& field,
    const std::vector<std::string>& split_dates, std::uint64_t seed,
    std::optional<std::pair<std::string, std::string>> exclusion = {}) {
    if (split_dates.empty()) throw std::runtime_error("anchored_oos: no split dates");
    AlignedPair ap = align(psi1, field);
    const long n = static_cast<long>(ap.dates.size());
    if (exclusion && exclusion->first > exclusion->second)
        throw std::runtime_error("anchored_oos: exclusion range is reversed");

    std::vector<SplitResult> out;
    long split_index = 0;
    for (const std::string& nominal : split_dates) {
        SplitResult r;
        r.nominal_date = nominal;
        long idx = 0;
        while (idx < n && ap.dates[static_cast<std::size_t>(idx)] < nominal) ++idx;
        r.n_train = idx;
        r.n_test = n - idx;
        if (r.n_train < 100 || r.n_test < 100)
            throw std::runtime_error("anchored_oos: split " + nominal +
                                     " leaves fewer than 100 observations on one side");
        r.split_date = ap.dates[static_cast<std::size_t>(idx)];
        if (exclusion && exclusion->first < r.split_date)
            throw std::runtime_error("anchored_oos: exclusion range must lie inside the test range of split " + nominal);

        ObservableSeries train_psi{std::vector<std::string>(ap.dates.begin(), ap.dates.begin() + idx),
                                   std::vector<double>(ap.x.begin(), ap.x.begin() + idx), psi1.label};
        ObservableSeries train_field{train_psi.dates,
                                     std::vector<double>(ap.y.begin(), ap.y.begin() + idx), field.label};

        ModelSpec m0_spec;
        ModelSpec m2_spec;
        m2_spec.family = Family::OU_FIELD;
        m2_spec.fields = {train_field};
        ModelFit f0 = fit(m0_spec, train_psi, derive_seed(seed, "oos-m0", static_cast<std::uint64_t>(split_index)));
        ModelFit f2 = fit(m2_spec, train_psi, derive_seed(seed, "oos-m2", static_cast<std::uint64_t>(split_index)));

        // carve the test range into contiguous kept segments
        std::vector<std::vector<long>> segments;
        std::vector<long> cur;
        long n_kept = 0;
        for (long i = idx; i < n; ++i) {
            const std::string& d = ap.dates[static_cast<std::size_t>(i)];
            bool excluded = exclusion && d >= exclusion->first && d <= exclusion->second;
            if (excluded) {
                if (!cur.empty()) segments.push_back(std::move(cur));
                cur.clear();
            } else {
                cur.push_back(i);
                ++n_kept;
            }
        }
        if (!cur.empty()) segments.push_back(std::move(cur));
        if (n_kept == 0)
            throw std::runtime_error("anchored_oos: exclusion removes the whole test range of split " + nominal);

        ObservableSeries test_psi{std::vector<std::string>(ap.dates.begin() + idx, ap.dates.end()),
                                  std::vector<double>(ap.x.begin() + idx, ap.x.end()), psi1.label};
        ObservableSeries test_field{test_psi.dates,
                                    std::vector<double>(ap.y.begin() + idx, ap.y.end()), field.label};
        for (auto& seg : segments)
            for (long& i : seg) i -= idx;

        auto s0 = detail_oos::score_segments(Family::OU_BARE, f0.params, test_psi, test_field, segments);
        auto s2 = detail_oos::score_segments(Family::OU_FIELD, f2.params, test_psi, test_field, segments);
        if (s0.n_trans == 0)
            throw std::runtime_error("anchored_oos: no scorable test transitions for split " + nominal);
        if (s0.n_trans != s2.n_trans)
            throw std::runtime_error("anchored_oos: internal transition-count mismatch");

        r.n_test_trans = s0.n_trans;
        r.m0_train_ll_per_obs = f0.loglik / static_cast<double>(f0.n_trans);
        r.m2_train_ll_per_obs = f2.loglik / static_cast<double>(f2.n_trans);
        r.m0_test_ll_per_obs = s0.loglik / static_cast<double>(s0.n_trans);
        r.m2_test_ll_per_obs = s2.loglik / static_cast<double>(s2.n_trans);
        r.gap = r.m2_test_ll_per_obs - r.m0_test_ll_per_obs;
        r.m2_ratio = r.m2_test_ll_per_obs / r.m2_train_ll_per_obs;
        out.push_back(std::move(r));
        ++split_index;
    }
    return out;
}

struct WindowRow {
    long w = 0;
    double theta0 = 0.0;
    double tau0 = 0.0;
    double theta = 0.0;
    double tau_cond = 0.0;
    double beta = 0.0;
    double chi = 0.0;
    double scpa = 0.0;
    double dbic = 0.0;
    ObservableSeries psi1;  // the rebuilt series, kept for identity checks
};

// Rebuild psi1 from raw returns at each window size, refit the bare and field
// models on the freshly aligned sample, and report the attribution row.
inline std::vector<WindowRow> window_sweep(const ReturnPanel& panel, const ObservableSeries& field,
                                           std::uint64_t seed,
                                           const std::vector<long>& windows = {30, 45, 60, 90, 120}) {
    if (windows.empty()) throw std::runtime_error("window_sweep: no windows");
    std::vector<WindowRow> out;
    for (long w : windows) {
        WindowRow row;
        row.w = w;
        row.psi1 = psi1_series(panel, w);
        AlignedPair ap = align(row.psi1, field);
        ObservableSeries psi_al{ap.dates, ap.x, row.psi1.label};
        ObservableSeries field_al{ap.dates, ap.y, field.label};
        ModelSpec m0_spec;
        ModelSpec m2_spec;
        m2_spec.family = Family::OU_FIELD;
        m2_spec.fields = {field_al};
        ModelFit f0 = fit(m0_spec, psi_al, derive_seed(seed, "sweep-m0", static_cast<std::uint64_t>(w)));
        ModelFit f2 = fit(m2_spec, psi_al, derive_seed(seed, "sweep-m2", static_cast<std::uint64_t>(w)));
        row.theta0 = f0.param("theta");
        row.tau0 = 1.0 / row.theta0;
        row.theta = f2.param("theta");
        row.tau_cond = 1.0 / row.theta;
        row.beta = f2.param("beta");
        row.chi = row.beta / row.theta;
        row.scpa = 1.0 - row.tau_cond / row.tau0;
        row.dbic = f0.bic - f2.bic;
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace fieldattr
