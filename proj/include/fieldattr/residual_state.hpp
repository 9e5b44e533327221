#pragma once

// Residual-state quadrant test: the level-orthogonal residual of psi1 on log
// VIX splits the plane into four quadrants; the test asks whether
// low-VIX/positive-residual days (Q2) precede larger future log-VIX moves
// than low-VIX/negative-residual days (Q3).

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"

namespace fieldattr {

struct OrthoResidual {
    ObservableSeries residual;
    double a = 0.0;   // intercept
    double b = 0.0;   // slope per unit log VIX
};

inline OrthoResidual orthogonal_residual(const ObservableSeries& psi1,
                                         const ObservableSeries& log_vix) {
    if (psi1.dates != log_vix.dates)
        throw std::runtime_error("orthogonal_residual: inputs must be aligned");
    if (psi1.size() < 3) throw std::runtime_error("orthogonal_residual: need at least 3 points");
    OlsFit f = ols_1(log_vix.values, psi1.values);
    OrthoResidual out;
    out.a = f.coef(0);
    out.b = f.coef(1);
    out.residual.label = "eps_perp";
    out.residual.dates = psi1.dates;
    for (long i = 0; i < f.residuals.size(); ++i) out.residual.values.push_back(f.residuals(i));
    return out;
}

enum class Quadrant { Q1, Q2, Q3, Q4 };

inline const char* quadrant_name(Quadrant q) {
    switch (q) {
        case Quadrant::Q1: return "Q1";
        case Quadrant::Q2: return "Q2";
        case Quadrant::Q3: return "Q3";
        case Quadrant::Q4: return "Q4";
    }
    return "?";
}

// Q1 high-VIX/positive, Q2 low-VIX/positive, Q3 low-VIX/negative, Q4
// high-VIX/negative. "Low" means log VIX <= its sample median; "positive"
// means residual > 0.
inline std::vector<Quadrant> quadrant_labels(const ObservableSeries& log_vix,
                                             const ObservableSeries& residual) {
    if (log_vix.dates != residual.dates)
        throw std::runtime_error("quadrant_labels: inputs must be aligned");
    double med = median_of(log_vix.values);
    std::vector<Quadrant> labels;
    labels.reserve(log_vix.size());
    for (std::size_t t = 0; t < log_vix.size(); ++t) {
        bool low = log_vix.values[t] <= med;
        bool pos = residual.values[t] > 0.0;
        labels.push_back(low ? (pos ? Quadrant::Q2 : Quadrant::Q3)
                             : (pos ? Quadrant::Q1 : Quadrant::Q4));
    }
    return labels;
}

struct MannWhitney {
    double U = 0.0;
    double p = 1.0;              // one-sided, alternative: first sample larger
    double rank_biserial = 0.0;  // 2U/(n1 n2) - 1
    bool exact = false;
};

namespace detail_mw {

// Exact null distribution of 2U over all C(n1+n2, n1) group assignments,
// conditioning on the observed (tied) values. DP over tie blocks; states are
// (members assigned to group 1 so far, integer 2U). Counts stay below 2^53
// for n1+n2 <= 50, so doubles hold them exactly.
inline double exact_p(const std::vector<double>& a, const std::vector<double>& b, long twoU_obs) {
    const int n1 = static_cast<int>(a.size());
    const int n = n1 + static_cast<int>(b.size());

    std::map<double, int> blocks;   // value -> multiplicity, ascending
    for (double x : a) ++blocks[x];
    for (double x : b) ++blocks[x];

    std::vector<std::vector<double>> choose(static_cast<std::size_t>(n) + 1,
                                            std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
    for (int i = 0; i <= n; ++i) {
        choose[static_cast<std::size_t>(i)][0] = 1.0;
        for (int j = 1; j <= i; ++j)
            choose[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                choose[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] +
                choose[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)];
    }

    const long u2max = 2L * n1 * (n - n1);
    auto idx = [&](int k, long u2) { return static_cast<std::size_t>(k) * static_cast<std::size_t>(u2max + 1) + static_cast<std::size_t>(u2); };
    std::vector<double> cur(static_cast<std::size_t>(n1 + 1) * static_cast<std::size_t>(u2max + 1), 0.0);
    std::vector<double> nxt(cur.size(), 0.0);
    cur[idx(0, 0)] = 1.0;

    int n_before = 0;   // elements in earlier blocks
    for (const auto& [value, c] : blocks) {
        (void)value;
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int K = 0; K <= n1; ++K) {
            for (long u2 = 0; u2 <= u2max; ++u2) {
                double cnt = cur[idx(K, u2)];
                if (cnt == 0.0) continue;
                int kmax = std::min(c, n1 - K);
                for (int k = 0; k <= kmax; ++k) {
                    // group-2 elements strictly below this block: n_before - K
                    long add = static_cast<long>(k) * (2L * (n_before - K) + (c - k));
                    // prune states already above the final bound 2*n1*n2: u2
                    // never decreases, so they cannot reach a valid final
                    // state, and without the prune they alias other K rows
                    if (u2 + add > u2max) continue;
                    nxt[idx(K + k, u2 + add)] +=
                        cnt * choose[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
                }
            }
        }
        cur.swap(nxt);
        n_before += c;
    }

    double total = 0.0, tail = 0.0;
    for (long u2 = 0; u2 <= u2max; ++u2) {
        double cnt = cur[idx(n1, u2)];
        total += cnt;
        if (u2 >= twoU_obs) tail += cnt;
    }
    return tail / total;
}

}  // namespace detail_mw

// One-sided Mann-Whitney, alternative "a stochastically larger than b".
// Exact tie-aware enumeration for n1+n2 <= 50; tie-corrected normal
// approximation with a 0.5 continuity correction above that.
inline MannWhitney mann_whitney_greater(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::runtime_error("mann_whitney: empty sample");
    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());

    long count_gt = 0, count_eq = 0;
    for (double x : a)
        for (double y : b) {
            if (x > y) ++count_gt;
            else if (x == y) ++count_eq;
        }
    const long twoU = 2 * count_gt + count_eq;

    MannWhitney r;
    r.U = 0.5 * static_cast<double>(twoU);
    r.rank_biserial = 2.0 * r.U / (n1 * n2) - 1.0;

    if (a.size() + b.size() <= 50) {
        r.exact = true;
        r.p = detail_mw::exact_p(a, b, twoU);
        return r;
    }

    std::map<double, long> ties;
    for (double x : a) ++ties[x];
    for (double y : b) ++ties[y];
    const double n = n1 + n2;
    double tie_term = 0.0;
    for (const auto& [v, t] : ties) {
        (void)v;
        double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    double mean = n1 * n2 / 2.0;
    if (var <= 0.0) {
        r.p = 1.0;   // every value tied; U is degenerate at its mean
        return r;
    }
    r.p = normal_sf((r.U - mean - 0.5) / std::sqrt(var));
    return r;
}

struct QuadrantTest {
    long horizon = 0;
    double mean_q2 = 0.0;
    double mean_q3 = 0.0;
    double mw_p = 1.0;
    double rank_biserial = 0.0;
    long n_q2 = 0;
    long n_q3 = 0;
    bool exact = false;
};

// Future change is measured on log VIX: delta_t = log_vix(t+h) - log_vix(t).
// Only days with a t+h observation are tested; overlapping evaluation days
// are retained (a dependence caveat the report repeats).
inline std::vector<QuadrantTest> horizon_test(const std::vector<Quadrant>& labels,
                                              const ObservableSeries& log_vix,
                                              const std::vector<long>& horizons = {30, 60, 90}) {
    if (labels.size() != log_vix.size())
        throw std::runtime_error("horizon_test: labels and series differ in length");
    std::vector<QuadrantTest> out;
    for (long h : horizons) {
        if (h < 1 || static_cast<std::size_t>(h) >= log_vix.size())
            throw std::runtime_error("horizon_test: horizon " + std::to_string(h) + " too long for the sample");
        std::vector<double> q2, q3;
        for (std::size_t t = 0; t + static_cast<std::size_t>(h) < log_vix.size(); ++t) {
            double delta = log_vix.values[t + static_cast<std::size_t>(h)] - log_vix.values[t];
            if (labels[t] == Quadrant::Q2) q2.push_back(delta);
            else if (labels[t] == Quadrant::Q3) q3.push_back(delta);
        }
        if (q2.empty()) throw std::runtime_error("horizon_test: quadrant Q2 is empty at horizon " + std::to_string(h));
        if (q3.empty()) throw std::runtime_error("horizon_test: quadrant Q3 is empty at horizon " + std::to_string(h));
        MannWhitney mw = mann_whitney_greater(q2, q3);
        QuadrantTest t;
        t.horizon = h;
        t.mean_q2 = mean_of(q2);
        t.mean_q3 = mean_of(q3);
        t.mw_p = mw.p;
        t.rank_biserial = mw.rank_biserial;
        t.n_q2 = static_cast<long>(q2.size());
        t.n_q3 = static_cast<long>(q3.size());
        t.exact = mw.exact;
        out.push_back(t);
    }
    return out;
}

}  // namespace fieldattr
