#pragma once

// Derivative-free maximization: Nelder-Mead simplex refinement from 16
// deterministic multistart points. Start points come from a Halton sequence
// with a seeded Cranley-Patterson rotation mapped into per-parameter boxes;
// positive parameters are optimized in log space, probabilities and other
// box-bounded parameters through a logistic map. Likelihood surfaces here are
// smooth, so convergence is the relative objective spread of the simplex
// falling below 1e-10 (or 2000 iterations per start).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/rng.hpp"

namespace fieldattr {

struct ParamSpec {
    std::string name;
    enum class Scale { Linear, Log, Box } scale = Scale::Linear;
    double lo = 0.0;   // sampling box (external units); hard bounds for Box
    double hi = 1.0;
};

inline double to_external(const ParamSpec& p, double x) {
    switch (p.scale) {
        case ParamSpec::Scale::Log: return std::exp(x);
        case ParamSpec::Scale::Box: return p.lo + (p.hi - p.lo) / (1.0 + std::exp(-x));
        default: return x;
    }
}

inline double to_internal(const ParamSpec& p, double v) {
    switch (p.scale) {
        case ParamSpec::Scale::Log:
            if (!(v > 0.0)) throw std::runtime_error("to_internal: log-scale param '" + p.name + "' not positive");
            return std::log(v);
        case ParamSpec::Scale::Box: {
            double t = (v - p.lo) / (p.hi - p.lo);
            t = std::min(std::max(t, 1e-9), 1.0 - 1e-9);
            return std::log(t / (1.0 - t));
        }
        default: return v;
    }
}

inline double halton(std::uint64_t index, unsigned base) {
    double f = 1.0, r = 0.0;
    std::uint64_t i = index;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

struct MaximizeResult {
    std::vector<double> params;   // external units
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
    int n_converged = 0;
    int n_starts = 0;
};

namespace detail {

struct NmOutcome {
    std::vector<double> x;
    double f;            // minimized objective
    bool converged;
};

inline NmOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             const std::vector<double>& x0, const std::vector<double>& step,
                             double tol, int max_iter) {
    const std::size_t d = x0.size();
    std::vector<std::vector<double>> xs(d + 1, x0);
    std::vector<double> fs(d + 1);
    for (std::size_t i = 0; i < d; ++i) xs[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= d; ++i) fs[i] = f(xs[i]);

    auto order = [&] {
        std::vector<std::size_t> idx(d + 1);
        for (std::size_t i = 0; i <= d; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        std::vector<std::vector<double>> xs2(d + 1);
        std::vector<double> fs2(d + 1);
        for (std::size_t i = 0; i <= d; ++i) {
            xs2[i] = xs[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        xs.swap(xs2);
        fs.swap(fs2);
    };

    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        order();
        double spread = std::abs(fs[d] - fs[0]);
        if (spread <= tol * (std::abs(fs[0]) + 1e-30)) {
            converged = true;
            break;
        }
        std::vector<double> centroid(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) centroid[j] += xs[i][j] / static_cast<double>(d);
        auto blend = [&](double coef) {
            std::vector<double> x(d);
            for (std::size_t j = 0; j < d; ++j) x[j] = centroid[j] + coef * (centroid[j] - xs[d][j]);
            return x;
        };
        std::vector<double> xr = blend(1.0);
        double fr = f(xr);
        if (fr < fs[0]) {
            std::vector<double> xe = blend(2.0);
            double fe = f(xe);
            if (fe < fr) {
                xs[d] = xe;
                fs[d] = fe;
            } else {
                xs[d] = xr;
                fs[d] = fr;
            }
        } else if (fr < fs[d - 1]) {
            xs[d] = xr;
            fs[d] = fr;
        } else {
            bool outside = fr < fs[d];
            std::vector<double> xc = blend(outside ? 0.5 : -0.5);
            double fc = f(xc);
            if (fc < (outside ? fr : fs[d])) {
                xs[d] = xc;
                fs[d] = fc;
            } else {
                for (std::size_t i = 1; i <= d; ++i) {
                    for (std::size_t j = 0; j < d; ++j) xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }
    order();
    return {xs[0], fs[0], converged};
}

}  // namespace detail

// Maximizes loglik_fn over the external parameter space described by specs.
// extra_starts (external units) are refined in addition to the quasi-random
// points; passing a closed-form preseed there makes start 0 land on the
// optimum immediately. Result selection is by (loglik, then lexicographic
// parameter order) so the outcome is deterministic for a given seed.
inline MaximizeResult maximize(const std::vector<ParamSpec>& specs,
                               const std::function<double(const std::vector<double>&)>& loglik_fn,
                               std::uint64_t seed,
                               const std::vector<std::vector<double>>& extra_starts = {},
                               int n_quasi_starts = 16) {
    const std::size_t d = specs.size();
    static constexpr unsigned kBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (d > std::size(kBases)) throw std::runtime_error("maximize: too many parameters");

    Philox rot_rng = Philox(seed, 0).substream("multistart-rotation");
    std::vector<double> shift(d);
    for (std::size_t j = 0; j < d; ++j) shift[j] = rot_rng.uniform();

    std::vector<std::vector<double>> starts;   // internal coordinates
    for (const auto& ext : extra_starts) {
        if (ext.size() != d) throw std::runtime_error("maximize: extra start has wrong dimension");
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = to_internal(specs[j], ext[j]);
        starts.push_back(std::move(x));
    }
    for (int i = 0; i < n_quasi_starts; ++i) {
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) {
            double u = halton(static_cast<std::uint64_t>(i + 1), kBases[j]) + shift[j];
            u -= std::floor(u);
            u = 0.02 + 0.96 * u;   // keep starts off the box faces
            const auto& p = specs[j];
            double ext;
            switch (p.scale) {
                case ParamSpec::Scale::Log: ext = std::exp(std::log(p.lo) + u * (std::log(p.hi) - std::log(p.lo))); break;
                default: ext = p.lo + u * (p.hi - p.lo); break;
            }
            x[j] = to_internal(p, ext);
        }
        starts.push_back(std::move(x));
    }

    auto objective = [&](const std::vector<double>& x) {
        std::vector<double> ext(d);
        for (std::size_t j = 0; j < d; ++j) ext[j] = to_external(specs[j], x[j]);
        double ll = loglik_fn(ext);
        if (std::isnan(ll)) return 1e300;
        if (ll == -std::numeric_limits<double>::infinity()) return 1e300;
        return -ll;
    };

    MaximizeResult best;
    best.n_starts = static_cast<int>(starts.size());
    std::vector<double> step(d, 0.25);
    for (const auto& x0 : starts) {
        auto out = detail::nelder_mead(objective, x0, step, 1e-10, 2000);
        if (out.converged) ++best.n_converged;
        if (out.f >= 1e300) continue;
        std::vector<double> ext(d);
        for (std::size_t j = 0; j < d; ++j) ext[j] = to_external(specs[j], out.x[j]);
        double ll = -out.f;
        bool better = ll > best.loglik || (ll == best.loglik && ext < best.params);
        if (best.params.empty() || better) {
            best.params = ext;
            best.loglik = ll;
            best.converged = out.converged;
        }
    }
    if (best.n_converged == 0)
        throw std::runtime_error("maximize: no start converged (" + std::to_string(best.n_starts) +
                                 " starts, best loglik " + std::to_string(best.loglik) + ")");
    if (best.params.empty()) throw std::runtime_error("maximize: objective invalid at every start");
    return best;
}

}  // namespace fieldattr
