#pragma once

// Exact two-dimensional linear-Gaussian machinery. State x = (psi, v). The
// discrete model is x_{t+1} = c + Phi x_t + eps, eps ~ N(0, Q); structures
// restrict Phi's off-diagonals: DECOUPLED zeroes both, FEEDFORWARD keeps the
// field->psi entry Phi(0,1) and zeroes the feedback Phi(1,0), BIDIRECTIONAL
// is unrestricted. Continuous time: dx = A(x - mean)dt + S dW with D = SS^T,
// A = [[-theta_psi, beta_psi], [beta_v, -theta_v]].

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/series.hpp"

namespace fieldattr {

enum class Var1Structure { DECOUPLED, FEEDFORWARD, BIDIRECTIONAL };

inline const char* structure_name(Var1Structure s) {
    switch (s) {
        case Var1Structure::DECOUPLED: return "decoupled";
        case Var1Structure::FEEDFORWARD: return "feedforward";
        case Var1Structure::BIDIRECTIONAL: return "bidirectional";
    }
    return "?";
}

struct Var1Fit {
    Var1Structure structure = Var1Structure::DECOUPLED;
    Eigen::Vector2d intercepts = Eigen::Vector2d::Zero();
    Eigen::Matrix2d transition = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d innovation_cov = Eigen::Matrix2d::Zero();
    double loglik = 0.0;
    int k = 0;
    double aic = 0.0;
    double bic = 0.0;
    long n_trans = 0;
};

struct LinearSystem2D {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d D = Eigen::Matrix2d::Zero();

    double theta_psi() const { return -A(0, 0); }
    double beta_psi() const { return A(0, 1); }
    double beta_v() const { return A(1, 0); }
    double theta_v() const { return -A(1, 1); }
};

struct KernelSummary {
    double amplitude = 0.0;   // beta_psi * beta_v
    double timescale = 0.0;   // 1 / theta_v, trading days
    bool defined = false;
};

namespace detail2d {

inline double var1_loglik(const std::vector<Eigen::Vector2d>& x, const Eigen::Vector2d& c,
                          const Eigen::Matrix2d& phi, const Eigen::Matrix2d& q) {
    const double n = static_cast<double>(x.size() - 1);
    Eigen::Matrix2d qinv = q.inverse();
    double logdet = std::log(q.determinant());
    double quad = 0.0;
    for (std::size_t t = 0; t + 1 < x.size(); ++t) {
        Eigen::Vector2d e = x[t + 1] - c - phi * x[t];
        quad += e.dot(qinv * e);
    }
    constexpr double kLog2Pi = 1.8378770664093453;
    return -0.5 * n * (2.0 * kLog2Pi + logdet) - 0.5 * quad;
}

// Free coefficients per equation: column indices of x entering equation i,
// beyond the intercept.
inline std::vector<std::vector<int>> regressor_sets(Var1Structure s) {
    switch (s) {
        case Var1Structure::DECOUPLED: return {{0}, {1}};
        case Var1Structure::FEEDFORWARD: return {{0, 1}, {1}};
        case Var1Structure::BIDIRECTIONAL: return {{0, 1}, {0, 1}};
    }
    throw std::runtime_error("bad structure");
}

}  // namespace detail2d

// Gaussian MLE of the (possibly restricted) VAR(1). The unrestricted case is
// per-equation OLS with the MLE residual covariance. Restricted cases iterate
// feasible GLS: given Q, the stacked generalized least squares step is the
// exact coefficient MLE; given coefficients, Q = mean outer product. Each
// half-step is a coordinate ascent on the likelihood, so the loglik increases
// to convergence (< 1e-12 change, at most 500 rounds).
inline Var1Fit fit_var1(const AlignedPair& pair, Var1Structure structure) {
    const long n_obs = static_cast<long>(pair.size());
    if (n_obs < 20) throw std::runtime_error("fit_var1: need at least 20 observations");
    const long n = n_obs - 1;

    std::vector<Eigen::Vector2d> x(static_cast<std::size_t>(n_obs));
    for (long t = 0; t < n_obs; ++t)
        x[static_cast<std::size_t>(t)] = Eigen::Vector2d(pair.x[static_cast<std::size_t>(t)],
                                                         pair.y[static_cast<std::size_t>(t)]);

    auto sets = detail2d::regressor_sets(structure);
    const int kc0 = 1 + static_cast<int>(sets[0].size());
    const int kc1 = 1 + static_cast<int>(sets[1].size());
    const int kc = kc0 + kc1;

    // Per-equation design matrices.
    Eigen::MatrixXd X0(n, kc0), X1(n, kc1);
    Eigen::VectorXd y0(n), y1(n);
    for (long t = 0; t < n; ++t) {
        X0(t, 0) = 1.0;
        for (int j = 0; j < kc0 - 1; ++j) X0(t, 1 + j) = x[static_cast<std::size_t>(t)](sets[0][static_cast<std::size_t>(j)]);
        X1(t, 0) = 1.0;
        for (int j = 0; j < kc1 - 1; ++j) X1(t, 1 + j) = x[static_cast<std::size_t>(t)](sets[1][static_cast<std::size_t>(j)]);
        y0(t) = x[static_cast<std::size_t>(t) + 1](0);
        y1(t) = x[static_cast<std::size_t>(t) + 1](1);
    }

    auto solve_gls = [&](const Eigen::Matrix2d& w) {
        // Minimize sum_t e_t' W e_t over stacked coefficients b = (b0; b1).
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(kc, kc);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(kc);
        H.topLeftCorner(kc0, kc0) = w(0, 0) * (X0.transpose() * X0);
        H.topRightCorner(kc0, kc1) = w(0, 1) * (X0.transpose() * X1);
        H.bottomLeftCorner(kc1, kc0) = w(1, 0) * (X1.transpose() * X0);
        H.bottomRightCorner(kc1, kc1) = w(1, 1) * (X1.transpose() * X1);
        g.head(kc0) = X0.transpose() * (w(0, 0) * y0 + w(0, 1) * y1);
        g.tail(kc1) = X1.transpose() * (w(1, 0) * y0 + w(1, 1) * y1);
        Eigen::VectorXd b = H.ldlt().solve(g);
        if (!b.allFinite()) throw std::runtime_error("fit_var1: singular GLS system");
        return b;
    };
    auto unpack = [&](const Eigen::VectorXd& b, Eigen::Vector2d& c, Eigen::Matrix2d& phi) {
        c(0) = b(0);
        c(1) = b(kc0);
        phi.setZero();
        for (int j = 0; j < kc0 - 1; ++j) phi(0, sets[0][static_cast<std::size_t>(j)]) = b(1 + j);
        for (int j = 0; j < kc1 - 1; ++j) phi(1, sets[1][static_cast<std::size_t>(j)]) = b(kc0 + 1 + j);
    };
    auto residual_cov = [&](const Eigen::Vector2d& c, const Eigen::Matrix2d& phi) {
        Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
        for (long t = 0; t < n; ++t) {
            Eigen::Vector2d e = x[static_cast<std::size_t>(t) + 1] - c - phi * x[static_cast<std::size_t>(t)];
            q += e * e.transpose();
        }
        return Eigen::Matrix2d(q / static_cast<double>(n));
    };

    Eigen::Vector2d c;
    Eigen::Matrix2d phi, q;
    unpack(solve_gls(Eigen::Matrix2d::Identity()), c, phi);   // OLS start
    q = residual_cov(c, phi);
    if (!(q.determinant() > 0.0)) throw std::runtime_error("fit_var1: degenerate residual covariance");
    double ll = detail2d::var1_loglik(x, c, phi, q);

    if (structure != Var1Structure::BIDIRECTIONAL) {
        bool done = false;
        for (int round = 0; round < 500; ++round) {
            unpack(solve_gls(Eigen::Matrix2d(q.inverse())), c, phi);
            q = residual_cov(c, phi);
            double ll_new = detail2d::var1_loglik(x, c, phi, q);
            if (std::abs(ll_new - ll) < 1e-12 * (std::abs(ll_new) + 1.0)) {
                ll = ll_new;
                done = true;
                break;
            }
            ll = ll_new;
        }
        if (!done) throw std::runtime_error("fit_var1: GLS iteration did not converge in 500 rounds");
    }

    Var1Fit f;
    f.structure = structure;
    f.intercepts = c;
    f.transition = phi;
    f.innovation_cov = q;
    f.loglik = ll;
    f.n_trans = n;
    f.k = 2 + 3 + 2 + (structure == Var1Structure::DECOUPLED ? 0 : structure == Var1Structure::FEEDFORWARD ? 1 : 2);
    f.aic = 2.0 * f.k - 2.0 * ll;
    f.bic = f.k * std::log(static_cast<double>(n)) - 2.0 * ll;
    return f;
}

// Kronecker sum A (+) A; vec(AX + XA') = (A (+) A) vec(X) with column-major vec.
inline Eigen::Matrix4d kronecker_sum(const Eigen::Matrix2d& a) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    m(2 * i + k, 2 * j + l) = a(k, l) * eye(i, j) + eye(k, l) * a(i, j);
    return m;
}

inline Eigen::Vector4d vec2(const Eigen::Matrix2d& m) {
    return Eigen::Vector4d(m(0, 0), m(1, 0), m(0, 1), m(1, 1));
}

inline Eigen::Matrix2d unvec2(const Eigen::Vector4d& v) {
    Eigen::Matrix2d m;
    m << v(0), v(2), v(1), v(3);
    return m;
}

// Integral covariance of the exact discretization:
// Q = int_0^dt exp(As) D exp(A's) ds, via vec(Q) = M^{-1}(e^{M dt} - I) vec(D),
// M = A (+) A. Exact for any A with invertible Kronecker sum.
inline Eigen::Matrix2d integral_covariance(const Eigen::Matrix2d& a, const Eigen::Matrix2d& d,
                                           double dt) {
    Eigen::Matrix4d m = kronecker_sum(a);
    Eigen::Matrix4d em = (m * dt).exp();
    Eigen::Matrix4d f = m.fullPivLu().solve(em - Eigen::Matrix4d::Identity());
    Eigen::Matrix2d q = unvec2(f * vec2(d));
    return 0.5 * (q + q.transpose());
}

// Stationary covariance X of the continuous system: AX + XA' + D = 0.
inline Eigen::Matrix2d stationary_covariance(const Eigen::Matrix2d& a, const Eigen::Matrix2d& d) {
    Eigen::Matrix4d m = kronecker_sum(a);
    Eigen::Vector4d x = m.fullPivLu().solve(-vec2(d));
    Eigen::Matrix2d s = unvec2(x);
    return 0.5 * (s + s.transpose());
}

struct Discretization {
    Eigen::Matrix2d phi;
    Eigen::Vector2d intercept;
    Eigen::Matrix2d q;
};

inline Discretization discretize(const LinearSystem2D& sys, double dt = 1.0) {
    Discretization d;
    d.phi = (sys.A * dt).exp();
    d.intercept = (Eigen::Matrix2d::Identity() - d.phi) * sys.mean;
    d.q = integral_covariance(sys.A, sys.D, dt);
    return d;
}

// Continuous-time recovery: A from the principal matrix logarithm of Phi
// (requires no eigenvalue on the closed negative real axis), means from the
// discrete fixed point, and D by inverting the integral-covariance map.
// Structure-implied zeros of A are set exactly (the log of a triangular
// matrix is triangular, so this removes only roundoff).
inline LinearSystem2D to_continuous(const Var1Fit& fit, double dt = 1.0) {
    const Eigen::Matrix2d phi = fit.transition;
    Eigen::EigenSolver<Eigen::Matrix2d> es(phi);
    for (int i = 0; i < 2; ++i) {
        std::complex<double> ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) < 1e-14 && ev.real() <= 0.0)
            throw std::runtime_error("to_continuous: transition eigenvalue on the closed negative real axis; no real logarithm");
    }
    LinearSystem2D sys;
    sys.A = phi.log() / dt;
    if (fit.structure != Var1Structure::BIDIRECTIONAL) sys.A(1, 0) = 0.0;
    if (fit.structure == Var1Structure::DECOUPLED) sys.A(0, 1) = 0.0;

    Eigen::Matrix2d imphi = Eigen::Matrix2d::Identity() - phi;
    sys.mean = imphi.fullPivLu().solve(fit.intercepts);
    if (!sys.mean.allFinite()) throw std::runtime_error("to_continuous: unit root; no stationary mean");

    Eigen::Matrix4d m = kronecker_sum(sys.A);
    Eigen::Matrix4d f = m.fullPivLu().solve((m * dt).exp() - Eigen::Matrix4d::Identity());
    Eigen::Vector4d vecd = f.fullPivLu().solve(vec2(fit.innovation_cov));
    Eigen::Matrix2d d = unvec2(vecd);
    sys.D = 0.5 * (d + d.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> des(sys.D);
    if (des.eigenvalues().minCoeff() < -1e-8)
        throw std::runtime_error("to_continuous: recovered diffusion matrix is not PSD (eigenvalue " +
                                 std::to_string(des.eigenvalues().minCoeff()) + ")");
    return sys;
}

inline KernelSummary projected_kernel(const LinearSystem2D& sys) {
    if (!(sys.theta_v() > 0.0)) throw std::runtime_error("projected_kernel: field does not relax (theta_v <= 0)");
    KernelSummary k;
    k.amplitude = sys.beta_psi() * sys.beta_v();
    k.timescale = 1.0 / sys.theta_v();
    k.defined = sys.beta_v() != 0.0;
    return k;
}

inline double kernel_at(const KernelSummary& k, double t) {
    return k.defined ? k.amplitude * std::exp(-t / k.timescale) : 0.0;
}

struct StructureComparison {
    Var1Fit decoupled, feedforward, bidirectional;
    Var1Structure winner = Var1Structure::DECOUPLED;
    double dbic_vs_next = 0.0;        // BIC(next best) - BIC(winner)
    double dbic_vs_decoupled = 0.0;   // BIC(decoupled) - BIC(winner)
    KernelSummary kernel;             // from the bidirectional fit
    std::string kernel_error;
};

// Fits all three structures and ranks by BIC (ties toward fewer parameters).
// The kernel is always taken from the bidirectional fit, which is the only
// structure that can carry feedback, even when it does not win.
inline StructureComparison compare_structures(const AlignedPair& pair) {
    StructureComparison c;
    c.decoupled = fit_var1(pair, Var1Structure::DECOUPLED);
    c.feedforward = fit_var1(pair, Var1Structure::FEEDFORWARD);
    c.bidirectional = fit_var1(pair, Var1Structure::BIDIRECTIONAL);
    const Var1Fit* fits[3] = {&c.decoupled, &c.feedforward, &c.bidirectional};
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) {
        if (fits[a]->bic != fits[b]->bic) return fits[a]->bic < fits[b]->bic;
        return fits[a]->k < fits[b]->k;
    });
    c.winner = fits[order[0]]->structure;
    c.dbic_vs_next = fits[order[1]]->bic - fits[order[0]]->bic;
    c.dbic_vs_decoupled = c.decoupled.bic - fits[order[0]]->bic;
    try {
        c.kernel = projected_kernel(to_continuous(c.bidirectional));
    } catch (const std::runtime_error& e) {
        c.kernel = KernelSummary{};
        c.kernel_error = e.what();
    }
    return c;
}

// Every stride-th observation of the pair (the "naive thinning" comparison).
inline AlignedPair thin_pair(const AlignedPair& pair, long stride) {
    if (stride < 1) throw std::runtime_error("thin_pair: stride must be >= 1");
    AlignedPair out;
    for (std::size_t i = 0; i < pair.size(); i += static_cast<std::size_t>(stride)) {
        out.dates.push_back(pair.dates[i]);
        out.x.push_back(pair.x[i]);
        out.y.push_back(pair.y[i]);
    }
    return out;
}

}  // namespace fieldattr
