#pragma once

// Price-panel ingestion and observable construction: rolling correlation
// spectra, the leading-eigenvalue fraction psi1, disjoint weekly / block
// reconstructions, and rolling volatilities.

#include <Eigen/Dense>

#include <string>
#include <unordered_map>
#include <vector>

#include "fieldattr/io.hpp"
#include "fieldattr/series.hpp"

namespace fieldattr {

struct ReturnPanel {
    std::vector<std::string> tickers;
    std::vector<std::string> dates;   // one per return observation
    Eigen::MatrixXd returns;          // N x T, daily log returns

    long n_stocks() const { return returns.rows(); }
    long n_days() const { return returns.cols(); }
};

struct CorrelationWindow {
    std::string end_date;
    Eigen::MatrixXd matrix;
};

inline ReturnPanel panel_from_prices(const std::vector<std::string>& tickers,
                                     const std::vector<std::string>& dates,
                                     const Eigen::MatrixXd& prices) {
    // prices: N x (T+1); output drops the first date.
    if (prices.cols() < 2) throw std::runtime_error("price panel needs at least 2 rows per ticker");
    for (long i = 0; i < prices.rows(); ++i)
        for (long t = 0; t < prices.cols(); ++t)
            if (!(prices(i, t) > 0.0))
                throw std::runtime_error("non-positive price for " + tickers[static_cast<std::size_t>(i)] +
                                         " on " + dates[static_cast<std::size_t>(t)]);
    for (std::size_t t = 1; t < dates.size(); ++t)
        if (!(dates[t - 1] < dates[t]))
            throw std::runtime_error("price dates not strictly increasing at " + dates[t]);
    ReturnPanel p;
    p.tickers = tickers;
    p.dates.assign(dates.begin() + 1, dates.end());
    p.returns.resize(prices.rows(), prices.cols() - 1);
    for (long i = 0; i < prices.rows(); ++i)
        for (long t = 1; t < prices.cols(); ++t)
            p.returns(i, t - 1) = std::log(prices(i, t)) - std::log(prices(i, t - 1));
    return p;
}

inline ReturnPanel load_returns(const std::string& prices_path) {
    RawTable t = read_dated_table(prices_path);
    if (t.header.empty())
        throw std::runtime_error(prices_path + ": price panel requires a header row of tickers");
    std::vector<std::string> tickers(t.header.begin() + 1, t.header.end());
    long n = static_cast<long>(tickers.size());
    long rows = static_cast<long>(t.dates.size());
    if (rows < 2) throw std::runtime_error(prices_path + ": need at least 2 price rows");
    Eigen::MatrixXd prices(n, rows);
    for (long r = 0; r < rows; ++r)
        for (long i = 0; i < n; ++i)
            prices(i, r) = t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
    return panel_from_prices(tickers, t.dates, prices);
}

// Pearson correlation of a block of W consecutive return columns starting at
// `start`. Population normalization cancels between numerator/denominator.
inline Eigen::MatrixXd correlation_of_block(const ReturnPanel& panel, long start, long W,
                                            const std::string& end_date) {
    long n = panel.n_stocks();
    Eigen::MatrixXd block = panel.returns.middleCols(start, W);
    Eigen::VectorXd mu = block.rowwise().mean();
    Eigen::MatrixXd centered = block.colwise() - mu;
    Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(W);
    Eigen::VectorXd sd = cov.diagonal().array().sqrt();
    for (long i = 0; i < n; ++i)
        if (!(sd(i) > 0.0))
            throw std::runtime_error("degenerate window ending " + end_date + ": zero variance for " +
                                     panel.tickers[static_cast<std::size_t>(i)]);
    Eigen::MatrixXd corr = cov.array() / (sd * sd.transpose()).array();
    corr.diagonal().setOnes();
    return corr;
}

inline std::vector<CorrelationWindow> rolling_correlation(const ReturnPanel& panel, long W) {
    if (W < 2) throw std::runtime_error("rolling_correlation: W must be >= 2");
    if (panel.n_days() < W) throw std::runtime_error("rolling_correlation: panel shorter than window");
    std::vector<CorrelationWindow> out;
    out.reserve(static_cast<std::size_t>(panel.n_days() - W + 1));
    for (long end = W - 1; end < panel.n_days(); ++end) {
        CorrelationWindow w;
        w.end_date = panel.dates[static_cast<std::size_t>(end)];
        w.matrix = correlation_of_block(panel, end - W + 1, W, w.end_date);
        out.push_back(std::move(w));
    }
    return out;
}

// Largest eigenvalue of a symmetric PSD matrix. Full decomposition up to
// N=512; power iteration with residual tolerance 1e-10 above that.
inline double leading_eigenvalue(const Eigen::MatrixXd& m) {
    long n = m.rows();
    if (n <= 512) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed to converge");
        return es.eigenvalues().maxCoeff();
    }
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd w = m * v;
        double norm = w.norm();
        if (norm == 0.0) throw std::runtime_error("power iteration hit zero vector");
        v = w / norm;
        lambda = v.dot(m * v);
        if ((m * v - lambda * v).norm() <= 1e-10 * std::max(1.0, lambda)) return lambda;
    }
    throw std::runtime_error("power iteration failed to converge");
}

inline double psi1_of(const Eigen::MatrixXd& corr) {
    return leading_eigenvalue(corr) / static_cast<double>(corr.rows());
}

inline ObservableSeries psi1_series(const ReturnPanel& panel, long W) {
    ObservableSeries s;
    s.label = "psi1_w" + std::to_string(W);
    for (long end = W - 1; end < panel.n_days(); ++end) {
        std::string end_date = panel.dates[static_cast<std::size_t>(end)];
        Eigen::MatrixXd corr = correlation_of_block(panel, end - W + 1, W, end_date);
        s.dates.push_back(end_date);
        s.values.push_back(psi1_of(corr));
    }
    return s;
}

struct WeeklyObservables {
    ObservableSeries psi1_weekly;
    ObservableSeries meancorr_weekly;
    std::vector<std::string> skipped_blocks;   // end dates of degenerate blocks
};

inline double mean_offdiagonal(const Eigen::MatrixXd& corr) {
    long n = corr.rows();
    double s = 0.0;
    long cnt = 0;
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) {
            s += corr(i, j);
            ++cnt;
        }
    return s / static_cast<double>(cnt);
}

// Disjoint 5-trading-day blocks anchored at the sample start; a block whose
// correlation is degenerate (zero variance) is skipped and recorded.
inline WeeklyObservables weekly_disjoint_observables(const ReturnPanel& panel) {
    if (panel.n_days() < 10) throw std::runtime_error("weekly observables: need at least 10 days");
    if (panel.n_stocks() < 2) throw std::runtime_error("weekly observables: need at least 2 stocks");
    WeeklyObservables out;
    out.psi1_weekly.label = "psi1_weekly";
    out.meancorr_weekly.label = "meancorr_weekly";
    long n_blocks = panel.n_days() / 5;
    for (long b = 0; b < n_blocks; ++b) {
        long start = b * 5;
        std::string end_date = panel.dates[static_cast<std::size_t>(start + 4)];
        Eigen::MatrixXd corr;
        try {
            corr = correlation_of_block(panel, start, 5, end_date);
        } catch (const std::runtime_error&) {
            out.skipped_blocks.push_back(end_date);
            continue;
        }
        out.psi1_weekly.dates.push_back(end_date);
        out.psi1_weekly.values.push_back(psi1_of(corr));
        out.meancorr_weekly.dates.push_back(end_date);
        out.meancorr_weekly.values.push_back(mean_offdiagonal(corr));
    }
    return out;
}

struct BlockObservables {
    std::vector<std::string> end_dates;
    std::vector<double> psi1;
    std::vector<double> vix_end;
    std::vector<double> vix_mean;   // mean over field observations within the block
    std::vector<std::string> skipped_blocks;
};

inline BlockObservables block_observables(const ReturnPanel& panel, const ObservableSeries& vix,
                                          long B = 60) {
    if (panel.n_days() < 2 * B) throw std::runtime_error("block observables: need at least 2 blocks");
    check_series(vix);
    std::unordered_map<std::string, double> vix_at;
    for (std::size_t i = 0; i < vix.size(); ++i) vix_at.emplace(vix.dates[i], vix.values[i]);
    BlockObservables out;
    long n_blocks = panel.n_days() / B;
    for (long b = 0; b < n_blocks; ++b) {
        long start = b * B;
        std::string end_date = panel.dates[static_cast<std::size_t>(start + B - 1)];
        Eigen::MatrixXd corr;
        try {
            corr = correlation_of_block(panel, start, B, end_date);
        } catch (const std::runtime_error&) {
            out.skipped_blocks.push_back(end_date);
            continue;
        }
        auto it = vix_at.find(end_date);
        if (it == vix_at.end())
            throw std::runtime_error("block observables: field series missing end date " + end_date);
        double vsum = 0.0;
        long vcnt = 0;
        for (long t = start; t < start + B; ++t) {
            auto jt = vix_at.find(panel.dates[static_cast<std::size_t>(t)]);
            if (jt != vix_at.end()) {
                vsum += jt->second;
                ++vcnt;
            }
        }
        if (vcnt == 0) throw std::runtime_error("block observables: no field observations in block ending " + end_date);
        out.end_dates.push_back(end_date);
        out.psi1.push_back(psi1_of(corr));
        out.vix_end.push_back(it->second);
        out.vix_mean.push_back(vsum / static_cast<double>(vcnt));
    }
    return out;
}

// Trailing per-stock standard deviation of returns (sample normalization,
// divide by W-1; this choice does not cancel anywhere, unlike correlation).
inline Eigen::MatrixXd rolling_volatility(const ReturnPanel& panel, long W = 60) {
    if (W < 2) throw std::runtime_error("rolling_volatility: W must be >= 2");
    if (panel.n_days() < W) throw std::runtime_error("rolling_volatility: panel shorter than window");
    long n = panel.n_stocks();
    long m = panel.n_days() - W + 1;
    Eigen::MatrixXd vol(n, m);
    for (long end = W - 1; end < panel.n_days(); ++end) {
        Eigen::MatrixXd block = panel.returns.middleCols(end - W + 1, W);
        Eigen::VectorXd mu = block.rowwise().mean();
        Eigen::MatrixXd centered = block.colwise() - mu;
        vol.col(end - W + 1) =
            (centered.array().square().rowwise().sum() / static_cast<double>(W - 1)).sqrt();
    }
    return vol;
}

}  // namespace fieldattr
