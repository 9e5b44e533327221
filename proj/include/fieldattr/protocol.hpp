#pragma once

// The layered protocol, end to end: load a price panel and a field series,
// build the observable, then run the eleven analysis stages in a fixed order
// and collect everything into a report of named tables plus a structured
// summary. Stage failures are recorded, not fatal; dependent stages skip.
// Reports are deterministic per (config, seed): no timestamps, no locale,
// 17-significant-digit table cells.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fieldattr/diagnostics.hpp"
#include "fieldattr/field_decomp.hpp"
#include "fieldattr/io.hpp"
#include "fieldattr/market_data.hpp"
#include "fieldattr/oos.hpp"
#include "fieldattr/ou_models.hpp"
#include "fieldattr/regime.hpp"
#include "fieldattr/residual_state.hpp"
#include "fieldattr/rng.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/surrogate.hpp"
#include "fieldattr/twod.hpp"
#include "fieldattr/version.hpp"

namespace fieldattr {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& protocol_stage_names() {
    static const std::vector<std::string> names = {
        "observables", "models",      "placebo", "granger", "decompose", "diagnostics",
        "sweep",       "disjoint",    "oos",     "twod",    "residual"};
    return names;
}

struct ProtocolConfig {
    std::string prices;
    std::string vix;
    std::string move;   // optional auxiliary fields; empty string = absent
    std::string ted;
    long window = 60;
    std::uint64_t seed = 1;
    std::string output = "report";
    std::vector<std::string> stages;   // empty = all
    int placebo_count = 100;
    std::string placebo_comparison = "one_d";
    std::vector<std::string> split_dates;   // empty = quantile defaults
    std::optional<std::pair<std::string, std::string>> exclusion;
    std::vector<double> quiet_band;    // [lo, hi] on the field level; empty = quantile defaults
    std::string quiet_mode = "rolling_median";
    long quiet_min_len = 120;
    std::vector<long> horizons = {30, 60, 90};
    std::vector<long> windows = {30, 45, 60, 90, 120};
    std::string decomp_split_date;     // empty = median correlation-window end date
    long block_days = 60;
    long thin_stride = 5;
    int max_lag = 10;
    long bootstrap_draws = 400;
    nlohmann::json raw;   // echoed into the manifest

    bool stage_enabled(const std::string& name) const {
        if (stages.empty()) return true;
        for (const auto& s : stages)
            if (s == name) return true;
        return false;
    }
};

namespace detail_proto {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

template <class T>
inline T get_as(const nlohmann::json& j, const std::string& key, const char* type_name) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' must be " + type_name);
    }
}

}  // namespace detail_proto

inline ProtocolConfig config_from_json(const nlohmann::json& j) {
    using detail_proto::get_as;
    using detail_proto::require;
    require(j.is_object(), "config root must be a JSON object");

    static const std::set<std::string> allowed = {
        "prices",      "vix",        "move",        "ted",
        "window",      "seed",       "output",      "stages",
        "placebo_count", "placebo_comparison", "split_dates", "exclusion",
        "quiet_band",  "quiet_mode", "quiet_min_len", "horizons",
        "windows",     "decomp_split_date", "block_days", "thin_stride",
        "max_lag",     "bootstrap_draws"};
    for (auto it = j.begin(); it != j.end(); ++it)
        require(allowed.count(it.key()) > 0, "unknown config key '" + it.key() + "'");

    ProtocolConfig c;
    c.raw = j;
    require(j.contains("prices"), "config key 'prices' is required");
    require(j.contains("vix"), "config key 'vix' is required");
    require(j.contains("seed"), "config key 'seed' is required");
    c.prices = get_as<std::string>(j, "prices", "a string path");
    c.vix = get_as<std::string>(j, "vix", "a string path");
    c.seed = get_as<std::uint64_t>(j, "seed", "an unsigned integer");
    if (j.contains("move")) c.move = get_as<std::string>(j, "move", "a string path");
    if (j.contains("ted")) c.ted = get_as<std::string>(j, "ted", "a string path");
    if (j.contains("window")) c.window = get_as<long>(j, "window", "an integer");
    require(c.window >= 5, "config: window must be >= 5");
    if (j.contains("output")) c.output = get_as<std::string>(j, "output", "a string path");
    if (j.contains("stages")) {
        c.stages = get_as<std::vector<std::string>>(j, "stages", "an array of stage names");
        require(!c.stages.empty(), "config: stages, when present, must not be empty");
        const auto& known = protocol_stage_names();
        for (const auto& s : c.stages)
            require(std::find(known.begin(), known.end(), s) != known.end(),
                    "config: unknown stage '" + s + "'");
    }
    if (j.contains("placebo_count")) c.placebo_count = get_as<int>(j, "placebo_count", "an integer");
    require(c.placebo_count >= 1, "config: placebo_count must be >= 1");
    if (j.contains("placebo_comparison")) {
        c.placebo_comparison = get_as<std::string>(j, "placebo_comparison", "a string");
        require(c.placebo_comparison == "one_d" || c.placebo_comparison == "two_d",
                "config: placebo_comparison must be 'one_d' or 'two_d'");
    }
    if (j.contains("split_dates"))
        c.split_dates = get_as<std::vector<std::string>>(j, "split_dates", "an array of dates");
    if (j.contains("exclusion")) {
        auto v = get_as<std::vector<std::string>>(j, "exclusion", "an array [start, end]");
        require(v.size() == 2, "config: exclusion must be [start_date, end_date]");
        require(v[0] <= v[1], "config: exclusion range is reversed");
        c.exclusion = std::make_pair(v[0], v[1]);
    }
    if (j.contains("quiet_band")) {
        c.quiet_band = get_as<std::vector<double>>(j, "quiet_band", "an array [lo, hi]");
        require(c.quiet_band.size() == 2 && c.quiet_band[0] < c.quiet_band[1],
                "config: quiet_band must be [lo, hi] with lo < hi");
    }
    if (j.contains("quiet_mode")) {
        c.quiet_mode = get_as<std::string>(j, "quiet_mode", "a string");
        require(c.quiet_mode == "strict_daily" || c.quiet_mode == "rolling_median",
                "config: quiet_mode must be 'strict_daily' or 'rolling_median'");
    }
    if (j.contains("quiet_min_len")) c.quiet_min_len = get_as<long>(j, "quiet_min_len", "an integer");
    require(c.quiet_min_len >= 1, "config: quiet_min_len must be >= 1");
    if (j.contains("horizons")) c.horizons = get_as<std::vector<long>>(j, "horizons", "an array of integers");
    require(!c.horizons.empty(), "config: horizons must not be empty");
    if (j.contains("windows")) c.windows = get_as<std::vector<long>>(j, "windows", "an array of integers");
    require(!c.windows.empty(), "config: windows must not be empty");
    if (j.contains("decomp_split_date"))
        c.decomp_split_date = get_as<std::string>(j, "decomp_split_date", "a date string");
    if (j.contains("block_days")) c.block_days = get_as<long>(j, "block_days", "an integer");
    require(c.block_days >= 5, "config: block_days must be >= 5");
    if (j.contains("thin_stride")) c.thin_stride = get_as<long>(j, "thin_stride", "an integer");
    require(c.thin_stride >= 2, "config: thin_stride must be >= 2");
    if (j.contains("max_lag")) c.max_lag = get_as<int>(j, "max_lag", "an integer");
    require(c.max_lag >= 1, "config: max_lag must be >= 1");
    if (j.contains("bootstrap_draws")) c.bootstrap_draws = get_as<long>(j, "bootstrap_draws", "an integer");
    require(c.bootstrap_draws >= 10, "config: bootstrap_draws must be >= 10");
    return c;
}

inline ProtocolConfig load_protocol_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

struct ReportTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct StageRecord {
    std::string name;
    bool enabled = false;
    bool ok = false;
    std::string error;
};

struct ProtocolReport {
    std::vector<StageRecord> stages;
    std::vector<ReportTable> tables;
    nlohmann::json summary = nlohmann::json::object();
    nlohmann::json manifest = nlohmann::json::object();

    bool all_ok() const {
        for (const auto& s : stages)
            if (s.enabled && !s.ok) return false;
        return true;
    }
};

namespace detail_proto {

inline std::string cell(double v) { return fmt_g(v); }

// FNV-1a over the canonical config dump; enough to notice config drift.
inline std::string config_hash(const nlohmann::json& j) {
    std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Everything the stages share. Observables are built once up front; the two
// baseline fits are built on first use so disabling "models" does not hide
// them from diagnostics.
struct Context {
    const ProtocolConfig& cfg;
    ReturnPanel panel;
    std::vector<CorrelationWindow> corrs;
    ObservableSeries psi_full;       // every window end date
    ObservableSeries vix_level;      // raw field levels, full calendar
    ObservableSeries psi;            // aligned with the field
    ObservableSeries log_vix;        // aligned with psi
    std::optional<ObservableSeries> move_level, ted_level;
    std::optional<ModelFit> m0_fit, m2_fit;

    explicit Context(const ProtocolConfig& c) : cfg(c) {}

    const ModelFit& m0() {
        if (!m0_fit) {
            ModelSpec spec;
            m0_fit = fit(spec, psi, derive_seed(cfg.seed, "protocol-m0", 0));
        }
        return *m0_fit;
    }
    const ModelFit& m2() {
        if (!m2_fit) {
            ModelSpec spec;
            spec.family = Family::OU_FIELD;
            spec.fields = {log_vix};
            m2_fit = fit(spec, psi, derive_seed(cfg.seed, "protocol-m2", 0));
        }
        return *m2_fit;
    }
    AlignedPair pair() const {
        AlignedPair p;
        p.dates = psi.dates;
        p.x = psi.values;
        p.y = log_vix.values;
        return p;
    }
};

inline void build_observables(Context& ctx) {
    const ProtocolConfig& cfg = ctx.cfg;
    ctx.panel = load_returns(cfg.prices);
    ctx.corrs = rolling_correlation(ctx.panel, cfg.window);
    ctx.psi_full = psi1_series(ctx.panel, cfg.window);
    ctx.vix_level = load_field_series(cfg.vix, "vix_close");
    ObservableSeries logv = log_series(ctx.vix_level, "log_vix");
    AlignedPair ap = align(ctx.psi_full, logv);
    if (ap.dates.size() < 200)
        throw std::runtime_error("protocol: aligned sample too short (" +
                                 std::to_string(ap.dates.size()) + " days)");
    ctx.psi = ObservableSeries{ap.dates, ap.x, ctx.psi_full.label};
    ctx.log_vix = ObservableSeries{ap.dates, ap.y, "log_vix"};
    if (!cfg.move.empty()) ctx.move_level = load_field_series(cfg.move, "move_close");
    if (!cfg.ted.empty()) ctx.ted_level = load_field_series(cfg.ted, "ted_close");
}

inline void stage_observables(Context& ctx, ProtocolReport& rep) {
    ReportTable t;
    t.name = "observables";
    t.header = {"date", "psi1", "log_vix"};
    for (std::size_t i = 0; i < ctx.psi.size(); ++i)
        t.rows.push_back({ctx.psi.dates[i], cell(ctx.psi.values[i]), cell(ctx.log_vix.values[i])});
    rep.tables.push_back(std::move(t));
    nlohmann::json s;
    s["n_stocks"] = ctx.panel.n_stocks();
    s["n_return_days"] = ctx.panel.n_days();
    s["n_windows"] = ctx.corrs.size();
    s["n_aligned"] = ctx.psi.size();
    s["window"] = ctx.cfg.window;
    s["psi_mean"] = mean_of(ctx.psi.values);
    s["psi_sd"] = sd_of(ctx.psi.values);
    s["log_vix_mean"] = mean_of(ctx.log_vix.values);
    rep.summary["observables"] = std::move(s);
}

inline void stage_models(Context& ctx, ProtocolReport& rep) {
    const ModelFit& f0 = ctx.m0();
    const ModelFit& f2 = ctx.m2();

    auto fit_family = [&](Family fam, const char* tag) {
        ModelSpec spec;
        spec.family = fam;
        if (field_arity(fam) == 1) spec.fields = {ctx.log_vix};
        return fit(spec, ctx.psi, derive_seed(ctx.cfg.seed, tag, 0));
    };
    ModelFit f1 = fit_family(Family::QUARTIC, "protocol-m1");
    ModelFit f2p = fit_family(Family::OU_FIELD_HETERO, "protocol-m2p");
    ModelFit f3 = fit_family(Family::QUARTIC_FIELD, "protocol-m3");
    RegimeFit rs = fit_rs(false, ctx.psi, nullptr, derive_seed(ctx.cfg.seed, "protocol-rs", 0));
    RegimeFit rsf = fit_rs(true, ctx.psi, &ctx.log_vix, derive_seed(ctx.cfg.seed, "protocol-rsf", 0));

    ReportTable t;
    t.name = "models";
    t.header = {"model", "k", "n_trans", "loglik", "aic", "bic", "dbic_vs_m2"};
    auto row = [&](const std::string& name, int k, long n, double ll, double aic, double bic) {
        t.rows.push_back({name, std::to_string(k), std::to_string(n), cell(ll), cell(aic),
                          cell(bic), cell(bic - f2.bic)});
    };
    row("m0_ou", f0.k, f0.n_trans, f0.loglik, f0.aic, f0.bic);
    row("m1_quartic", f1.k, f1.n_trans, f1.loglik, f1.aic, f1.bic);
    row("m2_ou_field", f2.k, f2.n_trans, f2.loglik, f2.aic, f2.bic);
    row("m2p_ou_field_hetero", f2p.k, f2p.n_trans, f2p.loglik, f2p.aic, f2p.bic);
    row("m3_quartic_field", f3.k, f3.n_trans, f3.loglik, f3.aic, f3.bic);
    row("rs_bare", rs.k, rs.n_trans, rs.loglik, rs.aic, rs.bic);
    row("rs_field", rsf.k, rsf.n_trans, rsf.loglik, rsf.aic, rsf.bic);
    rep.tables.push_back(std::move(t));

    nlohmann::json s;
    s["m2"] = {{"theta", f2.param("theta")},
               {"mu", f2.param("mu")},
               {"beta", f2.param("beta")},
               {"sigma", f2.param("sigma")}};
    AttributionSummary attr = attribution(f0, f2);
    s["attribution"] = {{"tau_auto", attr.tau_auto},
                        {"tau_cond", attr.tau_cond},
                        {"chi", attr.chi},
                        {"scpa", attr.scpa}};
    s["mu_eff_at_mean_field"] = mu_eff(f2, mean_of(ctx.log_vix.values));
    LrtResult lr = lrt(rs, rsf);
    s["rs_lrt"] = {{"chi2", lr.chi2}, {"df", lr.df}, {"p", lr.p}};
    s["rs_field_params"] = {{"theta", rsf.params.theta},
                            {"mu_calm", rsf.params.mu_calm},
                            {"mu_stress", rsf.params.mu_stress},
                            {"beta", rsf.params.beta},
                            {"sigma", rsf.params.sigma},
                            {"p_cs", rsf.params.p_cs},
                            {"p_sc", rsf.params.p_sc}};
    // a regime-free sample can push the fitted probabilities onto the 0/1
    // boundary, where dwell times are undefined; report that instead of dying
    if (rsf.params.p_cs > 0.0 && rsf.params.p_cs < 1.0 && rsf.params.p_sc > 0.0 &&
        rsf.params.p_sc < 1.0) {
        RegimeStats rstats = regime_stats(rsf.params);
        s["rs_stats"] = {{"expected_calm_days", rstats.expected_calm_days},
                         {"expected_stress_days", rstats.expected_stress_days},
                         {"stationary_calm", rstats.stationary_calm},
                         {"stationary_stress", rstats.stationary_stress},
                         {"calm_relaxation_days", rstats.calm_relaxation_days}};
    } else {
        s["rs_stats"] = {{"degenerate", "transition probabilities on the boundary"}};
    }
    ObservableSeries pit = pit_series(f2, ctx.psi, {ctx.log_vix});
    double ks = ks_uniform(pit.values);
    s["pit_ks"] = {{"stat", ks}, {"crit_5pct", ks_critical_5pct(pit.values.size())}};

    // auxiliary fields, when provided: same machinery on the maximal
    // same-sample intersections
    auto aux_block = [&](const ObservableSeries& level, const char* tag) {
        ObservableSeries lg = log_series(level, std::string("log_") + tag);
        AlignedPair ap = align(ctx.psi_full, lg);
        ObservableSeries p{ap.dates, ap.x, ctx.psi_full.label};
        ObservableSeries f{ap.dates, ap.y, lg.label};
        ModelSpec m0s;
        ModelFit a0 = fit(m0s, p, derive_seed(ctx.cfg.seed, "protocol-aux-m0", hash_name(tag)));
        ModelSpec m2s;
        m2s.family = Family::OU_FIELD;
        m2s.fields = {f};
        ModelFit a2 = fit(m2s, p, derive_seed(ctx.cfg.seed, "protocol-aux-m2", hash_name(tag)));
        nlohmann::json out;
        out["n_trans"] = a2.n_trans;
        out["theta"] = a2.param("theta");
        out["beta"] = a2.param("beta");
        out["chi"] = a2.param("beta") / a2.param("theta");
        out["dbic_vs_bare"] = a0.bic - a2.bic;
        return out;
    };
    if (ctx.move_level) s["aux_move"] = aux_block(*ctx.move_level, "move");
    if (ctx.ted_level) s["aux_ted"] = aux_block(*ctx.ted_level, "ted");
    if (ctx.move_level) {
        ObservableSeries lgm = log_series(*ctx.move_level, "log_move");
        auto multi = align_many({&ctx.psi_full, &ctx.log_vix, &lgm});
        ObservableSeries p = multi[0], v1 = multi[1], v2 = multi[2];
        ModelSpec two;
        two.family = Family::OU_MULTIFIELD;
        two.fields = {v1, v2};
        ModelFit ftwo = fit(two, p, derive_seed(ctx.cfg.seed, "protocol-aux-two", 0));
        ModelSpec one;
        one.family = Family::OU_FIELD;
        one.fields = {v1};
        ModelFit fone = fit(one, p, derive_seed(ctx.cfg.seed, "protocol-aux-one", 0));
        s["aux_two_field"] = {{"n_trans", ftwo.n_trans},
                              {"beta1", ftwo.param("beta1")},
                              {"beta2", ftwo.param("beta2")},
                              {"dbic_vs_single", fone.bic - ftwo.bic}};
    }
    rep.summary["models"] = std::move(s);
}

inline void stage_placebo(Context& ctx, ProtocolReport& rep) {
    PlaceboComparison cmp = ctx.cfg.placebo_comparison == "two_d" ? PlaceboComparison::TWO_D
                                                                  : PlaceboComparison::ONE_D;
    PlaceboReport pr = placebo_gate(ctx.psi, ctx.log_vix, ctx.cfg.placebo_count,
                                    derive_seed(ctx.cfg.seed, "protocol-placebo", 0), cmp);
    ReportTable t;
    t.name = "placebo_gains";
    t.header = {"index", "gain"};
    for (std::size_t i = 0; i < pr.placebo_gains.size(); ++i)
        t.rows.push_back({std::to_string(i), cell(pr.placebo_gains[i])});
    rep.tables.push_back(std::move(t));
    rep.summary["placebo"] = {{"comparison", ctx.cfg.placebo_comparison},
                              {"real_gain", pr.real_gain},
                              {"empirical_p", pr.empirical_p},
                              {"mean", pr.mean},
                              {"sd", pr.sd},
                              {"max", pr.max},
                              {"n_requested", pr.n_requested},
                              {"n_failed", pr.n_failed}};
}

inline void stage_granger(Context& ctx, ProtocolReport& rep) {
    GrangerPair g = granger(ctx.pair(), ctx.cfg.max_lag, true);
    ReportTable t;
    t.name = "granger";
    t.header = {"direction", "lags", "f_stat", "p_value"};
    t.rows.push_back({"field_to_psi", std::to_string(g.y_to_x.lag), cell(g.y_to_x.F), cell(g.y_to_x.p)});
    t.rows.push_back({"psi_to_field", std::to_string(g.x_to_y.lag), cell(g.x_to_y.F), cell(g.x_to_y.p)});
    rep.tables.push_back(std::move(t));
    rep.summary["granger"] = {{"lags", g.y_to_x.lag},
                              {"field_to_psi_p", g.y_to_x.p},
                              {"psi_to_field_p", g.x_to_y.p},
                              {"differenced", true}};
}

inline void stage_decompose(Context& ctx, ProtocolReport& rep) {
    std::string split = ctx.cfg.decomp_split_date;
    if (split.empty()) split = ctx.corrs[ctx.corrs.size() / 2].end_date;
    std::vector<DecompRecipe> recipes = default_recipes(split);
    std::vector<RecipeRow> rows = recipe_grid(ctx.panel, ctx.corrs, ctx.log_vix, ctx.psi, recipes,
                                              derive_seed(ctx.cfg.seed, "protocol-decomp", 0));
    ReportTable t;
    t.name = "decomposition";
    t.header = {"recipe", "f_mech", "f_info", "r2_mech", "r2_full", "dbic_actual",
                "dbic_mech_only", "dbic_info_only", "partial_residual_corr", "error"};
    int n_ok = 0;
    for (const auto& r : rows) {
        if (r.ok()) {
            ++n_ok;
            t.rows.push_back({r.recipe.name(), cell(r.result.mech_fraction), cell(r.result.info_fraction),
                              cell(r.result.r2_mech), cell(r.result.r2_full), cell(r.result.dbic_actual),
                              cell(r.result.dbic_mech_only), cell(r.result.dbic_info_only),
                              cell(r.result.partial_residual_corr), ""});
        } else {
            t.rows.push_back({r.recipe.name(), "", "", "", "", "", "", "", "", r.error});
        }
    }
    rep.tables.push_back(std::move(t));
    if (n_ok == 0) throw std::runtime_error("decompose: every recipe failed");
    rep.summary["decompose"] = {{"split_date", split}, {"n_recipes", rows.size()}, {"n_ok", n_ok}};
}

inline void stage_diagnostics(Context& ctx, ProtocolReport& rep) {
    nlohmann::json s;
    const long max_lag = 90;
    AcfSummary full = acf_summary(ctx.psi, max_lag);
    s["full"] = {{"efolding", full.efolding_lag ? nlohmann::json(*full.efolding_lag) : nlohmann::json()},
                 {"integrated_60", full.integrated_60},
                 {"integrated_90", full.integrated_90}};

    ObservableSeries stripped = field_stripped_residual(ctx.m2(), ctx.psi, ctx.log_vix);
    AcfSummary strip = acf_summary(stripped, max_lag);
    s["field_stripped"] = {{"efolding", strip.efolding_lag ? nlohmann::json(*strip.efolding_lag) : nlohmann::json()},
                           {"integrated_60", strip.integrated_60},
                           {"integrated_90", strip.integrated_90}};

    // quiet-episode pieces are best-effort: segments depend on the band
    QuietSpec qs;
    qs.mode = ctx.cfg.quiet_mode == "strict_daily" ? QuietSpec::Mode::STRICT_DAILY
                                                   : QuietSpec::Mode::ROLLING_MEDIAN;
    qs.min_len = ctx.cfg.quiet_min_len;
    ObservableSeries field_on_sample;
    {
        AlignedPair ap = align(ctx.vix_level, ctx.psi);
        field_on_sample = ObservableSeries{ap.dates, ap.x, ctx.vix_level.label};
    }
    if (ctx.cfg.quiet_band.size() == 2) {
        qs.band_lo = ctx.cfg.quiet_band[0];
        qs.band_hi = ctx.cfg.quiet_band[1];
    } else {
        std::vector<double> v = field_on_sample.values;
        qs.band_lo = quantile_of(v, 0.10);
        qs.band_hi = quantile_of(v, 0.40);
    }
    s["quiet_band"] = {qs.band_lo, qs.band_hi};
    s["quiet_mode"] = ctx.cfg.quiet_mode;

    AcfSummary pooled;
    bool have_pooled = false;
    try {
        std::vector<QuietSegment> segs = quiet_segments(field_on_sample, qs);
        if (segs.empty()) throw std::runtime_error("no quiet segments in the band");
        ReportTable seg_t;
        seg_t.name = "quiet_segments";
        seg_t.header = {"begin_date", "end_date", "length"};
        for (const auto& g : segs)
            seg_t.rows.push_back({g.begin_date, g.end_date, std::to_string(g.length())});
        rep.tables.push_back(std::move(seg_t));

        pooled = pooled_quiet_acf(ctx.psi, segs, 60);
        have_pooled = true;
        s["quiet"] = {{"n_segments", segs.size()},
                      {"efolding", pooled.efolding_lag ? nlohmann::json(*pooled.efolding_lag) : nlohmann::json()},
                      {"integrated_60", pooled.integrated_60}};
        EpisodeBootstrap boot = episode_bootstrap(ctx.psi, segs, ctx.cfg.bootstrap_draws,
                                                  derive_seed(ctx.cfg.seed, "protocol-boot", 0), 60);
        s["quiet_bootstrap"] = {{"point", boot.point ? nlohmann::json(*boot.point) : nlohmann::json()},
                                {"ci_lo", boot.ci_lo},
                                {"ci_hi", boot.ci_hi},
                                {"n_defined", boot.n_defined},
                                {"draws", boot.draws}};
    } catch (const std::runtime_error& e) {
        s["quiet_error"] = e.what();
    }

    ReportTable t;
    t.name = "acf";
    t.header = {"lag", "acf_full", "acf_field_stripped", "acf_quiet_pooled"};
    for (long l = 0; l <= max_lag; ++l) {
        std::string pooled_cell;
        if (have_pooled && l < static_cast<long>(pooled.acf.size()))
            pooled_cell = cell(pooled.acf[static_cast<std::size_t>(l)]);
        t.rows.push_back({std::to_string(l), cell(full.acf[static_cast<std::size_t>(l)]),
                          cell(strip.acf[static_cast<std::size_t>(l)]), pooled_cell});
    }
    rep.tables.push_back(std::move(t));
    rep.summary["diagnostics"] = std::move(s);
}

inline void stage_sweep(Context& ctx, ProtocolReport& rep) {
    ObservableSeries logv = log_series(ctx.vix_level, "log_vix");
    std::vector<WindowRow> rows =
        window_sweep(ctx.panel, logv, derive_seed(ctx.cfg.seed, "protocol-sweep", 0), ctx.cfg.windows);
    ReportTable t;
    t.name = "window_sweep";
    t.header = {"w", "theta0", "tau0", "theta", "tau_cond", "beta", "chi", "scpa", "dbic"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.w), cell(r.theta0), cell(r.tau0), cell(r.theta),
                          cell(r.tau_cond), cell(r.beta), cell(r.chi), cell(r.scpa), cell(r.dbic)});
    rep.tables.push_back(std::move(t));
    rep.summary["sweep"] = {{"n_windows", rows.size()}};
}

inline void stage_disjoint(Context& ctx, ProtocolReport& rep) {
    ObservableSeries logv = log_series(ctx.vix_level, "log_vix");
    nlohmann::json s;
    ReportTable t;
    t.name = "disjoint";
    t.header = {"scheme", "n_obs", "dt", "theta", "beta", "chi", "dbic"};

    // disjoint weekly blocks, dt = 5 trading days
    WeeklyObservables wk = weekly_disjoint_observables(ctx.panel);
    {
        AlignedPair ap = align(wk.psi1_weekly, logv);
        ObservableSeries p{ap.dates, ap.x, "psi1_weekly"};
        ObservableSeries f{ap.dates, ap.y, "log_vix"};
        ModelSpec m0s;
        m0s.dt = 5.0;
        ModelFit a0 = fit(m0s, p, derive_seed(ctx.cfg.seed, "protocol-weekly-m0", 0));
        ModelSpec m2s;
        m2s.family = Family::OU_FIELD;
        m2s.fields = {f};
        m2s.dt = 5.0;
        ModelFit a2 = fit(m2s, p, derive_seed(ctx.cfg.seed, "protocol-weekly-m2", 0));
        t.rows.push_back({"weekly_disjoint", std::to_string(p.size()), cell(5.0),
                          cell(a2.param("theta")), cell(a2.param("beta")),
                          cell(a2.param("beta") / a2.param("theta")), cell(a0.bic - a2.bic)});
        s["weekly_skipped"] = wk.skipped_blocks.size();
    }

    // disjoint B-day blocks with the block-mean field level
    BlockObservables blocks = block_observables(ctx.panel, ctx.vix_level, ctx.cfg.block_days);
    {
        ObservableSeries p{blocks.end_dates, blocks.psi1, "psi1_block"};
        ObservableSeries f{blocks.end_dates, blocks.vix_mean, "log_vix_block_mean"};
        for (double& v : f.values) {
            if (!(v > 0.0)) throw std::runtime_error("disjoint: nonpositive block field mean");
            v = std::log(v);
        }
        double dt = static_cast<double>(ctx.cfg.block_days);
        ModelSpec m0s;
        m0s.dt = dt;
        ModelFit a0 = fit(m0s, p, derive_seed(ctx.cfg.seed, "protocol-block-m0", 0));
        ModelSpec m2s;
        m2s.family = Family::OU_FIELD;
        m2s.fields = {f};
        m2s.dt = dt;
        ModelFit a2 = fit(m2s, p, derive_seed(ctx.cfg.seed, "protocol-block-m2", 0));
        t.rows.push_back({"block_disjoint", std::to_string(p.size()), cell(dt),
                          cell(a2.param("theta")), cell(a2.param("beta")),
                          cell(a2.param("beta") / a2.param("theta")), cell(a0.bic - a2.bic)});
        s["block_skipped"] = blocks.skipped_blocks.size();
    }

    // naive thinning of the daily pair, as the contrast to true disjointness
    {
        AlignedPair thin = thin_pair(ctx.pair(), ctx.cfg.thin_stride);
        Var1Fit bi = fit_var1(thin, Var1Structure::BIDIRECTIONAL);
        LinearSystem2D sys = to_continuous(bi, static_cast<double>(ctx.cfg.thin_stride));
        nlohmann::json thin_s;
        thin_s["stride"] = ctx.cfg.thin_stride;
        thin_s["n_obs"] = thin.size();
        thin_s["theta_psi"] = sys.theta_psi();
        thin_s["beta_psi"] = sys.beta_psi();
        try {
            KernelSummary k = projected_kernel(sys);
            thin_s["kernel_timescale"] = k.timescale;
            thin_s["kernel_amplitude"] = k.amplitude;
        } catch (const std::runtime_error& e) {
            thin_s["kernel_error"] = e.what();
        }
        s["thinned_2d"] = std::move(thin_s);
    }

    rep.tables.push_back(std::move(t));
    rep.summary["disjoint"] = std::move(s);
}

inline void stage_oos(Context& ctx, ProtocolReport& rep) {
    std::vector<std::string> splits = ctx.cfg.split_dates;
    if (splits.empty()) {
        for (double f : {0.5, 0.6, 0.7, 0.8}) {
            std::size_t idx = static_cast<std::size_t>(f * static_cast<double>(ctx.psi.size()));
            splits.push_back(ctx.psi.dates[idx]);
        }
    }
    std::vector<SplitResult> rows = anchored_oos(ctx.psi, ctx.log_vix, splits,
                                                 derive_seed(ctx.cfg.seed, "protocol-oos", 0),
                                                 ctx.cfg.exclusion);
    ReportTable t;
    t.name = "oos_splits";
    t.header = {"nominal_date", "split_date", "n_train", "n_test", "n_test_trans",
                "m0_train_ll_per_obs", "m2_train_ll_per_obs", "m0_test_ll_per_obs",
                "m2_test_ll_per_obs", "gap", "m2_ratio"};
    int n_gap_pos = 0;
    for (const auto& r : rows) {
        if (r.gap > 0.0) ++n_gap_pos;
        t.rows.push_back({r.nominal_date, r.split_date, std::to_string(r.n_train),
                          std::to_string(r.n_test), std::to_string(r.n_test_trans),
                          cell(r.m0_train_ll_per_obs), cell(r.m2_train_ll_per_obs),
                          cell(r.m0_test_ll_per_obs), cell(r.m2_test_ll_per_obs), cell(r.gap),
                          cell(r.m2_ratio)});
    }
    rep.tables.push_back(std::move(t));
    rep.summary["oos"] = {{"n_splits", rows.size()},
                          {"n_gap_positive", n_gap_pos},
                          {"excluded", ctx.cfg.exclusion.has_value()}};
}

inline void stage_twod(Context& ctx, ProtocolReport& rep) {
    StructureComparison c = compare_structures(ctx.pair());
    ReportTable t;
    t.name = "twod_structures";
    t.header = {"structure", "k", "n_trans", "loglik", "aic", "bic"};
    for (const Var1Fit* f : {&c.decoupled, &c.feedforward, &c.bidirectional})
        t.rows.push_back({structure_name(f->structure), std::to_string(f->k),
                          std::to_string(f->n_trans), cell(f->loglik), cell(f->aic), cell(f->bic)});
    rep.tables.push_back(std::move(t));

    nlohmann::json s;
    s["winner"] = structure_name(c.winner);
    s["dbic_vs_next"] = c.dbic_vs_next;
    s["dbic_vs_decoupled"] = c.dbic_vs_decoupled;
    try {
        LinearSystem2D sys = to_continuous(c.bidirectional);
        s["continuous"] = {{"theta_psi", sys.theta_psi()},
                           {"beta_psi", sys.beta_psi()},
                           {"beta_v", sys.beta_v()},
                           {"theta_v", sys.theta_v()}};
    } catch (const std::runtime_error& e) {
        s["continuous_error"] = e.what();
    }
    if (c.kernel_error.empty())
        s["kernel"] = {{"amplitude", c.kernel.amplitude},
                       {"timescale", c.kernel.timescale},
                       {"defined", c.kernel.defined}};
    else
        s["kernel_error"] = c.kernel_error;
    rep.summary["twod"] = std::move(s);
}

inline void stage_residual(Context& ctx, ProtocolReport& rep) {
    OrthoResidual orth = orthogonal_residual(ctx.psi, ctx.log_vix);
    std::vector<Quadrant> labels = quadrant_labels(ctx.log_vix, orth.residual);
    std::vector<QuadrantTest> tests = horizon_test(labels, ctx.log_vix, ctx.cfg.horizons);
    ReportTable t;
    t.name = "residual_state";
    t.header = {"horizon", "n_q2", "n_q3", "mean_dlog_q2", "mean_dlog_q3", "mw_p",
                "rank_biserial", "exact"};
    for (const auto& q : tests)
        t.rows.push_back({std::to_string(q.horizon), std::to_string(q.n_q2), std::to_string(q.n_q3),
                          cell(q.mean_q2), cell(q.mean_q3), cell(q.mw_p), cell(q.rank_biserial),
                          q.exact ? "true" : "false"});
    rep.tables.push_back(std::move(t));
    long counts[4] = {0, 0, 0, 0};
    for (Quadrant q : labels) counts[static_cast<int>(q)]++;
    rep.summary["residual"] = {{"slope", orth.b},
                               {"intercept", orth.a},
                               {"n_q1", counts[0]},
                               {"n_q2", counts[1]},
                               {"n_q3", counts[2]},
                               {"n_q4", counts[3]}};
}

}  // namespace detail_proto

inline ProtocolReport run_protocol(const ProtocolConfig& cfg) {
    using namespace detail_proto;
    ProtocolReport rep;
    Context ctx(cfg);

    std::string observables_error;
    try {
        build_observables(ctx);
    } catch (const std::exception& e) {
        observables_error = e.what();
    }

    using StageFn = void (*)(Context&, ProtocolReport&);
    const std::vector<std::pair<std::string, StageFn>> stages = {
        {"observables", &stage_observables}, {"models", &stage_models},
        {"placebo", &stage_placebo},         {"granger", &stage_granger},
        {"decompose", &stage_decompose},     {"diagnostics", &stage_diagnostics},
        {"sweep", &stage_sweep},             {"disjoint", &stage_disjoint},
        {"oos", &stage_oos},                 {"twod", &stage_twod},
        {"residual", &stage_residual}};

    for (const auto& [name, fn] : stages) {
        StageRecord rec;
        rec.name = name;
        rec.enabled = cfg.stage_enabled(name);
        if (rec.enabled) {
            if (!observables_error.empty()) {
                rec.ok = false;
                rec.error = "skipped: observable construction failed: " + observables_error;
            } else {
                try {
                    fn(ctx, rep);
                    rec.ok = true;
                } catch (const std::exception& e) {
                    rec.ok = false;
                    rec.error = e.what();
                }
            }
        }
        rep.stages.push_back(std::move(rec));
    }

    nlohmann::json stage_json = nlohmann::json::array();
    for (const auto& s : rep.stages)
        stage_json.push_back({{"name", s.name}, {"enabled", s.enabled}, {"ok", s.ok}, {"error", s.error}});
    rep.manifest["version"] = kVersion;
    rep.manifest["seed"] = cfg.seed;
    rep.manifest["config"] = cfg.raw;
    rep.manifest["config_hash"] = config_hash(cfg.raw);
    rep.manifest["stages"] = std::move(stage_json);
    nlohmann::json table_names = nlohmann::json::array();
    for (const auto& t : rep.tables) table_names.push_back(t.name);
    rep.manifest["tables"] = std::move(table_names);
    return rep;
}

// One CSV per table, a summary document, and the manifest. File contents are
// deterministic functions of the report.
inline void emit(const ProtocolReport& rep, const std::string& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw std::runtime_error("emit: cannot create directory " + directory);
    for (const auto& t : rep.tables)
        write_csv(directory + "/" + t.name + ".csv", t.header, t.rows);
    {
        std::ofstream out(directory + "/summary.json");
        if (!out) throw std::runtime_error("emit: cannot write summary.json");
        out << rep.summary.dump(2) << '\n';
    }
    {
        std::ofstream out(directory + "/manifest.json");
        if (!out) throw std::runtime_error("emit: cannot write manifest.json");
        out << rep.manifest.dump(2) << '\n';
    }
}

}  // namespace fieldattr
