// Command-line front end. Every analysis subcommand is a thin wrapper that
// assembles a one-stage protocol config and runs it, so the CLI and the full
// protocol cannot drift apart. Exit codes: 0 success, 1 stage failure,
// 2 configuration/usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fieldattr/fieldattr.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
    std::string prices;
    std::string vix;
    std::string move;
    std::string ted;
    long window = 60;
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--prices", o.prices, "price panel CSV (date column + one column per ticker)")
        ->required();
    cmd->add_option("--vix", o.vix, "field series CSV (date,close)")->required();
    cmd->add_option("--move", o.move, "optional auxiliary field series CSV");
    cmd->add_option("--ted", o.ted, "optional auxiliary field series CSV");
    cmd->add_option("--window", o.window, "rolling correlation window, trading days");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--out", o.out, "write tables into this directory instead of stdout");
}

void require_file(const std::string& path, const char* what) {
    if (!std::filesystem::exists(path))
        throw fieldattr::ConfigError(std::string(what) + " file does not exist: " + path);
}

void print_report(const fieldattr::ProtocolReport& rep) {
    for (const auto& t : rep.tables) {
        std::cout << "# table: " << t.name << '\n';
        for (std::size_t j = 0; j < t.header.size(); ++j)
            std::cout << (j ? "," : "") << t.header[j];
        std::cout << '\n';
        for (const auto& r : t.rows) {
            for (std::size_t j = 0; j < r.size(); ++j) std::cout << (j ? "," : "") << r[j];
            std::cout << '\n';
        }
        std::cout << '\n';
    }
    std::cout << "# summary\n" << rep.summary.dump(2) << '\n';
}

int finish(const fieldattr::ProtocolReport& rep, const std::string& out_dir) {
    if (!out_dir.empty())
        fieldattr::emit(rep, out_dir);
    else
        print_report(rep);
    bool ok = true;
    for (const auto& s : rep.stages) {
        if (s.enabled && !s.ok) {
            std::cerr << "stage " << s.name << " failed: " << s.error << '\n';
            ok = false;
        }
    }
    return ok ? 0 : 1;
}

int run_stage(const std::string& stage, const CommonOpts& o, json extra) {
    require_file(o.prices, "prices");
    require_file(o.vix, "field");
    json cfg_json = std::move(extra);
    cfg_json["prices"] = o.prices;
    cfg_json["vix"] = o.vix;
    if (!o.move.empty()) {
        require_file(o.move, "field");
        cfg_json["move"] = o.move;
    }
    if (!o.ted.empty()) {
        require_file(o.ted, "field");
        cfg_json["ted"] = o.ted;
    }
    cfg_json["window"] = o.window;
    cfg_json["seed"] = o.seed;
    cfg_json["stages"] = json::array({stage});
    fieldattr::ProtocolConfig cfg = fieldattr::config_from_json(cfg_json);
    fieldattr::ProtocolReport rep = fieldattr::run_protocol(cfg);
    return finish(rep, o.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"field-coupled market-mode analysis"};
    app.require_subcommand(1);

    // --- synth ---------------------------------------------------------
    struct {
        long days = 1600;
        long stocks = 12;
        std::uint64_t seed = 1;
        std::string out_prices = "prices.csv";
        std::string out_vix = "vix.csv";
    } synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic market world");
    synth_cmd->add_option("--days", synth.days, "number of price rows");
    synth_cmd->add_option("--stocks", synth.stocks, "number of stocks");
    synth_cmd->add_option("--seed", synth.seed, "random seed");
    synth_cmd->add_option("--out-prices", synth.out_prices, "output price panel CSV");
    synth_cmd->add_option("--out-vix", synth.out_vix, "output field series CSV");

    // --- single-stage analysis commands ---------------------------------
    std::map<std::string, CommonOpts> opts;
    auto stage_cmd = [&](const char* name, const char* stage, const char* help) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(cmd, opts[stage]);
        return cmd;
    };

    stage_cmd("build", "observables", "build the rolling-eigenvalue observable and align the field");
    stage_cmd("fit", "models", "fit the model hierarchy and print the comparison table");

    struct {
        int count = 100;
        std::string comparison = "one_d";
    } placebo;
    CLI::App* placebo_cmd = stage_cmd("placebo", "placebo", "surrogate placebo gate");
    placebo_cmd->add_option("--count", placebo.count, "number of surrogates");
    placebo_cmd->add_option("--comparison", placebo.comparison, "one_d or two_d")
        ->check(CLI::IsMember({"one_d", "two_d"}));

    struct {
        std::string split_date;
    } decomp;
    CLI::App* decomp_cmd = stage_cmd("decompose", "decompose", "mechanical/informational decomposition grid");
    decomp_cmd->add_option("--split-date", decomp.split_date, "freeze split date for the pre-split recipe");

    struct {
        std::vector<double> band;
        std::string mode = "rolling_median";
        long min_len = 120;
        long draws = 400;
    } diag;
    CLI::App* diag_cmd = stage_cmd("diagnose", "diagnostics", "ACF, quiet-episode, and field-stripped diagnostics");
    diag_cmd->add_option("--band", diag.band, "quiet band on the field level: lo hi")->expected(2);
    diag_cmd->add_option("--quiet-mode", diag.mode, "strict_daily or rolling_median")
        ->check(CLI::IsMember({"strict_daily", "rolling_median"}));
    diag_cmd->add_option("--min-len", diag.min_len, "minimum quiet segment length, days");
    diag_cmd->add_option("--draws", diag.draws, "episode bootstrap draws");

    struct {
        int max_lag = 10;
    } granger;
    CLI::App* granger_cmd = stage_cmd("granger", "granger", "two-direction Granger test on differenced series");
    granger_cmd->add_option("--max-lag", granger.max_lag, "maximum lag order");

    stage_cmd("twod", "twod", "joint 2D linear-system comparison and projected kernel");

    struct {
        std::vector<std::string> splits;
        std::vector<std::string> exclude;
    } oos;
    CLI::App* oos_cmd = stage_cmd("oos", "oos", "anchored chronological holdouts");
    oos_cmd->add_option("--splits", oos.splits, "split dates (YYYY-MM-DD...)");
    oos_cmd->add_option("--exclude", oos.exclude, "excluded date range: start end")->expected(2);

    struct {
        std::vector<long> windows;
    } sweep;
    CLI::App* sweep_cmd = stage_cmd("sweep", "sweep", "window-size robustness sweep from raw returns");
    sweep_cmd->add_option("--windows", sweep.windows, "window sizes, trading days");

    struct {
        std::vector<long> horizons;
    } residual;
    CLI::App* residual_cmd = stage_cmd("residual", "residual", "orthogonal-residual quadrant tests");
    residual_cmd->add_option("--horizons", residual.horizons, "forward horizons, trading days");

    // --- run-all ---------------------------------------------------------
    struct {
        std::string config;
        std::string out;
    } runall;
    CLI::App* runall_cmd = app.add_subcommand("run-all", "run the full protocol from a config file");
    runall_cmd->add_option("--config", runall.config, "JSON config file")->required();
    runall_cmd->add_option("--out", runall.out, "output directory (overrides config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) {
            fieldattr::PlantedWorldParams wp;
            wp.n_days = synth.days;
            wp.n_stocks = synth.stocks;
            fieldattr::PlantedWorld world = fieldattr::planted_world(wp, synth.seed);
            std::vector<std::string> header = {"date"};
            for (const auto& t : world.panel.tickers) header.push_back(t);
            std::vector<std::vector<std::string>> rows;
            for (long t = 0; t < world.prices.cols(); ++t) {
                std::vector<std::string> row = {world.price_dates[static_cast<std::size_t>(t)]};
                for (long i = 0; i < world.prices.rows(); ++i)
                    row.push_back(fieldattr::fmt_g(world.prices(i, t)));
                rows.push_back(std::move(row));
            }
            fieldattr::write_csv(synth.out_prices, header, rows);
            fieldattr::write_series_csv(synth.out_vix, world.vix);
            std::cout << "wrote " << synth.out_prices << " (" << world.prices.cols() << " days, "
                      << world.prices.rows() << " stocks) and " << synth.out_vix << '\n';
            return 0;
        }
        if (runall_cmd->parsed()) {
            fieldattr::ProtocolConfig cfg = fieldattr::load_protocol_config(runall.config);
            require_file(cfg.prices, "prices");
            require_file(cfg.vix, "field");
            if (!cfg.move.empty()) require_file(cfg.move, "field");
            if (!cfg.ted.empty()) require_file(cfg.ted, "field");
            fieldattr::ProtocolReport rep = fieldattr::run_protocol(cfg);
            std::string out_dir = runall.out.empty() ? cfg.output : runall.out;
            fieldattr::emit(rep, out_dir);
            for (const auto& s : rep.stages) {
                if (!s.enabled) continue;
                std::cout << s.name << ": " << (s.ok ? "ok" : "FAILED") << '\n';
                if (!s.ok) std::cerr << "stage " << s.name << " failed: " << s.error << '\n';
            }
            std::cout << "report written to " << out_dir << '\n';
            return rep.all_ok() ? 0 : 1;
        }

        if (app.got_subcommand("build")) return run_stage("observables", opts["observables"], {});
        if (app.got_subcommand("fit")) return run_stage("models", opts["models"], {});
        if (placebo_cmd->parsed()) {
            json extra;
            extra["placebo_count"] = placebo.count;
            extra["placebo_comparison"] = placebo.comparison;
            return run_stage("placebo", opts["placebo"], std::move(extra));
        }
        if (decomp_cmd->parsed()) {
            json extra;
            if (!decomp.split_date.empty()) extra["decomp_split_date"] = decomp.split_date;
            return run_stage("decompose", opts["decompose"], std::move(extra));
        }
        if (diag_cmd->parsed()) {
            json extra;
            if (!diag.band.empty()) extra["quiet_band"] = diag.band;
            extra["quiet_mode"] = diag.mode;
            extra["quiet_min_len"] = diag.min_len;
            extra["bootstrap_draws"] = diag.draws;
            return run_stage("diagnostics", opts["diagnostics"], std::move(extra));
        }
        if (granger_cmd->parsed()) {
            json extra;
            extra["max_lag"] = granger.max_lag;
            return run_stage("granger", opts["granger"], std::move(extra));
        }
        if (app.got_subcommand("twod")) return run_stage("twod", opts["twod"], {});
        if (oos_cmd->parsed()) {
            json extra;
            if (!oos.splits.empty()) extra["split_dates"] = oos.splits;
            if (!oos.exclude.empty()) extra["exclusion"] = oos.exclude;
            return run_stage("oos", opts["oos"], std::move(extra));
        }
        if (sweep_cmd->parsed()) {
            json extra;
            if (!sweep.windows.empty()) extra["windows"] = sweep.windows;
            return run_stage("sweep", opts["sweep"], std::move(extra));
        }
        if (residual_cmd->parsed()) {
            json extra;
            if (!residual.horizons.empty()) extra["horizons"] = residual.horizons;
            return run_stage("residual", opts["residual"], std::move(extra));
        }
        std::cerr << "no subcommand dispatched\n";
        return 2;
    } catch (const fieldattr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
