// opcred: credibility fits, expert calibration, capital simulation and
// synthetic data for operational-risk loss panels.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opcred/calibration.hpp"
#include "opcred/capital.hpp"
#include "opcred/errors.hpp"
#include "opcred/frequency.hpp"
#include "opcred/report.hpp"
#include "opcred/severity.hpp"
#include "opcred/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opcred;

namespace {

enum ExitCode { kOk = 0, kInvalid = 1, kNoConvergence = 2, kIo = 3 };

struct Common {
    std::string out = ".";
};

struct Solver {
    double tol = FixedPointSettings{}.tolerance;
    int max_iter = FixedPointSettings{}.max_iterations;

    FixedPointSettings settings() const {
        FixedPointSettings s{tol, max_iter};
        validate(s);
        return s;
    }
    json to_json() const { return {{"tolerance", tol}, {"max_iterations", max_iter}}; }
};

void add_solver_flags(CLI::App* cmd, Solver& solver) {
    cmd->add_option("--tol", solver.tol, "Fixed-point tolerance")->capture_default_str();
    cmd->add_option("--max-iter", solver.max_iter, "Fixed-point iteration budget")->capture_default_str();
}

void add_out_flag(CLI::App* cmd, Common& common) {
    cmd->add_option("--out", common.out, "Output directory")->capture_default_str();
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

void emit_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

json config_json(const CellConfigSet& configs) {
    json out = json::array();
    for (const auto& c : configs.all())
        out.push_back({{"bank_id", c.key.bank_id},
                       {"cell_id", c.key.cell_id},
                       {"threshold", c.threshold},
                       {"severity_scale", c.severity_scale},
                       {"frequency_scale", c.frequency_scale}});
    return out;
}

void write_reports(const fs::path& dir, const std::string& stem, const json& doc, const std::string& text) {
    write_json(dir / (stem + ".json"), doc);
    write_text_file(dir / (stem + ".txt"), text);
    std::cout << text;
}

// fit-severity ---------------------------------------------------------------

struct SeverityArgs {
    Common common;
    Solver solver;
    std::string losses;
    std::string config;
    std::optional<double> industry_profile;
    std::optional<double> industry_var;
};

int run_fit_severity(const SeverityArgs& a) {
    const auto configs = load_cell_configs(a.config);
    const auto panel = load_losses(a.losses, configs);
    const auto settings = a.solver.settings();
    const auto validation = validate_panel(panel);

    SeverityFit fit;
    std::string mode;
    if (a.industry_profile) {
        fit = fit_severity_with_profile(panel, industry_profile_injection(*a.industry_profile, *a.industry_var),
                                        settings);
        mode = "injected-industry";
    } else if (panel.banks().size() >= 2) {
        fit = fit_industry_severity(panel, settings);
        mode = "industry";
    } else {
        fit = fit_banks_severity(panel, settings);
        mode = "bank";
    }

    json resolved{{"mode", mode}, {"solver", a.solver.to_json()}, {"cells", config_json(configs)}};
    if (a.industry_profile)
        resolved["industry"] = {{"collective", *a.industry_profile}, {"collective_variance", *a.industry_var}};
    const RunManifest manifest{"fit-severity", {{"losses", a.losses}, {"config", a.config}}, resolved};

    auto warnings = validation.issues;
    for (const auto& b : fit.banks) {
        if (b.bank.degenerate)
            warnings.push_back("bank " + b.bank.bank_id +
                               ": between-cell variance truncated to 0, credibility weights set to 0");
        if (b.bank.excluded)
            warnings.push_back("bank " + b.bank.bank_id +
                               ": fewer than 2 qualified cells, shrunk fully to the industry collective");
    }
    if (fit.industry && fit.industry->truncated)
        warnings.push_back("industry: between-bank variance is 0, bank weights set to 0");
    emit_warnings(warnings);

    auto result = to_json(fit);
    result["validation"] = to_json(validation);
    write_reports(prepare_out(a.common.out), "severity", make_report(manifest, "severity", result, warnings),
                  format_text(fit));
    return kOk;
}

// fit-frequency --------------------------------------------------------------

struct FrequencyArgs {
    Common common;
    Solver solver;
    std::string counts;
    std::string config;
    std::optional<double> industry_rate;
    std::optional<double> industry_var;
    bool allow_mixed = false;
};

int run_fit_frequency(const FrequencyArgs& a) {
    const auto configs = load_cell_configs(a.config);
    const auto panel = load_counts(a.counts, configs);
    FrequencyOptions options;
    options.solver = a.solver.settings();
    options.allow_mixed_thresholds = a.allow_mixed;
    const auto validation = validate_panel(panel);

    FrequencyFit fit;
    std::string mode;
    if (a.industry_rate) {
        fit = fit_frequency_with_profile(panel, industry_rate_injection(*a.industry_rate, *a.industry_var), options);
        mode = "injected-industry";
    } else if (panel.banks().size() >= 2) {
        fit = fit_industry_frequency(panel, options);
        mode = "industry";
    } else {
        fit = fit_banks_frequency(panel, options);
        mode = "bank";
    }

    json resolved{{"mode", mode},
                  {"solver", a.solver.to_json()},
                  {"allow_mixed_thresholds", a.allow_mixed},
                  {"cells", config_json(configs)}};
    if (a.industry_rate)
        resolved["industry"] = {{"collective", *a.industry_rate}, {"collective_variance", *a.industry_var}};
    const RunManifest manifest{"fit-frequency", {{"counts", a.counts}, {"config", a.config}}, resolved};

    auto warnings = validation.issues;
    for (const auto& b : fit.banks) {
        if (b.bank.degenerate)
            warnings.push_back("bank " + b.bank.bank_id +
                               ": between-cell variance truncated to 0, credibility weights set to 0");
        if (b.bank.excluded)
            warnings.push_back("bank " + b.bank.bank_id +
                               ": fewer than 2 cells with counts, shrunk fully to the industry collective");
        if (fit.industry && b.bank.bank_weight == 0.0 && !b.bank.excluded)
            warnings.push_back("bank " + b.bank.bank_id + ": bank weight is 0, profile set to the collective");
    }
    emit_warnings(warnings);

    auto result = to_json(fit);
    result["validation"] = to_json(validation);
    write_reports(prepare_out(a.common.out), "frequency", make_report(manifest, "frequency", result, warnings),
                  format_text(fit));
    return kOk;
}

// capital --------------------------------------------------------------------

struct CapitalArgs {
    Common common;
    std::string severity;
    std::string frequency;
    std::string hf;
    std::string bank;
    std::string sample_out;
    std::uint64_t paths = CapitalConfig{}.paths;
    std::uint64_t seed = CapitalConfig{}.seed;
    std::vector<double> quantiles;
    unsigned threads = 0;
    bool allow_threshold_mismatch = false;
    bool allow_cell_mismatch = false;
};

// JSON array of {bank_id, cell_id, rate, mu, sigma}; the lognormal is
// truncated at the cell's threshold.
std::map<CellKey, HighFrequencyModel> load_hf(const std::string& path, const SeverityFit& severity) {
    std::map<CellKey, double> thresholds;
    for (const auto& c : severity.all_cells()) thresholds[c.key] = c.threshold;
    const auto doc = read_json(path);
    if (!doc.is_array()) throw ParseError(path + ": high-frequency config must be a JSON array");
    std::map<CellKey, HighFrequencyModel> out;
    for (const auto& item : doc) {
        try {
            const CellKey key{item.at("bank_id").get<std::string>(), item.at("cell_id").get<std::string>()};
            const auto t = thresholds.find(key);
            if (t == thresholds.end()) throw ConfigError(path + ": no severity fit for " + to_string(key));
            const auto law = std::make_shared<TruncatedLognormal>(item.at("mu").get<double>(),
                                                                  item.at("sigma").get<double>(), t->second);
            if (!out.emplace(key, HighFrequencyModel{item.at("rate").get<double>(), law}).second)
                throw ConfigError(path + ": duplicate entry for " + to_string(key));
        } catch (const json::exception& e) {
            throw ParseError(path + ": bad entry: " + e.what());
        }
    }
    return out;
}

template <typename Fit>
Fit only_bank(Fit fit, const std::string& bank) {
    std::erase_if(fit.banks, [&](const auto& b) { return b.bank.bank_id != bank; });
    return fit;
}

int run_capital_cmd(const CapitalArgs& a) {
    auto severity = severity_fit_from_json(read_json(a.severity));
    auto frequency = frequency_fit_from_json(read_json(a.frequency));

    std::set<std::string> banks;
    for (const auto& b : severity.banks) banks.insert(b.bank.bank_id);
    for (const auto& b : frequency.banks) banks.insert(b.bank.bank_id);
    if (!a.bank.empty()) {
        if (!banks.contains(a.bank)) throw ValidationError("bank " + a.bank + " is not in the fit reports");
        severity = only_bank(std::move(severity), a.bank);
        frequency = only_bank(std::move(frequency), a.bank);
    } else if (banks.size() > 1) {
        throw ValidationError("fit reports cover " + std::to_string(banks.size()) + " banks; choose one with --bank");
    }

    std::map<CellKey, HighFrequencyModel> hf;
    if (!a.hf.empty()) hf = load_hf(a.hf, severity);
    if (!a.bank.empty()) std::erase_if(hf, [&](const auto& kv) { return kv.first.bank_id != a.bank; });
    auto build = build_models_from_fits(severity, frequency, hf, a.allow_threshold_mismatch);
    if (!build.excluded.empty() && !a.allow_cell_mismatch) {
        std::string cells;
        for (const auto& k : build.excluded) cells += (cells.empty() ? "" : ", ") + to_string(k);
        throw ValidationError("fit reports cover different cell sets (" + cells + ")");
    }
    if (build.models.empty()) throw ValidationError("no cell is covered by both fit reports");

    CapitalConfig config;
    config.paths = a.paths;
    config.seed = a.seed;
    if (!a.quantiles.empty()) config.quantiles = a.quantiles;
    config.threads = a.threads;
    config.keep_bank_sample = !a.sample_out.empty();
    validate(config);

    const auto result = run_capital(build.models, config);

    json hf_json = json::array();
    for (const auto& m : build.models)
        if (const auto& h = m.hf_model())
            hf_json.push_back({{"bank_id", m.key().bank_id},
                               {"cell_id", m.key().cell_id},
                               {"rate", h->rate},
                               {"severity", h->severity->describe()}});
    json resolved{{"paths", config.paths},
                  {"seed", config.seed},
                  {"quantiles", config.quantiles},
                  {"bank", a.bank},
                  {"allow_threshold_mismatch", a.allow_threshold_mismatch},
                  {"allow_cell_mismatch", a.allow_cell_mismatch},
                  {"high_frequency", hf_json}};
    RunManifest manifest{"capital", {{"severity", a.severity}, {"frequency", a.frequency}}, resolved};
    if (!a.hf.empty()) manifest.inputs["hf"] = a.hf;
    if (!a.sample_out.empty()) manifest.inputs["sample_out"] = a.sample_out;

    auto warnings = build.warnings;
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    emit_warnings(warnings);

    const auto dir = prepare_out(a.common.out);
    if (!a.sample_out.empty()) write_sample_binary(a.sample_out, result.bank_sample);
    write_reports(dir, "capital", make_report(manifest, "capital", to_json(result), warnings), format_text(result));
    return kOk;
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
    Common common;
    SynthSpec spec;
};

int run_synth(const SynthArgs& a) {
    const auto data = synthesize(a.spec);
    const auto dir = prepare_out(a.common.out);
    write_text_file(dir / "losses.csv", format_loss_csv(data.losses));
    write_text_file(dir / "counts.csv", format_count_csv(data.counts));
    write_cell_configs(dir / "config.json", data.configs);
    const RunManifest manifest{"synth", {}, to_json(a.spec)};
    write_json(dir / "truth.json", make_report(manifest, "truth", to_json(data.truth)));
    std::cout << "wrote " << data.losses.size() << " losses and " << data.counts.size() << " annual counts for "
              << a.spec.banks << " bank(s) x " << a.spec.cells << " cell(s) to " << dir.string() << "\n";
    return kOk;
}

// calibrate ------------------------------------------------------------------

struct CalibrateArgs {
    Common common;
    std::string opinions;
    std::string config;
    double reference_profile = 1.0;
    double reference_rate = 1.0;
};

int run_calibrate(const CalibrateArgs& a) {
    const auto configs = load_cell_configs(a.config);
    const auto opinions = load_opinions(a.opinions);
    std::vector<std::string> warnings;
    if (opinions.empty()) warnings.push_back(a.opinions + ": no opinions, configuration unchanged");
    for (const auto& op : opinions.severity) configs.at(op.key);
    for (const auto& op : opinions.frequency) configs.at(op.key);

    const auto severity = calibrate_severity_scales(opinions.severity, configs, a.reference_profile);
    const auto frequency = calibrate_frequency_scales(opinions.frequency, a.reference_rate);
    const auto updated = apply_scales(configs, severity, frequency);
    emit_warnings(warnings);

    const auto dir = prepare_out(a.common.out);
    write_cell_configs(dir / "config.json", updated);
    json scales = json::array();
    for (const auto& c : updated.all())
        scales.push_back({{"bank_id", c.key.bank_id},
                          {"cell_id", c.key.cell_id},
                          {"severity_scale", c.severity_scale},
                          {"frequency_scale", c.frequency_scale},
                          {"severity_calibrated", severity.contains(c.key)},
                          {"frequency_calibrated", frequency.contains(c.key)}});
    const RunManifest manifest{"calibrate",
                               {{"opinions", a.opinions}, {"config", a.config}},
                               {{"reference_profile", a.reference_profile}, {"reference_rate", a.reference_rate}}};
    write_json(dir / "calibration.json", make_report(manifest, "calibration", {{"cells", scales}}, warnings));
    std::cout << "calibrated " << severity.size() << " severity and " << frequency.size()
              << " frequency scale(s); wrote " << (dir / "config.json").string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Credibility estimation and capital simulation for operational risk"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    std::function<int()> action;

    SeverityArgs sev;
    auto* fs_cmd = app.add_subcommand("fit-severity", "Pareto tail credibility fit");
    fs_cmd->add_option("--losses", sev.losses, "Loss CSV (bank_id,cell_id,amount)")->required();
    fs_cmd->add_option("--config", sev.config, "Cell configuration JSON")->required();
    auto* sev_profile = fs_cmd->add_option("--industry-profile", sev.industry_profile, "Injected industry collective");
    auto* sev_var = fs_cmd->add_option("--industry-var", sev.industry_var, "Injected industry between-bank variance");
    sev_profile->needs(sev_var);
    sev_var->needs(sev_profile);
    add_solver_flags(fs_cmd, sev.solver);
    add_out_flag(fs_cmd, sev.common);
    fs_cmd->callback([&] { action = [&] { return run_fit_severity(sev); }; });

    FrequencyArgs freq;
    auto* ff_cmd = app.add_subcommand("fit-frequency", "Poisson rate credibility fit");
    ff_cmd->add_option("--counts", freq.counts, "Count CSV (bank_id,cell_id,year,count)")->required();
    ff_cmd->add_option("--config", freq.config, "Cell configuration JSON")->required();
    auto* freq_rate = ff_cmd->add_option("--industry-rate", freq.industry_rate, "Injected industry collective rate");
    auto* freq_var = ff_cmd->add_option("--industry-var", freq.industry_var, "Injected industry between-bank variance");
    freq_rate->needs(freq_var);
    freq_var->needs(freq_rate);
    ff_cmd->add_flag("--allow-mixed-thresholds", freq.allow_mixed, "Accept several thresholds within one bank");
    add_solver_flags(ff_cmd, freq.solver);
    add_out_flag(ff_cmd, freq.common);
    ff_cmd->callback([&] { action = [&] { return run_fit_frequency(freq); }; });

    CapitalArgs cap;
    auto* cap_cmd = app.add_subcommand("capital", "Monte Carlo annual loss and VaR");
    cap_cmd->add_option("--severity", cap.severity, "Severity fit report (JSON)")->required();
    cap_cmd->add_option("--frequency", cap.frequency, "Frequency fit report (JSON)")->required();
    cap_cmd->add_option("--hf", cap.hf, "High-frequency (below threshold) config JSON");
    cap_cmd->add_option("--bank", cap.bank, "Bank to simulate when the reports cover several");
    cap_cmd->add_option("--paths", cap.paths, "Number of simulated years")->capture_default_str();
    cap_cmd->add_option("--seed", cap.seed, "Master seed")->capture_default_str();
    cap_cmd->add_option("--quantile", cap.quantiles, "Quantile level, repeatable (default 0.999)");
    cap_cmd->add_option("--threads", cap.threads, "Worker threads (0: all cores); results do not depend on it");
    cap_cmd->add_option("--sample-out", cap.sample_out, "Write the sorted bank sample as little-endian float64");
    cap_cmd->add_flag("--allow-threshold-mismatch", cap.allow_threshold_mismatch,
                      "Use the severity threshold when the fits disagree");
    cap_cmd->add_flag("--allow-cell-mismatch", cap.allow_cell_mismatch,
                      "Drop cells present in only one fit instead of failing");
    add_out_flag(cap_cmd, cap.common);
    cap_cmd->callback([&] { action = [&] { return run_capital_cmd(cap); }; });

    SynthArgs syn;
    auto* syn_cmd = app.add_subcommand("synth", "Synthetic multi-bank dataset with ground truth");
    auto& s = syn.spec;
    syn_cmd->add_option("--banks", s.banks, "Number of banks")->capture_default_str();
    syn_cmd->add_option("--cells", s.cells, "Cells per bank")->capture_default_str();
    syn_cmd->add_option("--years", s.years, "Observed years per cell")->capture_default_str();
    syn_cmd->add_option("--losses-per-cell", s.losses_per_cell, "Losses above threshold per cell")->capture_default_str();
    syn_cmd->add_option("--threshold", s.threshold, "Reporting threshold")->capture_default_str();
    syn_cmd->add_option("--severity-mean", s.severity.mean, "Mean tail profile")->capture_default_str();
    syn_cmd->add_option("--severity-bank-var", s.severity.bank_variance, "Variance of bank tail profiles")->capture_default_str();
    syn_cmd->add_option("--severity-cell-var", s.severity.cell_variance, "Variance of cell tail profiles around their bank")->capture_default_str();
    syn_cmd->add_option("--frequency-mean", s.frequency.mean, "Mean annual rate")->capture_default_str();
    syn_cmd->add_option("--frequency-bank-var", s.frequency.bank_variance, "Variance of bank rates")->capture_default_str();
    syn_cmd->add_option("--frequency-cell-var", s.frequency.cell_variance, "Variance of cell rates around their bank")->capture_default_str();
    syn_cmd->add_option("--seed", s.seed, "Master seed")->capture_default_str();
    add_out_flag(syn_cmd, syn.common);
    syn_cmd->callback([&] { action = [&] { return run_synth(syn); }; });

    CalibrateArgs cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "Scale constants from expert opinions");
    cal_cmd->add_option("--opinions", cal.opinions, "Opinions JSON")->required();
    cal_cmd->add_option("--config", cal.config, "Cell configuration JSON")->required();
    cal_cmd->add_option("--reference-profile", cal.reference_profile)->capture_default_str();
    cal_cmd->add_option("--reference-rate", cal.reference_rate)->capture_default_str();
    add_out_flag(cal_cmd, cal.common);
    cal_cmd->callback([&] { action = [&] { return run_calibrate(cal); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        return action();
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << " (last iterate: collective "
                  << e.last_iterate().params.collective_mean << ", between variance "
                  << e.last_iterate().params.between_variance << "); a larger --max-iter may help\n";
        return kNoConvergence;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
}
