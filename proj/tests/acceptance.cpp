// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. `acceptance N` runs criterion N only.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "opcred/capital.hpp"
#include "opcred/errors.hpp"
#include "opcred/frequency.hpp"
#include "opcred/report.hpp"
#include "opcred/severity.hpp"
#include "opcred/synth.hpp"
#include "support.hpp"

using namespace opcred;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Largest absolute deviation of `got` from the expected row.
template <typename Get>
double worst_row_error(const std::vector<SeverityCellEstimate>& cells, const std::array<double, 10>& row, Get get) {
    if (cells.size() != row.size()) return INFINITY;
    double worst = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) worst = std::max(worst, std::abs(get(cells[j]) - row[j]));
    return worst;
}

Outcome table1_mle() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = fit_bank_severity(testing::table1_panel(), "bank1");
    const double err = worst_row_error(fit.cells, testing::kTable1Mle, [](const auto& c) { return *c.mle; });
    const double t = elapsed_s(t0);
    return {err <= 0.005 && t < 1.0, fmt("max |MLE - table| = %.4f (tol 0.005), %.3f s", err, t)};
}

Outcome bank_structural() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = fit_bank_severity(testing::table1_panel(), "bank1");
    const double t = elapsed_s(t0);
    double worst_weight = 0.0;
    for (const auto& c : fit.cells) worst_weight = std::max(worst_weight, std::abs(c.weight - 0.446));
    const bool ok = std::abs(fit.bank.profile - 3.157) <= 0.005 && std::abs(fit.bank.between_variance - 1.116) <= 0.005 &&
                    worst_weight <= 0.002 && fit.cells.size() == 10 && t < 1.0;
    return {ok, fmt("profile %.4f, between variance %.4f, max |weight - 0.446| = %.4f, %.3f s", fit.bank.profile,
                    fit.bank.between_variance, worst_weight, t)};
}

Outcome industry_adjustment() {
    const auto fit = fit_severity_with_profile(testing::table1_panel(), industry_profile_injection(5.0, 0.9));
    const auto& bank = fit.banks.at(0);
    const double err =
        worst_row_error(bank.cells, testing::kTable1IndustryRow, [](const auto& c) { return c.credibility; });
    const bool ok = std::abs(bank.bank.bank_weight - 0.782) <= 0.002 &&
                    std::abs(bank.bank.credibility_profile - 3.558) <= 0.005 && err <= 0.005;
    return {ok, fmt("bank weight %.4f, profile %.4f, max row error %.4f", bank.bank.bank_weight,
                    bank.bank.credibility_profile, err)};
}

Outcome bank_credibility_row() {
    const auto fit = fit_bank_severity(testing::table1_panel(), "bank1");
    const double err =
        worst_row_error(fit.cells, testing::kTable1BankRow, [](const auto& c) { return c.bank_credibility; });
    return {err <= 0.005, fmt("max row error %.4f (tol 0.005)", err)};
}

Outcome estimator_quality() {
    const auto t0 = std::chrono::steady_clock::now();
    // Banks whose between-cell variance sits close to zero converge slowly
    // (a few thousand iterations on some seeds), beyond the default budget.
    FixedPointSettings solver;
    solver.max_iterations = 100000;
    FrequencyOptions freq_options;
    freq_options.solver = solver;
    double sev_cred = 0, sev_mle = 0, sev_unbiased = 0, freq_cred = 0, freq_mle = 0;
    std::size_t cells = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        SynthSpec spec;
        spec.banks = 3;
        spec.cells = 10;
        spec.years = 10;
        spec.losses_per_cell = 10;
        spec.severity = {2.5, 0.25, 0.5};
        spec.frequency = {2.0, 0.25, 0.5};
        spec.seed = seed;
        const auto data = synthesize(spec);
        const auto sev = fit_industry_severity(data.loss_panel(), solver);
        const auto freq = fit_industry_frequency(data.count_panel(), freq_options);
        for (const auto& c : sev.all_cells()) {
            const double truth = data.truth.cells.at(c.key).severity_profile;
            sev_cred += std::pow(c.credibility - truth, 2);
            sev_mle += std::pow(*c.raw_mle - truth, 2);
            sev_unbiased += std::pow(*c.mle - truth, 2);
            ++cells;
        }
        for (const auto& c : freq.all_cells()) {
            const double truth = data.truth.cells.at(c.key).frequency_profile;
            freq_cred += std::pow(c.credibility - truth, 2);
            freq_mle += std::pow(c.mle - truth, 2);
        }
    }
    const double n = static_cast<double>(cells);
    const double t = elapsed_s(t0);
    const bool ok = cells == 200 * 30 && sev_cred < sev_mle && sev_cred < sev_unbiased && freq_cred < freq_mle && t < 120;
    return {ok, fmt("tail MSE %.4f vs MLE %.4f (unbiased %.4f); rate MSE %.4f vs MLE %.4f; %.1f s", sev_cred / n,
                    sev_mle / n, sev_unbiased / n, freq_cred / n, freq_mle / n, t)};
}

Outcome unbiasedness() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int reps = 10000;
    constexpr int k = 10;
    constexpr double profile = 2.0;
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> est(reps);
    std::vector<double> losses(k);
    for (auto& e : est) {
        for (auto& x : losses) x = std::pow(1.0 - unit(rng), -1.0 / profile);
        e = pareto_mle(losses, 1.0, 1.0).unbiased;
    }
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= reps;
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    var /= reps - 1;
    const double se = std::sqrt(var / reps);
    const double target_var = profile * profile / (k - 2);
    const double t = elapsed_s(t0);
    const bool ok = std::abs(mean - profile) <= 3 * se && std::abs(var / target_var - 1.0) <= 0.10 && t < 10;
    return {ok, fmt("mean %.4f (se %.4f), variance %.4f vs %.4f, %.2f s", mean, se, var, target_var, t)};
}

double max_relative_change(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(a[i]));
    return worst;
}

Outcome scale_invariance() {
    constexpr double factor = 7.0;
    const auto base = testing::table1_panel();
    CellConfigSet scaled_sev;
    for (auto c : base.configs().all()) {
        c.severity_scale *= factor;
        scaled_sev.insert(c);
    }
    std::vector<double> tails, tails_scaled;
    for (const auto& c : fit_bank_severity(base, "bank1").cells) tails.push_back(c.tail_parameter);
    for (const auto& c : fit_bank_severity(LossPanel::from_records(base.records(), scaled_sev), "bank1").cells)
        tails_scaled.push_back(c.tail_parameter);

    const auto dir = testing::data_dir() / "fixtures" / "frequency10";
    const auto counts = load_counts(dir / "counts.csv", load_cell_configs(dir / "config.json"));
    CellConfigSet scaled_freq;
    for (auto c : counts.configs().all()) {
        c.frequency_scale *= factor;
        scaled_freq.insert(c);
    }
    std::vector<double> rates, rates_scaled;
    for (const auto& c : fit_bank_frequency(counts, "bank1").cells) rates.push_back(c.arrival_rate);
    for (const auto& c : fit_bank_frequency(CountPanel::from_records(counts.records(), scaled_freq), "bank1").cells)
        rates_scaled.push_back(c.arrival_rate);

    const double sev = max_relative_change(tails, tails_scaled);
    const double freq = max_relative_change(rates, rates_scaled);
    return {sev <= 1e-10 && freq <= 1e-10, fmt("max relative change: tail %.2e, rate %.2e", sev, freq)};
}

std::string capital_report(const std::vector<CellLossModel>& models, const CapitalConfig& config) {
    const auto result = run_capital(models, config);
    const RunManifest manifest{"capital", {}, {{"paths", config.paths}, {"seed", config.seed}}};
    return make_report(manifest, "capital", to_json(result), result.warnings).dump(2);
}

Outcome var_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<CellLossModel> models{CellLossModel({"bank1", "cell1"}, 0.1, 2.0, 1.0)};
    const double asymptote = 1.0 * std::pow(0.1 / (1.0 - 0.999), 1.0 / 2.0);
    CapitalConfig config;
    config.paths = 10'000'000;
    config.seed = 11;
    const auto first = run_capital(models, config).bank.quantiles.at(0);
    CapitalConfig second_config = config;
    second_config.seed = 2027;
    const auto second = run_capital(models, second_config).bank.quantiles.at(0);
    const bool within = std::abs(first.estimate / asymptote - 1.0) <= 0.10 &&
                        std::abs(second.estimate / asymptote - 1.0) <= 0.10;
    // the two runs must agree within their order-statistic bands
    const bool agree = first.lower <= second.upper && second.lower <= first.upper;
    const bool identical = capital_report(models, config) == capital_report(models, config);
    const double t = elapsed_s(t0);
    return {within && agree && identical && t < 120,
            fmt("VaR %.4f [%.4f, %.4f], second run %.4f [%.4f, %.4f], asymptote %.1f, reports %s, %.1f s",
                first.estimate, first.lower, first.upper, second.estimate, second.lower, second.upper, asymptote,
                identical ? "byte-identical" : "DIFFER", t)};
}

Outcome degenerate_branches() {
    const auto fixtures = testing::data_dir() / "fixtures";
    const auto ldir = fixtures / "identical_losses";
    const auto sev = fit_bank_severity(load_losses(ldir / "losses.csv", load_cell_configs(ldir / "config.json")), "bank1");
    double wsum = 0.0, wmean = 0.0;
    for (const auto& c : sev.cells) {
        const double w = static_cast<double>(c.observations) - 2.0;
        wmean += w * *c.mle;
        wsum += w;
    }
    wmean /= wsum;
    bool sev_ok = sev.bank.degenerate && sev.bank.between_variance == 0.0 && sev.bank.profile == wmean;
    for (const auto& c : sev.cells) sev_ok = sev_ok && c.weight == 0.0 && c.credibility == wmean;

    const auto cdir = fixtures / "identical_counts";
    const auto freq =
        fit_bank_frequency(load_counts(cdir / "counts.csv", load_cell_configs(cdir / "config.json")), "bank1");
    double vsum = 0.0, vmean = 0.0;
    for (const auto& c : freq.cells) {
        vmean += c.volume * c.mle;
        vsum += c.volume;
    }
    vmean /= vsum;
    bool freq_ok = freq.bank.degenerate && freq.bank.between_variance == 0.0 && freq.bank.profile == vmean;
    for (const auto& c : freq.cells) freq_ok = freq_ok && c.weight == 0.0 && c.credibility == vmean;

    return {sev_ok && freq_ok, fmt("tail profile %.17g (expected %.17g), rate profile %.17g (expected %.17g)",
                                   sev.bank.profile, wmean, freq.bank.profile, vmean)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"reference bank MLE row", table1_mle},
        {"bank structural fit", bank_structural},
        {"industry adjustment", industry_adjustment},
        {"bank credibility row", bank_credibility_row},
        {"estimator quality on synthetic panels", estimator_quality},
        {"unbiasedness and variance of the tail MLE", unbiasedness},
        {"scale invariance", scale_invariance},
        {"Monte Carlo VaR sanity and determinism", var_sanity},
        {"degenerate branches", degenerate_branches},
    };

    std::size_t only = 0;
    if (argc > 1) {
        only = std::stoul(argv[1]);
        if (only < 1 || only > criteria.size()) {
            std::fprintf(stderr, "criterion must be 1..%zu\n", criteria.size());
            return 2;
        }
    }

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && only != i + 1) continue;
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %zu (%s): %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    out.detail.c_str());
        std::fflush(stdout);
        failures += out.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
