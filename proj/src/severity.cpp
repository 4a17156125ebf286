#include "opcred/severity.hpp"

#include <cmath>

namespace opcred {

namespace {

/// Cells of one bank with their MLEs; the structural fit fills in the rest.
std::vector<SeverityCellEstimate> collect_cells(const LossPanel& panel, const std::string& bank_id) {
    std::vector<SeverityCellEstimate> cells;
    for (const auto& config : panel.configs().cells_of(bank_id)) {
        SeverityCellEstimate cell;
        cell.key = config.key;
        cell.threshold = config.threshold;
        cell.severity_scale = config.severity_scale;
        const auto losses = panel.losses(config.key);
        cell.observations = losses.size();
        if (cell.observations >= 2) {
            try {
                const auto mle = pareto_mle(losses, config.threshold, config.severity_scale);
                cell.raw_mle = mle.raw;
                cell.mle = mle.unbiased;
            } catch (const DegenerateError&) {
                // every loss sits on the threshold; no finite estimate
            }
        }
        cell.excluded = !(cell.mle && cell.observations >= kMinSeverityObservations);
        cells.push_back(cell);
    }
    return cells;
}

void finish_cells(SeverityBankFit& fit, double final_profile) {
    for (auto& cell : fit.cells) {
        cell.credibility = cell.excluded ? final_profile : credibility_combine(*cell.mle, final_profile, cell.weight);
        cell.tail_parameter = cell.severity_scale * cell.credibility;
    }
}

SeverityBankFit excluded_bank(const LossPanel& panel, const std::string& bank_id) {
    SeverityBankFit fit;
    fit.bank.bank_id = bank_id;
    fit.bank.excluded = true;
    fit.cells = collect_cells(panel, bank_id);
    for (auto& cell : fit.cells) {
        cell.excluded = true;
        cell.weight = 0.0;
        if (cell.mle && cell.observations >= kMinSeverityObservations) ++fit.bank.qualified_cells;
    }
    return fit;
}

}  // namespace

ParetoMle pareto_mle(std::span<const double> losses, double threshold, double scale) {
    if (!(threshold > 0.0)) throw DomainError("Pareto threshold must be > 0");
    if (!(scale > 0.0)) throw DomainError("severity scale must be > 0");
    if (losses.size() < 2) throw InsufficientDataError("Pareto MLE needs at least 2 losses");
    double log_sum = 0.0;
    for (double x : losses) {
        if (!(x >= threshold)) throw DomainError("loss below threshold in Pareto MLE");
        log_sum += std::log(x / threshold);
    }
    if (!(log_sum > 0.0)) throw DegenerateError("all losses equal the threshold; Pareto MLE is infinite");
    const double k = static_cast<double>(losses.size());
    const double raw = 1.0 / (scale / k * log_sum);
    return {raw, (k - 1.0) / k * raw};
}

CredibilityWeight severity_weight(std::size_t observations, double profile, double between_sd) {
    if (observations < kMinSeverityObservations) return {0.0, true};
    if (!(between_sd > 0.0)) return {0.0, false};
    const double k = static_cast<double>(observations);
    const double ratio = profile / between_sd;
    return {(k - 2.0) / (k - 1.0 + ratio * ratio), false};
}

std::vector<SeverityCellEstimate> SeverityFit::all_cells() const {
    std::vector<SeverityCellEstimate> out;
    for (const auto& b : banks) out.insert(out.end(), b.cells.begin(), b.cells.end());
    return out;
}

SeverityBankFit fit_bank_severity(const LossPanel& panel, const std::string& bank_id,
                                  const FixedPointSettings& settings) {
    validate(settings);
    SeverityBankFit fit;
    fit.bank.bank_id = bank_id;
    fit.cells = collect_cells(panel, bank_id);

    std::vector<double> values;
    std::vector<double> ks;
    std::vector<WeightedObservation> volumes;
    for (const auto& cell : fit.cells) {
        if (cell.excluded) continue;
        values.push_back(*cell.mle);
        ks.push_back(static_cast<double>(cell.observations));
        volumes.push_back({*cell.mle, static_cast<double>(cell.observations) - 2.0});
    }
    const std::size_t j_count = values.size();
    fit.bank.qualified_cells = j_count;
    if (j_count < 2)
        throw InsufficientDataError("bank " + bank_id + " has " + std::to_string(j_count) +
                                    " cells with at least 3 losses; severity credibility needs 2");
    const double jm1 = static_cast<double>(j_count) - 1.0;

    // Raw volumes K - 2 in place of the credibility weights.
    const double volume_mean = weighted_mean(volumes);
    double volume_dispersion = 0.0;
    for (const auto& v : volumes) volume_dispersion += v.weight * (v.value - volume_mean) * (v.value - volume_mean);
    volume_dispersion /= jm1;

    const auto fallback = [&] {
        fit.bank.degenerate = true;
        fit.bank.profile = volume_mean;
        fit.bank.between_variance = 0.0;
        fit.bank.total_weight = 0.0;
        for (auto& cell : fit.cells) {
            cell.weight = 0.0;
            cell.bank_credibility = volume_mean;
        }
    };

    // Zero between variance is a stable fixed point of the structural
    // equations whenever the volume-weighted dispersion does not exceed the
    // within-cell noise profile^2 / (K - 2); no positive solution exists then.
    if (!(volume_dispersion > volume_mean * volume_mean)) {
        fallback();
    } else {
        // Iterate in units of the starting mean so the stopping rule does not
        // depend on the scale constants.
        const double unit = volume_mean;
        std::vector<double> scaled(values);
        for (auto& v : scaled) v /= unit;
        const StructuralUpdate update = [&](const StructuralParams& p) -> StructuralParams {
            if (!(p.between_variance > 0.0)) return {1.0, 1.0, 0.0};
            const double ratio2 = p.collective_mean * p.collective_mean / p.between_variance;
            double w_sum = 0.0;
            double num = 0.0;
            std::vector<double> alpha(j_count);
            for (std::size_t j = 0; j < j_count; ++j) {
                alpha[j] = (ks[j] - 2.0) / (ks[j] - 1.0 + ratio2);
                w_sum += alpha[j];
                num += alpha[j] * scaled[j];
            }
            const double mean = num / w_sum;
            double tau2 = 0.0;
            for (std::size_t j = 0; j < j_count; ++j) tau2 += alpha[j] * (scaled[j] - mean) * (scaled[j] - mean);
            tau2 /= jm1;
            return {mean, mean * mean, tau2};
        };
        const auto to_data_units = [unit](FixedPointResult r) {
            r.params.collective_mean *= unit;
            r.params.within_variance *= unit * unit;
            r.params.between_variance *= unit * unit;
            return r;
        };
        FixedPointResult solved;
        try {
            solved = to_data_units(
                solve_fixed_point(update, {1.0, 1.0, volume_dispersion / (unit * unit)}, settings));
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("severity structural fit for bank " + bank_id + " did not converge",
                                   to_data_units(e.last_iterate()));
        }
        fit.bank.iterations = solved.iterations;
        const auto tau2 = truncate_nonnegative(solved.params.between_variance);
        if (tau2.truncated) {
            fallback();
        } else {
            fit.bank.between_variance = tau2.value;
            const double between_sd = std::sqrt(tau2.value);
            double num = 0.0;
            for (auto& cell : fit.cells) {
                if (cell.excluded) continue;
                cell.weight = severity_weight(cell.observations, solved.params.collective_mean, between_sd).value;
                fit.bank.total_weight += cell.weight;
                num += cell.weight * *cell.mle;
            }
            fit.bank.profile = num / fit.bank.total_weight;
            for (auto& cell : fit.cells)
                cell.bank_credibility =
                    cell.excluded ? fit.bank.profile : credibility_combine(*cell.mle, fit.bank.profile, cell.weight);
        }
    }
    for (auto& cell : fit.cells)
        if (cell.excluded) cell.weight = 0.0;

    fit.bank.bank_weight = 1.0;
    fit.bank.credibility_profile = fit.bank.profile;
    finish_cells(fit, fit.bank.profile);
    return fit;
}

SeverityIndustryProfile industry_profile_injection(double collective, double collective_variance) {
    return inject_industry_profile(collective, collective_variance);
}

SeverityBankFit apply_industry_profile(SeverityBankFit fit, const SeverityIndustryProfile& industry) {
    auto& bank = fit.bank;
    if (bank.excluded) {
        bank.bank_weight = 0.0;
        bank.credibility_profile = industry.collective;
        bank.profile = industry.collective;
    } else {
        bank.bank_weight =
            bank_credibility_weight(bank.total_weight, bank.between_variance, industry.collective_variance);
        bank.credibility_profile = credibility_combine(bank.profile, industry.collective, bank.bank_weight);
    }
    for (auto& cell : fit.cells)
        if (bank.excluded) cell.bank_credibility = bank.credibility_profile;
    finish_cells(fit, bank.credibility_profile);
    return fit;
}

SeverityFit fit_banks_severity(const LossPanel& panel, const FixedPointSettings& settings) {
    SeverityFit out;
    for (const auto& bank : panel.banks()) out.banks.push_back(fit_bank_severity(panel, bank, settings));
    return out;
}

SeverityFit fit_severity_with_profile(const LossPanel& panel, const SeverityIndustryProfile& industry,
                                      const FixedPointSettings& settings) {
    SeverityFit out;
    out.industry = industry;
    for (const auto& bank : panel.banks()) {
        SeverityBankFit fit;
        try {
            fit = fit_bank_severity(panel, bank, settings);
        } catch (const InsufficientDataError&) {
            fit = excluded_bank(panel, bank);
        }
        out.banks.push_back(apply_industry_profile(std::move(fit), industry));
    }
    return out;
}

SeverityFit fit_industry_severity(const LossPanel& panel, const FixedPointSettings& settings) {
    const auto bank_ids = panel.banks();
    if (bank_ids.size() < 2) throw InsufficientDataError("industry severity fit needs at least 2 banks");

    std::vector<SeverityBankFit> fits;
    std::vector<BankAggregate> aggregates;
    for (const auto& bank : bank_ids) {
        try {
            fits.push_back(fit_bank_severity(panel, bank, settings));
            const auto& b = fits.back().bank;
            aggregates.push_back({b.profile, b.between_variance, b.total_weight});
        } catch (const InsufficientDataError&) {
            fits.push_back(excluded_bank(panel, bank));
        }
    }
    if (aggregates.size() < 2)
        throw InsufficientDataError("industry severity fit needs at least 2 banks with 2 qualified cells each");

    const auto industry = make_industry_profile(estimate_collective(aggregates), aggregates.size());
    SeverityFit out;
    out.industry = industry;
    for (auto& fit : fits) out.banks.push_back(apply_industry_profile(std::move(fit), industry));
    return out;
}

}  // namespace opcred
