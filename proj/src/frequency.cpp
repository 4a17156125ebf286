#include "opcred/frequency.hpp"

#include <cmath>
#include <set>

namespace opcred {

namespace {

std::vector<FrequencyCellEstimate> collect_cells(const CountPanel& panel, const std::string& bank_id) {
    std::vector<FrequencyCellEstimate> cells;
    for (const auto& key : panel.cells()) {
        if (key.bank_id != bank_id) continue;
        const auto& config = panel.configs().at(key);
        FrequencyCellEstimate cell;
        cell.key = key;
        cell.threshold = config.threshold;
        cell.frequency_scale = config.frequency_scale;
        const auto counts = panel.counts(key);
        cell.years = counts.size();
        cell.total_count = panel.total_count(key);
        const auto mle = poisson_mle(counts, config.frequency_scale);
        cell.mle = mle.mle;
        cell.volume = mle.volume;
        cells.push_back(cell);
    }
    return cells;
}

void check_thresholds(const std::vector<FrequencyCellEstimate>& cells, const std::string& bank_id,
                      const FrequencyOptions& options) {
    if (options.allow_mixed_thresholds) return;
    std::set<double> distinct;
    for (const auto& c : cells) distinct.insert(c.threshold);
    if (distinct.size() > 1)
        throw ValidationError("bank " + bank_id + ": frequency model needs one threshold across cells, found " +
                               std::to_string(distinct.size()));
}

void finish_cells(FrequencyBankFit& fit, double final_profile) {
    for (auto& cell : fit.cells) {
        cell.credibility = credibility_combine(cell.mle, final_profile, cell.weight);
        cell.arrival_rate = cell.frequency_scale * cell.credibility;
    }
}

FrequencyBankFit excluded_bank(const CountPanel& panel, const std::string& bank_id) {
    FrequencyBankFit fit;
    fit.bank.bank_id = bank_id;
    fit.bank.excluded = true;
    fit.cells = collect_cells(panel, bank_id);
    fit.bank.cells = fit.cells.size();
    for (const auto& c : fit.cells) fit.bank.total_volume += c.volume;
    return fit;
}

}  // namespace

PoissonMle poisson_mle(std::span<const std::int64_t> counts, double scale) {
    if (!(scale > 0.0)) throw DomainError("frequency scale must be > 0");
    if (counts.empty()) throw InsufficientDataError("Poisson MLE needs at least one observed year");
    double total = 0.0;
    for (auto n : counts) {
        if (n < 0) throw DomainError("negative annual count");
        total += static_cast<double>(n);
    }
    const double volume = scale * static_cast<double>(counts.size());
    return {total / volume, volume};
}

double frequency_weight(double volume, double profile, double between_variance) {
    if (!(volume > 0.0)) throw DomainError("frequency volume must be > 0");
    if (!(profile >= 0.0)) throw DomainError("frequency profile must be >= 0");
    if (!(between_variance > 0.0)) return 0.0;
    return volume / (volume + profile / between_variance);
}

std::vector<FrequencyCellEstimate> FrequencyFit::all_cells() const {
    std::vector<FrequencyCellEstimate> out;
    for (const auto& b : banks) out.insert(out.end(), b.cells.begin(), b.cells.end());
    return out;
}

FrequencyBankFit fit_bank_frequency(const CountPanel& panel, const std::string& bank_id,
                                    const FrequencyOptions& options) {
    validate(options.solver);
    FrequencyBankFit fit;
    fit.bank.bank_id = bank_id;
    fit.cells = collect_cells(panel, bank_id);
    check_thresholds(fit.cells, bank_id, options);

    const std::size_t j_count = fit.cells.size();
    fit.bank.cells = j_count;
    if (j_count < 2)
        throw InsufficientDataError("bank " + bank_id + " has " + std::to_string(j_count) +
                                    " cells with counts; frequency credibility needs 2");
    const double j = static_cast<double>(j_count);

    double nu0 = 0.0;
    double mean_rate = 0.0;  // unweighted mean of cell MLEs
    for (const auto& c : fit.cells) {
        nu0 += c.volume;
        mean_rate += c.mle;
    }
    mean_rate /= j;
    fit.bank.total_volume = nu0;

    double dispersion = 0.0;
    double spread = 0.0;
    std::vector<WeightedObservation> volumes;
    for (const auto& c : fit.cells) {
        const double share = c.volume / nu0;
        dispersion += share * (c.mle - mean_rate) * (c.mle - mean_rate);
        spread += share * (1.0 - share);
        volumes.push_back({c.mle, c.volume});
    }
    const double t_stat = j / (j - 1.0) * dispersion;
    // (J - 1) / J as in the industry-level constant; J / (J - 1) would inflate
    // the between variance by (J / (J - 1))^2 under equal volumes
    const double balance = (j - 1.0) / j / spread;
    const double volume_mean = weighted_mean(volumes);

    const auto between_at = [&](double profile) { return truncate_nonnegative(balance * (t_stat - j * profile / nu0)); };

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

    const auto initial = between_at(volume_mean);
    if (initial.truncated) {
        fallback();
    } else {
        // Iterate in units of the starting mean (rates / unit, variances /
        // unit^2, volumes * unit) so the stopping rule is scale-free.
        const double unit = volume_mean;
        const auto between_scaled = [&](double profile) {
            return truncate_nonnegative(balance * (t_stat / (unit * unit) - j * profile / (nu0 * unit)));
        };
        const StructuralUpdate update = [&](const StructuralParams& p) -> StructuralParams {
            if (!(p.between_variance > 0.0)) return {1.0, 1.0, 0.0};
            const auto omega2 = between_scaled(p.collective_mean);
            if (omega2.truncated) return {1.0, 1.0, 0.0};
            double w_sum = 0.0;
            double num = 0.0;
            for (const auto& c : fit.cells) {
                const double g = frequency_weight(c.volume * unit, p.collective_mean, omega2.value);
                w_sum += g;
                num += g * c.mle / unit;
            }
            const double profile = num / w_sum;
            return {profile, profile, omega2.value};
        };
        const auto to_data_units = [unit](FixedPointResult r) {
            r.params.collective_mean *= unit;
            r.params.within_variance *= unit;
            r.params.between_variance *= unit * unit;
            return r;
        };
        FixedPointResult solved;
        try {
            solved = to_data_units(
                solve_fixed_point(update, {1.0, 1.0, initial.value / (unit * unit)}, options.solver));
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("frequency structural fit for bank " + bank_id + " did not converge",
                                   to_data_units(e.last_iterate()));
        }
        fit.bank.iterations = solved.iterations;
        const auto omega2 = truncate_nonnegative(solved.params.between_variance);
        if (omega2.truncated) {
            fallback();
        } else {
            fit.bank.between_variance = omega2.value;
            double num = 0.0;
            for (auto& cell : fit.cells) {
                cell.weight = frequency_weight(cell.volume, solved.params.collective_mean, omega2.value);
                fit.bank.total_weight += cell.weight;
                num += cell.weight * cell.mle;
            }
            fit.bank.profile = num / fit.bank.total_weight;
            for (auto& cell : fit.cells)
                cell.bank_credibility = credibility_combine(cell.mle, fit.bank.profile, cell.weight);
        }
    }

    fit.bank.bank_weight = 1.0;
    fit.bank.credibility_profile = fit.bank.profile;
    finish_cells(fit, fit.bank.profile);
    return fit;
}

FrequencyIndustryProfile industry_rate_injection(double collective, double collective_variance) {
    return inject_industry_profile(collective, collective_variance);
}

FrequencyBankFit apply_industry_rate(FrequencyBankFit fit, const FrequencyIndustryProfile& industry) {
    auto& bank = fit.bank;
    if (bank.excluded) {
        bank.bank_weight = 0.0;
        bank.profile = industry.collective;
        bank.credibility_profile = industry.collective;
        for (auto& cell : fit.cells) {
            cell.weight = 0.0;
            cell.bank_credibility = industry.collective;
        }
    } else {
        bank.bank_weight =
            bank_credibility_weight(bank.total_weight, bank.between_variance, industry.collective_variance);
        bank.credibility_profile = credibility_combine(bank.profile, industry.collective, bank.bank_weight);
    }
    finish_cells(fit, bank.credibility_profile);
    return fit;
}

FrequencyFit fit_banks_frequency(const CountPanel& panel, const FrequencyOptions& options) {
    FrequencyFit out;
    for (const auto& bank : panel.banks()) out.banks.push_back(fit_bank_frequency(panel, bank, options));
    return out;
}

FrequencyFit fit_frequency_with_profile(const CountPanel& panel, const FrequencyIndustryProfile& industry,
                                        const FrequencyOptions& options) {
    FrequencyFit out;
    out.industry = industry;
    for (const auto& bank : panel.banks()) {
        FrequencyBankFit fit;
        try {
            fit = fit_bank_frequency(panel, bank, options);
        } catch (const InsufficientDataError&) {
            fit = excluded_bank(panel, bank);
        }
        out.banks.push_back(apply_industry_rate(std::move(fit), industry));
    }
    return out;
}

FrequencyFit fit_industry_frequency(const CountPanel& panel, const FrequencyOptions& options) {
    const auto bank_ids = panel.banks();
    if (bank_ids.size() < 2) throw InsufficientDataError("industry frequency fit needs at least 2 banks");

    std::vector<FrequencyBankFit> fits;
    std::vector<BankAggregate> aggregates;
    for (const auto& bank : bank_ids) {
        try {
            fits.push_back(fit_bank_frequency(panel, bank, options));
            const auto& b = fits.back().bank;
            aggregates.push_back({b.profile, b.between_variance, b.total_weight});
        } catch (const InsufficientDataError&) {
            fits.push_back(excluded_bank(panel, bank));
        }
    }
    if (aggregates.size() < 2)
        throw InsufficientDataError("industry frequency fit needs at least 2 banks with 2 cells each");

    const auto industry = make_industry_profile(estimate_collective(aggregates), aggregates.size());
    FrequencyFit out;
    out.industry = industry;
    for (auto& fit : fits) out.banks.push_back(apply_industry_rate(std::move(fit), industry));
    return out;
}

}  // namespace opcred
