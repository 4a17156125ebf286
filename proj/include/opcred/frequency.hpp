#pragma once

// Poisson frequency above threshold: per-cell MLEs, standardized-frequency
// credibility and the bank -> industry hierarchy. Mirrors severity.hpp.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opcred/credibility.hpp"
#include "opcred/domain.hpp"

namespace opcred {

struct PoissonMle {
    double mle = 0.0;     // sum of counts / volume
    double volume = 0.0;  // frequency_scale * observed years
};

/// Throws InsufficientDataError for an empty count list and DomainError
/// for a non-positive scale or a negative count.
PoissonMle poisson_mle(std::span<const std::int64_t> counts, double scale);

/// volume / (volume + profile / between_variance); 0 when the between
/// variance is 0.
double frequency_weight(double volume, double profile, double between_variance);

struct FrequencyCellEstimate {
    CellKey key;
    double threshold = 1.0;
    double frequency_scale = 1.0;
    std::size_t years = 0;
    std::int64_t total_count = 0;
    double mle = 0.0;
    double volume = 0.0;
    double weight = 0.0;            // gamma_j
    double bank_credibility = 0.0;  // shrunk to the bank's own rate profile
    double credibility = 0.0;       // final estimate
    double arrival_rate = 0.0;      // frequency_scale * credibility
};

struct FrequencyBankProfile {
    std::string bank_id;
    double profile = 0.0;              // lambda_0, bottom-up
    double between_variance = 0.0;     // omega_0^2
    double bank_weight = 0.0;          // rho
    double total_weight = 0.0;         // sum of gamma_j
    double total_volume = 0.0;         // nu_0
    double credibility_profile = 0.0;  // after industry adjustment
    std::size_t cells = 0;
    int iterations = 0;
    bool degenerate = false;
    bool excluded = false;
};

using FrequencyIndustryProfile = IndustryProfile;

struct FrequencyBankFit {
    FrequencyBankProfile bank;
    std::vector<FrequencyCellEstimate> cells;
};

struct FrequencyFit {
    std::optional<FrequencyIndustryProfile> industry;
    std::vector<FrequencyBankFit> banks;

    std::vector<FrequencyCellEstimate> all_cells() const;
};

struct FrequencyOptions {
    FixedPointSettings solver;
    /// The frequency model assumes one threshold per bank; set to accept
    /// mixed thresholds anyway.
    bool allow_mixed_thresholds = false;
};

/// Bank-only fit over the cells of `bank_id` that have at least one
/// observed year. Needs J >= 2 such cells.
FrequencyBankFit fit_bank_frequency(const CountPanel& panel, const std::string& bank_id,
                                    const FrequencyOptions& options = {});

FrequencyIndustryProfile industry_rate_injection(double collective, double collective_variance);

FrequencyBankFit apply_industry_rate(FrequencyBankFit fit, const FrequencyIndustryProfile& industry);

FrequencyFit fit_banks_frequency(const CountPanel& panel, const FrequencyOptions& options = {});

FrequencyFit fit_frequency_with_profile(const CountPanel& panel, const FrequencyIndustryProfile& industry,
                                        const FrequencyOptions& options = {});

/// Full hierarchy over M >= 2 banks.
FrequencyFit fit_industry_frequency(const CountPanel& panel, const FrequencyOptions& options = {});

}  // namespace opcred
