#pragma once

// Pareto severity above threshold: per-cell MLEs, bank-level credibility and
// the bank -> industry hierarchy.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opcred/credibility.hpp"
#include "opcred/domain.hpp"

namespace opcred {

struct ParetoMle {
    double raw = 0.0;       // maximum likelihood estimate of the risk profile
    double unbiased = 0.0;  // (K - 1) / K * raw
};

/// Risk-profile MLE from losses above `threshold` with severity scale `scale`.
/// Throws InsufficientDataError for K < 2 and DegenerateError when every
/// loss equals the threshold.
ParetoMle pareto_mle(std::span<const double> losses, double threshold, double scale);

struct CredibilityWeight {
    double value = 0.0;
    bool excluded = false;  // cell has too few losses to enter credibility
};

/// (K - 2) / (K - 1 + (profile / between_sd)^2). K < 3 is excluded with
/// weight 0; a zero between_sd gives weight 0.
CredibilityWeight severity_weight(std::size_t observations, double profile, double between_sd);

struct SeverityCellEstimate {
    CellKey key;
    double threshold = 1.0;
    double severity_scale = 1.0;
    std::size_t observations = 0;
    std::optional<double> raw_mle;
    std::optional<double> mle;
    double weight = 0.0;            // alpha_j
    double bank_credibility = 0.0;  // shrunk to the bank's own profile
    double credibility = 0.0;       // final estimate (after any industry adjustment)
    double tail_parameter = 0.0;    // severity_scale * credibility
    bool excluded = false;
};

struct SeverityBankProfile {
    std::string bank_id;
    double profile = 0.0;           // bottom-up estimate from the bank's cells
    double between_variance = 0.0;  // tau_0^2
    double bank_weight = 0.0;       // beta
    double total_weight = 0.0;      // sum of alpha_j
    double credibility_profile = 0.0;  // after industry adjustment; equals profile when none
    std::size_t qualified_cells = 0;
    int iterations = 0;
    bool degenerate = false;  // between variance truncated, volume-weighted fallback used
    bool excluded = false;    // fewer than 2 qualified cells; cells shrink fully to the collective
};

using SeverityIndustryProfile = IndustryProfile;

struct SeverityBankFit {
    SeverityBankProfile bank;
    std::vector<SeverityCellEstimate> cells;
};

struct SeverityFit {
    std::optional<SeverityIndustryProfile> industry;
    std::vector<SeverityBankFit> banks;

    std::vector<SeverityCellEstimate> all_cells() const;
};

/// Bank-only credibility fit over all configured and observed cells of
/// `bank_id`. Needs at least 2 cells with K >= 3.
SeverityBankFit fit_bank_severity(const LossPanel& panel, const std::string& bank_id,
                                  const FixedPointSettings& settings = {});

/// Wraps externally supplied industry parameters.
SeverityIndustryProfile industry_profile_injection(double collective, double collective_variance);

/// Top-down pass: shrinks the bank profile toward the collective and
/// recomputes the cells' final estimates.
SeverityBankFit apply_industry_profile(SeverityBankFit fit, const SeverityIndustryProfile& industry);

/// Bank fits for every bank in the panel followed by the top-down pass
/// with the given profile.
SeverityFit fit_severity_with_profile(const LossPanel& panel, const SeverityIndustryProfile& industry,
                                      const FixedPointSettings& settings = {});

/// Full hierarchy: per-bank structural fits, industry collective, top-down.
/// Banks with fewer than 2 qualified cells are excluded from estimation and
/// their cells shrink fully to the collective.
SeverityFit fit_industry_severity(const LossPanel& panel, const FixedPointSettings& settings = {});

/// Bank-only fits for every bank in the panel.
SeverityFit fit_banks_severity(const LossPanel& panel, const FixedPointSettings& settings = {});

}  // namespace opcred
