#pragma once

// Synthetic multi-bank datasets with recorded ground truth, for checking
// estimator quality against known risk profiles.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "opcred/domain.hpp"

namespace opcred {

/// Two-level gamma mixing: bank profiles ~ Gamma(mean, bank_variance), cell
/// profiles ~ Gamma(bank profile, cell_variance). A zero variance makes the
/// corresponding level deterministic.
struct MixingLaw {
    double mean = 1.0;
    double bank_variance = 0.0;
    double cell_variance = 0.0;
};

struct SynthSpec {
    std::size_t banks = 1;
    std::size_t cells = 10;
    std::size_t years = 10;
    std::size_t losses_per_cell = 10;
    double threshold = 1.0;
    MixingLaw severity{2.5, 0.0, 0.5};
    MixingLaw frequency{2.0, 0.0, 0.5};
    std::uint64_t seed = 1;
};

void validate(const SynthSpec& spec);

struct CellTruth {
    double severity_profile = 0.0;   // theta_j
    double frequency_profile = 0.0;  // lambda_j
};

struct BankTruth {
    double severity_profile = 0.0;   // theta_0
    double frequency_profile = 0.0;  // lambda_0
};

struct GroundTruth {
    std::map<std::string, BankTruth> banks;
    std::map<CellKey, CellTruth> cells;
};

struct SynthDataset {
    SynthSpec spec;
    CellConfigSet configs;
    std::vector<LossRecord> losses;
    std::vector<CountRecord> counts;
    GroundTruth truth;

    LossPanel loss_panel() const { return LossPanel::from_records(losses, configs); }
    CountPanel count_panel() const { return CountPanel::from_records(counts, configs); }
};

/// Deterministic in `spec` (including the seed). Losses use scale 1 so the
/// severity profile equals the Pareto tail; counts use frequency scale 1.
SynthDataset synthesize(const SynthSpec& spec);

std::string bank_name(std::size_t index);
std::string cell_name(std::size_t index);

}  // namespace opcred
