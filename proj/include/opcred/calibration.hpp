#pragma once

// Expert opinions -> a priori scale constants.

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "opcred/domain.hpp"

namespace opcred {

/// "A loss in this cell exceeds `level` with probability `exceedance_probability`."
struct SeverityOpinion {
    CellKey key;
    double level = 0.0;
    double exceedance_probability = 0.0;
};

/// "This cell sees `expected_count` losses above threshold per year."
struct FrequencyOpinion {
    CellKey key;
    double expected_count = 0.0;
};

struct Opinions {
    std::vector<SeverityOpinion> severity;
    std::vector<FrequencyOpinion> frequency;

    bool empty() const { return severity.empty() && frequency.empty(); }
};

/// Severity scale per cell. Opinions on the same cell are pooled in a
/// least-squares fit of ln q = -a * profile * ln(T / L), which reduces to
/// a = -ln q / (profile * ln(T / L)) for a single opinion. Thresholds come
/// from `configs`.
std::map<CellKey, double> calibrate_severity_scales(std::span<const SeverityOpinion> opinions,
                                                    const CellConfigSet& configs, double reference_profile = 1.0);

/// nu = expected_count / reference_rate per cell. Several opinions on one
/// cell are averaged.
std::map<CellKey, double> calibrate_frequency_scales(std::span<const FrequencyOpinion> opinions,
                                                     double reference_rate = 1.0);

/// Copy of `configs` with the calibrated scales written in. Cells without
/// an opinion keep their current scales.
CellConfigSet apply_scales(const CellConfigSet& configs, const std::map<CellKey, double>& severity_scales,
                           const std::map<CellKey, double>& frequency_scales);

Opinions load_opinions(const std::filesystem::path& path);

}  // namespace opcred
