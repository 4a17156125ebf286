#pragma once

// Buhlmann-Straub machinery shared by the severity and frequency stacks.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opcred/errors.hpp"

namespace opcred {

/// An individual estimator and its Buhlmann-Straub volume.
struct WeightedObservation {
    double value = 0.0;
    double weight = 0.0;
};

struct StructuralParams {
    double collective_mean = 0.0;
    double within_variance = 0.0;
    double between_variance = 0.0;
};

struct FixedPointSettings {
    double tolerance = 1e-10;
    int max_iterations = 500;
};

void validate(const FixedPointSettings& settings);

struct FixedPointResult {
    StructuralParams params;
    int iterations = 0;
    bool converged = false;
};

/// Raised when the fixed-point iteration exhausts its budget. The last
/// iterate is kept so callers can decide to accept it.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, FixedPointResult last) : Error(what), last_(last) {}
    const FixedPointResult& last_iterate() const noexcept { return last_; }

private:
    FixedPointResult last_;
};

/// weight * individual + (1 - weight) * collective, weight in [0, 1].
double credibility_combine(double individual, double collective, double weight);

struct Truncated {
    double value = 0.0;
    bool truncated = false;  // true when the input was <= 0
};

/// max(estimate, 0). Zero itself counts as truncated: a vanishing between
/// variance takes the same degenerate branch as a negative one.
Truncated truncate_nonnegative(double estimate);

using StructuralUpdate = std::function<StructuralParams(const StructuralParams&)>;

/// Iterates `update` from `start` until both the collective mean and the
/// between variance move by at most tol * (1 + |value|).
/// Throws ConvergenceError after settings.max_iterations updates.
FixedPointResult solve_fixed_point(const StructuralUpdate& update, StructuralParams start,
                                   const FixedPointSettings& settings);

/// Volume-weighted mean sum(w x) / sum(w). Throws DomainError on zero total weight.
double weighted_mean(std::span<const WeightedObservation> observations);

// Upper (collective) level of the hierarchy. The same formulas serve the
// severity profiles and the frequency rates.

/// One bank as seen from the industry level.
struct BankAggregate {
    double profile = 0.0;           // bottom-up bank profile
    double between_variance = 0.0;  // within-bank between-cell variance
    double total_weight = 0.0;      // sum of cell credibility weights
};

struct CollectiveEstimate {
    double collective = 0.0;
    double collective_variance = 0.0;
    double normalizer = 0.0;       // sum of bank weights
    double pooled_variance = 0.0;  // unweighted mean of bank between variances
    double total_volume = 0.0;     // sum of bank total weights
    double balance_constant = 0.0;
    double mean_profile = 0.0;     // unweighted mean of bank profiles
    bool truncated = false;
    std::vector<double> bank_weights;
};

/// Bank credibility weight W / (W + between_variance / collective_variance).
/// Zero when the collective variance or the bank's total weight is zero.
double bank_credibility_weight(double total_weight, double between_variance, double collective_variance);

/// Estimates the industry collective and its between-bank variance from M >= 2
/// bank aggregates, with the truncation branch falling back to the
/// total-weight-weighted mean of bank profiles.
CollectiveEstimate estimate_collective(std::span<const BankAggregate> banks);

/// Industry collective, either estimated from bank aggregates or injected
/// from outside (e.g. published by a regulator). Injected profiles carry no
/// estimation auxiliaries.
struct IndustryProfile {
    double collective = 0.0;
    double collective_variance = 0.0;
    double normalizer = 0.0;
    double pooled_variance = 0.0;
    double total_volume = 0.0;
    double balance_constant = 0.0;
    double mean_profile = 0.0;
    std::size_t banks = 0;
    bool truncated = false;
    bool injected = false;
};

IndustryProfile make_industry_profile(const CollectiveEstimate& estimate, std::size_t banks);

/// Throws DomainError unless collective > 0 and variance >= 0.
IndustryProfile inject_industry_profile(double collective, double collective_variance);

}  // namespace opcred
