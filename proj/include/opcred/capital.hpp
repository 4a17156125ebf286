#pragma once

// Annual-loss Monte Carlo: per cell a compound Poisson-Pareto sum above the
// threshold plus an optional compound sum below it; cells are independent
// and the bank total is their sum.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opcred/domain.hpp"
#include "opcred/frequency.hpp"
#include "opcred/random.hpp"
#include "opcred/severity.hpp"

namespace opcred {

/// Severity law for losses below the threshold.
class LossSampler {
public:
    virtual ~LossSampler() = default;
    virtual double sample(double u) const = 0;
    virtual double upper_bound() const = 0;
    virtual std::string describe() const = 0;
};

/// Lognormal(mu, sigma) conditioned on (0, upper), sampled by inversion.
class TruncatedLognormal final : public LossSampler {
public:
    TruncatedLognormal(double mu, double sigma, double upper);
    double sample(double u) const override;
    double upper_bound() const override { return upper_; }
    std::string describe() const override;
    double mu() const { return mu_; }
    double sigma() const { return sigma_; }

private:
    double mu_;
    double sigma_;
    double upper_;
    double upper_probability_;  // lognormal CDF at `upper`
};

struct HighFrequencyModel {
    double rate = 0.0;
    std::shared_ptr<const LossSampler> severity;
};

/// One cell's annual loss model. Validated on construction.
class CellLossModel {
public:
    CellLossModel(CellKey key, double lf_rate, double lf_tail, double threshold,
                  std::optional<HighFrequencyModel> hf = std::nullopt);

    const CellKey& key() const { return key_; }
    double lf_rate() const { return lf_rate_; }
    double lf_tail() const { return lf_tail_; }
    double threshold() const { return threshold_; }
    const std::optional<HighFrequencyModel>& hf_model() const { return hf_; }
    /// False when the Pareto mean is infinite (tail <= 1) and losses can occur.
    bool finite_mean() const { return lf_rate_ == 0.0 || lf_tail_ > 1.0; }

private:
    CellKey key_;
    double lf_rate_;
    double lf_tail_;
    double threshold_;
    std::optional<HighFrequencyModel> hf_;
};

/// The four independent substreams one cell uses on one path.
struct PathStreams {
    Substream lf_count;
    Substream lf_severity;
    Substream hf_count;
    Substream hf_severity;

    static PathStreams derive(std::uint64_t seed, std::uint64_t cell_index, std::uint64_t path);
};

double simulate_annual_loss(const CellLossModel& model, PathStreams& streams);

struct CapitalConfig {
    std::uint64_t paths = 100000;
    std::uint64_t seed = 1;
    std::vector<double> quantiles{0.999};
    unsigned threads = 0;  // 0: hardware concurrency
    bool keep_bank_sample = false;
};

void validate(const CapitalConfig& config);

struct QuantileEstimate {
    double probability = 0.0;
    double estimate = 0.0;
    double lower = 0.0;  // 95% order-statistic band
    double upper = 0.0;
    std::uint64_t rank = 0;
    std::uint64_t lower_rank = 0;
    std::uint64_t upper_rank = 0;
};

/// Order statistic of rank ceil(q * K) in the ascending `sorted` sample,
/// with the band from the central 95% interval of Binomial(K, q).
QuantileEstimate quantile(std::span<const double> sorted, double q);

struct SampleSummary {
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double zero_fraction = 0.0;
    bool mean_convergent = true;
    std::vector<QuantileEstimate> quantiles;
};

struct CellCapital {
    CellKey key;
    double lf_rate = 0.0;
    double lf_tail = 0.0;
    double threshold = 0.0;
    bool has_hf = false;
    SampleSummary summary;
};

struct CapitalResult {
    std::uint64_t paths = 0;
    std::uint64_t seed = 0;
    std::vector<CellCapital> cells;
    SampleSummary bank;
    std::vector<std::string> warnings;
    std::vector<double> bank_sample;  // sorted; only when requested
};

/// Simulates config.paths years for every model. Deterministic for a given
/// (models, config) regardless of thread count.
CapitalResult run_capital(std::span<const CellLossModel> models, const CapitalConfig& config);

struct ModelBuild {
    std::vector<CellLossModel> models;
    std::vector<CellKey> excluded;
    std::vector<std::string> warnings;
};

/// Pairs tail parameters and arrival rates per cell. Cells present in only
/// one fit are excluded with a warning. Differing thresholds are an error
/// unless `allow_threshold_mismatch`, in which case the severity threshold
/// is used and a warning is recorded.
ModelBuild build_models_from_fits(const SeverityFit& severity, const FrequencyFit& frequency,
                                  const std::map<CellKey, HighFrequencyModel>& hf = {},
                                  bool allow_threshold_mismatch = false);

}  // namespace opcred
