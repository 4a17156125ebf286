#include "opcred/capital.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>

#include "opcred/errors.hpp"

namespace opcred {

namespace {

constexpr std::uint64_t kBlockSize = 1u << 15;

template <typename Fn>
void parallel_blocks(std::uint64_t paths, unsigned threads, Fn fn) {
    const std::uint64_t blocks = (paths + kBlockSize - 1) / kBlockSize;
    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, std::max<std::uint64_t>(blocks, 1)));
    std::atomic<std::uint64_t> next{0};
    const auto work = [&] {
        for (std::uint64_t b = next++; b < blocks; b = next++) fn(b * kBlockSize, std::min(paths, (b + 1) * kBlockSize));
    };
    if (workers <= 1) {
        work();
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
}

// Sorts `sample` in place.
SampleSummary summarize(std::vector<double>& sample, std::span<const double> probabilities, bool finite_mean) {
    SampleSummary s;
    const double n = static_cast<double>(sample.size());
    double sum = 0.0;
    std::uint64_t zeros = 0;
    for (double z : sample) {
        sum += z;
        zeros += z == 0.0;
    }
    s.mean = sum / n;
    double ss = 0.0;
    for (double z : sample) ss += (z - s.mean) * (z - s.mean);
    s.stddev = sample.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.zero_fraction = static_cast<double>(zeros) / n;
    s.mean_convergent = finite_mean;
    std::sort(sample.begin(), sample.end());
    s.min = sample.front();
    s.max = sample.back();
    for (double q : probabilities) s.quantiles.push_back(quantile(sample, q));
    return s;
}

}  // namespace

// TruncatedLognormal ---------------------------------------------------------

TruncatedLognormal::TruncatedLognormal(double mu, double sigma, double upper) : mu_(mu), sigma_(sigma), upper_(upper) {
    if (!std::isfinite(mu)) throw DomainError("lognormal mu must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("lognormal sigma must be > 0");
    if (!(upper > 0.0) || !std::isfinite(upper)) throw DomainError("truncation point must be > 0");
    const boost::math::normal_distribution<double> standard;
    upper_probability_ = boost::math::cdf(standard, (std::log(upper) - mu) / sigma);
    if (!(upper_probability_ > 0.0)) throw DomainError("lognormal has no mass below the truncation point");
}

double TruncatedLognormal::sample(double u) const {
    const boost::math::normal_distribution<double> standard;
    const double x = std::exp(mu_ + sigma_ * boost::math::quantile(standard, u * upper_probability_));
    return std::min(x, upper_);
}

std::string TruncatedLognormal::describe() const {
    std::ostringstream out;
    out << "lognormal(mu=" << mu_ << ", sigma=" << sigma_ << ") truncated to (0, " << upper_ << ")";
    return out.str();
}

// CellLossModel --------------------------------------------------------------

CellLossModel::CellLossModel(CellKey key, double lf_rate, double lf_tail, double threshold,
                             std::optional<HighFrequencyModel> hf)
    : key_(std::move(key)), lf_rate_(lf_rate), lf_tail_(lf_tail), threshold_(threshold), hf_(std::move(hf)) {
    const auto name = to_string(key_);
    if (!(lf_rate_ >= 0.0) || !std::isfinite(lf_rate_)) throw DomainError("arrival rate must be >= 0 for " + name);
    if (!(lf_tail_ > 0.0) || !std::isfinite(lf_tail_)) throw DomainError("tail parameter must be > 0 for " + name);
    if (!(threshold_ > 0.0) || !std::isfinite(threshold_)) throw DomainError("threshold must be > 0 for " + name);
    if (hf_) {
        if (!(hf_->rate >= 0.0) || !std::isfinite(hf_->rate))
            throw DomainError("high-frequency rate must be >= 0 for " + name);
        if (!hf_->severity) throw DomainError("high-frequency model without severity for " + name);
        if (hf_->severity->upper_bound() > threshold_)
            throw DomainError("high-frequency severity exceeds the threshold for " + name);
    }
}

PathStreams PathStreams::derive(std::uint64_t seed, std::uint64_t cell_index, std::uint64_t path) {
    return {Substream::derive(seed, cell_index, path, StreamPurpose::LowFrequencyCount),
            Substream::derive(seed, cell_index, path, StreamPurpose::LowFrequencySeverity),
            Substream::derive(seed, cell_index, path, StreamPurpose::HighFrequencyCount),
            Substream::derive(seed, cell_index, path, StreamPurpose::HighFrequencySeverity)};
}

double simulate_annual_loss(const CellLossModel& model, PathStreams& streams) {
    double total = 0.0;
    const auto n_lf = poisson_inverse(model.lf_rate(), streams.lf_count.uniform());
    for (std::int64_t i = 0; i < n_lf; ++i)
        total += pareto_inverse(model.threshold(), model.lf_tail(), streams.lf_severity.uniform());
    if (const auto& hf = model.hf_model()) {
        const auto n_hf = poisson_inverse(hf->rate, streams.hf_count.uniform());
        for (std::int64_t i = 0; i < n_hf; ++i) total += hf->severity->sample(streams.hf_severity.uniform());
    }
    return total;
}

// Quantiles ------------------------------------------------------------------

void validate(const CapitalConfig& config) {
    if (config.paths < 1) throw DomainError("number of paths must be >= 1");
    if (config.quantiles.empty()) throw DomainError("at least one quantile level is required");
    for (double q : config.quantiles)
        if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile levels must lie in (0, 1)");
}

QuantileEstimate quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    const auto k = static_cast<std::uint64_t>(sorted.size());
    const double kd = static_cast<double>(k);
    const auto clamp_rank = [k](double r) {
        return static_cast<std::uint64_t>(std::clamp(r, 1.0, static_cast<double>(k)));
    };
    QuantileEstimate est;
    est.probability = q;
    // q * K may land a rounding error above an integer
    est.rank = clamp_rank(std::ceil(q * kd - 1e-9 * std::max(1.0, q * kd)));

    using namespace boost::math::policies;
    using Down = boost::math::binomial_distribution<double, policy<discrete_quantile<integer_round_down>>>;
    using Up = boost::math::binomial_distribution<double, policy<discrete_quantile<integer_round_up>>>;
    est.lower_rank = clamp_rank(boost::math::quantile(Down(kd, q), 0.025));
    est.upper_rank = clamp_rank(boost::math::quantile(Up(kd, q), 0.975) + 1.0);
    est.estimate = sorted[est.rank - 1];
    est.lower = sorted[est.lower_rank - 1];
    est.upper = sorted[est.upper_rank - 1];
    return est;
}

// Simulation -----------------------------------------------------------------

CapitalResult run_capital(std::span<const CellLossModel> models, const CapitalConfig& config) {
    validate(config);
    if (models.empty()) throw DomainError("capital run needs at least one cell model");

    CapitalResult result;
    result.paths = config.paths;
    result.seed = config.seed;
    for (double q : config.quantiles)
        if (static_cast<double>(config.paths) < 1.0 / (1.0 - q))
            result.warnings.push_back("paths=" + std::to_string(config.paths) + " is below 1/(1-q) for q=" +
                                      std::to_string(q) + "; the estimate is beyond sample resolution");

    const auto n = static_cast<std::size_t>(config.paths);
    std::vector<double> total(n, 0.0);
    std::vector<double> cell_sample(n);
    bool bank_finite = true;
    for (std::size_t c = 0; c < models.size(); ++c) {
        const auto& model = models[c];
        parallel_blocks(config.paths, config.threads, [&](std::uint64_t begin, std::uint64_t end) {
            for (std::uint64_t p = begin; p < end; ++p) {
                auto streams = PathStreams::derive(config.seed, c, p);
                cell_sample[p] = simulate_annual_loss(model, streams);
            }
        });
        for (std::size_t p = 0; p < n; ++p) total[p] += cell_sample[p];

        if (!model.finite_mean()) {
            bank_finite = false;
            result.warnings.push_back(to_string(model.key()) +
                                      ": tail parameter <= 1, the annual-loss mean is infinite and sample means "
                                      "do not converge");
        }
        CellCapital cell;
        cell.key = model.key();
        cell.lf_rate = model.lf_rate();
        cell.lf_tail = model.lf_tail();
        cell.threshold = model.threshold();
        cell.has_hf = model.hf_model().has_value();
        cell.summary = summarize(cell_sample, config.quantiles, model.finite_mean());
        result.cells.push_back(std::move(cell));
    }
    cell_sample = {};
    result.bank = summarize(total, config.quantiles, bank_finite);
    if (config.keep_bank_sample) result.bank_sample = std::move(total);
    return result;
}

ModelBuild build_models_from_fits(const SeverityFit& severity, const FrequencyFit& frequency,
                                  const std::map<CellKey, HighFrequencyModel>& hf, bool allow_threshold_mismatch) {
    std::map<CellKey, SeverityCellEstimate> sev;
    for (const auto& c : severity.all_cells()) sev.emplace(c.key, c);
    std::map<CellKey, FrequencyCellEstimate> freq;
    for (const auto& c : frequency.all_cells()) freq.emplace(c.key, c);

    ModelBuild out;
    for (const auto& [key, s] : sev) {
        const auto it = freq.find(key);
        if (it == freq.end()) {
            out.excluded.push_back(key);
            out.warnings.push_back(to_string(key) + ": present in the severity fit only, excluded");
            continue;
        }
        const auto& f = it->second;
        if (s.threshold != f.threshold) {
            if (!allow_threshold_mismatch) {
                std::ostringstream msg;
                msg << to_string(key) << ": severity threshold " << s.threshold << " differs from frequency threshold "
                    << f.threshold;
                throw ValidationError(msg.str());
            }
            out.warnings.push_back(to_string(key) + ": thresholds differ between fits; using the severity threshold");
        }
        std::optional<HighFrequencyModel> hf_model;
        if (const auto h = hf.find(key); h != hf.end()) hf_model = h->second;
        out.models.emplace_back(key, f.arrival_rate, s.tail_parameter, s.threshold, hf_model);
    }
    for (const auto& [key, _] : freq)
        if (!sev.contains(key)) {
            out.excluded.push_back(key);
            out.warnings.push_back(to_string(key) + ": present in the frequency fit only, excluded");
        }
    for (const auto& [key, _] : hf)
        if (!sev.contains(key) || !freq.contains(key))
            out.warnings.push_back(to_string(key) + ": high-frequency model for a cell without fits, ignored");
    return out;
}

}  // namespace opcred
