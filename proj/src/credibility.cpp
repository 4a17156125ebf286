#include "opcred/credibility.hpp"

#include <cmath>
#include <numeric>

namespace opcred {

void validate(const FixedPointSettings& settings) {
    if (!(settings.tolerance > 0.0)) throw DomainError("fixed-point tolerance must be > 0");
    if (settings.max_iterations < 1) throw DomainError("fixed-point max_iterations must be >= 1");
}

double credibility_combine(double individual, double collective, double weight) {
    if (!(weight >= 0.0 && weight <= 1.0)) throw DomainError("credibility weight must lie in [0, 1]");
    return weight * individual + (1.0 - weight) * collective;
}

Truncated truncate_nonnegative(double estimate) {
    if (estimate > 0.0) return {estimate, false};
    return {0.0, true};
}

FixedPointResult solve_fixed_point(const StructuralUpdate& update, StructuralParams start,
                                   const FixedPointSettings& settings) {
    validate(settings);
    const auto close = [tol = settings.tolerance](double prev, double next) {
        return std::abs(next - prev) <= tol * (1.0 + std::abs(next));
    };
    FixedPointResult result{start, 0, false};
    while (result.iterations < settings.max_iterations) {
        const StructuralParams next = update(result.params);
        ++result.iterations;
        const bool done = close(result.params.collective_mean, next.collective_mean) &&
                          close(result.params.between_variance, next.between_variance);
        result.params = next;
        if (done) {
            result.converged = true;
            return result;
        }
    }
    throw ConvergenceError("structural parameters did not converge within " +
                               std::to_string(settings.max_iterations) + " iterations",
                           result);
}

double weighted_mean(std::span<const WeightedObservation> observations) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& o : observations) {
        num += o.weight * o.value;
        den += o.weight;
    }
    if (!(den > 0.0)) throw DomainError("weighted mean with zero total weight");
    return num / den;
}

double bank_credibility_weight(double total_weight, double between_variance, double collective_variance) {
    if (!(collective_variance > 0.0) || !(total_weight > 0.0)) return 0.0;
    return total_weight / (total_weight + between_variance / collective_variance);
}

CollectiveEstimate estimate_collective(std::span<const BankAggregate> banks) {
    const std::size_t m_count = banks.size();
    if (m_count < 2) throw InsufficientDataError("industry estimation needs at least 2 banks");
    const double m = static_cast<double>(m_count);

    CollectiveEstimate est;
    est.bank_weights.assign(m_count, 0.0);
    for (const auto& b : banks) {
        est.total_volume += b.total_weight;
        est.pooled_variance += b.between_variance;
        est.mean_profile += b.profile;
    }
    est.pooled_variance /= m;
    est.mean_profile /= m;

    const auto fallback = [&] {
        est.truncated = true;
        est.collective_variance = 0.0;
        est.normalizer = 0.0;
        if (est.total_volume > 0.0) {
            std::vector<WeightedObservation> obs;
            for (const auto& b : banks) obs.push_back({b.profile, b.total_weight});
            est.collective = weighted_mean(obs);
        } else {
            est.collective = est.mean_profile;
        }
        return est;
    };

    if (!(est.total_volume > 0.0)) return fallback();

    double spread = 0.0;  // sum of w(1 - w) over relative weights
    double dispersion = 0.0;
    for (const auto& b : banks) {
        const double share = b.total_weight / est.total_volume;
        spread += share * (1.0 - share);
        dispersion += share * (b.profile - est.mean_profile) * (b.profile - est.mean_profile);
    }
    if (!(spread > 0.0)) return fallback();
    est.balance_constant = (m - 1.0) / m / spread;

    const double raw =
        est.balance_constant * (m / (m - 1.0) * dispersion - m * est.pooled_variance / est.total_volume);
    const auto variance = truncate_nonnegative(raw);
    if (variance.truncated) return fallback();
    est.collective_variance = variance.value;

    double num = 0.0;
    for (std::size_t i = 0; i < m_count; ++i) {
        est.bank_weights[i] =
            bank_credibility_weight(banks[i].total_weight, banks[i].between_variance, est.collective_variance);
        est.normalizer += est.bank_weights[i];
        num += est.bank_weights[i] * banks[i].profile;
    }
    if (!(est.normalizer > 0.0)) return fallback();
    est.collective = num / est.normalizer;
    return est;
}

IndustryProfile make_industry_profile(const CollectiveEstimate& estimate, std::size_t banks) {
    IndustryProfile p;
    p.collective = estimate.collective;
    p.collective_variance = estimate.collective_variance;
    p.normalizer = estimate.normalizer;
    p.pooled_variance = estimate.pooled_variance;
    p.total_volume = estimate.total_volume;
    p.balance_constant = estimate.balance_constant;
    p.mean_profile = estimate.mean_profile;
    p.banks = banks;
    p.truncated = estimate.truncated;
    return p;
}

IndustryProfile inject_industry_profile(double collective, double collective_variance) {
    if (!(collective > 0.0) || !std::isfinite(collective)) throw DomainError("industry profile must be > 0");
    if (!(collective_variance >= 0.0) || !std::isfinite(collective_variance))
        throw DomainError("industry variance must be >= 0");
    IndustryProfile p;
    p.collective = collective;
    p.collective_variance = collective_variance;
    p.truncated = collective_variance == 0.0;
    p.injected = true;
    return p;
}

}  // namespace opcred
