#include "opcred/random.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "opcred/errors.hpp"

namespace opcred {

namespace {

constexpr double kDirectInversionLimit = 30.0;

// P(N <= n) for N ~ Poisson(mean).
double poisson_cdf(double mean, std::int64_t n) {
    return boost::math::gamma_q(static_cast<double>(n) + 1.0, mean);
}

}  // namespace

std::int64_t poisson_inverse(double mean, double u) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("Poisson mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < kDirectInversionLimit) {
        double p = std::exp(-mean);
        double cdf = p;
        std::int64_t n = 0;
        while (cdf < u) {
            ++n;
            p *= mean / static_cast<double>(n);
            if (p == 0.0) break;
            cdf += p;
        }
        return n;
    }
    // Start from the normal approximation and walk to the exact inverse.
    const boost::math::normal_distribution<double> standard;
    const double z = boost::math::quantile(standard, u);
    auto n = static_cast<std::int64_t>(std::max(0.0, std::floor(mean + z * std::sqrt(mean))));
    while (n > 0 && poisson_cdf(mean, n - 1) >= u) --n;
    while (poisson_cdf(mean, n) < u) ++n;
    return n;
}

}  // namespace opcred
