#include "opcred/synth.hpp"

#include <random>

#include "opcred/errors.hpp"
#include "opcred/random.hpp"

namespace opcred {

namespace {

double draw_gamma(Substream& rng, double mean, double variance) {
    if (variance == 0.0) return mean;
    std::gamma_distribution<double> gamma(mean * mean / variance, variance / mean);
    return gamma(rng);
}

void validate(const MixingLaw& law, const char* name) {
    if (!(law.mean > 0.0)) throw DomainError(std::string(name) + " mixing mean must be > 0");
    if (!(law.bank_variance >= 0.0) || !(law.cell_variance >= 0.0))
        throw DomainError(std::string(name) + " mixing variances must be >= 0");
}

}  // namespace

std::string bank_name(std::size_t index) { return "bank" + std::to_string(index + 1); }
std::string cell_name(std::size_t index) { return "cell" + std::to_string(index + 1); }

void validate(const SynthSpec& spec) {
    if (spec.banks < 1 || spec.cells < 1 || spec.years < 1)
        throw DomainError("banks, cells and years must be positive");
    if (!(spec.threshold > 0.0)) throw DomainError("threshold must be > 0");
    validate(spec.severity, "severity");
    validate(spec.frequency, "frequency");
}

SynthDataset synthesize(const SynthSpec& spec) {
    validate(spec);
    SynthDataset data;
    data.spec = spec;
    for (std::size_t m = 0; m < spec.banks; ++m) {
        const auto bank = bank_name(m);
        auto bank_rng = Substream::derive(spec.seed, m, 0, StreamPurpose::Synthesis);
        BankTruth bank_truth;
        bank_truth.severity_profile = draw_gamma(bank_rng, spec.severity.mean, spec.severity.bank_variance);
        bank_truth.frequency_profile = draw_gamma(bank_rng, spec.frequency.mean, spec.frequency.bank_variance);
        data.truth.banks[bank] = bank_truth;

        for (std::size_t j = 0; j < spec.cells; ++j) {
            const CellKey key{bank, cell_name(j)};
            data.configs.insert({key, spec.threshold, 1.0, 1.0});
            auto rng = Substream::derive(spec.seed, m, j + 1, StreamPurpose::Synthesis);
            CellTruth truth;
            truth.severity_profile = draw_gamma(rng, bank_truth.severity_profile, spec.severity.cell_variance);
            truth.frequency_profile = draw_gamma(rng, bank_truth.frequency_profile, spec.frequency.cell_variance);
            data.truth.cells[key] = truth;

            for (std::size_t k = 0; k < spec.losses_per_cell; ++k)
                data.losses.push_back({key, pareto_inverse(spec.threshold, truth.severity_profile, rng.uniform())});
            for (std::size_t y = 0; y < spec.years; ++y)
                data.counts.push_back(
                    {key, static_cast<int>(y + 1), poisson_inverse(truth.frequency_profile, rng.uniform())});
        }
    }
    return data;
}

}  // namespace opcred
