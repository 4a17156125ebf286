#include "opcred/calibration.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "opcred/errors.hpp"

namespace opcred {

std::map<CellKey, double> calibrate_severity_scales(std::span<const SeverityOpinion> opinions,
                                                    const CellConfigSet& configs, double reference_profile) {
    if (!(reference_profile > 0.0)) throw DomainError("reference profile must be > 0");
    struct Sums {
        double cross = 0.0;  // sum ln q * ln(T/L)
        double square = 0.0; // sum ln(T/L)^2
    };
    std::map<CellKey, Sums> sums;
    for (const auto& op : opinions) {
        const double threshold = configs.at(op.key).threshold;
        if (!(op.level > threshold))
            throw DomainError("opinion level for " + to_string(op.key) + " must exceed the threshold");
        if (!(op.exceedance_probability > 0.0 && op.exceedance_probability < 1.0))
            throw DomainError("exceedance probability for " + to_string(op.key) + " must lie in (0, 1)");
        const double log_ratio = std::log(op.level / threshold);
        auto& s = sums[op.key];
        s.cross += std::log(op.exceedance_probability) * log_ratio;
        s.square += log_ratio * log_ratio;
    }
    std::map<CellKey, double> out;
    for (const auto& [key, s] : sums) out[key] = -s.cross / (reference_profile * s.square);
    return out;
}

std::map<CellKey, double> calibrate_frequency_scales(std::span<const FrequencyOpinion> opinions,
                                                     double reference_rate) {
    if (!(reference_rate > 0.0)) throw DomainError("reference rate must be > 0");
    std::map<CellKey, std::pair<double, int>> acc;
    for (const auto& op : opinions) {
        if (!(op.expected_count > 0.0))
            throw DomainError("expected count for " + to_string(op.key) + " must be > 0");
        auto& [sum, n] = acc[op.key];
        sum += op.expected_count;
        ++n;
    }
    std::map<CellKey, double> out;
    for (const auto& [key, a] : acc) out[key] = a.first / a.second / reference_rate;
    return out;
}

CellConfigSet apply_scales(const CellConfigSet& configs, const std::map<CellKey, double>& severity_scales,
                           const std::map<CellKey, double>& frequency_scales) {
    for (const auto& [key, _] : severity_scales) configs.at(key);
    for (const auto& [key, _] : frequency_scales) configs.at(key);
    CellConfigSet out;
    for (auto c : configs.all()) {
        if (auto it = severity_scales.find(c.key); it != severity_scales.end()) c.severity_scale = it->second;
        if (auto it = frequency_scales.find(c.key); it != frequency_scales.end()) c.frequency_scale = it->second;
        out.insert(c);
    }
    return out;
}

Opinions load_opinions(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError(path.string() + ": opinions must be a JSON array");
    Opinions out;
    for (const auto& item : doc) {
        try {
            const CellKey key{item.at("bank_id").get<std::string>(), item.at("cell_id").get<std::string>()};
            const auto kind = item.at("kind").get<std::string>();
            if (kind == "severity") {
                out.severity.push_back({key, item.at("level").get<double>(), item.at("probability").get<double>()});
            } else if (kind == "frequency") {
                out.frequency.push_back({key, item.at("expected_count").get<double>()});
            } else {
                throw ParseError(path.string() + ": unknown opinion kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": bad opinion entry: " + e.what());
        }
    }
    return out;
}

}  // namespace opcred
