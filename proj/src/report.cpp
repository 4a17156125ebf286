#include "opcred/report.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "opcred/errors.hpp"

namespace opcred {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* name) {
    if (!j.contains(name) || j.at(name).is_null()) return std::nullopt;
    return j.at(name).get<double>();
}

template <typename T>
T value_or(const json& j, const char* name, T fallback) {
    return j.contains(name) && !j.at(name).is_null() ? j.at(name).get<T>() : fallback;
}

json key_json(const CellKey& key) { return {{"bank_id", key.bank_id}, {"cell_id", key.cell_id}}; }

CellKey read_key(const json& j) { return {j.at("bank_id").get<std::string>(), j.at("cell_id").get<std::string>()}; }

std::optional<IndustryProfile> read_industry(const json& j) {
    if (!j.contains("industry") || j.at("industry").is_null()) return std::nullopt;
    const auto& i = j.at("industry");
    IndustryProfile p;
    p.collective = i.at("collective").get<double>();
    p.collective_variance = i.at("collective_variance").get<double>();
    p.normalizer = value_or(i, "normalizer", 0.0);
    p.pooled_variance = value_or(i, "pooled_variance", 0.0);
    p.total_volume = value_or(i, "total_volume", 0.0);
    p.balance_constant = value_or(i, "balance_constant", 0.0);
    p.mean_profile = value_or(i, "mean_profile", 0.0);
    p.banks = value_or<std::size_t>(i, "banks", 0);
    p.truncated = value_or(i, "truncated", false);
    p.injected = value_or(i, "injected", false);
    return p;
}

// Accepts a bare fit object or a report document wrapping one.
const json& fit_object(const json& doc, const char* kind) {
    if (doc.contains("result")) {
        if (doc.contains("kind") && doc.at("kind").get<std::string>() != kind)
            throw ParseError("expected a " + std::string(kind) + " report, got " + doc.at("kind").get<std::string>());
        return doc.at("result");
    }
    return doc;
}

json quantile_json(const QuantileEstimate& q) {
    return {{"probability", q.probability}, {"estimate", q.estimate}, {"lower", q.lower},
            {"upper", q.upper},             {"rank", q.rank},         {"lower_rank", q.lower_rank},
            {"upper_rank", q.upper_rank}};
}

json summary_json(const SampleSummary& s) {
    json quantiles = json::array();
    for (const auto& q : s.quantiles) quantiles.push_back(quantile_json(q));
    return {{"mean", s.mean},
            {"stddev", s.stddev},
            {"min", s.min},
            {"max", s.max},
            {"zero_fraction", s.zero_fraction},
            {"mean_convergent", s.mean_convergent},
            {"quantiles", quantiles}};
}

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

json to_json(const RunManifest& manifest) {
    json inputs = json::object();
    for (const auto& [k, v] : manifest.inputs) inputs[k] = v;
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"command", manifest.command},
            {"inputs", inputs},
            {"config", manifest.config}};
}

json to_json(const IndustryProfile& p) {
    return {{"collective", p.collective},
            {"collective_variance", p.collective_variance},
            {"normalizer", p.normalizer},
            {"pooled_variance", p.pooled_variance},
            {"total_volume", p.total_volume},
            {"balance_constant", p.balance_constant},
            {"mean_profile", p.mean_profile},
            {"banks", p.banks},
            {"truncated", p.truncated},
            {"injected", p.injected}};
}

json to_json(const SeverityFit& fit) {
    json banks = json::array();
    for (const auto& b : fit.banks) {
        json cells = json::array();
        for (const auto& c : b.cells) {
            json cj = key_json(c.key);
            cj.update({{"threshold", c.threshold},
                       {"severity_scale", c.severity_scale},
                       {"observations", c.observations},
                       {"raw_mle", optional_number(c.raw_mle)},
                       {"mle", optional_number(c.mle)},
                       {"weight", c.weight},
                       {"bank_credibility", c.bank_credibility},
                       {"credibility", c.credibility},
                       {"tail_parameter", c.tail_parameter},
                       {"excluded", c.excluded}});
            cells.push_back(std::move(cj));
        }
        const auto& p = b.bank;
        banks.push_back({{"bank_id", p.bank_id},
                         {"profile", p.profile},
                         {"between_variance", p.between_variance},
                         {"bank_weight", p.bank_weight},
                         {"total_weight", p.total_weight},
                         {"credibility_profile", p.credibility_profile},
                         {"qualified_cells", p.qualified_cells},
                         {"iterations", p.iterations},
                         {"degenerate", p.degenerate},
                         {"excluded", p.excluded},
                         {"cells", cells}});
    }
    return {{"industry", fit.industry ? to_json(*fit.industry) : json(nullptr)}, {"banks", banks}};
}

json to_json(const FrequencyFit& fit) {
    json banks = json::array();
    for (const auto& b : fit.banks) {
        json cells = json::array();
        for (const auto& c : b.cells) {
            json cj = key_json(c.key);
            cj.update({{"threshold", c.threshold},
                       {"frequency_scale", c.frequency_scale},
                       {"years", c.years},
                       {"total_count", c.total_count},
                       {"mle", c.mle},
                       {"volume", c.volume},
                       {"weight", c.weight},
                       {"bank_credibility", c.bank_credibility},
                       {"credibility", c.credibility},
                       {"arrival_rate", c.arrival_rate}});
            cells.push_back(std::move(cj));
        }
        const auto& p = b.bank;
        banks.push_back({{"bank_id", p.bank_id},
                         {"profile", p.profile},
                         {"between_variance", p.between_variance},
                         {"bank_weight", p.bank_weight},
                         {"total_weight", p.total_weight},
                         {"total_volume", p.total_volume},
                         {"credibility_profile", p.credibility_profile},
                         {"cells_fitted", p.cells},
                         {"iterations", p.iterations},
                         {"degenerate", p.degenerate},
                         {"excluded", p.excluded},
                         {"cells", cells}});
    }
    return {{"industry", fit.industry ? to_json(*fit.industry) : json(nullptr)}, {"banks", banks}};
}

SeverityFit severity_fit_from_json(const json& doc) {
    try {
        const auto& j = fit_object(doc, "severity");
        SeverityFit fit;
        fit.industry = read_industry(j);
        for (const auto& bj : j.at("banks")) {
            SeverityBankFit b;
            auto& p = b.bank;
            p.bank_id = bj.at("bank_id").get<std::string>();
            p.profile = bj.at("profile").get<double>();
            p.between_variance = bj.at("between_variance").get<double>();
            p.bank_weight = value_or(bj, "bank_weight", 1.0);
            p.total_weight = value_or(bj, "total_weight", 0.0);
            p.credibility_profile = value_or(bj, "credibility_profile", p.profile);
            p.qualified_cells = value_or<std::size_t>(bj, "qualified_cells", 0);
            p.iterations = value_or(bj, "iterations", 0);
            p.degenerate = value_or(bj, "degenerate", false);
            p.excluded = value_or(bj, "excluded", false);
            for (const auto& cj : bj.at("cells")) {
                SeverityCellEstimate c;
                c.key = read_key(cj);
                c.threshold = cj.at("threshold").get<double>();
                c.severity_scale = value_or(cj, "severity_scale", 1.0);
                c.observations = value_or<std::size_t>(cj, "observations", 0);
                c.raw_mle = read_optional(cj, "raw_mle");
                c.mle = read_optional(cj, "mle");
                c.weight = value_or(cj, "weight", 0.0);
                c.bank_credibility = value_or(cj, "bank_credibility", 0.0);
                c.credibility = cj.at("credibility").get<double>();
                c.tail_parameter = value_or(cj, "tail_parameter", c.severity_scale * c.credibility);
                c.excluded = value_or(cj, "excluded", false);
                b.cells.push_back(std::move(c));
            }
            fit.banks.push_back(std::move(b));
        }
        return fit;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed severity fit: ") + e.what());
    }
}

FrequencyFit frequency_fit_from_json(const json& doc) {
    try {
        const auto& j = fit_object(doc, "frequency");
        FrequencyFit fit;
        fit.industry = read_industry(j);
        for (const auto& bj : j.at("banks")) {
            FrequencyBankFit b;
            auto& p = b.bank;
            p.bank_id = bj.at("bank_id").get<std::string>();
            p.profile = bj.at("profile").get<double>();
            p.between_variance = bj.at("between_variance").get<double>();
            p.bank_weight = value_or(bj, "bank_weight", 1.0);
            p.total_weight = value_or(bj, "total_weight", 0.0);
            p.total_volume = value_or(bj, "total_volume", 0.0);
            p.credibility_profile = value_or(bj, "credibility_profile", p.profile);
            p.cells = value_or<std::size_t>(bj, "cells_fitted", 0);
            p.iterations = value_or(bj, "iterations", 0);
            p.degenerate = value_or(bj, "degenerate", false);
            p.excluded = value_or(bj, "excluded", false);
            for (const auto& cj : bj.at("cells")) {
                FrequencyCellEstimate c;
                c.key = read_key(cj);
                c.threshold = cj.at("threshold").get<double>();
                c.frequency_scale = value_or(cj, "frequency_scale", 1.0);
                c.years = value_or<std::size_t>(cj, "years", 0);
                c.total_count = value_or<std::int64_t>(cj, "total_count", 0);
                c.mle = value_or(cj, "mle", 0.0);
                c.volume = value_or(cj, "volume", 0.0);
                c.weight = value_or(cj, "weight", 0.0);
                c.bank_credibility = value_or(cj, "bank_credibility", 0.0);
                c.credibility = cj.at("credibility").get<double>();
                c.arrival_rate = value_or(cj, "arrival_rate", c.frequency_scale * c.credibility);
                b.cells.push_back(std::move(c));
            }
            fit.banks.push_back(std::move(b));
        }
        return fit;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed frequency fit: ") + e.what());
    }
}

json to_json(const CapitalResult& r) {
    json cells = json::array();
    for (const auto& c : r.cells) {
        json cj = key_json(c.key);
        cj.update({{"lf_rate", c.lf_rate},
                   {"lf_tail", c.lf_tail},
                   {"threshold", c.threshold},
                   {"has_hf", c.has_hf},
                   {"summary", summary_json(c.summary)}});
        cells.push_back(std::move(cj));
    }
    return {{"paths", r.paths}, {"seed", r.seed}, {"cells", cells}, {"bank", summary_json(r.bank)}};
}

json to_json(const ValidationReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        json cj = key_json(c.key);
        cj.update({{"observations", c.observations},
                   {"threshold", c.threshold},
                   {"severity_qualified", c.severity_qualified}});
        cells.push_back(std::move(cj));
    }
    json banks = json::array();
    for (const auto& b : report.banks)
        banks.push_back({{"bank_id", b.bank_id}, {"thresholds", b.thresholds}, {"consistent", b.consistent}});
    return {{"cells", cells}, {"banks", banks}, {"issues", report.issues}};
}

json to_json(const GroundTruth& truth) {
    json banks = json::array();
    for (const auto& [id, b] : truth.banks)
        banks.push_back(
            {{"bank_id", id}, {"severity_profile", b.severity_profile}, {"frequency_profile", b.frequency_profile}});
    json cells = json::array();
    for (const auto& [key, c] : truth.cells) {
        json cj = key_json(key);
        cj.update({{"severity_profile", c.severity_profile}, {"frequency_profile", c.frequency_profile}});
        cells.push_back(std::move(cj));
    }
    return {{"banks", banks}, {"cells", cells}};
}

json to_json(const SynthSpec& s) {
    const auto law = [](const MixingLaw& m) {
        return json{{"mean", m.mean}, {"bank_variance", m.bank_variance}, {"cell_variance", m.cell_variance}};
    };
    return {{"banks", s.banks},
            {"cells", s.cells},
            {"years", s.years},
            {"losses_per_cell", s.losses_per_cell},
            {"threshold", s.threshold},
            {"severity", law(s.severity)},
            {"frequency", law(s.frequency)},
            {"seed", s.seed}};
}

json make_report(const RunManifest& manifest, const std::string& kind, json result,
                 std::span<const std::string> warnings) {
    return {{"manifest", to_json(manifest)},
            {"kind", kind},
            {"warnings", std::vector<std::string>(warnings.begin(), warnings.end())},
            {"result", std::move(result)}};
}

std::string format_text(const SeverityFit& fit) {
    std::ostringstream out;
    if (fit.industry)
        out << "industry collective " << fmt3(fit.industry->collective) << "  variance "
            << fmt3(fit.industry->collective_variance) << (fit.industry->injected ? "  (injected)" : "")
            << (fit.industry->truncated ? "  (truncated)" : "") << "\n\n";
    for (const auto& b : fit.banks) {
        const auto& p = b.bank;
        out << "bank " << p.bank_id << "  profile " << fmt3(p.profile) << "  between variance "
            << fmt3(p.between_variance) << "  bank weight " << fmt3(p.bank_weight) << "  credibility profile "
            << fmt3(p.credibility_profile) << (p.degenerate ? "  (degenerate)" : "")
            << (p.excluded ? "  (excluded)" : "") << "\n";
        out << pad_right("cell", 12) << pad("K", 6) << pad("MLE", 10) << pad("weight", 10) << pad("bank", 10)
            << pad("industry", 10) << "\n";
        for (const auto& c : b.cells) {
            out << pad_right(c.key.cell_id, 12) << pad(std::to_string(c.observations), 6)
                << pad(c.mle ? fmt3(*c.mle) : "-", 10) << pad(fmt3(c.weight), 10) << pad(fmt3(c.bank_credibility), 10)
                << pad(fmt3(c.credibility), 10) << (c.excluded ? "  excluded" : "") << "\n";
        }
        out << "\n";
    }
    return out.str();
}

std::string format_text(const FrequencyFit& fit) {
    std::ostringstream out;
    if (fit.industry)
        out << "industry collective " << fmt3(fit.industry->collective) << "  variance "
            << fmt3(fit.industry->collective_variance) << (fit.industry->injected ? "  (injected)" : "")
            << (fit.industry->truncated ? "  (truncated)" : "") << "\n\n";
    for (const auto& b : fit.banks) {
        const auto& p = b.bank;
        out << "bank " << p.bank_id << "  rate profile " << fmt3(p.profile) << "  between variance "
            << fmt3(p.between_variance) << "  bank weight " << fmt3(p.bank_weight) << "  credibility profile "
            << fmt3(p.credibility_profile) << (p.degenerate ? "  (degenerate)" : "")
            << (p.excluded ? "  (excluded)" : "") << "\n";
        out << pad_right("cell", 12) << pad("years", 6) << pad("count", 8) << pad("MLE", 10) << pad("weight", 10)
            << pad("bank", 10) << pad("industry", 10) << "\n";
        for (const auto& c : b.cells)
            out << pad_right(c.key.cell_id, 12) << pad(std::to_string(c.years), 6)
                << pad(std::to_string(c.total_count), 8) << pad(fmt3(c.mle), 10) << pad(fmt3(c.weight), 10)
                << pad(fmt3(c.bank_credibility), 10) << pad(fmt3(c.credibility), 10) << "\n";
        out << "\n";
    }
    return out.str();
}

std::string format_text(const CapitalResult& r) {
    std::ostringstream out;
    out << "paths " << r.paths << "  seed " << r.seed << "\n";
    const auto row = [&](const std::string& name, const SampleSummary& s) {
        out << pad_right(name, 24) << pad(fmt3(s.mean), 14) << (s.mean_convergent ? " " : "*");
        for (const auto& q : s.quantiles)
            out << pad(fmt3(q.estimate), 16) << " [" << fmt3(q.lower) << ", " << fmt3(q.upper) << "]";
        out << "\n";
    };
    out << pad_right("cell", 24) << pad("mean", 14) << " ";
    for (const auto& q : r.bank.quantiles) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "VaR %g", q.probability);
        out << pad(buf, 16) << "  (95% band)";
    }
    out << "\n";
    for (const auto& c : r.cells) row(to_string(c.key), c.summary);
    row("total", r.bank);
    if (!r.bank.mean_convergent) out << "* infinite mean: sample mean does not converge\n";
    return out.str();
}

void write_sample_binary(const std::filesystem::path& path, std::span<const double> sample) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (double v : sample) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        char bytes[8];
        std::memcpy(bytes, &bits, 8);
        out.write(bytes, 8);
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<double> read_sample_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<double> out;
    char bytes[8];
    while (in.read(bytes, 8)) {
        std::uint64_t bits;
        std::memcpy(&bits, bytes, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out.push_back(std::bit_cast<double>(bits));
    }
    if (in.gcount() != 0) throw ParseError(path.string() + ": truncated sample file");
    return out;
}

void write_json(const std::filesystem::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace opcred
