#pragma once

// JSON and text reports for fits, capital runs and synthetic datasets.

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "opcred/capital.hpp"
#include "opcred/domain.hpp"
#include "opcred/frequency.hpp"
#include "opcred/severity.hpp"
#include "opcred/synth.hpp"

namespace opcred {

inline constexpr const char* kToolName = "opcred";
inline constexpr const char* kToolVersion = "1.0.0";

/// Everything needed to rerun a command: embedded in every report.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> inputs;
    nlohmann::json config = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& manifest);

nlohmann::json to_json(const IndustryProfile& industry);
nlohmann::json to_json(const SeverityFit& fit);
nlohmann::json to_json(const FrequencyFit& fit);
nlohmann::json to_json(const CapitalResult& result);
nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const GroundTruth& truth);
nlohmann::json to_json(const SynthSpec& spec);

/// Inverse of to_json for fit reports (the "fit" object of a report or the
/// whole report document).
SeverityFit severity_fit_from_json(const nlohmann::json& doc);
FrequencyFit frequency_fit_from_json(const nlohmann::json& doc);

/// Report document: {"manifest": ..., "kind": ..., "result": ...}.
nlohmann::json make_report(const RunManifest& manifest, const std::string& kind, nlohmann::json result,
                           std::span<const std::string> warnings = {});

/// Fixed-width tables rounded to 3 decimals.
std::string format_text(const SeverityFit& fit);
std::string format_text(const FrequencyFit& fit);
std::string format_text(const CapitalResult& result);

/// Little-endian IEEE-754 doubles, no header.
void write_sample_binary(const std::filesystem::path& path, std::span<const double> sample);
std::vector<double> read_sample_binary(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace opcred
