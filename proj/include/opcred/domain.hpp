#pragma once

// Multi-bank / multi-cell data model: cell configuration, loss and count
// panels, and their CSV/JSON file formats.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opcred {

struct CellKey {
    std::string bank_id;
    std::string cell_id;

    bool operator==(const CellKey&) const = default;
    std::strong_ordering operator<=>(const CellKey& other) const;
};

/// Orders embedded digit runs by value, so "cell2" < "cell10".
std::strong_ordering natural_compare(std::string_view a, std::string_view b);

std::string to_string(const CellKey& key);

/// A priori description of one risk cell: reporting threshold L and the
/// expert scale constants a (severity) and nu (frequency).
struct CellConfig {
    CellKey key;
    double threshold = 1.0;
    double severity_scale = 1.0;
    double frequency_scale = 1.0;
};

/// Keyed collection of cell configurations. Throws ConfigError on invalid
/// entries (non-positive threshold or scales, duplicate keys).
class CellConfigSet {
public:
    CellConfigSet() = default;
    explicit CellConfigSet(std::vector<CellConfig> cells);

    void insert(const CellConfig& config);
    const CellConfig* find(const CellKey& key) const;
    const CellConfig& at(const CellKey& key) const;
    bool contains(const CellKey& key) const { return find(key) != nullptr; }

    std::vector<std::string> banks() const;
    std::vector<CellConfig> cells_of(const std::string& bank_id) const;
    std::vector<CellConfig> all() const;
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

private:
    std::map<CellKey, CellConfig> cells_;
};

struct LossRecord {
    CellKey key;
    double amount = 0.0;
};

struct CountRecord {
    CellKey key;
    int year = 0;
    std::int64_t count = 0;
};

/// Severity observations above threshold grouped by cell. Immutable once built.
class LossPanel {
public:
    LossPanel() = default;

    /// Groups and validates records. Every record must reference a
    /// configured cell and satisfy amount >= threshold.
    static LossPanel from_records(std::span<const LossRecord> records, CellConfigSet configs);

    const CellConfigSet& configs() const { return configs_; }
    /// Cells with at least one recorded loss, in key order.
    std::vector<CellKey> cells() const;
    std::span<const double> losses(const CellKey& key) const;
    std::size_t observation_count(const CellKey& key) const { return losses(key).size(); }
    /// Banks with at least one configured or observed cell.
    std::vector<std::string> banks() const;
    LossPanel restrict_to_bank(const std::string& bank_id) const;
    std::vector<LossRecord> records() const;
    bool empty() const { return losses_.empty(); }

private:
    std::map<CellKey, std::vector<double>> losses_;
    CellConfigSet configs_;
};

struct YearCount {
    int year = 0;
    std::int64_t count = 0;
};

/// Annual exceedance counts grouped by cell, years sorted ascending.
class CountPanel {
public:
    CountPanel() = default;

    /// Rejects duplicate (bank, cell, year), negative counts and unknown cells.
    static CountPanel from_records(std::span<const CountRecord> records, CellConfigSet configs);

    const CellConfigSet& configs() const { return configs_; }
    std::vector<CellKey> cells() const;
    std::span<const YearCount> years(const CellKey& key) const;
    std::size_t observed_years(const CellKey& key) const { return years(key).size(); }
    std::int64_t total_count(const CellKey& key) const;
    std::vector<std::int64_t> counts(const CellKey& key) const;
    std::vector<std::string> banks() const;
    CountPanel restrict_to_bank(const std::string& bank_id) const;
    std::vector<CountRecord> records() const;
    bool empty() const { return counts_.empty(); }

private:
    std::map<CellKey, std::vector<YearCount>> counts_;
    CellConfigSet configs_;
};

/// Minimum number of losses for a cell to enter severity credibility.
inline constexpr std::size_t kMinSeverityObservations = 3;

struct CellValidation {
    CellKey key;
    std::size_t observations = 0;
    double threshold = 0.0;
    bool severity_qualified = false;
};

struct BankThresholdCheck {
    std::string bank_id;
    std::vector<double> thresholds;  // distinct values, ascending
    bool consistent = true;
};

struct ValidationReport {
    std::vector<CellValidation> cells;
    std::vector<BankThresholdCheck> banks;
    std::vector<std::string> issues;

    std::size_t qualified_cells() const;
    bool ok() const { return issues.empty(); }
};

/// Per-cell observation counts and severity qualification (K >= 3).
ValidationReport validate_panel(const LossPanel& panel);
/// Per-cell observed years and per-bank common-threshold check.
ValidationReport validate_panel(const CountPanel& panel);

CellConfigSet load_cell_configs(const std::filesystem::path& path);
void write_cell_configs(const std::filesystem::path& path, const CellConfigSet& configs);

LossPanel load_losses(const std::filesystem::path& path, CellConfigSet configs);
CountPanel load_counts(const std::filesystem::path& path, CellConfigSet configs);

std::vector<LossRecord> parse_loss_csv(const std::string& text);
std::vector<CountRecord> parse_count_csv(const std::string& text);

void write_losses(const std::filesystem::path& path, const LossPanel& panel);
void write_counts(const std::filesystem::path& path, const CountPanel& panel);
std::string format_loss_csv(std::span<const LossRecord> records);
std::string format_count_csv(std::span<const CountRecord> records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace opcred
