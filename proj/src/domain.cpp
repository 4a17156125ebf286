#include "opcred/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "opcred/errors.hpp"

namespace opcred {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) return false;
    const char* first = text.data();
    if (*first == '+') ++first;
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

/// Calls fn(fields, line_no) for every non-blank data line after checking the header.
template <typename Fn>
void for_each_csv_row(const std::string& text, std::string_view expected_header, std::size_t n_fields, Fn fn) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        view = trim(view);
        if (view.empty()) continue;
        if (!header_seen) {
            std::string normalized;
            for (auto f : split_fields(view)) {
                if (!normalized.empty()) normalized += ',';
                normalized += f;
            }
            if (normalized != expected_header)
                throw ParseError("expected header '" + std::string(expected_header) + "', got '" + std::string(view) + "'",
                                 line_no);
            header_seen = true;
            continue;
        }
        auto fields = split_fields(view);
        if (fields.size() != n_fields)
            throw ParseError("expected " + std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()),
                             line_no);
        for (auto f : fields)
            if (f.empty()) throw ParseError("empty field", line_no);
        fn(fields, line_no);
    }
    if (!header_seen) throw ParseError("missing header '" + std::string(expected_header) + "'");
}

void require_configured(const CellConfigSet& configs, const CellKey& key) {
    if (!configs.contains(key)) throw ConfigError("no cell configuration for " + to_string(key));
}

}  // namespace

std::string to_string(const CellKey& key) { return key.bank_id + "/" + key.cell_id; }

std::strong_ordering natural_compare(std::string_view a, std::string_view b) {
    const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (is_digit(a[i]) && is_digit(b[j])) {
            const auto si = i, sj = j;
            while (i < a.size() && is_digit(a[i])) ++i;
            while (j < b.size() && is_digit(b[j])) ++j;
            auto da = a.substr(si, i - si), db = b.substr(sj, j - sj);
            const auto strip = [](std::string_view d) {
                while (d.size() > 1 && d.front() == '0') d.remove_prefix(1);
                return d;
            };
            const auto na = strip(da), nb = strip(db);
            if (na.size() != nb.size()) return na.size() <=> nb.size();
            if (const auto c = na.compare(nb); c != 0) return c <=> 0;
            // "01" vs "1": fall back to the raw text so distinct strings never tie
            if (const auto c = da.compare(db); c != 0) return c <=> 0;
        } else {
            if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) <=> static_cast<unsigned char>(b[j]);
            ++i;
            ++j;
        }
    }
    return (a.size() - i) <=> (b.size() - j);
}

std::strong_ordering CellKey::operator<=>(const CellKey& other) const {
    if (const auto c = natural_compare(bank_id, other.bank_id); c != 0) return c;
    return natural_compare(cell_id, other.cell_id);
}

namespace {

struct NaturalLess {
    bool operator()(const std::string& a, const std::string& b) const { return natural_compare(a, b) < 0; }
};

}  // namespace

// CellConfigSet --------------------------------------------------------------

CellConfigSet::CellConfigSet(std::vector<CellConfig> cells) {
    for (const auto& c : cells) insert(c);
}

void CellConfigSet::insert(const CellConfig& config) {
    const auto name = to_string(config.key);
    if (config.key.bank_id.empty() || config.key.cell_id.empty())
        throw ConfigError("cell configuration with empty bank_id or cell_id");
    if (!(config.threshold > 0.0)) throw ConfigError("threshold must be > 0 for " + name);
    if (!(config.severity_scale > 0.0)) throw ConfigError("severity_scale must be > 0 for " + name);
    if (!(config.frequency_scale > 0.0)) throw ConfigError("frequency_scale must be > 0 for " + name);
    if (!cells_.emplace(config.key, config).second) throw ConfigError("duplicate cell configuration " + name);
}

const CellConfig* CellConfigSet::find(const CellKey& key) const {
    const auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
}

const CellConfig& CellConfigSet::at(const CellKey& key) const {
    if (const auto* c = find(key)) return *c;
    throw ConfigError("no cell configuration for " + to_string(key));
}

std::vector<std::string> CellConfigSet::banks() const {
    std::vector<std::string> out;
    for (const auto& [key, _] : cells_)
        if (out.empty() || out.back() != key.bank_id) out.push_back(key.bank_id);
    return out;
}

std::vector<CellConfig> CellConfigSet::cells_of(const std::string& bank_id) const {
    std::vector<CellConfig> out;
    for (const auto& [key, c] : cells_)
        if (key.bank_id == bank_id) out.push_back(c);
    return out;
}

std::vector<CellConfig> CellConfigSet::all() const {
    std::vector<CellConfig> out;
    out.reserve(cells_.size());
    for (const auto& [_, c] : cells_) out.push_back(c);
    return out;
}

// LossPanel ------------------------------------------------------------------

LossPanel LossPanel::from_records(std::span<const LossRecord> records, CellConfigSet configs) {
    LossPanel panel;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        require_configured(configs, r.key);
        const double threshold = configs.at(r.key).threshold;
        if (!(r.amount >= threshold))
            throw ValidationError("loss " + format_double(r.amount) + " in " + to_string(r.key) + " (record " +
                                  std::to_string(i + 1) + ") is below the cell threshold " + format_double(threshold));
        panel.losses_[r.key].push_back(r.amount);
    }
    panel.configs_ = std::move(configs);
    return panel;
}

std::vector<CellKey> LossPanel::cells() const {
    std::vector<CellKey> out;
    for (const auto& [key, _] : losses_) out.push_back(key);
    return out;
}

std::span<const double> LossPanel::losses(const CellKey& key) const {
    const auto it = losses_.find(key);
    if (it == losses_.end()) return {};
    return it->second;
}

std::vector<std::string> LossPanel::banks() const {
    std::set<std::string, NaturalLess> ids;
    for (const auto& b : configs_.banks()) ids.insert(b);
    for (const auto& [key, _] : losses_) ids.insert(key.bank_id);
    return {ids.begin(), ids.end()};
}

LossPanel LossPanel::restrict_to_bank(const std::string& bank_id) const {
    LossPanel out;
    for (const auto& c : configs_.cells_of(bank_id)) out.configs_.insert(c);
    for (const auto& [key, v] : losses_)
        if (key.bank_id == bank_id) out.losses_.emplace(key, v);
    return out;
}

std::vector<LossRecord> LossPanel::records() const {
    std::vector<LossRecord> out;
    for (const auto& [key, v] : losses_)
        for (double x : v) out.push_back({key, x});
    return out;
}

// CountPanel -----------------------------------------------------------------

CountPanel CountPanel::from_records(std::span<const CountRecord> records, CellConfigSet configs) {
    CountPanel panel;
    for (const auto& r : records) {
        require_configured(configs, r.key);
        if (r.count < 0)
            throw ValidationError("negative count " + std::to_string(r.count) + " for " + to_string(r.key) + " year " +
                                  std::to_string(r.year));
        panel.counts_[r.key].push_back({r.year, r.count});
    }
    for (auto& [key, years] : panel.counts_) {
        std::sort(years.begin(), years.end(), [](const YearCount& a, const YearCount& b) { return a.year < b.year; });
        const auto dup = std::adjacent_find(years.begin(), years.end(),
                                            [](const YearCount& a, const YearCount& b) { return a.year == b.year; });
        if (dup != years.end())
            throw ValidationError("duplicate count record for (" + key.bank_id + ", " + key.cell_id + ", " +
                                  std::to_string(dup->year) + ")");
    }
    panel.configs_ = std::move(configs);
    return panel;
}

std::vector<CellKey> CountPanel::cells() const {
    std::vector<CellKey> out;
    for (const auto& [key, _] : counts_) out.push_back(key);
    return out;
}

std::span<const YearCount> CountPanel::years(const CellKey& key) const {
    const auto it = counts_.find(key);
    if (it == counts_.end()) return {};
    return it->second;
}

std::int64_t CountPanel::total_count(const CellKey& key) const {
    std::int64_t total = 0;
    for (const auto& y : years(key)) total += y.count;
    return total;
}

std::vector<std::int64_t> CountPanel::counts(const CellKey& key) const {
    std::vector<std::int64_t> out;
    for (const auto& y : years(key)) out.push_back(y.count);
    return out;
}

std::vector<std::string> CountPanel::banks() const {
    std::set<std::string, NaturalLess> ids;
    for (const auto& [key, _] : counts_) ids.insert(key.bank_id);
    return {ids.begin(), ids.end()};
}

CountPanel CountPanel::restrict_to_bank(const std::string& bank_id) const {
    CountPanel out;
    for (const auto& c : configs_.cells_of(bank_id)) out.configs_.insert(c);
    for (const auto& [key, v] : counts_)
        if (key.bank_id == bank_id) out.counts_.emplace(key, v);
    return out;
}

std::vector<CountRecord> CountPanel::records() const {
    std::vector<CountRecord> out;
    for (const auto& [key, v] : counts_)
        for (const auto& y : v) out.push_back({key, y.year, y.count});
    return out;
}

// Validation -----------------------------------------------------------------

std::size_t ValidationReport::qualified_cells() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const CellValidation& c) { return c.severity_qualified; }));
}

ValidationReport validate_panel(const LossPanel& panel) {
    ValidationReport report;
    for (const auto& config : panel.configs().all()) {
        CellValidation v;
        v.key = config.key;
        v.threshold = config.threshold;
        v.observations = panel.observation_count(config.key);
        v.severity_qualified = v.observations >= kMinSeverityObservations;
        if (!v.severity_qualified)
            report.issues.push_back(to_string(v.key) + ": " + std::to_string(v.observations) +
                                    " losses, excluded from severity credibility");
        for (double x : panel.losses(config.key))
            if (!(x >= config.threshold)) report.issues.push_back(to_string(v.key) + ": loss below threshold");
        report.cells.push_back(v);
    }
    for (const auto& bank : panel.banks()) {
        BankThresholdCheck check{bank, {}, true};
        std::set<double> distinct;
        for (const auto& c : panel.configs().cells_of(bank)) distinct.insert(c.threshold);
        check.thresholds.assign(distinct.begin(), distinct.end());
        // per-cell thresholds are admissible for severity
        report.banks.push_back(check);
    }
    return report;
}

ValidationReport validate_panel(const CountPanel& panel) {
    ValidationReport report;
    for (const auto& key : panel.cells()) {
        CellValidation v;
        v.key = key;
        v.threshold = panel.configs().at(key).threshold;
        v.observations = panel.observed_years(key);
        v.severity_qualified = false;
        report.cells.push_back(v);
    }
    for (const auto& bank : panel.banks()) {
        BankThresholdCheck check{bank, {}, true};
        std::set<double> distinct;
        for (const auto& key : panel.cells())
            if (key.bank_id == bank) distinct.insert(panel.configs().at(key).threshold);
        check.thresholds.assign(distinct.begin(), distinct.end());
        check.consistent = distinct.size() <= 1;
        if (!check.consistent)
            report.issues.push_back("bank " + bank + ": cells carry " + std::to_string(distinct.size()) +
                                    " distinct thresholds under the frequency model");
        report.banks.push_back(check);
    }
    return report;
}

// File formats ---------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

CellConfigSet load_cell_configs(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError(path.string() + ": cell config must be a JSON array");
    CellConfigSet set;
    for (const auto& item : doc) {
        try {
            CellConfig c;
            c.key.bank_id = item.at("bank_id").get<std::string>();
            c.key.cell_id = item.at("cell_id").get<std::string>();
            c.threshold = item.at("threshold").get<double>();
            c.severity_scale = item.value("severity_scale", 1.0);
            c.frequency_scale = item.value("frequency_scale", 1.0);
            set.insert(c);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": bad cell config entry: " + e.what());
        }
    }
    return set;
}

void write_cell_configs(const std::filesystem::path& path, const CellConfigSet& configs) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& c : configs.all())
        doc.push_back({{"bank_id", c.key.bank_id},
                       {"cell_id", c.key.cell_id},
                       {"threshold", c.threshold},
                       {"severity_scale", c.severity_scale},
                       {"frequency_scale", c.frequency_scale}});
    write_text_file(path, doc.dump(2) + "\n");
}

std::vector<LossRecord> parse_loss_csv(const std::string& text) {
    std::vector<LossRecord> out;
    for_each_csv_row(text, "bank_id,cell_id,amount", 3, [&](const auto& f, std::size_t line) {
        LossRecord r{{std::string(f[0]), std::string(f[1])}, 0.0};
        if (!parse_number(f[2], r.amount) || !std::isfinite(r.amount))
            throw ParseError("invalid amount '" + std::string(f[2]) + "'", line);
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<CountRecord> parse_count_csv(const std::string& text) {
    std::vector<CountRecord> out;
    for_each_csv_row(text, "bank_id,cell_id,year,count", 4, [&](const auto& f, std::size_t line) {
        CountRecord r{{std::string(f[0]), std::string(f[1])}, 0, 0};
        if (!parse_number(f[2], r.year)) throw ParseError("invalid year '" + std::string(f[2]) + "'", line);
        if (!parse_number(f[3], r.count)) throw ParseError("invalid count '" + std::string(f[3]) + "'", line);
        out.push_back(std::move(r));
    });
    return out;
}

LossPanel load_losses(const std::filesystem::path& path, CellConfigSet configs) {
    const auto text = read_text_file(path);
    try {
        const auto records = parse_loss_csv(text);
        return LossPanel::from_records(records, std::move(configs));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

CountPanel load_counts(const std::filesystem::path& path, CellConfigSet configs) {
    const auto text = read_text_file(path);
    try {
        const auto records = parse_count_csv(text);
        return CountPanel::from_records(records, std::move(configs));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string format_loss_csv(std::span<const LossRecord> records) {
    std::string out = "bank_id,cell_id,amount\n";
    for (const auto& r : records) out += r.key.bank_id + "," + r.key.cell_id + "," + format_double(r.amount) + "\n";
    return out;
}

std::string format_count_csv(std::span<const CountRecord> records) {
    std::string out = "bank_id,cell_id,year,count\n";
    for (const auto& r : records)
        out += r.key.bank_id + "," + r.key.cell_id + "," + std::to_string(r.year) + "," + std::to_string(r.count) + "\n";
    return out;
}

void write_losses(const std::filesystem::path& path, const LossPanel& panel) {
    write_text_file(path, format_loss_csv(panel.records()));
}

void write_counts(const std::filesystem::path& path, const CountPanel& panel) {
    write_text_file(path, format_count_csv(panel.records()));
}

}  // namespace opcred
