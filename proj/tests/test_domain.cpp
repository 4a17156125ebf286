#include <doctest.h>

#include <algorithm>
#include <random>

#include "opcred/domain.hpp"
#include "opcred/errors.hpp"
#include "support.hpp"

using namespace opcred;

namespace {

CellConfigSet two_cells(double t1 = 1.0, double t2 = 1.0) {
    CellConfigSet set;
    set.insert({{"b", "c1"}, t1, 1.0, 1.0});
    set.insert({{"b", "c2"}, t2, 1.0, 1.0});
    return set;
}

}  // namespace

TEST_SUITE("domain") {

TEST_CASE("reference bank panel loads with ten losses per cell") {
    const auto panel = testing::table1_panel();
    REQUIRE(panel.cells().size() == 10);
    for (const auto& key : panel.cells()) CHECK(panel.observation_count(key) == 10);
    CHECK(panel.losses({"bank1", "cell2"})[0] == 9.039);
}

TEST_CASE("empty loss file with header gives an empty panel") {
    const auto records = parse_loss_csv("bank_id,cell_id,amount\n");
    const auto panel = LossPanel::from_records(records, two_cells());
    CHECK(panel.empty());
    CHECK(panel.cells().empty());
}

TEST_CASE("loss below threshold is rejected") {
    const auto records = parse_loss_csv("bank_id,cell_id,amount\nb,c1,0.9\n");
    CHECK_THROWS_AS(LossPanel::from_records(records, two_cells()), ValidationError);
}

TEST_CASE("loss in an unknown cell is a config error") {
    const auto records = parse_loss_csv("bank_id,cell_id,amount\nb,c9,2.0\n");
    CHECK_THROWS_AS(LossPanel::from_records(records, two_cells()), ConfigError);
}

TEST_CASE("malformed rows report their line number") {
    try {
        parse_loss_csv("bank_id,cell_id,amount\nb,c1,1.5\nb,c1,abc\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_loss_csv("bank,cell,amount\n"), ParseError);
    CHECK_THROWS_AS(parse_count_csv("bank_id,cell_id,year,count\nb,c1,2001\n"), ParseError);
}

TEST_CASE("counts load sorted with per-cell years") {
    const auto records = parse_count_csv("bank_id,cell_id,year,count\nb,c1,3,1\nb,c1,1,2\nb,c1,2,4\n"
                                         "b,c2,1,0\nb,c2,2,0\nb,c2,3,5\n");
    const auto panel = CountPanel::from_records(records, two_cells());
    CHECK(panel.observed_years({"b", "c1"}) == 3);
    CHECK(panel.observed_years({"b", "c2"}) == 3);
    const auto years = panel.years({"b", "c1"});
    CHECK(years[0].year == 1);
    CHECK(years[2].year == 3);
}

TEST_CASE("counts {2, 4} sum to 6") {
    const auto records = parse_count_csv("bank_id,cell_id,year,count\nb,c1,1,2\nb,c1,2,4\n");
    const auto panel = CountPanel::from_records(records, two_cells());
    CHECK(panel.total_count({"b", "c1"}) == 6);
}

TEST_CASE("duplicate year and negative counts are rejected") {
    const auto dup = parse_count_csv("bank_id,cell_id,year,count\nb,c1,1,2\nb,c1,1,3\n");
    try {
        CountPanel::from_records(dup, two_cells());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("(b, c1, 1)") != std::string::npos);
    }
    const auto negative = parse_count_csv("bank_id,cell_id,year,count\nb,c1,1,-2\n");
    CHECK_THROWS_AS(CountPanel::from_records(negative, two_cells()), ValidationError);
}

TEST_CASE("config validation") {
    CellConfigSet set;
    CHECK_THROWS_AS(set.insert({{"b", "c"}, 0.0, 1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(set.insert({{"b", "c"}, 1.0, -1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(set.insert({{"b", "c"}, 1.0, 1.0, 0.0}), ConfigError);
    set.insert({{"b", "c"}, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(set.insert({{"b", "c"}, 1.0, 1.0, 1.0}), ConfigError);
}

TEST_CASE("config file scales default to one") {
    const auto dir = testing::scratch_dir("config_defaults");
    write_text_file(dir / "c.json", R"([{"bank_id": "b", "cell_id": "c1", "threshold": 2.5}])");
    const auto set = load_cell_configs(dir / "c.json");
    const auto& c = set.at({"b", "c1"});
    CHECK(c.threshold == 2.5);
    CHECK(c.severity_scale == 1.0);
    CHECK(c.frequency_scale == 1.0);
}

TEST_CASE("missing files raise io errors") {
    CHECK_THROWS_AS(load_cell_configs("/nonexistent/config.json"), IoError);
    CHECK_THROWS_AS(load_losses("/nonexistent/losses.csv", two_cells()), IoError);
}

TEST_CASE("validate_panel on the reference bank qualifies every cell") {
    const auto report = validate_panel(testing::table1_panel());
    CHECK(report.qualified_cells() == 10);
    CHECK(report.ok());
    for (const auto& c : report.cells) CHECK(c.observations == 10);
}

TEST_CASE("validate_panel marks exactly the cells with fewer than 3 losses") {
    CellConfigSet set;
    for (int j = 0; j < 5; ++j) set.insert({{"b", "c" + std::to_string(j)}, 1.0, 1.0, 1.0});
    std::vector<LossRecord> records;
    for (int j = 0; j < 5; ++j)
        for (int k = 0; k < j; ++k) records.push_back({{"b", "c" + std::to_string(j)}, 1.0 + k + j});
    const auto report = validate_panel(LossPanel::from_records(records, set));
    for (const auto& c : report.cells) {
        CHECK(c.severity_qualified == (c.observations >= 3));
        if (c.observations == 2) {
            const auto hit = std::ranges::any_of(report.issues, [&](const std::string& s) {
                return s.find(to_string(c.key)) != std::string::npos &&
                       s.find("excluded from severity credibility") != std::string::npos;
            });
            CHECK(hit);
        }
    }
    CHECK(report.qualified_cells() == 2);
}

TEST_CASE("mixed thresholds in one bank are flagged for the frequency model") {
    const auto records = parse_count_csv("bank_id,cell_id,year,count\nb,c1,1,2\nb,c2,1,4\n");
    const auto report = validate_panel(CountPanel::from_records(records, two_cells(1.0, 2.0)));
    REQUIRE(report.banks.size() == 1);
    CHECK_FALSE(report.banks[0].consistent);
    CHECK_FALSE(report.ok());
}

TEST_CASE("loss csv round trip preserves values exactly") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<LossRecord> records;
    for (int i = 0; i < 200; ++i) records.push_back({{"b", i % 2 ? "c1" : "c2"}, 1.0 + u(rng)});
    const auto panel = LossPanel::from_records(records, two_cells());
    const auto dir = testing::scratch_dir("loss_roundtrip");
    write_losses(dir / "l.csv", panel);
    const auto again = load_losses(dir / "l.csv", two_cells());
    for (const auto& key : panel.cells()) {
        auto a = std::vector<double>(panel.losses(key).begin(), panel.losses(key).end());
        auto b = std::vector<double>(again.losses(key).begin(), again.losses(key).end());
        std::ranges::sort(a);
        std::ranges::sort(b);
        CHECK(a == b);
    }
}

TEST_CASE("count csv round trip") {
    const auto records = parse_count_csv("bank_id,cell_id,year,count\nb,c1,2003,2\nb,c1,1999,4\nb,c2,2000,0\n");
    const auto panel = CountPanel::from_records(records, two_cells());
    const auto dir = testing::scratch_dir("count_roundtrip");
    write_counts(dir / "n.csv", panel);
    const auto again = load_counts(dir / "n.csv", two_cells());
    CHECK(again.counts({"b", "c1"}) == panel.counts({"b", "c1"}));
    CHECK(again.counts({"b", "c2"}) == panel.counts({"b", "c2"}));
}

TEST_CASE("csv tolerates a byte order mark, CRLF and blank lines") {
    const auto records = parse_loss_csv("\xEF\xBB\xBF" "bank_id,cell_id,amount\r\nb,c1,1.5\r\n\r\nb,c2,2\r\n");
    CHECK(records.size() == 2);
}

TEST_CASE("every panel loss is at or above its threshold") {
    const auto panel = testing::table1_panel();
    for (const auto& key : panel.cells())
        for (double x : panel.losses(key)) CHECK(x >= panel.configs().at(key).threshold);
}

}
