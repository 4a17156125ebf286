#include <doctest.h>

#include <cmath>
#include <random>

#include "opcred/calibration.hpp"
#include "opcred/severity.hpp"
#include "support.hpp"

using namespace opcred;

namespace {

CellConfigSet single(double threshold = 1.0) {
    CellConfigSet set;
    set.insert({{"b", "c"}, threshold, 1.0, 1.0});
    return set;
}

double scale_of(const std::vector<SeverityOpinion>& ops, double reference = 1.0, double threshold = 1.0) {
    return calibrate_severity_scales(ops, single(threshold), reference).at({"b", "c"});
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("single severity opinions") {
    CHECK(scale_of({{{"b", "c"}, 10.0, 0.1}}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(scale_of({{{"b", "c"}, 10.0, 0.01}}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(scale_of({{{"b", "c"}, 10.0, 0.01}}, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("consistent opinions recover the exact Pareto scale") {
    CHECK(scale_of({{{"b", "c"}, 10.0, 0.1}, {{"b", "c"}, 100.0, 0.01}}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("least squares reduces to the single-opinion formula") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> level(1.5, 50.0), prob(0.001, 0.5), th(0.5, 1.4);
    for (int i = 0; i < 100; ++i) {
        const double t = th(rng), T = level(rng), q = prob(rng);
        const double direct = -std::log(q) / std::log(T / t);
        CHECK(scale_of({{{"b", "c"}, T, q}}, 1.0, t) == doctest::Approx(direct).epsilon(1e-13));
    }
}

TEST_CASE("pooled opinions minimise the log-space residual") {
    const std::vector<SeverityOpinion> ops{{{"b", "c"}, 5.0, 0.2}, {{"b", "c"}, 20.0, 0.01}, {{"b", "c"}, 3.0, 0.3}};
    const double a = scale_of(ops);
    const auto loss = [&](double s) {
        double sum = 0.0;
        for (const auto& o : ops) {
            const double r = s * std::log(o.level) + std::log(o.exceedance_probability);
            sum += r * r;
        }
        return sum;
    };
    CHECK(loss(a) < loss(a * 1.001));
    CHECK(loss(a) < loss(a * 0.999));
}

TEST_CASE("powering the probabilities scales the severity scale") {
    const std::vector<SeverityOpinion> ops{{{"b", "c"}, 5.0, 0.2}, {{"b", "c"}, 20.0, 0.01}};
    auto powered = ops;
    for (auto& o : powered) o.exceedance_probability = std::pow(o.exceedance_probability, 3.0);
    CHECK(scale_of(powered) == doctest::Approx(3.0 * scale_of(ops)).epsilon(1e-13));
}

TEST_CASE("common rescaling of severity scales leaves tail parameters unchanged") {
    const auto panel = testing::table1_panel();
    std::map<CellKey, double> base, tripled;
    for (std::size_t j = 0; j < 10; ++j) {
        const CellKey key{"bank1", "cell" + std::to_string(j + 1)};
        base[key] = 0.5 + 0.1 * static_cast<double>(j);
        tripled[key] = 3.0 * base[key];
    }
    const auto records = panel.records();
    const auto a = fit_bank_severity(LossPanel::from_records(records, apply_scales(panel.configs(), base, {})), "bank1");
    const auto b =
        fit_bank_severity(LossPanel::from_records(records, apply_scales(panel.configs(), tripled, {})), "bank1");
    for (std::size_t j = 0; j < 10; ++j)
        CHECK(b.cells[j].tail_parameter == doctest::Approx(a.cells[j].tail_parameter).epsilon(1e-10));
}

TEST_CASE("severity opinion errors") {
    CHECK_THROWS_AS(scale_of({{{"b", "c"}, 1.0, 0.1}}), DomainError);
    CHECK_THROWS_AS(scale_of({{{"b", "c"}, 0.5, 0.1}}), DomainError);
    CHECK_THROWS_AS(scale_of({{{"b", "c"}, 10.0, 0.0}}), DomainError);
    CHECK_THROWS_AS(scale_of({{{"b", "c"}, 10.0, 1.0}}), DomainError);
}

TEST_CASE("frequency scales") {
    const std::vector<FrequencyOpinion> five{{{"b", "c"}, 5.0}};
    CHECK(calibrate_frequency_scales(five).at({"b", "c"}) == 5.0);
    CHECK(calibrate_frequency_scales(five, 2.0).at({"b", "c"}) == 2.5);
    std::vector<FrequencyOpinion> ones;
    for (int j = 0; j < 10; ++j) ones.push_back({{"bank1", "cell" + std::to_string(j + 1)}, 1.0});
    for (const auto& [key, nu] : calibrate_frequency_scales(ones)) CHECK(nu == 1.0);
    const std::vector<FrequencyOpinion> bad{{{"b", "c"}, 0.0}};
    CHECK_THROWS_AS(calibrate_frequency_scales(bad), DomainError);
}

TEST_CASE("opinions file") {
    const auto ops = load_opinions(testing::data_dir() / "fixtures" / "opinions.json");
    CHECK(ops.severity.size() == 2);
    CHECK(ops.frequency.size() == 1);
    const auto dir = testing::scratch_dir("opinions");
    write_text_file(dir / "bad.json", R"([{"bank_id": "b", "cell_id": "c", "kind": "other"}])");
    CHECK_THROWS_AS(load_opinions(dir / "bad.json"), ParseError);
}

TEST_CASE("apply_scales keeps cells without opinions") {
    const auto configs = testing::table1_panel().configs();
    const auto out = apply_scales(configs, {{{"bank1", "cell1"}, 2.0}}, {{{"bank1", "cell2"}, 5.0}});
    CHECK(out.at({"bank1", "cell1"}).severity_scale == 2.0);
    CHECK(out.at({"bank1", "cell2"}).frequency_scale == 5.0);
    CHECK(out.at({"bank1", "cell3"}).severity_scale == 1.0);
    CHECK_THROWS_AS(apply_scales(configs, {{{"bank9", "x"}, 2.0}}, {}), ConfigError);
}

}
