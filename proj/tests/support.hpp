#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "opcred/domain.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return OPCRED_DATA_DIR; }

inline opcred::LossPanel table1_panel() {
    const auto dir = data_dir() / "table1";
    return opcred::load_losses(dir / "losses.csv", opcred::load_cell_configs(dir / "config.json"));
}

// Expected three-decimal rows for the bundled ten-cell bank.
inline constexpr std::array<double, 10> kTable1Mle{2.499, 1.280, 3.688, 2.487, 2.264,
                                                   1.992, 6.963, 3.335, 4.194, 2.870};
inline constexpr std::array<double, 10> kTable1BankRow{2.863, 2.319, 3.394, 2.858, 2.759,
                                                       2.637, 4.855, 3.236, 3.620, 3.029};
inline constexpr std::array<double, 10> kTable1IndustryRow{3.085, 2.541, 3.616, 3.080, 2.981,
                                                           2.859, 5.077, 3.458, 3.842, 3.251};

// Scratch directory unique to the running test case.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("opcred_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
