#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hfsnn/market_data.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("hfsnn_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<hfsnn::VwapBar> bars_from(const std::vector<double>& prices, std::int64_t volume = 10) {
    std::vector<hfsnn::VwapBar> bars;
    for (std::size_t i = 0; i < prices.size(); ++i) bars.push_back({i, prices[i], volume});
    return bars;
}

inline std::vector<double> random_walk(std::size_t n, std::uint64_t seed, double start = 100.0, double vol = 1e-3) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> z(0.0, vol);
    std::vector<double> p(n);
    double x = start;
    for (double& v : p) {
        v = x;
        x *= 1.0 + z(g);
    }
    return p;
}

inline hfsnn::SyntheticConfig small_market(std::size_t days = 3, std::size_t ticks = 20'000, std::uint64_t seed = 5) {
    hfsnn::SyntheticConfig c;
    c.n_days = days;
    c.ticks_per_day = ticks;
    c.seed = seed;
    return c;
}

}  // namespace testing
