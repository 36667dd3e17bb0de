#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hfsnn/backtest.hpp"
#include "hfsnn/hyperopt.hpp"
#include "hfsnn/market_data.hpp"
#include "hfsnn/pipeline.hpp"
#include "hfsnn/supervised.hpp"
#include "json.hpp"

namespace hfsnn {

inline constexpr int kConfigSchemaVersion = 1;

struct TuneConfig {
    std::size_t n_trials = 100;
    std::size_t batch_size = 5000;
    std::string sampler = "tpe";  ///< tpe | random
    bool resume = false;
};

/// Everything one CLI invocation needs. Exactly one of `csv` and
/// `synthetic` is set.
struct RunConfig {
    std::uint64_t seed = 42;
    int jobs = 0;  ///< 0 leaves the OpenMP default
    std::filesystem::path out = "out";

    std::optional<std::filesystem::path> csv;  ///< file, or directory of *.csv files
    std::optional<SyntheticConfig> synthetic;

    PreprocessConfig preprocess;
    std::string model = "model1";  ///< model1 | model2 | model3 | naive | random
    std::optional<std::filesystem::path> study;  ///< best trial supplies the STDP hyperparameters
    ParamMap params;                              ///< explicit hyperparameters, override the study
    std::string objective = "PSA";
    TuneConfig tune;
    TrainConfig supervised;
    StrategyConfig strategy;
    bool baselines = true;

    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

/// Defaults used when neither a study nor params are given.
ParamMap default_params(ModelVariant variant);

}  // namespace hfsnn
