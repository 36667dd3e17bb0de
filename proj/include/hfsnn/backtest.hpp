#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hfsnn/metrics.hpp"
#include "hfsnn/pipeline.hpp"
#include "json.hpp"

namespace hfsnn {

struct StrategyConfig {
    std::size_t lookback = 3;
    std::size_t hold = 3;
    /// false: F > 0 goes long, F < 0 goes short. true swaps the two.
    bool invert_direction = false;
    double cost_bps = 0.0;  ///< charged once per round trip
    std::size_t random_runs = 100;
    double random_probability = 0.5;

    void validate() const;
};

struct Trade {
    std::size_t entry_idx = 0;
    std::size_t exit_idx = 0;
    int direction = 1;  ///< +1 long, -1 short
    double entry_vwap = 0.0;
    double exit_vwap = 0.0;
    double ret = 0.0;
};

/// F_t = P_t - mean(P_{t-1}, ..., P_{t-n}); empty when t < n.
std::optional<double> position_flag(std::span<const double> prices, std::size_t t, std::size_t n);

struct StrategyResult {
    std::vector<Trade> trades;
    std::vector<double> equity;  ///< capital after each bar; trades settle at their exit bar
};

/// Single-day spike-triggered momentum strategy. A prediction at t with no
/// open position and a nonzero flag enters at the VWAP of t + 1 and exits
/// at t + 1 + hold, or at the day's last bar if that comes first. Trade
/// indices are offset by `index_offset`.
StrategyResult run_strategy(std::span<const std::uint8_t> predictions, std::span<const double> prices,
                            const StrategyConfig& config, double initial_equity = 1.0, std::size_t index_offset = 0);

struct TradingReport {
    double cumulative_return = 0.0;
    std::optional<double> sharpe;
    double max_drawdown = 0.0;
    std::optional<double> win_rate;
    std::optional<double> profit_factor;
    std::optional<double> profit_loss_ratio;
    std::optional<double> expectancy;
    std::size_t n_trades = 0;
    std::optional<double> scaled_cumulative_return;
};

/// Largest peak-to-trough fall as a fraction of the peak.
double max_drawdown(std::span<const double> equity);

/// Drawdown fraction at every point of the curve.
std::vector<double> drawdown_curve(std::span<const double> equity);

/// `daily_returns` holds one end-of-day over start-of-day return per day;
/// Sharpe is their mean over sample std, times sqrt(252).
TradingReport trading_metrics(std::span<const Trade> trades, std::span<const double> equity,
                              std::span<const double> daily_returns);

/// Expectancy times trades_per_day times n_days.
std::optional<double> scale_report(const TradingReport& report, double trades_per_day, std::size_t n_days);

inline constexpr double kTradesPerDay = 1000.0;

struct DayResult {
    std::string date;
    MetricsReport metrics;
    std::size_t n_trades = 0;
    double day_return = 0.0;
};

struct ExperimentReport {
    std::string name;
    std::vector<DayResult> days;
    MetricsReport metrics;  ///< pooled over all test days
    TradingReport trading;
    std::vector<Trade> trades;
    std::vector<double> equity;  ///< capital after each bar of the test days, in order
};

/// Runs a strategy over prepared test days with given per-bar predictions,
/// chaining equity from one day to the next.
ExperimentReport backtest_days(std::string name, std::span<const DayData> test_days,
                               std::span<const std::vector<std::uint8_t>> predictions, const StrategyConfig& config);

/// Day i trains the runner for a prediction of day i + 1. Pairs run in
/// parallel; each pair's seed is derived from `seed` and its index.
ExperimentReport rolling_experiment(std::string name, std::span<const DayData> days, const DayRunner& runner,
                                    const StrategyConfig& config, std::uint64_t seed);

/// Trades at every bar of days[1..].
ExperimentReport naive_baseline(std::span<const DayData> days, const StrategyConfig& config);

struct RandomBaseline {
    ExperimentReport mean;  ///< field-wise mean of defined values over runs; curves from run 0
    double expectancy_std_error = 0.0;
    std::vector<double> run_expectancy;
};

/// Bernoulli(random_probability) predictions per bar, averaged over
/// random_runs independent runs on days[1..].
RandomBaseline random_baseline(std::span<const DayData> days, const StrategyConfig& config, std::uint64_t seed);

void write_trades_csv(const std::filesystem::path& path, std::span<const Trade> trades);
void write_equity_csv(const std::filesystem::path& path, std::span<const double> equity);
void write_drawdown_csv(const std::filesystem::path& path, std::span<const double> equity);

void to_json(nlohmann::json& j, const TradingReport& r);
void to_json(nlohmann::json& j, const ExperimentReport& r);

}  // namespace hfsnn
