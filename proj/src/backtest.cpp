#include "hfsnn/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>

#include "hfsnn/error.hpp"
#include "hfsnn/rng.hpp"

namespace hfsnn {

using nlohmann::json;

void StrategyConfig::validate() const {
    if (lookback == 0) throw ConfigError("lookback must be >= 1");
    if (hold == 0) throw ConfigError("hold must be >= 1");
    if (!(cost_bps >= 0.0)) throw ConfigError("cost_bps must be >= 0");
    if (random_runs == 0) throw ConfigError("random_runs must be >= 1");
    if (!(random_probability >= 0.0 && random_probability <= 1.0))
        throw ConfigError("random_probability must lie in [0, 1]");
}

std::optional<double> position_flag(std::span<const double> prices, std::size_t t, std::size_t n) {
    if (n == 0 || t < n || t >= prices.size()) return std::nullopt;
    double sum = 0.0;
    for (std::size_t k = 1; k <= n; ++k) sum += prices[t - k];
    return prices[t] - sum / static_cast<double>(n);
}

StrategyResult run_strategy(std::span<const std::uint8_t> predictions, std::span<const double> prices,
                            const StrategyConfig& config, double initial_equity, std::size_t index_offset) {
    config.validate();
    if (predictions.size() != prices.size())
        throw DataError("predictions (" + std::to_string(predictions.size()) + ") and prices (" +
                        std::to_string(prices.size()) + ") are misaligned");
    const std::size_t n = prices.size();
    StrategyResult r;
    r.equity.resize(n);
    double capital = initial_equity;
    std::optional<Trade> open;
    for (std::size_t t = 0; t < n; ++t) {
        if (open && open->exit_idx == t + index_offset) {
            capital *= 1.0 + open->ret;
            open.reset();
        }
        r.equity[t] = capital;
        if (open || !predictions[t] || t + 2 >= n) continue;
        const std::optional<double> flag = position_flag(prices, t, config.lookback);
        if (!flag || *flag == 0.0) continue;
        int dir = *flag > 0.0 ? 1 : -1;
        if (config.invert_direction) dir = -dir;
        const std::size_t entry = t + 1, exit = std::min(t + 1 + config.hold, n - 1);
        Trade trade{entry + index_offset, exit + index_offset, dir, prices[entry], prices[exit], 0.0};
        trade.ret = dir * (trade.exit_vwap / trade.entry_vwap - 1.0) - config.cost_bps * 1e-4;
        r.trades.push_back(trade);
        open = trade;
    }
    return r;
}

double max_drawdown(std::span<const double> equity) {
    double peak = -INFINITY, worst = 0.0;
    for (double e : equity) {
        peak = std::max(peak, e);
        if (peak > 0.0) worst = std::max(worst, (peak - e) / peak);
    }
    return worst;
}

std::vector<double> drawdown_curve(std::span<const double> equity) {
    std::vector<double> out(equity.size());
    double peak = -INFINITY;
    for (std::size_t i = 0; i < equity.size(); ++i) {
        peak = std::max(peak, equity[i]);
        out[i] = peak > 0.0 ? (peak - equity[i]) / peak : 0.0;
    }
    return out;
}

TradingReport trading_metrics(std::span<const Trade> trades, std::span<const double> equity,
                              std::span<const double> daily_returns) {
    TradingReport r;
    r.n_trades = trades.size();
    r.cumulative_return = equity.empty() ? 0.0 : equity.back() - 1.0;
    r.max_drawdown = max_drawdown(equity);

    std::size_t wins = 0, losses = 0;
    double gains = 0.0, loss_sum = 0.0, total = 0.0;
    for (const Trade& t : trades) {
        total += t.ret;
        if (t.ret > 0.0) {
            ++wins;
            gains += t.ret;
        } else if (t.ret < 0.0) {
            ++losses;
            loss_sum += t.ret;
        }
    }
    if (!trades.empty()) {
        const auto n = static_cast<double>(trades.size());
        r.win_rate = static_cast<double>(wins) / n;
        r.expectancy = total / n;
    }
    if (losses > 0) {
        r.profit_factor = gains / std::abs(loss_sum);
        if (wins > 0)
            r.profit_loss_ratio = (gains / static_cast<double>(wins)) / std::abs(loss_sum / static_cast<double>(losses));
    }

    if (daily_returns.size() >= 2) {
        const auto d = static_cast<double>(daily_returns.size());
        double mean = 0.0;
        for (double x : daily_returns) mean += x;
        mean /= d;
        double ss = 0.0;
        for (double x : daily_returns) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / (d - 1.0));
        if (sd > 0.0) r.sharpe = mean / sd * std::sqrt(252.0);
    }
    r.scaled_cumulative_return = scale_report(r, kTradesPerDay, daily_returns.size());
    return r;
}

std::optional<double> scale_report(const TradingReport& report, double trades_per_day, std::size_t n_days) {
    if (!report.expectancy) return std::nullopt;
    return *report.expectancy * trades_per_day * static_cast<double>(n_days);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

ExperimentReport backtest_days(std::string name, std::span<const DayData> test_days,
                               std::span<const std::vector<std::uint8_t>> predictions, const StrategyConfig& config) {
    if (predictions.size() != test_days.size()) throw DataError("one prediction vector per test day is required");
    ExperimentReport rep;
    rep.name = std::move(name);
    ConfusionCounts pooled;
    std::vector<double> daily;
    double capital = 1.0;
    std::size_t offset = 0;
    for (std::size_t d = 0; d < test_days.size(); ++d) {
        const DayData& day = test_days[d];
        const StrategyResult s = run_strategy(predictions[d], day.prices, config, capital, offset);
        const ConfusionCounts c = count_confusion(predictions[d], day.truth);
        pooled += c;
        DayResult dr;
        dr.date = day.date;
        dr.metrics = report_from_counts(c);
        dr.n_trades = s.trades.size();
        const double end = s.equity.empty() ? capital : s.equity.back();
        dr.day_return = end / capital - 1.0;
        daily.push_back(dr.day_return);
        rep.days.push_back(std::move(dr));
        rep.trades.insert(rep.trades.end(), s.trades.begin(), s.trades.end());
        rep.equity.insert(rep.equity.end(), s.equity.begin(), s.equity.end());
        capital = end;
        offset += day.prices.size();
    }
    rep.metrics = report_from_counts(pooled);
    rep.trading = trading_metrics(rep.trades, rep.equity, daily);
    return rep;
}

ExperimentReport rolling_experiment(std::string name, std::span<const DayData> days, const DayRunner& runner,
                                    const StrategyConfig& config, std::uint64_t seed) {
    if (days.size() < 2) throw DataError("the rolling experiment needs at least two days");
    config.validate();
    const std::size_t pairs = days.size() - 1;
    std::vector<std::vector<std::uint8_t>> predictions(pairs);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            predictions[k] = runner(days[k], days[k + 1], substream(seed, "day", k));
        } catch (...) {
#pragma omp critical(hfsnn_rolling_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return backtest_days(std::move(name), days.subspan(1), predictions, config);
}

ExperimentReport naive_baseline(std::span<const DayData> days, const StrategyConfig& config) {
    if (days.size() < 2) throw DataError("the rolling experiment needs at least two days");
    std::vector<std::vector<std::uint8_t>> predictions;
    for (std::size_t d = 1; d < days.size(); ++d) predictions.emplace_back(days[d].prices.size(), 1);
    return backtest_days("naive", days.subspan(1), predictions, config);
}

namespace {

void accumulate(std::optional<double>& sum, std::size_t& n, const std::optional<double>& v) {
    if (!v) return;
    sum = sum.value_or(0.0) + *v;
    ++n;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
    std::optional<double> sum;
    std::size_t n = 0;
    for (const auto& v : values) accumulate(sum, n, v);
    if (!sum) return std::nullopt;
    return *sum / static_cast<double>(n);
}

template <class T, class Get>
std::optional<double> field_mean(const std::vector<T>& items, Get get) {
    std::vector<std::optional<double>> v;
    for (const T& x : items) v.push_back(get(x));
    return mean_of(v);
}

}  // namespace

RandomBaseline random_baseline(std::span<const DayData> days, const StrategyConfig& config, std::uint64_t seed) {
    if (days.size() < 2) throw DataError("the rolling experiment needs at least two days");
    config.validate();
    const std::span<const DayData> test = days.subspan(1);
    std::vector<ExperimentReport> runs(config.random_runs);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(config.random_runs); ++r) {
        const std::uint64_t run_seed = substream(seed, "strategy-random", static_cast<std::uint64_t>(r));
        std::vector<std::vector<std::uint8_t>> predictions(test.size());
        for (std::size_t d = 0; d < test.size(); ++d) {
            predictions[d].resize(test[d].prices.size());
            for (std::size_t t = 0; t < predictions[d].size(); ++t)
                predictions[d][t] = to_unit(counter_hash(run_seed, d, t, 0)) < config.random_probability ? 1 : 0;
        }
        runs[static_cast<std::size_t>(r)] = backtest_days("random", test, predictions, config);
    }

    RandomBaseline out;
    out.mean = runs.front();
    ExperimentReport& m = out.mean;
    MetricsReport& mm = m.metrics;
    mm.spike_accuracy = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.spike_accuracy; });
    mm.momentum_spike_pct = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.momentum_spike_pct; });
    mm.spiking_rate = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.spiking_rate; });
    mm.real_spiking_rate = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.real_spiking_rate; });
    mm.tpr = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.tpr; });
    mm.fpr = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.fpr; });
    mm.psa = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.psa; });
    mm.srd = field_mean(runs, [](const ExperimentReport& e) { return e.metrics.srd; });
    TradingReport& t = m.trading;
    t.cumulative_return = *field_mean(runs, [](const ExperimentReport& e) { return std::optional(e.trading.cumulative_return); });
    t.sharpe = field_mean(runs, [](const ExperimentReport& e) { return e.trading.sharpe; });
    t.max_drawdown = *field_mean(runs, [](const ExperimentReport& e) { return std::optional(e.trading.max_drawdown); });
    t.win_rate = field_mean(runs, [](const ExperimentReport& e) { return e.trading.win_rate; });
    t.profit_factor = field_mean(runs, [](const ExperimentReport& e) { return e.trading.profit_factor; });
    t.profit_loss_ratio = field_mean(runs, [](const ExperimentReport& e) { return e.trading.profit_loss_ratio; });
    t.expectancy = field_mean(runs, [](const ExperimentReport& e) { return e.trading.expectancy; });
    t.n_trades = static_cast<std::size_t>(std::llround(
        *field_mean(runs, [](const ExperimentReport& e) { return std::optional(static_cast<double>(e.trading.n_trades)); })));
    t.scaled_cumulative_return = scale_report(t, kTradesPerDay, test.size());

    for (const ExperimentReport& e : runs) out.run_expectancy.push_back(e.trading.expectancy.value_or(0.0));
    if (runs.size() >= 2) {
        const auto n = static_cast<double>(runs.size());
        double mean = 0.0, ss = 0.0;
        for (double x : out.run_expectancy) mean += x;
        mean /= n;
        for (double x : out.run_expectancy) ss += (x - mean) * (x - mean);
        out.expectancy_std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace {
std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    return out;
}
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace

void write_trades_csv(const std::filesystem::path& path, std::span<const Trade> trades) {
    std::ofstream out = open_csv(path);
    out << "entry_idx,exit_idx,direction,entry_vwap,exit_vwap,return\n";
    for (const Trade& t : trades)
        out << t.entry_idx << ',' << t.exit_idx << ',' << (t.direction > 0 ? "long" : "short") << ',' << t.entry_vwap
            << ',' << t.exit_vwap << ',' << t.ret << '\n';
}

void write_equity_csv(const std::filesystem::path& path, std::span<const double> equity) {
    std::ofstream out = open_csv(path);
    out << "timestamp_idx,equity\n";
    for (std::size_t i = 0; i < equity.size(); ++i) out << i << ',' << equity[i] << '\n';
}

void write_drawdown_csv(const std::filesystem::path& path, std::span<const double> equity) {
    std::ofstream out = open_csv(path);
    out << "timestamp_idx,drawdown\n";
    const std::vector<double> dd = drawdown_curve(equity);
    for (std::size_t i = 0; i < dd.size(); ++i) out << i << ',' << dd[i] << '\n';
}

void to_json(json& j, const TradingReport& r) {
    j = {{"cumulative_return", r.cumulative_return},
         {"sharpe", opt(r.sharpe)},
         {"max_drawdown", r.max_drawdown},
         {"win_rate", opt(r.win_rate)},
         {"profit_factor", opt(r.profit_factor)},
         {"profit_loss_ratio", opt(r.profit_loss_ratio)},
         {"expectancy", opt(r.expectancy)},
         {"n_trades", r.n_trades},
         {"scaled_cumulative_return", opt(r.scaled_cumulative_return)}};
}

void to_json(json& j, const ExperimentReport& r) {
    json days = json::array();
    for (const DayResult& d : r.days)
        days.push_back({{"date", d.date}, {"metrics", d.metrics}, {"n_trades", d.n_trades}, {"day_return", d.day_return}});
    j = {{"name", r.name}, {"metrics", r.metrics}, {"trading", r.trading}, {"days", days}};
}

}  // namespace hfsnn
