#include "hfsnn/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "hfsnn/error.hpp"
#include "hfsnn/rng.hpp"

namespace hfsnn {

// ---------------------------------------------------------------------------
// VWAP
// ---------------------------------------------------------------------------

std::vector<VwapBar> aggregate_vwap(std::span<const Tick> ticks, std::size_t window_n) {
    if (ticks.empty()) throw DataError("no ticks");
    if (window_n == 0) throw ConfigError("vwap window must be >= 1");

    std::vector<VwapBar> bars;
    bars.reserve((ticks.size() + window_n - 1) / window_n);
    for (std::size_t begin = 0; begin < ticks.size(); begin += window_n) {
        const std::size_t end = std::min(begin + window_n, ticks.size());
        double notional = 0.0;
        std::int64_t volume = 0;
        for (std::size_t i = begin; i < end; ++i) {
            notional += ticks[i].price * static_cast<double>(ticks[i].volume);
            volume += ticks[i].volume;
        }
        bars.push_back({bars.size(), notional / static_cast<double>(volume), volume});
    }
    return bars;
}

std::vector<double> vwap_prices(std::span<const VwapBar> bars) {
    std::vector<double> out(bars.size());
    std::transform(bars.begin(), bars.end(), out.begin(), [](const VwapBar& b) { return b.vwap; });
    return out;
}

// ---------------------------------------------------------------------------
// FeatureMatrix
// ---------------------------------------------------------------------------

FeatureMatrix::FeatureMatrix(std::size_t rows, std::vector<ChannelLabel> labels, std::size_t first_bar)
    : rows_(rows), first_bar_(first_bar), labels_(std::move(labels)), values_(rows * labels_.size(), 0.0) {}

FeatureMatrix FeatureMatrix::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) throw DataError("feature slice out of range");
    FeatureMatrix out(end - begin, labels_, first_bar_ + begin);
    std::copy(values_.begin() + static_cast<std::ptrdiff_t>(begin * cols()),
              values_.begin() + static_cast<std::ptrdiff_t>(end * cols()), out.values_.begin());
    return out;
}

void FeatureMatrix::append(const FeatureMatrix& other) {
    if (labels_.empty() && rows_ == 0) {
        *this = other;
        return;
    }
    if (other.cols() != cols()) throw DataError("cannot append feature matrices with different widths");
    values_.insert(values_.end(), other.values_.begin(), other.values_.end());
    rows_ += other.rows_;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

FeatureMatrix make_difference_features(std::span<const VwapBar> bars, std::size_t lags) {
    if (lags == 0) throw ConfigError("lags must be >= 1");
    if (lags >= bars.size()) throw DataError("insufficient history");

    std::vector<ChannelLabel> labels;
    for (std::size_t i = 1; i <= lags; ++i)
        labels.push_back({"price_diff", static_cast<int>(i), ChannelSign::kPositive});
    for (std::size_t i = 1; i <= lags; ++i)
        labels.push_back({"price_diff", static_cast<int>(i), ChannelSign::kNegative});

    FeatureMatrix fm(bars.size() - lags, std::move(labels), lags);
    for (std::size_t n = lags; n < bars.size(); ++n) {
        auto row = fm.row(n - lags);
        for (std::size_t i = 1; i <= lags; ++i) {
            const double d = bars[n].vwap - bars[n - i].vwap;
            row[i - 1] = std::max(d, 0.0);
            row[lags + i - 1] = std::max(-d, 0.0);
        }
    }
    return fm;
}

FeatureMatrix make_supervised_features(std::span<const VwapBar> bars, std::span<const std::size_t> lag_set,
                                       std::size_t vol_window) {
    if (lag_set.empty()) throw ConfigError("lag set must not be empty");
    if (vol_window == 0) throw ConfigError("volatility window must be >= 1");
    const std::size_t max_lag = *std::max_element(lag_set.begin(), lag_set.end());
    if (*std::min_element(lag_set.begin(), lag_set.end()) == 0) throw ConfigError("lags must be >= 1");
    const std::size_t start = std::max(max_lag, vol_window);
    if (start >= bars.size()) throw DataError("insufficient history");

    std::vector<ChannelLabel> labels;
    for (std::size_t lag : lag_set) {
        labels.push_back({"return", static_cast<int>(lag), ChannelSign::kPositive});
        labels.push_back({"return", static_cast<int>(lag), ChannelSign::kNegative});
    }
    labels.push_back({"volatility", static_cast<int>(vol_window), ChannelSign::kUnsigned});
    labels.push_back({"volume", static_cast<int>(vol_window), ChannelSign::kUnsigned});
    const std::size_t n_ret = 2 * lag_set.size();

    FeatureMatrix fm(bars.size() - start, std::move(labels), start);
    std::vector<double> window(vol_window);
    for (std::size_t n = start; n < bars.size(); ++n) {
        auto row = fm.row(n - start);
        for (std::size_t j = 0; j < lag_set.size(); ++j) {
            const double r = bars[n].vwap / bars[n - lag_set[j]].vwap - 1.0;
            row[2 * j] = std::max(r, 0.0);
            row[2 * j + 1] = std::max(-r, 0.0);
        }

        // Sample std of the last vol_window one-step returns, two-pass.
        for (std::size_t j = 0; j < vol_window; ++j) {
            const std::size_t b = n - vol_window + 1 + j;
            window[j] = bars[b].vwap / bars[b - 1].vwap - 1.0;
        }
        double vol = 0.0;
        if (vol_window > 1) {
            double mean = 0.0;
            for (double r : window) mean += r;
            mean /= static_cast<double>(vol_window);
            double ss = 0.0;
            for (double r : window) ss += (r - mean) * (r - mean);
            vol = std::sqrt(ss / static_cast<double>(vol_window - 1));
        }
        row[n_ret] = vol;

        std::int64_t volume = 0;
        for (std::size_t b = n + 1 - vol_window; b <= n; ++b) volume += bars[b].total_volume;
        row[n_ret + 1] = static_cast<double>(volume);
    }
    return fm;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

FeatureMatrix NormalizationSpec::apply(const FeatureMatrix& features) const {
    if (features.cols() != channels.size())
        throw DataError("normalization spec has " + std::to_string(channels.size()) +
                        " channels, features have " + std::to_string(features.cols()));
    FeatureMatrix out = features;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            const ChannelScaling& ch = channels[c];
            if (ch.scale == 0.0) {
                row[c] = 0.0;
                continue;
            }
            const double clipped = std::clamp(row[c], ch.q_low, ch.q_high);
            row[c] = std::min((clipped - ch.q_low) * ch.scale, upper_bound);
        }
    }
    return out;
}

std::pair<FeatureMatrix, NormalizationSpec> normalize(const FeatureMatrix& features, double q_low,
                                                      double q_high, double upper_bound) {
    if (features.empty()) throw DataError("cannot normalize empty features");
    if (!(upper_bound > 0.0 && upper_bound <= 1.0)) throw ConfigError("upper_bound must lie in (0, 1]");
    if (!(q_low >= 0.0 && q_low <= q_high && q_high <= 1.0))
        throw ConfigError("quantiles must satisfy 0 <= q_low <= q_high <= 1");

    NormalizationSpec spec;
    spec.upper_bound = upper_bound;
    spec.channels.resize(features.cols());
    std::vector<double> column(features.rows());
    for (std::size_t c = 0; c < features.cols(); ++c) {
        for (std::size_t r = 0; r < features.rows(); ++r) column[r] = features.at(r, c);
        ChannelScaling& ch = spec.channels[c];
        ch.q_low = quantile(column, q_low);
        ch.q_high = quantile(column, q_high);
        ch.scale = ch.q_high > ch.q_low ? upper_bound / (ch.q_high - ch.q_low) : 0.0;
    }
    return {spec.apply(features), spec};
}

// ---------------------------------------------------------------------------
// Poisson encoding
// ---------------------------------------------------------------------------

SpikeTensor::SpikeTensor(std::size_t n, std::size_t k, std::size_t t)
    : n_(n), k_(k), t_(t), data_(n * k * t, 0) {}

namespace {

void check_rates(const FeatureMatrix& features, std::size_t timesteps) {
    if (timesteps == 0) throw ConfigError("timesteps must be >= 1");
    for (double x : features.values())
        if (!(x >= 0.0 && x <= 1.0)) throw DataError("unnormalized input");
}

inline void encode_row(const FeatureMatrix& features, std::size_t n, std::uint64_t seed, SpikeTensor& out) {
    const std::size_t T = out.timesteps();
    auto row = features.row(n);
    for (std::size_t k = 0; k < row.size(); ++k) {
        const double p = row[k];
        for (std::size_t t = 0; t < T; ++t)
            out.at(n, k, t) = to_unit(counter_hash(seed, n, k, t)) < p ? 1 : 0;
    }
}

}  // namespace

SpikeTensor encode_poisson(const FeatureMatrix& features, std::size_t timesteps, std::uint64_t seed) {
    check_rates(features, timesteps);
    SpikeTensor out(features.rows(), features.cols(), timesteps);
    const auto n_rows = static_cast<std::ptrdiff_t>(features.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < n_rows; ++n) encode_row(features, static_cast<std::size_t>(n), seed, out);
    return out;
}

namespace serial {
SpikeTensor encode_poisson(const FeatureMatrix& features, std::size_t timesteps, std::uint64_t seed) {
    check_rates(features, timesteps);
    SpikeTensor out(features.rows(), features.cols(), timesteps);
    for (std::size_t n = 0; n < features.rows(); ++n) encode_row(features, n, seed, out);
    return out;
}
}  // namespace serial

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

void SyntheticConfig::validate() const {
    if (n_days == 0) throw ConfigError("n_days must be >= 1");
    if (ticks_per_day == 0) throw ConfigError("empty day");
    if (!(base_price > 0.0)) throw ConfigError("base_price must be > 0");
    if (!(noise_volatility > 0.0)) throw ConfigError("noise_volatility must be > 0");
    if (!(spike_multiplier > 0.0)) throw ConfigError("spike_multiplier must be > 0");
    if (!(burst_volume_multiplier > 0.0)) throw ConfigError("burst_volume_multiplier must be > 0");
    if (!(volume_log_sigma >= 0.0)) throw ConfigError("volume_log_sigma must be >= 0");
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(spike_rate)) throw ConfigError("spike_rate must lie in [0, 1]");
    if (!in_unit(momentum_persistence)) throw ConfigError("momentum_persistence must lie in [0, 1]");
    business_days(start_date, 1);
}

SyntheticMarket generate_synthetic_ticks(const SyntheticConfig& config) {
    config.validate();
    constexpr std::int64_t kSessionUs = 23'400'000'000;  // 6.5 hours
    const double mean_gap = static_cast<double>(kSessionUs) / static_cast<double>(config.ticks_per_day);

    SyntheticMarket market;
    const auto dates = business_days(config.start_date, config.n_days);
    double price = config.base_price;
    for (std::size_t d = 0; d < config.n_days; ++d) {
        Rng rng(substream(config.seed, "synthetic-day", d));
        TickDay day{dates[d], {}};
        day.ticks.reserve(config.ticks_per_day);
        std::vector<std::size_t> bursts;

        double clock = 0.0;
        int burst_dir = 0;
        for (std::size_t i = 0; i < config.ticks_per_day; ++i) {
            if (burst_dir != 0 && !rng.bernoulli(config.momentum_persistence)) burst_dir = 0;
            if (burst_dir == 0 && rng.bernoulli(config.spike_rate)) {
                burst_dir = rng.bernoulli(0.5) ? 1 : -1;
                bursts.push_back(i);
            }

            double ret;
            double volume_scale = 1.0;
            if (burst_dir != 0) {
                ret = burst_dir * config.spike_multiplier * config.noise_volatility * std::abs(rng.normal());
                volume_scale = config.burst_volume_multiplier;
            } else {
                ret = config.noise_volatility * rng.normal();
            }
            if (i > 0) price *= 1.0 + ret;

            clock += -mean_gap * std::log1p(-rng.uniform());
            const double v = std::exp(config.volume_log_mean + config.volume_log_sigma * rng.normal());
            const auto volume = std::max<std::int64_t>(1, std::llround(v * volume_scale));
            day.ticks.push_back({static_cast<std::int64_t>(clock), price, volume});
        }
        market.days.push_back(std::move(day));
        market.burst_starts.push_back(std::move(bursts));
    }
    return market;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

using std::chrono::day;
using std::chrono::month;
using std::chrono::sys_days;
using std::chrono::year;
using std::chrono::year_month_day;

std::optional<year_month_day> parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [](std::string_view part, auto& out) {
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        return ec == std::errc() && p == part.data() + part.size();
    };
    if (!num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) || !num(s.substr(8, 2), d)) return std::nullopt;
    year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

std::string format_date(const year_month_day& ymd) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::vector<std::string> business_days(const std::string& start, std::size_t count) {
    auto ymd = parse_date(start);
    if (!ymd) throw ConfigError("invalid date '" + start + "', expected YYYY-MM-DD");
    std::vector<std::string> out;
    sys_days d{*ymd};
    while (out.size() < count) {
        const std::chrono::weekday wd{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.push_back(format_date(year_month_day{d}));
        d += std::chrono::days{1};
    }
    return out;
}

std::vector<TickDay> load_ticks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open tick file " + path.string());

    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };

    if (!std::getline(in, line)) {
        line_no = 1;
        fail("missing header");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,timestamp_us,price,volume") fail("expected header 'date,timestamp_us,price,volume'");

    std::map<std::string, TickDay> by_date;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 4) fail("expected 4 fields, got " + std::to_string(fields.size()));

        if (!parse_date(fields[0])) fail("invalid date '" + std::string(fields[0]) + "'");
        Tick tick;
        if (!parse_number(fields[1], tick.timestamp_us)) fail("invalid timestamp_us");
        if (!parse_number(fields[2], tick.price) || !std::isfinite(tick.price)) fail("invalid price");
        if (!parse_number(fields[3], tick.volume)) fail("invalid volume");
        if (tick.timestamp_us < 0) fail("timestamp_us must be >= 0");
        if (!(tick.price > 0.0)) fail("price must be > 0");
        if (tick.volume <= 0) fail("volume must be > 0");

        TickDay& day = by_date[std::string(fields[0])];
        if (day.date.empty()) day.date = std::string(fields[0]);
        if (!day.ticks.empty() && tick.timestamp_us < day.ticks.back().timestamp_us)
            fail("non-monotone timestamp within " + day.date);
        day.ticks.push_back(tick);
    }

    std::vector<TickDay> days;
    days.reserve(by_date.size());
    for (auto& [date, day] : by_date) days.push_back(std::move(day));
    return days;
}

void write_ticks_csv(const std::filesystem::path& path, const TickDay& day) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "date,timestamp_us,price,volume\n";
    char buf[128];
    for (const Tick& t : day.ticks) {
        const int n = std::snprintf(buf, sizeof buf, "%s,%lld,%.6f,%lld\n", day.date.c_str(),
                                    static_cast<long long>(t.timestamp_us), t.price,
                                    static_cast<long long>(t.volume));
        out.write(buf, n);
    }
}

}  // namespace hfsnn
