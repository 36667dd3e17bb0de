#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hfsnn {

// ---------------------------------------------------------------------------
// Ticks and bars
// ---------------------------------------------------------------------------

struct Tick {
    std::int64_t timestamp_us = 0;  ///< microseconds since session open
    double price = 0.0;
    std::int64_t volume = 0;
};

/// All ticks of one trading session, in timestamp order.
struct TickDay {
    std::string date;  ///< YYYY-MM-DD
    std::vector<Tick> ticks;
};

struct VwapBar {
    std::size_t index = 0;
    double vwap = 0.0;
    std::int64_t total_volume = 0;
};

/// Volume-weighted average price over consecutive windows of `window_n`
/// ticks. A trailing partial window with at least one tick becomes a bar.
std::vector<VwapBar> aggregate_vwap(std::span<const Tick> ticks, std::size_t window_n = 10);

std::vector<double> vwap_prices(std::span<const VwapBar> bars);

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

enum class ChannelSign { kPositive, kNegative, kUnsigned };

struct ChannelLabel {
    std::string feature;
    int lag = 0;
    ChannelSign sign = ChannelSign::kUnsigned;
};

/// Row-major N x K matrix. Row r describes bar `first_bar + r` of the
/// source series, so predictions can be aligned back to bars.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::vector<ChannelLabel> labels, std::size_t first_bar = 0);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return labels_.size(); }
    std::size_t first_bar() const { return first_bar_; }
    bool empty() const { return rows_ == 0 || labels_.empty(); }

    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<ChannelLabel>& labels() const { return labels_; }

    /// Rows [begin, end) as a new matrix; first_bar is shifted accordingly.
    FeatureMatrix slice(std::size_t begin, std::size_t end) const;

    /// Stack `other` under this matrix. Channel labels must match.
    void append(const FeatureMatrix& other);

private:
    std::size_t rows_ = 0;
    std::size_t first_bar_ = 0;
    std::vector<ChannelLabel> labels_;
    std::vector<double> values_;
};

/// Lagged price differences split into positive and negative channels.
/// Channel order: pos lag 1..k, then neg lag 1..k. The first k bars are
/// dropped so every row is fully defined.
FeatureMatrix make_difference_features(std::span<const VwapBar> bars, std::size_t lags);

/// Returns at each lag (bipolar, split), rolling volatility of 1-step returns
/// and rolling total volume. Channel order: pos/neg per lag, volatility, volume.
FeatureMatrix make_supervised_features(std::span<const VwapBar> bars,
                                       std::span<const std::size_t> lag_set,
                                       std::size_t vol_window = 10);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct ChannelScaling {
    double q_low = 0.0;
    double q_high = 0.0;
    double scale = 0.0;  ///< upper_bound / (q_high - q_low), 0 for a constant channel
};

struct NormalizationSpec {
    std::vector<ChannelScaling> channels;
    double upper_bound = 1.0;

    /// Replays the fitted transform on any matrix with the same channel count.
    FeatureMatrix apply(const FeatureMatrix& features) const;
};

/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// Fits per-channel quantile clipping followed by min-max rescaling into
/// [0, upper_bound], and returns the transformed matrix with the fitted spec.
std::pair<FeatureMatrix, NormalizationSpec> normalize(const FeatureMatrix& features,
                                                      double q_low = 0.1, double q_high = 0.9,
                                                      double upper_bound = 1.0);

// ---------------------------------------------------------------------------
// Spike tensors and Poisson encoding
// ---------------------------------------------------------------------------

/// Binary (N timestamps, K channels, T timesteps) tensor stored
/// channel-major per timestamp: index = (n * K + k) * T + t.
class SpikeTensor {
public:
    SpikeTensor() = default;
    SpikeTensor(std::size_t n, std::size_t k, std::size_t t);

    std::size_t timestamps() const { return n_; }
    std::size_t channels() const { return k_; }
    std::size_t timesteps() const { return t_; }

    std::uint8_t& at(std::size_t n, std::size_t k, std::size_t t) { return data_[(n * k_ + k) * t_ + t]; }
    std::uint8_t at(std::size_t n, std::size_t k, std::size_t t) const {
        return data_[(n * k_ + k) * t_ + t];
    }

    /// The K x T block presented to the network for one timestamp.
    std::span<const std::uint8_t> timestamp(std::size_t n) const {
        return {data_.data() + n * k_ * t_, k_ * t_};
    }
    std::span<std::uint8_t> timestamp(std::size_t n) { return {data_.data() + n * k_ * t_, k_ * t_}; }

    std::span<const std::uint8_t> data() const { return data_; }
    std::span<std::uint8_t> data() { return data_; }

    bool operator==(const SpikeTensor&) const = default;

private:
    std::size_t n_ = 0, k_ = 0, t_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Bernoulli(x) spike per timestep for each (timestamp, channel) rate x.
/// Draws come from a counter-based hash of (seed, row, channel, step), so the
/// OpenMP kernel and the serial reference produce identical tensors.
SpikeTensor encode_poisson(const FeatureMatrix& features, std::size_t timesteps, std::uint64_t seed);

namespace serial {
SpikeTensor encode_poisson(const FeatureMatrix& features, std::size_t timesteps, std::uint64_t seed);
}

// ---------------------------------------------------------------------------
// Synthetic ticks and CSV I/O
// ---------------------------------------------------------------------------

struct SyntheticConfig {
    std::size_t n_days = 19;
    std::size_t ticks_per_day = 200'000;
    double base_price = 120.0;
    double noise_volatility = 1e-4;     ///< per-tick return scale
    double spike_rate = 0.01;           ///< per-tick burst start probability
    double spike_multiplier = 3.0;      ///< burst move magnitude relative to noise
    double momentum_persistence = 0.9;  ///< probability a burst continues another tick
    double volume_log_mean = 4.0;
    double volume_log_sigma = 1.0;
    double burst_volume_multiplier = 2.0;
    std::string start_date = "2015-02-02";
    std::uint64_t seed = 1;

    void validate() const;
};

struct SyntheticMarket {
    std::vector<TickDay> days;
    /// Tick indices at which a momentum burst started, per day. Diagnostics only.
    std::vector<std::vector<std::size_t>> burst_starts;
};

SyntheticMarket generate_synthetic_ticks(const SyntheticConfig& config);

/// Reads `date,timestamp_us,price,volume` rows (header required) and groups
/// them by date in ascending date order.
std::vector<TickDay> load_ticks(const std::filesystem::path& path);

void write_ticks_csv(const std::filesystem::path& path, const TickDay& day);

/// Weekday dates starting at `start` (YYYY-MM-DD), skipping weekends.
std::vector<std::string> business_days(const std::string& start, std::size_t count);

}  // namespace hfsnn
