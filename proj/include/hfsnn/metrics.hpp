#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace hfsnn {

/// |X_{t+1} / X_t - 1| for every consecutive pair; n - 1 values.
std::vector<double> abs_returns(std::span<const double> prices);

/// Median, mean of the central pair for even lengths.
double spike_threshold(std::span<const double> abs_rets);

enum class Direction : std::uint8_t { kNone, kMomentum, kReversion };

/// Per-bar labels of one day. Bars outside [window, n - 1 - window] have
/// no forward or backward window and are excluded from every denominator.
struct GroundTruth {
    double r_thresh = 0.0;
    std::size_t window = 3;
    std::vector<std::uint8_t> labeled;
    std::vector<std::uint8_t> is_real;
    std::vector<Direction> direction;

    std::size_t size() const { return labeled.size(); }
    std::size_t labeled_count() const;
    std::size_t real_count() const;
};

/// Strength S(t) is the mean absolute return of the w moves after t; a bar
/// is real when S(t) > r_thresh. Direction compares the move over the w bars
/// before t with the move over the w bars after it.
GroundTruth label_ground_truth(std::span<const double> prices, std::size_t window, double r_thresh);

/// label_ground_truth with r_thresh taken as the day's median absolute return.
GroundTruth label_day(std::span<const double> prices, std::size_t window);

struct ConfusionCounts {
    std::size_t labeled = 0;
    std::size_t predicted = 0;
    std::size_t real = 0;
    std::size_t pred_real = 0;
    std::size_t pred_fake = 0;
    std::size_t pred_momentum = 0;

    std::size_t fake() const { return labeled - real; }
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts count_confusion(std::span<const std::uint8_t> predictions, const GroundTruth& truth);

/// Undefined ratios (zero denominators) are empty optionals and serialize
/// as null.
struct MetricsReport {
    std::optional<double> spike_accuracy;
    std::optional<double> momentum_spike_pct;
    std::optional<double> spiking_rate;
    std::optional<double> real_spiking_rate;
    std::optional<double> tpr;
    std::optional<double> fpr;
    std::optional<double> psa;
    std::optional<double> srd;
    ConfusionCounts counts;
};

inline constexpr double kPsaTolerance = 0.05;

struct PsaResult {
    double psa = 0.0;
    double srd = 0.0;
};

/// srd = spiking_rate / real_spiking_rate - 1 and
/// psa = spike_accuracy * exp(-max(|srd| - alpha, 0)).
PsaResult psa(double spike_accuracy, double spiking_rate, double real_spiking_rate, double alpha = kPsaTolerance);

MetricsReport report_from_counts(const ConfusionCounts& counts, double alpha = kPsaTolerance);

MetricsReport evaluate(std::span<const std::uint8_t> predictions, const GroundTruth& truth,
                       double alpha = kPsaTolerance);

void to_json(nlohmann::json& j, const ConfusionCounts& c);
void to_json(nlohmann::json& j, const MetricsReport& r);

}  // namespace hfsnn
