#include "hfsnn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hfsnn/error.hpp"

namespace hfsnn {

std::vector<double> abs_returns(std::span<const double> prices) {
    if (prices.size() < 2) throw DataError("need at least two prices for returns");
    std::vector<double> out(prices.size() - 1);
    for (std::size_t t = 0; t + 1 < prices.size(); ++t) {
        if (!(prices[t] > 0.0) || !(prices[t + 1] > 0.0))
            throw DataError("non-positive price at bar " + std::to_string(prices[t] > 0.0 ? t + 1 : t));
        out[t] = std::abs(prices[t + 1] / prices[t] - 1.0);
    }
    return out;
}

double spike_threshold(std::span<const double> abs_rets) {
    if (abs_rets.empty()) throw DataError("median of an empty return series");
    std::vector<double> v(abs_rets.begin(), abs_rets.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

std::size_t GroundTruth::labeled_count() const {
    return static_cast<std::size_t>(std::count(labeled.begin(), labeled.end(), 1));
}

std::size_t GroundTruth::real_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) n += labeled[i] && is_real[i];
    return n;
}

GroundTruth label_ground_truth(std::span<const double> prices, std::size_t window, double r_thresh) {
    if (window == 0) throw ConfigError("label window must be >= 1");
    const std::size_t n = prices.size();
    if (n <= 2 * window)
        throw DataError("series of " + std::to_string(n) + " bars is too short for label window " +
                        std::to_string(window));
    const std::vector<double> r = abs_returns(prices);
    GroundTruth g;
    g.r_thresh = r_thresh;
    g.window = window;
    g.labeled.assign(n, 0);
    g.is_real.assign(n, 0);
    g.direction.assign(n, Direction::kNone);
    const double w = static_cast<double>(window);
    for (std::size_t t = window; t + window < n; ++t) {
        double s = 0.0;
        for (std::size_t k = t; k < t + window; ++k) s += r[k];
        g.labeled[t] = 1;
        g.is_real[t] = s / w > r_thresh ? 1 : 0;
        const double prod = (prices[t] - prices[t - window]) * (prices[t + window] - prices[t]);
        g.direction[t] = prod > 0.0 ? Direction::kMomentum : prod < 0.0 ? Direction::kReversion : Direction::kNone;
    }
    return g;
}

GroundTruth label_day(std::span<const double> prices, std::size_t window) {
    return label_ground_truth(prices, window, spike_threshold(abs_returns(prices)));
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    labeled += o.labeled;
    predicted += o.predicted;
    real += o.real;
    pred_real += o.pred_real;
    pred_fake += o.pred_fake;
    pred_momentum += o.pred_momentum;
    return *this;
}

ConfusionCounts count_confusion(std::span<const std::uint8_t> predictions, const GroundTruth& truth) {
    if (predictions.size() != truth.size())
        throw DataError("predictions (" + std::to_string(predictions.size()) + ") and ground truth (" +
                        std::to_string(truth.size()) + ") are misaligned");
    ConfusionCounts c;
    for (std::size_t t = 0; t < predictions.size(); ++t) {
        if (!truth.labeled[t]) continue;
        ++c.labeled;
        const bool real = truth.is_real[t] != 0;
        c.real += real;
        if (!predictions[t]) continue;
        ++c.predicted;
        if (real)
            ++c.pred_real;
        else
            ++c.pred_fake;
        if (real && truth.direction[t] == Direction::kMomentum) ++c.pred_momentum;
    }
    return c;
}

PsaResult psa(double spike_accuracy, double spiking_rate, double real_spiking_rate, double alpha) {
    if (!(real_spiking_rate > 0.0)) throw DataError("no real spikes in window");
    PsaResult r;
    r.srd = spiking_rate / real_spiking_rate - 1.0;
    r.psa = spike_accuracy * std::exp(-std::max(std::abs(r.srd) - alpha, 0.0));
    return r;
}

namespace {
std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

MetricsReport report_from_counts(const ConfusionCounts& c, double alpha) {
    MetricsReport r;
    r.counts = c;
    r.spike_accuracy = ratio(c.pred_real, c.predicted);
    r.momentum_spike_pct = ratio(c.pred_momentum, c.predicted);
    r.spiking_rate = ratio(c.predicted, c.labeled);
    r.real_spiking_rate = ratio(c.real, c.labeled);
    r.tpr = ratio(c.pred_real, c.real);
    r.fpr = ratio(c.pred_fake, c.fake());
    if (r.real_spiking_rate && *r.real_spiking_rate > 0.0) {
        r.srd = *r.spiking_rate / *r.real_spiking_rate - 1.0;
        if (r.spike_accuracy) r.psa = psa(*r.spike_accuracy, *r.spiking_rate, *r.real_spiking_rate, alpha).psa;
    }
    return r;
}

MetricsReport evaluate(std::span<const std::uint8_t> predictions, const GroundTruth& truth, double alpha) {
    return report_from_counts(count_confusion(predictions, truth), alpha);
}

namespace {
nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
}  // namespace

void to_json(nlohmann::json& j, const ConfusionCounts& c) {
    j = {{"labeled", c.labeled},     {"predicted", c.predicted}, {"real", c.real},
         {"pred_real", c.pred_real}, {"pred_fake", c.pred_fake}, {"pred_momentum", c.pred_momentum}};
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = {{"spike_accuracy", opt(r.spike_accuracy)},
         {"momentum_spike_pct", opt(r.momentum_spike_pct)},
         {"spiking_rate", opt(r.spiking_rate)},
         {"real_spiking_rate", opt(r.real_spiking_rate)},
         {"tpr", opt(r.tpr)},
         {"fpr", opt(r.fpr)},
         {"psa", opt(r.psa)},
         {"srd", opt(r.srd)},
         {"counts", r.counts}};
}

}  // namespace hfsnn
