#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hfsnn/market_data.hpp"
#include "hfsnn/snn.hpp"

namespace hfsnn {

/// Label value for timestamps without ground truth; such rows are skipped.
inline constexpr std::uint8_t kUnlabeled = 0xff;

struct TrainConfig {
    double learning_rate = 0.005;
    std::size_t n_hidden = 128;
    std::size_t n_hidden_layers = 2;
    double v_thresh = 1.0;
    double beta = 0.9;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double target_hi = 0.8;
    double target_lo = 0.2;
    double surrogate_slope = 25.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    LifParams lif() const { return {beta, v_thresh, 1}; }
};

using WeightSet = std::vector<std::vector<double>>;

struct AdamState {
    WeightSet m;
    WeightSet v;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(const WeightSet& params, const TrainConfig& config);

/// Bias-corrected Adam update in place.
void adam_step(WeightSet& params, const WeightSet& grads, AdamState& state, double learning_rate);

/// Fast-sigmoid derivative 1 / (1 + slope |x|)^2, used for dS/dV on the
/// backward pass in place of the Heaviside derivative.
double surrogate_grad(double v_minus_thresh, double slope);

/// Squared distance of each output count from its target count
/// (target_hi * T for the labelled class, target_lo * T for the others).
double count_mse_loss(std::span<const double> counts, std::size_t label, std::size_t timesteps, double target_hi,
                      double target_lo);

/// kHeaviside is the real spiking forward pass (identical to
/// simulate_timestamp). kSmooth replaces the emitted spike value by
/// x / (1 + slope |x|), whose derivative is exactly surrogate_grad; reset
/// and refractoriness still follow the hard threshold. The smooth mode
/// exists so gradients can be checked against finite differences.
enum class SpikeFunction { kHeaviside, kSmooth };

/// Forward pass, returns output counts (real-valued in smooth mode).
std::vector<double> forward_counts(const NetworkState& state, std::span<const std::uint8_t> input,
                                   std::size_t timesteps, SpikeFunction mode, double slope);

/// BPTT for one timestamp: adds dLoss/dW into `grads` and returns the loss.
/// Gradients flow through the membrane recurrence and the surrogate; the
/// reset's spike indicator and the refractory mask are detached.
double sample_gradient(const NetworkState& state, std::span<const std::uint8_t> input, std::size_t timesteps,
                       std::size_t label, const TrainConfig& config, SpikeFunction mode, WeightSet& grads);

struct BatchGradient {
    WeightSet grads;  ///< mean over the batch
    double mean_loss = 0.0;
};

/// Mean gradient over `indices`. Samples are split into fixed chunks that
/// run in parallel and are reduced in chunk order, so the result does not
/// depend on the thread count.
BatchGradient batch_gradient(const NetworkState& state, const SpikeTensor& spikes,
                             std::span<const std::uint8_t> labels, std::span<const std::size_t> indices,
                             const TrainConfig& config, SpikeFunction mode = SpikeFunction::kHeaviside);

namespace serial {
BatchGradient batch_gradient(const NetworkState& state, const SpikeTensor& spikes,
                             std::span<const std::uint8_t> labels, std::span<const std::size_t> indices,
                             const TrainConfig& config, SpikeFunction mode = SpikeFunction::kHeaviside);
}

struct LossHistoryEntry {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
};

struct SupervisedResult {
    NetworkState network;
    std::vector<LossHistoryEntry> history;
};

/// Model 3 network for `n_inputs` channels built from config.
NetworkState make_supervised_network(std::size_t n_inputs, const TrainConfig& config);

/// Mini-batch BPTT with Adam. One history entry per epoch, measured on the
/// full labelled set after that epoch's updates.
SupervisedResult train_supervised(NetworkState network, const SpikeTensor& spikes,
                                  std::span<const std::uint8_t> labels, const TrainConfig& config);

/// Mean loss and accuracy over the labelled rows, hard spikes.
LossHistoryEntry evaluate_supervised(const NetworkState& network, const SpikeTensor& spikes,
                                     std::span<const std::uint8_t> labels, const TrainConfig& config);

void write_loss_history_csv(const std::filesystem::path& path, std::span<const LossHistoryEntry> history);

}  // namespace hfsnn
