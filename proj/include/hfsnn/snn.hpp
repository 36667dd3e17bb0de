#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hfsnn/market_data.hpp"

namespace hfsnn {

/// Discrete-time leaky integrate-and-fire parameters. Each step computes
/// V <- beta * V + I (unit resistance); crossing v_thresh emits a spike,
/// subtracts v_thresh, and blocks the neuron for refractory_steps steps.
struct LifParams {
    double beta = 0.9;
    double v_thresh = 1.0;
    int refractory_steps = 1;

    void validate() const;
    bool operator==(const LifParams&) const = default;
};

enum class ModelVariant { kModel1, kModel2, kModel3 };
enum class SynapseSign { kExcitatory, kInhibitory, kUnconstrained };

std::string to_string(ModelVariant v);
ModelVariant model_variant_from_string(const std::string& s);
std::string to_string(SynapseSign s);
SynapseSign synapse_sign_from_string(const std::string& s);

/// Dense block of synapses from a contiguous range of layer `target_layer - 1`
/// onto a contiguous range of `target_layer`. The ranges are the connectivity
/// mask. Weights are stored row-major, one row per source neuron.
struct SynapseGroup {
    std::string name;
    std::size_t target_layer = 1;
    std::size_t source_begin = 0, source_end = 0;
    std::size_t target_begin = 0, target_end = 0;
    SynapseSign sign = SynapseSign::kExcitatory;

    std::size_t source_layer() const { return target_layer - 1; }
    std::size_t rows() const { return source_end - source_begin; }
    std::size_t cols() const { return target_end - target_begin; }

    bool operator==(const SynapseGroup&) const = default;
};

/// Layer 0 is the input layer (spike sources, not neurons); layers 1..L are
/// LIF layers and the last one is the output.
struct Topology {
    ModelVariant variant = ModelVariant::kModel1;
    std::vector<std::size_t> layer_sizes;
    std::vector<SynapseGroup> groups;

    /// Two inputs (positive/negative difference), hidden split into H1/H2
    /// each fed exclusively by one input, one output fed by all hidden.
    static Topology model1(std::size_t n_hidden);
    /// Model 1 widened to `n_lags` inputs per pathway, plus inhibitory
    /// X1 -> H2 and X2 -> H1 groups.
    static Topology model2(std::size_t n_lags, std::size_t n_hidden);
    /// Dense feedforward network with unconstrained weights.
    static Topology model3(std::size_t n_inputs, std::size_t n_hidden, std::size_t n_hidden_layers = 2,
                           std::size_t n_outputs = 2);

    std::size_t input_width() const { return layer_sizes.front(); }
    std::size_t output_width() const { return layer_sizes.back(); }
    /// Number of LIF layers (hidden + output).
    std::size_t lif_layers() const { return layer_sizes.size() - 1; }

    void validate() const;
    bool operator==(const Topology&) const = default;
};

struct WeightInitRange {
    double low = 0.3;
    double high = 0.7;
};

struct NetworkState {
    Topology topology;
    LifParams lif;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> weights;     ///< per synapse group
    std::vector<std::vector<double>> potentials;  ///< per LIF layer (index = layer - 1)
    std::vector<std::vector<int>> refractory;     ///< per LIF layer

    void reset_dynamics();
    /// Throws if any weight violates its group's sign bound or is non-finite.
    void check_weight_bounds() const;
};

/// Excitatory weights uniform in [low, high], inhibitory in [-high, -low],
/// unconstrained in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
NetworkState init_network(const Topology& topology, const LifParams& lif, std::uint64_t seed,
                          WeightInitRange range = {});

/// One LIF update over a layer. Spans must all have the layer's size.
void step_lif(const LifParams& lif, std::span<double> potentials, std::span<int> refractory,
              std::span<const double> currents, std::span<std::uint8_t> spikes);

/// Spike rasters of every layer over the T steps of one timestamp,
/// time-major: rasters[layer][t * size + i]. Layer 0 is the input.
struct SimOutput {
    std::size_t timesteps = 0;
    std::vector<std::vector<std::uint8_t>> rasters;
    std::vector<int> output_counts;
};

/// Presents one timestamp (K x T block, channel-major as in SpikeTensor).
/// Potentials and refractory counters are cleared first. A spike emitted by
/// layer l at step t reaches layer l+1 at step t+1.
void simulate_timestamp(NetworkState& state, std::span<const std::uint8_t> input, std::size_t timesteps,
                        SimOutput& out);
SimOutput simulate_timestamp(NetworkState& state, std::span<const std::uint8_t> input, std::size_t timesteps);

/// Strict comparison: a prediction needs more than d_thresh output spikes.
constexpr bool decode(int output_count, int d_thresh) { return output_count > d_thresh; }

/// Single-output networks: count > d_thresh. Two-output networks: argmax,
/// ties resolved to class 0 (no spike).
std::vector<std::uint8_t> decode_predictions(std::span<const int> counts, std::size_t n_outputs, int d_thresh);

/// Output spike counts for every timestamp of `spikes`, row-major
/// [n * n_outputs + j]. Timestamps are independent trials, so they are
/// simulated in parallel with per-thread copies of the network.
std::vector<int> infer_counts(const NetworkState& state, const SpikeTensor& spikes);

namespace serial {
std::vector<int> infer_counts(const NetworkState& state, const SpikeTensor& spikes);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
    NetworkState state;
    int d_thresh = 0;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hfsnn
