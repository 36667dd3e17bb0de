#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hfsnn/snn.hpp"

namespace hfsnn {

/// Exponential-window STDP parameters. The a/tau set drives excitatory
/// synapses, the b/theta set inhibitory ones.
struct StdpParams {
    double a_plus = 0.005;
    double a_minus = 0.004;
    double tau_plus = 20.0;
    double tau_minus = 20.0;
    double b_plus = 0.005;
    double b_minus = 0.004;
    double theta_plus = 20.0;
    double theta_minus = 20.0;
    double eta = 1.0;

    /// Rejects a_minus > a_plus (and b_minus > b_plus) instead of clamping.
    void validate() const;
};

/// eta * W(dt) with dt = t_post - t_pre in timesteps:
/// +A exp(-dt/tau+) for dt > 0, -A- exp(dt/tau-) for dt < 0, 0 for dt = 0.
/// Inhibitory synapses use (B, theta); the sign flip of their update is
/// applied by stdp_deltas, not here.
double stdp_window(int dt, const StdpParams& params, SynapseSign sign);

/// Contiguous neuron range inside a time-major raster [t * stride + i].
struct RasterView {
    const std::uint8_t* data = nullptr;
    std::size_t stride = 0;
    std::size_t begin = 0;
    std::size_t count = 0;

    std::uint8_t at(std::size_t t, std::size_t i) const { return data[t * stride + begin + i]; }
};

/// All-to-all pairing of pre and post spikes within one timestamp, realised
/// with exponential traces. Returns the update to add to each weight
/// (row = pre, col = post), already negated for inhibitory groups.
std::vector<double> stdp_deltas(const RasterView& pre, const RasterView& post, std::size_t timesteps,
                                const StdpParams& params, SynapseSign sign);

/// stdp_deltas for synapse group `group` of a simulated timestamp.
std::vector<double> apply_stdp(const NetworkState& state, const SimOutput& sim, std::size_t group,
                               const StdpParams& params);

/// Adds deltas and clamps to the group's sign bounds.
void apply_deltas(std::span<double> weights, std::span<const double> deltas, SynapseSign sign);

inline constexpr double kHomeostasisTrigger = 0.5;
inline constexpr double kHomeostasisFactor = 0.95;

/// If mean |w| exceeds 0.5, scales the group by 0.95, then clamps to the
/// sign bounds. Returns whether the reduction fired.
bool homeostasis(std::span<double> weights, SynapseSign sign);

struct TrainingLogEntry {
    std::size_t timestamp_index = 0;
    std::string group;
    double mean_weight = 0.0;
    bool homeostasis_applied = false;  ///< fired at least once since the previous entry
};

struct TrainingLog {
    std::vector<TrainingLogEntry> entries;
    void write_csv(const std::filesystem::path& path) const;
};

struct UnsupervisedOptions {
    std::size_t log_interval = 100;
};

/// For each timestamp in order: simulate, accumulate and apply STDP per
/// group, then homeostasis per group.
TrainingLog train_unsupervised(NetworkState& state, const SpikeTensor& spikes, const StdpParams& params,
                               const UnsupervisedOptions& options = {});

}  // namespace hfsnn
