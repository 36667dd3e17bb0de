#include "hfsnn/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hfsnn/error.hpp"

namespace hfsnn {

void StdpParams::validate() const {
    auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (!positive(a_plus) || !positive(a_minus) || !positive(b_plus) || !positive(b_minus))
        throw ConfigError("STDP learning rates must be > 0");
    if (a_minus > a_plus) throw ConfigError("STDP requires a_minus <= a_plus");
    if (b_minus > b_plus) throw ConfigError("STDP requires b_minus <= b_plus");
    if (!(tau_plus >= 1.0 && tau_minus >= 1.0 && theta_plus >= 1.0 && theta_minus >= 1.0))
        throw ConfigError("STDP time constants must be >= 1");
    if (!positive(eta)) throw ConfigError("eta must be > 0");
}

double stdp_window(int dt, const StdpParams& p, SynapseSign sign) {
    const bool inh = sign == SynapseSign::kInhibitory;
    const double amp_plus = inh ? p.b_plus : p.a_plus;
    const double amp_minus = inh ? p.b_minus : p.a_minus;
    const double tau_plus = inh ? p.theta_plus : p.tau_plus;
    const double tau_minus = inh ? p.theta_minus : p.tau_minus;
    if (dt > 0) return p.eta * amp_plus * std::exp(-dt / tau_plus);
    if (dt < 0) return -p.eta * amp_minus * std::exp(dt / tau_minus);
    return 0.0;
}

std::vector<double> stdp_deltas(const RasterView& pre, const RasterView& post, std::size_t timesteps,
                                const StdpParams& p, SynapseSign sign) {
    if (sign == SynapseSign::kUnconstrained) throw ConfigError("STDP is undefined for unconstrained synapses");
    const bool inh = sign == SynapseSign::kInhibitory;
    const double amp_plus = p.eta * (inh ? p.b_plus : p.a_plus);
    const double amp_minus = p.eta * (inh ? p.b_minus : p.a_minus);
    const double decay_pre = std::exp(-1.0 / (inh ? p.theta_plus : p.tau_plus));
    const double decay_post = std::exp(-1.0 / (inh ? p.theta_minus : p.tau_minus));

    const std::size_t rows = pre.count, cols = post.count;
    std::vector<double> delta(rows * cols, 0.0);
    std::vector<double> x_pre(rows, 0.0), x_post(cols, 0.0);

    for (std::size_t t = 0; t < timesteps; ++t) {
        for (double& x : x_pre) x *= decay_pre;
        for (double& x : x_post) x *= decay_post;
        // Traces hold only spikes strictly before t, so same-step pairs add nothing.
        for (std::size_t j = 0; j < cols; ++j) {
            if (!post.at(t, j)) continue;
            for (std::size_t i = 0; i < rows; ++i) delta[i * cols + j] += amp_plus * x_pre[i];
        }
        for (std::size_t i = 0; i < rows; ++i) {
            if (!pre.at(t, i)) continue;
            double* row = delta.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) row[j] -= amp_minus * x_post[j];
        }
        for (std::size_t i = 0; i < rows; ++i) x_pre[i] += pre.at(t, i);
        for (std::size_t j = 0; j < cols; ++j) x_post[j] += post.at(t, j);
    }
    if (inh)
        for (double& d : delta) d = -d;
    return delta;
}

std::vector<double> apply_stdp(const NetworkState& state, const SimOutput& sim, std::size_t group,
                               const StdpParams& params) {
    const SynapseGroup& g = state.topology.groups.at(group);
    const auto& sizes = state.topology.layer_sizes;
    if (sim.rasters.size() != sizes.size()) throw DataError("simulation output does not match topology");
    for (std::size_t l = 0; l < sizes.size(); ++l)
        if (sim.rasters[l].size() != sizes[l] * sim.timesteps) throw DataError("raster length mismatch");
    const RasterView pre{sim.rasters[g.source_layer()].data(), sizes[g.source_layer()], g.source_begin, g.rows()};
    const RasterView post{sim.rasters[g.target_layer].data(), sizes[g.target_layer], g.target_begin, g.cols()};
    return stdp_deltas(pre, post, sim.timesteps, params, g.sign);
}

namespace {

void clamp_to_sign(std::span<double> weights, SynapseSign sign) {
    if (sign == SynapseSign::kExcitatory)
        for (double& w : weights) w = std::clamp(w, 0.0, 1.0);
    else if (sign == SynapseSign::kInhibitory)
        for (double& w : weights) w = std::clamp(w, -1.0, 0.0);
}

double mean_abs(std::span<const double> weights) {
    if (weights.empty()) return 0.0;
    double s = 0.0;
    for (double w : weights) s += std::abs(w);
    return s / static_cast<double>(weights.size());
}

double mean(std::span<const double> weights) {
    if (weights.empty()) return 0.0;
    double s = 0.0;
    for (double w : weights) s += w;
    return s / static_cast<double>(weights.size());
}

}  // namespace

void apply_deltas(std::span<double> weights, std::span<const double> deltas, SynapseSign sign) {
    if (weights.size() != deltas.size()) throw DataError("delta matrix does not match weights");
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += deltas[i];
    clamp_to_sign(weights, sign);
}

bool homeostasis(std::span<double> weights, SynapseSign sign) {
    const bool fire = mean_abs(weights) > kHomeostasisTrigger;
    if (fire)
        for (double& w : weights) w *= kHomeostasisFactor;
    clamp_to_sign(weights, sign);
    return fire;
}

TrainingLog train_unsupervised(NetworkState& state, const SpikeTensor& spikes, const StdpParams& params,
                               const UnsupervisedOptions& options) {
    params.validate();
    const Topology& topo = state.topology;
    for (const SynapseGroup& g : topo.groups)
        if (g.sign == SynapseSign::kUnconstrained)
            throw ConfigError("unsupervised STDP training needs sign-constrained synapse groups");
    if (spikes.channels() != topo.input_width())
        throw DataError("spike tensor has " + std::to_string(spikes.channels()) + " channels, topology expects " +
                        std::to_string(topo.input_width()));

    const std::size_t n_groups = topo.groups.size();
    const std::size_t interval = std::max<std::size_t>(1, options.log_interval);
    TrainingLog log;
    std::vector<bool> fired_since_log(n_groups, false);
    SimOutput sim;

    for (std::size_t n = 0; n < spikes.timestamps(); ++n) {
        simulate_timestamp(state, spikes.timestamp(n), spikes.timesteps(), sim);
        for (std::size_t g = 0; g < n_groups; ++g) {
            const auto delta = apply_stdp(state, sim, g, params);
            apply_deltas(state.weights[g], delta, topo.groups[g].sign);
        }
        for (std::size_t g = 0; g < n_groups; ++g)
            if (homeostasis(state.weights[g], topo.groups[g].sign)) fired_since_log[g] = true;

        if ((n + 1) % interval == 0 || n + 1 == spikes.timestamps()) {
            for (std::size_t g = 0; g < n_groups; ++g) {
                log.entries.push_back({n, topo.groups[g].name, mean(state.weights[g]), fired_since_log[g]});
                fired_since_log[g] = false;
            }
        }
    }
    return log;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "timestamp_index,group,mean_weight,homeostasis_applied\n";
    out.precision(17);
    for (const auto& e : entries)
        out << e.timestamp_index << ',' << e.group << ',' << e.mean_weight << ',' << (e.homeostasis_applied ? 1 : 0)
            << '\n';
}

}  // namespace hfsnn
