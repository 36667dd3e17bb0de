#include "hfsnn/snn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hfsnn/error.hpp"
#include "hfsnn/rng.hpp"
#include "json.hpp"

namespace hfsnn {

using nlohmann::json;

void LifParams::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
    if (!(v_thresh > 0.0)) throw ConfigError("v_thresh must be > 0");
    if (refractory_steps < 0) throw ConfigError("refractory_steps must be >= 0");
}

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::kModel1: return "model1";
        case ModelVariant::kModel2: return "model2";
        case ModelVariant::kModel3: return "model3";
    }
    return "?";
}

ModelVariant model_variant_from_string(const std::string& s) {
    if (s == "model1") return ModelVariant::kModel1;
    if (s == "model2") return ModelVariant::kModel2;
    if (s == "model3") return ModelVariant::kModel3;
    throw ConfigError("unknown model variant '" + s + "'");
}

std::string to_string(SynapseSign s) {
    switch (s) {
        case SynapseSign::kExcitatory: return "excitatory";
        case SynapseSign::kInhibitory: return "inhibitory";
        case SynapseSign::kUnconstrained: return "unconstrained";
    }
    return "?";
}

SynapseSign synapse_sign_from_string(const std::string& s) {
    if (s == "excitatory") return SynapseSign::kExcitatory;
    if (s == "inhibitory") return SynapseSign::kInhibitory;
    if (s == "unconstrained") return SynapseSign::kUnconstrained;
    throw ConfigError("unknown synapse sign '" + s + "'");
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

namespace {

Topology double_input(ModelVariant variant, std::size_t n_lags, std::size_t n_hidden, bool inhibition) {
    if (n_lags == 0) throw ConfigError("input width per pathway must be >= 1");
    if (n_hidden == 0 || n_hidden % 2 != 0) throw ConfigError("n_hidden must be even and >= 2");
    const std::size_t k = n_lags, half = n_hidden / 2;
    Topology t;
    t.variant = variant;
    t.layer_sizes = {2 * k, n_hidden, 1};
    t.groups.push_back({"x1_h1", 1, 0, k, 0, half, SynapseSign::kExcitatory});
    t.groups.push_back({"x2_h2", 1, k, 2 * k, half, n_hidden, SynapseSign::kExcitatory});
    t.groups.push_back({"h_out", 2, 0, n_hidden, 0, 1, SynapseSign::kExcitatory});
    if (inhibition) {
        t.groups.push_back({"x1_h2", 1, 0, k, half, n_hidden, SynapseSign::kInhibitory});
        t.groups.push_back({"x2_h1", 1, k, 2 * k, 0, half, SynapseSign::kInhibitory});
    }
    return t;
}

}  // namespace

Topology Topology::model1(std::size_t n_hidden) {
    return double_input(ModelVariant::kModel1, 1, n_hidden, false);
}

Topology Topology::model2(std::size_t n_lags, std::size_t n_hidden) {
    return double_input(ModelVariant::kModel2, n_lags, n_hidden, true);
}

Topology Topology::model3(std::size_t n_inputs, std::size_t n_hidden, std::size_t n_hidden_layers,
                          std::size_t n_outputs) {
    if (n_inputs == 0 || n_hidden == 0 || n_hidden_layers == 0 || n_outputs == 0)
        throw ConfigError("model3 layer sizes must be >= 1");
    Topology t;
    t.variant = ModelVariant::kModel3;
    t.layer_sizes.push_back(n_inputs);
    for (std::size_t i = 0; i < n_hidden_layers; ++i) t.layer_sizes.push_back(n_hidden);
    t.layer_sizes.push_back(n_outputs);
    for (std::size_t l = 1; l < t.layer_sizes.size(); ++l) {
        const std::string name = (l == 1 ? std::string("in") : "h" + std::to_string(l - 1)) + "_" +
                                 (l + 1 == t.layer_sizes.size() ? std::string("out") : "h" + std::to_string(l));
        t.groups.push_back({name, l, 0, t.layer_sizes[l - 1], 0, t.layer_sizes[l], SynapseSign::kUnconstrained});
    }
    return t;
}

void Topology::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("topology needs an input and at least one LIF layer");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw ConfigError("empty layer in topology");
    for (const SynapseGroup& g : groups) {
        if (g.target_layer == 0 || g.target_layer >= layer_sizes.size())
            throw ConfigError("synapse group '" + g.name + "' targets a non-LIF layer");
        if (g.source_begin >= g.source_end || g.source_end > layer_sizes[g.source_layer()] ||
            g.target_begin >= g.target_end || g.target_end > layer_sizes[g.target_layer])
            throw ConfigError("synapse group '" + g.name + "' has an invalid range");
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

void NetworkState::reset_dynamics() {
    for (auto& v : potentials) std::fill(v.begin(), v.end(), 0.0);
    for (auto& r : refractory) std::fill(r.begin(), r.end(), 0);
}

void NetworkState::check_weight_bounds() const {
    for (std::size_t g = 0; g < weights.size(); ++g) {
        const SynapseSign sign = topology.groups[g].sign;
        for (double w : weights[g]) {
            if (!std::isfinite(w)) throw Error("non-finite weight in group " + topology.groups[g].name);
            if ((sign == SynapseSign::kExcitatory && (w < 0.0 || w > 1.0)) ||
                (sign == SynapseSign::kInhibitory && (w < -1.0 || w > 0.0)))
                throw Error("weight " + std::to_string(w) + " out of bounds in group " + topology.groups[g].name);
        }
    }
}

NetworkState init_network(const Topology& topology, const LifParams& lif, std::uint64_t seed,
                          WeightInitRange range) {
    topology.validate();
    lif.validate();
    if (!(range.low >= 0.0 && range.low <= range.high && range.high <= 1.0))
        throw ConfigError("weight init range must satisfy 0 <= low <= high <= 1");

    NetworkState s;
    s.topology = topology;
    s.lif = lif;
    s.seed = seed;

    std::vector<std::vector<std::size_t>> fan_in(topology.layer_sizes.size());
    for (std::size_t l = 0; l < fan_in.size(); ++l) fan_in[l].assign(topology.layer_sizes[l], 0);
    for (const SynapseGroup& g : topology.groups)
        for (std::size_t j = g.target_begin; j < g.target_end; ++j) fan_in[g.target_layer][j] += g.rows();

    for (std::size_t gi = 0; gi < topology.groups.size(); ++gi) {
        const SynapseGroup& g = topology.groups[gi];
        std::vector<double> w(g.rows() * g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) {
                const double u = to_unit(counter_hash(seed, gi, i, j));
                double& x = w[i * g.cols() + j];
                switch (g.sign) {
                    case SynapseSign::kExcitatory: x = range.low + (range.high - range.low) * u; break;
                    case SynapseSign::kInhibitory: x = -(range.low + (range.high - range.low) * u); break;
                    case SynapseSign::kUnconstrained: {
                        const double k = 1.0 / std::sqrt(static_cast<double>(fan_in[g.target_layer][g.target_begin + j]));
                        x = -k + 2.0 * k * u;
                        break;
                    }
                }
            }
        }
        s.weights.push_back(std::move(w));
    }
    for (std::size_t l = 1; l < topology.layer_sizes.size(); ++l) {
        s.potentials.emplace_back(topology.layer_sizes[l], 0.0);
        s.refractory.emplace_back(topology.layer_sizes[l], 0);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

void step_lif(const LifParams& lif, std::span<double> potentials, std::span<int> refractory,
              std::span<const double> currents, std::span<std::uint8_t> spikes) {
    for (std::size_t i = 0; i < potentials.size(); ++i) {
        double& v = potentials[i];
        if (refractory[i] > 0) {
            --refractory[i];
            v = lif.beta * v;
            spikes[i] = 0;
            continue;
        }
        v = lif.beta * v + currents[i];
        if (v >= lif.v_thresh) {
            spikes[i] = 1;
            v -= lif.v_thresh;
            refractory[i] = lif.refractory_steps;
        } else {
            spikes[i] = 0;
        }
    }
}

void simulate_timestamp(NetworkState& state, std::span<const std::uint8_t> input, std::size_t timesteps,
                        SimOutput& out) {
    const Topology& topo = state.topology;
    const std::size_t K = topo.input_width();
    if (input.size() != K * timesteps)
        throw DataError("timestamp block has " + std::to_string(input.size()) + " entries, expected " +
                        std::to_string(K) + " x " + std::to_string(timesteps));

    const std::size_t n_layers = topo.layer_sizes.size();
    out.timesteps = timesteps;
    out.rasters.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) out.rasters[l].assign(timesteps * topo.layer_sizes[l], 0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < timesteps; ++t) out.rasters[0][t * K + k] = input[k * timesteps + t];

    state.reset_dynamics();
    std::vector<std::vector<double>> currents(n_layers);
    for (std::size_t l = 1; l < n_layers; ++l) currents[l].resize(topo.layer_sizes[l]);

    for (std::size_t t = 0; t < timesteps; ++t) {
        for (std::size_t l = 1; l < n_layers; ++l) std::fill(currents[l].begin(), currents[l].end(), 0.0);
        if (t > 0) {
            for (std::size_t gi = 0; gi < topo.groups.size(); ++gi) {
                const SynapseGroup& g = topo.groups[gi];
                const std::size_t src_size = topo.layer_sizes[g.source_layer()];
                const std::uint8_t* pre = out.rasters[g.source_layer()].data() + (t - 1) * src_size;
                const double* w = state.weights[gi].data();
                double* cur = currents[g.target_layer].data() + g.target_begin;
                const std::size_t cols = g.cols();
                for (std::size_t i = g.source_begin; i < g.source_end; ++i) {
                    if (!pre[i]) continue;
                    const double* row = w + (i - g.source_begin) * cols;
                    for (std::size_t j = 0; j < cols; ++j) cur[j] += row[j];
                }
            }
        }
        for (std::size_t l = 1; l < n_layers; ++l) {
            const std::size_t size = topo.layer_sizes[l];
            step_lif(state.lif, state.potentials[l - 1], state.refractory[l - 1], currents[l],
                     std::span<std::uint8_t>(out.rasters[l].data() + t * size, size));
        }
    }

    const std::size_t n_out = topo.output_width();
    out.output_counts.assign(n_out, 0);
    const auto& last = out.rasters.back();
    for (std::size_t t = 0; t < timesteps; ++t)
        for (std::size_t j = 0; j < n_out; ++j) out.output_counts[j] += last[t * n_out + j];
}

SimOutput simulate_timestamp(NetworkState& state, std::span<const std::uint8_t> input, std::size_t timesteps) {
    SimOutput out;
    simulate_timestamp(state, input, timesteps, out);
    return out;
}

std::vector<std::uint8_t> decode_predictions(std::span<const int> counts, std::size_t n_outputs, int d_thresh) {
    if (n_outputs == 0 || counts.size() % n_outputs != 0) throw DataError("count array does not match output width");
    const std::size_t n = counts.size() / n_outputs;
    std::vector<std::uint8_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (n_outputs == 1) {
            out[i] = decode(counts[i], d_thresh) ? 1 : 0;
        } else {
            const int* c = counts.data() + i * n_outputs;
            const auto best = static_cast<std::size_t>(std::max_element(c, c + n_outputs) - c);
            out[i] = best == 1 ? 1 : 0;
        }
    }
    return out;
}

std::vector<int> infer_counts(const NetworkState& state, const SpikeTensor& spikes) {
    if (spikes.channels() != state.topology.input_width()) throw DataError("spike tensor width does not match topology");
    const std::size_t n_out = state.topology.output_width();
    std::vector<int> counts(spikes.timestamps() * n_out, 0);
    const auto n = static_cast<std::ptrdiff_t>(spikes.timestamps());
#pragma omp parallel
    {
        NetworkState local = state;
        SimOutput sim;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            simulate_timestamp(local, spikes.timestamp(static_cast<std::size_t>(i)), spikes.timesteps(), sim);
            std::copy(sim.output_counts.begin(), sim.output_counts.end(), counts.begin() + i * static_cast<std::ptrdiff_t>(n_out));
        }
    }
    return counts;
}

namespace serial {
std::vector<int> infer_counts(const NetworkState& state, const SpikeTensor& spikes) {
    if (spikes.channels() != state.topology.input_width()) throw DataError("spike tensor width does not match topology");
    const std::size_t n_out = state.topology.output_width();
    std::vector<int> counts;
    counts.reserve(spikes.timestamps() * n_out);
    NetworkState local = state;
    SimOutput sim;
    for (std::size_t i = 0; i < spikes.timestamps(); ++i) {
        simulate_timestamp(local, spikes.timestamp(i), spikes.timesteps(), sim);
        counts.insert(counts.end(), sim.output_counts.begin(), sim.output_counts.end());
    }
    return counts;
}
}  // namespace serial

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

std::string checkpoint_to_json(const Checkpoint& c) {
    const NetworkState& s = c.state;
    json groups = json::array();
    for (const SynapseGroup& g : s.topology.groups) {
        groups.push_back({{"name", g.name},
                          {"target_layer", g.target_layer},
                          {"source_begin", g.source_begin},
                          {"source_end", g.source_end},
                          {"target_begin", g.target_begin},
                          {"target_end", g.target_end},
                          {"sign", to_string(g.sign)}});
    }
    json doc = {
        {"format", "hfsnn-checkpoint"},
        {"version", 1},
        {"topology", {{"variant", to_string(s.topology.variant)}, {"layer_sizes", s.topology.layer_sizes}, {"groups", groups}}},
        {"lif", {{"beta", s.lif.beta}, {"v_thresh", s.lif.v_thresh}, {"refractory_steps", s.lif.refractory_steps}}},
        {"d_thresh", c.d_thresh},
        {"seed", s.seed},
        {"weights", s.weights},
    };
    return doc.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid checkpoint JSON: ") + e.what());
    }
    try {
        if (doc.at("format") != "hfsnn-checkpoint") throw DataError("not a checkpoint document");
        if (doc.at("version").get<int>() != 1) throw DataError("unsupported checkpoint version");
        Checkpoint c;
        NetworkState& s = c.state;
        const json& topo = doc.at("topology");
        s.topology.variant = model_variant_from_string(topo.at("variant").get<std::string>());
        s.topology.layer_sizes = topo.at("layer_sizes").get<std::vector<std::size_t>>();
        for (const json& g : topo.at("groups")) {
            s.topology.groups.push_back({g.at("name").get<std::string>(), g.at("target_layer").get<std::size_t>(),
                                         g.at("source_begin").get<std::size_t>(), g.at("source_end").get<std::size_t>(),
                                         g.at("target_begin").get<std::size_t>(), g.at("target_end").get<std::size_t>(),
                                         synapse_sign_from_string(g.at("sign").get<std::string>())});
        }
        s.topology.validate();
        const json& lif = doc.at("lif");
        s.lif = {lif.at("beta").get<double>(), lif.at("v_thresh").get<double>(), lif.at("refractory_steps").get<int>()};
        s.lif.validate();
        c.d_thresh = doc.at("d_thresh").get<int>();
        s.seed = doc.at("seed").get<std::uint64_t>();
        s.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
        if (s.weights.size() != s.topology.groups.size()) throw DataError("checkpoint weight groups do not match topology");
        for (std::size_t g = 0; g < s.weights.size(); ++g)
            if (s.weights[g].size() != s.topology.groups[g].rows() * s.topology.groups[g].cols())
                throw DataError("checkpoint weight matrix " + s.topology.groups[g].name + " has the wrong size");
        for (std::size_t l = 1; l < s.topology.layer_sizes.size(); ++l) {
            s.potentials.emplace_back(s.topology.layer_sizes[l], 0.0);
            s.refractory.emplace_back(s.topology.layer_sizes[l], 0);
        }
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << checkpoint_to_json(checkpoint) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

}  // namespace hfsnn
