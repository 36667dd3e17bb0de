#include "hfsnn/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hfsnn/error.hpp"
#include "hfsnn/rng.hpp"

namespace hfsnn {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (n_hidden == 0) throw ConfigError("n_hidden must be >= 1");
    if (n_hidden_layers == 0) throw ConfigError("n_hidden_layers must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(target_lo > 0.0 && target_lo < target_hi && target_hi <= 1.0))
        throw ConfigError("targets must satisfy 0 < target_lo < target_hi <= 1");
    if (!(surrogate_slope > 0.0)) throw ConfigError("surrogate_slope must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    lif().validate();
}

AdamState make_adam(const WeightSet& params, const TrainConfig& config) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    s.beta1 = config.adam_beta1;
    s.beta2 = config.adam_beta2;
    s.eps = config.adam_eps;
    return s;
}

void adam_step(WeightSet& params, const WeightSet& grads, AdamState& s, double learning_rate) {
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t g = 0; g < params.size(); ++g) {
        for (std::size_t i = 0; i < params[g].size(); ++i) {
            const double grad = grads[g][i];
            double& m = s.m[g][i];
            double& v = s.v[g][i];
            m = s.beta1 * m + (1.0 - s.beta1) * grad;
            v = s.beta2 * v + (1.0 - s.beta2) * grad * grad;
            params[g][i] -= learning_rate * (m / c1) / (std::sqrt(v / c2) + s.eps);
        }
    }
}

double surrogate_grad(double x, double slope) {
    const double d = 1.0 + slope * std::abs(x);
    return 1.0 / (d * d);
}

double count_mse_loss(std::span<const double> counts, std::size_t label, std::size_t timesteps, double target_hi,
                      double target_lo) {
    double loss = 0.0;
    const double T = static_cast<double>(timesteps);
    for (std::size_t j = 0; j < counts.size(); ++j) {
        const double d = counts[j] - (j == label ? target_hi : target_lo) * T;
        loss += d * d;
    }
    return loss;
}

namespace {

/// Forward record of one timestamp, time-major per LIF layer.
struct Tape {
    std::size_t timesteps = 0;
    std::vector<std::vector<double>> spikes;       ///< emitted value, layer 0 = input
    std::vector<std::vector<double>> over;         ///< U - theta at each non-refractory step
    std::vector<std::vector<std::uint8_t>> blocked;  ///< refractory at that step
};

void run_forward(const NetworkState& state, std::span<const std::uint8_t> input, std::size_t T, SpikeFunction mode,
                 double slope, Tape& tape) {
    const Topology& topo = state.topology;
    const std::size_t K = topo.input_width();
    if (input.size() != K * T) throw DataError("timestamp block does not match the network input width");
    const std::size_t n_layers = topo.layer_sizes.size();
    const LifParams& lif = state.lif;

    tape.timesteps = T;
    tape.spikes.resize(n_layers);
    tape.over.resize(n_layers);
    tape.blocked.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        tape.spikes[l].assign(T * topo.layer_sizes[l], 0.0);
        tape.over[l].assign(T * topo.layer_sizes[l], 0.0);
        tape.blocked[l].assign(T * topo.layer_sizes[l], 0);
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < T; ++t) tape.spikes[0][t * K + k] = input[k * T + t];

    std::vector<std::vector<double>> v(n_layers), cur(n_layers);
    std::vector<std::vector<int>> refr(n_layers);
    for (std::size_t l = 1; l < n_layers; ++l) {
        v[l].assign(topo.layer_sizes[l], 0.0);
        cur[l].assign(topo.layer_sizes[l], 0.0);
        refr[l].assign(topo.layer_sizes[l], 0);
    }

    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t l = 1; l < n_layers; ++l) std::fill(cur[l].begin(), cur[l].end(), 0.0);
        if (t > 0) {
            for (std::size_t gi = 0; gi < topo.groups.size(); ++gi) {
                const SynapseGroup& g = topo.groups[gi];
                const std::size_t src_size = topo.layer_sizes[g.source_layer()];
                const double* pre = tape.spikes[g.source_layer()].data() + (t - 1) * src_size;
                const double* w = state.weights[gi].data();
                double* c = cur[g.target_layer].data() + g.target_begin;
                const std::size_t cols = g.cols();
                for (std::size_t i = g.source_begin; i < g.source_end; ++i) {
                    const double s = pre[i];
                    if (s == 0.0) continue;
                    const double* row = w + (i - g.source_begin) * cols;
                    if (s == 1.0) {
                        for (std::size_t j = 0; j < cols; ++j) c[j] += row[j];
                    } else {
                        for (std::size_t j = 0; j < cols; ++j) c[j] += s * row[j];
                    }
                }
            }
        }
        for (std::size_t l = 1; l < n_layers; ++l) {
            const std::size_t size = topo.layer_sizes[l];
            double* out = tape.spikes[l].data() + t * size;
            double* over = tape.over[l].data() + t * size;
            std::uint8_t* blocked = tape.blocked[l].data() + t * size;
            for (std::size_t i = 0; i < size; ++i) {
                if (refr[l][i] > 0) {
                    --refr[l][i];
                    v[l][i] = lif.beta * v[l][i];
                    blocked[i] = 1;
                    continue;
                }
                const double u = lif.beta * v[l][i] + cur[l][i];
                const double x = u - lif.v_thresh;
                const bool fired = u >= lif.v_thresh;
                over[i] = x;
                out[i] = mode == SpikeFunction::kHeaviside ? (fired ? 1.0 : 0.0) : x / (1.0 + slope * std::abs(x));
                if (fired) {
                    v[l][i] = u - lif.v_thresh;
                    refr[l][i] = lif.refractory_steps;
                } else {
                    v[l][i] = u;
                }
            }
        }
    }
}

std::vector<double> tape_counts(const Tape& tape, std::size_t n_out) {
    std::vector<double> counts(n_out, 0.0);
    const auto& last = tape.spikes.back();
    for (std::size_t t = 0; t < tape.timesteps; ++t)
        for (std::size_t j = 0; j < n_out; ++j) counts[j] += last[t * n_out + j];
    return counts;
}

/// Backward pass over a recorded tape. dL/dS for the output layer is the
/// same at every step because counts are plain sums.
void run_backward(const NetworkState& state, const Tape& tape, std::span<const double> dcounts, double slope,
                  WeightSet& grads) {
    const Topology& topo = state.topology;
    const std::size_t n_layers = topo.layer_sizes.size();
    const std::size_t T = tape.timesteps;
    const double beta = state.lif.beta;

    // gS[l][t * size + i] = dL/dS_l(t), filled by layer l+1 at t+1.
    std::vector<std::vector<double>> gS(n_layers), gV(n_layers), dU(n_layers);
    for (std::size_t l = 1; l < n_layers; ++l) {
        gS[l].assign(T * topo.layer_sizes[l], 0.0);
        gV[l].assign(topo.layer_sizes[l], 0.0);
        dU[l].assign(topo.layer_sizes[l], 0.0);
    }
    const std::size_t n_out = topo.output_width();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < n_out; ++j) gS.back()[t * n_out + j] = dcounts[j];

    for (std::size_t tt = T; tt-- > 0;) {
        for (std::size_t l = n_layers - 1; l >= 1; --l) {
            const std::size_t size = topo.layer_sizes[l];
            const double* over = tape.over[l].data() + tt * size;
            const std::uint8_t* blocked = tape.blocked[l].data() + tt * size;
            const double* gs = gS[l].data() + tt * size;
            for (std::size_t i = 0; i < size; ++i) {
                if (blocked[i]) {
                    dU[l][i] = 0.0;
                    gV[l][i] = beta * gV[l][i];
                } else {
                    const double d = gV[l][i] + gs[i] * surrogate_grad(over[i], slope);
                    dU[l][i] = d;
                    gV[l][i] = beta * d;
                }
            }
        }
        if (tt == 0) break;
        // Synaptic input at tt came from spikes at tt - 1.
        for (std::size_t gi = 0; gi < topo.groups.size(); ++gi) {
            const SynapseGroup& g = topo.groups[gi];
            const std::size_t src = g.source_layer();
            const std::size_t src_size = topo.layer_sizes[src];
            const double* pre = tape.spikes[src].data() + (tt - 1) * src_size;
            const double* w = state.weights[gi].data();
            double* gw = grads[gi].data();
            const double* du = dU[g.target_layer].data() + g.target_begin;
            double* gpre = src > 0 ? gS[src].data() + (tt - 1) * src_size : nullptr;
            const std::size_t cols = g.cols();
            for (std::size_t i = g.source_begin; i < g.source_end; ++i) {
                const std::size_t r = (i - g.source_begin) * cols;
                const double s = pre[i];
                if (s != 0.0)
                    for (std::size_t j = 0; j < cols; ++j) gw[r + j] += s * du[j];
                if (gpre) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) acc += w[r + j] * du[j];
                    gpre[i] += acc;
                }
            }
        }
    }
}

WeightSet zeros_like(const WeightSet& w) {
    WeightSet out;
    out.reserve(w.size());
    for (const auto& g : w) out.emplace_back(g.size(), 0.0);
    return out;
}

void check_inputs(const NetworkState& state, const SpikeTensor& spikes, std::span<const std::uint8_t> labels) {
    if (spikes.channels() != state.topology.input_width())
        throw DataError("spike tensor width does not match the network input width");
    if (labels.size() != spikes.timestamps())
        throw DataError("label count " + std::to_string(labels.size()) + " does not match " +
                        std::to_string(spikes.timestamps()) + " timestamps");
}

constexpr std::size_t kChunk = 8;

void scale_batch(BatchGradient& out, std::size_t n) {
    if (n == 0) return;
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& g : out.grads)
        for (double& x : g) x *= inv;
    out.mean_loss *= inv;
}

}  // namespace

std::vector<double> forward_counts(const NetworkState& state, std::span<const std::uint8_t> input,
                                   std::size_t timesteps, SpikeFunction mode, double slope) {
    Tape tape;
    run_forward(state, input, timesteps, mode, slope, tape);
    return tape_counts(tape, state.topology.output_width());
}

double sample_gradient(const NetworkState& state, std::span<const std::uint8_t> input, std::size_t timesteps,
                       std::size_t label, const TrainConfig& config, SpikeFunction mode, WeightSet& grads) {
    Tape tape;
    run_forward(state, input, timesteps, mode, config.surrogate_slope, tape);
    const std::size_t n_out = state.topology.output_width();
    if (label >= n_out) throw DataError("label " + std::to_string(label) + " out of range");
    const std::vector<double> counts = tape_counts(tape, n_out);
    std::vector<double> dcounts(n_out);
    const double T = static_cast<double>(timesteps);
    for (std::size_t j = 0; j < n_out; ++j)
        dcounts[j] = 2.0 * (counts[j] - (j == label ? config.target_hi : config.target_lo) * T);
    run_backward(state, tape, dcounts, config.surrogate_slope, grads);
    return count_mse_loss(counts, label, timesteps, config.target_hi, config.target_lo);
}

BatchGradient batch_gradient(const NetworkState& state, const SpikeTensor& spikes,
                             std::span<const std::uint8_t> labels, std::span<const std::size_t> indices,
                             const TrainConfig& config, SpikeFunction mode) {
    check_inputs(state, spikes, labels);
    const std::size_t n_chunks = (indices.size() + kChunk - 1) / kChunk;
    std::vector<WeightSet> partial(n_chunks);
    std::vector<double> losses(n_chunks, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
        const auto cu = static_cast<std::size_t>(c);
        partial[cu] = zeros_like(state.weights);
        const std::size_t end = std::min(indices.size(), (cu + 1) * kChunk);
        for (std::size_t k = cu * kChunk; k < end; ++k) {
            const std::size_t n = indices[k];
            losses[cu] += sample_gradient(state, spikes.timestamp(n), spikes.timesteps(), labels[n], config, mode,
                                          partial[cu]);
        }
    }
    BatchGradient out{zeros_like(state.weights), 0.0};
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t g = 0; g < out.grads.size(); ++g)
            for (std::size_t i = 0; i < out.grads[g].size(); ++i) out.grads[g][i] += partial[c][g][i];
        out.mean_loss += losses[c];
    }
    scale_batch(out, indices.size());
    return out;
}

namespace serial {
BatchGradient batch_gradient(const NetworkState& state, const SpikeTensor& spikes,
                             std::span<const std::uint8_t> labels, std::span<const std::size_t> indices,
                             const TrainConfig& config, SpikeFunction mode) {
    check_inputs(state, spikes, labels);
    BatchGradient out{zeros_like(state.weights), 0.0};
    // Same chunking as the parallel kernel so both sum in the same order.
    for (std::size_t begin = 0; begin < indices.size(); begin += kChunk) {
        WeightSet part = zeros_like(state.weights);
        double loss = 0.0;
        for (std::size_t k = begin; k < std::min(indices.size(), begin + kChunk); ++k) {
            const std::size_t n = indices[k];
            loss += sample_gradient(state, spikes.timestamp(n), spikes.timesteps(), labels[n], config, mode, part);
        }
        for (std::size_t g = 0; g < out.grads.size(); ++g)
            for (std::size_t i = 0; i < out.grads[g].size(); ++i) out.grads[g][i] += part[g][i];
        out.mean_loss += loss;
    }
    scale_batch(out, indices.size());
    return out;
}
}  // namespace serial

NetworkState make_supervised_network(std::size_t n_inputs, const TrainConfig& config) {
    config.validate();
    return init_network(Topology::model3(n_inputs, config.n_hidden, config.n_hidden_layers, 2), config.lif(),
                        substream(config.seed, "init"));
}

LossHistoryEntry evaluate_supervised(const NetworkState& network, const SpikeTensor& spikes,
                                     std::span<const std::uint8_t> labels, const TrainConfig& config) {
    check_inputs(network, spikes, labels);
    const std::vector<int> counts = infer_counts(network, spikes);
    const std::size_t n_out = network.topology.output_width();
    const std::vector<std::uint8_t> pred = decode_predictions(counts, n_out, 0);
    LossHistoryEntry e;
    std::size_t n = 0, correct = 0;
    std::vector<double> c(n_out);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kUnlabeled) continue;
        for (std::size_t j = 0; j < n_out; ++j) c[j] = counts[i * n_out + j];
        e.mean_loss += count_mse_loss(c, labels[i], spikes.timesteps(), config.target_hi, config.target_lo);
        correct += pred[i] == labels[i] ? 1 : 0;
        ++n;
    }
    if (n > 0) {
        e.mean_loss /= static_cast<double>(n);
        e.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    }
    return e;
}

SupervisedResult train_supervised(NetworkState network, const SpikeTensor& spikes,
                                  std::span<const std::uint8_t> labels, const TrainConfig& config) {
    config.validate();
    check_inputs(network, spikes, labels);
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kUnlabeled) continue;
        if (labels[i] > 1) throw DataError("labels must be 0, 1 or unlabeled");
        usable.push_back(i);
    }
    if (usable.empty()) throw DataError("no labelled timestamps to train on");

    SupervisedResult result;
    AdamState adam = make_adam(network.weights, config);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(substream(config.seed, "shuffle", epoch));
        std::shuffle(usable.begin(), usable.end(), rng.engine());
        for (std::size_t begin = 0; begin < usable.size(); begin += config.batch_size) {
            const std::size_t end = std::min(usable.size(), begin + config.batch_size);
            const std::span<const std::size_t> batch(usable.data() + begin, end - begin);
            const BatchGradient bg = batch_gradient(network, spikes, labels, batch, config);
            adam_step(network.weights, bg.grads, adam, config.learning_rate);
        }
        LossHistoryEntry e = evaluate_supervised(network, spikes, labels, config);
        e.epoch = epoch + 1;
        result.history.push_back(e);
    }
    result.network = std::move(network);
    return result;
}

void write_loss_history_csv(const std::filesystem::path& path, std::span<const LossHistoryEntry> history) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,mean_loss,train_accuracy\n";
    out.precision(17);
    for (const auto& e : history) out << e.epoch << ',' << e.mean_loss << ',' << e.train_accuracy << '\n';
}

}  // namespace hfsnn
