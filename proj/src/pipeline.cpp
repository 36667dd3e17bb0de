#include "hfsnn/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "hfsnn/error.hpp"
#include "hfsnn/rng.hpp"

namespace hfsnn {

void PreprocessConfig::validate() const {
    if (window_n == 0) throw ConfigError("window_n must be >= 1");
    if (lags == 0) throw ConfigError("lags must be >= 1");
    if (supervised_lags.empty()) throw ConfigError("supervised_lags must not be empty");
    if (vol_window == 0) throw ConfigError("vol_window must be >= 1");
    if (!(q_low >= 0.0 && q_low <= q_high && q_high <= 1.0))
        throw ConfigError("quantiles must satisfy 0 <= q_low <= q_high <= 1");
    if (!(upper_bound > 0.0 && upper_bound <= 1.0)) throw ConfigError("upper_bound must lie in (0, 1]");
    if (timesteps == 0) throw ConfigError("timesteps must be >= 1");
    if (label_window == 0) throw ConfigError("label_window must be >= 1");
}

DayData prepare_day(const TickDay& day, const PreprocessConfig& config) {
    DayData d;
    d.date = day.date;
    d.bars = aggregate_vwap(day.ticks, config.window_n);
    d.prices = vwap_prices(d.bars);
    d.truth = label_day(d.prices, config.label_window);
    return d;
}

std::vector<DayData> prepare_days(std::span<const TickDay> days, const PreprocessConfig& config) {
    config.validate();
    std::vector<DayData> out(days.size());
    for (std::size_t i = 0; i < days.size(); ++i) {
        try {
            out[i] = prepare_day(days[i], config);
        } catch (const DataError& e) {
            throw DataError(days[i].date + ": " + e.what());
        }
    }
    return out;
}

FeatureMatrix model_features(const DayData& day, ModelVariant variant, std::size_t n_lags,
                             const PreprocessConfig& config) {
    if (variant == ModelVariant::kModel3)
        return make_supervised_features(day.bars, config.supervised_lags, config.vol_window);
    return make_difference_features(day.bars, variant == ModelVariant::kModel1 ? 1 : n_lags);
}

GroundTruth slice_truth(const GroundTruth& truth, std::size_t first_bar, std::size_t rows) {
    if (first_bar + rows > truth.size()) throw DataError("label slice out of range");
    GroundTruth g;
    g.r_thresh = truth.r_thresh;
    g.window = truth.window;
    const auto b = static_cast<std::ptrdiff_t>(first_bar), e = static_cast<std::ptrdiff_t>(first_bar + rows);
    g.labeled.assign(truth.labeled.begin() + b, truth.labeled.begin() + e);
    g.is_real.assign(truth.is_real.begin() + b, truth.is_real.begin() + e);
    g.direction.assign(truth.direction.begin() + b, truth.direction.begin() + e);
    return g;
}

std::vector<std::uint8_t> row_labels(const GroundTruth& row_truth) {
    std::vector<std::uint8_t> out(row_truth.size(), kUnlabeled);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (row_truth.labeled[i]) out[i] = row_truth.is_real[i];
    return out;
}

std::vector<std::uint8_t> rows_to_bars(std::span<const std::uint8_t> rows, std::size_t first_bar, std::size_t n_bars) {
    if (first_bar + rows.size() > n_bars) throw DataError("prediction rows exceed the day's bars");
    std::vector<std::uint8_t> out(n_bars, 0);
    std::copy(rows.begin(), rows.end(), out.begin() + static_cast<std::ptrdiff_t>(first_bar));
    return out;
}

// ---------------------------------------------------------------------------
// STDP models
// ---------------------------------------------------------------------------

SnnHyperparams snn_hyperparams(const ParamMap& p, ModelVariant variant) {
    if (variant == ModelVariant::kModel3) throw ConfigError("model3 is trained by backpropagation, not STDP");
    auto get = [&](const std::string& name) {
        const auto it = p.find(name);
        if (it == p.end()) throw ConfigError("missing hyperparameter '" + name + "'");
        return it->second;
    };
    SnnHyperparams h;
    h.stdp.a_plus = get("a_plus");
    h.stdp.a_minus = get("a_minus");
    h.stdp.tau_plus = get("tau_plus");
    h.stdp.tau_minus = get("tau_minus");
    if (variant == ModelVariant::kModel2) {
        h.stdp.b_plus = get("b_plus");
        h.stdp.b_minus = get("b_minus");
        h.stdp.theta_plus = get("theta_plus");
        h.stdp.theta_minus = get("theta_minus");
        h.n_input = static_cast<std::size_t>(std::lround(get("n_input")));
    }
    h.lif.beta = get("beta");
    h.lif.v_thresh = get("v_thresh");
    h.d_thresh = static_cast<int>(std::lround(get("d_thresh")));
    h.n_hidden = static_cast<std::size_t>(std::lround(get("n_hidden")));
    return h;
}

ParamMap to_param_map(const SnnHyperparams& h, ModelVariant variant) {
    ParamMap p{{"a_plus", h.stdp.a_plus},     {"a_minus", h.stdp.a_minus}, {"tau_plus", h.stdp.tau_plus},
               {"tau_minus", h.stdp.tau_minus}, {"beta", h.lif.beta},        {"v_thresh", h.lif.v_thresh},
               {"d_thresh", h.d_thresh},        {"n_hidden", static_cast<double>(h.n_hidden)}};
    if (variant == ModelVariant::kModel2) {
        p["b_plus"] = h.stdp.b_plus;
        p["b_minus"] = h.stdp.b_minus;
        p["theta_plus"] = h.stdp.theta_plus;
        p["theta_minus"] = h.stdp.theta_minus;
        p["n_input"] = static_cast<double>(h.n_input);
    }
    return p;
}

Topology stdp_topology(ModelVariant variant, const SnnHyperparams& h) {
    switch (variant) {
        case ModelVariant::kModel1: return Topology::model1(h.n_hidden);
        case ModelVariant::kModel2: return Topology::model2(h.n_input, h.n_hidden);
        case ModelVariant::kModel3: break;
    }
    throw ConfigError("model3 has no STDP topology");
}

NetworkState train_stdp_network(ModelVariant variant, const SnnHyperparams& h, const SpikeTensor& train,
                                std::uint64_t seed, TrainingLog* log) {
    h.stdp.validate();
    NetworkState net = init_network(stdp_topology(variant, h), h.lif, seed);
    TrainingLog l = train_unsupervised(net, train, h.stdp);
    if (log) *log = std::move(l);
    return net;
}

std::vector<std::uint8_t> predict_rows(const NetworkState& network, int d_thresh, const SpikeTensor& spikes) {
    return decode_predictions(infer_counts(network, spikes), network.topology.output_width(), d_thresh);
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

namespace {

struct EncodedPair {
    SpikeTensor train, test;
    FeatureMatrix train_features, test_features;
};

EncodedPair encode_pair(const DayData& train, const DayData& test, ModelVariant variant, std::size_t n_lags,
                        const PreprocessConfig& config, std::uint64_t seed) {
    EncodedPair p;
    const FeatureMatrix raw_train = model_features(train, variant, n_lags, config);
    auto [norm_train, spec] = normalize(raw_train, config.q_low, config.q_high, config.upper_bound);
    p.test_features = spec.apply(model_features(test, variant, n_lags, config));
    p.train = encode_poisson(norm_train, config.timesteps, substream(seed, "encode", 0));
    p.test = encode_poisson(p.test_features, config.timesteps, substream(seed, "encode", 1));
    p.train_features = std::move(norm_train);
    return p;
}

}  // namespace

DayRunner stdp_runner(ModelVariant variant, SnnHyperparams h, PreprocessConfig config) {
    return [variant, h, config](const DayData& train, const DayData& test, std::uint64_t seed) {
        const EncodedPair p = encode_pair(train, test, variant, h.n_input, config, seed);
        const NetworkState net = train_stdp_network(variant, h, p.train, substream(seed, "init"));
        return rows_to_bars(predict_rows(net, h.d_thresh, p.test), p.test_features.first_bar(), test.bars.size());
    };
}

DayRunner supervised_runner(TrainConfig train_config, PreprocessConfig config) {
    return [train_config, config](const DayData& train, const DayData& test, std::uint64_t seed) {
        const EncodedPair p = encode_pair(train, test, ModelVariant::kModel3, 0, config, seed);
        TrainConfig tc = train_config;
        tc.seed = substream(seed, "init");
        const std::vector<std::uint8_t> labels =
            row_labels(slice_truth(train.truth, p.train_features.first_bar(), p.train.timestamps()));
        NetworkState net = make_supervised_network(p.train.channels(), tc);
        const SupervisedResult r = train_supervised(std::move(net), p.train, labels, tc);
        return rows_to_bars(predict_rows(r.network, 0, p.test), p.test_features.first_bar(), test.bars.size());
    };
}

// ---------------------------------------------------------------------------
// Study objective
// ---------------------------------------------------------------------------

StudyStream build_study_stream(std::span<const DayData> days, ModelVariant variant, std::size_t n_lags,
                               const PreprocessConfig& config, std::size_t batch_size, std::size_t align_bar) {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    StudyStream s;
    s.batch_size = batch_size;
    for (const DayData& day : days) {
        const FeatureMatrix f = model_features(day, variant, n_lags, config);
        if (f.first_bar() > align_bar)
            throw ConfigError("alignment bar " + std::to_string(align_bar) + " precedes the first feature row");
        const std::size_t skip = align_bar - f.first_bar();
        if (skip >= f.rows()) continue;
        const FeatureMatrix cut = f.slice(skip, f.rows());
        const GroundTruth t = slice_truth(day.truth, cut.first_bar(), cut.rows());
        s.features.append(cut);
        s.truth.labeled.insert(s.truth.labeled.end(), t.labeled.begin(), t.labeled.end());
        s.truth.is_real.insert(s.truth.is_real.end(), t.is_real.begin(), t.is_real.end());
        s.truth.direction.insert(s.truth.direction.end(), t.direction.begin(), t.direction.end());
        s.truth.window = t.window;
    }
    return s;
}

ObjectiveResult evaluate_trial(const ParamMap& params, ModelVariant variant, const StudyStream& stream,
                               std::size_t train_batch, const std::string& metric, const PreprocessConfig& config,
                               std::uint64_t seed, MetricsReport* eval_report) {
    const std::size_t nb = stream.n_batches();
    if (nb < 2) throw DataError("study stream needs at least two batches of " + std::to_string(stream.batch_size));
    if (metric != "SA" && metric != "PSA") throw ConfigError("metric must be SA or PSA");
    const SnnHyperparams h = snn_hyperparams(params, variant);
    const std::size_t i = train_batch % nb, j = (i + 1) % nb;
    const std::size_t B = stream.batch_size;

    auto [train_norm, spec] =
        normalize(stream.features.slice(i * B, (i + 1) * B), config.q_low, config.q_high, config.upper_bound);
    const FeatureMatrix eval_norm = spec.apply(stream.features.slice(j * B, (j + 1) * B));
    const SpikeTensor train = encode_poisson(train_norm, config.timesteps, substream(seed, "encode", i));
    const SpikeTensor eval = encode_poisson(eval_norm, config.timesteps, substream(seed, "encode", j));

    const NetworkState net = train_stdp_network(variant, h, train, substream(seed, "init"));
    const std::vector<std::uint8_t> pred = predict_rows(net, h.d_thresh, eval);
    const MetricsReport report = evaluate(pred, slice_truth(stream.truth, j * B, B));
    if (eval_report) *eval_report = report;

    ObjectiveResult r;
    r.batch_index = i;
    r.srd = report.srd;
    const std::optional<double>& value = metric == "SA" ? report.spike_accuracy : report.psa;
    if (value) {
        r.score = *value;
    } else {
        r.score = 0.0;
        r.undefined_score = true;
    }
    return r;
}

SnnObjective::SnnObjective(ModelVariant variant, std::vector<DayData> days, PreprocessConfig config, std::string metric,
                           std::size_t batch_size, std::uint64_t seed)
    : variant_(variant),
      days_(std::move(days)),
      config_(std::move(config)),
      metric_(std::move(metric)),
      batch_size_(batch_size),
      seed_(seed) {
    if (variant_ == ModelVariant::kModel3) throw ConfigError("studies tune model1 or model2");
}

const StudyStream& SnnObjective::stream(std::size_t n_lags) {
    auto& slot = streams_[n_lags];
    if (!slot) slot = std::make_unique<StudyStream>(build_study_stream(days_, variant_, n_lags, config_, batch_size_));
    return *slot;
}

std::size_t SnnObjective::n_batches() { return stream(1).n_batches(); }

ObjectiveResult SnnObjective::operator()(const ParamMap& params, std::size_t trial_id) {
    const SnnHyperparams h = snn_hyperparams(params, variant_);
    return evaluate_trial(params, variant_, stream(h.n_input), trial_id, metric_, config_, seed_);
}

SearchSpace space_for(ModelVariant variant) {
    switch (variant) {
        case ModelVariant::kModel1: return model1_space();
        case ModelVariant::kModel2: return model2_space();
        case ModelVariant::kModel3: break;
    }
    throw ConfigError("model3 has no search space");
}

}  // namespace hfsnn
