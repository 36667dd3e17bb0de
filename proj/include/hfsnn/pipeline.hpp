#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hfsnn/hyperopt.hpp"
#include "hfsnn/market_data.hpp"
#include "hfsnn/metrics.hpp"
#include "hfsnn/plasticity.hpp"
#include "hfsnn/snn.hpp"
#include "hfsnn/supervised.hpp"

namespace hfsnn {

struct PreprocessConfig {
    std::size_t window_n = 10;
    std::size_t lags = 1;
    std::vector<std::size_t> supervised_lags{1, 3, 5};
    std::size_t vol_window = 10;
    double q_low = 0.1;
    double q_high = 0.9;
    double upper_bound = 1.0;
    std::size_t timesteps = 20;
    std::size_t label_window = 3;

    void validate() const;
};

/// One trading day reduced to VWAP bars with its ground-truth labels.
struct DayData {
    std::string date;
    std::vector<VwapBar> bars;
    std::vector<double> prices;
    GroundTruth truth;
};

DayData prepare_day(const TickDay& day, const PreprocessConfig& config);
std::vector<DayData> prepare_days(std::span<const TickDay> days, const PreprocessConfig& config);

/// Network input features of a day: difference features with `n_lags`
/// lags for Models 1/2, return/volatility/volume features for Model 3.
FeatureMatrix model_features(const DayData& day, ModelVariant variant, std::size_t n_lags,
                             const PreprocessConfig& config);

/// Labels of rows [first_bar, first_bar + rows) of a day.
GroundTruth slice_truth(const GroundTruth& truth, std::size_t first_bar, std::size_t rows);

/// Supervised targets per row: 1 real, 0 fake, kUnlabeled at day edges.
std::vector<std::uint8_t> row_labels(const GroundTruth& row_truth);

/// Spreads per-row predictions back onto the day's bars; bars without a
/// feature row get no prediction.
std::vector<std::uint8_t> rows_to_bars(std::span<const std::uint8_t> rows, std::size_t first_bar, std::size_t n_bars);

// ---------------------------------------------------------------------------
// STDP models
// ---------------------------------------------------------------------------

struct SnnHyperparams {
    StdpParams stdp;
    LifParams lif;
    int d_thresh = 6;
    std::size_t n_hidden = 32;
    std::size_t n_input = 1;  ///< lags per pathway; fixed at 1 for Model 1
};

SnnHyperparams snn_hyperparams(const ParamMap& params, ModelVariant variant);
ParamMap to_param_map(const SnnHyperparams& h, ModelVariant variant);

Topology stdp_topology(ModelVariant variant, const SnnHyperparams& h);

/// Fresh network trained by one STDP pass over `train`.
NetworkState train_stdp_network(ModelVariant variant, const SnnHyperparams& h, const SpikeTensor& train,
                                std::uint64_t seed, TrainingLog* log = nullptr);

/// Decoded per-row predictions (single output count or two-output argmax).
std::vector<std::uint8_t> predict_rows(const NetworkState& network, int d_thresh, const SpikeTensor& spikes);

// ---------------------------------------------------------------------------
// Day runners for the rolling experiment
// ---------------------------------------------------------------------------

/// Trains on `train` and returns one prediction per bar of `test`.
using DayRunner =
    std::function<std::vector<std::uint8_t>(const DayData& train, const DayData& test, std::uint64_t seed)>;

/// Normalization is fitted on the training day and replayed on the test day.
DayRunner stdp_runner(ModelVariant variant, SnnHyperparams h, PreprocessConfig config);
DayRunner supervised_runner(TrainConfig train, PreprocessConfig config);

// ---------------------------------------------------------------------------
// Hyperparameter study objective
// ---------------------------------------------------------------------------

/// Concatenated feature rows of several days, cut into fixed batches.
struct StudyStream {
    FeatureMatrix features;
    GroundTruth truth;  ///< per row
    std::size_t batch_size = 5000;

    std::size_t n_batches() const { return batch_size ? features.rows() / batch_size : 0; }
};

/// Rows start at bar `align_bar` of every day so streams built for
/// different lag counts cover the same bars.
StudyStream build_study_stream(std::span<const DayData> days, ModelVariant variant, std::size_t n_lags,
                               const PreprocessConfig& config, std::size_t batch_size, std::size_t align_bar = 10);

/// Trains on batch `train_batch`, evaluates on the next batch (wrapping).
/// Zero predictions leave the score undefined; it is then 0 and flagged.
ObjectiveResult evaluate_trial(const ParamMap& params, ModelVariant variant, const StudyStream& stream,
                               std::size_t train_batch, const std::string& metric, const PreprocessConfig& config,
                               std::uint64_t seed, MetricsReport* eval_report = nullptr);

/// Objective whose batch cursor advances one batch per trial id. Streams
/// are built lazily per lag count.
class SnnObjective {
public:
    SnnObjective(ModelVariant variant, std::vector<DayData> days, PreprocessConfig config, std::string metric,
                 std::size_t batch_size, std::uint64_t seed);

    ObjectiveResult operator()(const ParamMap& params, std::size_t trial_id);
    const StudyStream& stream(std::size_t n_lags);
    std::size_t n_batches();

private:
    ModelVariant variant_;
    std::vector<DayData> days_;
    PreprocessConfig config_;
    std::string metric_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::map<std::size_t, std::unique_ptr<StudyStream>> streams_;
};

SearchSpace space_for(ModelVariant variant);

}  // namespace hfsnn
