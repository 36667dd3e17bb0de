#include "doctest.h"
#include "helpers.hpp"
#include "hfsnn/config.hpp"
#include "hfsnn/error.hpp"
#include "hfsnn/pipeline.hpp"

using namespace hfsnn;
using nlohmann::json;

namespace {

json minimal_config() {
    return {{"schema_version", 1}, {"data", {{"synthetic", {{"n_days", 3}, {"ticks_per_day", 20000}}}}}};
}

const std::vector<DayData>& shared_days() {
    static const std::vector<DayData> days =
        prepare_days(generate_synthetic_ticks(testing::small_market(3, 30'000, 17)).days, PreprocessConfig{});
    return days;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
    RunConfig c = run_config_from_json(minimal_config());
    CHECK(c.seed == 42);
    CHECK(c.model == "model1");
    CHECK(c.objective == "PSA");
    CHECK(c.synthetic->n_days == 3);
    CHECK_FALSE(c.csv.has_value());
    c.validate();

    json j = minimal_config();
    j["strategy"] = {{"hold", 5}, {"invert_direction", true}};
    j["tune"] = {{"n_trials", 7}, {"sampler", "random"}};
    c = run_config_from_json(j);
    CHECK(c.strategy.hold == 5);
    CHECK(c.strategy.invert_direction);
    CHECK(c.tune.n_trials == 7);
    CHECK(c.tune.sampler == "random");
}

TEST_CASE("config round trips through json") {
    json j = minimal_config();
    j["seed"] = 7;
    j["model"] = "model2";
    j["params"] = {{"beta", 0.9}};
    j["preprocess"] = {{"timesteps", 12}};
    const RunConfig a = run_config_from_json(j);
    const RunConfig b = run_config_from_json(run_config_to_json(a));
    CHECK(run_config_to_json(a) == run_config_to_json(b));
    CHECK(b.preprocess.timesteps == 12);
    CHECK(b.params.at("beta") == 0.9);
}

TEST_CASE("config rejects unknown keys, bad versions and bad values") {
    json j = minimal_config();
    j["sed"] = 1;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    j = minimal_config();
    j["strategy"] = {{"holdd", 1}};
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    j = minimal_config();
    j.erase("schema_version");
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    j["schema_version"] = 2;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    j = minimal_config();
    j["seed"] = "forty-two";
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);

    RunConfig c = run_config_from_json(minimal_config());
    c.model = "model9";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = run_config_from_json(minimal_config());
    c.csv = "ticks.csv";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = run_config_from_json(minimal_config());
    c.objective = "AUC";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("default params lie in the search space") {
    CHECK(model1_space().contains(default_params(ModelVariant::kModel1)));
    CHECK(model2_space().contains(default_params(ModelVariant::kModel2)));
}

TEST_CASE("hyperparameter maps round trip") {
    for (const auto v : {ModelVariant::kModel1, ModelVariant::kModel2}) {
        const ParamMap p = default_params(v);
        CHECK(to_param_map(snn_hyperparams(p, v), v) == p);
    }
    ParamMap missing = default_params(ModelVariant::kModel1);
    missing.erase("beta");
    CHECK_THROWS_AS(snn_hyperparams(missing, ModelVariant::kModel1), ConfigError);
    CHECK_THROWS_AS(snn_hyperparams(missing, ModelVariant::kModel3), ConfigError);
}

TEST_CASE("prepared days carry aligned bars, prices and labels") {
    for (const DayData& d : shared_days()) {
        CHECK(d.bars.size() == 3000);
        CHECK(d.prices.size() == d.bars.size());
        CHECK(d.truth.size() == d.bars.size());
        CHECK(d.truth.labeled_count() > 0);
    }
}

TEST_CASE("row helpers") {
    const std::vector<std::uint8_t> rows{1, 0, 1};
    CHECK(rows_to_bars(rows, 2, 6) == std::vector<std::uint8_t>{0, 0, 1, 0, 1, 0});
    CHECK_THROWS_AS(rows_to_bars(rows, 4, 6), DataError);

    const GroundTruth& t = shared_days()[0].truth;
    const GroundTruth s = slice_truth(t, 100, 50);
    const auto labels = row_labels(s);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(s.labeled[i] == t.labeled[100 + i]);
        CHECK(labels[i] == (t.labeled[100 + i] ? t.is_real[100 + i] : kUnlabeled));
    }
    const GroundTruth edge = slice_truth(t, 0, 5);
    CHECK(row_labels(edge)[0] == kUnlabeled);
    CHECK_THROWS_AS(slice_truth(t, t.size() - 2, 5), DataError);
}

TEST_CASE("study streams with different lag counts cover the same bars") {
    const auto& days = shared_days();
    const StudyStream a = build_study_stream(days, ModelVariant::kModel2, 1, {}, 1000);
    const StudyStream b = build_study_stream(days, ModelVariant::kModel2, 8, {}, 1000);
    CHECK(a.features.rows() == b.features.rows());
    CHECK(a.truth.is_real == b.truth.is_real);
    CHECK(a.features.rows() == 3 * (3000 - 10));
    CHECK(a.n_batches() == 8);
    CHECK_THROWS_AS(build_study_stream(days, ModelVariant::kModel2, 12, {}, 1000), ConfigError);
}

TEST_CASE("trial evaluation is deterministic and flags empty predictions") {
    const StudyStream s = build_study_stream(shared_days(), ModelVariant::kModel1, 1, {}, 1000);
    const ParamMap p = default_params(ModelVariant::kModel1);
    const ObjectiveResult a = evaluate_trial(p, ModelVariant::kModel1, s, 3, "PSA", {}, 5);
    const ObjectiveResult b = evaluate_trial(p, ModelVariant::kModel1, s, 3, "PSA", {}, 5);
    CHECK(a.score == b.score);
    CHECK(a.batch_index == 3);
    CHECK((a.score >= 0.0 && a.score <= 1.0));

    ParamMap silent = p;
    silent["v_thresh"] = 2.5;
    silent["beta"] = 0.5;
    silent["d_thresh"] = 16;
    silent["n_hidden"] = 16;
    const ObjectiveResult z = evaluate_trial(silent, ModelVariant::kModel1, s, 0, "SA", {}, 5);
    CHECK(z.undefined_score);
    CHECK(z.score == 0.0);

    CHECK_THROWS_AS(evaluate_trial(p, ModelVariant::kModel1, s, 0, "F1", {}, 5), ConfigError);
    const StudyStream tiny = build_study_stream(std::span(shared_days()).first(1), ModelVariant::kModel1, 1, {}, 2000);
    CHECK_THROWS_AS(evaluate_trial(p, ModelVariant::kModel1, tiny, 0, "SA", {}, 5), DataError);
}

TEST_CASE("objective advances the batch with the trial id") {
    SnnObjective obj(ModelVariant::kModel1, shared_days(), {}, "SA", 1000, 2);
    CHECK(obj.n_batches() == 8);
    const ParamMap p = default_params(ModelVariant::kModel1);
    CHECK(obj(p, 0).batch_index == 0);
    CHECK(obj(p, 9).batch_index == 1);
    CHECK_THROWS_AS(SnnObjective(ModelVariant::kModel3, {}, {}, "SA", 10, 1), ConfigError);
}

TEST_CASE("day runners emit one prediction per test bar") {
    const auto& days = shared_days();
    const DayRunner stdp = stdp_runner(ModelVariant::kModel2, snn_hyperparams(default_params(ModelVariant::kModel2),
                                                                              ModelVariant::kModel2),
                                       {});
    const auto p = stdp(days[0], days[1], 4);
    CHECK(p.size() == days[1].bars.size());
    CHECK(p == stdp(days[0], days[1], 4));

    TrainConfig t;
    t.n_hidden = 8;
    t.n_hidden_layers = 1;
    t.epochs = 1;
    const auto q = supervised_runner(t, {})(days[0], days[1], 4);
    CHECK(q.size() == days[1].bars.size());
    CHECK(q[0] == 0);
}

TEST_CASE("the shipped example config is valid") {
    const RunConfig c = load_run_config(HFSNN_SOURCE_DIR "/tools/example.json");
    c.validate();
    CHECK(c.synthetic->n_days == 19);
    CHECK(c.tune.batch_size == 5000);
}
