// Command-line driver: synth, preprocess, train, tune, backtest, report.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "hfsnn/backtest.hpp"
#include "hfsnn/config.hpp"
#include "hfsnn/error.hpp"
#include "hfsnn/hyperopt.hpp"
#include "hfsnn/market_data.hpp"
#include "hfsnn/metrics.hpp"
#include "hfsnn/pipeline.hpp"
#include "hfsnn/plasticity.hpp"
#include "hfsnn/rng.hpp"
#include "hfsnn/snn.hpp"
#include "hfsnn/supervised.hpp"
#include "hfsnn/tensor_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hfsnn;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out;
    bool resume = false;
};

RunConfig resolve_config(const Options& o, bool require_file = true) {
    RunConfig c;
    if (!o.config_path.empty())
        c = load_run_config(o.config_path);
    else if (require_file)
        throw ConfigError("--config is required for this command");
    if (o.seed) c.seed = *o.seed;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.out) c.out = *o.out;
    if (o.resume) c.tune.resume = true;
    if (require_file) c.validate();
    if (c.jobs > 0) omp_set_num_threads(c.jobs);
    return c;
}

SyntheticConfig seeded_synthetic(const RunConfig& c) {
    SyntheticConfig s = *c.synthetic;
    s.seed = substream(c.seed, "synthetic-day");
    return s;
}

std::vector<TickDay> load_tick_source(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("data path " + path.string() + " does not exist");
    if (!fs::is_directory(path)) return load_ticks(path);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .csv files in " + path.string());
    std::vector<TickDay> days;
    for (const fs::path& f : files) {
        for (TickDay& d : load_ticks(f)) {
            for (const TickDay& seen : days)
                if (seen.date == d.date) throw DataError("date " + d.date + " appears in more than one file");
            days.push_back(std::move(d));
        }
    }
    std::sort(days.begin(), days.end(), [](const TickDay& a, const TickDay& b) { return a.date < b.date; });
    return days;
}

std::vector<TickDay> load_days(const RunConfig& c) {
    if (c.csv) return load_tick_source(*c.csv);
    return generate_synthetic_ticks(seeded_synthetic(c)).days;
}

ModelVariant stdp_variant(const std::string& model) {
    if (model == "model1") return ModelVariant::kModel1;
    if (model == "model2") return ModelVariant::kModel2;
    throw ConfigError("model '" + model + "' is not an STDP model");
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

fs::path study_path(const RunConfig& c) {
    return c.out / ("study_" + c.model + "_" + lower(c.objective) + ".ndjson");
}

/// Explicit params win, then the study's best trial, then the defaults.
ParamMap resolve_params(const RunConfig& c, ModelVariant variant) {
    ParamMap p = default_params(variant);
    if (c.study) {
        if (!fs::exists(*c.study)) throw DataError("study file " + c.study->string() + " does not exist");
        const std::vector<Trial> trials = load_study(*c.study);
        if (trials.empty()) throw DataError("study file " + c.study->string() + " is empty");
        StudyResult s;
        s.trials = trials;
        p = s.best().params;
    }
    for (const auto& [k, v] : c.params) p[k] = v;
    return p;
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_synth(const Options& o) {
    const RunConfig c = resolve_config(o);
    if (!c.synthetic) throw ConfigError("synth needs a data.synthetic section");
    const SyntheticMarket m = generate_synthetic_ticks(seeded_synthetic(c));
    const fs::path dir = c.out / "ticks";
    fs::create_directories(dir);
    std::size_t ticks = 0, bursts = 0;
    for (std::size_t d = 0; d < m.days.size(); ++d) {
        write_ticks_csv(dir / (m.days[d].date + ".csv"), m.days[d]);
        ticks += m.days[d].ticks.size();
        bursts += m.burst_starts[d].size();
    }
    std::printf("wrote %zu days to %s\n", m.days.size(), dir.string().c_str());
    std::printf("ticks %zu, momentum bursts %zu\n", ticks, bursts);
    if (!m.days.empty())
        std::printf("price %.4f -> %.4f\n", m.days.front().ticks.front().price, m.days.back().ticks.back().price);
    return kOk;
}

int cmd_preprocess(const Options& o) {
    const RunConfig c = resolve_config(o);
    const std::vector<DayData> days = prepare_days(load_days(c), c.preprocess);
    const ModelVariant variant = c.model == "model3"   ? ModelVariant::kModel3
                                 : c.model == "model2" ? ModelVariant::kModel2
                                                       : ModelVariant::kModel1;
    const std::size_t lags = variant == ModelVariant::kModel2 ? c.preprocess.lags : 1;
    const fs::path dir = c.out / "preprocessed";
    fs::create_directories(dir);
    json index = json::array();
    for (std::size_t d = 0; d < days.size(); ++d) {
        const FeatureMatrix raw = model_features(days[d], variant, lags, c.preprocess);
        auto [norm, spec] = normalize(raw, c.preprocess.q_low, c.preprocess.q_high, c.preprocess.upper_bound);
        const SpikeTensor spikes = encode_poisson(norm, c.preprocess.timesteps, substream(c.seed, "encode", d));
        save_features(dir / (days[d].date + ".features.hfst"), norm);
        save_spikes(dir / (days[d].date + ".spikes.hfst"), spikes, norm.first_bar());
        json channels = json::array();
        for (const ChannelScaling& s : spec.channels)
            channels.push_back({{"q_low", s.q_low}, {"q_high", s.q_high}, {"scale", s.scale}});
        index.push_back({{"date", days[d].date},
                         {"bars", days[d].bars.size()},
                         {"rows", norm.rows()},
                         {"channels", norm.cols()},
                         {"first_bar", norm.first_bar()},
                         {"r_thresh", days[d].truth.r_thresh},
                         {"labeled", days[d].truth.labeled_count()},
                         {"real", days[d].truth.real_count()},
                         {"normalization", {{"upper_bound", spec.upper_bound}, {"channels", channels}}}});
        std::printf("%s: %zu bars, %zu x %zu features, real %zu / %zu\n", days[d].date.c_str(), days[d].bars.size(),
                    norm.rows(), norm.cols(), days[d].truth.real_count(), days[d].truth.labeled_count());
    }
    write_json(dir / "index.json", index);
    return kOk;
}

int cmd_train(const Options& o) {
    const RunConfig c = resolve_config(o);
    const std::vector<DayData> days = prepare_days(load_days(c), c.preprocess);
    if (days.empty()) throw DataError("no trading days in the data source");
    const DayData& day = days.front();
    fs::create_directories(c.out);

    if (c.model == "model3") {
        const FeatureMatrix raw = model_features(day, ModelVariant::kModel3, 0, c.preprocess);
        auto [norm, spec] = normalize(raw, c.preprocess.q_low, c.preprocess.q_high, c.preprocess.upper_bound);
        const SpikeTensor spikes = encode_poisson(norm, c.preprocess.timesteps, substream(c.seed, "encode", 0));
        const std::vector<std::uint8_t> labels = row_labels(slice_truth(day.truth, norm.first_bar(), norm.rows()));
        TrainConfig tc = c.supervised;
        tc.seed = substream(c.seed, "init");
        const SupervisedResult r = train_supervised(make_supervised_network(spikes.channels(), tc), spikes, labels, tc);
        write_loss_history_csv(c.out / "loss_history.csv", r.history);
        save_checkpoint(c.out / "checkpoint.json", {r.network, 0});
        for (const LossHistoryEntry& e : r.history)
            std::printf("epoch %zu loss %.4f accuracy %.4f\n", e.epoch, e.mean_loss, e.train_accuracy);
        return kOk;
    }

    const ModelVariant variant = stdp_variant(c.model);
    const SnnHyperparams h = snn_hyperparams(resolve_params(c, variant), variant);
    const FeatureMatrix raw = model_features(day, variant, h.n_input, c.preprocess);
    auto [norm, spec] = normalize(raw, c.preprocess.q_low, c.preprocess.q_high, c.preprocess.upper_bound);
    const SpikeTensor spikes = encode_poisson(norm, c.preprocess.timesteps, substream(c.seed, "encode", 0));
    TrainingLog log;
    const NetworkState net = train_stdp_network(variant, h, spikes, substream(c.seed, "init"), &log);
    log.write_csv(c.out / "training_log.csv");
    save_checkpoint(c.out / "checkpoint.json", {net, h.d_thresh});
    const MetricsReport m =
        evaluate(predict_rows(net, h.d_thresh, spikes), slice_truth(day.truth, norm.first_bar(), norm.rows()));
    std::printf("trained %s on %s (%zu timestamps)\n", c.model.c_str(), day.date.c_str(), spikes.timestamps());
    std::printf("in-sample spiking rate %s, spike accuracy %s\n", json(m).at("spiking_rate").dump().c_str(),
                json(m).at("spike_accuracy").dump().c_str());
    return kOk;
}

int cmd_tune(const Options& o) {
    const RunConfig c = resolve_config(o);
    const ModelVariant variant = stdp_variant(c.model);
    std::vector<DayData> days = prepare_days(load_days(c), c.preprocess);
    fs::create_directories(c.out);
    const fs::path path = study_path(c);

    std::vector<Trial> previous;
    if (c.tune.resume && fs::exists(path)) {
        previous = load_study(path);
    } else {
        std::ofstream truncate(path, std::ios::trunc);
        if (!truncate) throw DataError("cannot write " + path.string());
    }

    SnnObjective objective(variant, std::move(days), c.preprocess, c.objective, c.tune.batch_size, c.seed);
    if (objective.n_batches() < 2)
        throw DataError("the data holds " + std::to_string(objective.n_batches()) + " batch(es) of " +
                        std::to_string(c.tune.batch_size) + " timestamps; at least two are needed");
    StudyOptions so;
    so.n_trials = c.tune.n_trials;
    so.seed = c.seed;
    so.metric = c.objective;
    so.sampler = c.tune.sampler == "random" ? SamplerKind::kRandom : SamplerKind::kTpe;
    so.on_trial = [&](const Trial& t) {
        append_trial(path, t);
        std::printf("trial %3zu  score %.4f  srd %s%s\n", t.trial_id, t.score,
                    t.srd ? std::to_string(*t.srd).c_str() : "null",
                    t.failed ? "  failed" : t.undefined_score ? "  (no predictions)" : "");
    };
    const StudyResult r = run_study(space_for(variant), std::ref(objective), so, std::move(previous));
    const Trial& best = r.best();
    std::printf("best trial %zu: %s = %.4f\n%s\n", best.trial_id, c.objective.c_str(), best.score,
                json(best.params).dump().c_str());
    std::printf("study written to %s\n", path.string().c_str());
    return kOk;
}

int cmd_backtest(const Options& o) {
    const RunConfig c = resolve_config(o);
    const std::vector<DayData> days = prepare_days(load_days(c), c.preprocess);
    if (days.size() < 2) throw DataError("the backtest needs at least two trading days");
    fs::create_directories(c.out);

    json report;
    report["config"] = run_config_to_json(c);
    report["test_days"] = days.size() - 1;

    ExperimentReport model;
    if (c.model == "naive") {
        model = naive_baseline(days, c.strategy);
    } else if (c.model == "random") {
        model = random_baseline(days, c.strategy, c.seed).mean;
    } else if (c.model == "model3") {
        model = rolling_experiment("model3", days, supervised_runner(c.supervised, c.preprocess), c.strategy, c.seed);
    } else {
        const ModelVariant variant = stdp_variant(c.model);
        const ParamMap params = resolve_params(c, variant);
        report["params"] = params;
        model = rolling_experiment(c.model, days, stdp_runner(variant, snn_hyperparams(params, variant), c.preprocess),
                                   c.strategy, c.seed);
    }
    model.name = c.model;
    report["model"] = model;
    write_trades_csv(c.out / "trades.csv", model.trades);
    write_equity_csv(c.out / "equity.csv", model.equity);
    write_drawdown_csv(c.out / "drawdown.csv", model.equity);

    if (c.baselines) {
        report["naive"] = naive_baseline(days, c.strategy);
        const RandomBaseline rb = random_baseline(days, c.strategy, c.seed);
        report["random"] = rb.mean;
        report["random"]["runs"] = c.strategy.random_runs;
        report["random"]["expectancy_std_error"] = rb.expectancy_std_error;
    }
    write_json(c.out / "report.json", report);

    const TradingReport& t = model.trading;
    std::printf("%s over %zu test days: %zu trades, cumulative return %.6f, expectancy %s\n", c.model.c_str(),
                days.size() - 1, t.n_trades, t.cumulative_return, json(t).at("expectancy").dump().c_str());
    std::printf("report written to %s\n", (c.out / "report.json").string().c_str());
    return kOk;
}

std::string cell(const json& v, double scale = 1.0) {
    if (v.is_null()) return "n/a";
    char buf[32];
    if (v.is_number_integer())
        std::snprintf(buf, sizeof buf, "%lld", v.get<long long>());
    else
        std::snprintf(buf, sizeof buf, "%.4f", v.get<double>() * scale);
    return buf;
}

int cmd_report(const Options& o) {
    const RunConfig c = resolve_config(o, false);
    const fs::path dir = c.out;
    const std::vector<std::string> expected = {"report.json", "equity.csv", "trades.csv"};
    std::vector<std::string> missing;
    for (const std::string& f : expected)
        if (!fs::exists(dir / f)) missing.push_back(f);
    if (!missing.empty()) {
        std::string list;
        for (const std::string& f : missing) list += "\n  " + (dir / f).string();
        throw DataError("missing backtest artifacts in " + dir.string() + ":" + list +
                        "\nrun the backtest command first");
    }

    json report;
    {
        std::ifstream in(dir / "report.json");
        try {
            report = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError("report.json is not valid JSON: " + std::string(e.what()));
        }
    }

    std::vector<std::string> columns = {"model"};
    for (const char* b : {"naive", "random"})
        if (report.contains(b)) columns.push_back(b);

    struct Row {
        const char* label;
        const char* section;
        const char* key;
        double scale;
    };
    const Row rows[] = {
        {"Cumulative return (%)", "trading", "cumulative_return", 100.0},
        {"Scaled return (%)", "trading", "scaled_cumulative_return", 100.0},
        {"Sharpe ratio", "trading", "sharpe", 1.0},
        {"Max drawdown (%)", "trading", "max_drawdown", 100.0},
        {"Win rate (%)", "trading", "win_rate", 100.0},
        {"Profit factor", "trading", "profit_factor", 1.0},
        {"Profit/loss ratio", "trading", "profit_loss_ratio", 1.0},
        {"Expectancy (1e-6)", "trading", "expectancy", 1e6},
        {"Trades", "trading", "n_trades", 1.0},
        {"Spike accuracy (%)", "metrics", "spike_accuracy", 100.0},
        {"Momentum spikes (%)", "metrics", "momentum_spike_pct", 100.0},
        {"Spiking rate (%)", "metrics", "spiking_rate", 100.0},
        {"Real spiking rate (%)", "metrics", "real_spiking_rate", 100.0},
        {"TPR (%)", "metrics", "tpr", 100.0},
        {"FPR (%)", "metrics", "fpr", 100.0},
        {"PSA", "metrics", "psa", 1.0},
        {"SRD", "metrics", "srd", 1.0},
    };
    std::printf("%-24s", "");
    for (const std::string& col : columns) std::printf("%14s", report.at(col).value("name", col).c_str());
    std::printf("\n");
    for (const Row& r : rows) {
        std::printf("%-24s", r.label);
        for (const std::string& col : columns) std::printf("%14s", cell(report.at(col).at(r.section).at(r.key), r.scale).c_str());
        std::printf("\n");
    }

    // Plot data: drawdown from the equity curve, objective curves from studies.
    std::vector<double> equity;
    {
        std::ifstream in(dir / "equity.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw DataError("malformed equity.csv row: " + line);
            equity.push_back(std::stod(line.substr(comma + 1)));
        }
    }
    for (double d : drawdown_curve(equity))
        if (!(d >= 0.0 && d <= 1.0)) throw Error("drawdown outside [0, 1]");
    write_drawdown_csv(dir / "drawdown.csv", equity);

    std::vector<fs::path> studies;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename().string().rfind("study_", 0) == 0 && e.path().extension() == ".ndjson")
            studies.push_back(e.path());
    std::sort(studies.begin(), studies.end());
    for (const fs::path& s : studies) {
        StudyResult r;
        r.trials = load_study(s);
        const std::vector<double> curve = r.best_curve();
        std::ofstream out(dir / (s.stem().string() + "_objective.csv"));
        out.precision(17);
        out << "trial_id,score,best_score\n";
        for (std::size_t i = 0; i < r.trials.size(); ++i)
            out << r.trials[i].trial_id << ',' << r.trials[i].score << ',' << curve[i] << '\n';
        std::printf("objective curve: %s\n", (dir / (s.stem().string() + "_objective.csv")).string().c_str());
    }
    std::printf("drawdown curve: %s\n", (dir / "drawdown.csv").string().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiking-network price-spike prediction and momentum backtesting"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON run configuration");
        sub->add_option("--seed", o.seed, "root seed for every random stream");
        sub->add_option("--jobs", o.jobs, "worker thread cap")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", o.out, "output directory");
    };
    CLI::App* synth = app.add_subcommand("synth", "write synthetic tick CSVs, one per day");
    CLI::App* preprocess = app.add_subcommand("preprocess", "VWAP bars, features, normalization and spike tensors");
    CLI::App* train = app.add_subcommand("train", "train a network on the first day and save a checkpoint");
    CLI::App* tune = app.add_subcommand("tune", "hyperparameter study for model1 or model2");
    CLI::App* backtest = app.add_subcommand("backtest", "rolling train/test experiment with baselines");
    CLI::App* report = app.add_subcommand("report", "summary table and plot data from a backtest output directory");
    for (CLI::App* sub : {synth, preprocess, train, tune, backtest, report}) add_common(sub);
    tune->add_flag("--resume", o.resume, "continue an existing study file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*synth) return cmd_synth(o);
        if (*preprocess) return cmd_preprocess(o);
        if (*train) return cmd_train(o);
        if (*tune) return cmd_tune(o);
        if (*backtest) return cmd_backtest(o);
        if (*report) return cmd_report(o);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}
