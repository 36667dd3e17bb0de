#include "hfsnn/config.hpp"

#include <fstream>
#include <set>

#include "hfsnn/error.hpp"

namespace hfsnn {

using nlohmann::json;

namespace {

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

SyntheticConfig parse_synthetic(const json& j) {
    only_keys(j, "data.synthetic",
              {"n_days", "ticks_per_day", "base_price", "noise_volatility", "spike_rate", "spike_multiplier",
               "momentum_persistence", "volume_log_mean", "volume_log_sigma", "burst_volume_multiplier",
               "start_date"});
    SyntheticConfig s;
    read(j, "n_days", s.n_days);
    read(j, "ticks_per_day", s.ticks_per_day);
    read(j, "base_price", s.base_price);
    read(j, "noise_volatility", s.noise_volatility);
    read(j, "spike_rate", s.spike_rate);
    read(j, "spike_multiplier", s.spike_multiplier);
    read(j, "momentum_persistence", s.momentum_persistence);
    read(j, "volume_log_mean", s.volume_log_mean);
    read(j, "volume_log_sigma", s.volume_log_sigma);
    read(j, "burst_volume_multiplier", s.burst_volume_multiplier);
    read(j, "start_date", s.start_date);
    return s;
}

}  // namespace

void RunConfig::validate() const {
    if (csv.has_value() == synthetic.has_value()) throw ConfigError("data needs exactly one of 'csv' and 'synthetic'");
    if (synthetic) synthetic->validate();
    if (jobs < 0) throw ConfigError("jobs must be >= 0");
    preprocess.validate();
    if (model != "model1" && model != "model2" && model != "model3" && model != "naive" && model != "random")
        throw ConfigError("model must be one of model1, model2, model3, naive, random");
    if (objective != "SA" && objective != "PSA") throw ConfigError("objective must be SA or PSA");
    if (tune.n_trials == 0) throw ConfigError("tune.n_trials must be >= 1");
    if (tune.batch_size == 0) throw ConfigError("tune.batch_size must be >= 1");
    if (tune.sampler != "tpe" && tune.sampler != "random") throw ConfigError("tune.sampler must be tpe or random");
    supervised.validate();
    strategy.validate();
}

RunConfig run_config_from_json(const json& doc) {
    only_keys(doc, "config",
              {"schema_version", "seed", "jobs", "out", "data", "preprocess", "model", "study", "params", "objective",
               "tune", "supervised", "strategy", "baselines"});
    if (!doc.contains("schema_version")) throw ConfigError("config is missing schema_version");
    if (doc.at("schema_version") != kConfigSchemaVersion)
        throw ConfigError("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");

    RunConfig c;
    read(doc, "seed", c.seed);
    read(doc, "jobs", c.jobs);
    if (doc.contains("out")) c.out = doc.at("out").get<std::string>();

    if (!doc.contains("data")) throw ConfigError("config is missing 'data'");
    const json& data = doc.at("data");
    only_keys(data, "data", {"csv", "synthetic"});
    if (data.contains("csv")) c.csv = data.at("csv").get<std::string>();
    if (data.contains("synthetic")) c.synthetic = parse_synthetic(data.at("synthetic"));

    if (doc.contains("preprocess")) {
        const json& p = doc.at("preprocess");
        only_keys(p, "preprocess",
                  {"window_n", "lags", "supervised_lags", "vol_window", "q_low", "q_high", "upper_bound", "timesteps",
                   "label_window"});
        read(p, "window_n", c.preprocess.window_n);
        read(p, "lags", c.preprocess.lags);
        read(p, "supervised_lags", c.preprocess.supervised_lags);
        read(p, "vol_window", c.preprocess.vol_window);
        read(p, "q_low", c.preprocess.q_low);
        read(p, "q_high", c.preprocess.q_high);
        read(p, "upper_bound", c.preprocess.upper_bound);
        read(p, "timesteps", c.preprocess.timesteps);
        read(p, "label_window", c.preprocess.label_window);
    }
    read(doc, "model", c.model);
    if (doc.contains("study")) c.study = doc.at("study").get<std::string>();
    read(doc, "params", c.params);
    read(doc, "objective", c.objective);
    if (doc.contains("tune")) {
        const json& t = doc.at("tune");
        only_keys(t, "tune", {"n_trials", "batch_size", "sampler", "resume"});
        read(t, "n_trials", c.tune.n_trials);
        read(t, "batch_size", c.tune.batch_size);
        read(t, "sampler", c.tune.sampler);
        read(t, "resume", c.tune.resume);
    }
    if (doc.contains("supervised")) {
        const json& s = doc.at("supervised");
        only_keys(s, "supervised",
                  {"learning_rate", "n_hidden", "n_hidden_layers", "v_thresh", "beta", "epochs", "batch_size",
                   "target_hi", "target_lo", "surrogate_slope"});
        read(s, "learning_rate", c.supervised.learning_rate);
        read(s, "n_hidden", c.supervised.n_hidden);
        read(s, "n_hidden_layers", c.supervised.n_hidden_layers);
        read(s, "v_thresh", c.supervised.v_thresh);
        read(s, "beta", c.supervised.beta);
        read(s, "epochs", c.supervised.epochs);
        read(s, "batch_size", c.supervised.batch_size);
        read(s, "target_hi", c.supervised.target_hi);
        read(s, "target_lo", c.supervised.target_lo);
        read(s, "surrogate_slope", c.supervised.surrogate_slope);
    }
    if (doc.contains("strategy")) {
        const json& s = doc.at("strategy");
        only_keys(s, "strategy",
                  {"lookback", "hold", "invert_direction", "cost_bps", "random_runs", "random_probability"});
        read(s, "lookback", c.strategy.lookback);
        read(s, "hold", c.strategy.hold);
        read(s, "invert_direction", c.strategy.invert_direction);
        read(s, "cost_bps", c.strategy.cost_bps);
        read(s, "random_runs", c.strategy.random_runs);
        read(s, "random_probability", c.strategy.random_probability);
    }
    read(doc, "baselines", c.baselines);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return run_config_from_json(doc);
}

json run_config_to_json(const RunConfig& c) {
    json data = json::object();
    if (c.csv) data["csv"] = c.csv->string();
    if (c.synthetic) {
        const SyntheticConfig& s = *c.synthetic;
        data["synthetic"] = {{"n_days", s.n_days},
                             {"ticks_per_day", s.ticks_per_day},
                             {"base_price", s.base_price},
                             {"noise_volatility", s.noise_volatility},
                             {"spike_rate", s.spike_rate},
                             {"spike_multiplier", s.spike_multiplier},
                             {"momentum_persistence", s.momentum_persistence},
                             {"volume_log_mean", s.volume_log_mean},
                             {"volume_log_sigma", s.volume_log_sigma},
                             {"burst_volume_multiplier", s.burst_volume_multiplier},
                             {"start_date", s.start_date}};
    }
    const PreprocessConfig& p = c.preprocess;
    const TrainConfig& t = c.supervised;
    const StrategyConfig& s = c.strategy;
    json doc = {
        {"schema_version", kConfigSchemaVersion},
        {"seed", c.seed},
        {"data", data},
        {"preprocess",
         {{"window_n", p.window_n},
          {"lags", p.lags},
          {"supervised_lags", p.supervised_lags},
          {"vol_window", p.vol_window},
          {"q_low", p.q_low},
          {"q_high", p.q_high},
          {"upper_bound", p.upper_bound},
          {"timesteps", p.timesteps},
          {"label_window", p.label_window}}},
        {"model", c.model},
        {"params", c.params},
        {"objective", c.objective},
        {"tune",
         {{"n_trials", c.tune.n_trials},
          {"batch_size", c.tune.batch_size},
          {"sampler", c.tune.sampler},
          {"resume", c.tune.resume}}},
        {"supervised",
         {{"learning_rate", t.learning_rate},
          {"n_hidden", t.n_hidden},
          {"n_hidden_layers", t.n_hidden_layers},
          {"v_thresh", t.v_thresh},
          {"beta", t.beta},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"target_hi", t.target_hi},
          {"target_lo", t.target_lo},
          {"surrogate_slope", t.surrogate_slope}}},
        {"strategy",
         {{"lookback", s.lookback},
          {"hold", s.hold},
          {"invert_direction", s.invert_direction},
          {"cost_bps", s.cost_bps},
          {"random_runs", s.random_runs},
          {"random_probability", s.random_probability}}},
        {"baselines", c.baselines},
    };
    if (c.study) doc["study"] = c.study->string();
    return doc;
}

ParamMap default_params(ModelVariant variant) {
    if (variant == ModelVariant::kModel2)
        return {{"a_plus", 0.0012},    {"a_minus", 0.0009},    {"tau_plus", 54},  {"tau_minus", 58},
                {"b_plus", 0.0016},    {"b_minus", 0.0009},    {"theta_plus", 51}, {"theta_minus", 51},
                {"beta", 0.86},        {"v_thresh", 2.0},      {"n_hidden", 64},  {"n_input", 3},
                {"d_thresh", 4}};
    return {{"a_plus", 0.0067}, {"a_minus", 0.0063}, {"tau_plus", 71},   {"tau_minus", 72},
            {"beta", 0.79},     {"v_thresh", 0.8},   {"n_hidden", 32},   {"d_thresh", 4}};
}

}  // namespace hfsnn
