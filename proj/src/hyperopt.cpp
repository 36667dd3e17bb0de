#include "hfsnn/hyperopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "hfsnn/error.hpp"
#include "json.hpp"

namespace hfsnn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Search space
// ---------------------------------------------------------------------------

std::pair<double, double> ParamSpec::bounds(const ParamMap& drawn) const {
    if (dependency == Dependency::kNone) return {low, high};
    const auto it = drawn.find(parent);
    if (it == drawn.end()) throw ConfigError("parameter '" + name + "' drawn before its parent '" + parent + "'");
    const double p = it->second;
    const double lo = std::max(p - width, floor);
    const double hi = dependency == Dependency::kBelowParent ? p : p + width;
    return {lo, hi};
}

double ParamSpec::snap(double value, double lo) const {
    if (step <= 0.0) return value;
    const double k = std::round((value - lo) / step);
    const double inv = std::round(1.0 / step);
    // Decimal grids (0.01, 0.1) come out as the nearest double of the decimal.
    if (std::abs(inv * step - 1.0) < 1e-12) return (std::round(lo * inv) + k) / inv;
    return lo + k * step;
}

const ParamSpec& SearchSpace::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return p;
    throw ConfigError("unknown parameter '" + name + "'");
}

bool SearchSpace::contains(const ParamMap& m) const {
    for (const ParamSpec& p : params) {
        const auto it = m.find(p.name);
        if (it == m.end()) return false;
        const double x = it->second;
        if (p.scale == ParamScale::kCategorical) {
            if (std::find(p.choices.begin(), p.choices.end(), x) == p.choices.end()) return false;
            continue;
        }
        const auto [lo, hi] = p.bounds(m);
        const double tol = 1e-12 * std::max(1.0, std::abs(hi));
        if (!(x >= lo - tol && x <= hi + tol)) return false;
        if (p.step > 0.0) {
            const double k = (x - lo) / p.step;
            if (std::abs(k - std::round(k)) > 1e-6) return false;
        }
    }
    return true;
}

void SearchSpace::validate() const {
    ParamMap seen;
    for (const ParamSpec& p : params) {
        if (p.scale == ParamScale::kCategorical) {
            if (p.choices.empty()) throw ConfigError("categorical parameter '" + p.name + "' has no choices");
        } else if (p.dependency == Dependency::kNone) {
            if (!(p.low <= p.high)) throw ConfigError("parameter '" + p.name + "' has an empty range");
            if (p.scale == ParamScale::kLog && !(p.low > 0.0))
                throw ConfigError("log-scale parameter '" + p.name + "' needs a positive range");
        } else {
            if (!seen.count(p.parent))
                throw ConfigError("parameter '" + p.name + "' depends on '" + p.parent + "', which is not declared before it");
            if (p.scale == ParamScale::kLog && !(p.floor > 0.0))
                throw ConfigError("log-scale parameter '" + p.name + "' needs a positive floor");
        }
        seen[p.name] = 0.0;
    }
}

namespace {

ParamSpec log_param(std::string name, double lo, double hi) {
    ParamSpec p;
    p.name = std::move(name);
    p.scale = ParamScale::kLog;
    p.low = lo;
    p.high = hi;
    return p;
}

ParamSpec grid_param(std::string name, double lo, double hi, double step) {
    ParamSpec p;
    p.name = std::move(name);
    p.low = lo;
    p.high = hi;
    p.step = step;
    return p;
}

ParamSpec dependent(std::string name, ParamScale scale, std::string parent, Dependency dep, double width, double floor,
                    double step) {
    ParamSpec p;
    p.name = std::move(name);
    p.scale = scale;
    p.parent = std::move(parent);
    p.dependency = dep;
    p.width = width;
    p.floor = floor;
    p.step = step;
    return p;
}

void add_stdp_pair(SearchSpace& s, const std::string& amp, const std::string& tau) {
    s.params.push_back(log_param(amp + "_plus", 1e-4, 1e-2));
    s.params.push_back(dependent(amp + "_minus", ParamScale::kLog, amp + "_plus", Dependency::kBelowParent, 1e-3, 1e-5, 0.0));
    s.params.push_back(grid_param(tau + "_plus", 5, 100, 1));
    s.params.push_back(dependent(tau + "_minus", ParamScale::kLinear, tau + "_plus", Dependency::kAroundParent, 5, 1, 1));
}

void add_neuron_params(SearchSpace& s) {
    s.params.push_back(grid_param("beta", 0.5, 0.99, 0.01));
    s.params.push_back(grid_param("v_thresh", 0.8, 2.5, 0.1));
    s.params.push_back(grid_param("d_thresh", 4, 16, 1));
    ParamSpec h;
    h.name = "n_hidden";
    h.scale = ParamScale::kCategorical;
    h.choices = {16, 32, 64, 128};
    s.params.push_back(h);
}

}  // namespace

SearchSpace model1_space() {
    SearchSpace s;
    add_stdp_pair(s, "a", "tau");
    add_neuron_params(s);
    return s;
}

SearchSpace model2_space() {
    SearchSpace s;
    add_stdp_pair(s, "a", "tau");
    add_stdp_pair(s, "b", "theta");
    add_neuron_params(s);
    s.params.push_back(grid_param("n_input", 1, 10, 1));
    return s;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

namespace {

/// Continuous coordinate of a numeric parameter: log for log scale, and
/// stepped ranges widened by half a step so every grid value has equal room.
struct Axis {
    double zlo = 0.0, zhi = 0.0;
    bool log = false;
    double half_step = 0.0;

    Axis(const ParamSpec& p, double lo, double hi) : log(p.scale == ParamScale::kLog) {
        zlo = log ? std::log(lo) : lo;
        zhi = log ? std::log(hi) : hi;
        if (p.step > 0.0 && !log) {
            half_step = 0.5 * p.step;
            zlo -= half_step;
            zhi += half_step;
        }
    }
    double span() const { return zhi - zlo; }
    double to_u(double x) const {
        const double z = log ? std::log(x) : x;
        return span() > 0.0 ? std::clamp((z - zlo) / span(), 0.0, 1.0) : 0.5;
    }
    double from_u(double u) const {
        const double z = zlo + u * span();
        return log ? std::exp(z) : z;
    }
};

double clamp_snap(const ParamSpec& p, double x, double lo, double hi) {
    x = std::clamp(x, lo, hi);
    x = p.snap(x, lo);
    if (x > hi) x -= p.step;
    if (x < lo) x += p.step;
    return x;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Mixture of Gaussians truncated to [0, 1], equal weights.
class Parzen {
public:
    explicit Parzen(std::vector<double> points) {
        points.push_back(0.5);  // prior component
        mu_ = points;
        std::vector<std::size_t> order(mu_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu_[a] < mu_[b]; });
        sigma_.assign(mu_.size(), 1.0);
        const double min_sigma = 1.0 / static_cast<double>(std::min<std::size_t>(100, mu_.size()));
        for (std::size_t r = 0; r < order.size(); ++r) {
            const std::size_t i = order[r];
            const double left = r == 0 ? 0.0 : mu_[order[r - 1]];
            const double right = r + 1 == order.size() ? 1.0 : mu_[order[r + 1]];
            sigma_[i] = std::clamp(std::max(mu_[i] - left, right - mu_[i]), min_sigma, 1.0);
        }
        sigma_.back() = 1.0;
        for (std::size_t i = 0; i < mu_.size(); ++i)
            norm_.push_back(norm_cdf((1.0 - mu_[i]) / sigma_[i]) - norm_cdf(-mu_[i] / sigma_[i]));
    }

    double sample(Rng& rng) const {
        const std::size_t i = rng.below(mu_.size());
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const double x = mu_[i] + sigma_[i] * rng.normal();
            if (x >= 0.0 && x <= 1.0) return x;
        }
        return std::clamp(mu_[i], 0.0, 1.0);
    }

    /// Probability mass of [a, b] intersected with [0, 1].
    double mass(double a, double b) const {
        a = std::max(a, 0.0);
        b = std::min(b, 1.0);
        if (b <= a) return 0.0;
        double m = 0.0;
        for (std::size_t i = 0; i < mu_.size(); ++i)
            m += (norm_cdf((b - mu_[i]) / sigma_[i]) - norm_cdf((a - mu_[i]) / sigma_[i])) / norm_[i];
        return m / static_cast<double>(mu_.size());
    }

    double pdf(double x) const {
        double d = 0.0;
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            const double z = (x - mu_[i]) / sigma_[i];
            d += std::exp(-0.5 * z * z) / (sigma_[i] * std::sqrt(2.0 * std::numbers::pi) * norm_[i]);
        }
        return d / static_cast<double>(mu_.size());
    }

private:
    std::vector<double> mu_, sigma_, norm_;
};

double draw_uniform_param(const ParamSpec& p, double lo, double hi, Rng& rng) {
    if (p.scale == ParamScale::kCategorical) return p.choices[rng.below(p.choices.size())];
    if (p.step > 0.0) {
        const auto m = static_cast<std::uint64_t>(std::floor((hi - lo) / p.step + 1e-9)) + 1;
        return clamp_snap(p, lo + static_cast<double>(rng.below(m)) * p.step, lo, hi);
    }
    if (p.scale == ParamScale::kLog) return std::exp(rng.uniform(std::log(lo), std::log(hi)));
    return rng.uniform(lo, hi);
}

std::optional<ParamMap> draw_with_retries(const SearchSpace& space, int max_retries,
                                          const std::function<double(const ParamSpec&, double, double, const ParamMap&)>& draw) {
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        ParamMap out;
        bool ok = true;
        for (const ParamSpec& p : space.params) {
            double lo = 0.0, hi = 0.0;
            if (p.scale != ParamScale::kCategorical) {
                std::tie(lo, hi) = p.bounds(out);
                if (lo > hi) {
                    ok = false;
                    break;
                }
            }
            out[p.name] = draw(p, lo, hi, out);
        }
        if (ok) return out;
    }
    return std::nullopt;
}

double categorical_draw(const ParamSpec& p, std::span<const Trial> good, std::span<const Trial> bad, Rng& rng,
                        std::size_t n_candidates) {
    const std::size_t C = p.choices.size();
    auto weights = [&](std::span<const Trial> set) {
        std::vector<double> w(C, 1.0 / static_cast<double>(C));
        for (const Trial& t : set) {
            const auto it = std::find(p.choices.begin(), p.choices.end(), t.params.at(p.name));
            if (it != p.choices.end()) w[static_cast<std::size_t>(it - p.choices.begin())] += 1.0;
        }
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= total;
        return w;
    };
    const std::vector<double> wl = weights(good), wg = weights(bad);
    std::discrete_distribution<std::size_t> dist(wl.begin(), wl.end());
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t c = 0; c < n_candidates; ++c) {
        const std::size_t k = dist(rng.engine());
        const double s = std::log(wl[k]) - std::log(wg[k]);
        if (s > best_score) {
            best_score = s;
            best = k;
        }
    }
    return p.choices[best];
}

double numeric_draw(const ParamSpec& p, double lo, double hi, std::span<const Trial> good, std::span<const Trial> bad,
                    Rng& rng, std::size_t n_candidates) {
    if (lo == hi) return lo;
    const Axis axis(p, lo, hi);
    auto observations = [&](std::span<const Trial> set) {
        std::vector<double> u;
        for (const Trial& t : set) {
            const auto [tlo, thi] = p.bounds(t.params);
            if (!(tlo <= thi)) continue;
            if (tlo == thi) {
                u.push_back(0.5);
                continue;
            }
            u.push_back(Axis(p, tlo, thi).to_u(std::clamp(t.params.at(p.name), tlo, thi)));
        }
        return u;
    };
    const Parzen l(observations(good)), g(observations(bad));
    const double half = axis.half_step > 0.0 ? axis.half_step / axis.span() : 0.0;

    double best_x = lo, best_score = -INFINITY;
    for (std::size_t c = 0; c < n_candidates; ++c) {
        const double x = clamp_snap(p, axis.from_u(l.sample(rng)), lo, hi);
        const double u = axis.to_u(x);
        double score;
        if (half > 0.0)
            score = std::log(l.mass(u - half, u + half) + 1e-300) - std::log(g.mass(u - half, u + half) + 1e-300);
        else
            score = std::log(l.pdf(u) + 1e-300) - std::log(g.pdf(u) + 1e-300);
        if (score > best_score) {
            best_score = score;
            best_x = x;
        }
    }
    return best_x;
}

}  // namespace

std::optional<ParamMap> sample_uniform(const SearchSpace& space, Rng& rng, int max_retries) {
    return draw_with_retries(space, max_retries,
                             [&](const ParamSpec& p, double lo, double hi, const ParamMap&) {
                                 return draw_uniform_param(p, lo, hi, rng);
                             });
}

std::optional<ParamMap> sample_tpe(const SearchSpace& space, std::span<const Trial> history, Rng& rng,
                                   const TpeOptions& options, int max_retries) {
    std::vector<Trial> done;
    for (const Trial& t : history)
        if (!t.failed && std::isfinite(t.score)) done.push_back(t);
    if (done.size() < std::max<std::size_t>(options.n_startup, 2)) return sample_uniform(space, rng, max_retries);

    std::stable_sort(done.begin(), done.end(), [](const Trial& a, const Trial& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.trial_id < b.trial_id;
    });
    const auto n_good = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(done.size()))), 1, done.size() - 1);
    const std::span<const Trial> good(done.data(), n_good);
    const std::span<const Trial> bad(done.data() + n_good, done.size() - n_good);

    return draw_with_retries(space, max_retries, [&](const ParamSpec& p, double lo, double hi, const ParamMap&) {
        if (p.scale == ParamScale::kCategorical) return categorical_draw(p, good, bad, rng, options.n_candidates);
        return numeric_draw(p, lo, hi, good, bad, rng, options.n_candidates);
    });
}

// ---------------------------------------------------------------------------
// Study driver
// ---------------------------------------------------------------------------

const Trial& StudyResult::best() const {
    const Trial* best = nullptr;
    for (const Trial& t : trials)
        if (!t.failed && (!best || t.score > best->score)) best = &t;
    if (!best) throw Error("every trial failed");
    return *best;
}

std::vector<double> StudyResult::best_curve() const {
    std::vector<double> curve;
    double best = -INFINITY;
    for (const Trial& t : trials) {
        if (!t.failed) best = std::max(best, t.score);
        curve.push_back(best);
    }
    return curve;
}

StudyResult run_study(const SearchSpace& space, const Objective& objective, const StudyOptions& options,
                      std::vector<Trial> previous) {
    space.validate();
    StudyResult result;
    result.trials = std::move(previous);
    std::size_t next_id = 0;
    for (const Trial& t : result.trials) next_id = std::max(next_id, t.trial_id + 1);

    for (std::size_t k = 0; k < options.n_trials; ++k) {
        Trial trial;
        trial.trial_id = next_id++;
        trial.metric = options.metric;
        const auto start = std::chrono::steady_clock::now();
        std::optional<ParamMap> params;
        if (options.sampler == SamplerKind::kTpe) {
            Rng rng(substream(options.seed, "tpe", trial.trial_id));
            params = sample_tpe(space, result.trials, rng, options.tpe);
        } else {
            Rng rng(substream(options.seed, "random-search", trial.trial_id));
            params = sample_uniform(space, rng);
        }
        if (!params) {
            trial.failed = true;
        } else {
            trial.params = *params;
            try {
                const ObjectiveResult r = objective(trial.params, trial.trial_id);
                trial.score = r.score;
                trial.srd = r.srd;
                trial.batch_index = r.batch_index;
                trial.undefined_score = r.undefined_score;
                trial.failed = !std::isfinite(r.score);
            } catch (const Error&) {
                trial.failed = true;
            }
        }
        if (trial.failed) trial.score = 0.0;
        trial.duration_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (options.on_trial) options.on_trial(trial);
        result.trials.push_back(std::move(trial));
    }
    result.best();  // throws if nothing succeeded
    return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

std::string trial_to_json_line(const Trial& t) {
    json j = {{"trial_id", t.trial_id},
              {"params", t.params},
              {"metric", t.metric},
              {"score", t.score},
              {"srd", t.srd ? json(*t.srd) : json(nullptr)},
              {"batch_index", t.batch_index},
              {"duration_ms", t.duration_ms},
              {"status", t.failed ? "failed" : "complete"},
              {"undefined_score", t.undefined_score}};
    return j.dump();
}

Trial trial_from_json_line(const std::string& line) {
    try {
        const json j = json::parse(line);
        Trial t;
        t.trial_id = j.at("trial_id").get<std::size_t>();
        t.params = j.at("params").get<ParamMap>();
        t.metric = j.at("metric").get<std::string>();
        t.score = j.at("score").get<double>();
        if (!j.at("srd").is_null()) t.srd = j.at("srd").get<double>();
        t.batch_index = j.at("batch_index").get<std::size_t>();
        t.duration_ms = j.at("duration_ms").get<double>();
        t.failed = j.value("status", std::string("complete")) == "failed";
        t.undefined_score = j.value("undefined_score", false);
        return t;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed trial record: ") + e.what());
    }
}

void append_trial(const std::filesystem::path& path, const Trial& trial) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot write " + path.string());
    out << trial_to_json_line(trial) << '\n';
}

std::vector<Trial> load_study(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open study file " + path.string());
    std::vector<Trial> trials;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            trials.push_back(trial_from_json_line(line));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return trials;
}

}  // namespace hfsnn
