#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hfsnn/rng.hpp"

namespace hfsnn {

using ParamMap = std::map<std::string, double>;

enum class ParamScale { kLinear, kLog, kCategorical };

/// How a parameter's range follows an earlier parameter p:
/// kBelowParent gives [max(p - width, floor), p], kAroundParent gives
/// [max(p - width, floor), p + width].
enum class Dependency { kNone, kBelowParent, kAroundParent };

struct ParamSpec {
    std::string name;
    ParamScale scale = ParamScale::kLinear;
    double low = 0.0;
    double high = 1.0;
    double step = 0.0;  ///< grid spacing, 0 for continuous
    std::vector<double> choices;
    Dependency dependency = Dependency::kNone;
    std::string parent;
    double width = 0.0;
    double floor = 0.0;

    /// Range given the values drawn so far. Empty (low > high) means the
    /// parent value leaves no room.
    std::pair<double, double> bounds(const ParamMap& drawn) const;
    /// Rounds to the grid, if any.
    double snap(double value, double lo) const;
};

struct SearchSpace {
    std::vector<ParamSpec> params;

    const ParamSpec& find(const std::string& name) const;
    /// True when every parameter is present, inside its range and on its grid.
    bool contains(const ParamMap& p) const;
    void validate() const;
};

/// Model 1 search space (no inhibitory parameters; one input per pathway).
SearchSpace model1_space();
/// Model 1 space plus inhibitory STDP parameters and the lag count.
SearchSpace model2_space();

struct Trial {
    std::size_t trial_id = 0;
    ParamMap params;
    std::string metric;
    double score = 0.0;
    std::optional<double> srd;
    std::size_t batch_index = 0;
    double duration_ms = 0.0;
    bool failed = false;
    bool undefined_score = false;  ///< no predictions on the eval batch, scored 0
};

struct StudyResult {
    std::vector<Trial> trials;

    /// Highest-scoring non-failed trial; the earliest wins ties.
    const Trial& best() const;
    /// Running maximum of the score after each trial.
    std::vector<double> best_curve() const;
};

struct TpeOptions {
    double gamma = 0.25;
    std::size_t n_startup = 10;
    std::size_t n_candidates = 24;
};

/// Uniform draw per parameter scale, dependents after their parents.
std::optional<ParamMap> sample_uniform(const SearchSpace& space, Rng& rng, int max_retries = 10);

/// Tree-structured Parzen estimator: uniform for the first n_startup
/// completed trials, then per parameter the candidate that maximises
/// l(x) / g(x) where l and g are Parzen densities of the best gamma
/// fraction and the rest. Returns nullopt when a dependent range stays
/// empty after max_retries redraws of its parent.
std::optional<ParamMap> sample_tpe(const SearchSpace& space, std::span<const Trial> history, Rng& rng,
                                   const TpeOptions& options = {}, int max_retries = 10);

enum class SamplerKind { kTpe, kRandom };

struct ObjectiveResult {
    double score = 0.0;
    std::optional<double> srd;
    std::size_t batch_index = 0;
    bool undefined_score = false;
};

using Objective = std::function<ObjectiveResult(const ParamMap& params, std::size_t trial_id)>;

struct StudyOptions {
    std::size_t n_trials = 100;
    std::uint64_t seed = 0;
    std::string metric = "SA";
    SamplerKind sampler = SamplerKind::kTpe;
    TpeOptions tpe;
    /// Called after each trial, e.g. to append it to a study file.
    std::function<void(const Trial&)> on_trial;
};

/// Runs n_trials sequential sample -> objective evaluations, continuing
/// after any `previous` trials (resume). Trials whose objective throws or
/// returns a non-finite score are marked failed. Throws if every trial failed.
StudyResult run_study(const SearchSpace& space, const Objective& objective, const StudyOptions& options,
                      std::vector<Trial> previous = {});

std::string trial_to_json_line(const Trial& trial);
Trial trial_from_json_line(const std::string& line);
void append_trial(const std::filesystem::path& path, const Trial& trial);
std::vector<Trial> load_study(const std::filesystem::path& path);

}  // namespace hfsnn
