#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imtsforge/dataset.hpp"
#include "imtsforge/gradscore.hpp"
#include "imtsforge/rng.hpp"
#include "imtsforge/systems_registry.hpp"

// Two-stage function generator and dataset forge: sample (x0, a, T) around
// literature values, grid-search the spread parameters for the hardest
// accepted configuration, and materialize sparse noisy datasets with onset
// sampling, dropout and observation noise. Exploding or degenerate
// configurations are rejected, never repaired.
namespace imts::gen {

struct SpreadConfig {
    double sigma_initial = 0.0;  // relative width around literature initial values
    double sigma_const = 0.0;    // relative width around literature constants
    double sigma_dur = 1.0;      // trajectory duration, absolute time
};

struct EvalProtocol {
    std::size_t eval_samples = 100;
    std::size_t eval_steps = 100;
    std::size_t score_window = 50;  // final steps scored
};

struct GeneratorConfig {
    std::string system;
    SpreadConfig spread;
    EvalProtocol protocol;
    std::uint64_t master_seed = 0;
};

enum class RejectCause { solver_failure, explosion, degenerate_channel };
std::string_view reject_cause_name(RejectCause cause);

struct ScoreOutcome {
    std::optional<grad::DifficultyReport> report;  // set iff accepted
    std::optional<RejectCause> rejection;
    ChannelStats eval_stats;  // empty when a solve failed before stats existed
    bool accepted() const { return report.has_value(); }
};

struct RejectionLog {
    std::size_t solver_failures = 0;
    std::size_t explosions = 0;
    std::size_t degenerate_channels = 0;

    struct Verdict {
        SpreadConfig config;
        std::optional<RejectCause> cause;  // empty means accepted
        double jgd = 0.0;                  // valid when accepted
    };
    std::vector<Verdict> verdicts;

    void record(const SpreadConfig& config, const ScoreOutcome& outcome);
};

struct SpreadGrids {
    std::vector<double> sigma_initial{0.1, 0.3, 0.5};
    std::vector<double> sigma_const{0.05, 0.1, 0.3};
    // in units of the system's default duration
    std::vector<double> sigma_dur{0.33, 1.0, 3.3, 10.0, 30.0};
};

struct OptimizeResult {
    std::optional<SpreadConfig> best;  // empty when every grid point was rejected
    std::optional<grad::DifficultyReport> report;
    RejectionLog log;
    bool all_rejected() const { return !best.has_value(); }
};

struct Triple {
    std::vector<double> x0;
    std::vector<double> a;
    double duration = 0.0;
};

struct DatasetConfig {
    std::size_t instances = 2000;
    std::size_t grid_steps = 200;
    std::size_t window_steps = 100;
    std::size_t onset_range = 100;  // onset index drawn from the first onset_range grid points
    double dropout = 0.8;
    double noise_std = 0.05;
    std::uint64_t master_seed = 0;
};

class GeneratorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SpreadRejectedError : public GeneratorError {
public:
    SpreadRejectedError(std::string message, RejectCause cause)
        : GeneratorError(std::move(message)), cause_(cause) {}
    RejectCause cause() const { return cause_; }

private:
    RejectCause cause_;
};

class RetryBudgetExhausted : public GeneratorError {
public:
    using GeneratorError::GeneratorError;
};

// Multiplicative uniform perturbation: value * (1 + sigma * U(-1,1)), which
// keeps literature values as the expectation. Exact zeros are perturbed
// additively by sigma * U(-1,1) instead, since a multiplicative spread cannot
// move them. The duration is sigma_dur itself. Draw order: one U(-1,1) per
// channel, then one per constant.
Triple sample_triple(const dsl::SystemSpec& spec, const SpreadConfig& spread, rng::Stream& stream);
Triple sample_triple(const dsl::SystemSpec& spec, const SpreadConfig& spread, std::uint64_t seed);

// Evaluation protocol: solve eval_samples trajectories of length eval_steps
// over [0, sigma_dur] (sample n uses stream derive(master_seed, n)), reject
// on any solver failure, then on any value further than 10 channel standard
// deviations from the channel mean, then score the final score_window steps.
ScoreOutcome score_config(const systems::Registry& registry, const GeneratorConfig& config,
                          std::size_t jobs = 1);

// Exhaustive grid search maximizing the aggregated score over accepted
// configurations. Ties within 1e-12 keep the lexicographically smaller
// (sigma_initial, sigma_const, sigma_dur). Grid point g uses master seed
// derive(master_seed, g) with g enumerated lexicographically.
OptimizeResult optimize_spreads(const systems::Registry& registry, std::string_view system,
                                const SpreadGrids& grids, const EvalProtocol& protocol,
                                std::uint64_t master_seed, std::size_t jobs = 1);

// Selection rule of optimize_spreads: index of the accepted outcome with the
// highest aggregated score, where scores within 1e-12 keep the earlier
// (lexicographically enumerated) index. Empty when nothing was accepted.
std::optional<std::size_t> select_best(std::span<const ScoreOutcome> outcomes);

// Builds the dataset: per instance i (stream derive(master_seed, i)) sample a
// triple, solve grid_steps points over [0, sigma_dur], draw an onset index,
// cut the window, reject on solver failure or on window values violating the
// evaluation-phase explosion rule, then apply per-cell dropout and Gaussian
// observation noise. Rejected instances are replaced by continuing the index
// sequence; more than 20% extra rejections raise RetryBudgetExhausted.
// Runs (and requires acceptance of) the evaluation protocol first.
Dataset materialize_dataset(const systems::Registry& registry, std::string_view system,
                            const SpreadConfig& spread, const DatasetConfig& config,
                            const EvalProtocol& protocol = {}, std::size_t jobs = 1);

struct LorenzProtocolConfig {
    std::size_t instances = 200;
    double duration = 20.0;  // absolute trajectory duration
    std::size_t grid_steps = 200;
    std::size_t window_steps = 100;
    std::size_t onset_range = 100;
    double dropout = 0.8;
    double noise_std = 0.05;
    std::uint64_t master_seed = 0;
};

// Fixed-constant chaotic benchmark: constants stay at their literature
// values, initial states are drawn uniformly from [1,3] x [0,2] x [0,2]
// (three unit draws per instance), and the dataset carries a 5/6 -> 1/6
// default split. Otherwise the standard pipeline.
Dataset lorenz_protocol(const systems::Registry& registry, const LorenzProtocolConfig& config,
                        std::size_t jobs = 1);

// True when any value of the row-major (step, channel) block deviates from
// its channel mean by strictly more than 10 channel standard deviations.
bool violates_explosion_rule(std::span<const double> values, int channels,
                             const ChannelStats& stats);

// Population mean and std per channel over a row-major (row, channel) block;
// the reference statistics the explosion rule measures against.
ChannelStats evaluation_channel_stats(std::span<const double> values, int channels);

}  // namespace imts::gen
