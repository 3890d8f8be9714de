#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "imtsforge/dataset.hpp"

// Forecasting protocol and the non-learned time-constant baselines: a model
// family restricted to emit one value per channel for every query time point.
// Tasks split each instance at a fraction of its window span; queries are the
// retained observation slots after the split, answered from the noiseless
// ground truth (or, optionally, from the noisy retained values). All values
// are normalized with the dataset's stored channel statistics.
namespace imts::eval {

struct Query {
    double t = 0.0;
    int channel = 0;
};

struct ForecastTask {
    int instance_id = 0;
    double t_split = 0.0;
    std::vector<Observation> history;  // t <= t_split, normalized values
    std::vector<Query> queries;        // t > t_split
    std::vector<double> answers;       // normalized, aligned with queries
};

struct MakeTasksResult {
    std::vector<ForecastTask> tasks;
    std::size_t skipped_empty_horizon = 0;  // instances with no query after the split
};

MakeTasksResult make_tasks(const Dataset& dataset, double split_fraction,
                           bool noisy_targets = false);

enum class BaselineMode { history_mean, last_observation, global_train_mean };
std::string_view baseline_name(BaselineMode mode);
BaselineMode baseline_by_name(std::string_view name);

// One prediction per query; constant per channel by construction. Channels
// without history fall back: history_mean -> train mean -> 0;
// last_observation -> history mean -> train mean -> 0.
std::vector<double> predict_constant(const ForecastTask& task, BaselineMode mode,
                                     std::span<const double> train_channel_means = {});

double mse(std::span<const double> y, std::span<const double> y_hat);

struct SplitPlan {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

// Instance ids are shuffled once with the seed, cut into ten equal blocks,
// and the block ring is rotated by two per fold: seven blocks train, two
// validation, one test (70:20:10).
std::vector<SplitPlan> split_plan(std::size_t instance_count, int folds, std::uint64_t seed);

struct BaselineReport {
    BaselineMode mode{};
    std::vector<double> fold_mse;  // micro-averaged over pooled query points
    double mean_mse = 0.0;
    double std_mse = 0.0;  // population std across folds
};

struct EvaluationReport {
    std::vector<BaselineReport> baselines;
    std::size_t skipped_empty_horizon = 0;
    double split_fraction = 0.0;
    int folds = 0;
    double best_mean_mse() const;
};

EvaluationReport evaluate(const Dataset& dataset, std::span<const BaselineMode> baselines,
                          int folds, double split_fraction, std::uint64_t split_seed,
                          bool noisy_targets = false);

// Spearman rank correlation with average ranks for ties; at least 3 pairs,
// and both sides need a non-degenerate ranking.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace imts::eval
