#include "imtsforge/baseline_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "imtsforge/kernels.hpp"
#include "imtsforge/rng.hpp"

namespace imts::eval {
namespace {

double normalize_value(const ChannelStats& stats, int channel, double value) {
    const auto c = static_cast<std::size_t>(channel);
    return (value - stats.mean[c]) / stats.stddev[c];
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

MakeTasksResult make_tasks(const Dataset& dataset, double split_fraction, bool noisy_targets) {
    if (!(split_fraction > 0.0) || !(split_fraction < 1.0)) {
        throw std::invalid_argument("split fraction must lie strictly between 0 and 1");
    }
    const DatasetMeta& meta = dataset.meta;
    const auto channels = static_cast<std::size_t>(meta.channels);

    MakeTasksResult result;
    result.tasks.reserve(dataset.instances.size());
    for (const ImtsInstance& instance : dataset.instances) {
        const double t_start = meta.window_time(0, instance.onset_index);
        const double t_end = meta.window_time(meta.window_steps - 1, instance.onset_index);
        const double t_split = t_start + split_fraction * (t_end - t_start);

        ForecastTask task;
        task.instance_id = instance.id;
        task.t_split = t_split;
        for (const Observation& obs : instance.observations) {
            if (obs.t <= t_split) {
                task.history.push_back(
                    {obs.t, obs.channel, normalize_value(meta.normalization, obs.channel,
                                                         obs.value)});
                continue;
            }
            task.queries.push_back({obs.t, obs.channel});
            double answer;
            if (noisy_targets) {
                answer = obs.value;
            } else {
                // recover the window step from the observation time
                const double step_span = meta.window_time(1, 0) - meta.window_time(0, 0);
                const auto m = static_cast<std::size_t>(
                    std::llround((obs.t - t_start) / step_span));
                answer = instance.ground_truth[m * channels +
                                               static_cast<std::size_t>(obs.channel)];
            }
            task.answers.push_back(normalize_value(meta.normalization, obs.channel, answer));
        }
        if (task.queries.empty()) {
            ++result.skipped_empty_horizon;
            continue;
        }
        result.tasks.push_back(std::move(task));
    }
    return result;
}

std::string_view baseline_name(BaselineMode mode) {
    switch (mode) {
        case BaselineMode::history_mean: return "history_mean";
        case BaselineMode::last_observation: return "last_observation";
        case BaselineMode::global_train_mean: return "global_train_mean";
    }
    return "unknown";
}

BaselineMode baseline_by_name(std::string_view name) {
    for (BaselineMode mode : {BaselineMode::history_mean, BaselineMode::last_observation,
                              BaselineMode::global_train_mean}) {
        if (name == baseline_name(mode)) return mode;
    }
    throw std::invalid_argument("unknown baseline '" + std::string(name) + "'");
}

std::vector<double> predict_constant(const ForecastTask& task, BaselineMode mode,
                                     std::span<const double> train_channel_means) {
    int max_channel = -1;
    for (const Query& q : task.queries) max_channel = std::max(max_channel, q.channel);
    for (const Observation& o : task.history) max_channel = std::max(max_channel, o.channel);
    const auto channels = static_cast<std::size_t>(max_channel + 1);

    std::vector<double> sums(channels, 0.0);
    std::vector<std::size_t> counts(channels, 0);
    std::vector<double> last(channels, 0.0);
    std::vector<double> last_t(channels, -std::numeric_limits<double>::infinity());
    for (const Observation& o : task.history) {
        const auto c = static_cast<std::size_t>(o.channel);
        sums[c] += o.value;
        ++counts[c];
        if (o.t >= last_t[c]) {
            last_t[c] = o.t;
            last[c] = o.value;
        }
    }

    auto train_mean = [&](std::size_t c) {
        return c < train_channel_means.size() ? train_channel_means[c] : 0.0;
    };
    auto history_mean = [&](std::size_t c) {
        return counts[c] > 0 ? sums[c] / static_cast<double>(counts[c]) : train_mean(c);
    };

    std::vector<double> constants(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        switch (mode) {
            case BaselineMode::history_mean:
                constants[c] = history_mean(c);
                break;
            case BaselineMode::last_observation:
                constants[c] = counts[c] > 0 ? last[c] : history_mean(c);
                break;
            case BaselineMode::global_train_mean:
                constants[c] = train_mean(c);
                break;
        }
    }

    std::vector<double> predictions;
    predictions.reserve(task.queries.size());
    for (const Query& q : task.queries) {
        predictions.push_back(constants[static_cast<std::size_t>(q.channel)]);
    }
    return predictions;
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) throw std::invalid_argument("mse: length mismatch");
    if (y.empty()) throw std::invalid_argument("mse: empty input");
    return kernels::sum_sq_diff(y, y_hat) / static_cast<double>(y.size());
}

std::vector<SplitPlan> split_plan(std::size_t instance_count, int folds, std::uint64_t seed) {
    if (folds < 1) throw std::invalid_argument("folds must be positive");
    if (instance_count < 10) throw std::invalid_argument("need at least 10 instances to split");

    std::vector<int> ids(instance_count);
    std::iota(ids.begin(), ids.end(), 0);
    rng::Stream stream(seed);
    // Fisher-Yates with the project stream, so splits are reproducible
    for (std::size_t i = instance_count - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(stream.next_u64() % (i + 1));
        std::swap(ids[i], ids[j]);
    }

    constexpr int kBlocks = 10;
    std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end)
    for (int b = 0; b < kBlocks; ++b) {
        blocks.emplace_back(instance_count * static_cast<std::size_t>(b) / kBlocks,
                            instance_count * static_cast<std::size_t>(b + 1) / kBlocks);
    }

    std::vector<SplitPlan> plans(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
        SplitPlan& plan = plans[static_cast<std::size_t>(f)];
        for (int b = 0; b < kBlocks; ++b) {
            const int rotated = (b + 2 * f) % kBlocks;
            const auto [begin, end] = blocks[static_cast<std::size_t>(rotated)];
            std::vector<int>* target = &plan.train;
            if (b >= 7) target = b == 9 ? &plan.test : &plan.val;
            target->insert(target->end(), ids.begin() + static_cast<std::ptrdiff_t>(begin),
                           ids.begin() + static_cast<std::ptrdiff_t>(end));
        }
        std::sort(plan.train.begin(), plan.train.end());
        std::sort(plan.val.begin(), plan.val.end());
        std::sort(plan.test.begin(), plan.test.end());
    }
    return plans;
}

double EvaluationReport::best_mean_mse() const {
    double best = std::numeric_limits<double>::infinity();
    for (const BaselineReport& report : baselines) best = std::min(best, report.mean_mse);
    return best;
}

EvaluationReport evaluate(const Dataset& dataset, std::span<const BaselineMode> baselines,
                          int folds, double split_fraction, std::uint64_t split_seed,
                          bool noisy_targets) {
    const MakeTasksResult made = make_tasks(dataset, split_fraction, noisy_targets);
    const auto channels = static_cast<std::size_t>(dataset.meta.channels);

    // tasks indexed by instance id for split lookup
    std::vector<const ForecastTask*> by_id(dataset.instances.size(), nullptr);
    for (const ForecastTask& task : made.tasks) {
        by_id[static_cast<std::size_t>(task.instance_id)] = &task;
    }

    const std::vector<SplitPlan> plans = split_plan(dataset.instances.size(), folds, split_seed);

    EvaluationReport report;
    report.skipped_empty_horizon = made.skipped_empty_horizon;
    report.split_fraction = split_fraction;
    report.folds = folds;
    for (const BaselineMode mode : baselines) {
        BaselineReport baseline;
        baseline.mode = mode;
        for (const SplitPlan& plan : plans) {
            // train-split channel means over all observed (normalized) values
            std::vector<double> sums(channels, 0.0);
            std::vector<std::size_t> counts(channels, 0);
            for (const int id : plan.train) {
                const ForecastTask* task = by_id[static_cast<std::size_t>(id)];
                if (task == nullptr) continue;
                for (const Observation& obs : task->history) {
                    sums[static_cast<std::size_t>(obs.channel)] += obs.value;
                    ++counts[static_cast<std::size_t>(obs.channel)];
                }
            }
            std::vector<double> train_means(channels, 0.0);
            for (std::size_t c = 0; c < channels; ++c) {
                if (counts[c] > 0) train_means[c] = sums[c] / static_cast<double>(counts[c]);
            }

            double sq_sum = 0.0;
            std::size_t points = 0;
            for (const int id : plan.test) {
                const ForecastTask* task = by_id[static_cast<std::size_t>(id)];
                if (task == nullptr) continue;
                const std::vector<double> predictions =
                    predict_constant(*task, mode, train_means);
                sq_sum += kernels::sum_sq_diff(task->answers, predictions);
                points += predictions.size();
            }
            baseline.fold_mse.push_back(points > 0 ? sq_sum / static_cast<double>(points) : 0.0);
        }
        baseline.mean_mse = kernels::mean(baseline.fold_mse);
        baseline.std_mse =
            std::sqrt(kernels::sum_sq_dev(baseline.fold_mse, baseline.mean_mse) /
                      static_cast<double>(baseline.fold_mse.size()));
        report.baselines.push_back(std::move(baseline));
    }
    return report;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 3) {
        throw std::invalid_argument("spearman needs at least 3 pairs of equal length");
    }
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double ma = kernels::mean(ra);
    const double mb = kernels::mean(rb);
    double cov = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) cov += (ra[i] - ma) * (rb[i] - mb);
    const double va = kernels::sum_sq_dev(ra, ma);
    const double vb = kernels::sum_sq_dev(rb, mb);
    if (va == 0.0 || vb == 0.0) {
        throw std::domain_error("spearman undefined: one ranking is constant");
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace imts::eval
