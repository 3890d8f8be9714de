#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "imtsforge/baseline_eval.hpp"
#include "imtsforge/generator.hpp"
#include "imtsforge/rng.hpp"

using namespace imts;

namespace {

// dense synthetic dataset whose channel c of instance n follows fn(n, c, t)
Dataset synthetic_dataset(std::size_t instances, int channels,
                          const std::function<double(std::size_t, int, double)>& fn,
                          double dropout = 0.0, std::uint64_t seed = 1) {
    Dataset dataset;
    DatasetMeta& meta = dataset.meta;
    meta.system_name = "synthetic";
    meta.channels = channels;
    meta.sigma_dur = 2.0;
    meta.grid_steps = 41;
    meta.window_steps = 21;
    meta.onset_range = 20;
    meta.instances = instances;
    meta.dropout = dropout;
    meta.noise_std = 0.0;
    meta.normalization.mean.assign(static_cast<std::size_t>(channels), 0.0);
    meta.normalization.stddev.assign(static_cast<std::size_t>(channels), 1.0);

    rng::Stream stream(seed);
    for (std::size_t n = 0; n < instances; ++n) {
        ImtsInstance instance;
        instance.id = static_cast<int>(n);
        instance.onset_index = 0;
        instance.ground_truth.resize(meta.window_steps * static_cast<std::size_t>(channels));
        for (std::size_t m = 0; m < meta.window_steps; ++m) {
            const double t = meta.window_time(m, 0);
            for (int c = 0; c < channels; ++c) {
                const double v = fn(n, c, t);
                instance.ground_truth[m * static_cast<std::size_t>(channels) +
                                      static_cast<std::size_t>(c)] = v;
                if (stream.next_unit() >= dropout) {
                    instance.observations.push_back({t, c, v});
                }
            }
        }
        dataset.instances.push_back(std::move(instance));
    }

    // per-channel normalization over all ground-truth values
    for (int c = 0; c < channels; ++c) {
        std::vector<double> values;
        for (const auto& instance : dataset.instances) {
            for (std::size_t m = 0; m < meta.window_steps; ++m) {
                values.push_back(instance.ground_truth[m * static_cast<std::size_t>(channels) +
                                                       static_cast<std::size_t>(c)]);
            }
        }
        double mean = 0.0;
        for (const double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (const double v : values) var += (v - mean) * (v - mean);
        meta.normalization.mean[static_cast<std::size_t>(c)] = mean;
        meta.normalization.stddev[static_cast<std::size_t>(c)] =
            std::max(1e-9, std::sqrt(var / static_cast<double>(values.size())));
    }
    return dataset;
}

}  // namespace

TEST_CASE("half split on a dense instance: half history, half queries") {
    const auto dataset = synthetic_dataset(12, 2, [](std::size_t n, int c, double t) {
        return std::sin(t + static_cast<double>(n)) + c;
    });
    const auto made = eval::make_tasks(dataset, 0.5);
    REQUIRE(made.tasks.size() == 12);
    CHECK(made.skipped_empty_horizon == 0);
    for (const auto& task : made.tasks) {
        // 21 steps, split after step 10: 11 history steps, 10 query steps
        CHECK(task.history.size() == 11 * 2);
        CHECK(task.queries.size() == 10 * 2);
        CHECK(task.answers.size() == task.queries.size());
        for (const auto& q : task.queries) CHECK(q.t > task.t_split);
        for (const auto& o : task.history) CHECK(o.t <= task.t_split);
    }
}

TEST_CASE("five-sixths split leaves queries only in the final sixth") {
    const auto dataset = synthetic_dataset(4, 1, [](std::size_t n, int, double t) {
        return t + static_cast<double>(n);
    });
    const auto made = eval::make_tasks(dataset, 5.0 / 6.0);
    for (const auto& task : made.tasks) {
        CHECK(task.queries.size() == 4);  // steps 17..20 of 21
    }
}

TEST_CASE("instances with no retained future observations are skipped") {
    auto dataset = synthetic_dataset(3, 1, [](std::size_t, int, double t) { return t; });
    auto& observations = dataset.instances[1].observations;
    // the window spans [0, 1], so the 0.5 split leaves nothing to query
    observations.erase(std::remove_if(observations.begin(), observations.end(),
                                      [&](const Observation& o) { return o.t > 0.5; }),
                       observations.end());
    const auto made = eval::make_tasks(dataset, 0.5);
    CHECK(made.tasks.size() == 2);
    CHECK(made.skipped_empty_horizon == 1);
}

TEST_CASE("split fractions outside (0,1) are rejected") {
    const auto dataset = synthetic_dataset(3, 1, [](std::size_t, int, double t) { return t; });
    CHECK_THROWS_AS((void)eval::make_tasks(dataset, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)eval::make_tasks(dataset, 1.0), std::invalid_argument);
}

TEST_CASE("constant baselines: worked examples and fallbacks") {
    eval::ForecastTask task;
    task.t_split = 2.5;
    task.history = {{1.0, 0, 1.0}, {2.0, 0, 3.0}, {1.0, 1, 4.0}, {2.0, 1, 7.0}};
    task.queries = {{3.0, 0}, {4.0, 0}, {3.0, 1}, {3.0, 2}};
    task.answers = {0.0, 0.0, 0.0, 0.0};

    const auto mean_pred = eval::predict_constant(task, eval::BaselineMode::history_mean);
    CHECK(mean_pred[0] == 2.0);
    CHECK(mean_pred[1] == 2.0);
    CHECK(mean_pred[2] == 5.5);
    CHECK(mean_pred[3] == 0.0);  // no history, no train means: zero

    const auto last_pred = eval::predict_constant(task, eval::BaselineMode::last_observation);
    CHECK(last_pred[0] == 3.0);
    CHECK(last_pred[1] == 3.0);
    CHECK(last_pred[2] == 7.0);

    const std::vector<double> train_means{10.0, 20.0, 30.0};
    const auto train_pred =
        eval::predict_constant(task, eval::BaselineMode::global_train_mean, train_means);
    CHECK(train_pred[0] == 10.0);
    CHECK(train_pred[2] == 20.0);
    CHECK(train_pred[3] == 30.0);
    const auto fallback =
        eval::predict_constant(task, eval::BaselineMode::history_mean, train_means);
    CHECK(fallback[3] == 30.0);  // empty channel falls back to the train mean
}

TEST_CASE("predictions are constant per channel and blind to query times") {
    const auto dataset = synthetic_dataset(20, 3, [](std::size_t n, int c, double t) {
        return std::sin(3.0 * t + static_cast<double>(n) + c) + 0.2 * static_cast<double>(c);
    }, 0.6, 77);
    const auto made = eval::make_tasks(dataset, 0.5);
    rng::Stream stream(5);
    for (const auto& task : made.tasks) {
        for (const auto mode : {eval::BaselineMode::history_mean,
                                eval::BaselineMode::last_observation,
                                eval::BaselineMode::global_train_mean}) {
            const auto pred = eval::predict_constant(task, mode);
            std::map<int, double> per_channel;
            for (std::size_t k = 0; k < task.queries.size(); ++k) {
                const auto [it, inserted] =
                    per_channel.emplace(task.queries[k].channel, pred[k]);
                if (!inserted) CHECK(it->second == pred[k]);
            }

            // shuffling query timestamps within a channel must not move MSE
            auto shuffled = task;
            for (std::size_t k = shuffled.queries.size(); k > 1; --k) {
                const auto j = static_cast<std::size_t>(stream.next_u64() % k);
                if (shuffled.queries[k - 1].channel == shuffled.queries[j].channel) {
                    std::swap(shuffled.queries[k - 1].t, shuffled.queries[j].t);
                }
            }
            const auto shuffled_pred = eval::predict_constant(shuffled, mode);
            const double base_mse = eval::mse(task.answers, pred);
            const double moved_mse = eval::mse(shuffled.answers, shuffled_pred);
            CHECK(moved_mse == doctest::Approx(base_mse).epsilon(1e-12));
        }
    }
}

TEST_CASE("mse basics") {
    const std::vector<double> y{0.0, 0.0}, y1{1.0, 1.0};
    CHECK(eval::mse(y, y) == 0.0);
    CHECK(eval::mse(y, y1) == 1.0);
    const std::vector<double> short_vec{1.0};
    CHECK_THROWS_AS((void)eval::mse(y, short_vec), std::invalid_argument);

    // permutation invariance of pooled pairs
    rng::Stream stream(6);
    std::vector<double> a(31), b(31);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = stream.next_symmetric();
        b[i] = stream.next_symmetric();
    }
    std::vector<std::size_t> order(a.size());
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    std::vector<double> ap, bp;
    for (const auto i : order) {
        ap.push_back(a[i]);
        bp.push_back(b[i]);
    }
    CHECK(eval::mse(ap, bp) == doctest::Approx(eval::mse(a, b)).epsilon(1e-12));
}

TEST_CASE("splits partition exactly at 70:20:10 and rotate per fold") {
    const auto plans = eval::split_plan(100, 5, 42);
    REQUIRE(plans.size() == 5);
    std::set<int> previous_tests;
    for (const auto& plan : plans) {
        CHECK(plan.train.size() == 70);
        CHECK(plan.val.size() == 20);
        CHECK(plan.test.size() == 10);
        std::set<int> all;
        for (const auto* part : {&plan.train, &plan.val, &plan.test}) {
            for (const int id : *part) all.insert(id);
        }
        CHECK(all.size() == 100);  // exact, disjoint partition
        for (const int id : plan.test) CHECK_FALSE(previous_tests.contains(id));
        for (const int id : plan.test) previous_tests.insert(id);
    }
    // determinism
    const auto again = eval::split_plan(100, 5, 42);
    for (int f = 0; f < 5; ++f) {
        CHECK(plans[static_cast<std::size_t>(f)].test ==
              again[static_cast<std::size_t>(f)].test);
    }
    CHECK(eval::split_plan(100, 5, 43)[0].test != plans[0].test);
}

TEST_CASE("identical instances give zero variance across folds") {
    const auto dataset =
        synthetic_dataset(40, 1, [](std::size_t, int, double t) { return std::sin(5.0 * t); },
                          0.0, 11);
    // every instance identical by construction: dense and no n dependence
    const std::vector<eval::BaselineMode> modes{eval::BaselineMode::history_mean};
    const auto report = eval::evaluate(dataset, modes, 5, 0.5, 9);
    CHECK(report.baselines[0].std_mse <= 1e-12 * std::max(1.0, report.baselines[0].mean_mse));
}

TEST_CASE("reordering stored instances does not change the report") {
    auto dataset = synthetic_dataset(30, 2, [](std::size_t n, int c, double t) {
        return std::cos(2.0 * t + static_cast<double>(n)) * (1.0 + c);
    }, 0.5, 23);
    const std::vector<eval::BaselineMode> modes{eval::BaselineMode::history_mean,
                                                eval::BaselineMode::last_observation};
    const auto before = eval::evaluate(dataset, modes, 5, 0.5, 7);
    std::reverse(dataset.instances.begin(), dataset.instances.end());
    const auto after = eval::evaluate(dataset, modes, 5, 0.5, 7);
    for (std::size_t b = 0; b < modes.size(); ++b) {
        CHECK(before.baselines[b].fold_mse == after.baselines[b].fold_mse);
    }
}

TEST_CASE("an easy dataset beats a hard one for every constant baseline") {
    // near-constant levels per instance vs fast oscillation
    const auto easy = synthetic_dataset(40, 1, [](std::size_t n, int, double t) {
        return static_cast<double>(n) + 0.01 * t;
    }, 0.4, 31);
    const auto hard = synthetic_dataset(40, 1, [](std::size_t n, int, double t) {
        return std::sin(12.0 * t + static_cast<double>(n));
    }, 0.4, 31);
    const std::vector<eval::BaselineMode> modes{eval::BaselineMode::history_mean,
                                                eval::BaselineMode::last_observation,
                                                eval::BaselineMode::global_train_mean};
    const auto easy_report = eval::evaluate(easy, modes, 5, 0.5, 3);
    const auto hard_report = eval::evaluate(hard, modes, 5, 0.5, 3);
    CHECK(easy_report.best_mean_mse() < hard_report.best_mean_mse());
}

TEST_CASE("rank correlation: monotone, reversed, tied, degenerate") {
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> up{10.0, 20.0, 30.0, 40.0, 50.0};
    const std::vector<double> down{5.0, 4.0, 3.0, 2.0, 1.0};
    CHECK(eval::spearman(a, up) == doctest::Approx(1.0));
    CHECK(eval::spearman(a, down) == doctest::Approx(-1.0));

    const std::vector<double> tied_a{1.0, 1.0, 2.0, 3.0};
    const std::vector<double> tied_b{4.0, 4.0, 5.0, 6.0};
    CHECK(eval::spearman(tied_a, tied_b) == doctest::Approx(1.0));

    const std::vector<double> flat{2.0, 2.0, 2.0, 2.0};
    const std::vector<double> ramp{1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS((void)eval::spearman(flat, ramp), std::domain_error);
    const std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS((void)eval::spearman(two, two), std::invalid_argument);
}
