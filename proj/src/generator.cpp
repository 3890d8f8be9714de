#include "imtsforge/generator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "imtsforge/kernels.hpp"
#include "imtsforge/ode_solver.hpp"
#include "imtsforge/parallel.hpp"

namespace imts::gen {
namespace {

constexpr double kJgdTieEpsilon = 1e-12;
constexpr double kExplosionSigmas = 10.0;
// instance streams use tags 0, 1, 2, ...; the evaluation phase gets the one
// tag the instance sequence can never reach
constexpr std::uint64_t kEvalPhaseTag = 0xFFFFFFFFFFFFFFFFULL;

std::vector<double> gather_channel(std::span<const double> values, int channels, int channel) {
    const std::size_t stride = static_cast<std::size_t>(channels);
    const std::size_t count = values.size() / stride;
    std::vector<double> out(count);
    const double* src = values.data() + static_cast<std::size_t>(channel);
    for (std::size_t i = 0; i < count; ++i) out[i] = src[i * stride];
    return out;
}

using TripleSampler = std::function<Triple(rng::Stream&)>;

TripleSampler spread_sampler(const dsl::SystemSpec& spec, const SpreadConfig& spread) {
    return [&spec, spread](rng::Stream& stream) { return sample_triple(spec, spread, stream); };
}

struct EvalPhase {
    std::optional<RejectCause> rejection;
    ChannelStats stats;
    std::optional<grad::DifficultyReport> report;
};

// shared by score_config and the dataset builders so instance-level checks
// use exactly the statistics of the "100 samples created for evaluation"
EvalPhase run_eval_phase(const dsl::SystemSpec& spec, const TripleSampler& sampler,
                         double duration, const EvalProtocol& protocol, std::uint64_t master_seed,
                         std::size_t jobs) {
    const std::size_t samples = protocol.eval_samples;
    const std::size_t steps = protocol.eval_steps;
    const auto channels = static_cast<std::size_t>(spec.channels);

    std::vector<ode::SolveResult> results(samples);
    parallel_for(samples, jobs, [&](std::size_t n) {
        rng::Stream stream(rng::derive_stream(master_seed, n));
        const Triple triple = sampler(stream);
        results[n] = ode::solve_to_matrix(spec, triple.a, triple.x0, triple.duration, steps);
    });

    EvalPhase phase;
    for (const auto& result : results) {
        if (!result.ok()) {
            phase.rejection = RejectCause::solver_failure;
            return phase;
        }
    }

    grad::GriddedSample sample;
    sample.instances = samples;
    sample.steps = steps;
    sample.channels = spec.channels;
    sample.duration = duration;
    sample.values.resize(samples * steps * channels);
    for (std::size_t n = 0; n < samples; ++n) {
        std::copy(results[n].trajectory->values.begin(), results[n].trajectory->values.end(),
                  sample.values.begin() +
                      static_cast<std::ptrdiff_t>(n * steps * channels));
    }

    phase.stats = evaluation_channel_stats(sample.values, spec.channels);
    if (violates_explosion_rule(sample.values, spec.channels, phase.stats)) {
        phase.rejection = RejectCause::explosion;
        return phase;
    }

    // score only the forecasting-relevant tail of each trajectory
    const std::size_t window = protocol.score_window;
    const double eps = sample.step_size();
    grad::GriddedSample tail;
    tail.instances = samples;
    tail.steps = window;
    tail.channels = spec.channels;
    tail.duration = eps * static_cast<double>(window - 1);
    tail.values.resize(samples * window * channels);
    const std::size_t offset = steps - window;
    for (std::size_t n = 0; n < samples; ++n) {
        const double* src = sample.values.data() + (n * steps + offset) * channels;
        std::copy(src, src + window * channels,
                  tail.values.begin() + static_cast<std::ptrdiff_t>(n * window * channels));
    }

    try {
        phase.report = grad::jgd_estimate(tail);
    } catch (const grad::DegenerateChannelError&) {
        phase.rejection = RejectCause::degenerate_channel;
    }
    return phase;
}

struct InstanceCandidate {
    std::optional<ImtsInstance> instance;
    std::optional<RejectCause> rejection;
};

InstanceCandidate build_instance(const dsl::SystemSpec& spec, const TripleSampler& sampler,
                                 const DatasetConfig& config, const ChannelStats& eval_stats,
                                 std::uint64_t master_seed, std::size_t index) {
    const auto channels = static_cast<std::size_t>(spec.channels);
    rng::Stream stream(rng::derive_stream(master_seed, index));
    const Triple triple = sampler(stream);

    const ode::SolveResult solved =
        ode::solve_to_matrix(spec, triple.a, triple.x0, triple.duration, config.grid_steps);
    if (!solved.ok()) return {std::nullopt, RejectCause::solver_failure};

    const auto onset = std::min<std::size_t>(
        config.onset_range - 1,
        static_cast<std::size_t>(stream.next_unit() * static_cast<double>(config.onset_range)));

    ImtsInstance instance;
    instance.onset_index = static_cast<int>(onset);
    instance.sampled_x0 = triple.x0;
    instance.sampled_a = triple.a;
    instance.ground_truth.assign(
        solved.trajectory->values.begin() + static_cast<std::ptrdiff_t>(onset * channels),
        solved.trajectory->values.begin() +
            static_cast<std::ptrdiff_t>((onset + config.window_steps) * channels));

    if (violates_explosion_rule(instance.ground_truth, spec.channels, eval_stats)) {
        return {std::nullopt, RejectCause::explosion};
    }

    // dropout decisions first (one unit draw per cell), then one Gaussian per
    // retained cell, both in (step, channel) order
    const std::size_t cells = config.window_steps * channels;
    std::vector<bool> retained(cells);
    for (std::size_t i = 0; i < cells; ++i) retained[i] = stream.next_unit() >= config.dropout;
    instance.observations.reserve(cells);
    for (std::size_t m = 0; m < config.window_steps; ++m) {
        const double t = ode::grid_time(triple.duration, config.grid_steps, onset + m);
        for (std::size_t c = 0; c < channels; ++c) {
            if (!retained[m * channels + c]) continue;
            const double noise = config.noise_std * stream.next_gaussian();
            instance.observations.push_back(
                {t, static_cast<int>(c), instance.ground_truth[m * channels + c] + noise});
        }
    }
    return {std::move(instance), std::nullopt};
}

Dataset materialize_impl(const systems::RegistryEntry& entry, const TripleSampler& sampler,
                         const SpreadConfig& spread, const DatasetConfig& config,
                         const EvalProtocol& protocol, std::size_t jobs, std::string protocol_name,
                         double split_fraction) {
    if (config.window_steps + config.onset_range > config.grid_steps) {
        throw GeneratorError("window_steps + onset_range must not exceed grid_steps");
    }
    if (config.dropout < 0.0 || config.dropout >= 1.0) {
        throw GeneratorError("dropout must lie in [0, 1)");
    }
    if (config.instances == 0) throw GeneratorError("instances must be positive");

    const dsl::SystemSpec& spec = entry.spec;
    const EvalPhase phase =
        run_eval_phase(spec, sampler, spread.sigma_dur, protocol,
                       rng::derive_stream(config.master_seed, kEvalPhaseTag), jobs);
    if (phase.rejection) {
        throw SpreadRejectedError("configuration rejected in evaluation phase: " +
                                      std::string(reject_cause_name(*phase.rejection)),
                                  *phase.rejection);
    }

    Dataset dataset;
    DatasetMeta& meta = dataset.meta;
    meta.system_name = spec.name;
    meta.system_source = dsl::render_system(spec);
    meta.duration_unit = spec.duration_unit;
    meta.default_duration = entry.default_duration;
    meta.channels = spec.channels;
    meta.sigma_initial = spread.sigma_initial;
    meta.sigma_const = spread.sigma_const;
    meta.sigma_dur = spread.sigma_dur;
    meta.master_seed = config.master_seed;
    meta.rng_algorithm = rng::kAlgorithmId;
    meta.protocol = std::move(protocol_name);
    meta.split_fraction = split_fraction;
    meta.instances = config.instances;
    meta.grid_steps = config.grid_steps;
    meta.window_steps = config.window_steps;
    meta.onset_range = config.onset_range;
    meta.dropout = config.dropout;
    meta.noise_std = config.noise_std;
    meta.eval_samples = protocol.eval_samples;
    meta.eval_steps = protocol.eval_steps;
    meta.score_window = protocol.score_window;
    meta.eval_stats = phase.stats;
    meta.difficulty = phase.report;

    // Instances are a pure function of their index; rejected ones are
    // replaced by extending the index sequence, so the contents never depend
    // on scheduling or worker count.
    const std::size_t budget = config.instances / 5;  // 20% extra rejections allowed
    std::size_t next_index = 0;
    std::size_t rejected = 0;
    dataset.instances.reserve(config.instances);
    while (dataset.instances.size() < config.instances) {
        const std::size_t need = config.instances - dataset.instances.size();
        std::vector<InstanceCandidate> batch(need);
        parallel_for(need, jobs, [&](std::size_t k) {
            batch[k] = build_instance(spec, sampler, config, phase.stats, config.master_seed,
                                      next_index + k);
        });
        next_index += need;
        for (auto& candidate : batch) {
            if (candidate.instance) {
                candidate.instance->id = static_cast<int>(dataset.instances.size());
                dataset.instances.push_back(std::move(*candidate.instance));
            } else {
                ++rejected;
                if (*candidate.rejection == RejectCause::solver_failure) {
                    ++meta.rejected_solver;
                } else {
                    ++meta.rejected_explosion;
                }
                if (rejected > budget) {
                    throw RetryBudgetExhausted(
                        "more than 20% extra instances rejected (" + std::to_string(rejected) +
                        " of " + std::to_string(config.instances) + ")");
                }
            }
        }
    }
    meta.regenerated = rejected;

    // channel normalization over every ground-truth window value
    std::vector<double> all_truth;
    all_truth.reserve(config.instances * config.window_steps *
                      static_cast<std::size_t>(spec.channels));
    for (const auto& instance : dataset.instances) {
        all_truth.insert(all_truth.end(), instance.ground_truth.begin(),
                         instance.ground_truth.end());
    }
    meta.normalization = evaluation_channel_stats(all_truth, spec.channels);
    return dataset;
}

}  // namespace

std::string_view reject_cause_name(RejectCause cause) {
    switch (cause) {
        case RejectCause::solver_failure: return "solver_failure";
        case RejectCause::explosion: return "explosion";
        case RejectCause::degenerate_channel: return "degenerate_channel";
    }
    return "unknown";
}

void RejectionLog::record(const SpreadConfig& config, const ScoreOutcome& outcome) {
    Verdict verdict;
    verdict.config = config;
    verdict.cause = outcome.rejection;
    verdict.jgd = outcome.accepted() ? outcome.report->aggregated_jgd : 0.0;
    verdicts.push_back(verdict);
    if (outcome.rejection) {
        switch (*outcome.rejection) {
            case RejectCause::solver_failure: ++solver_failures; break;
            case RejectCause::explosion: ++explosions; break;
            case RejectCause::degenerate_channel: ++degenerate_channels; break;
        }
    }
}

Triple sample_triple(const dsl::SystemSpec& spec, const SpreadConfig& spread,
                     rng::Stream& stream) {
    Triple triple;
    triple.x0.reserve(spec.initial_values.size());
    for (const double lit : spec.initial_values) {
        const double u = stream.next_symmetric();
        triple.x0.push_back(lit == 0.0 ? spread.sigma_initial * u
                                       : lit * (1.0 + spread.sigma_initial * u));
    }
    triple.a.reserve(spec.constant_values.size());
    for (const double lit : spec.constant_values) {
        const double u = stream.next_symmetric();
        triple.a.push_back(lit == 0.0 ? spread.sigma_const * u
                                      : lit * (1.0 + spread.sigma_const * u));
    }
    triple.duration = spread.sigma_dur;
    return triple;
}

Triple sample_triple(const dsl::SystemSpec& spec, const SpreadConfig& spread,
                     std::uint64_t seed) {
    rng::Stream stream(seed);
    return sample_triple(spec, spread, stream);
}

ChannelStats evaluation_channel_stats(std::span<const double> values, int channels) {
    ChannelStats stats;
    stats.mean.resize(static_cast<std::size_t>(channels));
    stats.stddev.resize(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        const std::vector<double> buffer = gather_channel(values, channels, c);
        const double mean = kernels::mean(buffer);
        stats.mean[static_cast<std::size_t>(c)] = mean;
        stats.stddev[static_cast<std::size_t>(c)] =
            std::sqrt(kernels::sum_sq_dev(buffer, mean) / static_cast<double>(buffer.size()));
    }
    return stats;
}

bool violates_explosion_rule(std::span<const double> values, int channels,
                             const ChannelStats& stats) {
    for (int c = 0; c < channels; ++c) {
        const double mean = stats.mean[static_cast<std::size_t>(c)];
        const double radius = kExplosionSigmas * stats.stddev[static_cast<std::size_t>(c)];
        const std::vector<double> buffer = gather_channel(values, channels, c);
        if (kernels::count_outside(buffer, mean - radius, mean + radius) > 0) return true;
    }
    return false;
}

ScoreOutcome score_config(const systems::Registry& registry, const GeneratorConfig& config,
                          std::size_t jobs) {
    const systems::RegistryEntry& entry = registry.get(config.system);
    if (config.protocol.score_window < 2 ||
        config.protocol.score_window > config.protocol.eval_steps) {
        throw GeneratorError("score_window must lie in [2, eval_steps]");
    }
    const EvalPhase phase =
        run_eval_phase(entry.spec, spread_sampler(entry.spec, config.spread),
                       config.spread.sigma_dur, config.protocol, config.master_seed, jobs);
    ScoreOutcome outcome;
    outcome.rejection = phase.rejection;
    outcome.report = phase.report;
    outcome.eval_stats = phase.stats;
    return outcome;
}

OptimizeResult optimize_spreads(const systems::Registry& registry, std::string_view system,
                                const SpreadGrids& grids, const EvalProtocol& protocol,
                                std::uint64_t master_seed, std::size_t jobs) {
    const systems::RegistryEntry& entry = registry.get(system);
    if (grids.sigma_initial.empty() || grids.sigma_const.empty() || grids.sigma_dur.empty()) {
        throw GeneratorError("spread grids must be non-empty");
    }

    std::vector<SpreadConfig> points;
    for (const double si : grids.sigma_initial) {
        for (const double sc : grids.sigma_const) {
            for (const double sd : grids.sigma_dur) {
                points.push_back({si, sc, sd * entry.default_duration});
            }
        }
    }

    std::vector<ScoreOutcome> outcomes(points.size());
    parallel_for(points.size(), jobs, [&](std::size_t g) {
        GeneratorConfig config;
        config.system = std::string(system);
        config.spread = points[g];
        config.protocol = protocol;
        config.master_seed = rng::derive_stream(master_seed, g);
        outcomes[g] = score_config(registry, config, 1);
    });

    OptimizeResult result;
    for (std::size_t g = 0; g < points.size(); ++g) result.log.record(points[g], outcomes[g]);
    if (const auto best = select_best(outcomes)) {
        result.best = points[*best];
        result.report = outcomes[*best].report;
    }
    return result;
}

std::optional<std::size_t> select_best(std::span<const ScoreOutcome> outcomes) {
    std::optional<std::size_t> best;
    double best_jgd = 0.0;
    for (std::size_t g = 0; g < outcomes.size(); ++g) {
        if (!outcomes[g].accepted()) continue;
        const double jgd = outcomes[g].report->aggregated_jgd;
        if (!best || jgd > best_jgd + kJgdTieEpsilon) {
            best = g;
            best_jgd = jgd;
        }
    }
    return best;
}

Dataset materialize_dataset(const systems::Registry& registry, std::string_view system,
                            const SpreadConfig& spread, const DatasetConfig& config,
                            const EvalProtocol& protocol, std::size_t jobs) {
    const systems::RegistryEntry& entry = registry.get(system);
    return materialize_impl(entry, spread_sampler(entry.spec, spread), spread, config, protocol,
                            jobs, "standard", 0.5);
}

Dataset lorenz_protocol(const systems::Registry& registry, const LorenzProtocolConfig& config,
                        std::size_t jobs) {
    const systems::RegistryEntry& entry = registry.get("lorenz");
    const dsl::SystemSpec& spec = entry.spec;

    // x ~ U[1,3], y ~ U[0,2], z ~ U[0,2]; constants pinned to literature
    const double lo[3] = {1.0, 0.0, 0.0};
    const double hi[3] = {3.0, 2.0, 2.0};
    const double duration = config.duration;
    TripleSampler sampler = [&spec, &lo, &hi, duration](rng::Stream& stream) {
        Triple triple;
        for (int c = 0; c < 3; ++c) {
            triple.x0.push_back(lo[c] + (hi[c] - lo[c]) * stream.next_unit());
        }
        triple.a = spec.constant_values;
        triple.duration = duration;
        return triple;
    };

    SpreadConfig spread;
    spread.sigma_initial = 0.0;
    spread.sigma_const = 0.0;
    spread.sigma_dur = config.duration;

    DatasetConfig base;
    base.instances = config.instances;
    base.grid_steps = config.grid_steps;
    base.window_steps = config.window_steps;
    base.onset_range = config.onset_range;
    base.dropout = config.dropout;
    base.noise_std = config.noise_std;
    base.master_seed = config.master_seed;

    return materialize_impl(entry, sampler, spread, base, EvalProtocol{}, jobs, "lorenz",
                            5.0 / 6.0);
}

}  // namespace imts::gen
