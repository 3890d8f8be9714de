#include "imtsforge/gradscore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imtsforge/kernels.hpp"

namespace imts::grad {
namespace {

// channels with relative spread below this cannot be normalized meaningfully
constexpr double kDegenerateStdThreshold = 1e-12;

void validate(const GriddedSample& sample) {
    if (sample.instances < 1 || sample.steps < 2 || sample.channels < 1) {
        throw std::invalid_argument("gridded sample needs N >= 1, M >= 2, C >= 1");
    }
    if (sample.values.size() !=
        sample.instances * sample.steps * static_cast<std::size_t>(sample.channels)) {
        throw std::invalid_argument("gridded sample value buffer has wrong size");
    }
}

// contiguous copy of one channel: instance-major, M values per instance
std::vector<double> gather_channel(const GriddedSample& sample, int channel) {
    std::vector<double> out(sample.instances * sample.steps);
    const std::size_t stride = static_cast<std::size_t>(sample.channels);
    const double* src = sample.values.data() + static_cast<std::size_t>(channel);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i * stride];
    return out;
}

double numstd(std::span<const double> xs) {
    const double m = kernels::mean(xs);
    return std::sqrt(kernels::sum_sq_dev(xs, m) / static_cast<double>(xs.size()));
}

// MPGD over a contiguous channel buffer (N instances x M steps)
double mpgd_on_buffer(std::span<const double> channel, std::size_t instances, std::size_t steps,
                      double duration) {
    const std::size_t diffs_per_instance = steps - 1;
    const double eps = duration / static_cast<double>(steps - 1);
    const double inv_eps = 1.0 / eps;

    // divided differences laid out time-major so each step's across-instance
    // slice is contiguous for the std kernel
    std::vector<double> diffs(instances * diffs_per_instance);
    std::vector<double> scratch(diffs_per_instance);
    for (std::size_t n = 0; n < instances; ++n) {
        kernels::divided_differences(channel.subspan(n * steps, steps), inv_eps, scratch);
        for (std::size_t tstep = 0; tstep < diffs_per_instance; ++tstep) {
            diffs[tstep * instances + n] = scratch[tstep];
        }
    }

    double std_sum = 0.0;
    for (std::size_t tstep = 0; tstep < diffs_per_instance; ++tstep) {
        std_sum += numstd({diffs.data() + tstep * instances, instances});
    }
    return (eps / duration) * std_sum;
}

double mean_mgd_on_buffer(std::span<const double> channel, std::size_t instances,
                          std::size_t steps, double eps) {
    double acc = 0.0;
    for (std::size_t n = 0; n < instances; ++n) {
        acc += mgd_estimate(channel.subspan(n * steps, steps), eps);
    }
    return acc / static_cast<double>(instances);
}

}  // namespace

double mgd_estimate(std::span<const double> series, double step) {
    if (series.size() < 2) throw std::invalid_argument("series needs at least 2 samples");
    std::vector<double> diffs(series.size() - 1);
    kernels::divided_differences(series, 1.0 / step, diffs);
    return numstd(diffs);
}

double mpgd_estimate(const GriddedSample& sample, int channel) {
    validate(sample);
    if (channel < 0 || channel >= sample.channels) {
        throw std::invalid_argument("channel index out of range");
    }
    const std::vector<double> buffer = gather_channel(sample, channel);
    return mpgd_on_buffer(buffer, sample.instances, sample.steps, sample.duration);
}

double aggregate_top_channels(std::span<const double> channel_scores) {
    const std::size_t k = std::min<std::size_t>(10, channel_scores.size());
    std::vector<std::size_t> order(channel_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (channel_scores[a] != channel_scores[b]) return channel_scores[a] > channel_scores[b];
        return a < b;
    });
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += channel_scores[order[i]];
    return acc / static_cast<double>(k);
}

DifficultyReport jgd_estimate(const GriddedSample& sample) {
    validate(sample);
    const std::size_t count = sample.instances * sample.steps;
    const double eps = sample.step_size();

    DifficultyReport report;
    const std::size_t channels = static_cast<std::size_t>(sample.channels);
    report.per_channel_mgd_mean.resize(channels);
    report.per_channel_mpgd.resize(channels);
    report.per_channel_jgd.resize(channels);
    report.channel_mean.resize(channels);
    report.channel_std.resize(channels);

    for (int c = 0; c < sample.channels; ++c) {
        std::vector<double> buffer = gather_channel(sample, c);
        const double mean = kernels::sum(buffer) / static_cast<double>(count);
        const double dev =
            std::sqrt(kernels::sum_sq_dev(buffer, mean) / static_cast<double>(count));
        if (!(dev > kDegenerateStdThreshold * std::max(1.0, std::fabs(mean)))) {
            throw DegenerateChannelError(
                "channel " + std::to_string(c) + " has no variance; normalization undefined", c);
        }
        // a channel that never moves within any instance cannot be scored
        // either, even when instances sit at different levels
        bool any_motion = false;
        for (std::size_t n = 0; n < sample.instances && !any_motion; ++n) {
            for (std::size_t m = 1; m < sample.steps; ++m) {
                if (buffer[n * sample.steps + m] != buffer[n * sample.steps]) {
                    any_motion = true;
                    break;
                }
            }
        }
        if (!any_motion) {
            throw DegenerateChannelError(
                "channel " + std::to_string(c) + " is constant within every instance", c);
        }
        report.channel_mean[static_cast<std::size_t>(c)] = mean;
        report.channel_std[static_cast<std::size_t>(c)] = dev;

        const double inv = 1.0 / dev;
        kernels::scale_shift(buffer, inv, -mean * inv);

        const double mgd_mean = mean_mgd_on_buffer(buffer, sample.instances, sample.steps, eps);
        const double mpgd = mpgd_on_buffer(buffer, sample.instances, sample.steps, sample.duration);
        report.per_channel_mgd_mean[static_cast<std::size_t>(c)] = mgd_mean;
        report.per_channel_mpgd[static_cast<std::size_t>(c)] = mpgd;
        report.per_channel_jgd[static_cast<std::size_t>(c)] = mpgd * mgd_mean;
    }
    report.aggregated_jgd = aggregate_top_channels(report.per_channel_jgd);
    return report;
}

std::vector<ConvergencePoint> mgd_convergence_probe(const std::function<double(double)>& f,
                                                    double duration, double exact_mgd,
                                                    std::span<const double> epsilons) {
    std::vector<ConvergencePoint> points;
    points.reserve(epsilons.size());
    for (const double eps : epsilons) {
        const auto steps = static_cast<std::size_t>(std::llround(duration / eps)) + 1;
        std::vector<double> series(steps);
        const double actual_eps = duration / static_cast<double>(steps - 1);
        for (std::size_t m = 0; m < steps; ++m) {
            series[m] = f(actual_eps * static_cast<double>(m));
        }
        points.push_back({actual_eps, std::fabs(mgd_estimate(series, actual_eps) - exact_mgd)});
    }
    return points;
}

}  // namespace imts::grad
