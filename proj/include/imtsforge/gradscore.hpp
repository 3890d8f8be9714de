#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Difficulty metrics for families of gridded trajectories.
//
// For a single series, the mean gradient deviation (MGD) is the population
// standard deviation of the divided differences (x[t+1] - x[t]) / eps; it
// vanishes for linear functions and converges to the time-normalized L2
// deviation of x'(t) around its mean gradient as eps -> 0. The mean
// point-wise gradient deviation (MPGD) averages, over time steps, the
// across-instance standard deviation of those divided differences. The joint
// score multiplies MPGD with the across-instance mean MGD, computed on
// channels normalized to mean 0, std 1 over all instances and steps.
namespace imts::grad {

struct GriddedSample {
    std::size_t instances = 0;  // N
    std::size_t steps = 0;      // M, shared regular grid
    int channels = 0;           // C
    double duration = 0.0;      // T, grid step eps = T / (M - 1)
    std::vector<double> values;  // (n * M + m) * C + c

    double& at(std::size_t n, std::size_t m, int c) {
        return values[(n * steps + m) * static_cast<std::size_t>(channels) +
                      static_cast<std::size_t>(c)];
    }
    double at(std::size_t n, std::size_t m, int c) const {
        return values[(n * steps + m) * static_cast<std::size_t>(channels) +
                      static_cast<std::size_t>(c)];
    }
    double step_size() const { return duration / static_cast<double>(steps - 1); }
};

struct DifficultyReport {
    std::vector<double> per_channel_mgd_mean;  // mean MGD over instances, per channel
    std::vector<double> per_channel_mpgd;
    std::vector<double> per_channel_jgd;
    double aggregated_jgd = 0.0;  // mean of the top-min(10, C) channel scores
    std::vector<double> channel_mean;  // normalization applied before scoring
    std::vector<double> channel_std;
};

class DegenerateChannelError : public std::runtime_error {
public:
    DegenerateChannelError(std::string message, int channel)
        : std::runtime_error(std::move(message)), channel_(channel) {}
    int channel() const { return channel_; }

private:
    int channel_;
};

// Population std of the divided differences of one series sampled with the
// given step; series.size() >= 2; exactly 0 deviation for 2 points.
double mgd_estimate(std::span<const double> series, double step);

// (eps / T) * sum over steps of the across-instance population std of the
// divided differences, for one channel of the sample (raw values).
double mpgd_estimate(const GriddedSample& sample, int channel);

// Full report: per-channel normalization, MGD/MPGD/JGD on normalized values,
// top-10 aggregation (ties broken by channel index). Throws
// DegenerateChannelError when a channel has no variance to normalize with, or
// never moves within any single instance.
DifficultyReport jgd_estimate(const GriddedSample& sample);

// mean of the top-min(10, k) values; ties resolved by ascending index
double aggregate_top_channels(std::span<const double> channel_scores);

struct ConvergencePoint {
    double eps;
    double abs_error;
};

// Samples the analytic series f on [0, T] at each eps (T/eps steps) and
// reports |estimate - exact| per eps, coarsest first.
std::vector<ConvergencePoint> mgd_convergence_probe(const std::function<double(double)>& f,
                                                    double duration, double exact_mgd,
                                                    std::span<const double> epsilons);

}  // namespace imts::grad
