#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imtsforge/gradscore.hpp"
#include "imtsforge/ode_solver.hpp"

namespace imts {

struct Observation {
    double t = 0.0;
    int channel = 0;
    double value = 0.0;
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// One irregularly sampled instance: sparse noisy observations on the window
// grid plus the hidden noiseless window retained for evaluation.
struct ImtsInstance {
    int id = 0;
    int onset_index = 0;
    std::vector<Observation> observations;  // sorted by (t, channel), unique
    std::vector<double> ground_truth;       // window_steps x C, row-major
    std::vector<double> sampled_x0;         // provenance
    std::vector<double> sampled_a;
};

struct DatasetMeta {
    int format_version = 1;
    std::string system_name;
    std::string system_source;  // canonical definition, self-contained for regeneration
    std::string duration_unit;
    double default_duration = 1.0;
    int channels = 0;

    double sigma_initial = 0.0;
    double sigma_const = 0.0;
    double sigma_dur = 1.0;  // absolute duration of the solved trajectories

    std::uint64_t master_seed = 0;
    std::string rng_algorithm;
    std::string protocol = "standard";  // or "lorenz"
    double split_fraction = 0.5;        // default observation/forecast split

    std::size_t instances = 0;
    std::size_t grid_steps = 200;
    std::size_t window_steps = 100;
    std::size_t onset_range = 100;
    double dropout = 0.8;
    double noise_std = 0.05;

    std::size_t eval_samples = 100;
    std::size_t eval_steps = 100;
    std::size_t score_window = 50;
    ChannelStats eval_stats;     // explosion-rejection reference statistics
    ChannelStats normalization;  // over all ground-truth window values
    std::optional<grad::DifficultyReport> difficulty;

    std::size_t rejected_solver = 0;
    std::size_t rejected_explosion = 0;
    std::size_t regenerated = 0;  // instances drawn beyond the target count

    double window_time(std::size_t window_step, int onset_index) const;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<ImtsInstance> instances;
};

// absolute time of a window step for an instance with the given onset
inline double DatasetMeta::window_time(std::size_t window_step, int onset_index) const {
    return ode::grid_time(sigma_dur, grid_steps,
                          static_cast<std::size_t>(onset_index) + window_step);
}

}  // namespace imts
