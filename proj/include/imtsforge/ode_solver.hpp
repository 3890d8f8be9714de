#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imtsforge/expr_dsl.hpp"

namespace imts::ode {

struct SolverOptions {
    double rtol = 1e-6;
    double atol = 1e-8;
    std::size_t max_steps = 100000;
};

struct Trajectory {
    std::vector<double> grid;    // M strictly increasing times
    std::vector<double> values;  // M x C, row-major (step, channel), always finite
    int channels = 0;
    std::vector<double> channel_min;  // cheap explosion-check stats
    std::vector<double> channel_max;

    std::size_t steps() const { return grid.size(); }
    double at(std::size_t step, int channel) const {
        return values[step * static_cast<std::size_t>(channels) +
                      static_cast<std::size_t>(channel)];
    }
};

struct StepFailure {
    enum class Reason { step_underflow, max_steps_exceeded, rhs_domain_error, non_finite_state };
    Reason reason{};
    double time = 0.0;
    int channel = -1;  // for rhs domain errors
    std::string describe() const;
};

// Explicit outcome: integration failure is expected input for the rejection
// pipeline, not an exception.
struct SolveResult {
    std::optional<Trajectory> trajectory;
    std::optional<StepFailure> failure;
    bool ok() const { return trajectory.has_value(); }
};

// Integrates x' = f(t, x; a) from x(0) = x0 and reports dense-output values
// at the requested grid times (all >= 0, strictly increasing).
// Dormand-Prince 5(4) with PI step-size control. Deterministic: identical
// inputs produce bit-identical trajectories.
SolveResult solve(const dsl::SystemSpec& spec, std::span<const double> constants,
                  std::span<const double> x0, std::span<const double> grid,
                  const SolverOptions& options = {});

// Regular grid t_m = m * duration / (steps - 1), m = 0..steps-1.
SolveResult solve_to_matrix(const dsl::SystemSpec& spec, std::span<const double> constants,
                            std::span<const double> x0, double duration, std::size_t steps,
                            const SolverOptions& options = {});

// Shared so writers and readers reconstruct identical times.
inline double grid_time(double duration, std::size_t steps, std::size_t index) {
    return duration * static_cast<double>(index) / static_cast<double>(steps - 1);
}

}  // namespace imts::ode
