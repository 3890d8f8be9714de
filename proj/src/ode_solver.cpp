#include "imtsforge/ode_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace imts::ode {
namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// embedded error weights (b5 - b4)
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// 4th-order dense-output coefficients
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

// PI controller constants (standard DOPRI5 settings)
constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kMaxGrow = 10.0;
constexpr double kMaxShrink = 0.2;

struct Stepper {
    const dsl::SystemSpec& spec;
    std::span<const double> constants;
    std::size_t dim;
    std::vector<double> k1, k2, k3, k4, k5, k6, k7, y_stage, y_new;
    // dense-output polynomial for the last accepted step
    std::vector<double> r1, r2, r3, r4, r5;
    double step_t0 = 0.0, step_h = 0.0;

    explicit Stepper(const dsl::SystemSpec& s, std::span<const double> a)
        : spec(s), constants(a), dim(static_cast<std::size_t>(s.channels)) {
        for (auto* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &y_stage, &y_new,
                        &r1, &r2, &r3, &r4, &r5}) {
            v->assign(dim, 0.0);
        }
    }

    bool rhs(double t, const std::vector<double>& y, std::vector<double>& dydt,
             StepFailure& failure) {
        const dsl::EvalStatus status = dsl::eval_rhs(spec, t, y, constants, dydt);
        if (!status.ok) {
            failure = {StepFailure::Reason::rhs_domain_error, t, status.channel};
            return false;
        }
        return true;
    }

    // One attempted step from (t, y) with size h. On success fills y_new, k7
    // and the error estimate; k1 must hold f(t, y).
    bool stages(double t, const std::vector<double>& y, double h, StepFailure& failure) {
        for (std::size_t i = 0; i < dim; ++i) y_stage[i] = y[i] + h * (a21 * k1[i]);
        if (!rhs(t + c2 * h, y_stage, k2, failure)) return false;
        for (std::size_t i = 0; i < dim; ++i)
            y_stage[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        if (!rhs(t + c3 * h, y_stage, k3, failure)) return false;
        for (std::size_t i = 0; i < dim; ++i)
            y_stage[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        if (!rhs(t + c4 * h, y_stage, k4, failure)) return false;
        for (std::size_t i = 0; i < dim; ++i)
            y_stage[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        if (!rhs(t + c5 * h, y_stage, k5, failure)) return false;
        for (std::size_t i = 0; i < dim; ++i)
            y_stage[i] =
                y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        if (!rhs(t + h, y_stage, k6, failure)) return false;
        for (std::size_t i = 0; i < dim; ++i)
            y_new[i] =
                y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        for (std::size_t i = 0; i < dim; ++i) {
            if (!std::isfinite(y_new[i])) {
                failure = {StepFailure::Reason::non_finite_state, t, static_cast<int>(i)};
                return false;
            }
        }
        if (!rhs(t + h, y_new, k7, failure)) return false;  // FSAL stage
        return true;
    }

    double error_norm(const std::vector<double>& y, double h, const SolverOptions& opts) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double err =
                h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double scale =
                opts.atol + opts.rtol * std::max(std::fabs(y[i]), std::fabs(y_new[i]));
            const double ratio = err / scale;
            acc += ratio * ratio;
        }
        return std::sqrt(acc / static_cast<double>(dim));
    }

    void build_dense(const std::vector<double>& y, double t, double h) {
        step_t0 = t;
        step_h = h;
        for (std::size_t i = 0; i < dim; ++i) {
            const double dy = y_new[i] - y[i];
            const double bspl = h * k1[i] - dy;
            r1[i] = y[i];
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - h * k7[i] - bspl;
            r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                         d7 * k7[i]);
        }
    }

    double interpolate(double t, std::size_t i) const {
        const double theta = (t - step_t0) / step_h;
        const double theta1 = 1.0 - theta;
        return r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
    }
};

double initial_step(Stepper& st, const std::vector<double>& y0, double t_end,
                    const SolverOptions& opts) {
    // Hairer's starting-step heuristic
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < st.dim; ++i) {
        const double scale = opts.atol + opts.rtol * std::fabs(y0[i]);
        dnf += (st.k1[i] / scale) * (st.k1[i] / scale);
        dny += (y0[i] / scale) * (y0[i] / scale);
    }
    double h0 = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    h0 = std::min(h0, t_end);
    for (std::size_t i = 0; i < st.dim; ++i) st.y_stage[i] = y0[i] + h0 * st.k1[i];
    StepFailure scratch;
    if (!st.rhs(h0, st.y_stage, st.k2, scratch)) return h0;
    double der2 = 0.0;
    for (std::size_t i = 0; i < st.dim; ++i) {
        const double scale = opts.atol + opts.rtol * std::fabs(y0[i]);
        const double diff = (st.k2[i] - st.k1[i]) / scale;
        der2 += diff * diff;
    }
    der2 = std::sqrt(der2) / h0;
    const double der12 = std::max(der2, std::sqrt(dnf));
    const double h1 =
        der12 <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / der12, 0.2);
    return std::min({100.0 * h0, h1, t_end});
}

}  // namespace

std::string StepFailure::describe() const {
    std::string what;
    switch (reason) {
        case Reason::step_underflow: what = "step size underflow"; break;
        case Reason::max_steps_exceeded: what = "maximum step count exceeded"; break;
        case Reason::rhs_domain_error: what = "derivative domain error"; break;
        case Reason::non_finite_state: what = "non-finite state"; break;
    }
    what += " at t=" + std::to_string(time);
    if (channel >= 0) what += " (channel " + std::to_string(channel) + ")";
    return what;
}

SolveResult solve(const dsl::SystemSpec& spec, std::span<const double> constants,
                  std::span<const double> x0, std::span<const double> grid,
                  const SolverOptions& options) {
    if (grid.empty()) throw std::invalid_argument("grid must contain at least one time");
    if (grid.front() < 0.0) throw std::invalid_argument("grid times must be >= 0");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw std::invalid_argument("grid times must be strictly increasing");
        }
    }
    if (!(options.rtol > 0.0) || !(options.atol > 0.0)) {
        throw std::invalid_argument("tolerances must be positive");
    }
    if (x0.size() != static_cast<std::size_t>(spec.channels)) {
        throw std::invalid_argument("initial state size does not match channel count");
    }
    if (constants.size() != spec.constant_values.size()) {
        throw std::invalid_argument("constant vector size does not match declaration");
    }

    const std::size_t dim = x0.size();
    Trajectory out;
    out.grid.assign(grid.begin(), grid.end());
    out.values.assign(grid.size() * dim, 0.0);
    out.channels = spec.channels;
    out.channel_min.assign(dim, std::numeric_limits<double>::infinity());
    out.channel_max.assign(dim, -std::numeric_limits<double>::infinity());

    auto emit = [&](std::size_t grid_index, const double* state) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double v = state[i];
            out.values[grid_index * dim + i] = v;
            out.channel_min[i] = std::min(out.channel_min[i], v);
            out.channel_max[i] = std::max(out.channel_max[i], v);
        }
    };

    SolveResult result;
    StepFailure failure;
    Stepper st(spec, constants);
    std::vector<double> y(x0.begin(), x0.end());
    double t = 0.0;
    const double t_end = grid.back();
    std::size_t next_grid = 0;

    if (!st.rhs(t, y, st.k1, failure)) {
        result.failure = failure;
        return result;
    }
    while (next_grid < grid.size() && grid[next_grid] <= t) {
        emit(next_grid, y.data());
        ++next_grid;
    }
    if (next_grid == grid.size()) {
        result.trajectory = std::move(out);
        return result;
    }

    double h = initial_step(st, y, t_end, options);
    double facold = 1e-4;
    bool last_rejected = false;
    std::size_t attempts = 0;
    std::vector<double> point(dim);

    while (t < t_end) {
        if (++attempts > options.max_steps) {
            result.failure = {StepFailure::Reason::max_steps_exceeded, t, -1};
            return result;
        }
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(t), 1.0)) {
            result.failure = {StepFailure::Reason::step_underflow, t, -1};
            return result;
        }
        if (t + h > t_end) h = t_end - t;

        if (!st.stages(t, y, h, failure)) {
            result.failure = failure;
            return result;
        }
        const double err = st.error_norm(y, h, options);
        const double fac11 = std::pow(err, kExpo);
        if (err <= 1.0) {
            st.build_dense(y, t, h);
            const double t_next = t + h;
            while (next_grid < grid.size() && grid[next_grid] <= t_next) {
                const double tg = grid[next_grid];
                if (tg == t_next) {
                    emit(next_grid, st.y_new.data());
                } else {
                    for (std::size_t i = 0; i < dim; ++i) point[i] = st.interpolate(tg, i);
                    emit(next_grid, point.data());
                }
                ++next_grid;
            }
            facold = std::max(err, 1e-4);
            y = st.y_new;
            st.k1 = st.k7;  // FSAL
            t = t_next;

            double fac = fac11 / std::pow(facold, kBeta);
            fac = std::max(1.0 / kMaxGrow, std::min(1.0 / kMaxShrink, fac / kSafety));
            double h_new = h / fac;
            if (last_rejected) h_new = std::min(h_new, h);
            h = h_new;
            last_rejected = false;
        } else {
            h /= std::min(1.0 / kMaxShrink, fac11 / kSafety);
            last_rejected = true;
        }
    }

    result.trajectory = std::move(out);
    return result;
}

SolveResult solve_to_matrix(const dsl::SystemSpec& spec, std::span<const double> constants,
                            std::span<const double> x0, double duration, std::size_t steps,
                            const SolverOptions& options) {
    if (steps < 2) throw std::invalid_argument("regular grid needs at least 2 steps");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
    std::vector<double> grid(steps);
    for (std::size_t m = 0; m < steps; ++m) grid[m] = grid_time(duration, steps, m);
    return solve(spec, constants, x0, grid, options);
}

}  // namespace imts::ode
