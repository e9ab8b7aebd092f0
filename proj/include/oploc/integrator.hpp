#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oploc/model.hpp"

namespace oploc {

enum class IntegrationMethod { RK4, BulirschStoer };

struct IntegratorConfig {
    IntegrationMethod method = IntegrationMethod::BulirschStoer;
    double dt = 1e-3;        ///< fixed step (RK4) or first trial step (Bulirsch-Stoer), us
    /// Tight by default: global angle error grows about 1e5-fold over five
    /// strong kicks, and manifold fold counts read off differences near 1e-7.
    double rel_tol = 1e-12;
    double abs_tol = 1e-14;
    double p_max = 1000.0;   ///< divergence cutoff on |p|
    std::size_t max_steps = 20'000'000;
    /// Every kick window [center - w, center + w], w = kick_half_width * tau_m,
    /// is crossed in at least kick_min_steps accepted steps.
    int kick_min_steps = 20;
    double kick_half_width = 3.0;
    /// When finite, the field is evaluated at this fixed time (autonomous
    /// flow) and kick windows are ignored.
    double frozen_time = std::numeric_limits<double>::quiet_NaN();

    /// Throws std::invalid_argument on non-positive step, tolerances or cutoff.
    void validate() const;
};

std::string to_string(IntegrationMethod m);
IntegrationMethod parse_integration_method(const std::string& name);

enum class PathStatus { Completed, Diverged };

struct PhaseVelocity {
    double theta_dot = 0.0;
    double p_dot = 0.0;
};

struct PathSample {
    double t = 0.0;
    PhasePoint point;
    PhaseVelocity velocity;
};

/// Time-sampled optimal path. Samples are strictly increasing in time; a
/// diverged path stops at its last live sample.
struct OpPath {
    std::vector<PathSample> samples;
    PathStatus status = PathStatus::Completed;
    double t_diverged = std::numeric_limits<double>::quiet_NaN();
    std::size_t steps = 0;

    bool diverged() const noexcept { return status == PathStatus::Diverged; }
    /// Cubic Hermite interpolation between stored samples. Throws
    /// std::out_of_range outside the sampled interval.
    PhasePoint at(double t) const;
};

struct FlowResult {
    PhasePoint point;
    PathStatus status = PathStatus::Completed;
    double t_reached = 0.0;   ///< end time, or time of divergence
    std::size_t steps = 0;

    bool diverged() const noexcept { return status == PathStatus::Diverged; }
};

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Hamilton's equations: (dH*/dp, -dH*/dtheta).
PhaseVelocity hamilton_rhs(PhasePoint pt, double t, const MeasurementSchedule& sched);

/// Integrates forward from t0 to t_end and keeps every accepted step.
/// Divergence (|p| > p_max or a non-finite state) truncates the path and
/// marks it Diverged. Throws IntegrationError when max_steps is exceeded and
/// std::invalid_argument unless t_end > t0.
OpPath integrate(PhasePoint start, double t0, double t_end, const MeasurementSchedule& sched,
                 const IntegratorConfig& cfg);

/// Like integrate, but samples exactly at t0 and at each of the increasing
/// sample times (steps are shortened to land on them).
OpPath integrate_sampled(PhasePoint start, double t0, std::span<const double> sample_times,
                         const MeasurementSchedule& sched, const IntegratorConfig& cfg);

/// End point only. t_end may lie before t0 (backward integration).
FlowResult flow_map(PhasePoint start, double t0, double t_end, const MeasurementSchedule& sched,
                    const IntegratorConfig& cfg);

} // namespace oploc
