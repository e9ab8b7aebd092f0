#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "oploc/integrator.hpp"
#include "oploc/model.hpp"

namespace oploc {

/// Euclidean distance between two points on the x-z great circle,
/// 2|sin((a - b) / 2)|.
double bloch_distance(double theta_a, double theta_b);

/// A main path and two auxiliary paths started at theta0 +- delta with the
/// same p0, all sampled on one time grid.
struct PathTriplet {
    OpPath main;
    OpPath plus;
    OpPath minus;
    double delta_theta0 = 0.01;
};

PathTriplet make_triplet(PhasePoint start, std::span<const double> times, const MeasurementSchedule& sched,
                         const IntegratorConfig& cfg, double delta_theta0 = 0.01);

/// D(t) = (d(main, plus) + d(main, minus)) / 2. t must be a grid time
/// (including t = 0); throws std::out_of_range naming the path that is not
/// live at t.
double triplet_distance(const PathTriplet& trip, double t);

/// lambda(t) = ln(D(t) / D(0)) / t for t > 0.
double lyapunov(const PathTriplet& trip, double t);

struct LyapunovSeries {
    std::vector<double> times;
    std::vector<double> d;
    std::vector<double> lambda;
};

/// Every grid time after t = 0 at which all three paths are live.
LyapunovSeries lyapunov_series(const PathTriplet& trip);

struct PortraitRecord {
    double theta0 = 0.0;
    double p0 = 0.0;
    int n = 0;
    double theta_mod_2pi = 0.0;
    double p = 0.0;
    double lambda = 0.0;
    /// Completed for live triplets; Diverged marks the first strobe that was
    /// not reached by all three paths (values are NaN, no later records).
    PathStatus status = PathStatus::Completed;
};

struct StroboscopicPortrait {
    double period = 1.0;
    int n_strobes = 0;
    std::vector<PortraitRecord> records;
};

/// Strobes at t = n * period, n = 1..n_strobes (halfway between kicks).
StroboscopicPortrait portrait(std::span<const PhasePoint> ics, int n_strobes, const MeasurementSchedule& sched,
                              const IntegratorConfig& cfg, double delta_theta0 = 0.01);

/// Rows: theta0,p0,n,theta_mod_2pi,p,lambda_MHz,status
void write_portrait_csv(const StroboscopicPortrait& portrait, const std::string& path);

} // namespace oploc
