#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "oploc/integrator.hpp"
#include "oploc/model.hpp"

namespace oploc {

struct MomentumRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Gap-driven refinement policy for Lagrange manifolds.
struct RefineConfig {
    std::size_t seed_points = 201;
    double max_gap_theta = 0.02;   ///< rad, between neighbours at any record time
    double max_gap_p = 0.05;
    double min_dp0 = 1e-12;        ///< pairs closer than this in p0 are never split
    std::size_t max_points = 2'000'000;
    std::size_t max_iterations = 200;

    void validate() const;
};

/// One initial momentum and its images at the manifold's record times. A point
/// that diverged keeps only the states recorded before divergence.
struct ManifoldPoint {
    double p0 = 0.0;
    std::vector<PhasePoint> states;
    PathStatus status = PathStatus::Completed;
    double t_diverged = std::numeric_limits<double>::quiet_NaN();

    bool live_at(std::size_t k) const noexcept { return k < states.size(); }
};

/// Lagrange manifold: all p0 in a range launched from one theta0, sampled at
/// increasing record times and kept sorted strictly ascending in p0.
struct Manifold {
    double theta0 = 0.0;
    std::vector<double> times;
    std::vector<ManifoldPoint> points;
    std::size_t iterations = 0;
    std::size_t integrations = 0;
    bool truncated = false;

    double final_time() const { return times.back(); }
    std::size_t final_index() const { return times.size() - 1; }
    /// Index of a record time; throws std::out_of_range if absent.
    std::size_t time_index(double t) const;
};

/// Integrates a seed grid over the range and bisects every neighbouring pair
/// whose images differ by more than the gap bounds at any record time, until
/// all gaps pass or the budget runs out (then `truncated` is set). Diverged
/// points split the manifold into segments; pairs straddling a divergence are
/// bisected down to min_dp0.
Manifold propagate(double theta0, MomentumRange range, std::span<const double> times,
                   const MeasurementSchedule& sched, const IntegratorConfig& cfg, const RefineConfig& refine);
Manifold propagate(double theta0, MomentumRange range, double T, const MeasurementSchedule& sched,
                   const IntegratorConfig& cfg, const RefineConfig& refine);

/// Integrates the p0 samples of `like` from a different initial angle (no
/// refinement), e.g. for auxiliary manifolds at theta0 +- delta.
Manifold resample(const Manifold& like, double theta0, const MeasurementSchedule& sched,
                  const IntegratorConfig& cfg);

/// Point reflection through the phase-space origin: p0, theta0 and every
/// state change sign. For theta0 = 0 the dynamics are odd, so the mirror of
/// the manifold over [0, P] is the manifold over [-P, 0].
Manifold mirrored(const Manifold& m);

/// Joins two manifolds over adjacent p0 ranges (same theta0 and record
/// times). A shared boundary point is kept once.
Manifold concat(const Manifold& lower, const Manifold& upper);

/// Maximal runs [first, last] of consecutive points live at record index k.
struct Segment {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t size() const noexcept { return last - first + 1; }
};
std::vector<Segment> live_segments(const Manifold& m, std::size_t k);

struct JacobianEntry {
    double p0 = 0.0;
    double j_plus = 0.0;     ///< forward secant d(theta_T)/d(p0)
    double j_minus = 0.0;    ///< backward secant
    double curvature = 0.0;  ///< secant of J across the point
};

/// One-sided secant Jacobians at interior points of every live segment with
/// at least three points; shorter segments are omitted.
struct JacobianField {
    std::vector<std::vector<JacobianEntry>> segments;
};

JacobianField jacobians(const Manifold& m, std::size_t k);
inline JacobianField jacobians(const Manifold& m) { return jacobians(m, m.final_index()); }

/// Sign changes of the secant Jacobian along live segments at record index k.
/// Consecutive angle steps are summed until they exceed theta_noise, so that
/// neighbours closer than the integration error cannot fake a fold.
std::size_t catastrophe_count(const Manifold& m, std::size_t k, double theta_noise = 1e-7);
inline std::size_t catastrophe_count(const Manifold& m) { return catastrophe_count(m, m.final_index()); }

/// Winding convention: floor((theta_T - theta0) / 2 pi) on unwrapped angles.
int winding_number(double theta_T, double theta0);

/// Manifold deformation summary at each record time.
struct StretchReport {
    std::vector<double> times;
    std::vector<double> length;
    std::vector<double> j_av;
    std::vector<std::size_t> n_c;
    std::vector<double> s1;
    std::vector<double> s2;
    std::vector<double> s3;
    std::vector<double> lambda_av;
    std::vector<double> d_av;
    double length0 = 0.0;
    double d_av0 = 0.0;
    std::size_t integrations = 0;
    bool truncated = false;
};

StretchReport stretch_report(double theta0, MomentumRange range, std::span<const double> times,
                             const MeasurementSchedule& sched, const IntegratorConfig& cfg,
                             const RefineConfig& refine, double delta_theta0 = 0.01);

/// stretch_report for theta0 = 0 over [-P, P], propagating only [0, P] and
/// mirroring. The auxiliary manifolds swap under the reflection.
StretchReport stretch_report_symmetric(double P, std::span<const double> times, const MeasurementSchedule& sched,
                                       const IntegratorConfig& cfg, const RefineConfig& refine,
                                       double delta_theta0 = 0.01);

/// Stretch parameters from an already propagated central manifold and its two
/// auxiliary manifolds (same p0 samples, initial angles theta0 +- delta).
StretchReport stretch_from_manifolds(const Manifold& main, const Manifold& plus, const Manifold& minus);

struct MultipathSolution {
    double p0 = 0.0;
    double theta_T = 0.0;   ///< unwrapped
    double p_T = 0.0;
    int winding = 0;
    bool converged = false;
    double residual = 0.0;  ///< |theta_T - branch target|
};

/// All p0 whose final angle equals target (mod 2 pi), across every winding
/// branch present in the manifold. Brackets come from sign changes between
/// neighbouring live points and are bisected to |residual| < tol_theta.
std::vector<MultipathSolution> find_multipaths(const Manifold& m, double target_mod_2pi,
                                               const MeasurementSchedule& sched, const IntegratorConfig& cfg,
                                               double tol_theta, double min_dp0 = 1e-14);

/// Same, but for a single unwrapped final angle (one winding branch).
std::vector<MultipathSolution> find_multipaths_unwrapped(const Manifold& m, double target_unwrapped,
                                                         const MeasurementSchedule& sched,
                                                         const IntegratorConfig& cfg, double tol_theta,
                                                         double min_dp0 = 1e-14);

/// Convenience: propagate a refined manifold to T, then search it.
std::vector<MultipathSolution> find_multipaths(double theta0, double target_mod_2pi, double T,
                                               MomentumRange range, const MeasurementSchedule& sched,
                                               const IntegratorConfig& cfg, const RefineConfig& refine,
                                               double tol_theta);

} // namespace oploc
