#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "oploc/model.hpp"

namespace oploc {

struct SqtConfig {
    double dt = 1e-3;             ///< readout interval, us
    std::size_t n_traj = 1000;
    std::uint64_t seed = 1;
    double theta0 = 0.0;
    double t0 = 0.0;              ///< start time (schedule phase)
    int kick_substeps = 10;       ///< dt is divided by this inside kick windows
    double kick_half_width = 3.0; ///< window half width in units of tau_m
    std::size_t record_stride = 1;///< keep every n-th point of the dt grid

    /// Throws std::invalid_argument on invalid fields.
    void validate() const;
};

/// True when dt is coarser than a tenth of the smallest tau_z (after
/// sub-stepping inside kicks), i.e. the weak-measurement regime is marginal.
bool sqt_dt_too_coarse(const SqtConfig& cfg, const MeasurementSchedule& sched);

/// Independent Gaussian readouts: r_x ~ N(sin theta, tau_x / dt),
/// r_z ~ N(cos theta, tau_z / dt).
Readouts sample_readout(double theta, double dt, double tau_x, double tau_z, std::mt19937_64& rng);

/// Exact Bayesian update of the pure xz-plane state for one readout pair,
/// returned on the branch nearest to theta.
double bayes_step(double theta, Readouts r, double dt, const MeasurementSchedule& sched, double t);

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 1.0;
};

/// Same update on the full density matrix (complex arithmetic, any Bloch
/// vector). Used to check that y = 0 is preserved.
BlochVector bayes_step_bloch(BlochVector s, Readouts r, double dt, const MeasurementSchedule& sched, double t);

/// Deterministic per-trajectory generator derived from (seed, index).
std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index);

/// Unwrapped theta series for every trajectory on a shared time grid.
struct TrajectoryEnsemble {
    std::vector<double> times;
    std::vector<double> theta;  ///< row-major [trajectory][time]
    std::size_t n_traj = 0;
    double theta0 = 0.0;
    double max_purity_residual = 0.0;  ///< max |x^2 + z^2 - 1| over all steps

    std::size_t n_times() const noexcept { return times.size(); }
    double at(std::size_t traj, std::size_t k) const { return theta[traj * times.size() + k]; }
    double final_theta(std::size_t traj) const { return at(traj, times.size() - 1); }
};

/// Simulates cfg.n_traj trajectories from cfg.t0 to T. The record grid holds
/// t0, every record_stride-th dt step, and T.
TrajectoryEnsemble simulate_ensemble(const SqtConfig& cfg, double T, const MeasurementSchedule& sched);

struct PostSelection {
    double T = 0.0;
    double theta_f = 0.0;  ///< mod 2 pi
    double window = 0.1;
};

/// Circular distance |a - b| folded into [0, pi].
double circular_distance(double a, double b);

/// Indices of trajectories whose final angle lies within the window.
std::vector<std::size_t> postselect(const TrajectoryEnsemble& ens, const PostSelection& sel);

struct DensityHistogram {
    std::vector<double> t_edges;
    std::vector<double> theta_edges;
    std::vector<double> values;  ///< row-major [time bin][theta bin], max bin = 1
    std::size_t survivors = 0;
    bool empty = true;

    std::size_t n_t() const noexcept { return t_edges.empty() ? 0 : t_edges.size() - 1; }
    std::size_t n_theta() const noexcept { return theta_edges.empty() ? 0 : theta_edges.size() - 1; }
    double value(std::size_t i, std::size_t j) const { return values[i * n_theta() + j]; }
};

struct HistogramBins {
    std::size_t t_bins = 400;
    std::size_t theta_bins = 400;
};

/// Density of the post-selected trajectories over the observed (t, theta)
/// range. No survivors gives an empty histogram.
DensityHistogram postselect_density(const TrajectoryEnsemble& ens, const PostSelection& sel, HistogramBins bins = {});
DensityHistogram density_of(const TrajectoryEnsemble& ens, const std::vector<std::size_t>& members,
                            HistogramBins bins = {});

struct RidgePath {
    int winding = 0;
    std::size_t population = 0;
    std::vector<double> times;
    std::vector<double> theta;
};

struct MlpExtraction {
    std::vector<RidgePath> ridges;
    std::vector<std::string> notes;  ///< omitted groups
};

/// Groups the post-selected trajectories by winding number at T and returns
/// each group's per-time-bin density maximum, smoothed by a 3-bin median.
MlpExtraction extract_mlps(const TrajectoryEnsemble& ens, const PostSelection& sel, HistogramBins bins = {},
                           std::size_t min_population = 50);

struct KickCollapseStats {
    std::size_t n_traj = 0;
    std::size_t excited = 0;       ///< nearest z-eigenstate is theta = 0 (mod 2 pi)
    std::size_t ground = 0;
    std::size_t near_eigenstate = 0;  ///< within `near` rad of either eigenstate
    double t_start = 0.0;
    double t_end = 0.0;
};

/// Runs trajectories across the first kick, from its window start to its
/// window end, and classifies them by the z-eigenstate they end closest to.
KickCollapseStats simulate_kick_collapse(double theta0, std::size_t n_traj, std::uint64_t seed,
                                         const MeasurementSchedule& sched, double dt = 1e-3, double near = 0.15);

void write_density_csv(const DensityHistogram& h, const std::string& matrix_path, const std::string& edges_path);
void write_ridges_csv(const MlpExtraction& m, const std::string& path);

} // namespace oploc
