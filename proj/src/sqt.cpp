#include "oploc/sqt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

#include "oploc/parallel.hpp"

namespace oploc {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

struct Spinor {
    double c;
    double s;
};

/// Applies the x then z measurement operators and renormalizes.
Spinor apply_measurement(Spinor psi, Readouts r, double dt, double tau_x, double tau_z)
{
    const double ax = r.r_x * dt / (2.0 * tau_x);
    const double az = r.r_z * dt / (2.0 * tau_z);
    const double chx = std::cosh(ax);
    const double shx = std::sinh(ax);
    Spinor out{chx * psi.c + shx * psi.s, shx * psi.c + chx * psi.s};
    out.c *= std::exp(az);
    out.s *= std::exp(-az);
    const double norm = std::hypot(out.c, out.s);
    return {out.c / norm, out.s / norm};
}

double nearest_branch(double value, double reference)
{
    return value + two_pi * std::round((reference - value) / two_pi);
}

double step_theta(double theta, Readouts r, double dt, double tau_x, double tau_z, double* purity_residual)
{
    const Spinor psi = apply_measurement({std::cos(0.5 * theta), std::sin(0.5 * theta)}, r, dt, tau_x, tau_z);
    if (purity_residual) {
        const double x = 2.0 * psi.c * psi.s;
        const double z = psi.c * psi.c - psi.s * psi.s;
        *purity_residual = std::max(*purity_residual, std::abs(x * x + z * z - 1.0));
    }
    return nearest_branch(2.0 * std::atan2(psi.s, psi.c), theta);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool in_kick_window(double a, double b, const MeasurementSchedule& sched, double half_width)
{
    if (sched.epsilon() == 0.0) return false;
    const double w = half_width * sched.tau_m();
    const long n = static_cast<long>(std::floor(0.5 * (a + b) / sched.period()));
    for (long m = n - 1; m <= n + 1; ++m) {
        const double c = sched.kick_center(m);
        if (b > c - w && a < c + w) return true;
    }
    return false;
}

/// Advances one trajectory over [t, t + h], sub-stepping inside kicks.
double advance(double theta, double t, double h, const SqtConfig& cfg, const MeasurementSchedule& sched,
               std::mt19937_64& rng, double& purity)
{
    const int sub = in_kick_window(t, t + h, sched, cfg.kick_half_width) ? cfg.kick_substeps : 1;
    const double hs = h / sub;
    for (int i = 0; i < sub; ++i) {
        const double tm = t + (i + 0.5) * hs;
        const double tau_z = sched.tau_z(tm);
        const Readouts r = sample_readout(theta, hs, sched.tau_x(), tau_z, rng);
        theta = step_theta(theta, r, hs, sched.tau_x(), tau_z, &purity);
    }
    return theta;
}

} // namespace

void SqtConfig::validate() const
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("sqt: dt must be > 0");
    if (n_traj < 1) throw std::invalid_argument("sqt: n_traj must be >= 1");
    if (kick_substeps < 1) throw std::invalid_argument("sqt: kick_substeps must be >= 1");
    if (!(kick_half_width > 0.0)) throw std::invalid_argument("sqt: kick_half_width must be > 0");
    if (record_stride < 1) throw std::invalid_argument("sqt: record_stride must be >= 1");
    if (!std::isfinite(theta0) || !std::isfinite(t0)) throw std::invalid_argument("sqt: theta0 and t0 must be finite");
}

bool sqt_dt_too_coarse(const SqtConfig& cfg, const MeasurementSchedule& sched)
{
    const double min_tau_z = sched.tau_x() * (1.0 - sched.epsilon());
    const double dt_kick = sched.epsilon() > 0.0 ? cfg.dt / cfg.kick_substeps : cfg.dt;
    return dt_kick > min_tau_z / 10.0 || cfg.dt > sched.tau_x() / 10.0;
}

Readouts sample_readout(double theta, double dt, double tau_x, double tau_z, std::mt19937_64& rng)
{
    std::normal_distribution<double> unit(0.0, 1.0);
    const double nx = unit(rng);
    const double nz = unit(rng);
    return {std::sin(theta) + std::sqrt(tau_x / dt) * nx, std::cos(theta) + std::sqrt(tau_z / dt) * nz};
}

double bayes_step(double theta, Readouts r, double dt, const MeasurementSchedule& sched, double t)
{
    return step_theta(theta, r, dt, sched.tau_x(), sched.tau_z(t + 0.5 * dt), nullptr);
}

BlochVector bayes_step_bloch(BlochVector s, Readouts r, double dt, const MeasurementSchedule& sched, double t)
{
    using cd = std::complex<double>;
    using Mat = std::array<std::array<cd, 2>, 2>;
    auto mul = [](const Mat& a, const Mat& b) {
        Mat c{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        return c;
    };
    auto dagger = [](const Mat& a) {
        Mat c{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) c[i][j] = std::conj(a[j][i]);
        return c;
    };
    const double ax = r.r_x * dt / (2.0 * sched.tau_x());
    const double az = r.r_z * dt / (2.0 * sched.tau_z(t + 0.5 * dt));
    const Mat mx{{{std::cosh(ax), std::sinh(ax)}, {std::sinh(ax), std::cosh(ax)}}};
    const Mat mz{{{std::exp(az), 0.0}, {0.0, std::exp(-az)}}};
    const Mat rho{{{0.5 * (1.0 + s.z), 0.5 * cd(s.x, -s.y)}, {0.5 * cd(s.x, s.y), 0.5 * (1.0 - s.z)}}};
    const Mat m = mul(mz, mx);
    const Mat out = mul(mul(m, rho), dagger(m));
    const double tr = (out[0][0] + out[1][1]).real();
    return {2.0 * out[1][0].real() / tr, 2.0 * out[1][0].imag() / tr, (out[0][0] - out[1][1]).real() / tr};
}

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index)
{
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    return std::mt19937_64(seq);
}

TrajectoryEnsemble simulate_ensemble(const SqtConfig& cfg, double T, const MeasurementSchedule& sched)
{
    cfg.validate();
    if (!(T > cfg.t0)) throw std::invalid_argument("simulate_ensemble: T must exceed t0");

    const double span = T - cfg.t0;
    const auto n_steps = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-9));
    TrajectoryEnsemble ens;
    ens.n_traj = cfg.n_traj;
    ens.theta0 = cfg.theta0;
    ens.times.push_back(cfg.t0);
    for (std::size_t k = 1; k <= n_steps; ++k)
        if (k % cfg.record_stride == 0 || k == n_steps)
            ens.times.push_back(k == n_steps ? T : cfg.t0 + static_cast<double>(k) * cfg.dt);
    const std::size_t n_rec = ens.times.size();
    ens.theta.assign(cfg.n_traj * n_rec, 0.0);

    std::vector<double> purity(cfg.n_traj, 0.0);
    parallel_for(cfg.n_traj, [&](std::size_t j) {
        std::mt19937_64 rng = trajectory_rng(cfg.seed, j);
        double* row = &ens.theta[j * n_rec];
        double theta = cfg.theta0;
        row[0] = theta;
        std::size_t rec = 1;
        for (std::size_t k = 1; k <= n_steps; ++k) {
            const double t = cfg.t0 + static_cast<double>(k - 1) * cfg.dt;
            const double t_next = k == n_steps ? T : cfg.t0 + static_cast<double>(k) * cfg.dt;
            theta = advance(theta, t, t_next - t, cfg, sched, rng, purity[j]);
            if (k % cfg.record_stride == 0 || k == n_steps) row[rec++] = theta;
        }
    });
    ens.max_purity_residual = *std::max_element(purity.begin(), purity.end());
    return ens;
}

double circular_distance(double a, double b)
{
    double d = std::fmod(std::abs(a - b), two_pi);
    return d > std::numbers::pi ? two_pi - d : d;
}

std::vector<std::size_t> postselect(const TrajectoryEnsemble& ens, const PostSelection& sel)
{
    if (!(sel.window > 0.0)) throw std::invalid_argument("postselect: window must be > 0");
    if (ens.times.empty() || std::abs(ens.times.back() - sel.T) > 1e-9 * std::max(1.0, std::abs(sel.T)))
        throw std::invalid_argument("postselect: ensemble does not end at the post-selection time");
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < ens.n_traj; ++j)
        if (circular_distance(ens.final_theta(j), sel.theta_f) < sel.window) keep.push_back(j);
    return keep;
}

DensityHistogram density_of(const TrajectoryEnsemble& ens, const std::vector<std::size_t>& members, HistogramBins bins)
{
    if (bins.t_bins < 1 || bins.theta_bins < 1) throw std::invalid_argument("histogram: bin counts must be >= 1");
    DensityHistogram h;
    h.survivors = members.size();
    if (members.empty() || ens.times.size() < 2) return h;

    const std::size_t n_rec = ens.n_times();
    double lo = ens.at(members.front(), 0);
    double hi = lo;
    for (std::size_t j : members)
        for (std::size_t k = 0; k < n_rec; ++k) {
            lo = std::min(lo, ens.at(j, k));
            hi = std::max(hi, ens.at(j, k));
        }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const std::size_t nt = std::min(bins.t_bins, n_rec);
    const std::size_t nth = bins.theta_bins;
    const double t0 = ens.times.front();
    const double t1 = ens.times.back();
    for (std::size_t i = 0; i <= nt; ++i) h.t_edges.push_back(t0 + (t1 - t0) * static_cast<double>(i) / nt);
    for (std::size_t i = 0; i <= nth; ++i) h.theta_edges.push_back(lo + (hi - lo) * static_cast<double>(i) / nth);

    h.values.assign(nt * nth, 0.0);
    for (std::size_t k = 0; k < n_rec; ++k) {
        const auto ti = std::min(nt - 1, static_cast<std::size_t>((ens.times[k] - t0) / (t1 - t0) * nt));
        for (std::size_t j : members) {
            const auto bi = std::min(nth - 1, static_cast<std::size_t>((ens.at(j, k) - lo) / (hi - lo) * nth));
            h.values[ti * nth + bi] += 1.0;
        }
    }
    const double peak = *std::max_element(h.values.begin(), h.values.end());
    for (double& v : h.values) v /= peak;
    h.empty = false;
    return h;
}

DensityHistogram postselect_density(const TrajectoryEnsemble& ens, const PostSelection& sel, HistogramBins bins)
{
    return density_of(ens, postselect(ens, sel), bins);
}

MlpExtraction extract_mlps(const TrajectoryEnsemble& ens, const PostSelection& sel, HistogramBins bins,
                           std::size_t min_population)
{
    MlpExtraction out;
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t j : postselect(ens, sel))
        groups[static_cast<int>(std::floor((ens.final_theta(j) - ens.theta0) / two_pi))].push_back(j);
    if (groups.empty()) throw std::invalid_argument("extract_mlps: no trajectories survive post-selection");

    for (const auto& [winding, members] : groups) {
        if (members.size() < min_population) {
            out.notes.push_back("winding " + std::to_string(winding) + ": " + std::to_string(members.size()) +
                                " trajectories, below the minimum of " + std::to_string(min_population));
            continue;
        }
        const DensityHistogram h = density_of(ens, members, bins);
        RidgePath ridge;
        ridge.winding = winding;
        ridge.population = members.size();
        for (std::size_t i = 0; i < h.n_t(); ++i) {
            std::size_t best = 0;
            double best_v = 0.0;
            for (std::size_t b = 0; b < h.n_theta(); ++b)
                if (h.value(i, b) > best_v) {
                    best_v = h.value(i, b);
                    best = b;
                }
            if (best_v <= 0.0) continue;
            ridge.times.push_back(0.5 * (h.t_edges[i] + h.t_edges[i + 1]));
            ridge.theta.push_back(0.5 * (h.theta_edges[best] + h.theta_edges[best + 1]));
        }
        std::vector<double> smooth = ridge.theta;
        for (std::size_t i = 1; i + 1 < ridge.theta.size(); ++i) {
            double w[3] = {ridge.theta[i - 1], ridge.theta[i], ridge.theta[i + 1]};
            std::sort(w, w + 3);
            smooth[i] = w[1];
        }
        ridge.theta = std::move(smooth);
        out.ridges.push_back(std::move(ridge));
    }
    return out;
}

KickCollapseStats simulate_kick_collapse(double theta0, std::size_t n_traj, std::uint64_t seed,
                                         const MeasurementSchedule& sched, double dt, double near)
{
    SqtConfig cfg;
    cfg.dt = dt;
    cfg.n_traj = n_traj;
    cfg.seed = seed;
    cfg.theta0 = theta0;
    const double w = cfg.kick_half_width * sched.tau_m();
    cfg.t0 = sched.kick_center(0) - w;
    cfg.record_stride = static_cast<std::size_t>(-1);
    const TrajectoryEnsemble ens = simulate_ensemble(cfg, sched.kick_center(0) + w, sched);

    KickCollapseStats st;
    st.n_traj = n_traj;
    st.t_start = cfg.t0;
    st.t_end = ens.times.back();
    for (std::size_t j = 0; j < n_traj; ++j) {
        const double d0 = circular_distance(ens.final_theta(j), 0.0);
        const double dpi = circular_distance(ens.final_theta(j), std::numbers::pi);
        if (d0 < dpi) ++st.excited;
        else ++st.ground;
        if (std::min(d0, dpi) < near) ++st.near_eigenstate;
    }
    return st;
}

void write_density_csv(const DensityHistogram& h, const std::string& matrix_path, const std::string& edges_path)
{
    std::ofstream m(matrix_path);
    std::ofstream e(edges_path);
    if (!m || !e) throw std::runtime_error("cannot open density output files");
    m.precision(10);
    e.precision(17);
    for (std::size_t i = 0; i < h.n_t(); ++i) {
        for (std::size_t j = 0; j < h.n_theta(); ++j) m << (j ? "," : "") << h.value(i, j);
        m << '\n';
    }
    e << "axis,index,edge\n";
    for (std::size_t i = 0; i < h.t_edges.size(); ++i) e << "t," << i << ',' << h.t_edges[i] << '\n';
    for (std::size_t i = 0; i < h.theta_edges.size(); ++i) e << "theta," << i << ',' << h.theta_edges[i] << '\n';
}

void write_ridges_csv(const MlpExtraction& m, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.precision(17);
    out << "winding,population,t,theta\n";
    for (const RidgePath& r : m.ridges)
        for (std::size_t i = 0; i < r.times.size(); ++i)
            out << r.winding << ',' << r.population << ',' << r.times[i] << ',' << r.theta[i] << '\n';
}

} // namespace oploc
