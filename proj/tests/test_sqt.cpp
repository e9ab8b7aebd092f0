#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oploc/parallel.hpp"
#include "oploc/sqt.hpp"

using namespace oploc;
using std::numbers::pi;

namespace {

double variance_at(const TrajectoryEnsemble& ens, std::size_t k)
{
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < ens.n_traj; ++i) mean += ens.at(i, k);
    mean /= static_cast<double>(ens.n_traj);
    for (std::size_t i = 0; i < ens.n_traj; ++i) sq += (ens.at(i, k) - mean) * (ens.at(i, k) - mean);
    return sq / static_cast<double>(ens.n_traj - 1);
}

double normal_cdf(double x, double var) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * var)); }

} // namespace

TEST_CASE("config validation and coarse-step warning")
{
    SqtConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.n_traj = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.kick_substeps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    const auto strong = standard_schedule(0.99);
    cfg = {};
    CHECK_FALSE(sqt_dt_too_coarse(cfg, strong));
    cfg.kick_substeps = 1;
    cfg.dt = 2e-3;
    CHECK(sqt_dt_too_coarse(cfg, strong));
    CHECK_FALSE(sqt_dt_too_coarse(cfg, standard_schedule(0.0)));
}

TEST_CASE("readout statistics")
{
    std::mt19937_64 rng(11);
    const int n = 1'000'000;
    const double dt = 1e-3;
    double sx = 0.0, sz = 0.0, szz = 0.0;
    for (int i = 0; i < n; ++i) {
        const Readouts r = sample_readout(pi / 2, dt, 1.0, 1.0, rng);
        sx += r.r_x;
        sz += r.r_z;
        szz += r.r_z * r.r_z;
    }
    const double mean_x = sx / n;
    const double mean_z = sz / n;
    const double var_z = szz / n - mean_z * mean_z;
    const double sigma = std::sqrt(1.0 / dt);
    CHECK(std::abs(mean_x - 1.0) < 3 * sigma / std::sqrt(n));
    CHECK(std::abs(mean_z) < 3 * sigma / std::sqrt(n));
    // Sample variance has relative standard error sqrt(2/n).
    CHECK(std::abs(var_z / 1000.0 - 1.0) < 3 * std::sqrt(2.0 / n));

    // At the kick peak tau_z = 0.01 tau_x, so the z readout is 100x less noisy.
    const auto s = standard_schedule(0.99);
    CHECK(s.tau_z(0.5) == doctest::Approx(0.01));
    double peak = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double r = sample_readout(0.0, dt, 1.0, s.tau_z(0.5), rng).r_z - 1.0;
        peak += r * r;
    }
    CHECK(peak / 100000 == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("noiseless readout leaves the state in place")
{
    const auto s = standard_schedule(0.0);
    for (double th : {0.3, 1.0, 2.5, -1.2, 4.0}) {
        const double out = bayes_step(th, {std::sin(th), std::cos(th)}, 1e-3, s, 0.2);
        CHECK(std::abs(out - th) < 1e-6);
    }
}

TEST_CASE("z-eigenstate is moved only by the x channel")
{
    const auto s = standard_schedule(0.0);
    CHECK(bayes_step(0.0, {0.0, 0.7}, 1e-3, s, 0.2) == 0.0);
    CHECK(bayes_step(0.0, {0.0, 30.0}, 1e-3, s, 0.2) == 0.0);
    const double moved = bayes_step(0.0, {2.0, 1.0}, 1e-4, s, 0.2);
    CHECK(moved == doctest::Approx(2.0 * 1e-4).epsilon(1e-3));
}

TEST_CASE("bayes_step keeps the nearest branch")
{
    const auto s = standard_schedule(0.0);
    const double th = 4 * pi + 0.1;
    const double out = bayes_step(th, {std::sin(th), std::cos(th)}, 1e-3, s, 0.0);
    CHECK(std::abs(out - th) < 1e-6);
    const double neg = -6 * pi - 0.2;
    CHECK(std::abs(bayes_step(neg, {std::sin(neg), std::cos(neg)}, 1e-3, s, 0.0) - neg) < 1e-6);
}

TEST_CASE("equal strengths give no drift")
{
    const auto s = standard_schedule(0.0);
    std::mt19937_64 rng(5);
    const double dt = 1e-3, th = pi / 4;
    const int n = 1'000'000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = bayes_step(th, sample_readout(th, dt, 1.0, 1.0, rng), dt, s, 0.2) - th;
        sum += d;
        sq += d * d;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 3 * sd / std::sqrt(n));
    CHECK(sq / n == doctest::Approx(dt).epsilon(0.01));
}

TEST_CASE("full density-matrix update keeps y at zero and agrees with the angle update")
{
    const auto s = standard_schedule(0.99);
    std::mt19937_64 rng(9);
    const double dt = 1e-4;
    BlochVector b{std::sin(0.7), 0.0, std::cos(0.7)};
    double th = 0.7;
    double worst_y = 0.0, worst_angle = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double t = i * dt;
        const Readouts r = sample_readout(th, dt, s.tau_x(), s.tau_z(t + 0.5 * dt), rng);
        b = bayes_step_bloch(b, r, dt, s, t);
        th = bayes_step(th, r, dt, s, t);
        worst_y = std::max(worst_y, std::abs(b.y));
        worst_angle = std::max(worst_angle, std::abs(std::remainder(std::atan2(b.x, b.z) - th, 2 * pi)));
    }
    CHECK(worst_y < 1e-14);
    CHECK(worst_angle < 1e-9);
}

TEST_CASE("ensembles are deterministic and independent of the thread count")
{
    SqtConfig cfg;
    cfg.n_traj = 64;
    cfg.seed = 42;
    const auto s = standard_schedule(0.9);
    set_default_threads(1);
    const TrajectoryEnsemble a = simulate_ensemble(cfg, 1.0, s);
    set_default_threads(4);
    const TrajectoryEnsemble b = simulate_ensemble(cfg, 1.0, s);
    set_default_threads(0);
    CHECK(a.theta == b.theta);
    CHECK(a.times == b.times);
    cfg.seed = 43;
    const TrajectoryEnsemble c = simulate_ensemble(cfg, 1.0, s);
    CHECK(a.theta != c.theta);
    CHECK(a.times.front() == 0.0);
    CHECK(a.times.back() == 1.0);
    CHECK(a.max_purity_residual < 1e-12);

    const auto r1 = trajectory_rng(1, 0);
    const auto r2 = trajectory_rng(1, 1);
    CHECK(r1 != r2);
    CHECK(trajectory_rng(1, 0) == r1);
}

TEST_CASE("record stride thins the grid but keeps the end time")
{
    SqtConfig cfg;
    cfg.n_traj = 4;
    cfg.record_stride = 7;
    const TrajectoryEnsemble e = simulate_ensemble(cfg, 0.1, standard_schedule(0.0));
    CHECK(e.times.front() == 0.0);
    CHECK(e.times.back() == doctest::Approx(0.1));
    CHECK(e.times.size() == 100 / 7 + 2);
    for (std::size_t i = 0; i < e.n_traj; ++i) CHECK(e.at(i, 0) == 0.0);
}

TEST_CASE("isotropic diffusion matches the Gaussian solution")
{
    SqtConfig cfg;
    cfg.n_traj = 100000;
    cfg.seed = 2024;
    cfg.record_stride = 100;
    const TrajectoryEnsemble e = simulate_ensemble(cfg, 0.5, standard_schedule(0.0));
    const std::size_t k = e.n_times() - 1;
    REQUIRE(e.times[k] == doctest::Approx(0.5));
    CHECK(std::abs(variance_at(e, k) / 0.5 - 1.0) < 0.03);
    CHECK(e.max_purity_residual < 1e-12);

    std::vector<double> xs(e.n_traj);
    for (std::size_t i = 0; i < e.n_traj; ++i) xs[i] = e.at(i, k);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = normal_cdf(xs[i], 0.5);
        ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    MESSAGE("KS distance " << ks);
    CHECK(ks < 0.01);
}

TEST_CASE("stronger z measurement diffuses faster away from its eigenstates")
{
    // tau_m far above the run length makes tau_z effectively constant at 0.5.
    const MeasurementSchedule s(1.0, 0.5, 1e6, 1.0);
    REQUIRE(s.tau_z(0.0) == doctest::Approx(0.5));
    SqtConfig cfg;
    cfg.n_traj = 20000;
    const double t = 0.02;
    cfg.theta0 = pi / 2;
    const TrajectoryEnsemble across = simulate_ensemble(cfg, t, s);
    cfg.theta0 = 0.0;
    const TrajectoryEnsemble along = simulate_ensemble(cfg, t, s);
    const double rate_across = variance_at(across, across.n_times() - 1) / t;
    const double rate_along = variance_at(along, along.n_times() - 1) / t;
    CHECK(rate_across > rate_along);
    CHECK(rate_across == doctest::Approx(2.0).epsilon(0.1));
    CHECK(rate_along == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("kick from the equator splits evenly")
{
    const KickCollapseStats st = simulate_kick_collapse(pi / 2, 10000, 3, standard_schedule(0.99));
    const double n = static_cast<double>(st.n_traj);
    CHECK(st.excited + st.ground == st.n_traj);
    CHECK(std::abs(st.excited / n - 0.5) < 3 * std::sqrt(0.25 / n));
    CHECK(st.t_start == doctest::Approx(0.5 - 3 * 0.025));
    CHECK(st.t_end == doctest::Approx(0.5 + 3 * 0.025));
}

// One kick at this strength integrates to about 1.1 collapse times, so the
// state is only partly projected (see README, known deviations).
TEST_CASE("a single strong kick collapses nearly every trajectory" * doctest::should_fail())
{
    const KickCollapseStats st = simulate_kick_collapse(pi / 2, 10000, 1, standard_schedule(0.99));
    MESSAGE("near an eigenstate: " << st.near_eigenstate << " of " << st.n_traj);
    CHECK(static_cast<double>(st.near_eigenstate) >= 0.95 * static_cast<double>(st.n_traj));
}

TEST_CASE("kick branch fractions follow the projective rule" * doctest::should_fail())
{
    const KickCollapseStats st = simulate_kick_collapse(pi / 3, 10000, 1, standard_schedule(0.99));
    const double n = static_cast<double>(st.n_traj);
    const double p = std::pow(std::cos(pi / 6), 2);
    MESSAGE("excited fraction " << st.excited / n << ", projective " << p);
    CHECK(std::abs(st.excited / n - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("circular distance")
{
    CHECK(circular_distance(0.1, 2 * pi - 0.1) == doctest::Approx(0.2));
    CHECK(circular_distance(3 * pi, pi) == doctest::Approx(0.0).scale(1.0));
    CHECK(circular_distance(0.0, pi) == doctest::Approx(pi));
    CHECK(circular_distance(-0.5, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("post-selection and densities")
{
    SqtConfig cfg;
    cfg.n_traj = 500;
    cfg.record_stride = 10;
    const TrajectoryEnsemble e = simulate_ensemble(cfg, 1.0, standard_schedule(0.99));
    const PostSelection all{1.0, 0.0, pi};
    CHECK(postselect(e, all).size() == e.n_traj);

    std::vector<std::size_t> everyone(e.n_traj);
    for (std::size_t i = 0; i < e.n_traj; ++i) everyone[i] = i;
    const HistogramBins bins{40, 60};
    const DensityHistogram h1 = postselect_density(e, all, bins);
    const DensityHistogram h2 = density_of(e, everyone, bins);
    CHECK(h1.values == h2.values);
    CHECK(h1.survivors == e.n_traj);
    CHECK(*std::max_element(h1.values.begin(), h1.values.end()) == 1.0);
    CHECK(h1.n_t() == 40);
    CHECK(h1.n_theta() == 60);

    const PostSelection none{1.0, 0.0, 1e-12};
    const DensityHistogram empty = postselect_density(e, none, bins);
    if (postselect(e, none).empty()) {
        CHECK(empty.empty);
        CHECK(empty.survivors == 0);
    }
}

TEST_CASE("survivor fraction is consistent across seeds")
{
    SqtConfig cfg;
    cfg.n_traj = 3000;
    cfg.record_stride = 50;
    const auto s = standard_schedule(0.99);
    const PostSelection sel{3.0, pi, 0.1};
    std::vector<double> frac;
    for (std::uint64_t seed : {1, 2}) {
        cfg.seed = seed;
        const TrajectoryEnsemble e = simulate_ensemble(cfg, 3.0, s);
        frac.push_back(static_cast<double>(postselect(e, sel).size()) / cfg.n_traj);
    }
    const double pooled = 0.5 * (frac[0] + frac[1]);
    const double sigma = std::sqrt(2 * pooled * (1 - pooled) / cfg.n_traj);
    CHECK(pooled > 0.0);
    CHECK(std::abs(frac[0] - frac[1]) < 3 * sigma);
}

TEST_CASE("ridges end inside the post-selection window")
{
    SqtConfig cfg;
    cfg.n_traj = 20000;
    cfg.record_stride = 10;
    const auto s = standard_schedule(0.99);
    const TrajectoryEnsemble e = simulate_ensemble(cfg, 3.0, s);
    const PostSelection sel{3.0, pi, 0.1};
    const HistogramBins bins{150, 200};
    const MlpExtraction mlp = extract_mlps(e, sel, bins);
    REQUIRE_FALSE(mlp.ridges.empty());
    const DensityHistogram h = postselect_density(e, sel, bins);
    const double bin_width = h.theta_edges[1] - h.theta_edges[0];
    for (const auto& ridge : mlp.ridges) {
        CHECK(ridge.population >= 50);
        CHECK(circular_distance(ridge.theta.back(), pi) < 0.1 + 2 * bin_width);
        CHECK(ridge.theta.size() == ridge.times.size());
    }
}

TEST_CASE("rotor ridge follows the straight diffusion bridge")
{
    SqtConfig cfg;
    cfg.n_traj = 40000;
    cfg.record_stride = 10;
    const TrajectoryEnsemble e = simulate_ensemble(cfg, 1.0, standard_schedule(0.0));
    const PostSelection sel{1.0, 1.0, 0.1};
    const MlpExtraction mlp = extract_mlps(e, sel, {50, 120});
    REQUIRE(mlp.ridges.size() == 1);
    const RidgePath& r = mlp.ridges.front();
    CHECK(r.winding == 0);
    double dev = 0.0;
    for (std::size_t i = 0; i < r.times.size(); ++i) dev += std::abs(r.theta[i] - r.times[i]);
    dev /= static_cast<double>(r.times.size());
    MESSAGE("mean deviation from the line: " << dev);
    CHECK(dev < 0.1);
}

TEST_CASE("density and ridge CSV files")
{
    SqtConfig cfg;
    cfg.n_traj = 400;
    cfg.record_stride = 10;
    const TrajectoryEnsemble e = simulate_ensemble(cfg, 1.0, standard_schedule(0.0));
    const PostSelection sel{1.0, 0.0, pi};
    const DensityHistogram h = postselect_density(e, sel, {10, 20});
    const auto dir = std::filesystem::temp_directory_path();
    write_density_csv(h, (dir / "oploc_density.csv").string(), (dir / "oploc_edges.csv").string());
    std::ifstream in(dir / "oploc_density.csv");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows >= 10);
    const MlpExtraction mlp = extract_mlps(e, sel, {10, 20}, 10);
    write_ridges_csv(mlp, (dir / "oploc_ridges.csv").string());
    CHECK(std::filesystem::file_size(dir / "oploc_ridges.csv") > 0);
    for (const char* f : {"oploc_density.csv", "oploc_edges.csv", "oploc_ridges.csv"}) std::filesystem::remove(dir / f);
}
