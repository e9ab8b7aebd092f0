#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oploc/chaos.hpp"
#include "oploc/config.hpp"
#include "oploc/integrator.hpp"
#include "oploc/kicklimit.hpp"
#include "oploc/manifold.hpp"
#include "oploc/parallel.hpp"
#include "oploc/resonance.hpp"
#include "oploc/sqt.hpp"
#include "svg.hpp"

#ifndef OPLOC_VERSION
#define OPLOC_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace oploc;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

struct Run {
    std::string command;
    RunConfig cfg;
    fs::path out;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    json results = json::object();
    std::vector<std::string> files;

    fs::path file(const std::string& name)
    {
        files.push_back(name);
        return out / name;
    }
};

std::ofstream open_csv(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(17);
    return out;
}

double wrap_2pi(double theta)
{
    double w = std::fmod(theta, two_pi);
    return w < 0.0 ? w + two_pi : w;
}

void write_metadata(Run& run)
{
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
    json meta;
    meta["command"] = run.command;
    meta["version"] = OPLOC_VERSION;
    meta["wall_time_s"] = wall;
    meta["threads"] = default_threads();
    meta["conventions"] = {
        {"strobe_times", "t = n * period, halfway between kicks centred at (n + 1/2) * period"},
        {"winding", "floor((theta_T - theta0) / (2 pi)) on the unwrapped angle"},
        {"divergence", "a path is cut when |p| > integrator.p_max or its state is not finite"},
        {"units", "time in us, rates in MHz"},
    };
    json config = json::object();
    for (const auto& [key, value] : describe(run.cfg)) config[key] = value;
    meta["config"] = config;
    meta["results"] = run.results;
    meta["files"] = run.files;
    std::ofstream out(run.out / (run.command + ".json"));
    out << meta.dump(2) << '\n';
}

// ---------------------------------------------------------------- portrait

void cmd_portrait(Run& run)
{
    const auto& pc = run.cfg.portrait;
    const MeasurementSchedule sched = run.cfg.schedule();
    std::vector<PhasePoint> ics;
    for (double p0 : pc.p0)
        for (double dp : {-pc.p0_jitter, 0.0, pc.p0_jitter}) {
            if (dp != 0.0 && pc.p0_jitter == 0.0) continue;
            for (int j = 0; j < pc.theta_points; ++j) ics.push_back({two_pi * j / pc.theta_points, p0 + dp});
        }
    const StroboscopicPortrait por = portrait(ics, pc.n_strobes, sched, run.cfg.integrator, pc.delta_theta0);
    write_portrait_csv(por, run.file("portrait.csv").string());

    plot::SvgPlot svg("Stroboscopic portrait, epsilon = " + std::to_string(sched.epsilon()), "theta mod 2 pi",
                      "p");
    double p_lo = 0.0, p_hi = 0.0;
    std::size_t diverged = 0;
    for (const auto& r : por.records) {
        if (r.status == PathStatus::Diverged) {
            ++diverged;
            continue;
        }
        p_lo = std::min(p_lo, r.p);
        p_hi = std::max(p_hi, r.p);
    }
    svg.set_range(0.0, two_pi, p_lo - 0.1, p_hi + 0.1);
    for (const auto& r : por.records)
        if (r.status == PathStatus::Completed) svg.point(r.theta_mod_2pi, r.p, plot::diverging(r.lambda, 0.25));
    svg.legend("lambda = +0.25 MHz", plot::diverging(0.25, 0.25));
    svg.legend("lambda = -0.25 MHz", plot::diverging(-0.25, 0.25));
    svg.save(run.file("portrait.svg").string());

    run.results["initial_conditions"] = ics.size();
    run.results["records"] = por.records.size();
    run.results["diverged_initial_conditions"] = diverged;
    std::cout << ics.size() << " initial conditions, " << por.records.size() << " records, " << diverged
              << " diverged\n";
}

// ---------------------------------------------------------------- manifold

void write_manifold_csv(const Manifold& m, std::size_t k, const fs::path& path)
{
    auto out = open_csv(path);
    out << "p0,theta_T,p_T,status,winding\n";
    for (const ManifoldPoint& pt : m.points) {
        if (pt.live_at(k))
            out << pt.p0 << ',' << pt.states[k].theta << ',' << pt.states[k].p << ",completed,"
                << winding_number(pt.states[k].theta, m.theta0) << '\n';
        else
            out << pt.p0 << ",nan,nan,diverged,\n";
    }
}

void write_jacobian_csv(const Manifold& m, std::size_t k, const fs::path& path)
{
    auto out = open_csv(path);
    out << "segment,p0,J_plus,J_minus,curvature,van_vleck_plus\n";
    const JacobianField field = jacobians(m, k);
    for (std::size_t s = 0; s < field.segments.size(); ++s)
        for (const JacobianEntry& e : field.segments[s])
            out << s << ',' << e.p0 << ',' << e.j_plus << ',' << e.j_minus << ',' << e.curvature << ','
                << 1.0 / std::abs(e.j_plus) << '\n';
}

void plot_manifold(const Manifold& m, std::size_t k, const fs::path& path, const std::vector<double>& marks = {})
{
    plot::SvgPlot svg("Lagrange manifold at T = " + std::to_string(m.times[k]) + " us", "theta_T", "p0");
    double lo = m.theta0, hi = m.theta0;
    for (const auto& pt : m.points)
        if (pt.live_at(k)) {
            lo = std::min(lo, pt.states[k].theta);
            hi = std::max(hi, pt.states[k].theta);
        }
    svg.set_range(lo, hi, m.points.front().p0, m.points.back().p0);
    for (const Segment& s : live_segments(m, k)) {
        std::vector<double> x, y;
        for (std::size_t i = s.first; i <= s.last; ++i) {
            x.push_back(m.points[i].states[k].theta);
            y.push_back(m.points[i].p0);
        }
        svg.polyline(x, y, {0, 0, 0}, 0.6);
    }
    for (double v : marks) svg.vline(v, {214, 39, 40});
    svg.save(path.string());

    plot::SvgPlot phase("Manifold in phase space at T = " + std::to_string(m.times[k]) + " us", "theta_T mod 2 pi",
                        "p_T");
    double plo = 0.0, phi = 0.0;
    for (const auto& pt : m.points)
        if (pt.live_at(k)) {
            plo = std::min(plo, pt.states[k].p);
            phi = std::max(phi, pt.states[k].p);
        }
    phase.set_range(0.0, two_pi, plo, phi);
    for (const auto& pt : m.points)
        if (pt.live_at(k))
            phase.point(wrap_2pi(pt.states[k].theta), pt.states[k].p,
                        plot::categorical(winding_number(pt.states[k].theta, m.theta0)), 0.6);
    auto phase_path = path;
    phase_path.replace_filename(path.stem().string() + "_phase.svg");
    phase.save(phase_path.string());
}

std::string time_tag(double t)
{
    std::ostringstream os;
    os << t;
    return os.str();
}

Manifold run_manifold(Run& run)
{
    const auto& mc = run.cfg.manifold;
    const Manifold m = propagate(mc.theta0, {mc.p0_min, mc.p0_max}, mc.times, run.cfg.schedule(),
                                 run.cfg.integrator, run.cfg.refine);
    run.results["points"] = m.points.size();
    run.results["integrations"] = m.integrations;
    run.results["refinement_iterations"] = m.iterations;
    run.results["truncated"] = m.truncated;
    if (m.truncated) std::cerr << "warning: refinement budget exhausted, manifold is truncated\n";
    return m;
}

void cmd_manifold(Run& run)
{
    const Manifold m = run_manifold(run);
    json counts = json::array();
    for (std::size_t k = 0; k < m.times.size(); ++k) {
        const std::string tag = time_tag(m.times[k]);
        write_manifold_csv(m, k, run.file("manifold_T" + tag + ".csv"));
        write_jacobian_csv(m, k, run.file("jacobian_T" + tag + ".csv"));
        plot_manifold(m, k, run.file("manifold_T" + tag + ".svg"));
        run.files.push_back("manifold_T" + tag + "_phase.svg");
        const std::size_t n_c = catastrophe_count(m, k);
        counts.push_back({{"T", m.times[k]}, {"catastrophes", n_c}, {"segments", live_segments(m, k).size()}});
        std::cout << "T = " << m.times[k] << " us: " << n_c << " catastrophes\n";
    }
    run.results["catastrophes"] = counts;
    std::cout << m.points.size() << " points, " << m.integrations << " integrations\n";
}

// ---------------------------------------------------------------- multipath

void cmd_multipath(Run& run)
{
    const Manifold m = run_manifold(run);
    const auto& mp = run.cfg.multipath;
    const MeasurementSchedule sched = run.cfg.schedule();
    auto out = open_csv(run.file("multipaths.csv"));
    out << "target,p0,theta_T,p_T,winding,converged,residual\n";
    json summary = json::array();

    plot::SvgPlot paths("Multipath solutions", "t (us)", "theta");
    double th_lo = m.theta0, th_hi = m.theta0;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> curves;
    std::vector<int> curve_target;

    for (std::size_t ti = 0; ti < mp.targets.size(); ++ti) {
        const double target = mp.targets[ti];
        const auto sols = mp.unwrapped
                              ? find_multipaths_unwrapped(m, target, sched, run.cfg.integrator, mp.tol_theta,
                                                          run.cfg.refine.min_dp0)
                              : find_multipaths(m, target, sched, run.cfg.integrator, mp.tol_theta,
                                                run.cfg.refine.min_dp0);
        std::size_t converged = 0;
        for (const auto& s : sols) {
            converged += s.converged;
            out << target << ',' << s.p0 << ',' << s.theta_T << ',' << s.p_T << ',' << s.winding << ','
                << (s.converged ? "true" : "false") << ',' << s.residual << '\n';
            const OpPath path = integrate({m.theta0, s.p0}, 0.0, m.final_time(), sched, run.cfg.integrator);
            std::vector<double> t, th;
            for (const auto& smp : path.samples) {
                t.push_back(smp.t);
                th.push_back(smp.point.theta);
                th_lo = std::min(th_lo, smp.point.theta);
                th_hi = std::max(th_hi, smp.point.theta);
            }
            curves.emplace_back(std::move(t), std::move(th));
            curve_target.push_back(static_cast<int>(ti));
        }
        summary.push_back({{"target", target}, {"solutions", sols.size()}, {"converged", converged}});
        std::cout << "target " << target << ": " << converged << " solutions";
        if (converged != sols.size()) std::cout << " (" << sols.size() - converged << " unconverged)";
        std::cout << '\n';
        paths.legend("target " + time_tag(target), plot::categorical(static_cast<int>(ti)));
    }
    run.results["multipaths"] = summary;

    paths.set_range(0.0, m.final_time(), th_lo, th_hi);
    for (std::size_t i = 0; i < curves.size(); ++i)
        paths.polyline(curves[i].first, curves[i].second, plot::categorical(curve_target[i]), 1.0);
    paths.save(run.file("multipath_paths.svg").string());
    plot_manifold(m, m.final_index(), run.file("multipath_manifold.svg"), mp.targets);
    run.files.push_back("multipath_manifold_phase.svg");
}

// ---------------------------------------------------------------- stretch

void cmd_stretch(Run& run)
{
    const auto& sc = run.cfg.stretch;
    const MeasurementSchedule sched = run.cfg.schedule();
    const double theta0 = run.cfg.manifold.theta0;
    // A range symmetric about p0 = 0 from theta0 = 0 is half the work by reflection.
    const bool symmetric = theta0 == 0.0 && sc.p0_max > 0.0 && sc.p0_min == -sc.p0_max;
    const StretchReport rep =
        symmetric ? stretch_report_symmetric(sc.p0_max, sc.times, sched, run.cfg.integrator, run.cfg.refine,
                                             sc.delta_theta0)
                  : stretch_report(theta0, {sc.p0_min, sc.p0_max}, sc.times, sched, run.cfg.integrator,
                                   run.cfg.refine, sc.delta_theta0);

    auto out = open_csv(run.file("stretch.csv"));
    out << "t,L,J_av,N_c,s1,s2,s3,lambda_av,D_av\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k)
        out << rep.times[k] << ',' << rep.length[k] << ',' << rep.j_av[k] << ',' << rep.n_c[k] << ',' << rep.s1[k]
            << ',' << rep.s2[k] << ',' << rep.s3[k] << ',' << rep.lambda_av[k] << ',' << rep.d_av[k] << '\n';

    plot::SvgPlot svg("Manifold stretching", "t (us)", "rate (MHz)");
    double lo = 0.0, hi = 0.0;
    for (const auto* v : {&rep.s1, &rep.s2, &rep.s3, &rep.lambda_av})
        for (double x : *v) lo = std::min(lo, x), hi = std::max(hi, x);
    svg.set_range(0.0, rep.times.back(), lo * 1.1, hi * 1.1);
    const std::pair<const char*, const std::vector<double>*> curves[] = {
        {"s1 (length)", &rep.s1}, {"s2 (Jacobian)", &rep.s2}, {"s3 (catastrophes)", &rep.s3},
        {"lambda_av", &rep.lambda_av}};
    int c = 0;
    for (const auto& [name, v] : curves) {
        svg.polyline(rep.times, *v, plot::categorical(c), 2.0);
        for (std::size_t k = 0; k < rep.times.size(); ++k) svg.point(rep.times[k], (*v)[k], plot::categorical(c), 3);
        svg.legend(name, plot::categorical(c++));
    }
    svg.save(run.file("stretch.svg").string());

    run.results["integrations"] = rep.integrations;
    run.results["mirrored"] = symmetric;
    run.results["truncated"] = rep.truncated;
    for (std::size_t k = 0; k < rep.times.size(); ++k)
        std::cout << "t = " << rep.times[k] << ": s1 = " << rep.s1[k] << ", s2 = " << rep.s2[k]
                  << ", s3 = " << rep.s3[k] << ", lambda_av = " << rep.lambda_av[k] << ", N_c = " << rep.n_c[k]
                  << '\n';
}

// ---------------------------------------------------------------- le

void cmd_le(Run& run)
{
    const auto& lc = run.cfg.le;
    const MeasurementSchedule sched = run.cfg.schedule();
    std::vector<double> times;
    const auto n = static_cast<std::size_t>(std::llround(lc.T / lc.sample_dt));
    for (std::size_t i = 1; i <= n; ++i) times.push_back(std::min(lc.T, lc.sample_dt * static_cast<double>(i)));
    if (times.empty() || times.back() < lc.T) times.push_back(lc.T);

    auto out = open_csv(run.file("lyapunov.csv"));
    out << "theta0,p0,t,theta,p,D,lambda_MHz\n";
    plot::SvgPlot svg("Finite-time Lyapunov exponent", "t (us)", "lambda (MHz)");
    svg.set_range(0.0, lc.T, -0.1, 0.6);
    json summary = json::array();
    for (std::size_t i = 0; i < lc.theta0.size(); ++i) {
        const PathTriplet trip = make_triplet({lc.theta0[i], lc.p0[i]}, times, sched, run.cfg.integrator,
                                              lc.delta_theta0);
        const LyapunovSeries ser = lyapunov_series(trip);
        double first_cross = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t k = 0; k < ser.times.size(); ++k) {
            const PhasePoint pt = trip.main.samples[k + 1].point;
            out << lc.theta0[i] << ',' << lc.p0[i] << ',' << ser.times[k] << ',' << pt.theta << ',' << pt.p << ','
                << ser.d[k] << ',' << ser.lambda[k] << '\n';
            if (std::isnan(first_cross) && ser.d[k] > 0.2) first_cross = ser.times[k];
        }
        svg.polyline(ser.times, ser.lambda, plot::categorical(static_cast<int>(i)), 1.5);
        svg.legend("(" + time_tag(lc.theta0[i]) + ", " + time_tag(lc.p0[i]) + ")",
                   plot::categorical(static_cast<int>(i)));
        summary.push_back({{"theta0", lc.theta0[i]},
                           {"p0", lc.p0[i]},
                           {"first_time_D_above_0.2", std::isnan(first_cross) ? json() : json(first_cross)},
                           {"final_lambda", ser.lambda.empty() ? json() : json(ser.lambda.back())},
                           {"diverged", trip.main.diverged() || trip.plus.diverged() || trip.minus.diverged()}});
        std::cout << "(" << lc.theta0[i] << ", " << lc.p0[i] << "): lambda(" << lc.T
                  << ") = " << (ser.lambda.empty() ? std::nan("") : ser.lambda.back()) << " MHz\n";
    }
    svg.save(run.file("lyapunov.svg").string());
    run.results["triplets"] = summary;
}

// ---------------------------------------------------------------- sqt-density

void plot_density(const DensityHistogram& h, const std::string& title, const fs::path& path,
                  const MlpExtraction* ridges = nullptr)
{
    plot::SvgPlot svg(title, "t (us)", "theta");
    if (h.empty) {
        svg.save(path.string());
        return;
    }
    svg.set_range(h.t_edges.front(), h.t_edges.back(), h.theta_edges.front(), h.theta_edges.back());
    // Merge cells so that the image stays small at full resolution.
    const std::size_t fi = std::max<std::size_t>(1, h.n_t() / 200);
    const std::size_t fj = std::max<std::size_t>(1, h.n_theta() / 200);
    for (std::size_t i = 0; i < h.n_t(); i += fi)
        for (std::size_t j = 0; j < h.n_theta(); j += fj) {
            double v = 0.0;
            for (std::size_t a = i; a < std::min(i + fi, h.n_t()); ++a)
                for (std::size_t b = j; b < std::min(j + fj, h.n_theta()); ++b) v = std::max(v, h.value(a, b));
            if (v <= 0.0) continue;
            svg.cell(h.t_edges[i], h.theta_edges[j], h.t_edges[std::min(i + fi, h.n_t())],
                     h.theta_edges[std::min(j + fj, h.n_theta())], plot::sequential(std::sqrt(v)));
        }
    if (ridges)
        for (const RidgePath& r : ridges->ridges) {
            svg.polyline(r.times, r.theta, {214, 39, 40}, 2.0);
            svg.legend("ridge, winding " + std::to_string(r.winding) + " (" + std::to_string(r.population) + ")",
                       {214, 39, 40});
        }
    svg.save(path.string());
}

void cmd_sqt_density(Run& run)
{
    const auto& sp = run.cfg.sqt;
    const MeasurementSchedule sched = run.cfg.schedule();
    SqtConfig cfg;
    cfg.dt = sp.dt;
    cfg.n_traj = sp.n_traj;
    cfg.seed = run.cfg.seed;
    cfg.theta0 = sp.theta0;
    cfg.kick_substeps = sp.kick_substeps;
    cfg.record_stride = sp.record_stride;
    if (sqt_dt_too_coarse(cfg, sched))
        std::cerr << "warning: dt is coarser than a tenth of the smallest tau_z; weak-measurement updates are "
                     "marginal\n";
    const TrajectoryEnsemble ens = simulate_ensemble(cfg, sp.T, sched);
    const HistogramBins bins{sp.t_bins, sp.theta_bins};
    const PostSelection sel{sp.T, sp.theta_f, sp.window};

    std::vector<std::size_t> everyone(ens.n_traj);
    for (std::size_t j = 0; j < ens.n_traj; ++j) everyone[j] = j;
    const DensityHistogram all = density_of(ens, everyone, bins);
    write_density_csv(all, run.file("density_all.csv").string(), run.file("density_all_edges.csv").string());
    plot_density(all, "Trajectory density, no post-selection", run.file("density_all.svg"));

    const DensityHistogram post = postselect_density(ens, sel, bins);
    run.results["survivors"] = post.survivors;
    run.results["survivor_fraction"] = static_cast<double>(post.survivors) / static_cast<double>(ens.n_traj);
    run.results["max_purity_residual"] = ens.max_purity_residual;
    std::cout << post.survivors << " of " << ens.n_traj << " trajectories survive post-selection\n";
    if (post.empty) {
        std::cerr << "warning: no trajectories survive post-selection; histogram is empty\n";
        run.results["ridges"] = json::array();
        return;
    }
    write_density_csv(post, run.file("density_post.csv").string(), run.file("density_post_edges.csv").string());
    const MlpExtraction mlps = extract_mlps(ens, sel, bins, sp.min_population);
    write_ridges_csv(mlps, run.file("mlp_ridges.csv").string());
    plot_density(post, "Post-selected density", run.file("density_post.svg"), &mlps);
    json ridges = json::array();
    for (const RidgePath& r : mlps.ridges) ridges.push_back({{"winding", r.winding}, {"population", r.population}});
    run.results["ridges"] = ridges;
    run.results["notes"] = mlps.notes;
    for (const auto& note : mlps.notes) std::cout << "note: " << note << '\n';
    std::cout << mlps.ridges.size() << " ridge paths\n";
}

// ---------------------------------------------------------------- kicklimit

void cmd_kicklimit(Run& run)
{
    const auto& kc = run.cfg.kicklimit;
    auto out = open_csv(run.file("kicklimit.csv"));
    out << "gamma,theta1_excited,theta1_ground\n";
    std::vector<double> g, ex, gr;
    const double a = std::log(kc.gamma_min);
    const double b = std::log(kc.gamma_max);
    for (int i = 0; i < kc.points; ++i) {
        const double gamma = std::exp(a + (b - a) * i / (kc.points - 1));
        const KickLimitParams params{gamma, kc.theta_i, kc.theta_f};
        g.push_back(gamma);
        ex.push_back(solve_theta1(params, KickBranch::Excited));
        gr.push_back(solve_theta1(params, KickBranch::Ground));
        out << gamma << ',' << ex.back() << ',' << gr.back() << '\n';
    }
    plot::SvgPlot svg("Optimal intermediate angle, theta_i = " + time_tag(kc.theta_i), "log10 Gamma", "theta_1");
    std::vector<double> lg;
    for (double x : g) lg.push_back(std::log10(x));
    svg.set_range(lg.front(), lg.back(), 0.0, std::numbers::pi);
    svg.polyline(lg, ex, {214, 39, 40}, 2.0, true);
    svg.polyline(lg, gr, {0, 0, 0}, 2.0);
    svg.legend("through excited state", {214, 39, 40});
    svg.legend("through ground state", {0, 0, 0});
    svg.save(run.file("kicklimit.svg").string());
    run.results["points"] = kc.points;
    std::cout << "Gamma = " << g.front() << ": theta1 = " << ex.front() << " / " << gr.front() << "; Gamma = "
              << g.back() << ": theta1 = " << ex.back() << " / " << gr.back() << '\n';
}

// ---------------------------------------------------------------- resonance

void cmd_resonance(Run& run)
{
    const auto& rc = run.cfg.resonance;
    const MeasurementSchedule sched = run.cfg.schedule();
    {
        auto out = open_csv(run.file("fourier_coefficients.csv"));
        out << "n,k,C_nk,C_nk_narrow_kick\n";
        for (int n = 1; n <= rc.n_max; ++n)
            for (int k = -rc.k_max; k <= rc.k_max; ++k)
                out << n << ',' << k << ',' << fourier_coeff_exact(n, k, sched) << ','
                    << fourier_coeff_gaussian(n, k, sched) << '\n';
    }
    const std::vector<double> res = resonant_momenta(sched, 4);
    run.results["resonant_momenta"] = res;
    run.results["collapse_threshold"] = collapse_threshold(sched);

    std::vector<PhasePoint> starts;
    for (int i = 0; i < rc.p0_points; ++i)
        starts.push_back({0.0, rc.p0_min + (rc.p0_max - rc.p0_min) * i / (rc.p0_points - 1)});
    std::vector<FlowResult> ends(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        ends[i] = flow_map(starts[i], 0.0, rc.T, sched, run.cfg.integrator);
    });
    auto out = open_csv(run.file("resonance_deviation.csv"));
    out << "p0,theta_T,deviation,status\n";
    std::vector<double> p, dev;
    double hi = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const double d = ends[i].diverged() ? std::nan("")
                                            : ends[i].point.theta - (starts[i].p * rc.T / sched.tau_x());
        out << starts[i].p << ',' << ends[i].point.theta << ',' << d << ','
            << (ends[i].diverged() ? "diverged" : "completed") << '\n';
        p.push_back(starts[i].p);
        dev.push_back(d);
        if (std::isfinite(d)) hi = std::max(hi, std::abs(d));
    }
    plot::SvgPlot svg("Manifold deviation from the free rotor, T = " + time_tag(rc.T) + " us", "p0",
                      "theta_T - p0 T / tau_x");
    svg.set_range(rc.p0_min, rc.p0_max, -hi * 1.05, hi * 1.05);
    for (double r : res)
        if (r >= rc.p0_min && r <= rc.p0_max) svg.vline(r, {160, 160, 160});
    svg.polyline(p, dev, {0, 0, 0}, 1.0);
    svg.save(run.file("resonance_deviation.svg").string());
    std::cout << "collapse threshold epsilon* = " << collapse_threshold(sched) << "; resonant momenta k pi tau_x / "
              << "period for k = 0.." << 4 << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Optimal-path and quantum-trajectory experiments for a kicked monitored qubit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::string preset;
    std::uint64_t seed = 0;
    int threads = -1;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--threads", threads, "worker threads (default: OPLOC_THREADS, else all cores)");
    std::vector<std::string> preset_names;
    for (const auto& [name, text] : presets()) preset_names.push_back(name);
    app.add_option("--preset", preset, "built-in preset")->check(CLI::IsMember(preset_names));
    app.add_option("--set", overrides, "override one key, e.g. --set schedule.epsilon=0.5");

    using Handler = void (*)(Run&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"portrait", "stroboscopic phase portrait coloured by Lyapunov exponent", cmd_portrait},
        {"manifold", "refined Lagrange manifold, Jacobians and catastrophe counts", cmd_manifold},
        {"multipath", "optimal paths sharing boundary conditions", cmd_multipath},
        {"stretch", "stretching parameters and manifold-averaged Lyapunov exponent", cmd_stretch},
        {"le", "Lyapunov exponent of path triplets", cmd_le},
        {"sqt-density", "post-selected trajectory density and ridge paths", cmd_sqt_density},
        {"kicklimit", "optimal intermediate angle in the projective-kick limit", cmd_kicklimit},
        {"resonance", "Fourier coefficients and resonance-localised manifold deviation", cmd_resonance},
    };
    for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

    CLI11_PARSE(app, argc, argv);

    try {
        Run run;
        if (!preset.empty()) apply_ini(run.cfg, IniFile::parse_string(presets().at(preset), "preset:" + preset));
        if (!config_path.empty()) apply_ini(run.cfg, IniFile::load(config_path));
        if (!overrides.empty()) {
            std::string text;
            for (const auto& o : overrides) {
                const auto dot = o.find('.');
                const auto eq = o.find('=');
                if (dot == std::string::npos || eq == std::string::npos || dot > eq)
                    throw ConfigError("--set expects section.key=value, got '" + o + "'");
                text += "[" + o.substr(0, dot) + "]\n" + o.substr(dot + 1) + "\n";
            }
            apply_ini(run.cfg, IniFile::parse_string(text, "--set"));
        }
        if (!out_dir.empty()) run.cfg.out_dir = out_dir;
        if (app.count("--seed")) run.cfg.seed = seed;
        if (threads >= 0) run.cfg.threads = threads;
        run.cfg.validate();

        set_default_threads(resolve_thread_count(run.cfg.threads));
        run.out = run.cfg.out_dir;
        fs::create_directories(run.out);

        for (const auto& [name, help, fn] : commands)
            if (app.got_subcommand(name)) {
                run.command = name;
                fn(run);
            }
        write_metadata(run);
        std::cout << "outputs written to " << run.out.string() << '\n';
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
