#include "oploc/chaos.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "oploc/parallel.hpp"

namespace oploc {

namespace {

const PathSample* sample_at(const OpPath& path, double t)
{
    for (const PathSample& s : path.samples)
        if (s.t == t) return &s;
    return nullptr;
}

double theta_at(const OpPath& path, double t, const char* name)
{
    const PathSample* s = sample_at(path, t);
    if (!s) throw std::out_of_range(std::string("triplet: ") + name + " path is not live at t = " + std::to_string(t));
    return s->point.theta;
}

} // namespace

double bloch_distance(double theta_a, double theta_b)
{
    return 2.0 * std::abs(std::sin(0.5 * (theta_a - theta_b)));
}

PathTriplet make_triplet(PhasePoint start, std::span<const double> times, const MeasurementSchedule& sched,
                         const IntegratorConfig& cfg, double delta_theta0)
{
    if (!(delta_theta0 > 0.0)) throw std::invalid_argument("make_triplet: delta_theta0 must be > 0");
    PathTriplet trip;
    trip.delta_theta0 = delta_theta0;
    trip.main = integrate_sampled(start, 0.0, times, sched, cfg);
    trip.plus = integrate_sampled({start.theta + delta_theta0, start.p}, 0.0, times, sched, cfg);
    trip.minus = integrate_sampled({start.theta - delta_theta0, start.p}, 0.0, times, sched, cfg);
    return trip;
}

double triplet_distance(const PathTriplet& trip, double t)
{
    const double th = theta_at(trip.main, t, "main");
    const double tp = theta_at(trip.plus, t, "plus");
    const double tm = theta_at(trip.minus, t, "minus");
    return 0.5 * bloch_distance(th, tp) + 0.5 * bloch_distance(th, tm);
}

double lyapunov(const PathTriplet& trip, double t)
{
    if (!(t > 0.0)) throw std::invalid_argument("lyapunov: t must be > 0");
    const double t0 = trip.main.samples.empty() ? 0.0 : trip.main.samples.front().t;
    return std::log(triplet_distance(trip, t) / triplet_distance(trip, t0)) / (t - t0);
}

LyapunovSeries lyapunov_series(const PathTriplet& trip)
{
    LyapunovSeries out;
    if (trip.main.samples.empty() || trip.plus.samples.empty() || trip.minus.samples.empty()) return out;
    const double t0 = trip.main.samples.front().t;
    const double d0 = triplet_distance(trip, t0);
    const std::size_t n = std::min({trip.main.samples.size(), trip.plus.samples.size(), trip.minus.samples.size()});
    for (std::size_t i = 1; i < n; ++i) {
        const double t = trip.main.samples[i].t;
        const double d = triplet_distance(trip, t);
        out.times.push_back(t);
        out.d.push_back(d);
        out.lambda.push_back(std::log(d / d0) / (t - t0));
    }
    return out;
}

StroboscopicPortrait portrait(std::span<const PhasePoint> ics, int n_strobes, const MeasurementSchedule& sched,
                              const IntegratorConfig& cfg, double delta_theta0)
{
    if (n_strobes < 1) throw std::invalid_argument("portrait: n_strobes must be >= 1");
    std::vector<double> strobes(static_cast<std::size_t>(n_strobes));
    for (int n = 1; n <= n_strobes; ++n) strobes[static_cast<std::size_t>(n - 1)] = n * sched.period();

    std::vector<std::vector<PortraitRecord>> per_ic(ics.size());
    parallel_for(ics.size(), [&](std::size_t i) {
        const PhasePoint ic = ics[i];
        const PathTriplet trip = make_triplet(ic, strobes, sched, cfg, delta_theta0);
        const LyapunovSeries series = lyapunov_series(trip);
        auto& rows = per_ic[i];
        for (std::size_t j = 0; j < series.times.size(); ++j) {
            const PhasePoint pt = trip.main.samples[j + 1].point;
            PortraitRecord r;
            r.theta0 = ic.theta;
            r.p0 = ic.p;
            r.n = static_cast<int>(j + 1);
            r.theta_mod_2pi = std::fmod(pt.theta, 2.0 * std::numbers::pi);
            if (r.theta_mod_2pi < 0.0) r.theta_mod_2pi += 2.0 * std::numbers::pi;
            r.p = pt.p;
            r.lambda = series.lambda[j];
            rows.push_back(r);
        }
        if (series.times.size() < strobes.size()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            rows.push_back({ic.theta, ic.p, static_cast<int>(series.times.size() + 1), nan, nan, nan,
                            PathStatus::Diverged});
        }
    });

    StroboscopicPortrait out;
    out.period = sched.period();
    out.n_strobes = n_strobes;
    for (auto& rows : per_ic) out.records.insert(out.records.end(), rows.begin(), rows.end());
    return out;
}

void write_portrait_csv(const StroboscopicPortrait& portrait, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.precision(17);
    out << "theta0,p0,n,theta_mod_2pi,p,lambda_MHz,status\n";
    for (const PortraitRecord& r : portrait.records)
        out << r.theta0 << ',' << r.p0 << ',' << r.n << ',' << r.theta_mod_2pi << ',' << r.p << ',' << r.lambda
            << ',' << (r.status == PathStatus::Completed ? "completed" : "diverged") << '\n';
}

} // namespace oploc
