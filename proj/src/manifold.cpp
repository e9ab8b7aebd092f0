#include "oploc/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "oploc/chaos.hpp"
#include "oploc/parallel.hpp"

namespace oploc {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

ManifoldPoint launch(double theta0, double p0, std::span<const double> times, const MeasurementSchedule& sched,
                     const IntegratorConfig& cfg)
{
    const OpPath path = integrate_sampled({theta0, p0}, 0.0, times, sched, cfg);
    ManifoldPoint mp;
    mp.p0 = p0;
    mp.status = path.status;
    mp.t_diverged = path.t_diverged;
    if (path.samples.size() > 1) {
        mp.states.reserve(path.samples.size() - 1);
        for (std::size_t i = 1; i < path.samples.size(); ++i) mp.states.push_back(path.samples[i].point);
    }
    return mp;
}

std::vector<ManifoldPoint> launch_batch(double theta0, const std::vector<double>& p0s, std::span<const double> times,
                                        const MeasurementSchedule& sched, const IntegratorConfig& cfg)
{
    std::vector<ManifoldPoint> out(p0s.size());
    parallel_for(p0s.size(), [&](std::size_t i) { out[i] = launch(theta0, p0s[i], times, sched, cfg); });
    return out;
}

bool needs_split(const ManifoldPoint& a, const ManifoldPoint& b, std::size_t n_times, const RefineConfig& r)
{
    if (b.p0 - a.p0 < 2.0 * r.min_dp0) return false;
    for (std::size_t k = 0; k < n_times; ++k) {
        const bool la = a.live_at(k);
        const bool lb = b.live_at(k);
        if (la && lb) {
            if (std::abs(b.states[k].theta - a.states[k].theta) > r.max_gap_theta) return true;
            if (std::abs(b.states[k].p - a.states[k].p) > r.max_gap_p) return true;
        } else {
            return la != lb;
        }
    }
    return false;
}

void check_times(std::span<const double> times)
{
    if (times.empty()) throw std::invalid_argument("manifold: no record times");
    double last = 0.0;
    for (double t : times) {
        if (!(t > last)) throw std::invalid_argument("manifold: record times must be positive and increasing");
        last = t;
    }
}

double weight(const Manifold& m, std::size_t i)
{
    return 0.5 * (m.points[i + 1].p0 - m.points[i - 1].p0);
}

} // namespace

void RefineConfig::validate() const
{
    if (seed_points < 2) throw std::invalid_argument("refine: seed_points must be >= 2");
    if (!(max_gap_theta > 0.0)) throw std::invalid_argument("refine: max_gap_theta must be > 0");
    if (!(max_gap_p > 0.0)) throw std::invalid_argument("refine: max_gap_p must be > 0");
    if (!(min_dp0 > 0.0)) throw std::invalid_argument("refine: min_dp0 must be > 0");
    if (max_points < seed_points) throw std::invalid_argument("refine: max_points below seed_points");
}

std::size_t Manifold::time_index(double t) const
{
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] == t) return k;
    throw std::out_of_range("manifold: time is not a record time");
}

Manifold propagate(double theta0, MomentumRange range, std::span<const double> times,
                   const MeasurementSchedule& sched, const IntegratorConfig& cfg, const RefineConfig& refine)
{
    if (!(range.hi > range.lo) || !std::isfinite(range.lo) || !std::isfinite(range.hi))
        throw std::invalid_argument("propagate: p0 range must be a nonempty finite interval");
    check_times(times);
    refine.validate();
    cfg.validate();

    Manifold m;
    m.theta0 = theta0;
    m.times.assign(times.begin(), times.end());

    std::vector<double> seed(refine.seed_points);
    for (std::size_t i = 0; i < seed.size(); ++i)
        seed[i] = range.lo + (range.hi - range.lo) * static_cast<double>(i) / static_cast<double>(seed.size() - 1);
    seed.back() = range.hi;
    m.points = launch_batch(theta0, seed, times, sched, cfg);
    m.integrations = seed.size();

    const std::size_t n_times = m.times.size();
    while (m.iterations < refine.max_iterations) {
        std::vector<std::size_t> split_after;
        for (std::size_t i = 0; i + 1 < m.points.size(); ++i)
            if (needs_split(m.points[i], m.points[i + 1], n_times, refine)) split_after.push_back(i);
        if (split_after.empty()) return m;
        if (m.points.size() + split_after.size() > refine.max_points) {
            m.truncated = true;
            split_after.resize(refine.max_points - m.points.size());
            if (split_after.empty()) return m;
        }
        ++m.iterations;

        std::vector<double> mids(split_after.size());
        for (std::size_t j = 0; j < mids.size(); ++j) {
            const std::size_t i = split_after[j];
            mids[j] = 0.5 * (m.points[i].p0 + m.points[i + 1].p0);
        }
        std::vector<ManifoldPoint> fresh = launch_batch(theta0, mids, times, sched, cfg);
        m.integrations += fresh.size();

        std::vector<ManifoldPoint> merged;
        merged.reserve(m.points.size() + fresh.size());
        std::size_t j = 0;
        for (std::size_t i = 0; i < m.points.size(); ++i) {
            merged.push_back(std::move(m.points[i]));
            if (j < split_after.size() && split_after[j] == i) merged.push_back(std::move(fresh[j++]));
        }
        m.points = std::move(merged);
        if (m.truncated) return m;
    }
    for (std::size_t i = 0; i + 1 < m.points.size(); ++i)
        if (needs_split(m.points[i], m.points[i + 1], n_times, refine)) {
            m.truncated = true;
            break;
        }
    return m;
}

Manifold propagate(double theta0, MomentumRange range, double T, const MeasurementSchedule& sched,
                   const IntegratorConfig& cfg, const RefineConfig& refine)
{
    const double times[] = {T};
    return propagate(theta0, range, times, sched, cfg, refine);
}

Manifold resample(const Manifold& like, double theta0, const MeasurementSchedule& sched, const IntegratorConfig& cfg)
{
    Manifold m;
    m.theta0 = theta0;
    m.times = like.times;
    std::vector<double> p0s(like.points.size());
    for (std::size_t i = 0; i < p0s.size(); ++i) p0s[i] = like.points[i].p0;
    m.points = launch_batch(theta0, p0s, m.times, sched, cfg);
    m.integrations = p0s.size();
    m.truncated = like.truncated;
    return m;
}

Manifold mirrored(const Manifold& m)
{
    Manifold out;
    out.theta0 = -m.theta0;
    out.times = m.times;
    out.iterations = m.iterations;
    out.integrations = m.integrations;
    out.truncated = m.truncated;
    out.points.reserve(m.points.size());
    for (auto it = m.points.rbegin(); it != m.points.rend(); ++it) {
        ManifoldPoint mp = *it;
        mp.p0 = -mp.p0;
        for (PhasePoint& s : mp.states) s = {-s.theta, -s.p};
        out.points.push_back(std::move(mp));
    }
    return out;
}

Manifold concat(const Manifold& lower, const Manifold& upper)
{
    if (lower.theta0 != upper.theta0 || lower.times != upper.times)
        throw std::invalid_argument("concat: manifolds differ in theta0 or record times");
    if (!lower.points.empty() && !upper.points.empty() && lower.points.back().p0 > upper.points.front().p0)
        throw std::invalid_argument("concat: p0 ranges overlap");
    Manifold out = lower;
    auto first = upper.points.begin();
    if (!out.points.empty() && first != upper.points.end() && first->p0 == out.points.back().p0) ++first;
    out.points.insert(out.points.end(), first, upper.points.end());
    out.iterations = std::max(lower.iterations, upper.iterations);
    out.integrations = lower.integrations + upper.integrations;
    out.truncated = lower.truncated || upper.truncated;
    return out;
}

std::vector<Segment> live_segments(const Manifold& m, std::size_t k)
{
    std::vector<Segment> out;
    std::size_t i = 0;
    const std::size_t n = m.points.size();
    while (i < n) {
        if (!m.points[i].live_at(k)) {
            ++i;
            continue;
        }
        Segment s{i, i};
        while (s.last + 1 < n && m.points[s.last + 1].live_at(k)) ++s.last;
        out.push_back(s);
        i = s.last + 1;
    }
    return out;
}

JacobianField jacobians(const Manifold& m, std::size_t k)
{
    JacobianField field;
    for (const Segment& s : live_segments(m, k)) {
        if (s.size() < 3) continue;
        std::vector<JacobianEntry> entries;
        entries.reserve(s.size() - 2);
        for (std::size_t i = s.first + 1; i < s.last; ++i) {
            const ManifoldPoint& l = m.points[i - 1];
            const ManifoldPoint& c = m.points[i];
            const ManifoldPoint& r = m.points[i + 1];
            JacobianEntry e;
            e.p0 = c.p0;
            e.j_plus = (r.states[k].theta - c.states[k].theta) / (r.p0 - c.p0);
            e.j_minus = (c.states[k].theta - l.states[k].theta) / (c.p0 - l.p0);
            e.curvature = (e.j_plus - e.j_minus) / (0.5 * (r.p0 - l.p0));
            entries.push_back(e);
        }
        field.segments.push_back(std::move(entries));
    }
    return field;
}

std::size_t catastrophe_count(const Manifold& m, std::size_t k, double theta_noise)
{
    std::size_t count = 0;
    for (const Segment& s : live_segments(m, k)) {
        int prev_sign = 0;
        // Steps below the noise floor are merged with their neighbours until
        // the accumulated change has a trustworthy sign.
        double pending = 0.0;
        for (std::size_t i = s.first; i < s.last; ++i) {
            pending += m.points[i + 1].states[k].theta - m.points[i].states[k].theta;
            if (std::abs(pending) <= theta_noise) continue;
            const int sign = pending > 0.0 ? 1 : -1;
            pending = 0.0;
            if (prev_sign != 0 && sign != prev_sign) ++count;
            prev_sign = sign;
        }
    }
    return count;
}

int winding_number(double theta_T, double theta0)
{
    return static_cast<int>(std::floor((theta_T - theta0) / two_pi));
}

StretchReport stretch_from_manifolds(const Manifold& main, const Manifold& plus, const Manifold& minus)
{
    const std::size_t n = main.points.size();
    if (plus.points.size() != n || minus.points.size() != n || plus.times != main.times || minus.times != main.times)
        throw std::invalid_argument("stretch: auxiliary manifolds must share the main manifold's samples");
    if (n < 3) throw std::invalid_argument("stretch: manifold needs at least three points");

    StretchReport rep;
    rep.times = main.times;
    rep.integrations = main.integrations + plus.integrations + minus.integrations;
    rep.truncated = main.truncated || plus.truncated || minus.truncated;
    rep.length0 = main.points.back().p0 - main.points.front().p0;
    // Weights are fractions of the p0 span, so D_av stays within [0, 2].
    const double span = rep.length0;
    auto frac = [&](std::size_t i) { return weight(main, i) / span; };

    double w_total = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double w = frac(i);
        w_total += w;
        rep.d_av0 += w * (0.5 * bloch_distance(main.theta0, plus.theta0) + 0.5 * bloch_distance(main.theta0, minus.theta0));
    }

    for (std::size_t k = 0; k < main.times.size(); ++k) {
        const double t = main.times[k];
        double length = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const ManifoldPoint& a = main.points[i];
            const ManifoldPoint& b = main.points[i + 1];
            if (!a.live_at(k) || !b.live_at(k)) continue;
            length += std::hypot(b.states[k].theta - a.states[k].theta, b.p0 - a.p0);
        }

        double j_av = 0.0;
        for (const auto& seg : jacobians(main, k).segments)
            for (const JacobianEntry& e : seg) {
                const auto it = std::lower_bound(main.points.begin(), main.points.end(), e.p0,
                                                 [](const ManifoldPoint& p, double v) { return p.p0 < v; });
                const std::size_t i = static_cast<std::size_t>(it - main.points.begin());
                j_av += 0.5 * frac(i) * (std::abs(e.j_plus) + std::abs(e.j_minus));
            }

        // Weighted mean over interior points whose triplet is still live,
        // rescaled to the full weight so that it is comparable with t = 0.
        double d_sum = 0.0;
        double w_live = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const ManifoldPoint& c = main.points[i];
            if (!c.live_at(k) || !plus.points[i].live_at(k) || !minus.points[i].live_at(k)) continue;
            const double w = frac(i);
            w_live += w;
            d_sum += w * (0.5 * bloch_distance(c.states[k].theta, plus.points[i].states[k].theta) +
                          0.5 * bloch_distance(c.states[k].theta, minus.points[i].states[k].theta));
        }
        const double d_av = w_live > 0.0 ? d_sum * w_total / w_live : std::numeric_limits<double>::quiet_NaN();
        const std::size_t n_c = catastrophe_count(main, k);

        rep.length.push_back(length);
        rep.j_av.push_back(j_av);
        rep.n_c.push_back(n_c);
        rep.s1.push_back(std::log(length / rep.length0) / t);
        rep.s2.push_back(std::log(j_av + 1.0) / t);
        rep.s3.push_back(std::log(1.0 + static_cast<double>(n_c)) / t);
        rep.d_av.push_back(d_av);
        rep.lambda_av.push_back(std::log(d_av / rep.d_av0) / t);
    }
    return rep;
}

StretchReport stretch_report(double theta0, MomentumRange range, std::span<const double> times,
                             const MeasurementSchedule& sched, const IntegratorConfig& cfg,
                             const RefineConfig& refine, double delta_theta0)
{
    if (!(delta_theta0 > 0.0)) throw std::invalid_argument("stretch_report: delta_theta0 must be > 0");
    const Manifold main = propagate(theta0, range, times, sched, cfg, refine);
    const Manifold plus = resample(main, theta0 + delta_theta0, sched, cfg);
    const Manifold minus = resample(main, theta0 - delta_theta0, sched, cfg);
    return stretch_from_manifolds(main, plus, minus);
}

StretchReport stretch_report_symmetric(double P, std::span<const double> times, const MeasurementSchedule& sched,
                                       const IntegratorConfig& cfg, const RefineConfig& refine, double delta_theta0)
{
    if (!(P > 0.0)) throw std::invalid_argument("stretch_report_symmetric: P must be > 0");
    if (!(delta_theta0 > 0.0)) throw std::invalid_argument("stretch_report: delta_theta0 must be > 0");
    const Manifold main = propagate(0.0, {0.0, P}, times, sched, cfg, refine);
    const Manifold plus = resample(main, delta_theta0, sched, cfg);
    const Manifold minus = resample(main, -delta_theta0, sched, cfg);
    // Reflection maps the +delta manifold on [0, P] to the -delta one on [-P, 0].
    StretchReport rep = stretch_from_manifolds(concat(mirrored(main), main), concat(mirrored(minus), plus),
                                               concat(mirrored(plus), minus));
    rep.integrations = main.integrations + plus.integrations + minus.integrations;
    return rep;
}

namespace {

struct Bracket {
    std::size_t left = 0;
    double level = 0.0;
};

MultipathSolution bisect_root(const Manifold& m, const Bracket& br, const MeasurementSchedule& sched,
                              const IntegratorConfig& cfg, double tol_theta, double min_dp0)
{
    const std::size_t K = m.final_index();
    const double T = m.final_time();
    double pa = m.points[br.left].p0;
    double pb = m.points[br.left + 1].p0;
    PhasePoint sa = m.points[br.left].states[K];
    PhasePoint sb = m.points[br.left + 1].states[K];
    const bool a_below = sa.theta < br.level;

    auto finish = [&](double p0, PhasePoint s, bool converged) {
        MultipathSolution sol;
        sol.p0 = p0;
        sol.theta_T = s.theta;
        sol.p_T = s.p;
        sol.winding = winding_number(s.theta, m.theta0);
        sol.residual = std::abs(s.theta - br.level);
        sol.converged = converged;
        return sol;
    };

    if (std::abs(sa.theta - br.level) < tol_theta) return finish(pa, sa, true);
    if (std::abs(sb.theta - br.level) < tol_theta) return finish(pb, sb, true);
    for (int it = 0; it < 200 && pb - pa > min_dp0; ++it) {
        const double pm = 0.5 * (pa + pb);
        const FlowResult r = flow_map({m.theta0, pm}, 0.0, T, sched, cfg);
        if (r.diverged()) break;
        if (std::abs(r.point.theta - br.level) < tol_theta) return finish(pm, r.point, true);
        if ((r.point.theta < br.level) == a_below) {
            pa = pm;
            sa = r.point;
        } else {
            pb = pm;
            sb = r.point;
        }
    }
    return std::abs(sa.theta - br.level) <= std::abs(sb.theta - br.level) ? finish(pa, sa, false)
                                                                          : finish(pb, sb, false);
}

template <class Levels>
std::vector<MultipathSolution> solve_brackets(const Manifold& m, Levels&& levels_in, const MeasurementSchedule& sched,
                                              const IntegratorConfig& cfg, double tol_theta, double min_dp0)
{
    if (!(tol_theta > 0.0)) throw std::invalid_argument("find_multipaths: tol_theta must be > 0");
    const std::size_t K = m.final_index();
    std::vector<Bracket> brackets;
    for (std::size_t i = 0; i + 1 < m.points.size(); ++i) {
        const ManifoldPoint& a = m.points[i];
        const ManifoldPoint& b = m.points[i + 1];
        if (!a.live_at(K) || !b.live_at(K)) continue;
        // Levels in the half-open interval (min, max] so that each crossing
        // belongs to exactly one pair.
        for (double level : levels_in(std::min(a.states[K].theta, b.states[K].theta),
                                      std::max(a.states[K].theta, b.states[K].theta)))
            brackets.push_back({i, level});
    }
    std::vector<MultipathSolution> out(brackets.size());
    parallel_for(brackets.size(),
                 [&](std::size_t j) { out[j] = bisect_root(m, brackets[j], sched, cfg, tol_theta, min_dp0); });
    return out;
}

} // namespace

std::vector<MultipathSolution> find_multipaths(const Manifold& m, double target_mod_2pi,
                                               const MeasurementSchedule& sched, const IntegratorConfig& cfg,
                                               double tol_theta, double min_dp0)
{
    if (!(target_mod_2pi >= 0.0 && target_mod_2pi < two_pi))
        throw std::invalid_argument("find_multipaths: target must lie in [0, 2 pi)");
    auto levels = [target_mod_2pi](double lo, double hi) {
        std::vector<double> out;
        for (double k = std::floor((lo - target_mod_2pi) / two_pi); ; k += 1.0) {
            const double level = target_mod_2pi + two_pi * k;
            if (level > hi) break;
            if (level > lo) out.push_back(level);
        }
        return out;
    };
    return solve_brackets(m, levels, sched, cfg, tol_theta, min_dp0);
}

std::vector<MultipathSolution> find_multipaths_unwrapped(const Manifold& m, double target_unwrapped,
                                                         const MeasurementSchedule& sched,
                                                         const IntegratorConfig& cfg, double tol_theta,
                                                         double min_dp0)
{
    auto levels = [target_unwrapped](double lo, double hi) {
        std::vector<double> out;
        if (target_unwrapped > lo && target_unwrapped <= hi) out.push_back(target_unwrapped);
        return out;
    };
    return solve_brackets(m, levels, sched, cfg, tol_theta, min_dp0);
}

std::vector<MultipathSolution> find_multipaths(double theta0, double target_mod_2pi, double T, MomentumRange range,
                                               const MeasurementSchedule& sched, const IntegratorConfig& cfg,
                                               const RefineConfig& refine, double tol_theta)
{
    const Manifold m = propagate(theta0, range, T, sched, cfg, refine);
    return find_multipaths(m, target_mod_2pi, sched, cfg, tol_theta, refine.min_dp0);
}

} // namespace oploc
