#include "oploc/integrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace oploc {

void IntegratorConfig::validate() const
{
    if (!(dt > 0.0)) throw std::invalid_argument("integrator: dt must be positive");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("integrator: tolerances must be positive");
    if (!(p_max > 0.0)) throw std::invalid_argument("integrator: p_max must be positive");
    if (max_steps == 0) throw std::invalid_argument("integrator: max_steps must be positive");
    if (kick_min_steps < 1) throw std::invalid_argument("integrator: kick_min_steps must be >= 1");
    if (!(kick_half_width > 0.0)) throw std::invalid_argument("integrator: kick_half_width must be positive");
}

std::string to_string(IntegrationMethod m)
{
    return m == IntegrationMethod::RK4 ? "rk4" : "bulirsch-stoer";
}

IntegrationMethod parse_integration_method(const std::string& name)
{
    if (name == "rk4") return IntegrationMethod::RK4;
    if (name == "bulirsch-stoer" || name == "bs") return IntegrationMethod::BulirschStoer;
    throw std::invalid_argument("unknown integration method '" + name + "' (expected rk4 or bulirsch-stoer)");
}

PhaseVelocity hamilton_rhs(PhasePoint pt, double t, const MeasurementSchedule& sched)
{
    const auto g = h_star_grad(pt, t, sched);
    return {g.d_p, -g.d_theta};
}

namespace {

using State = std::array<double, 2>;

// Vector field, optionally frozen at a fixed time.
struct Field {
    const MeasurementSchedule& sched;
    double frozen_time;
};

State rhs(const State& y, double t, const Field& field)
{
    const double te = std::isfinite(field.frozen_time) ? field.frozen_time : t;
    const auto v = hamilton_rhs({y[0], y[1]}, te, field.sched);
    return {v.theta_dot, v.p_dot};
}

bool finite(const State& y)
{
    return std::isfinite(y[0]) && std::isfinite(y[1]);
}

State rk4_step(const State& y, const State& f0, double t, double h, const Field& field)
{
    const State k1 = f0;
    const State k2 = rhs({y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]}, t + 0.5 * h, field);
    const State k3 = rhs({y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]}, t + 0.5 * h, field);
    const State k4 = rhs({y[0] + h * k3[0], y[1] + h * k3[1]}, t + h, field);
    return {y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
}

// Gragg's modified midpoint rule over a macro step h with n substeps.
State modified_midpoint(const State& y, const State& f0, double t, double h, int n,
                        const Field& field)
{
    const double sub = h / n;
    State prev = y;
    State cur = {y[0] + sub * f0[0], y[1] + sub * f0[1]};
    for (int m = 1; m < n; ++m) {
        const State f = rhs(cur, t + m * sub, field);
        const State next = {prev[0] + 2.0 * sub * f[0], prev[1] + 2.0 * sub * f[1]};
        prev = cur;
        cur = next;
    }
    const State f = rhs(cur, t + h, field);
    return {0.5 * (cur[0] + prev[0] + sub * f[0]), 0.5 * (cur[1] + prev[1] + sub * f[1])};
}

constexpr int kMaxColumns = 8;
constexpr std::array<int, kMaxColumns> kSubsteps = {2, 4, 6, 8, 10, 12, 14, 16};

struct BsAttempt {
    bool accepted = false;
    State y{};
    double error = 0.0;
    int column = 0;
};

BsAttempt bulirsch_stoer_try(const State& y, const State& f0, double t, double h, const IntegratorConfig& cfg,
                             const Field& field)
{
    std::array<std::array<State, kMaxColumns>, kMaxColumns> table{};
    BsAttempt out;
    for (int k = 0; k < kMaxColumns; ++k) {
        table[k][0] = modified_midpoint(y, f0, t, h, kSubsteps[k], field);
        for (int j = 1; j <= k; ++j) {
            const double ratio = static_cast<double>(kSubsteps[k]) / kSubsteps[k - j];
            const double denom = ratio * ratio - 1.0;
            for (int c = 0; c < 2; ++c)
                table[k][j][c] = table[k][j - 1][c] + (table[k][j - 1][c] - table[k - 1][j - 1][c]) / denom;
        }
        if (k == 0) continue;
        double err = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::fabs(y[c]), std::fabs(table[k][k][c]));
            err = std::max(err, std::fabs(table[k][k][c] - table[k][k - 1][c]) / scale);
        }
        if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
        out.error = err;
        out.column = k;
        if (err <= 1.0) {
            out.accepted = true;
            out.y = table[k][k];
            return out;
        }
    }
    return out;
}

// Drives the state through time, landing exactly on requested targets and
// crossing each kick window with a capped step size.
class Propagator {
public:
    Propagator(const MeasurementSchedule& sched, const IntegratorConfig& cfg, PhasePoint start, double t0)
        : sched_(sched), field_{sched, cfg.frozen_time}, cfg_(cfg), start_(start), t0_(t0),
          y_{start.theta, start.p}, t_(t0), h_(cfg.dt)
    {
        cfg.validate();
        kicked_ = sched.epsilon() > 0.0 && !std::isfinite(cfg.frozen_time);
        window_ = cfg.kick_half_width * sched.tau_m();
        kick_step_ = 2.0 * window_ / cfg.kick_min_steps;
        if (!finite(y_) || std::fabs(y_[1]) > cfg_.p_max) {
            diverged_ = true;
            t_diverged_ = t0;
        }
    }

    bool diverged() const noexcept { return diverged_; }
    double time() const noexcept { return t_; }
    PhasePoint point() const noexcept { return {y_[0], y_[1]}; }
    std::size_t steps() const noexcept { return steps_; }

    template <class OnStep>
    void advance_to(double target, OnStep&& on_step)
    {
        const double dir = target >= t_ ? 1.0 : -1.0;
        const double snap = 1e-13 * std::max(1.0, std::fabs(target));
        while (!diverged_ && dir * (target - t_) > snap) {
            const double remaining = dir * (target - t_);
            double h = std::min(h_, remaining);
            double boundary = 0.0;
            if (kicked_) {
                const auto [inside, dist] = window_distance(dir);
                if (inside) h = std::min(h, kick_step_);
                if (dist < h) {
                    h = dist;
                    boundary = t_ + dir * dist;
                }
            }
            const bool lands_on_target = h >= remaining;
            if (!take_step(dir * h)) continue;
            if (lands_on_target && !diverged_) t_ = target;
            else if (boundary != 0.0 && !diverged_ && std::fabs(t_ - boundary) < snap) t_ = boundary;
            on_step(t_, point());
        }
        if (!diverged_) t_ = target;
    }

private:
    // Returns whether t_ lies inside a kick window (for motion in direction
    // dir) and the distance to the next window edge.
    std::pair<bool, double> window_distance(double dir) const
    {
        const double period = sched_.period();
        if (2.0 * window_ >= period) return {true, std::numeric_limits<double>::infinity()};
        // Kick centers (n + 1/2) period are symmetric under t -> -t.
        const double s = dir * t_;
        const double tol = 1e-12 * period;
        const double n_center = std::floor(s / period);
        const double center = (n_center + 0.5) * period;
        if (s >= center - window_ - tol && s < center + window_ - tol)
            return {true, std::max(center + window_ - s, 0.0)};
        const double next_center = s < center ? center : center + period;
        return {false, std::max(next_center - window_ - s, 0.0)};
    }

    bool take_step(double h)
    {
        if (++steps_ > cfg_.max_steps) {
            std::ostringstream msg;
            msg << "integrator exceeded max_steps=" << cfg_.max_steps << " for initial condition theta0="
                << start_.theta << ", p0=" << start_.p << ", t0=" << t0_ << " (stopped at t=" << t_ << ")";
            throw IntegrationError(msg.str());
        }
        const State f0 = rhs(y_, t_, field_);
        if (cfg_.method == IntegrationMethod::RK4) {
            const State next = rk4_step(y_, f0, t_, h, field_);
            return accept(next, h);
        }
        const BsAttempt attempt = bulirsch_stoer_try(y_, f0, t_, h, cfg_, field_);
        const double mag = std::fabs(h);
        if (!attempt.accepted) {
            double shrink = 0.25;
            if (std::isfinite(attempt.error) && attempt.error > 0.0)
                shrink = std::clamp(0.94 * std::pow(0.65 / attempt.error, 1.0 / (2 * attempt.column + 1)), 0.05, 0.5);
            h_ = mag * shrink;
            if (h_ < 1e-14 * std::max(1.0, std::fabs(t_))) {
                // The step collapsed: treat as blow-up of the state.
                diverged_ = true;
                t_diverged_ = t_;
            }
            return false;
        }
        double grow = 4.0;
        if (attempt.error > 0.0)
            grow = std::clamp(0.94 * std::pow(0.65 / attempt.error, 1.0 / (2 * attempt.column + 1)), 0.2, 4.0);
        // A step clipped by a target or window edge keeps the larger suggestion.
        h_ = mag < h_ ? std::max(h_, mag * grow) : mag * grow;
        return accept(attempt.y, h);
    }

    bool accept(const State& next, double h)
    {
        if (!finite(next) || std::fabs(next[1]) > cfg_.p_max) {
            diverged_ = true;
            t_diverged_ = t_ + h;
            t_ += h;
            return true;
        }
        y_ = next;
        t_ += h;
        return true;
    }

    const MeasurementSchedule& sched_;
    Field field_;
    const IntegratorConfig& cfg_;
    PhasePoint start_;
    double t0_;
    State y_;
    double t_;
    double h_;
    bool kicked_ = false;
    double window_ = 0.0;
    double kick_step_ = 0.0;
    bool diverged_ = false;
    double t_diverged_ = std::numeric_limits<double>::quiet_NaN();
    std::size_t steps_ = 0;

public:
    double t_diverged() const noexcept { return t_diverged_; }
};

PathSample make_sample(double t, PhasePoint pt, const MeasurementSchedule& sched)
{
    return {t, pt, hamilton_rhs(pt, t, sched)};
}

} // namespace

PhasePoint OpPath::at(double t) const
{
    if (samples.empty() || t < samples.front().t || t > samples.back().t)
        throw std::out_of_range("OpPath::at: time outside sampled interval");
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [](const PathSample& s, double v) { return s.t < v; });
    if (it->t == t) return it->point;
    const PathSample& b = *it;
    const PathSample& a = *(it - 1);
    const double h = b.t - a.t;
    const double u = (t - a.t) / h;
    const double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
    const double h10 = u * (1.0 - u) * (1.0 - u);
    const double h01 = u * u * (3.0 - 2.0 * u);
    const double h11 = u * u * (u - 1.0);
    return {h00 * a.point.theta + h10 * h * a.velocity.theta_dot + h01 * b.point.theta + h11 * h * b.velocity.theta_dot,
            h00 * a.point.p + h10 * h * a.velocity.p_dot + h01 * b.point.p + h11 * h * b.velocity.p_dot};
}

OpPath integrate(PhasePoint start, double t0, double t_end, const MeasurementSchedule& sched,
                 const IntegratorConfig& cfg)
{
    if (!(t_end > t0)) throw std::invalid_argument("integrate: t_end must exceed t0");
    Propagator prop(sched, cfg, start, t0);
    OpPath path;
    if (prop.diverged()) {
        path.status = PathStatus::Diverged;
        path.t_diverged = t0;
        return path;
    }
    path.samples.push_back(make_sample(t0, start, sched));
    prop.advance_to(t_end, [&](double t, PhasePoint pt) {
        if (!prop.diverged()) path.samples.push_back(make_sample(t, pt, sched));
    });
    path.steps = prop.steps();
    if (prop.diverged()) {
        path.status = PathStatus::Diverged;
        path.t_diverged = prop.t_diverged();
    }
    return path;
}

OpPath integrate_sampled(PhasePoint start, double t0, std::span<const double> sample_times,
                         const MeasurementSchedule& sched, const IntegratorConfig& cfg)
{
    Propagator prop(sched, cfg, start, t0);
    OpPath path;
    if (prop.diverged()) {
        path.status = PathStatus::Diverged;
        path.t_diverged = t0;
        return path;
    }
    path.samples.reserve(sample_times.size() + 1);
    path.samples.push_back(make_sample(t0, start, sched));
    double last = t0;
    for (double t : sample_times) {
        if (!(t > last)) throw std::invalid_argument("integrate_sampled: sample times must increase past t0");
        prop.advance_to(t, [](double, PhasePoint) {});
        if (prop.diverged()) break;
        path.samples.push_back(make_sample(t, prop.point(), sched));
        last = t;
    }
    path.steps = prop.steps();
    if (prop.diverged()) {
        path.status = PathStatus::Diverged;
        path.t_diverged = prop.t_diverged();
    }
    return path;
}

FlowResult flow_map(PhasePoint start, double t0, double t_end, const MeasurementSchedule& sched,
                    const IntegratorConfig& cfg)
{
    Propagator prop(sched, cfg, start, t0);
    FlowResult out;
    if (!prop.diverged()) prop.advance_to(t_end, [](double, PhasePoint) {});
    out.steps = prop.steps();
    if (prop.diverged()) {
        out.status = PathStatus::Diverged;
        out.t_reached = std::isnan(prop.t_diverged()) ? t0 : prop.t_diverged();
        out.point = prop.point();
    } else {
        out.point = prop.point();
        out.t_reached = t_end;
    }
    return out;
}

} // namespace oploc
