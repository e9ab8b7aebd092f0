#include "oploc/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace oploc {

MeasurementSchedule::MeasurementSchedule(double tau_x, double epsilon, double tau_m, double period)
    : tau_x_(tau_x), epsilon_(epsilon), tau_m_(tau_m), period_(period)
{
    if (!(tau_x > 0.0) || !std::isfinite(tau_x))
        throw std::invalid_argument("MeasurementSchedule: tau_x must be positive, got " + std::to_string(tau_x));
    if (!(tau_m > 0.0) || !std::isfinite(tau_m))
        throw std::invalid_argument("MeasurementSchedule: tau_m must be positive, got " + std::to_string(tau_m));
    if (!(period > 0.0) || !std::isfinite(period))
        throw std::invalid_argument("MeasurementSchedule: period must be positive, got " + std::to_string(period));
    // epsilon = 1 would make tau_z vanish at the kick peak.
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw std::invalid_argument("MeasurementSchedule: epsilon must lie in [0, 1), got " + std::to_string(epsilon));
}

double MeasurementSchedule::envelope(double t) const noexcept
{
    double phase = std::fmod(t, period_);
    if (phase < 0.0) phase += period_;
    const double u = (phase - 0.5 * period_) / tau_m_;
    return std::exp(-0.5 * u * u);
}

MeasurementSchedule standard_schedule(double epsilon)
{
    return MeasurementSchedule(1.0, epsilon, 0.025, 1.0);
}

double kick_envelope(double t, const MeasurementSchedule& sched)
{
    return sched.envelope(t);
}

double tau_z_of_t(double t, const MeasurementSchedule& sched)
{
    return sched.tau_z(t);
}

HamiltonianCoefficients coeffs_ab(double theta, double t, const MeasurementSchedule& sched)
{
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double gx = sched.gamma_x();
    const double gz = sched.gamma_z(t);
    return {0.5 * (s * s * gz + c * c * gx), s * c * (gx - gz)};
}

double h_star(PhasePoint pt, double t, const MeasurementSchedule& sched)
{
    const auto [a, b] = coeffs_ab(pt.theta, t, sched);
    return a * (pt.p * pt.p - 1.0) + b * pt.p;
}

HamiltonianGradient h_star_grad(PhasePoint pt, double t, const MeasurementSchedule& sched)
{
    const double s = std::sin(pt.theta);
    const double c = std::cos(pt.theta);
    const double gx = sched.gamma_x();
    const double gz = sched.gamma_z(t);
    const double a = 0.5 * (s * s * gz + c * c * gx);
    const double b = s * c * (gx - gz);
    // da/dtheta = s c (gz - gx), db/dtheta = (c^2 - s^2)(gx - gz)
    const double da = s * c * (gz - gx);
    const double db = (c * c - s * s) * (gx - gz);
    return {da * (pt.p * pt.p - 1.0) + db * pt.p, 2.0 * a * pt.p + b};
}

Readouts optimal_readouts(PhasePoint pt)
{
    const double s = std::sin(pt.theta);
    const double c = std::cos(pt.theta);
    return {s + pt.p * c, c - pt.p * s};
}

double f_drift(double theta, Readouts r, double t, const MeasurementSchedule& sched)
{
    return r.r_x * sched.gamma_x() * std::cos(theta) - r.r_z * sched.gamma_z(t) * std::sin(theta);
}

double g_cost(double theta, Readouts r, double t, const MeasurementSchedule& sched)
{
    const double x_term = r.r_x * r.r_x - 2.0 * r.r_x * std::sin(theta) + 1.0;
    const double z_term = r.r_z * r.r_z - 2.0 * r.r_z * std::cos(theta) + 1.0;
    return -0.5 * (x_term * sched.gamma_x() + z_term * sched.gamma_z(t));
}

double stochastic_hamiltonian(PhasePoint pt, Readouts r, double t, const MeasurementSchedule& sched)
{
    return pt.p * f_drift(pt.theta, r, t, sched) + g_cost(pt.theta, r, t, sched);
}

Readouts readout_gradient(PhasePoint pt, Readouts r, double t, const MeasurementSchedule& sched)
{
    const double s = std::sin(pt.theta);
    const double c = std::cos(pt.theta);
    return {sched.gamma_x() * (pt.p * c - (r.r_x - s)),
            sched.gamma_z(t) * (-pt.p * s - (r.r_z - c))};
}

} // namespace oploc
