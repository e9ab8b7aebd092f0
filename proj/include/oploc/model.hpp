#pragma once

// Stochastic Hamiltonian for a qubit under simultaneous x and z monitoring,
// with the z-measurement strength periodically kicked.
//
// Units: times in microseconds, rates in MHz. Angles are unwrapped radians.

namespace oploc {

/// Kicked two-measurement configuration. The z measurement time follows
/// tau_z(t) = tau_x (1 - epsilon g(t)) with a Gaussian envelope g of width
/// tau_m peaking at the middle of every period.
class MeasurementSchedule {
public:
    /// Throws std::invalid_argument unless tau_x, tau_m, period > 0 and
    /// 0 <= epsilon < 1.
    MeasurementSchedule(double tau_x, double epsilon, double tau_m, double period);

    double tau_x() const noexcept { return tau_x_; }
    double epsilon() const noexcept { return epsilon_; }
    double tau_m() const noexcept { return tau_m_; }
    double period() const noexcept { return period_; }
    /// Kick amplitude A = epsilon * tau_x.
    double amplitude() const noexcept { return epsilon_ * tau_x_; }
    double gamma_x() const noexcept { return 1.0 / tau_x_; }

    double envelope(double t) const noexcept;
    double tau_z(double t) const noexcept { return tau_x_ * (1.0 - epsilon_ * envelope(t)); }
    double gamma_z(double t) const noexcept { return 1.0 / tau_z(t); }

    /// Time of the kick peak belonging to period index n: (n + 1/2) * period.
    double kick_center(long n) const noexcept { return (static_cast<double>(n) + 0.5) * period_; }

private:
    double tau_x_;
    double epsilon_;
    double tau_m_;
    double period_;
};

/// The schedule shared by the built-in presets: tau_x = period = 1 us,
/// tau_m = 25 ns.
MeasurementSchedule standard_schedule(double epsilon);

struct PhasePoint {
    double theta = 0.0;
    double p = 0.0;
};

struct Readouts {
    double r_x = 0.0;
    double r_z = 0.0;
};

struct HamiltonianCoefficients {
    double a = 0.0;
    double b = 0.0;
};

struct HamiltonianGradient {
    double d_theta = 0.0;
    double d_p = 0.0;
};

double kick_envelope(double t, const MeasurementSchedule& sched);
double tau_z_of_t(double t, const MeasurementSchedule& sched);

HamiltonianCoefficients coeffs_ab(double theta, double t, const MeasurementSchedule& sched);

/// H*(theta, p, t) = a (p^2 - 1) + b p, the readout-optimised Hamiltonian.
double h_star(PhasePoint pt, double t, const MeasurementSchedule& sched);
HamiltonianGradient h_star_grad(PhasePoint pt, double t, const MeasurementSchedule& sched);

Readouts optimal_readouts(PhasePoint pt);

/// State drift F: d(theta)/dt for a given pair of readouts.
double f_drift(double theta, Readouts r, double t, const MeasurementSchedule& sched);
/// Readout log-probability rate G.
double g_cost(double theta, Readouts r, double t, const MeasurementSchedule& sched);

/// Full stochastic Hamiltonian p F + G before readout optimisation.
double stochastic_hamiltonian(PhasePoint pt, Readouts r, double t, const MeasurementSchedule& sched);

/// Analytic gradient of p F + G with respect to (r_x, r_z). Vanishes at the
/// optimal readouts.
Readouts readout_gradient(PhasePoint pt, Readouts r, double t, const MeasurementSchedule& sched);

} // namespace oploc
