#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "oploc/model.hpp"

namespace oploc {

/// Raised when adaptive quadrature cannot reach the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}
    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Fourier coefficient C_{n,k} of g^n(t) over one kick period, with time
/// measured in units of the period:
///   C_{n,k} = 2 (-1)^k \int_0^{1/2} exp(-n x^2 / (2 s^2)) cos(2 pi k x) dx,
/// s = tau_m / period. Evaluated by adaptive Gauss-Kronrod quadrature in
/// extended precision. Throws std::invalid_argument for n < 1 and
/// QuadratureError on non-convergence.
double fourier_coeff_exact(int n, int k, const MeasurementSchedule& sched, double rel_tol = 1e-12);

/// Narrow-kick limit of the same coefficient (integral extended to infinity):
/// (-1)^k s sqrt(2 pi / n) exp(-2 k^2 pi^2 s^2 / n).
double fourier_coeff_gaussian(int n, int k, const MeasurementSchedule& sched);

/// Truncated Fourier reconstruction of H* with the coefficients cached.
class FourierHamiltonian {
public:
    FourierHamiltonian(const MeasurementSchedule& sched, int n_max, int k_max);
    double operator()(PhasePoint pt, double t) const;

private:
    MeasurementSchedule sched_;
    int n_max_;
    int k_max_;
    std::vector<double> coeffs_;
};

/// Truncated Fourier reconstruction of H*: orders n = 1..n_max in epsilon and
/// harmonics |k| <= k_max in time. Only the l = 0, +-2 angular harmonics are
/// non-zero.
double h_star_fourier(PhasePoint pt, double t, const MeasurementSchedule& sched, int n_max, int k_max);

/// Momenta p0 = k pi tau_x / period, k = -k_max..k_max, at which the
/// unperturbed rotor frequency resonates with the kicks (l = +-2 family).
std::vector<double> resonant_momenta(const MeasurementSchedule& sched, int k_max);

/// Kick strength above which 2 min(tau_z) drops below tau_m:
/// epsilon* = 1 - tau_m / tau_x.
double collapse_threshold(const MeasurementSchedule& sched);

} // namespace oploc
