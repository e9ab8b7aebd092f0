#include "oploc/resonance.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oploc {

namespace {

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
constexpr std::array<long double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
    0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
    0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
    0.207784955007898467600689403773245L, 0.000000000000000000000000000000000L};
constexpr std::array<long double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
    0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
    0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
    0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
// Gauss weights attach to the odd Kronrod nodes (indices 1, 3, 5, 7).
constexpr std::array<long double, 4> kGaussWeights = {
    0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
    0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};

struct Panel {
    long double value;
    long double error;
    long double magnitude; // integral of |f|, sets the rounding floor
};

template <class F>
Panel gauss_kronrod15(const F& f, long double a, long double b)
{
    const long double mid = 0.5L * (a + b);
    const long double half = 0.5L * (b - a);
    const long double fm = f(mid);
    long double kronrod = kKronrodWeights[7] * fm;
    long double gauss = kGaussWeights[3] * fm;
    long double magnitude = kKronrodWeights[7] * std::fabs(fm);
    for (int i = 0; i < 7; ++i) {
        const long double dx = half * kKronrodNodes[i];
        const long double lo = f(mid - dx), hi = f(mid + dx);
        kronrod += kKronrodWeights[i] * (lo + hi);
        magnitude += kKronrodWeights[i] * (std::fabs(lo) + std::fabs(hi));
        if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (lo + hi);
    }
    const long double h = std::fabs(half);
    return {kronrod * half, std::fabs((kronrod - gauss) * half), magnitude * h};
}

struct Accuracy {
    long double error = 0.0L;
    long double rounding = 0.0L;
};

template <class F>
long double integrate_adaptive(const F& f, long double a, long double b, long double abs_tol, int depth,
                               Accuracy& acc)
{
    const Panel whole = gauss_kronrod15(f, a, b);
    const long double rounding = 50.0L * std::numeric_limits<long double>::epsilon() * whole.magnitude;
    // Splitting cannot beat the rounding floor of the panel sum.
    if (whole.error <= abs_tol || whole.error <= rounding || depth == 0) {
        acc.error += whole.error;
        acc.rounding += rounding;
        return whole.value;
    }
    const long double mid = 0.5L * (a + b);
    return integrate_adaptive(f, a, mid, 0.5L * abs_tol, depth - 1, acc)
         + integrate_adaptive(f, mid, b, 0.5L * abs_tol, depth - 1, acc);
}

} // namespace

double fourier_coeff_gaussian(int n, int k, const MeasurementSchedule& sched)
{
    if (n < 1) throw std::invalid_argument("fourier_coeff_gaussian: n must be >= 1");
    const double s = sched.tau_m() / sched.period();
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double kk = static_cast<double>(k);
    return sign * s * std::sqrt(2.0 * std::numbers::pi / n) *
           std::exp(-2.0 * kk * kk * std::numbers::pi * std::numbers::pi * s * s / n);
}

double fourier_coeff_exact(int n, int k, const MeasurementSchedule& sched, double rel_tol)
{
    if (n < 1) throw std::invalid_argument("fourier_coeff_exact: n must be >= 1");
    const long double width = static_cast<long double>(sched.tau_m()) / sched.period();
    const long double scale = static_cast<long double>(n) / (2.0L * width * width);
    const long double freq = 2.0L * std::numbers::pi_v<long double> * k;
    auto integrand = [&](long double x) { return std::exp(-scale * x * x) * std::cos(freq * x); };

    // Tolerance is set relative to the Gaussian-limit magnitude of the
    // coefficient; the oscillating tail would otherwise never meet a purely
    // relative target for large |k|.
    const long double sigma = width / std::sqrt(static_cast<long double>(n));
    const long double envelope_scale = sigma * std::sqrt(2.0L * std::numbers::pi_v<long double>);
    const long double decay = std::exp(-0.5L * freq * freq * sigma * sigma);
    const long double target = std::max(static_cast<long double>(rel_tol) * envelope_scale * decay, 1e-30L);

    // Split at the edge of the Gaussian core so panels resolve it.
    const long double core = std::min(0.5L, 12.0L * sigma);
    Accuracy acc;
    long double integral = integrate_adaptive(integrand, 0.0L, core, 0.5L * target, 40, acc);
    if (core < 0.5L) integral += integrate_adaptive(integrand, core, 0.5L, 0.5L * target, 40, acc);
    if (acc.error > std::max(target, acc.rounding))
        throw QuadratureError("fourier_coeff_exact: quadrature did not converge for n=" + std::to_string(n) +
                                  ", k=" + std::to_string(k),
                              static_cast<double>(acc.error));
    const long double sign = (k % 2 == 0) ? 1.0L : -1.0L;
    return static_cast<double>(2.0L * sign * integral);
}

FourierHamiltonian::FourierHamiltonian(const MeasurementSchedule& sched, int n_max, int k_max)
    : sched_(sched), n_max_(n_max), k_max_(k_max)
{
    if (n_max < 1 || k_max < 0) throw std::invalid_argument("FourierHamiltonian: need n_max >= 1 and k_max >= 0");
    coeffs_.resize(static_cast<std::size_t>(k_max + 1), 0.0);
    // Fold the epsilon powers into one real coefficient per harmonic.
    double eps_n = 1.0;
    for (int n = 1; n <= n_max; ++n) {
        eps_n *= sched.epsilon();
        for (int k = 0; k <= k_max; ++k)
            coeffs_[static_cast<std::size_t>(k)] += eps_n * fourier_coeff_exact(n, k, sched);
    }
}

double FourierHamiltonian::operator()(PhasePoint pt, double t) const
{
    const double tx = sched_.tau_x();
    const double h0 = (pt.p * pt.p - 1.0) / (2.0 * tx);
    const double angular = ((pt.p * pt.p - 1.0) / 4.0 * (1.0 - std::cos(2.0 * pt.theta))
                            - 0.5 * pt.p * std::sin(2.0 * pt.theta)) / tx;
    const double phase = 2.0 * std::numbers::pi * t / sched_.period();
    // C_{n,-k} = C_{n,k}, so the harmonic sum is real.
    double series = coeffs_[0];
    for (int k = 1; k <= k_max_; ++k)
        series += 2.0 * coeffs_[static_cast<std::size_t>(k)] * std::cos(phase * k);
    return h0 + angular * series;
}

double h_star_fourier(PhasePoint pt, double t, const MeasurementSchedule& sched, int n_max, int k_max)
{
    return FourierHamiltonian(sched, n_max, k_max)(pt, t);
}

std::vector<double> resonant_momenta(const MeasurementSchedule& sched, int k_max)
{
    if (k_max < 0) throw std::invalid_argument("resonant_momenta: k_max must be >= 0");
    std::vector<double> momenta;
    momenta.reserve(2 * static_cast<std::size_t>(k_max) + 1);
    for (int k = -k_max; k <= k_max; ++k)
        momenta.push_back(k * std::numbers::pi * sched.tau_x() / sched.period());
    return momenta;
}

double collapse_threshold(const MeasurementSchedule& sched)
{
    return 1.0 - sched.tau_m() / sched.tau_x();
}

} // namespace oploc
