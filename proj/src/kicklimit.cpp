#include "oploc/kicklimit.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace oploc {

void KickLimitParams::validate() const
{
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("kicklimit: gamma must be > 0");
    if (!std::isfinite(theta_i) || !std::isfinite(theta_f))
        throw std::invalid_argument("kicklimit: angles must be finite");
}

std::pair<double, double> collapse_probs(double theta1)
{
    const double c = std::cos(0.5 * theta1);
    const double s = std::sin(0.5 * theta1);
    return {c * c, s * s};
}

double branch_density(double theta1, const KickLimitParams& params, KickBranch branch)
{
    const auto [p_ex, p_gr] = collapse_probs(theta1);
    const double d1 = theta1 - params.theta_i;
    if (branch == KickBranch::Excited)
        return p_ex * std::exp(-(params.theta_f * params.theta_f + d1 * d1) / params.gamma);
    const double d2 = params.theta_f - std::numbers::pi;
    return p_gr * std::exp(-(d2 * d2 + d1 * d1) / params.gamma);
}

double branch_residual(double theta1, const KickLimitParams& params, KickBranch branch)
{
    const double drift = 2.0 / params.gamma * (theta1 - params.theta_i);
    if (branch == KickBranch::Excited) return std::tan(0.5 * theta1) + drift;
    return 1.0 / std::tan(0.5 * theta1) - drift;
}

double solve_theta1(const KickLimitParams& params, KickBranch branch)
{
    params.validate();
    double lo = 1e-9;
    double hi = std::numbers::pi - 1e-9;
    double f_lo = branch_residual(lo, params, branch);
    const double f_hi = branch_residual(hi, params, branch);
    if (!(f_lo * f_hi < 0.0)) {
        std::ostringstream msg;
        msg << "solve_theta1: no sign change on [" << lo << ", " << hi << "] (residuals " << f_lo << ", " << f_hi
            << ")";
        throw RootNotBracketed(msg.str());
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = branch_residual(mid, params, branch);
        if (f_mid == 0.0) return mid;
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace oploc
