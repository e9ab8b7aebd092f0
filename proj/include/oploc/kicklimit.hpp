#pragma once

#include <stdexcept>
#include <utility>

namespace oploc {

/// Diffusion, projective z-kick, diffusion over one period. gamma = period /
/// tau sets how far states diffuse between kicks.
struct KickLimitParams {
    double gamma = 1.0;
    double theta_i = 0.0;
    double theta_f = 0.0;

    void validate() const;
};

enum class KickBranch { Excited, Ground };

/// (cos^2(theta1/2), sin^2(theta1/2)).
std::pair<double, double> collapse_probs(double theta1);

/// Unnormalized density of the path theta_i -> theta1 -> {0 or pi} -> theta_f.
double branch_density(double theta1, const KickLimitParams& params, KickBranch branch);

/// Stationarity condition for the branch: -d(ln density)/d(theta1) on the
/// excited branch, +d(ln density)/d(theta1) on the ground branch.
double branch_residual(double theta1, const KickLimitParams& params, KickBranch branch);

class RootNotBracketed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optimal intermediate angle: bisection of branch_residual on
/// (1e-9, pi - 1e-9), 200 iterations at most, width tolerance 1e-12.
double solve_theta1(const KickLimitParams& params, KickBranch branch);

} // namespace oploc
