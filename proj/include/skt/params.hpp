#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace skt {

/// Coefficients of the two-species cross-diffusion model with competition
/// kinetics. All coefficients are nonnegative; Gamma scales the reaction
/// relative to diffusion.
struct SktParams {
    double a1 = 0.0, a2 = 0.0;                   // self-diffusion
    double b1 = 0.0, b2 = 0.0;                   // cross-diffusion
    double c1 = 0.0, c2 = 0.0;                   // linear diffusion
    double r1 = 0.0, r2 = 0.0;                   // growth rates
    double gamma11 = 0.0, gamma12 = 0.0;         // competition rates
    double gamma21 = 0.0, gamma22 = 0.0;
    double Gamma = 0.0;                          // reaction strength

    void validate() const {
        const double vals[] = {a1, a2, b1, b2, c1, c2, r1, r2,
                               gamma11, gamma12, gamma21, gamma22, Gamma};
        for (double v : vals) {
            if (!(v >= 0.0)) {
                throw std::invalid_argument("SktParams: all coefficients must be nonnegative");
            }
        }
    }
};

/// Coexistence equilibrium (u1*, u2*) of the competition kinetics.
/// Requires gamma11*gamma22 - gamma12*gamma21 != 0.
inline std::pair<double, double> equilibrium(const SktParams& p) {
    const double det = p.gamma11 * p.gamma22 - p.gamma12 * p.gamma21;
    if (det == 0.0) {
        throw std::domain_error("equilibrium: singular competition matrix (gamma11*gamma22 == gamma12*gamma21)");
    }
    const double u1 = (p.r1 * p.gamma22 - p.r2 * p.gamma12) / det;
    const double u2 = (p.r2 * p.gamma11 - p.r1 * p.gamma21) / det;
    return {u1, u2};
}

/// Species weights (pi1, pi2) for the entropy functional, constrained by
/// pi1*b1 == pi2*b2. The pair (b2, b1) satisfies the constraint exactly;
/// when both cross-diffusion coefficients vanish any positive pair works
/// and (1, 1) is returned.
struct EntropyWeights {
    double pi1 = 1.0;
    double pi2 = 1.0;

    static EntropyWeights for_params(const SktParams& p) {
        if (p.b1 > 0.0 && p.b2 > 0.0) return {p.b2, p.b1};
        if (p.b1 == 0.0 && p.b2 == 0.0) return {1.0, 1.0};
        throw std::domain_error("EntropyWeights: no positive weights exist when exactly one of b1, b2 is zero");
    }
};

} // namespace skt
