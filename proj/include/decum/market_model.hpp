#pragma once

#include <complex>

#include "decum/rng.hpp"

namespace decum {

/// Double-exponential (Kou) jump-size law for y = log(xi).
struct JumpLaw {
    double intensity = 0.0;  ///< jumps per year
    double p_up = 0.5;
    double eta_up = 2.0;     ///< rate of upward jumps, must exceed 1
    double eta_down = 2.0;   ///< rate of downward jumps
};

struct AssetParams {
    double mu = 0.0;  ///< uncompensated drift, per year
    double sigma = 0.0;
    JumpLaw jump;
};

struct MarketModel {
    AssetParams stock;
    AssetParams bond;
    double rho = 0.0;             ///< correlation of the Brownian drivers
    double borrow_spread = 0.0;   ///< added to the bond drift while wealth is negative

    /// Real CRSP value-weighted index / 10-year treasury fit, 1926:1-2019:12.
    static MarketModel crsp_1926_2019();
};

struct PeriodReturn {
    double stock_gross = 1.0;
    double bond_gross = 1.0;
};

/// Throws if any invariant of the parameter set is violated.
void validate(const JumpLaw& law);
void validate(const MarketModel& model);

/// E[xi - 1]. Throws for eta_up <= 1, where the mean jump size diverges.
double jump_compensator(const JumpLaw& law);

double jump_log_density(const JumpLaw& law, double y);

/// E[exp(i u Y)] for a single jump log-size Y.
std::complex<double> jump_char_fn(const JumpLaw& law, double u);

/// Drift of log(gross return) per year, i.e. mu - lambda*kappa - sigma^2/2 (+ spread).
double log_drift(const AssetParams& asset, double extra_drift = 0.0);

/// Characteristic exponent psi with E[exp(i(u_s X_s + u_b X_b))] = exp(dt * psi).
std::complex<double> joint_char_exponent(const MarketModel& model, double u_s, double u_b, bool with_spread);

std::complex<double> joint_char_fn(const MarketModel& model, double u_s, double u_b, double dt, bool with_spread);

/// Characteristic function of the bond log-return alone.
std::complex<double> bond_char_fn(const MarketModel& model, double u_b, double dt, bool with_spread);

/// Exact one-period draw of both gross returns. The stream is advanced by the
/// same amount whether or not the account is insolvent.
PeriodReturn sample_period_return(const MarketModel& model, double dt, bool insolvent, RandomStream& rng);

/// Sum of a Poisson(intensity*dt) number of jump log-sizes.
double sample_jump_sum(const JumpLaw& law, double dt, RandomStream& rng);

}  // namespace decum
