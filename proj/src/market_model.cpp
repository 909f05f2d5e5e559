#include "decum/market_model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "decum/error.hpp"

namespace decum {

namespace {
using cplx = std::complex<double>;
constexpr cplx kI{0.0, 1.0};
}  // namespace

MarketModel MarketModel::crsp_1926_2019() {
    MarketModel m;
    m.stock = {0.0877, 0.1459, {0.3191, 0.2333, 4.3608, 5.504}};
    m.bond = {0.0239, 0.0538, {0.3830, 0.6111, 16.19, 17.27}};
    m.rho = 0.04554;
    m.borrow_spread = 0.0;
    return m;
}

void validate(const JumpLaw& law) {
    require(law.intensity >= 0.0, "jump intensity must be >= 0");
    require(law.p_up >= 0.0 && law.p_up <= 1.0, "jump up-probability must lie in [0,1]");
    require(law.eta_up > 1.0, "upward jump rate must exceed 1 (finite mean jump size)");
    require(law.eta_down > 0.0, "downward jump rate must be > 0");
}

void validate(const MarketModel& model) {
    for (const AssetParams* a : {&model.stock, &model.bond}) {
        require(std::isfinite(a->mu), "asset drift must be finite");
        require(a->sigma >= 0.0, "asset volatility must be >= 0");
        validate(a->jump);
    }
    require(std::abs(model.rho) <= 1.0, "correlation must lie in [-1,1]");
    require(model.borrow_spread >= 0.0, "borrowing spread must be >= 0");
}

double jump_compensator(const JumpLaw& law) {
    if (!(law.eta_up > 1.0)) fail(ErrorCode::InvalidArgument, "jump compensator diverges: eta_up <= 1");
    return law.p_up * law.eta_up / (law.eta_up - 1.0) + (1.0 - law.p_up) * law.eta_down / (law.eta_down + 1.0) - 1.0;
}

double jump_log_density(const JumpLaw& law, double y) {
    if (y >= 0.0) return law.p_up * law.eta_up * std::exp(-law.eta_up * y);
    return (1.0 - law.p_up) * law.eta_down * std::exp(law.eta_down * y);
}

cplx jump_char_fn(const JumpLaw& law, double u) {
    return law.p_up * law.eta_up / (law.eta_up - kI * u) + (1.0 - law.p_up) * law.eta_down / (law.eta_down + kI * u);
}

double log_drift(const AssetParams& asset, double extra_drift) {
    const double comp = asset.jump.intensity > 0.0 ? asset.jump.intensity * jump_compensator(asset.jump) : 0.0;
    return asset.mu + extra_drift - comp - 0.5 * asset.sigma * asset.sigma;
}

cplx joint_char_exponent(const MarketModel& m, double u_s, double u_b, bool with_spread) {
    const double ds = log_drift(m.stock);
    const double db = log_drift(m.bond, with_spread ? m.borrow_spread : 0.0);
    const double ss = m.stock.sigma, sb = m.bond.sigma;
    const double quad = ss * ss * u_s * u_s + 2.0 * m.rho * ss * sb * u_s * u_b + sb * sb * u_b * u_b;
    cplx psi = kI * (ds * u_s + db * u_b) - 0.5 * quad;
    if (m.stock.jump.intensity > 0.0) psi += m.stock.jump.intensity * (jump_char_fn(m.stock.jump, u_s) - 1.0);
    if (m.bond.jump.intensity > 0.0) psi += m.bond.jump.intensity * (jump_char_fn(m.bond.jump, u_b) - 1.0);
    return psi;
}

cplx joint_char_fn(const MarketModel& m, double u_s, double u_b, double dt, bool with_spread) {
    require(dt > 0.0, "joint_char_fn: dt must be > 0");
    return std::exp(dt * joint_char_exponent(m, u_s, u_b, with_spread));
}

cplx bond_char_fn(const MarketModel& m, double u_b, double dt, bool with_spread) {
    require(dt > 0.0, "bond_char_fn: dt must be > 0");
    const double db = log_drift(m.bond, with_spread ? m.borrow_spread : 0.0);
    cplx psi = kI * db * u_b - 0.5 * m.bond.sigma * m.bond.sigma * u_b * u_b;
    if (m.bond.jump.intensity > 0.0) psi += m.bond.jump.intensity * (jump_char_fn(m.bond.jump, u_b) - 1.0);
    return std::exp(dt * psi);
}

double sample_jump_sum(const JumpLaw& law, double dt, RandomStream& rng) {
    if (law.intensity <= 0.0) return 0.0;
    std::poisson_distribution<int> count(law.intensity * dt);
    const int n = count(rng);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const bool up = rng.uniform() < law.p_up;
        const double e = -std::log(rng.uniform());
        sum += up ? e / law.eta_up : -e / law.eta_down;
    }
    return sum;
}

PeriodReturn sample_period_return(const MarketModel& m, double dt, bool insolvent, RandomStream& rng) {
    require(dt > 0.0, "sample_period_return: dt must be > 0");
    std::normal_distribution<double> normal;
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double zb = m.rho * z1 + std::sqrt(std::max(0.0, 1.0 - m.rho * m.rho)) * z2;
    const double js = sample_jump_sum(m.stock.jump, dt, rng);
    const double jb = sample_jump_sum(m.bond.jump, dt, rng);
    const double sq = std::sqrt(dt);
    const double xs = log_drift(m.stock) * dt + m.stock.sigma * sq * z1 + js;
    const double xb = log_drift(m.bond, insolvent ? m.borrow_spread : 0.0) * dt + m.bond.sigma * sq * zb + jb;
    return {std::exp(xs), std::exp(xb)};
}

}  // namespace decum
