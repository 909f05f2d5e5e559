#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "decum/market_model.hpp"

namespace decum {

/// Equally spaced axis in a log coordinate.
struct LogAxis {
    int n = 0;
    double lo = 0.0;
    double hi = 0.0;

    double step() const { return (hi - lo) / (n - 1); }
    double log_node(int i) const { return lo + step() * i; }
};

/// Requested grid. Ranges are centred on `center` (log of thousands) and can be
/// widened by `extension` log units on each side.
struct GridConfig {
    int n_x = 512;
    int n_y = 512;
    int n_debt = 0;               ///< 0 selects n_y
    double center = 4.605170185988092;  // log(100)
    double half_width = 8.0;
    double extension = 0.0;
    double padding_fraction = 0.25;  ///< per side, as a fraction of the range
};

struct GridSpec {
    LogAxis x;      ///< log s
    LogAxis y;      ///< log b
    LogAxis debt;   ///< log b' with b = -b' < 0, same range as y
    double padding = 0.0;  ///< log units added on each side before transforming
    int pad_x = 0, pad_y = 0, pad_debt = 0;  ///< padding in nodes per side

    std::vector<double> s_nodes;     ///< exp of x nodes
    std::vector<double> b_nodes;     ///< exp of y nodes
    std::vector<double> debt_nodes;  ///< b' values (positive)

    std::size_t solvent_size() const { return static_cast<std::size_t>(x.n) * y.n; }
};

GridSpec build_grids(const GridConfig& config);

/// V(s, b, W*, t) on the solvent (s>0, b>0) grid plus the s=0, b<0 debt line.
struct ValueSurface {
    std::vector<double> solvent;  ///< n_x * n_y, index i_x * n_y + i_y
    std::vector<double> debt;     ///< n_debt, indexed by b' node
    double wstar = 0.0;
    double time = 0.0;

    static ValueSurface zeros(const GridSpec& grid, double wstar = 0.0, double time = 0.0);

    double& at(const GridSpec& g, int ix, int iy) { return solvent[static_cast<std::size_t>(ix) * g.y.n + iy]; }
    double at(const GridSpec& g, int ix, int iy) const { return solvent[static_cast<std::size_t>(ix) * g.y.n + iy]; }
};

/// Bracketing cell for a positive coordinate on a log axis. Values outside
/// the axis clamp to the boundary node.
struct Bracket {
    int lo = 0;
    double w = 0.0;  ///< weight of node lo + 1
};
Bracket locate(const LogAxis& axis, const std::vector<double>& nodes, double value);

/// Bilinear interpolation in (s, b) of the solvent table, clamped at the edges.
double interpolate_solvent(const GridSpec& grid, const ValueSurface& v, double s, double b);

/// Linear interpolation in b' of the debt line, clamped at the edges.
double interpolate_debt(const GridSpec& grid, const ValueSurface& v, double b_prime);

/// Value at a post-rebalance state holding wealth*p in stock and the rest in
/// bonds. Non-positive wealth reads the debt line.
double value_at_allocation(const GridSpec& grid, const ValueSurface& v, double wealth, double p);

/// Fourier multipliers of the one-period transition density on the padded
/// grid, with the inverse-transform normalisation folded in.
class TransitionKernel {
public:
    TransitionKernel(const MarketModel& model, const GridSpec& grid, double dt);
    ~TransitionKernel();
    TransitionKernel(TransitionKernel&&) noexcept;
    TransitionKernel& operator=(TransitionKernel&&) noexcept;
    TransitionKernel(const TransitionKernel&) = delete;
    TransitionKernel& operator=(const TransitionKernel&) = delete;

    double dt() const { return dt_; }
    int padded_x() const { return px_; }
    int padded_y() const { return py_; }
    int padded_debt() const { return pd_; }

    /// Solvent multiplier at padded frequency (kx, ky), ky in [0, py/2], times px*py.
    std::complex<double> solvent_multiplier(int kx, int ky) const;
    std::complex<double> debt_multiplier(int k) const;

    void apply(const GridSpec& grid, const ValueSurface& in, ValueSurface& out) const;

private:
    struct Plans;
    double dt_ = 0.0;
    int px_ = 0, py_ = 0, pd_ = 0;
    std::vector<std::complex<double>> solvent_mult_;
    std::vector<std::complex<double>> debt_mult_;
    std::unique_ptr<Plans> plans_;
};

TransitionKernel build_kernel(const MarketModel& model, const GridSpec& grid, double dt);

/// One backward step across a no-trading interval: out = E[V(t_n^+)] at t_{n-1}^+.
ValueSurface propagate(const GridSpec& grid, const ValueSurface& surface, const TransitionKernel& kernel);

}  // namespace decum
