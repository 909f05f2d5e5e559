#include "decum/pide_engine.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "decum/error.hpp"

namespace decum {

namespace {

using cplx = std::complex<double>;

// The FFTW planner is not re-entrant; execution of an existing plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int padding_nodes(double padding, double step) { return static_cast<int>(std::ceil(padding / step - 1e-9)); }

// Signed angular frequencies represented by DFT index k. The Nyquist index
// stands for both +pi/h and -pi/h.
int frequencies(int k, int n, double h, double out[2]) {
    const double base = 2.0 * std::numbers::pi / (n * h);
    if (2 * k == n) {
        out[0] = base * k;
        out[1] = -base * k;
        return 2;
    }
    out[0] = base * (2 * k < n ? k : k - n);
    return 1;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
        if (!ptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    double* real() { return static_cast<double*>(ptr); }
    fftw_complex* cplx_ptr() { return static_cast<fftw_complex*>(ptr); }
    void* ptr;
};

// Blocked transpose of a rows x cols complex matrix.
void transpose(const cplx* a, cplx* b, int rows, int cols) {
    constexpr int kBlock = 32;
    for (int i0 = 0; i0 < rows; i0 += kBlock)
        for (int j0 = 0; j0 < cols; j0 += kBlock) {
            const int i1 = std::min(rows, i0 + kBlock), j1 = std::min(cols, j0 + kBlock);
            for (int i = i0; i < i1; ++i)
                for (int j = j0; j < j1; ++j)
                    b[static_cast<std::size_t>(j) * rows + i] = a[static_cast<std::size_t>(i) * cols + j];
        }
}

}  // namespace

GridSpec build_grids(const GridConfig& c) {
    require(c.n_x >= 64 && c.n_y >= 64, "grid sizes must be >= 64");
    require(is_power_of_two(c.n_x) && is_power_of_two(c.n_y), "grid sizes must be powers of two");
    const int n_debt = c.n_debt == 0 ? c.n_y : c.n_debt;
    require(n_debt >= 2, "debt grid needs at least two nodes");
    require(c.half_width > 0.0, "invalid grid range ordering: half width must be > 0");
    require(c.half_width + c.extension > 0.0, "invalid grid range ordering after extension");
    require(c.padding_fraction >= 0.0, "padding fraction must be >= 0");

    GridSpec g;
    const double lo = c.center - c.half_width - c.extension;
    const double hi = c.center + c.half_width + c.extension;
    g.x = {c.n_x, lo, hi};
    g.y = {c.n_y, lo, hi};
    g.debt = {n_debt, lo, hi};
    g.padding = c.padding_fraction * (hi - lo);
    g.pad_x = padding_nodes(g.padding, g.x.step());
    g.pad_y = padding_nodes(g.padding, g.y.step());
    g.pad_debt = padding_nodes(g.padding, g.debt.step());

    auto nodes = [](const LogAxis& a) {
        std::vector<double> v(a.n);
        for (int i = 0; i < a.n; ++i) v[i] = std::exp(a.log_node(i));
        return v;
    };
    g.s_nodes = nodes(g.x);
    g.b_nodes = nodes(g.y);
    g.debt_nodes = nodes(g.debt);
    return g;
}

ValueSurface ValueSurface::zeros(const GridSpec& grid, double wstar, double time) {
    ValueSurface v;
    v.solvent.assign(grid.solvent_size(), 0.0);
    v.debt.assign(grid.debt.n, 0.0);
    v.wstar = wstar;
    v.time = time;
    return v;
}

Bracket locate(const LogAxis& axis, const std::vector<double>& nodes, double value) {
    const int n = axis.n;
    if (!(value > nodes.front())) return {0, 0.0};
    if (value >= nodes.back()) return {n - 2, 1.0};
    int i = static_cast<int>((std::log(value) - axis.lo) / axis.step());
    i = std::clamp(i, 0, n - 2);
    // Guard against rounding in the log.
    while (i > 0 && value < nodes[i]) --i;
    while (i < n - 2 && value >= nodes[i + 1]) ++i;
    return {i, (value - nodes[i]) / (nodes[i + 1] - nodes[i])};
}

double interpolate_solvent(const GridSpec& g, const ValueSurface& v, double s, double b) {
    const Bracket bx = locate(g.x, g.s_nodes, s);
    const Bracket by = locate(g.y, g.b_nodes, b);
    const std::size_t ny = g.y.n;
    const double* r0 = v.solvent.data() + static_cast<std::size_t>(bx.lo) * ny + by.lo;
    const double* r1 = r0 + ny;
    const double lo = r0[0] + by.w * (r0[1] - r0[0]);
    const double hi = r1[0] + by.w * (r1[1] - r1[0]);
    return lo + bx.w * (hi - lo);
}

double interpolate_debt(const GridSpec& g, const ValueSurface& v, double b_prime) {
    const Bracket br = locate(g.debt, g.debt_nodes, b_prime);
    return v.debt[br.lo] + br.w * (v.debt[br.lo + 1] - v.debt[br.lo]);
}

double value_at_allocation(const GridSpec& g, const ValueSurface& v, double wealth, double p) {
    if (wealth <= 0.0) return interpolate_debt(g, v, -wealth);
    return interpolate_solvent(g, v, wealth * p, wealth * (1.0 - p));
}

// The 2-D transform runs as row transforms plus column transforms on a
// transposed copy, so every FFT reads contiguous memory.
struct TransitionKernel::Plans {
    fftw_plan rows_forward = nullptr;
    fftw_plan rows_inverse = nullptr;
    fftw_plan cols_forward = nullptr;
    fftw_plan cols_inverse = nullptr;
    fftw_plan forward1 = nullptr;
    fftw_plan inverse1 = nullptr;

    ~Plans() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        for (fftw_plan p : {rows_forward, rows_inverse, cols_forward, cols_inverse, forward1, inverse1})
            if (p) fftw_destroy_plan(p);
    }
};

TransitionKernel::TransitionKernel(const MarketModel& model, const GridSpec& grid, double dt) : dt_(dt) {
    require(dt > 0.0, "build_kernel: dt must be > 0");
    validate(model);
    px_ = grid.x.n + 2 * grid.pad_x;
    py_ = grid.y.n + 2 * grid.pad_y;
    pd_ = grid.debt.n + 2 * grid.pad_debt;
    const int cy = py_ / 2 + 1;
    const int cd = pd_ / 2 + 1;
    const double hx = grid.x.step(), hy = grid.y.step(), hd = grid.debt.step();
    const double norm2 = 1.0 / (static_cast<double>(px_) * py_);

    solvent_mult_.resize(static_cast<std::size_t>(px_) * cy);
    double wx[2], wy[2];
    for (int kx = 0; kx < px_; ++kx) {
        const int nx = frequencies(kx, px_, hx, wx);
        for (int ky = 0; ky < cy; ++ky) {
            const int ny = frequencies(ky, py_, hy, wy);
            cplx acc = 0.0;
            for (int a = 0; a < nx; ++a)
                for (int b = 0; b < ny; ++b) acc += joint_char_fn(model, wx[a], wy[b], dt, false);
            solvent_mult_[static_cast<std::size_t>(ky) * px_ + kx] = acc * (norm2 / (nx * ny));
        }
    }
    debt_mult_.resize(cd);
    for (int k = 0; k < cd; ++k) {
        const int n = frequencies(k, pd_, hd, wy);
        cplx acc = 0.0;
        for (int a = 0; a < n; ++a) acc += bond_char_fn(model, wy[a], dt, true);
        debt_mult_[k] = acc / (static_cast<double>(n) * pd_);
    }

    // Columns ky = 0 and ky = py/2 are stored for both signs of kx; their
    // multipliers must be conjugate pairs or the inverse transform of a real
    // surface would not be real.
    for (int ky : {0, py_ % 2 == 0 ? py_ / 2 : 0}) {
        for (int kx = 1; kx < px_; ++kx) {
            const cplx a = solvent_mult_[static_cast<std::size_t>(ky) * px_ + kx];
            const cplx b = solvent_mult_[static_cast<std::size_t>(ky) * px_ + px_ - kx];
            if (std::abs(a - std::conj(b)) > 1e-12 * norm2)
                fail(ErrorCode::Numeric, "transition kernel is not conjugate-symmetric");
        }
    }

    plans_ = std::make_unique<Plans>();
    FftwBuffer r2(sizeof(double) * px_ * py_), c2(sizeof(fftw_complex) * px_ * cy);
    FftwBuffer r1(sizeof(double) * pd_), c1(sizeof(fftw_complex) * cd);
    std::lock_guard<std::mutex> lock(planner_mutex());
    const int row_len[1] = {py_}, col_len[1] = {px_};
    plans_->rows_forward = fftw_plan_many_dft_r2c(1, row_len, px_, r2.real(), nullptr, 1, py_, c2.cplx_ptr(), nullptr,
                                                  1, cy, FFTW_ESTIMATE);
    plans_->rows_inverse = fftw_plan_many_dft_c2r(1, row_len, px_, c2.cplx_ptr(), nullptr, 1, cy, r2.real(), nullptr,
                                                  1, py_, FFTW_ESTIMATE);
    plans_->cols_forward = fftw_plan_many_dft(1, col_len, cy, c2.cplx_ptr(), nullptr, 1, px_, c2.cplx_ptr(), nullptr,
                                              1, px_, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->cols_inverse = fftw_plan_many_dft(1, col_len, cy, c2.cplx_ptr(), nullptr, 1, px_, c2.cplx_ptr(), nullptr,
                                              1, px_, FFTW_BACKWARD, FFTW_ESTIMATE);
    plans_->forward1 = fftw_plan_dft_r2c_1d(pd_, r1.real(), c1.cplx_ptr(), FFTW_ESTIMATE);
    plans_->inverse1 = fftw_plan_dft_c2r_1d(pd_, c1.cplx_ptr(), r1.real(), FFTW_ESTIMATE);
    if (!plans_->rows_forward || !plans_->rows_inverse || !plans_->cols_forward || !plans_->cols_inverse ||
        !plans_->forward1 || !plans_->inverse1)
        fail(ErrorCode::Numeric, "FFTW planning failed");
}

TransitionKernel::~TransitionKernel() = default;
TransitionKernel::TransitionKernel(TransitionKernel&&) noexcept = default;
TransitionKernel& TransitionKernel::operator=(TransitionKernel&&) noexcept = default;

cplx TransitionKernel::solvent_multiplier(int kx, int ky) const {
    return solvent_mult_[static_cast<std::size_t>(ky) * px_ + kx] * (static_cast<double>(px_) * py_);
}

cplx TransitionKernel::debt_multiplier(int k) const { return debt_mult_[k] * static_cast<double>(pd_); }

void TransitionKernel::apply(const GridSpec& g, const ValueSurface& in, ValueSurface& out) const {
    require(in.solvent.size() == g.solvent_size() && in.debt.size() == static_cast<std::size_t>(g.debt.n),
            "propagate: surface does not match grid");
    for (double v : in.solvent)
        if (!std::isfinite(v)) fail(ErrorCode::Numeric, "propagate: non-finite solvent value");
    for (double v : in.debt)
        if (!std::isfinite(v)) fail(ErrorCode::Numeric, "propagate: non-finite debt value");

    const int nx = g.x.n, ny = g.y.n, cy = py_ / 2 + 1;
    out.solvent.resize(g.solvent_size());
    out.debt.resize(g.debt.n);

    {
        FftwBuffer real(sizeof(double) * px_ * py_), spec(sizeof(fftw_complex) * px_ * cy),
            cols(sizeof(fftw_complex) * px_ * cy);
        double* r = real.real();
        // Domain extension: constant continuation of the boundary values.
        for (int I = 0; I < px_; ++I) {
            const int i = std::clamp(I - g.pad_x, 0, nx - 1);
            const double* src = in.solvent.data() + static_cast<std::size_t>(i) * ny;
            double* dst = r + static_cast<std::size_t>(I) * py_;
            for (int J = 0; J < py_; ++J) dst[J] = src[std::clamp(J - g.pad_y, 0, ny - 1)];
        }
        fftw_execute_dft_r2c(plans_->rows_forward, r, spec.cplx_ptr());
        auto* c = reinterpret_cast<cplx*>(spec.cplx_ptr());
        auto* t = reinterpret_cast<cplx*>(cols.cplx_ptr());
        transpose(c, t, px_, cy);
        fftw_execute_dft(plans_->cols_forward, cols.cplx_ptr(), cols.cplx_ptr());
        const std::size_t total = static_cast<std::size_t>(px_) * cy;
        for (std::size_t k = 0; k < total; ++k) t[k] *= solvent_mult_[k];
        fftw_execute_dft(plans_->cols_inverse, cols.cplx_ptr(), cols.cplx_ptr());
        transpose(t, c, cy, px_);
        fftw_execute_dft_c2r(plans_->rows_inverse, spec.cplx_ptr(), r);
        for (int i = 0; i < nx; ++i) {
            const double* src = r + static_cast<std::size_t>(i + g.pad_x) * py_ + g.pad_y;
            std::copy(src, src + ny, out.solvent.begin() + static_cast<std::ptrdiff_t>(i) * ny);
        }
    }
    {
        const int nd = g.debt.n, cd = pd_ / 2 + 1;
        FftwBuffer real(sizeof(double) * pd_), spec(sizeof(fftw_complex) * cd);
        double* r = real.real();
        for (int I = 0; I < pd_; ++I) r[I] = in.debt[std::clamp(I - g.pad_debt, 0, nd - 1)];
        fftw_execute_dft_r2c(plans_->forward1, r, spec.cplx_ptr());
        auto* c = reinterpret_cast<cplx*>(spec.cplx_ptr());
        for (int k = 0; k < cd; ++k) c[k] *= debt_mult_[k];
        fftw_execute_dft_c2r(plans_->inverse1, spec.cplx_ptr(), r);
        std::copy(r + g.pad_debt, r + g.pad_debt + nd, out.debt.begin());
    }
    for (double v : out.solvent)
        if (!std::isfinite(v)) fail(ErrorCode::Numeric, "propagate: non-finite result");
}

TransitionKernel build_kernel(const MarketModel& model, const GridSpec& grid, double dt) {
    return TransitionKernel(model, grid, dt);
}

ValueSurface propagate(const GridSpec& grid, const ValueSurface& surface, const TransitionKernel& kernel) {
    ValueSurface out;
    out.wstar = surface.wstar;
    out.time = surface.time - kernel.dt();
    kernel.apply(grid, surface, out);
    return out;
}

}  // namespace decum
