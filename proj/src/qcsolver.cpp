#include "beltrami/qcsolver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "beltrami/modulus.hpp"

namespace beltrami::qc {

using field::kPi;

namespace {

// ---------------------------------------------------------------------------
// Exact cell integrals of the Cauchy and Beurling kernels over unit-spacing
// square cells, via closed-form edge integrals (Stokes). The discrete
// convolution with these tables equals the continuous transform of the
// piecewise-constant-per-cell density.

cx edge_cauchy(cx a, cx b, cx z) {
    const cx d = b - a;
    const cx la = std::log((b - z) / (a - z)); // |arg| < pi off the segment
    return std::conj(d) + (std::conj(a) - std::conj(d) / d * (a - z)) * la;
}

cx edge_beurling(cx a, cx b, cx z) {
    const cx d = b - a;
    const cx g = std::conj(a) - std::conj(d) / d * (a - z);
    const cx la = std::log((b - z) / (a - z));
    return std::conj(d) / d * la + g * (cx(1, 0) / (a - z) - cx(1, 0) / (b - z));
}

// integral over the unit cell centered at the origin of 1/(z - w) dm(w)
cx cell_cauchy(cx z) {
    if (std::abs(z) < 1e-14) return cx(0, 0); // odd symmetry
    const cx c0(-0.5, -0.5), c1(0.5, -0.5), c2(0.5, 0.5), c3(-0.5, 0.5);
    cx loop = edge_cauchy(c0, c1, z) + edge_cauchy(c1, c2, z) + edge_cauchy(c2, c3, z) +
              edge_cauchy(c3, c0, z);
    const bool in_cell = std::abs(z.real()) < 0.5 && std::abs(z.imag()) < 0.5;
    // int_cell dm/(w - z) = loop/(2i) - pi conj(z) [z in cell]; we need the
    // opposite sign argument
    cx val = loop / cx(0, 2);
    if (in_cell) val -= kPi * std::conj(z);
    return -val;
}

// PV integral over the unit cell of 1/(z - w)^2 dm(w)
cx cell_beurling(cx z) {
    if (std::abs(z) < 1e-14) return cx(0, 0); // PV vanishes by symmetry
    const cx c0(-0.5, -0.5), c1(0.5, -0.5), c2(0.5, 0.5), c3(-0.5, 0.5);
    cx loop = edge_beurling(c0, c1, z) + edge_beurling(c1, c2, z) + edge_beurling(c2, c3, z) +
              edge_beurling(c3, c0, z);
    return loop / cx(0, 2); // same sign under w -> z - w squared
}

// ---------------------------------------------------------------------------
// FFT-accelerated free-space convolution on an n x n grid, padded to 2n.

class FreeSpaceTransforms {
public:
    explicit FreeSpaceTransforms(int n, double spacing) : n_(n), m_(2 * n), h_(spacing) {
        const std::size_t M = std::size_t(m_) * m_;
        buf_ = alloc(M);
        khat_c_ = alloc(M);
        khat_s_ = alloc(M);
        work_ = alloc(M);
        plan_fwd_ = fftw_plan_dft_2d(m_, m_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft_2d(m_, m_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
        build_kernels();
    }

    ~FreeSpaceTransforms() {
        fftw_destroy_plan(plan_fwd_);
        fftw_destroy_plan(plan_bwd_);
        fftw_free(buf_);
        fftw_free(khat_c_);
        fftw_free(khat_s_);
        fftw_free(work_);
    }

    FreeSpaceTransforms(const FreeSpaceTransforms&) = delete;
    FreeSpaceTransforms& operator=(const FreeSpaceTransforms&) = delete;

    // y = S[x] (Beurling) or C[x] (Cauchy), x and y of size n*n row-major
    void beurling(const std::vector<cx>& x, std::vector<cx>& y) { convolve(x, y, khat_s_); }
    void cauchy(const std::vector<cx>& x, std::vector<cx>& y) { convolve(x, y, khat_c_); }

private:
    int n_, m_;
    double h_;
    fftw_complex *buf_, *khat_c_, *khat_s_, *work_;
    fftw_plan plan_fwd_, plan_bwd_;

    static fftw_complex* alloc(std::size_t M) {
        return static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * M));
    }

    void build_kernels() {
        const std::size_t M = std::size_t(m_) * m_;
        // offsets di, dj in (-n, n]; kernel at z = (di, dj) * h over a cell of
        // side h: Cauchy scales like h, Beurling is scale free
        for (int j = 0; j < m_; ++j)
            for (int i = 0; i < m_; ++i) {
                const int di = i <= n_ ? i : i - m_;
                const int dj = j <= n_ ? j : j - m_;
                const cx zu{double(di), double(dj)}; // unit-cell coordinates
                const cx kc = (1.0 / kPi) * h_ * cell_cauchy(zu);
                const cx ks = (-1.0 / kPi) * cell_beurling(zu);
                const std::size_t idx = std::size_t(j) * m_ + i;
                buf_[idx][0] = kc.real();
                buf_[idx][1] = kc.imag();
                work_[idx][0] = ks.real();
                work_[idx][1] = ks.imag();
            }
        fftw_execute_dft(plan_fwd_, buf_, khat_c_);
        fftw_execute_dft(plan_fwd_, work_, khat_s_);
        (void)M;
    }

    void convolve(const std::vector<cx>& x, std::vector<cx>& y, const fftw_complex* khat) {
        const std::size_t M = std::size_t(m_) * m_;
        for (std::size_t k = 0; k < M; ++k) buf_[k][0] = buf_[k][1] = 0.0;
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) {
                const std::size_t src = std::size_t(j) * n_ + i;
                const std::size_t dst = std::size_t(j) * m_ + i;
                buf_[dst][0] = x[src].real();
                buf_[dst][1] = x[src].imag();
            }
        fftw_execute_dft(plan_fwd_, buf_, buf_);
        const double scale = 1.0 / double(M);
        for (std::size_t k = 0; k < M; ++k) {
            const double ar = buf_[k][0], ai = buf_[k][1];
            const double br = khat[k][0], bi = khat[k][1];
            buf_[k][0] = (ar * br - ai * bi) * scale;
            buf_[k][1] = (ar * bi + ai * br) * scale;
        }
        fftw_execute_dft(plan_bwd_, buf_, buf_);
        y.resize(std::size_t(n_) * n_);
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i)
                y[std::size_t(j) * n_ + i] =
                    cx(buf_[std::size_t(j) * m_ + i][0], buf_[std::size_t(j) * m_ + i][1]);
    }
};

double norm2(const std::vector<cx>& v) {
    double s = 0.0;
    for (cx z : v) s += std::norm(z);
    return std::sqrt(s);
}

} // namespace

QcSolution QcSolution::normalized(cx a, cx b) const {
    const cx fa = f.interpolate(a), fb = f.interpolate(b);
    const cx den = fb - fa;
    if (std::abs(den) < 1e-300) throw SolverError("normalize: anchors map to the same point");
    QcSolution out = *this;
    for (auto& v : out.f.values) v = (v - fa) / den;
    for (auto& v : out.f_z.values) v /= den;
    for (auto& v : out.f_zbar.values) v /= den;
    const double s = 1.0 / std::norm(den);
    for (auto& jv : out.jacobian) jv *= s;
    out.normalization = "anchored(f(a)=0, f(b)=1)";
    return out;
}

QcSolution solve_beltrami(const BeltramiCoefficient& coef, const DomainMask& mask,
                          const SolveOptions& opts) {
    if (!(opts.truncation_delta > 0 && opts.truncation_delta <= 0.5))
        throw ValidationError("solve_beltrami: truncation delta must lie in (0, 0.5]");
    const GridSpec grid = mask.grid;
    const int n = grid.n;
    const double cap = 1.0 - opts.truncation_delta;
    const double support_radius =
        std::min(0.95 * grid.half_width, 1.2 * mask.domain.circumradius());

    // mu on the solve grid, truncated; zero outside the support disk
    std::vector<cx> mu(grid.cell_count(), cx(0, 0));
    std::uint64_t truncated = 0;
    cx mean(0, 0);
    std::size_t support_count = 0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const cx z = grid.cell_center(i, j);
            if (std::abs(z - grid.center) > support_radius) continue;
            cx m = coef.defined_at(z) ? coef.eval(z) : cx(0, 0);
            const double am = std::abs(m);
            if (am > cap) {
                m *= cap / am;
                ++truncated;
            }
            mu[grid.index(i, j)] = m;
            mean += m;
            ++support_count;
        }
    if (support_count == 0) throw SolverError("solve_beltrami: empty coefficient support");
    mean /= double(support_count);
    if (std::abs(mean) < 1e-13) mean = cx(0, 0);

    // conjugate away the mean: A(z) = z + mean * conj(z - c) (+c terms) inside
    // the support disk; g solves the transformed coefficient with zero mean
    const cx c0 = grid.center;
    const double Rc = support_radius;
    auto A = [c0, mean, Rc](cx z) {
        const cx w = z - c0;
        if (std::abs(w) <= Rc) return c0 + w + mean * std::conj(w);
        return c0 + w + mean * (Rc * Rc) / w;
    };
    const double mean_norm = std::norm(mean);

    GridSpec igrid = mean == cx(0, 0)
                         ? grid
                         : GridSpec(c0, grid.half_width * (1.0 + std::abs(mean)) * 1.02, n);
    std::vector<cx> mu_g(igrid.cell_count(), cx(0, 0));
    double mu_inf = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const cx w = igrid.cell_center(i, j) - c0;
            // invert the affine branch of A
            const cx zr = (w - mean * std::conj(w)) / (1.0 - mean_norm);
            if (std::abs(zr) > Rc) continue;
            int si, sj;
            if (!grid.locate(c0 + zr, si, sj)) continue;
            const cx ms = mu[grid.index(si, sj)];
            const cx mg = (ms - mean) / (cx(1, 0) - std::conj(mean) * ms);
            mu_g[igrid.index(i, j)] = mg;
            mu_inf = std::max(mu_inf, std::abs(mg));
        }

    FreeSpaceTransforms fft(n, igrid.spacing());
    const double mu_l2 = norm2(mu_g);
    ResidualStats stats;
    std::vector<cx> h = mu_g, Sh, tmp;

    if (mu_l2 == 0.0) {
        h.assign(igrid.cell_count(), cx(0, 0));
    } else if (opts.force_richardson || mu_inf <= 0.8) {
        // Richardson: h <- mu_g + mu_g S h
        std::vector<cx> h_new(h.size());
        int rising = 0;
        double prev = 1e300;
        for (int it = 0; it < opts.max_iter; ++it) {
            fft.beurling(h, Sh);
            double delta2 = 0.0;
            for (std::size_t k = 0; k < h.size(); ++k) {
                const cx hn = mu_g[k] * (cx(1, 0) + Sh[k]);
                delta2 += std::norm(hn - h[k]);
                h_new[k] = hn;
            }
            h.swap(h_new);
            const double res = std::sqrt(delta2) / mu_l2;
            stats.residual_history.push_back(res);
            stats.iterations = it + 1;
            stats.iteration_rel = res;
            if (res < opts.tol) break;
            rising = res > prev ? rising + 1 : 0;
            prev = res;
            if (rising >= 10)
                throw SolverError(
                    "solve_beltrami: fixed-point residual rising; increase delta or n");
        }
        if (stats.iteration_rel >= opts.tol && stats.iterations >= opts.max_iter)
            throw SolverError("solve_beltrami: max iterations reached, residual " +
                              std::to_string(stats.iteration_rel));
    } else {
        // BiCGStab on (I - mu_g S) h = mu_g
        auto apply = [&](const std::vector<cx>& x, std::vector<cx>& y) {
            fft.beurling(x, tmp);
            y.resize(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] - mu_g[k] * tmp[k];
        };
        auto dot = [](const std::vector<cx>& a, const std::vector<cx>& b) {
            cx s(0, 0);
            for (std::size_t k = 0; k < a.size(); ++k) s += std::conj(a[k]) * b[k];
            return s;
        };
        const std::size_t m = h.size();
        std::vector<cx> r(m), r0(m), p(m), v(m), s(m), t(m);
        h.assign(m, cx(0, 0));
        r = mu_g;
        r0 = r;
        p = r;
        cx rho_old = dot(r0, r);
        for (int it = 0; it < opts.max_iter; ++it) {
            apply(p, v);
            const cx alpha = rho_old / dot(r0, v);
            for (std::size_t k = 0; k < m; ++k) s[k] = r[k] - alpha * v[k];
            apply(s, t);
            const cx omega = dot(t, s) / dot(t, t);
            for (std::size_t k = 0; k < m; ++k) {
                h[k] += alpha * p[k] + omega * s[k];
                r[k] = s[k] - omega * t[k];
            }
            const double res = norm2(r) / mu_l2;
            stats.residual_history.push_back(res);
            stats.iterations = it + 1;
            stats.iteration_rel = res;
            if (res < opts.tol) break;
            const cx rho_new = dot(r0, r);
            const cx beta = (rho_new / rho_old) * (alpha / omega);
            rho_old = rho_new;
            for (std::size_t k = 0; k < m; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
            if (std::abs(rho_old) < 1e-280)
                throw SolverError("solve_beltrami: BiCGStab breakdown; increase delta or n");
        }
        if (stats.iteration_rel >= opts.tol)
            throw SolverError("solve_beltrami: BiCGStab stalled, residual " +
                              std::to_string(stats.iteration_rel));
    }

    // g = w + C[h], g_w = 1 + S[h], g_wbar = h on the image grid
    std::vector<cx> Ch, Shf;
    fft.cauchy(h, Ch);
    fft.beurling(h, Shf);
    ComplexField gf, gw, gwb;
    gf.grid = gw.grid = gwb.grid = igrid;
    gf.values.resize(igrid.cell_count());
    gw.values.resize(igrid.cell_count());
    gwb.values.resize(igrid.cell_count());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t k = igrid.index(i, j);
            gf.values[k] = igrid.cell_center(i, j) + Ch[k];
            gw.values[k] = cx(1, 0) + Shf[k];
            gwb.values[k] = h[k];
        }

    // pull back through A to the source grid
    QcSolution sol;
    sol.mask = mask;
    sol.truncated_cells = truncated;
    sol.residual = stats;
    sol.f.grid = sol.f_z.grid = sol.f_zbar.grid = grid;
    sol.f.values.resize(grid.cell_count());
    sol.f_z.values.resize(grid.cell_count());
    sol.f_zbar.values.resize(grid.cell_count());
    sol.jacobian.assign(grid.cell_count(), 0.0);
    const cx mean_conj = std::conj(mean);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t k = grid.index(i, j);
            const cx z = grid.cell_center(i, j);
            const cx w = A(z);
            const cx gwv = gw.interpolate(w);
            const cx gwbv = gwb.interpolate(w);
            sol.f.values[k] = gf.interpolate(w);
            // inside the support disk A_z = 1, A_zbar = mean
            sol.f_z.values[k] = gwv + gwbv * mean_conj;
            sol.f_zbar.values[k] = gwv * mean + gwbv;
            sol.jacobian[k] = std::norm(sol.f_z.values[k]) - std::norm(sol.f_zbar.values[k]);
        }

    // finite-difference Beltrami residual on interior masked cells
    double l2 = 0.0, linf = 0.0;
    std::size_t count = 0;
    const double h2 = 2.0 * grid.spacing();
    for (int j = 1; j + 1 < n; ++j)
        for (int i = 1; i + 1 < n; ++i) {
            if (!mask.cell_inside(i, j) || !mask.cell_inside(i - 1, j) ||
                !mask.cell_inside(i + 1, j) || !mask.cell_inside(i, j - 1) ||
                !mask.cell_inside(i, j + 1))
                continue;
            const cx fx = (sol.f.values[grid.index(i + 1, j)] -
                           sol.f.values[grid.index(i - 1, j)]) / h2;
            const cx fy = (sol.f.values[grid.index(i, j + 1)] -
                           sol.f.values[grid.index(i, j - 1)]) / h2;
            const cx fz = 0.5 * (fx - cx(0, 1) * fy);
            const cx fzb = 0.5 * (fx + cx(0, 1) * fy);
            const cx mu_here = mu[grid.index(i, j)];
            const double r = std::abs(fzb - mu_here * fz);
            l2 += r * r;
            linf = std::max(linf, r);
            ++count;
        }
    sol.residual.fd_l2 = count ? std::sqrt(l2 / double(count)) : 0.0;
    sol.residual.fd_linf = linf;
    return sol;
}

JacobianReport jacobian_check(const QcSolution& sol) {
    JacobianReport rep;
    const auto& grid = sol.mask.grid;
    for (int j = 0; j < grid.n; ++j)
        for (int i = 0; i < grid.n; ++i) {
            if (!sol.mask.cell_inside(i, j)) continue;
            ++rep.masked_cells;
            if (sol.jacobian[grid.index(i, j)] <= 0.0) {
                ++rep.violations;
                if (rep.locations.size() < 64) rep.locations.emplace_back(i, j);
            }
        }
    rep.violation_fraction =
        rep.masked_cells ? double(rep.violations) / double(rep.masked_cells) : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Koebe osculation

namespace {

struct OscStep {
    double theta = 0.0;
    double rho = 0.0;
    double rot = 0.0; // post-rotation fixing arg T'(0) = 0
};

cx sqrt_cut(cx w) {
    // branch with the cut on [0, +inf): argument taken in (0, 2 pi)
    double a = std::atan2(w.imag(), w.real());
    if (a < 0) a += 2 * kPi;
    const double r = std::sqrt(std::abs(w));
    return cx(r * std::cos(0.5 * a), r * std::sin(0.5 * a));
}

cx apply_step_raw(cx w, double theta, double rho) {
    const cx zeta = w * cx(std::cos(-theta), std::sin(-theta));
    const cx m1 = (zeta - rho) / (cx(1, 0) - rho * zeta);
    const cx v = sqrt_cut(m1);
    const cx u = -0.5 * (v + cx(1, 0) / v);
    const cx u0(0.0, (1.0 - rho) / (2.0 * std::sqrt(rho)));
    return (u - u0) / (u - std::conj(u0));
}

cx apply_step(cx w, const OscStep& s) {
    const cx raw = apply_step_raw(w, s.theta, s.rho);
    return raw * cx(std::cos(s.rot), std::sin(s.rot));
}

bool segments_cross(cx p1, cx p2, cx q1, cx q2) {
    auto orient = [](cx a, cx b, cx c) {
        const double v = (b.real() - a.real()) * (c.imag() - a.imag()) -
                         (b.imag() - a.imag()) * (c.real() - a.real());
        return v > 0 ? 1 : (v < 0 ? -1 : 0);
    };
    const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
    const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
    return o1 != o2 && o3 != o4;
}

bool ray_is_free(const std::vector<cx>& poly, std::size_t k) {
    const cx beta = poly[k];
    const double ab = std::abs(beta);
    if (ab >= 1.0) return true;
    const cx dir = beta / ab;
    const cx a = beta + dir * (1e-9 + 1e-12);
    const cx b = dir * 1.05;
    const std::size_t n = poly.size();
    for (std::size_t e = 0; e < n; ++e) {
        if (e == k || (e + 1) % n == k) continue;
        if (segments_cross(a, b, poly[e], poly[(e + 1) % n])) return false;
    }
    return true;
}

// Fourier coefficients (0..modes) of samples on a uniform angle grid
std::vector<cx> positive_coeffs(const std::vector<double>& vals, int modes) {
    const int M = static_cast<int>(vals.size());
    std::vector<cx> c(modes + 1, cx(0, 0));
    for (int m = 0; m <= modes; ++m) {
        cx s(0, 0);
        for (int k = 0; k < M; ++k) {
            const double th = 2 * kPi * k / M;
            s += vals[k] * cx(std::cos(m * th), -std::sin(m * th));
        }
        c[m] = s / double(M);
    }
    return c;
}

cx eval_series(const std::vector<cx>& c, cx w) {
    // c0 + 2 sum c_m w^m (Schwarz completion of a real boundary function)
    cx acc(0, 0);
    for (std::size_t m = c.size(); m-- > 1;) acc = (acc + 2.0 * c[m]) * w;
    return acc + c[0];
}

struct KoebeChain {
    cx shift{0, 0};
    double prescale = 1.0;
    std::vector<OscStep> steps;
    std::vector<std::vector<cx>> polish; // coefficient arrays
    cx final_rot{1, 0};

    cx eval(cx z) const {
        cx w = (z - shift) * prescale;
        for (const auto& s : steps) w = apply_step(w, s);
        for (const auto& c : polish) w = w * std::exp(-eval_series(c, w));
        return w * final_rot;
    }
};

} // namespace

DiskMap riemann_map_polyline(const std::vector<cx>& boundary, cx anchor, std::size_t marked,
                             const RiemannOptions& opts) {
    if (boundary.size() < 16) throw ValidationError("riemann_map: boundary too coarse");
    KoebeChain chain;
    chain.shift = anchor;

    std::vector<cx> poly(boundary.size());
    double rmax = 0.0;
    for (std::size_t k = 0; k < boundary.size(); ++k) {
        poly[k] = boundary[k] - anchor;
        rmax = std::max(rmax, std::abs(poly[k]));
    }
    chain.prescale = 1.0 / (rmax * (1.0 + 1e-12));
    for (auto& w : poly) w *= chain.prescale;

    // osculation: repeatedly open the domain at a nearest boundary point
    for (int it = 0; it < opts.max_osculation_steps; ++it) {
        std::size_t kmin = 0;
        double rmin = 1e300;
        for (std::size_t k = 0; k < poly.size(); ++k)
            if (std::abs(poly[k]) < rmin) {
                rmin = std::abs(poly[k]);
                kmin = k;
            }
        if (rmin >= 1.0 - opts.osculation_stop) break;

        std::size_t pick = kmin;
        if (!ray_is_free(poly, pick)) {
            // fall back to the freest of the nearest candidates
            std::vector<std::size_t> order(poly.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return std::abs(poly[a]) < std::abs(poly[b]);
            });
            bool found = false;
            for (std::size_t c = 0; c < std::min<std::size_t>(order.size(), 128); ++c)
                if (ray_is_free(poly, order[c])) {
                    pick = order[c];
                    found = true;
                    break;
                }
            if (!found) pick = kmin;
        }

        OscStep s;
        s.theta = std::arg(poly[pick]);
        s.rho = std::abs(poly[pick]);
        // self-calibrated rotation: T'(0) made positive real
        const cx probe = apply_step_raw(cx(1e-7, 0), s.theta, s.rho);
        s.rot = -std::arg(probe);
        chain.steps.push_back(s);
        for (auto& w : poly) w = apply_step(w, s);
    }

    // near-circle polish by Schwarz-integral corrections
    for (int round = 0; round < opts.polish_rounds; ++round) {
        double worst = 0.0;
        for (auto& w : poly) worst = std::max(worst, std::abs(std::abs(w) - 1.0));
        if (worst < 1e-11) break;
        // resample log-radius on a uniform angle grid
        const int M = 2 * opts.polish_modes;
        std::vector<double> lam(M, 0.0);
        std::vector<std::pair<double, double>> samples; // (angle, log radius)
        samples.reserve(poly.size());
        for (auto& w : poly) {
            double a = std::arg(w);
            if (a < 0) a += 2 * kPi;
            samples.emplace_back(a, std::log(std::abs(w)));
        }
        std::sort(samples.begin(), samples.end());
        for (int k = 0; k < M; ++k) {
            const double th = 2 * kPi * k / M;
            auto it = std::lower_bound(samples.begin(), samples.end(),
                                       std::make_pair(th, -1e300));
            const auto& hi = it == samples.end() ? samples.front() : *it;
            const auto& lo = it == samples.begin() ? samples.back() : *(it - 1);
            double a0 = lo.first, a1 = hi.first;
            if (a1 <= a0) a1 += 2 * kPi;
            double t = a1 > a0 ? ((th < a0 ? th + 2 * kPi : th) - a0) / (a1 - a0) : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            lam[k] = lo.second + t * (hi.second - lo.second);
        }
        auto coeffs = positive_coeffs(lam, opts.polish_modes);
        chain.polish.push_back(coeffs);
        for (auto& w : poly) w = w * std::exp(-eval_series(coeffs, w));
    }

    // pin the marked boundary sample at angle zero
    const cx wm = poly[marked];
    chain.final_rot = std::conj(wm) / std::abs(wm);
    for (auto& w : poly) w *= chain.final_rot;

    double roundness = 0.0;
    for (auto& w : poly) roundness = std::max(roundness, std::abs(std::abs(w) - 1.0));

    std::vector<std::pair<double, cx>> table(poly.size());
    for (std::size_t k = 0; k < poly.size(); ++k)
        table[k] = {2 * kPi * double(k) / double(poly.size()), poly[k]};

    DiskMap map([chain](cx z) { return chain.eval(z); }, std::move(table),
                "g(anchor)=0, marked boundary point to 1");
    map.boundary_roundness = roundness;

    // Cauchy-Riemann defect on a small interior probe lattice; probe points
    // are kept inside the source boundary by a winding test
    {
        auto inside_boundary = [&boundary](cx p) {
            int winding = 0;
            const std::size_t n = boundary.size();
            for (std::size_t e = 0; e < n; ++e) {
                const cx a = boundary[e], b = boundary[(e + 1) % n];
                if ((a.imag() <= p.imag()) != (b.imag() <= p.imag())) {
                    const double xc = a.real() + (p.imag() - a.imag()) /
                                                     (b.imag() - a.imag()) *
                                                     (b.real() - a.real());
                    if (xc > p.real()) winding += (b.imag() > a.imag()) ? 1 : -1;
                }
            }
            return winding != 0;
        };
        double l2 = 0.0;
        int cnt = 0;
        const double step = 0.09;
        const double hh = 0.02 * rmax;
        for (double y = -0.8; y <= 0.8; y += step)
            for (double x = -0.8; x <= 0.8; x += step) {
                const cx z0 = anchor + cx(x, y) * rmax;
                bool ok = true;
                cx vals[4];
                const cx offs[4] = {cx(hh, 0), cx(-hh, 0), cx(0, hh), cx(0, -hh)};
                for (int q = 0; q < 4 && ok; ++q) {
                    const cx p = z0 + offs[q];
                    if (!inside_boundary(p))
                        ok = false;
                    else
                        vals[q] = chain.eval(p);
                }
                if (!ok) continue;
                const cx fx = (vals[0] - vals[1]) / (2 * hh);
                const cx fy = (vals[2] - vals[3]) / (2 * hh);
                const cx fzb = 0.5 * (fx + cx(0, 1) * fy);
                l2 += std::norm(fzb);
                ++cnt;
            }
        map.conformality_residual_l2 = cnt ? std::sqrt(l2 / cnt) : 0.0;
    }
    return map;
}

DiskMap riemann_map(const Domain& domain, const RiemannOptions& opts) {
    if (domain.connectivity() != 1)
        throw TopologyError("riemann_map: domain must be simply connected");
    if (domain.kind == field::DomainKind::SlitDisk)
        throw TopologyError("riemann_map: slit disk is not Jordan; use the prime-end "
                            "reference map");
    auto boundary = domain.boundary_polyline(opts.boundary_samples);
    return riemann_map_polyline(boundary, domain.center, 0, opts);
}

// ---------------------------------------------------------------------------
// Annulus maps

AnnulusMapResult annulus_map(const Domain& domain, int grid_n) {
    if (domain.connectivity() != 2)
        throw TopologyError("annulus_map: domain must be doubly connected");
    AnnulusMapResult out;

    if (domain.kind == field::DomainKind::Annulus) {
        const cx c = domain.center;
        const double R = domain.radius;
        out.inner_radius = domain.inner_radius / domain.radius;
        out.modulus = std::log(1.0 / out.inner_radius) / (2 * kPi);
        std::vector<std::pair<double, cx>> table;
        const int M = 1024;
        for (int k = 0; k < M; ++k) {
            const double th = 2 * kPi * k / M;
            table.emplace_back(th, cx(std::cos(th), std::sin(th)));
        }
        DiskMap map([c, R](cx z) { return (z - c) / R; }, std::move(table),
                    "identity up to translation and scale");
        map.inner_radius = out.inner_radius;
        out.map = map;
        return out;
    }

    // square frame: potential + conjugate on the grid
    const auto mask = DomainMask::build(domain, grid_n, 1.1);
    const GridSpec& grid = mask.grid;
    const double ho = domain.rect_hx, hi = ho / 2.0;
    std::vector<std::uint32_t> pe, pf;
    for (int j = 0; j < grid_n; ++j)
        for (int i = 0; i < grid_n; ++i) {
            const cx w = grid.cell_center(i, j) - domain.center;
            const std::uint32_t c = static_cast<std::uint32_t>(grid.index(i, j));
            if (std::abs(w.real()) <= hi && std::abs(w.imag()) <= hi)
                pe.push_back(c); // hole: u = 0
            else if (std::abs(w.real()) >= ho || std::abs(w.imag()) >= ho)
                pf.push_back(c); // outside: u = 1
        }
    auto cap = modulus::condenser_capacity({mask, pe, pf}, 1e-9);
    std::vector<double> u = cap.potential;
    // the solver may have swapped plate order; normalize to u = 1 outside
    if (!pf.empty() && u[pf.front()] < 0.5)
        for (auto& val : u) val = 1.0 - val;

    // period by flux through a mid square contour (one specific contour --
    // deliberately not the global energy)
    const double rmid = 0.5 * (hi + ho);
    double flux = 0.0;
    for (int j = 0; j < grid_n; ++j)
        for (int i = 0; i + 1 < grid_n; ++i) {
            const cx a = grid.cell_center(i, j) - domain.center;
            const cx b = grid.cell_center(i + 1, j) - domain.center;
            const double la = std::max(std::abs(a.real()), std::abs(a.imag()));
            const double lb = std::max(std::abs(b.real()), std::abs(b.imag()));
            if ((la - rmid) * (lb - rmid) < 0) {
                const double du = u[grid.index(i + 1, j)] - u[grid.index(i, j)];
                flux += (lb > la ? du : -du);
            }
        }
    for (int j = 0; j + 1 < grid_n; ++j)
        for (int i = 0; i < grid_n; ++i) {
            const cx a = grid.cell_center(i, j) - domain.center;
            const cx b = grid.cell_center(i, j + 1) - domain.center;
            const double la = std::max(std::abs(a.real()), std::abs(a.imag()));
            const double lb = std::max(std::abs(b.real()), std::abs(b.imag()));
            if ((la - rmid) * (lb - rmid) < 0) {
                const double du = u[grid.index(i, j + 1)] - u[grid.index(i, j)];
                flux += (lb > la ? du : -du);
            }
        }
    if (!(flux > 0)) throw SolverError("annulus_map: degenerate flux");
    const double rstar = std::exp(-2 * kPi / flux);

    // conjugate by BFS integration with a cut along the positive x-axis
    std::vector<double> v(grid.cell_count(), 0.0);
    std::vector<std::uint8_t> have(grid.cell_count(), 0);
    auto inside = [&](int i, int j) {
        return i >= 0 && i < grid_n && j >= 0 && j < grid_n && mask.cell_inside(i, j);
    };
    auto crosses_cut = [&](int i, int j, int i2, int j2) {
        const cx a = grid.cell_center(i, j) - domain.center;
        const cx b = grid.cell_center(i2, j2) - domain.center;
        return a.real() > 0 && b.real() > 0 && ((a.imag() > 0) != (b.imag() > 0));
    };
    auto ux = [&](int i, int j) {
        const int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, grid_n - 1);
        return (u[grid.index(i1, j)] - u[grid.index(i0, j)]) / ((i1 - i0) * grid.spacing());
    };
    auto uy = [&](int i, int j) {
        const int j0 = std::max(j - 1, 0), j1 = std::min(j + 1, grid_n - 1);
        return (u[grid.index(i, j1)] - u[grid.index(i, j0)]) / ((j1 - j0) * grid.spacing());
    };
    // seed on the negative x-axis
    int si = -1, sj = grid_n / 2;
    for (int i = 0; i < grid_n && si < 0; ++i)
        if (inside(i, sj)) si = i;
    if (si < 0) throw SolverError("annulus_map: no seed cell");
    std::vector<std::pair<int, int>> queue;
    queue.emplace_back(si, sj);
    have[grid.index(si, sj)] = 1;
    const double h = grid.spacing();
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        auto [i, j] = queue[qi];
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int q = 0; q < 4; ++q) {
            const int i2 = i + di[q], j2 = j + dj[q];
            if (!inside(i2, j2) || have[grid.index(i2, j2)] || crosses_cut(i, j, i2, j2))
                continue;
            double dv = 0.0;
            if (di[q] != 0)
                dv = -0.5 * (uy(i, j) + uy(i2, j2)) * di[q] * h;
            else
                dv = 0.5 * (ux(i, j) + ux(i2, j2)) * dj[q] * h;
            v[grid.index(i2, j2)] = v[grid.index(i, j)] + dv;
            have[grid.index(i2, j2)] = 1;
            queue.emplace_back(i2, j2);
        }
    }

    ComplexField uf, vf;
    uf.grid = vf.grid = grid;
    uf.values.resize(grid.cell_count());
    vf.values.resize(grid.cell_count());
    for (std::size_t k = 0; k < grid.cell_count(); ++k) {
        uf.values[k] = cx(u[k], 0);
        vf.values[k] = cx(v[k], 0);
    }
    const double lr = std::log(rstar);
    auto eval = [uf, vf, flux, lr](cx z) {
        const double uu = uf.interpolate(z).real();
        const double vv = vf.interpolate(z).real();
        const double theta = 2 * kPi * vv / flux;
        const double mod = std::exp(lr * (1.0 - uu));
        return cx(mod * std::cos(theta), mod * std::sin(theta));
    };
    std::vector<std::pair<double, cx>> table;
    const int M = 1024;
    for (int k = 0; k < M; ++k) {
        const double th = 2 * kPi * k / M;
        // sample just inside the outer boundary
        const double rr = ho * 0.985 / std::max(std::abs(std::cos(th)), std::abs(std::sin(th)));
        table.emplace_back(th, eval(domain.center + rr * cx(std::cos(th), std::sin(th))));
    }
    DiskMap map(eval, std::move(table), "potential-conjugate frame map");
    map.inner_radius = rstar;
    out.map = map;
    out.inner_radius = rstar;
    out.modulus = std::log(1.0 / rstar) / (2 * kPi);
    return out;
}

DiskMap compose_normalized(const QcSolution& sol, const DiskMap& mapper,
                           const Domain& source_domain, int boundary_samples) {
    ComplexField f = sol.f;
    auto inner = mapper;
    DiskMap::EvalFn eval = [f, inner](cx z) { return inner(f.interpolate(z)); };

    std::vector<std::pair<double, cx>> table;
    auto bd = source_domain.boundary_polyline(boundary_samples);
    for (std::size_t k = 0; k < bd.size(); ++k) {
        const double s = 2 * kPi * double(k) / double(bd.size());
        cx w = eval(bd[k]);
        table.emplace_back(s, w);
    }
    DiskMap g(eval, std::move(table), "composed: " + mapper.normalization());
    g.inner_radius = mapper.inner_radius;

    // how round the composed boundary image is
    double worst = 0.0;
    for (const auto& [s, w] : g.boundary_table())
        worst = std::max(worst, std::abs(std::abs(w) - 1.0));
    g.boundary_roundness = worst;
    return g;
}

} // namespace beltrami::qc
