#include "beltrami/modulus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace beltrami::modulus {

using field::kPi;

namespace {

void mark_cells_on_segment(const GridSpec& grid, cx a, cx b, std::set<std::uint32_t>& out) {
    const double h = grid.spacing();
    const int steps = std::max(1, static_cast<int>(std::abs(b - a) / (0.5 * h)) + 1);
    for (int k = 0; k <= steps; ++k) {
        const cx p = a + (b - a) * (double(k) / steps);
        int i, j;
        if (grid.locate(p, i, j)) out.insert(static_cast<std::uint32_t>(grid.index(i, j)));
    }
}

} // namespace

std::vector<std::uint32_t> plate_from_polyline(const GridSpec& grid,
                                              const std::vector<cx>& samples, bool closed) {
    std::set<std::uint32_t> cells;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k)
        mark_cells_on_segment(grid, samples[k], samples[k + 1], cells);
    if (closed && samples.size() > 2)
        mark_cells_on_segment(grid, samples.back(), samples.front(), cells);
    return {cells.begin(), cells.end()};
}

std::vector<std::uint32_t> plate_from_circle(const GridSpec& grid, cx c, double r) {
    std::vector<cx> pts;
    const int n = std::max(64, static_cast<int>(2 * kPi * r / (0.5 * grid.spacing())) + 1);
    for (int k = 0; k < n; ++k) {
        const double th = 2 * kPi * k / n;
        pts.push_back(c + r * cx(std::cos(th), std::sin(th)));
    }
    return plate_from_polyline(grid, pts, true);
}

std::vector<std::uint32_t> plate_solid_disk(const GridSpec& grid, cx c, double r) {
    std::vector<std::uint32_t> cells;
    for (int j = 0; j < grid.n; ++j)
        for (int i = 0; i < grid.n; ++i)
            if (std::abs(grid.cell_center(i, j) - c) <= r)
                cells.push_back(static_cast<std::uint32_t>(grid.index(i, j)));
    return cells;
}

std::vector<std::uint32_t> plate_outside_radius(const GridSpec& grid, cx c, double r) {
    std::vector<std::uint32_t> cells;
    for (int j = 0; j < grid.n; ++j)
        for (int i = 0; i < grid.n; ++i)
            if (std::abs(grid.cell_center(i, j) - c) >= r)
                cells.push_back(static_cast<std::uint32_t>(grid.index(i, j)));
    return cells;
}

namespace {

enum : std::uint8_t { kOutside = 0, kFree = 1, kPlateE = 2, kPlateF = 3 };

// 5-point graph Laplacian over the labeled grid; Dirichlet plate values are
// folded into the right-hand side, missing neighbors act as reflecting walls.
struct LaplaceSystem {
    const GridSpec& grid;
    const std::vector<std::uint8_t>& label;
    std::vector<std::uint32_t> free_cells;
    std::vector<std::int32_t> free_index; // per cell, -1 when not free

    LaplaceSystem(const GridSpec& g, const std::vector<std::uint8_t>& lab)
        : grid(g), label(lab), free_index(g.cell_count(), -1) {
        for (std::uint32_t c = 0; c < g.cell_count(); ++c)
            if (label[c] == kFree) {
                free_index[c] = static_cast<std::int32_t>(free_cells.size());
                free_cells.push_back(c);
            }
    }

    template <typename F>
    void for_neighbors(std::uint32_t c, F&& f) const {
        const int n = grid.n;
        const int i = static_cast<int>(c % n), j = static_cast<int>(c / n);
        if (i > 0) f(c - 1);
        if (i + 1 < n) f(c + 1);
        if (j > 0) f(c - n);
        if (j + 1 < n) f(c + n);
    }

    // y = A x where A is the free-free block (degree on the diagonal)
    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        for (std::size_t k = 0; k < free_cells.size(); ++k) {
            const std::uint32_t c = free_cells[k];
            double deg = 0.0, off = 0.0;
            for_neighbors(c, [&](std::uint32_t nb) {
                if (label[nb] == kOutside) return;
                deg += 1.0;
                if (label[nb] == kFree) off += x[free_index[nb]];
            });
            y[k] = deg * x[k] - off;
        }
    }

    std::vector<double> rhs() const {
        std::vector<double> b(free_cells.size(), 0.0);
        for (std::size_t k = 0; k < free_cells.size(); ++k) {
            const std::uint32_t c = free_cells[k];
            for_neighbors(c, [&](std::uint32_t nb) {
                if (label[nb] == kPlateF) b[k] += 1.0;
            });
        }
        return b;
    }
};

} // namespace

CapacityResult condenser_capacity(const CondenserSpec& spec, double tol, int max_iter) {
    const GridSpec& grid = spec.mask.grid;
    if (spec.plate_e.empty() || spec.plate_f.empty())
        throw ValidationError("condenser: both plates must be nonempty");

    std::vector<std::uint8_t> label(grid.cell_count(), kOutside);
    for (std::uint32_t c = 0; c < grid.cell_count(); ++c)
        if (spec.mask.inside[c]) label[c] = kFree;
    // plates override; canonical plate order keeps capacity(E,F) == capacity(F,E)
    const bool swap_plates =
        !spec.plate_e.empty() && !spec.plate_f.empty() &&
        *std::min_element(spec.plate_f.begin(), spec.plate_f.end()) <
            *std::min_element(spec.plate_e.begin(), spec.plate_e.end());
    const auto& pe = swap_plates ? spec.plate_f : spec.plate_e;
    const auto& pf = swap_plates ? spec.plate_e : spec.plate_f;
    for (auto c : pe) label[c] = kPlateE;
    for (auto c : pf) {
        if (label[c] == kPlateE) throw ValidationError("condenser: plates intersect");
        label[c] = kPlateF;
    }

    // separation by at least 2 cells (Chebyshev)
    {
        const int n = grid.n;
        for (auto c : pe) {
            const int i = static_cast<int>(c % n), j = static_cast<int>(c / n);
            for (int dj = -2; dj <= 2; ++dj)
                for (int di = -2; di <= 2; ++di) {
                    const int a = i + di, b = j + dj;
                    if (a < 0 || a >= n || b < 0 || b >= n) continue;
                    if (label[grid.index(a, b)] == kPlateF)
                        throw ValidationError("condenser: plates closer than 2 cells");
                }
        }
    }

    LaplaceSystem sys(grid, label);
    const std::size_t m = sys.free_cells.size();
    if (max_iter <= 0) max_iter = 40 * grid.n;

    // conjugate gradient on the free block
    std::vector<double> x(m, 0.0), r = sys.rhs(), p = r, Ap(m, 0.0);
    double rr = 0.0;
    for (double v : r) rr += v * v;
    const double rr0 = rr > 0 ? rr : 1.0;
    int it = 0;
    for (; it < max_iter && rr > tol * tol * rr0; ++it) {
        sys.apply(p, Ap);
        double pAp = 0.0;
        for (std::size_t k = 0; k < m; ++k) pAp += p[k] * Ap[k];
        if (pAp <= 0) break;
        const double alpha = rr / pAp;
        for (std::size_t k = 0; k < m; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * Ap[k];
        }
        double rr_new = 0.0;
        for (double v : r) rr_new += v * v;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < m; ++k) p[k] = r[k] + beta * p[k];
    }
    const double rel_res = std::sqrt(rr / rr0);
    if (rel_res > tol)
        throw SolverError("condenser: CG did not converge, residual " + std::to_string(rel_res));

    CapacityResult out;
    out.grid_n = grid.n;
    out.iterations = it;
    out.residual = rel_res;
    out.potential.assign(grid.cell_count(), 0.0);
    for (std::uint32_t c = 0; c < grid.cell_count(); ++c)
        if (label[c] == kPlateF) out.potential[c] = 1.0;
    for (std::size_t k = 0; k < m; ++k) out.potential[sys.free_cells[k]] = x[k];

    // energy over edges between participating cells
    double energy = 0.0;
    const int n = grid.n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::uint32_t c = static_cast<std::uint32_t>(grid.index(i, j));
            if (label[c] == kOutside) continue;
            if (i + 1 < n && label[c + 1] != kOutside) {
                const double d = out.potential[c + 1] - out.potential[c];
                energy += d * d;
            }
            if (j + 1 < n && label[c + n] != kOutside) {
                const double d = out.potential[c + n] - out.potential[c];
                energy += d * d;
            }
        }
    out.value = energy;
    return out;
}

MinorantResult plane_minorant_check(const std::vector<cx>& e_samples,
                                    const std::vector<cx>& f_samples, cx z0, double r, double R,
                                    int grid_n) {
    if (!(0 < r && r < R)) throw ValidationError("plane_minorant_check: need 0 < r < R");
    // precondition: each set meets every circle S(z0, rho) on the lattice
    auto meets_all = [&](const std::vector<cx>& pts) {
        const int lattice = 64;
        for (int k = 0; k <= lattice; ++k) {
            const double rho = r + (R - r) * k / lattice;
            bool hit = false;
            for (std::size_t m = 0; m + 1 < pts.size() && !hit; ++m) {
                const double d1 = std::abs(pts[m] - z0), d2 = std::abs(pts[m + 1] - z0);
                if ((d1 - rho) * (d2 - rho) <= 0) hit = true;
            }
            if (!hit) return false;
        }
        return true;
    };
    if (!meets_all(e_samples) || !meets_all(f_samples))
        throw ValidationError(
            "plane_minorant_check: a set misses some circle S(z0, rho) on the lattice");

    // capacity inside a large disk underestimates the plane capacity, so a
    // positive margin certifies the bound
    auto mask = DomainMask::build(Domain::disk(z0, 4.0 * R), grid_n, 1.05);
    CondenserSpec spec{mask, plate_from_polyline(mask.grid, e_samples, false),
                       plate_from_polyline(mask.grid, f_samples, false)};
    auto cap = condenser_capacity(spec, 1e-8);
    MinorantResult res;
    res.capacity = cap.value;
    res.bound = (2.0 / kPi) * std::log(R / r);
    res.margin = res.capacity - res.bound;
    res.holds = res.margin >= 0.0;
    return res;
}

namespace {

// Scanline polygon rasterization: inside flags for cell centers against a
// closed polyline (evenodd rule).
std::vector<std::uint8_t> rasterize_polygon(const GridSpec& grid, const std::vector<cx>& poly) {
    std::vector<std::uint8_t> inside(grid.cell_count(), 0);
    const int n = grid.n;
    for (int j = 0; j < n; ++j) {
        const double y = grid.cell_center(0, j).imag();
        std::vector<double> xs;
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const cx a = poly[k], b = poly[(k + 1) % poly.size()];
            if ((a.imag() > y) == (b.imag() > y)) continue;
            xs.push_back(a.real() +
                         (y - a.imag()) / (b.imag() - a.imag()) * (b.real() - a.real()));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t s = 0; s + 1 < xs.size(); s += 2) {
            for (int i = 0; i < n; ++i) {
                const double x = grid.cell_center(i, j).real();
                if (x > xs[s] && x < xs[s + 1]) inside[grid.index(i, j)] = 1;
            }
        }
    }
    return inside;
}

} // namespace

RingCheckResult ring_inequality_check(const MapFn& f, const Domain& domain, cx z0, double r1,
                                      double r2, const criteria::QSource& q, int grid_n,
                                      double tol_geom) {
    const double d_sup = domain.circumradius() + std::abs(domain.center - z0);
    if (!(0 < r1 && r1 < r2 && r2 < d_sup))
        throw ValidationError("ring_inequality_check: need 0 < r1 < r2 < d(z0)");

    // RHS: reciprocal of the circle-norm integral over [r1, r2]
    const int nr = 192;
    std::vector<double> radii(nr + 1);
    for (int k = 0; k <= nr; ++k) radii[k] = r2 * std::pow(r1 / r2, double(k) / nr);
    auto norm = criteria::circle_norm(q, z0, radii);
    double integral = 0.0;
    for (int k = 1; k <= nr; ++k) {
        const double g_hi = norm.values[k - 1] > 0 ? radii[k - 1] / norm.values[k - 1] : 0.0;
        const double g_lo = norm.values[k] > 0 ? radii[k] / norm.values[k] : 0.0;
        integral += 0.5 * (g_hi + g_lo) * std::log(radii[k - 1] / radii[k]);
    }
    if (!(integral > 0)) throw GeometryError("ring_inequality_check: vanishing norm integral");

    // LHS: map the domain boundary and the two circles, rebuild a mask on the
    // image bounding box, and measure the condenser there
    const int bsamples = 4096;
    std::vector<cx> image_boundary;
    for (cx p : domain.boundary_polyline(bsamples)) image_boundary.push_back(f(p));
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (cx w : image_boundary) {
        xmin = std::min(xmin, w.real());
        xmax = std::max(xmax, w.real());
        ymin = std::min(ymin, w.imag());
        ymax = std::max(ymax, w.imag());
    }
    const cx icenter(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    const double ihw = 0.55 * std::max(xmax - xmin, ymax - ymin);
    GridSpec igrid(icenter, ihw, grid_n);

    DomainMask imask;
    imask.grid = igrid;
    imask.domain = domain; // descriptor retained for provenance only
    imask.inside = rasterize_polygon(igrid, image_boundary);
    if (domain.connectivity() == 2) {
        // carve the hole
        std::vector<cx> hole;
        for (cx p : domain.boundary_polyline(bsamples, 1)) hole.push_back(f(p));
        const auto hole_mask = rasterize_polygon(igrid, hole);
        for (std::size_t c = 0; c < imask.inside.size(); ++c)
            if (hole_mask[c]) imask.inside[c] = 0;
    }

    auto map_circle = [&](double r) {
        std::vector<cx> img;
        const auto arcs = field::circle_arcs_inside(domain, z0, r);
        for (auto [a, b] : arcs) {
            const int m = 4 * grid_n;
            for (int k = 0; k <= m; ++k) {
                const double th = a + (b - a) * k / m;
                img.push_back(f(z0 + r * cx(std::cos(th), std::sin(th))));
            }
        }
        return img;
    };
    auto pe = plate_from_polyline(igrid, map_circle(r1), false);
    auto pf = plate_from_polyline(igrid, map_circle(r2), false);
    if (pe.empty() || pf.empty())
        throw GeometryError("ring_inequality_check: image plate degenerated");
    // plate cells must not be claimed by the mask complement
    for (auto c : pe) imask.inside[c] = 0;
    for (auto c : pf) imask.inside[c] = 0;

    CondenserSpec spec{imask, pe, pf};
    auto cap = condenser_capacity(spec, 1e-8);

    RingCheckResult res;
    res.lhs = cap.value;
    res.rhs = 1.0 / integral;
    res.slack = (res.rhs - res.lhs) / res.rhs;
    res.holds = res.lhs <= res.rhs * (1.0 + tol_geom);
    return res;
}

} // namespace beltrami::modulus
