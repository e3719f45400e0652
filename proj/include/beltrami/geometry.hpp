#ifndef BELTRAMI_GEOMETRY_HPP
#define BELTRAMI_GEOMETRY_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "beltrami/errors.hpp"

namespace beltrami::field {

using cx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

// Square cell-centered grid: n x n cells covering
// [center - half_width, center + half_width]^2, sampled at cell centers.
struct GridSpec {
    cx center{0.0, 0.0};
    double half_width = 1.0;
    int n = 64; // cells per side, power of two, >= 16

    GridSpec() = default;
    GridSpec(cx c, double hw, int n_);

    double spacing() const { return 2.0 * half_width / n; }
    cx cell_center(int i, int j) const {
        const double h = spacing();
        return center + cx(-half_width + (i + 0.5) * h, -half_width + (j + 0.5) * h);
    }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n + i; }
    std::size_t cell_count() const { return static_cast<std::size_t>(n) * n; }
    // Cell containing z, clamped to the grid; returns false if z is outside.
    bool locate(cx z, int& i, int& j) const;
};

enum class DomainKind { Disk, Annulus, Rectangle, Ellipse, SlitDisk, SquareFrame };

// Analytic descriptor of a catalog domain. The mask is derived from it;
// geometric predicates (membership, boundary distance, boundary sampling)
// are evaluated on the descriptor, not the mask, so quadratures are not
// limited by grid resolution.
struct Domain {
    DomainKind kind = DomainKind::Disk;
    cx center{0.0, 0.0};
    double radius = 1.0;       // disk/ellipse circumradius/annulus outer
    double inner_radius = 0.0; // annulus inner
    double semi_minor = 1.0;   // ellipse b (semi-major = radius)
    double rect_hx = 1.0, rect_hy = 1.0; // rectangle half-sides
    double slit_from = 0.0;    // slit [slit_from, slit_to) on the positive axis
    double slit_to = 1.0;

    static Domain disk(cx c, double R);
    static Domain annulus(cx c, double r, double R);
    static Domain rectangle(cx c, double hx, double hy);
    static Domain ellipse(cx c, double a, double b);
    static Domain slit_disk(double x0, double x1);
    static Domain square_frame(cx c, double half_outer); // hole half-size = half_outer/2

    bool contains(cx z) const;
    // Euclidean distance from an interior point to the boundary (exact).
    double boundary_distance(cx z) const;
    // Circumradius about the center (used to size grids).
    double circumradius() const;
    int connectivity() const; // 1 = simply connected, 2 = doubly connected
    // Closed polyline approximating boundary component `comp` (0 = outer),
    // positively oriented for the outer component.
    std::vector<cx> boundary_polyline(int samples, int comp = 0) const;
    std::string describe() const;
};

// Angular intervals (theta_a, theta_b) of { z0 + r e^{i theta} } inside D.
// Endpoints are refined by bisection to ~1e-12. Used by circle quadratures
// and cross-cut chains.
std::vector<std::pair<double, double>> circle_arcs_inside(const Domain& d, cx z0, double r,
                                                          int probe = 2048);

struct DomainMask {
    GridSpec grid;
    Domain domain;
    std::vector<std::uint8_t> inside; // 1 per cell whose center lies in the domain

    static DomainMask build(const Domain& d, int n, double margin_factor = 1.3);
    bool cell_inside(int i, int j) const { return inside[grid.index(i, j)] != 0; }
    std::size_t count_inside() const;
};

struct ComplexField {
    GridSpec grid;
    std::vector<cx> values; // per cell, meaningful on masked cells
    // Bilinear interpolation of the field at z from the four surrounding
    // cell centers; valid anywhere the field carries values.
    cx interpolate(cx z) const;
};

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);
double fit_r2(const std::vector<double>& x, const std::vector<double>& y);

} // namespace beltrami::field

#endif
