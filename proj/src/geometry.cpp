#include "beltrami/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>
#include <sstream>

namespace beltrami::field {

GridSpec::GridSpec(cx c, double hw, int n_) : center(c), half_width(hw), n(n_) {
    if (!(hw > 0.0) || !std::isfinite(hw))
        throw ValidationError("GridSpec: half_width must be positive and finite");
    if (n < 16 || !std::has_single_bit(static_cast<unsigned>(n)))
        throw ValidationError("GridSpec: n must be a power of two >= 16, got " + std::to_string(n));
}

bool GridSpec::locate(cx z, int& i, int& j) const {
    const double h = spacing();
    const double x = (z.real() - center.real() + half_width) / h - 0.5;
    const double y = (z.imag() - center.imag() + half_width) / h - 0.5;
    i = static_cast<int>(std::lround(x));
    j = static_cast<int>(std::lround(y));
    return i >= 0 && i < n && j >= 0 && j < n;
}

Domain Domain::disk(cx c, double R) {
    if (!(R > 0)) throw ValidationError("disk: radius must be positive");
    Domain d;
    d.kind = DomainKind::Disk;
    d.center = c;
    d.radius = R;
    return d;
}

Domain Domain::annulus(cx c, double r, double R) {
    if (!(0 < r && r < R)) throw ValidationError("annulus: need 0 < r < R");
    Domain d;
    d.kind = DomainKind::Annulus;
    d.center = c;
    d.inner_radius = r;
    d.radius = R;
    return d;
}

Domain Domain::rectangle(cx c, double hx, double hy) {
    if (!(hx > 0 && hy > 0)) throw ValidationError("rectangle: half-sides must be positive");
    Domain d;
    d.kind = DomainKind::Rectangle;
    d.center = c;
    d.rect_hx = hx;
    d.rect_hy = hy;
    d.radius = std::hypot(hx, hy);
    return d;
}

Domain Domain::ellipse(cx c, double a, double b) {
    if (!(a > 0 && b > 0 && b <= a)) throw ValidationError("ellipse: need 0 < b <= a");
    Domain d;
    d.kind = DomainKind::Ellipse;
    d.center = c;
    d.radius = a;
    d.semi_minor = b;
    return d;
}

Domain Domain::slit_disk(double x0, double x1) {
    if (!(0.0 <= x0 && x0 < x1 && x1 <= 1.0))
        throw ValidationError("slit_disk: need 0 <= x0 < x1 <= 1");
    Domain d;
    d.kind = DomainKind::SlitDisk;
    d.center = cx(0, 0);
    d.radius = 1.0;
    d.slit_from = x0;
    d.slit_to = x1;
    return d;
}

Domain Domain::square_frame(cx c, double half_outer) {
    if (!(half_outer > 0)) throw ValidationError("square_frame: half size must be positive");
    Domain d;
    d.kind = DomainKind::SquareFrame;
    d.center = c;
    d.rect_hx = half_outer;
    d.rect_hy = half_outer;
    d.radius = half_outer * std::sqrt(2.0);
    return d;
}

namespace {
double dist_point_segment(cx p, cx a, cx b) {
    const cx ab = b - a;
    const double L2 = std::norm(ab);
    if (L2 == 0) return std::abs(p - a);
    double t = ((p - a).real() * ab.real() + (p - a).imag() * ab.imag()) / L2;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(p - (a + t * ab));
}
} // namespace

bool Domain::contains(cx z) const {
    const cx w = z - center;
    switch (kind) {
    case DomainKind::Disk:
        return std::abs(w) < radius;
    case DomainKind::Annulus: {
        const double r = std::abs(w);
        return r > inner_radius && r < radius;
    }
    case DomainKind::Rectangle:
        return std::abs(w.real()) < rect_hx && std::abs(w.imag()) < rect_hy;
    case DomainKind::Ellipse: {
        const double a = radius, b = semi_minor;
        return (w.real() * w.real()) / (a * a) + (w.imag() * w.imag()) / (b * b) < 1.0;
    }
    case DomainKind::SlitDisk: {
        if (std::abs(w) >= 1.0) return false;
        // hair-width barrier so the slit separates circle arcs reliably
        const bool on_slit =
            std::abs(w.imag()) <= 1e-12 && w.real() >= slit_from && w.real() < slit_to;
        return !on_slit;
    }
    case DomainKind::SquareFrame: {
        const double ho = rect_hx, hi = rect_hx / 2.0;
        const bool in_outer = std::abs(w.real()) < ho && std::abs(w.imag()) < ho;
        const bool in_hole = std::abs(w.real()) <= hi && std::abs(w.imag()) <= hi;
        return in_outer && !in_hole;
    }
    }
    return false;
}

double Domain::boundary_distance(cx z) const {
    const cx w = z - center;
    switch (kind) {
    case DomainKind::Disk:
        return radius - std::abs(w);
    case DomainKind::Annulus:
        return std::min(radius - std::abs(w), std::abs(w) - inner_radius);
    case DomainKind::Rectangle:
        return std::min(rect_hx - std::abs(w.real()), rect_hy - std::abs(w.imag()));
    case DomainKind::Ellipse: {
        // conservative: distance scaled through the ellipse's polar radius
        const double a = radius, b = semi_minor;
        const double r = std::abs(w);
        if (r == 0) return b;
        const double th = std::arg(w);
        const double rb = (a * b) / std::hypot(b * std::cos(th), a * std::sin(th));
        return (rb - r) * (b / a);
    }
    case DomainKind::SlitDisk: {
        const double d_circle = 1.0 - std::abs(w);
        const double d_slit = dist_point_segment(w, cx(slit_from, 0), cx(slit_to, 0));
        return std::min(d_circle, d_slit);
    }
    case DomainKind::SquareFrame: {
        const double ho = rect_hx, hi = rect_hx / 2.0;
        const double d_out = std::min(ho - std::abs(w.real()), ho - std::abs(w.imag()));
        const double d_in = std::max(std::abs(w.real()) - hi, std::abs(w.imag()) - hi);
        return std::min(d_out, d_in);
    }
    }
    return 0.0;
}

double Domain::circumradius() const {
    switch (kind) {
    case DomainKind::Rectangle:
    case DomainKind::SquareFrame:
        return std::hypot(rect_hx, rect_hy);
    default:
        return radius;
    }
}

int Domain::connectivity() const {
    return (kind == DomainKind::Annulus || kind == DomainKind::SquareFrame) ? 2 : 1;
}

std::vector<cx> Domain::boundary_polyline(int samples, int comp) const {
    std::vector<cx> pts;
    pts.reserve(samples);
    auto circle = [&](double R, bool ccw) {
        for (int k = 0; k < samples; ++k) {
            const double t = 2.0 * kPi * k / samples;
            const double th = ccw ? t : -t;
            pts.push_back(center + R * cx(std::cos(th), std::sin(th)));
        }
    };
    switch (kind) {
    case DomainKind::Disk:
        circle(radius, true);
        break;
    case DomainKind::Annulus:
        circle(comp == 0 ? radius : inner_radius, comp == 0);
        break;
    case DomainKind::Ellipse:
        for (int k = 0; k < samples; ++k) {
            const double t = 2.0 * kPi * k / samples;
            pts.push_back(center + cx(radius * std::cos(t), semi_minor * std::sin(t)));
        }
        break;
    case DomainKind::Rectangle: {
        const int per = std::max(1, samples / 4);
        auto edge = [&](cx a, cx b) {
            for (int k = 0; k < per; ++k) pts.push_back(a + (b - a) * (double(k) / per));
        };
        const cx c0 = center + cx(-rect_hx, -rect_hy), c1 = center + cx(rect_hx, -rect_hy),
                 c2 = center + cx(rect_hx, rect_hy), c3 = center + cx(-rect_hx, rect_hy);
        edge(c0, c1);
        edge(c1, c2);
        edge(c2, c3);
        edge(c3, c0);
        break;
    }
    case DomainKind::SquareFrame: {
        const double h = comp == 0 ? rect_hx : rect_hx / 2.0;
        const int per = std::max(1, samples / 4);
        auto edge = [&](cx a, cx b) {
            for (int k = 0; k < per; ++k) pts.push_back(a + (b - a) * (double(k) / per));
        };
        cx c0 = center + cx(-h, -h), c1 = center + cx(h, -h), c2 = center + cx(h, h),
           c3 = center + cx(-h, h);
        if (comp == 0) {
            edge(c0, c1);
            edge(c1, c2);
            edge(c2, c3);
            edge(c3, c0);
        } else {
            edge(c0, c3);
            edge(c3, c2);
            edge(c2, c1);
            edge(c1, c0);
        }
        break;
    }
    case DomainKind::SlitDisk: {
        // circle + both slit sides; traversed as the (non-Jordan) boundary walk
        const int nc = samples / 2, ns = samples / 4;
        for (int k = 0; k <= nc; ++k) {
            const double t = 2.0 * kPi * k / nc;
            pts.push_back(center + cx(std::cos(t), std::sin(t)));
        }
        for (int k = 0; k < ns; ++k) { // underside of the slit, from x1 to x0
            const double x = slit_to + (slit_from - slit_to) * (double(k) / ns);
            pts.push_back(center + cx(x, 0.0));
        }
        for (int k = 0; k <= ns; ++k) { // top side, back out
            const double x = slit_from + (slit_to - slit_from) * (double(k) / ns);
            pts.push_back(center + cx(x, 0.0));
        }
        break;
    }
    }
    return pts;
}

std::string Domain::describe() const {
    std::ostringstream os;
    switch (kind) {
    case DomainKind::Disk:
        os << "disk(c=" << center << ", R=" << radius << ")";
        break;
    case DomainKind::Annulus:
        os << "annulus(c=" << center << ", r=" << inner_radius << ", R=" << radius << ")";
        break;
    case DomainKind::Rectangle:
        os << "rectangle(c=" << center << ", hx=" << rect_hx << ", hy=" << rect_hy << ")";
        break;
    case DomainKind::Ellipse:
        os << "ellipse(c=" << center << ", a=" << radius << ", b=" << semi_minor << ")";
        break;
    case DomainKind::SlitDisk:
        os << "slit_disk([" << slit_from << "," << slit_to << "))";
        break;
    case DomainKind::SquareFrame:
        os << "square_frame(c=" << center << ", h=" << rect_hx << ")";
        break;
    }
    return os.str();
}

std::vector<std::pair<double, double>> circle_arcs_inside(const Domain& d, cx z0, double r,
                                                          int probe) {
    std::vector<std::pair<double, double>> arcs;
    // fast path: the circle is strictly inside the domain
    if (d.contains(z0) && d.boundary_distance(z0) > r) {
        arcs.emplace_back(0.0, 2.0 * kPi);
        return arcs;
    }
    auto at = [&](double th) { return z0 + r * cx(std::cos(th), std::sin(th)); };
    std::vector<char> in(probe);
    for (int k = 0; k < probe; ++k) in[k] = d.contains(at(2.0 * kPi * k / probe)) ? 1 : 0;
    // locate transitions, refine by bisection
    auto refine = [&](double lo, double hi, bool lo_in) {
        for (int it = 0; it < 48; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (d.contains(at(mid)) == lo_in)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    std::vector<double> entries, exits;
    bool any_out = false, any_in = false;
    for (int k = 0; k < probe; ++k) {
        (in[k] ? any_in : any_out) = true;
        const int k2 = (k + 1) % probe;
        if (in[k] != in[k2]) {
            const double a = 2.0 * kPi * k / probe, b = 2.0 * kPi * (k + 1) / probe;
            const double t = refine(a, b, in[k]);
            if (in[k])
                exits.push_back(t);
            else
                entries.push_back(t);
        }
    }
    if (!any_in) return arcs;
    if (!any_out) {
        arcs.emplace_back(0.0, 2.0 * kPi);
        return arcs;
    }
    // pair each entry with the following exit (mod 2pi)
    std::sort(entries.begin(), entries.end());
    std::sort(exits.begin(), exits.end());
    for (double a : entries) {
        auto it = std::upper_bound(exits.begin(), exits.end(), a);
        double b = (it == exits.end()) ? exits.front() + 2.0 * kPi : *it;
        arcs.emplace_back(a, b);
    }
    return arcs;
}

DomainMask DomainMask::build(const Domain& d, int n, double margin_factor) {
    DomainMask m;
    m.domain = d;
    m.grid = GridSpec(d.center, d.circumradius() * margin_factor, n);
    m.inside.assign(m.grid.cell_count(), 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (d.contains(m.grid.cell_center(i, j))) m.inside[m.grid.index(i, j)] = 1;

    // connectivity check (BFS over 4-neighbors)
    const std::size_t total = m.count_inside();
    if (total == 0) throw ValidationError("DomainMask: no cells inside " + d.describe());
    std::vector<std::uint8_t> seen(m.grid.cell_count(), 0);
    std::queue<std::pair<int, int>> q;
    for (int j = 0; j < n && q.empty(); ++j)
        for (int i = 0; i < n && q.empty(); ++i)
            if (m.cell_inside(i, j)) {
                q.emplace(i, j);
                seen[m.grid.index(i, j)] = 1;
            }
    std::size_t reached = 0;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    while (!q.empty()) {
        auto [i, j] = q.front();
        q.pop();
        ++reached;
        for (int k = 0; k < 4; ++k) {
            const int a = i + di[k], b = j + dj[k];
            if (a < 0 || a >= n || b < 0 || b >= n) continue;
            const auto idx = m.grid.index(a, b);
            if (m.inside[idx] && !seen[idx]) {
                seen[idx] = 1;
                q.emplace(a, b);
            }
        }
    }
    if (reached != total)
        throw ValidationError("DomainMask: inside cells are not connected for " + d.describe());
    return m;
}

std::size_t DomainMask::count_inside() const {
    std::size_t c = 0;
    for (auto v : inside) c += v;
    return c;
}

cx ComplexField::interpolate(cx z) const {
    const double h = grid.spacing();
    const double x = (z.real() - grid.center.real() + grid.half_width) / h - 0.5;
    const double y = (z.imag() - grid.center.imag() + grid.half_width) / h - 0.5;
    int i0 = static_cast<int>(std::floor(x));
    int j0 = static_cast<int>(std::floor(y));
    i0 = std::clamp(i0, 0, grid.n - 2);
    j0 = std::clamp(j0, 0, grid.n - 2);
    const double fx = std::clamp(x - i0, 0.0, 1.0), fy = std::clamp(y - j0, 0.0, 1.0);
    const cx v00 = values[grid.index(i0, j0)], v10 = values[grid.index(i0 + 1, j0)];
    const cx v01 = values[grid.index(i0, j0 + 1)], v11 = values[grid.index(i0 + 1, j0 + 1)];
    return v00 * ((1 - fx) * (1 - fy)) + v10 * (fx * (1 - fy)) + v01 * ((1 - fx) * fy) +
           v11 * (fx * fy);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        sxy += x[k] * y[k];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0) return 0.0;
    return (n * sxy - sx * sy) / det;
}

double fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 3) return 1.0;
    const double b = fit_slope(x, y);
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double pred = my + b * (x[k] - mx);
        ss_res += (y[k] - pred) * (y[k] - pred);
        ss_tot += (y[k] - my) * (y[k] - my);
    }
    if (ss_tot == 0) return 1.0;
    return 1.0 - ss_res / ss_tot;
}

} // namespace beltrami::field
