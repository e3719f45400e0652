#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "beltrami/modulus.hpp"
#include "beltrami/qcsolver.hpp"

using namespace beltrami;
using namespace beltrami::qc;
using field::BeltramiCoefficient;
using field::cx;
using field::Domain;
using field::DomainMask;
using field::kPi;

namespace {

// Theodorsen iteration for a starlike boundary r(theta): independent oracle
// for the disk -> domain boundary correspondence theta(phi), F(0)=0,
// F'(0) > 0. Conjugation done by direct Fourier sums.
std::vector<double> theodorsen_correspondence(const std::function<double(double)>& radius,
                                              int M, int modes, int iters) {
    std::vector<double> theta(M);
    for (int k = 0; k < M; ++k) theta[k] = 2 * kPi * k / M;
    std::vector<double> lam(M), conj_vals(M);
    for (int it = 0; it < iters; ++it) {
        for (int k = 0; k < M; ++k) lam[k] = std::log(radius(theta[k]));
        // conjugate series: cos -> sin, sin -> -cos, mean dropped
        std::vector<double> a(modes + 1, 0.0), b(modes + 1, 0.0);
        for (int m = 1; m <= modes; ++m) {
            double ca = 0, cb = 0;
            for (int k = 0; k < M; ++k) {
                const double phi = 2 * kPi * k / M;
                ca += lam[k] * std::cos(m * phi);
                cb += lam[k] * std::sin(m * phi);
            }
            a[m] = 2.0 * ca / M;
            b[m] = 2.0 * cb / M;
        }
        for (int k = 0; k < M; ++k) {
            const double phi = 2 * kPi * k / M;
            double s = 0.0;
            for (int m = 1; m <= modes; ++m)
                s += a[m] * std::sin(m * phi) - b[m] * std::cos(m * phi);
            conj_vals[k] = s;
        }
        for (int k = 0; k < M; ++k) theta[k] = 2 * kPi * k / M + conj_vals[k];
    }
    return theta;
}

double sup_err_masked(const QcSolution& sol, const std::function<cx(cx)>& truth,
                      double exclude_radius) {
    double sup = 0.0;
    const auto& g = sol.mask.grid;
    for (int j = 0; j < g.n; ++j)
        for (int i = 0; i < g.n; ++i) {
            if (!sol.mask.cell_inside(i, j)) continue;
            const cx z = g.cell_center(i, j);
            if (std::abs(z) < exclude_radius) continue;
            sup = std::max(sup, std::abs(sol.f.values[g.index(i, j)] - truth(z)));
        }
    return sup;
}

} // namespace

TEST_CASE("mu = 0 reproduces the identity exactly") {
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 64);
    auto sol = solve_beltrami(BeltramiCoefficient::constant(cx(0, 0)), mask);
    CHECK(sol.residual.iteration_rel == 0.0);
    CHECK(sup_err_masked(sol, [](cx z) { return z; }, 0.0) < 1e-13);
    CHECK(jacobian_check(sol).violations == 0);
}

TEST_CASE("constant mu gives the affine map to machine precision") {
    const cx k(0.3, 0.0);
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 256);
    auto sol = solve_beltrami(BeltramiCoefficient::constant(k), mask).normalized(cx(0, 0),
                                                                                 cx(1, 0));
    const cx den = cx(1, 0) + k;
    const double sup =
        sup_err_masked(sol, [k, den](cx z) { return (z + k * std::conj(z)) / den; }, 0.0);
    CHECK(sup < 1e-6);
    CHECK(jacobian_check(sol).violations == 0);
}

TEST_CASE("complex constant mu") {
    const cx k(0.2, -0.25);
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 128);
    auto sol = solve_beltrami(BeltramiCoefficient::constant(k), mask).normalized(cx(0, 0),
                                                                                 cx(1, 0));
    const cx den = cx(1, 0) + k;
    const double sup =
        sup_err_masked(sol, [k, den](cx z) { return (z + k * std::conj(z)) / den; }, 0.0);
    CHECK(sup < 1e-6);
}

TEST_CASE("radial stretch solves to z|z| on the disk") {
    const double K = 2.0;
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 256);
    auto sol = solve_beltrami(BeltramiCoefficient::radial_stretch(K), mask)
                   .normalized(cx(0, 0), cx(1, 0));
    const double exclude = 2.0 * mask.grid.spacing();
    const double sup = sup_err_masked(
        sol, [](cx z) { return z * std::abs(z); }, exclude);
    CHECK(sup < 1e-3);
    CHECK(sol.residual.fd_l2 < 0.05);
}

TEST_CASE("Richardson residual decreases monotonically for moderate mu") {
    // |mu| = 0.8 via radial stretch K = 9
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 128);
    SolveOptions opts;
    opts.force_richardson = true;
    auto sol = solve_beltrami(BeltramiCoefficient::radial_stretch(9.0), mask, opts);
    const auto& hist = sol.residual.residual_history;
    REQUIRE(hist.size() > 6);
    for (std::size_t k = 4; k < hist.size(); ++k) CHECK(hist[k] <= hist[k - 1] * (1 + 1e-12));
}

TEST_CASE("truncated degenerate coefficient keeps Jacobian healthy") {
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 256);
    SolveOptions opts;
    opts.truncation_delta = 1e-3;
    auto sol = solve_beltrami(BeltramiCoefficient::degenerate_log(cx(0, 0)), mask, opts);
    auto rep = jacobian_check(sol);
    CHECK(rep.violation_fraction <= 1e-3);
    CHECK(sol.truncated_cells > 0);
}

TEST_CASE("delta stability on a degenerate coefficient") {
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 128);
    auto run = [&](double delta) {
        SolveOptions opts;
        opts.truncation_delta = delta;
        return solve_beltrami(BeltramiCoefficient::degenerate_log(cx(0, 0)), mask, opts)
            .normalized(cx(0, 0), cx(1, 0));
    };
    auto s1 = run(0.04), s2 = run(0.02), s3 = run(0.01);
    auto sup_diff = [&](const QcSolution& a, const QcSolution& b) {
        double sup = 0.0;
        const auto& g = a.mask.grid;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                if (!a.mask.cell_inside(i, j)) continue;
                const cx z = g.cell_center(i, j);
                if (std::abs(z) <= 0.1) continue;
                sup = std::max(sup,
                               std::abs(a.f.values[g.index(i, j)] - b.f.values[g.index(i, j)]));
            }
        return sup;
    };
    const double d12 = sup_diff(s1, s2);
    const double d23 = sup_diff(s2, s3);
    CHECK(d23 < d12); // Cauchy behavior in delta
}

TEST_CASE("normalization invariance of the Beltrami residual") {
    auto mask = DomainMask::build(Domain::disk(cx(0, 0), 1.0), 128);
    auto sol = solve_beltrami(BeltramiCoefficient::radial_stretch(2.0), mask);
    auto n1 = sol.normalized(cx(0, 0), cx(1, 0));
    // post-composition with a disk Moebius automorphism keeps mu, so the FD
    // residual must not grow beyond interpolation noise
    const cx a(0.3, 0.1);
    QcSolution moved = sol;
    for (auto& v : moved.f.values) v = (v - a) / (cx(1, 0) - std::conj(a) * v);
    double l2 = 0.0;
    std::size_t cnt = 0;
    const auto& g = moved.mask.grid;
    const double h2 = 2 * g.spacing();
    for (int j = 1; j + 1 < g.n; ++j)
        for (int i = 1; i + 1 < g.n; ++i) {
            if (!moved.mask.cell_inside(i, j) || !moved.mask.cell_inside(i - 1, j) ||
                !moved.mask.cell_inside(i + 1, j) || !moved.mask.cell_inside(i, j - 1) ||
                !moved.mask.cell_inside(i, j + 1))
                continue;
            const cx fx =
                (moved.f.values[g.index(i + 1, j)] - moved.f.values[g.index(i - 1, j)]) / h2;
            const cx fy =
                (moved.f.values[g.index(i, j + 1)] - moved.f.values[g.index(i, j - 1)]) / h2;
            const cx fz = 0.5 * (fx - cx(0, 1) * fy);
            const cx fzb = 0.5 * (fx + cx(0, 1) * fy);
            const cx z = g.cell_center(i, j);
            const cx mu = BeltramiCoefficient::radial_stretch(2.0).eval(z);
            l2 += std::norm(fzb - mu * fz);
            ++cnt;
        }
    const double res = std::sqrt(l2 / cnt);
    CHECK(res < 10 * std::max(sol.residual.fd_l2, 1e-6) + 0.05);
    CHECK(n1.normalization != sol.normalization);
}

TEST_CASE("riemann map of the unit disk is a rotation-free identity") {
    auto map = riemann_map(Domain::disk(cx(0, 0), 1.0));
    CHECK(map.boundary_roundness < 1e-9);
    CHECK(std::abs(map(cx(0.3, 0.2)) - cx(0.3, 0.2)) < 1e-9);
    CHECK(std::abs(map(cx(0, 0))) < 1e-12);
}

TEST_CASE("riemann map of a scaled disk divides by the radius") {
    auto map = riemann_map(Domain::disk(cx(0, 0), 2.0));
    CHECK(std::abs(map(cx(1.0, 0.4)) - cx(0.5, 0.2)) < 1e-9);
}

TEST_CASE("riemann map of an ellipse matches the Theodorsen oracle") {
    const double a = 1.0, b = 0.6;
    auto map = riemann_map(Domain::ellipse(cx(0, 0), a, b));
    CHECK(map.boundary_roundness < 1e-6);
    CHECK(map.conformality_residual_l2 < 1e-4);

    auto radius = [a, b](double th) {
        return a * b / std::hypot(b * std::cos(th), a * std::sin(th));
    };
    const int M = 512;
    auto theta = theodorsen_correspondence(radius, M, 128, 200);
    // oracle: disk angle phi_k corresponds to boundary point at theta[k];
    // the computed map must send that point to angle phi_k + const
    double offset = 0.0;
    std::vector<double> diffs(M);
    for (int k = 0; k < M; ++k) {
        const double th = theta[k];
        const cx p(a * std::cos(th) * radius(th) / radius(th), b * std::sin(th));
        const cx bp(a * std::cos(th), b * std::sin(th));
        const cx w = map(bp * (1.0 - 1e-9));
        double d = std::arg(w) - 2 * kPi * k / M;
        while (d > kPi) d -= 2 * kPi;
        while (d < -kPi) d += 2 * kPi;
        diffs[k] = d;
        offset += d;
        (void)p;
    }
    offset /= M;
    double worst = 0.0;
    for (double d : diffs) worst = std::max(worst, std::abs(d - offset));
    CHECK(worst < 1e-3);
}

TEST_CASE("riemann map rejects non-Jordan catalog domains") {
    CHECK_THROWS_AS(riemann_map(Domain::annulus(cx(0, 0), 0.5, 1.0)), TopologyError);
    CHECK_THROWS_AS(riemann_map(Domain::slit_disk(0.0, 1.0)), TopologyError);
}

TEST_CASE("annulus map is exact on round annuli") {
    auto res = annulus_map(Domain::annulus(cx(0, 0), 0.5, 1.0));
    CHECK(res.inner_radius == doctest::Approx(0.5));
    CHECK(std::abs(res.map(cx(0.7, 0)) - cx(0.7, 0)) < 1e-12);

    auto shifted = annulus_map(Domain::annulus(cx(0.3, -0.2), 1.0, 2.0));
    CHECK(shifted.inner_radius == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(shifted.map(cx(0.3, -0.2) + cx(1.5, 0)) - cx(0.75, 0)) < 1e-12);
}

TEST_CASE("square frame modulus agrees with the condenser capacity") {
    auto frame = Domain::square_frame(cx(0, 0), 1.0);
    auto res = annulus_map(frame, 256);
    // the same modulus through the energy functional
    auto mask = DomainMask::build(frame, 256, 1.1);
    std::vector<std::uint32_t> pe, pf;
    for (int j = 0; j < 256; ++j)
        for (int i = 0; i < 256; ++i) {
            const cx w = mask.grid.cell_center(i, j);
            const auto c = static_cast<std::uint32_t>(mask.grid.index(i, j));
            if (std::abs(w.real()) <= 0.5 && std::abs(w.imag()) <= 0.5) pe.push_back(c);
            else if (std::abs(w.real()) >= 1.0 || std::abs(w.imag()) >= 1.0) pf.push_back(c);
        }
    auto cap = modulus::condenser_capacity({mask, pe, pf});
    const double cap_from_map = 2 * kPi / std::log(1.0 / res.inner_radius);
    CHECK(cap_from_map == doctest::Approx(cap.value).epsilon(0.02));
}

TEST_CASE("compose_normalized: conformal case collapses to the riemann map") {
    auto disk = Domain::disk(cx(0, 0), 1.0);
    auto mask = DomainMask::build(disk, 128);
    auto sol = solve_beltrami(BeltramiCoefficient::constant(cx(0, 0)), mask);
    auto rm = riemann_map(disk);
    auto g = compose_normalized(sol, rm, disk);
    CHECK(std::abs(g(cx(0.4, 0.1)) - cx(0.4, 0.1)) < 1e-6);
    CHECK(g.boundary_roundness < 1e-5);
}

TEST_CASE("compose_normalized: radial stretch already maps the disk onto itself") {
    const double K = 2.0;
    auto disk = Domain::disk(cx(0, 0), 1.0);
    auto mask = DomainMask::build(disk, 256);
    auto sol = solve_beltrami(BeltramiCoefficient::radial_stretch(K), mask)
                   .normalized(cx(0, 0), cx(1, 0));
    // image of the disk under z|z| is the disk itself; the composed map must
    // equal the solution up to rotation
    auto boundary = disk.boundary_polyline(1024);
    std::vector<cx> image_boundary;
    for (cx p : boundary) image_boundary.push_back(sol.eval(p));
    auto rm = riemann_map_polyline(image_boundary, sol.eval(cx(0, 0)), 0);
    auto g = compose_normalized(sol, rm, disk);
    double worst = 0.0;
    for (double t = 0.15; t < 0.95; t += 0.08) {
        const cx z(t, 0.1);
        if (std::abs(z) >= 0.95) continue;
        const cx gz = g(z);
        const cx fz = sol.eval(z);
        worst = std::max(worst, std::abs(std::abs(gz) - std::abs(fz)));
    }
    CHECK(worst < 2e-3);
}

TEST_CASE("affine image of the disk maps back to the disk through compose") {
    const cx k(0.3, 0.0);
    auto disk = Domain::disk(cx(0, 0), 1.0);
    auto mask = DomainMask::build(disk, 128);
    auto sol = solve_beltrami(BeltramiCoefficient::constant(k), mask);
    auto boundary = disk.boundary_polyline(1024);
    std::vector<cx> image_boundary;
    for (cx p : boundary) image_boundary.push_back(sol.eval(p)); // an ellipse
    auto rm = riemann_map_polyline(image_boundary, sol.eval(cx(0, 0)), 0);
    auto g = compose_normalized(sol, rm, disk);
    CHECK(g.boundary_roundness < 1e-2);
}
