#ifndef BELTRAMI_QCSOLVER_HPP
#define BELTRAMI_QCSOLVER_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "beltrami/coefficient.hpp"
#include "beltrami/geometry.hpp"

namespace beltrami::qc {

using field::BeltramiCoefficient;
using field::ComplexField;
using field::cx;
using field::Domain;
using field::DomainMask;
using field::GridSpec;

struct SolveOptions {
    double truncation_delta = 0.01; // |mu| truncated to <= 1 - delta
    double tol = 1e-8;              // iteration residual, relative to ||mu||_2
    int max_iter = 4000;
    bool force_richardson = false; // otherwise BiCGStab above ||mu||_inf = 0.8
};

struct ResidualStats {
    double iteration_rel = 0.0; // fixed-point residual at exit
    double fd_l2 = 0.0;         // finite-difference Beltrami residual on the mask
    double fd_linf = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
};

// Grid solution of f_zbar = mu f_z as a principal-type map: f = g o A where
// A absorbs the area mean of mu exactly and g solves the conjugated
// zero-mean coefficient spectrally (free-space Beurling/Cauchy transforms
// with exact per-cell kernel integrals, FFT-accelerated).
struct QcSolution {
    DomainMask mask;
    ComplexField f;        // on the mask grid (defined on every grid cell)
    ComplexField f_z;      // chain-rule fields
    ComplexField f_zbar;
    std::vector<double> jacobian; // |f_z|^2 - |f_zbar|^2 per cell
    ResidualStats residual;
    std::string normalization = "principal";
    std::uint64_t truncated_cells = 0;

    cx eval(cx z) const { return f.interpolate(z); }
    // (f(z) - f(a)) / (f(b) - f(a)) with a = domain center, b = marked
    // boundary point; post-composition with this linear map keeps the
    // Beltrami coefficient.
    QcSolution normalized(cx a, cx b) const;
};

QcSolution solve_beltrami(const BeltramiCoefficient& coef, const DomainMask& mask,
                          const SolveOptions& opts = {});

struct JacobianReport {
    std::size_t masked_cells = 0;
    std::size_t violations = 0; // J <= 0
    double violation_fraction = 0.0;
    std::vector<std::pair<int, int>> locations; // up to 64 worst cells
};

JacobianReport jacobian_check(const QcSolution& sol);

// Conformal map of a Jordan catalog domain onto the unit disk:
// Koebe osculation (radial-slit square-root steps) down to a near-circle,
// finished by Schwarz-integral corrections. Evaluable at interior points,
// with a boundary correspondence table.
class DiskMap {
public:
    using EvalFn = std::function<cx(cx)>;

    DiskMap() = default;
    DiskMap(EvalFn eval, std::vector<std::pair<double, cx>> boundary,
            std::string normalization)
        : eval_(std::move(eval)), boundary_(std::move(boundary)),
          normalization_(std::move(normalization)) {}

    cx operator()(cx z) const { return eval_(z); }
    // (source boundary parameter in [0, 2 pi), image point on the circle)
    const std::vector<std::pair<double, cx>>& boundary_table() const { return boundary_; }
    const std::string& normalization() const { return normalization_; }

    double conformality_residual_l2 = 0.0;
    double boundary_roundness = 0.0; // max | |w|-1 | over boundary samples
    double inner_radius = 0.0;       // round annulus inner radius (annulus maps)

private:
    EvalFn eval_;
    std::vector<std::pair<double, cx>> boundary_;
    std::string normalization_;
};

struct RiemannOptions {
    int boundary_samples = 2048;
    double osculation_stop = 0.06; // hand off to the polish stage here
    int max_osculation_steps = 4000;
    int polish_modes = 256;
    int polish_rounds = 12;
};

// domain must be simply connected and Jordan (disk, ellipse, rectangle).
DiskMap riemann_map(const Domain& domain, const RiemannOptions& opts = {});
// Same algorithm on an arbitrary Jordan boundary polyline (used for image
// domains of computed solutions). anchor must be interior; marked is the
// boundary sample pinned to angle 0.
DiskMap riemann_map_polyline(const std::vector<cx>& boundary, cx anchor, std::size_t marked,
                             const RiemannOptions& opts = {});

struct AnnulusMapResult {
    DiskMap map;       // onto r* < |w| < 1
    double inner_radius = 0.0; // r*
    double modulus = 0.0;      // log(1/r*) / (2 pi)
};

// Doubly connected catalog domains onto a round annulus. Round annuli map
// exactly; the square frame goes through the grid potential and its
// conjugate (period route, kept independent of the energy functional).
AnnulusMapResult annulus_map(const Domain& domain, int grid_n = 256);

// g = mapper o sol: evaluable on the source grid with the boundary
// correspondence pulled back through the solution.
DiskMap compose_normalized(const QcSolution& sol, const DiskMap& mapper,
                           const Domain& source_domain, int boundary_samples = 2048);

} // namespace beltrami::qc

#endif
