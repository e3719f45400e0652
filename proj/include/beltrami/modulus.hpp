#ifndef BELTRAMI_MODULUS_HPP
#define BELTRAMI_MODULUS_HPP

#include <functional>
#include <optional>
#include <vector>

#include "beltrami/criteria.hpp"
#include "beltrami/geometry.hpp"

namespace beltrami::modulus {

using field::cx;
using field::Domain;
using field::DomainMask;
using field::GridSpec;

// Condenser on a masked grid: plates are disjoint cell sets held at the
// potentials 0 and 1; the modulus of the joining curve family equals the
// minimal discrete Dirichlet energy (the classical identification).
struct CondenserSpec {
    DomainMask mask;
    std::vector<std::uint32_t> plate_e; // cell indices, potential 0
    std::vector<std::uint32_t> plate_f; // potential 1
};

struct CapacityResult {
    double value = 0.0;
    double residual = 0.0;
    int grid_n = 0;
    int iterations = 0;
    std::vector<double> potential; // per cell (0 on E, 1 on F)
};

// Cells whose center lies within dist of the point set sampled by `samples`
// (consecutive samples joined by segments so thin plates stay connected).
std::vector<std::uint32_t> plate_from_polyline(const GridSpec& grid,
                                              const std::vector<cx>& samples, bool closed);
std::vector<std::uint32_t> plate_from_circle(const GridSpec& grid, cx c, double r);
// All cells with |center - c| <= r (solid plate).
std::vector<std::uint32_t> plate_solid_disk(const GridSpec& grid, cx c, double r);
std::vector<std::uint32_t> plate_outside_radius(const GridSpec& grid, cx c, double r);

// Conjugate-gradient energy minimization with u=0 on E, u=1 on F and the
// natural reflecting condition on the rest of the domain boundary.
CapacityResult condenser_capacity(const CondenserSpec& spec, double tol = 1e-8,
                                  int max_iter = 0);

struct MinorantResult {
    bool holds = false;
    double capacity = 0.0;
    double bound = 0.0; // (2/pi) log(R/r)
    double margin = 0.0;
};

// Checks capacity(E, F) >= (2/pi) log(R/r) for sets intersecting every
// circle S(z0, rho), rho in (r, R). E and F are given as polylines; the
// precondition is validated on a radius lattice.
MinorantResult plane_minorant_check(const std::vector<cx>& e_samples,
                                    const std::vector<cx>& f_samples, cx z0, double r, double R,
                                    int grid_n = 512);

using MapFn = std::function<cx(cx)>;

struct RingCheckResult {
    bool holds = false;
    double lhs = 0.0; // modulus of the image ring family
    double rhs = 0.0; // (int_{r1}^{r2} dr/||Q||)^{-1}
    double slack = 0.0; // rhs - lhs relative to rhs
};

// Ring inequality at z0: capacity of (f(S1 cap D), f(S2 cap D)) inside f(D)
// against the reciprocal circle-norm integral, with tol_geom headroom for
// the two stacked discretizations.
RingCheckResult ring_inequality_check(const MapFn& f, const Domain& domain, cx z0, double r1,
                                      double r2, const criteria::QSource& q, int grid_n = 256,
                                      double tol_geom = 0.05);

} // namespace beltrami::modulus

#endif
