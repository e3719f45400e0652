#ifndef BELTRAMI_CRITERIA_HPP
#define BELTRAMI_CRITERIA_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "beltrami/coefficient.hpp"
#include "beltrami/geometry.hpp"

namespace beltrami::criteria {

using field::cx;
using field::Domain;

// Nonnegative integrand Q together with the domain it lives on; Q is taken
// to be zero outside the domain in every integral.
struct QSource {
    std::function<double(cx)> fn;
    Domain domain;
    double grid_spacing = 0.0; // > 0 when Q is backed by grid samples
    std::string name;

    double operator()(cx z) const { return domain.contains(z) ? fn(z) : 0.0; }
};

// Named radial test functions about z0 (the criteria battery).
QSource q_one(const Domain& d, cx z0);
QSource q_log(const Domain& d, cx z0);          // log(1/|z-z0|)
QSource q_inv(const Domain& d, cx z0);          // 1/|z-z0|
QSource q_log_sq(const Domain& d, cx z0);       // log^2(1/|z-z0|)
QSource q_one_plus_log(const Domain& d, cx z0); // 1 + log(1/|z-z0|)
QSource q_named(const std::string& name, const Domain& d, cx z0);
// Q(z) = K^T_mu(z, z0), zero outside D.
QSource q_tangent(const field::BeltramiCoefficient& coef, const Domain& d, cx z0);

// All decision thresholds in one place. The criteria are limits; any finite
// test needs declared cutoffs, and Inconclusive is the honest third answer.
struct Thresholds {
    double slope_min = 0.1;       // divergence: best-scale fit slope
    double cauchy_rel = 1e-3;     // per-step tail increment relative to the total
    double increment_p_sat = 1.1; // per-decade increment exponent p: <= diverges
    double increment_p_fail = 1.35;
    double growth_ratio = 1.5;     // FMO: per-decade growth flagged Infinite
    double fmo_bound_factor = 2.0; // FMO: last decade within factor of previous
    double o_sat_frac = 0.2;       // o-model: fitted limit below frac * last ratio
    double o_fail_frac = 0.5;
};

enum class Status { Satisfied, Fails, Inconclusive };
std::string to_string(Status s);

struct Verdict {
    Status status = Status::Inconclusive;
    std::string reason;                               // mandatory when Inconclusive
    std::vector<std::pair<double, double>> sequence;  // (r_or_eps, value) evidence
    double slope_log = 0.0, slope_loglog = 0.0;       // divergence-fit evidence
    double increment_exponent = 0.0;                  // per-decade increment power p
    double fitted_limit = 0.0;                        // o-model extrapolated limit
    std::string scale;                                // which fit decided
};

// ||Q||(z0, r) = line integral of Q over D cap S(z0, r), Q zero outside D
// (e:6.6c convention). `averages` holds ||Q||/(2 pi r); `arc_averages`
// normalizes by the arc length inside D instead. Both are computed; the
// zero-extension average is the authoritative one.
struct CircleNorm {
    cx z0;
    std::vector<double> radii; // strictly decreasing
    std::vector<double> values;
    std::vector<double> arc_lengths;
    std::vector<double> averages;
    std::vector<double> arc_averages;
};

std::vector<double> log_spaced_radii(double r_hi, double decades, int per_decade);

CircleNorm circle_norm(const QSource& q, cx z0, const std::vector<double>& radii);

// Divergence criterion: int_0 dr / ||Q||(r) = infinity. Partial integrals
// I(eps) are fitted against log(1/eps) and loglog(1/eps); slow tails are
// resolved by the per-decade increment exponent, and genuinely Cauchy tails
// report Fails.
Verdict divergence_test(const CircleNorm& norm, const Thresholds& thr = {});

enum class GrowthModel { OLog, oLogLogLog }; // O(log 1/r), o(log(1/r) loglog(1/r))
Verdict circle_average_growth(const CircleNorm& norm, GrowthModel model,
                              const Thresholds& thr = {});

struct FmoReport {
    cx z0;
    std::vector<double> epsilons; // decreasing
    std::vector<double> means;
    std::vector<double> oscillations;
    Verdict verdict; // Satisfied = finite mean oscillation
};

// Mean oscillation of phi over shrinking disks B(z0, eps); Finite iff the
// oscillation limsup estimate stays bounded.
FmoReport fmo_estimate(const QSource& phi, cx z0, const std::vector<double>& epsilons,
                       const Thresholds& thr = {});

// Supremum of mean oscillation over a dyadic family of disks contained in
// the region, to the given depth; a lower bound of the BMO seminorm.
double bmo_norm(const QSource& phi, const Domain& region, int depth);

enum class AnnularWeight { InvSq, InvSqLog }; // |z-z0|^-2, (|z-z0| log(1/|z-z0|))^-2

struct AnnularResult {
    double value = 0.0; // integral over eps < |z-z0| < eps0
    Verdict verdict;    // o([log 1/eps]^2) resp. o([loglog 1/eps]^2)
};

AnnularResult annular_weighted_integral(const QSource& q, cx z0, double eps, double eps0,
                                        AnnularWeight weight, const Thresholds& thr = {});

// int_{D cap B(z0, eps0)} exp(alpha Q) dm; +infinity when the inner partial
// integrals keep growing or the integrand overflows.
double exp_integrability(const QSource& q, cx z0, double alpha, double eps0);

enum class PsiFamily { InvT, InvTLog, InvCircleNorm };

struct PsiResult {
    Verdict verdict;
    std::vector<double> lhs;      // annular integrals of Q psi^2
    std::vector<double> I;        // I(eps) = int_eps^eps0 psi
    double fubini_max_rel = 0.0;  // for InvCircleNorm: |lhs - I| / I worst case
};

PsiResult psi_family_test(const QSource& q, cx z0, PsiFamily psi, double eps0,
                          const Thresholds& thr = {});

} // namespace beltrami::criteria

#endif
