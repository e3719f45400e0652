#ifndef BELTRAMI_PHI_SPEC_HPP
#define BELTRAMI_PHI_SPEC_HPP

#include <array>
#include <string>
#include <vector>

#include "beltrami/criteria.hpp"

namespace beltrami::criteria {

// Nondecreasing convex growth function Phi with its inverse and
// H(t) = log Phi(t). Built-in families plus piecewise tables (validated
// for monotonicity and convexity on the sample lattice).
class PhiSpec {
public:
    static PhiSpec power(double p);            // t^p, p >= 1
    static PhiSpec exponential(double alpha);  // exp(alpha t)
    static PhiSpec exp_sqrt();                 // exp(sqrt(t))
    static PhiSpec t_log_pow(double beta);     // t log^beta(t) for t >= e, linear below
    static PhiSpec table(std::vector<double> ts, std::vector<double> phis);

    double phi(double t) const;
    double phi_inv(double tau) const;
    double H(double t) const;       // log phi
    double H_inv(double eta) const;
    double H_prime(double t) const; // central difference
    double t_star() const;          // sup { t : phi(t) = 0 }
    std::string name() const { return name_; }

private:
    enum class Kind { Power, Exp, ExpSqrt, TLogPow, Table } kind_ = Kind::Power;
    double p_ = 1.0, alpha_ = 1.0, beta_ = 1.0;
    std::vector<double> ts_, phis_;
    std::string name_;

    double table_eval(double t) const;
};

// The six equivalent divergence conditions evaluated on a truncated
// log-lattice with tail analysis:
//   [0] integral d tau / (tau Phi^{-1}(tau))
//   [1] integral H'(t) dt / t
//   [2] integral dH(t) / t           (Lebesgue-Stieltjes sum)
//   [3] integral H(t) dt / t^2       (also the log Phi form)
//   [4] integral H(1/t) dt near 0
//   [5] integral d eta / H^{-1}(eta)
struct PhiSuiteResult {
    std::array<Verdict, 6> verdicts;
    std::array<std::string, 6> labels;
    bool agree = false; // all six share one non-Inconclusive status
    bool diverge = false;
};

PhiSuiteResult phi_condition_suite(const PhiSpec& spec, double delta,
                                   const Thresholds& thr = {});

} // namespace beltrami::criteria

#endif
