#include "beltrami/phi_spec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace beltrami::criteria {

using field::fit_slope;

PhiSpec PhiSpec::power(double p) {
    if (!(p >= 1.0)) throw ValidationError("PhiSpec::power needs p >= 1");
    PhiSpec s;
    s.kind_ = Kind::Power;
    s.p_ = p;
    s.name_ = "power(" + std::to_string(p) + ")";
    return s;
}

PhiSpec PhiSpec::exponential(double alpha) {
    if (!(alpha > 0)) throw ValidationError("PhiSpec::exponential needs alpha > 0");
    PhiSpec s;
    s.kind_ = Kind::Exp;
    s.alpha_ = alpha;
    s.name_ = "exponential(" + std::to_string(alpha) + ")";
    return s;
}

PhiSpec PhiSpec::exp_sqrt() {
    PhiSpec s;
    s.kind_ = Kind::ExpSqrt;
    s.name_ = "exp_sqrt";
    return s;
}

PhiSpec PhiSpec::t_log_pow(double beta) {
    if (!(beta > 0)) throw ValidationError("PhiSpec::t_log_pow needs beta > 0");
    PhiSpec s;
    s.kind_ = Kind::TLogPow;
    s.beta_ = beta;
    s.name_ = "t_log_pow(" + std::to_string(beta) + ")";
    return s;
}

PhiSpec PhiSpec::table(std::vector<double> ts, std::vector<double> phis) {
    if (ts.size() < 3 || ts.size() != phis.size())
        throw ValidationError("PhiSpec::table needs >= 3 samples");
    for (std::size_t k = 1; k < ts.size(); ++k) {
        if (!(ts[k] > ts[k - 1])) throw ValidationError("PhiSpec::table: ts must increase");
        if (phis[k] < phis[k - 1])
            throw ValidationError("PhiSpec::table: Phi must be nondecreasing");
    }
    // convexity on the lattice
    for (std::size_t k = 1; k + 1 < ts.size(); ++k) {
        const double left = (phis[k] - phis[k - 1]) / (ts[k] - ts[k - 1]);
        const double right = (phis[k + 1] - phis[k]) / (ts[k + 1] - ts[k]);
        if (right < left * (1.0 - 1e-9) - 1e-12)
            throw ValidationError("PhiSpec::table: not convex on the sample lattice near t=" +
                                  std::to_string(ts[k]));
    }
    PhiSpec s;
    s.kind_ = Kind::Table;
    s.ts_ = std::move(ts);
    s.phis_ = std::move(phis);
    s.name_ = "table";
    return s;
}

double PhiSpec::table_eval(double t) const {
    if (t <= ts_.front()) return phis_.front();
    if (t >= ts_.back()) {
        // extend with the last chord slope (keeps convexity)
        const std::size_t n = ts_.size();
        const double s = (phis_[n - 1] - phis_[n - 2]) / (ts_[n - 1] - ts_[n - 2]);
        return phis_.back() + s * (t - ts_.back());
    }
    std::size_t lo = 0, hi = ts_.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (ts_[mid] <= t ? lo : hi) = mid;
    }
    const double f = (t - ts_[lo]) / (ts_[hi] - ts_[lo]);
    return phis_[lo] + f * (phis_[hi] - phis_[lo]);
}

double PhiSpec::phi(double t) const {
    switch (kind_) {
    case Kind::Power: return std::pow(t, p_);
    case Kind::Exp: return std::exp(alpha_ * t);
    case Kind::ExpSqrt: return std::exp(std::sqrt(std::max(0.0, t)));
    case Kind::TLogPow: {
        const double e = std::exp(1.0);
        if (t <= e) return t; // linear below e keeps convexity and positivity
        return t * std::pow(std::log(t), beta_);
    }
    case Kind::Table: return table_eval(t);
    }
    return 0.0;
}

double PhiSpec::phi_inv(double tau) const {
    switch (kind_) {
    case Kind::Power: return std::pow(tau, 1.0 / p_);
    case Kind::Exp: return std::log(tau) / alpha_;
    case Kind::ExpSqrt: {
        const double l = std::log(tau);
        return l * l;
    }
    default: {
        // bisection on a wide bracket; phi is nondecreasing
        double lo = t_star(), hi = std::max(2.0, lo + 1.0);
        while (phi(hi) < tau && hi < 1e300) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (phi(mid) < tau ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    }
}

double PhiSpec::H(double t) const {
    // closed forms: log(phi) evaluated as exp would overflow long before
    // the integration lattice ends
    switch (kind_) {
    case Kind::Power:
        if (t <= 0) return -std::numeric_limits<double>::infinity();
        return p_ * std::log(t);
    case Kind::Exp: return alpha_ * t;
    case Kind::ExpSqrt: return std::sqrt(std::max(0.0, t));
    case Kind::TLogPow: {
        const double e = std::exp(1.0);
        if (t <= 0) return -std::numeric_limits<double>::infinity();
        if (t <= e) return std::log(t);
        return std::log(t) + beta_ * std::log(std::log(t));
    }
    case Kind::Table: {
        const double v = table_eval(t);
        if (v <= 0) return -std::numeric_limits<double>::infinity();
        return std::log(v);
    }
    }
    return 0.0;
}

double PhiSpec::H_inv(double eta) const {
    switch (kind_) {
    case Kind::Power: return eta / p_ > 690.0 ? std::numeric_limits<double>::infinity()
                                              : std::exp(eta / p_);
    case Kind::Exp: return eta / alpha_;
    case Kind::ExpSqrt: return eta * eta;
    default: {
        double lo = t_star() + 1e-12, hi = std::max(2.0, 2 * lo);
        while (H(hi) < eta && hi < 1e300) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (H(mid) < eta ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    }
}

double PhiSpec::H_prime(double t) const {
    switch (kind_) {
    case Kind::Power: return t > 0 ? p_ / t : 0.0;
    case Kind::Exp: return alpha_;
    case Kind::ExpSqrt: return t > 0 ? 0.5 / std::sqrt(t) : 0.0;
    case Kind::TLogPow: {
        const double e = std::exp(1.0);
        if (t <= 0) return 0.0;
        if (t <= e) return 1.0 / t;
        return 1.0 / t + beta_ / (t * std::log(t));
    }
    case Kind::Table: {
        const double h = std::max(1e-6, 1e-6 * t);
        const double a = H(std::max(t - h, t_star() + 1e-12)), b = H(t + h);
        if (!std::isfinite(a) || !std::isfinite(b)) return 0.0;
        return (b - a) / (2 * h);
    }
    }
    return 0.0;
}

double PhiSpec::t_star() const {
    switch (kind_) {
    case Kind::Power: return 0.0;
    case Kind::Exp:
    case Kind::ExpSqrt: return 0.0;
    case Kind::TLogPow: return 0.0;
    case Kind::Table: {
        double t = 0.0;
        for (std::size_t k = 0; k < ts_.size(); ++k)
            if (phis_[k] <= 0) t = ts_[k];
        return t;
    }
    }
    return 0.0;
}

namespace {

// Divergence analysis of cumulative partial sums P at lattice points t
// (increasing). Reuses the divergence_test staging against log t and
// loglog t scales.
Verdict lattice_divergence(const std::vector<double>& t, const std::vector<double>& P,
                           const Thresholds& thr) {
    Verdict v;
    for (std::size_t k = 0; k < t.size(); ++k) v.sequence.emplace_back(t[k], P[k]);

    auto window = [&](double (*xf)(double)) {
        std::vector<double> x, y;
        const double cut = t.back() / 100.0; // last two decades
        for (std::size_t k = 0; k < t.size(); ++k)
            if (t[k] >= cut) {
                x.push_back(xf(t[k]));
                y.push_back(P[k]);
            }
        return std::make_pair(x, y);
    };
    auto [xl, yl] = window(+[](double q) { return std::log(q); });
    auto [xll, yll] = window(+[](double q) { return std::log(std::log(q)); });
    v.slope_log = fit_slope(xl, yl);
    v.slope_loglog = fit_slope(xll, yll);
    const double r2l = field::fit_r2(xl, yl), r2ll = field::fit_r2(xll, yll);
    const bool log_best = r2l >= r2ll;
    const double best = log_best ? v.slope_log : v.slope_loglog;
    if (best > thr.slope_min) {
        v.status = Status::Satisfied;
        v.scale = log_best ? "log T" : "loglog T";
        return v;
    }
    // per-decade increments vs u = log t midpoints
    std::vector<double> u_mid, gains;
    double next = t.front() * 10.0, last_P = P.front(), last_u = std::log(t.front());
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] >= next * (1 - 1e-12)) {
            const double u = std::log(t[k]);
            u_mid.push_back(0.5 * (last_u + u));
            gains.push_back(P[k] - last_P);
            last_P = P[k];
            last_u = u;
            next *= 10.0;
        }
    }
    bool positive = u_mid.size() >= 3;
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < gains.size() && positive; ++k) {
        if (!(gains[k] > 0))
            positive = false;
        else {
            lx.push_back(std::log(u_mid[k]));
            ly.push_back(std::log(gains[k]));
        }
    }
    if (positive) {
        const double p = -fit_slope(lx, ly);
        v.increment_exponent = p;
        if (p <= thr.increment_p_sat) {
            v.status = Status::Satisfied;
            v.scale = "increment exponent";
            return v;
        }
        if (p >= thr.increment_p_fail) {
            v.status = Status::Fails;
            v.scale = "increment exponent";
            return v;
        }
    }
    double max_step = 0.0;
    const double cut = t.back() / 10.0;
    for (std::size_t k = 1; k < t.size(); ++k)
        if (t[k] >= cut) max_step = std::max(max_step, P[k] - P[k - 1]);
    if (P.back() > 0 && max_step < thr.cauchy_rel * P.back()) {
        v.status = Status::Fails;
        v.scale = "cauchy tail";
        return v;
    }
    v.status = Status::Inconclusive;
    v.reason = "tail behavior undecided on the lattice";
    return v;
}

std::vector<double> log_lattice(double lo, double hi, int per_decade) {
    std::vector<double> t;
    const double decades = std::log10(hi / lo);
    const int steps = static_cast<int>(std::ceil(decades * per_decade));
    for (int k = 0; k <= steps; ++k) t.push_back(lo * std::pow(10.0, decades * k / steps));
    return t;
}

std::vector<double> cumulative(const std::vector<double>& t,
                               const std::function<double(double)>& f) {
    std::vector<double> P(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double seg = 0.5 * (f(t[k - 1]) + f(t[k])) * (t[k] - t[k - 1]);
        P[k] = P[k - 1] + (std::isfinite(seg) ? seg : 0.0);
    }
    return P;
}

} // namespace

PhiSuiteResult phi_condition_suite(const PhiSpec& spec, double delta, const Thresholds& thr) {
    if (!(delta > spec.phi(0.0)))
        throw ValidationError("phi_condition_suite: delta must exceed Phi(0)");
    PhiSuiteResult res;
    res.labels = {"dtau/(tau Phi^-1)", "H' dt/t", "dH/t",
                  "H dt/t^2",          "H(1/t) dt", "deta/H^-1"};
    const double T_max = 1e16;
    const int per_decade = 24;
    const double t0 = std::max({spec.t_star() + 1.0, 2.0, delta});

    // [0] in tau from delta
    {
        const auto t = log_lattice(std::max(delta, 1e-6), T_max, per_decade);
        const auto P = cumulative(t, [&](double tau) {
            const double inv = spec.phi_inv(tau);
            return inv > 0 ? 1.0 / (tau * inv) : 0.0;
        });
        res.verdicts[0] = lattice_divergence(t, P, thr);
    }
    // [1] H'(t)/t
    {
        const auto t = log_lattice(t0, T_max, per_decade);
        const auto P = cumulative(t, [&](double q) { return spec.H_prime(q) / q; });
        res.verdicts[1] = lattice_divergence(t, P, thr);
    }
    // [2] Stieltjes sum of dH / t
    {
        const auto t = log_lattice(t0, T_max, per_decade);
        std::vector<double> P(t.size(), 0.0);
        for (std::size_t k = 1; k < t.size(); ++k) {
            const double dH = spec.H(t[k]) - spec.H(t[k - 1]);
            const double seg = std::isfinite(dH) ? dH / (0.5 * (t[k] + t[k - 1])) : 0.0;
            P[k] = P[k - 1] + std::max(0.0, seg);
        }
        res.verdicts[2] = lattice_divergence(t, P, thr);
    }
    // [3] H/t^2
    {
        const auto t = log_lattice(t0, T_max, per_decade);
        const auto P = cumulative(t, [&](double q) {
            const double h = spec.H(q);
            return std::isfinite(h) && h > 0 ? h / (q * q) : 0.0;
        });
        res.verdicts[3] = lattice_divergence(t, P, thr);
    }
    // [4] H(1/t) on (0, Delta): substitute u = 1/t, reuse the tail machinery
    {
        const double Delta = 1.0 / t0;
        const auto u = log_lattice(1.0 / Delta, T_max, per_decade);
        const auto P = cumulative(u, [&](double q) {
            const double h = spec.H(q);
            return std::isfinite(h) && h > 0 ? h / (q * q) : 0.0;
        });
        res.verdicts[4] = lattice_divergence(u, P, thr);
    }
    // [5] d eta / H^-1(eta)
    {
        const double eta0 = std::max(spec.H(t0), 1.0);
        const auto t = log_lattice(eta0, 1e8, per_decade);
        const auto P = cumulative(t, [&](double eta) {
            const double hinv = spec.H_inv(eta);
            return hinv > 0 ? 1.0 / hinv : 0.0;
        });
        res.verdicts[5] = lattice_divergence(t, P, thr);
    }

    bool agree = true;
    for (int k = 0; k < 6; ++k) {
        if (res.verdicts[k].status == Status::Inconclusive) agree = false;
        if (res.verdicts[k].status != res.verdicts[0].status) agree = false;
    }
    res.agree = agree;
    res.diverge = res.verdicts[0].status == Status::Satisfied;
    return res;
}

} // namespace beltrami::criteria
