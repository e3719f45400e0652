#include "beltrami/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace beltrami::criteria {

using field::circle_arcs_inside;
using field::fit_r2;
using field::fit_slope;
using field::kPi;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_log1r(double r) { return std::log(1.0 / r); }
} // namespace

std::string to_string(Status s) {
    switch (s) {
    case Status::Satisfied: return "Satisfied";
    case Status::Fails: return "Fails";
    default: return "Inconclusive";
    }
}

QSource q_one(const Domain& d, cx z0) {
    (void)z0;
    return {[](cx) { return 1.0; }, d, 0.0, "one"};
}
QSource q_log(const Domain& d, cx z0) {
    return {[z0](cx z) { return safe_log1r(std::abs(z - z0)); }, d, 0.0, "log"};
}
QSource q_inv(const Domain& d, cx z0) {
    return {[z0](cx z) { return 1.0 / std::abs(z - z0); }, d, 0.0, "inv"};
}
QSource q_log_sq(const Domain& d, cx z0) {
    return {[z0](cx z) {
                const double L = safe_log1r(std::abs(z - z0));
                return L * L;
            },
            d, 0.0, "log_sq"};
}
QSource q_one_plus_log(const Domain& d, cx z0) {
    return {[z0](cx z) { return 1.0 + safe_log1r(std::abs(z - z0)); }, d, 0.0, "one_plus_log"};
}

QSource q_named(const std::string& name, const Domain& d, cx z0) {
    if (name == "one") return q_one(d, z0);
    if (name == "log") return q_log(d, z0);
    if (name == "inv") return q_inv(d, z0);
    if (name == "log_sq") return q_log_sq(d, z0);
    if (name == "one_plus_log") return q_one_plus_log(d, z0);
    throw ValidationError("unknown named Q: " + name);
}

QSource q_tangent(const field::BeltramiCoefficient& coef, const Domain& d, cx z0) {
    return {[coef, z0](cx z) {
                if (z == z0) return 1.0;
                return field::tangent_dilatation(coef, z, z0);
            },
            d, 0.0, "tangent"};
}

std::vector<double> log_spaced_radii(double r_hi, double decades, int per_decade) {
    if (!(r_hi > 0) || !(decades > 0) || per_decade < 1)
        throw ValidationError("log_spaced_radii: bad parameters");
    const int steps = static_cast<int>(std::ceil(decades * per_decade));
    std::vector<double> radii(steps + 1);
    for (int k = 0; k <= steps; ++k) radii[k] = r_hi * std::pow(10.0, -double(k) / per_decade);
    return radii;
}

CircleNorm circle_norm(const QSource& q, cx z0, const std::vector<double>& radii) {
    for (std::size_t k = 1; k < radii.size(); ++k)
        if (!(radii[k] < radii[k - 1]))
            throw ValidationError("circle_norm: radii must be strictly decreasing");
    CircleNorm out;
    out.z0 = z0;
    out.radii = radii;
    out.values.reserve(radii.size());
    out.arc_lengths.reserve(radii.size());
    for (double r : radii) {
        const auto arcs = circle_arcs_inside(q.domain, z0, r);
        double integral = 0.0, arc_len = 0.0;
        for (auto [a, b] : arcs) {
            const double span = b - a;
            arc_len += span * r;
            // composite trapezoid inside the arc; node floor follows the
            // sampled-field spacing when there is one
            int nodes = 64;
            if (q.grid_spacing > 0)
                nodes = std::max<int>(nodes, static_cast<int>(span * r / q.grid_spacing) + 1);
            nodes = std::max(nodes, static_cast<int>(span / (2.0 * kPi) * 256) + 8);
            // the arc is already a component of D cap S; sample Q directly
            double s = 0.0;
            for (int k = 0; k <= nodes; ++k) {
                const double th = a + span * k / nodes;
                const double v = q.fn(z0 + r * cx(std::cos(th), std::sin(th)));
                if (!std::isfinite(v))
                    throw QuadratureError("circle_norm: non-finite Q at r=" + std::to_string(r) +
                                          " theta=" + std::to_string(th));
                s += (k == 0 || k == nodes) ? 0.5 * v : v;
            }
            integral += s * (span / nodes) * r;
        }
        out.values.push_back(integral);
        out.arc_lengths.push_back(arc_len);
        out.averages.push_back(integral / (2.0 * kPi * r));
        out.arc_averages.push_back(arc_len > 0 ? integral / arc_len : 0.0);
    }
    return out;
}

namespace {

// Partial integrals I(eps_k) = int_{eps_k}^{eps_0} dr/||Q||, trapezoid in
// u = log r (exact for ||Q|| proportional to r); a/0 counts as +infinity
// (Section-5 conventions).
std::vector<double> partial_inverse_integrals(const CircleNorm& norm, bool& hit_infinity) {
    const auto& r = norm.radii;
    const auto& v = norm.values;
    std::vector<double> I(r.size(), 0.0);
    hit_infinity = false;
    for (std::size_t k = 1; k < r.size(); ++k) {
        const double g_hi = v[k - 1] > 0 ? r[k - 1] / v[k - 1] : kInf;
        const double g_lo = v[k] > 0 ? r[k] / v[k] : kInf;
        const double du = std::log(r[k - 1] / r[k]);
        const double seg = 0.5 * (g_hi + g_lo) * du;
        I[k] = I[k - 1] + seg;
        if (!std::isfinite(I[k])) hit_infinity = true;
    }
    return I;
}

struct DecadeWindow {
    std::vector<double> x, y;
};

// Points whose radius lies within the last `decades` decades of the range.
DecadeWindow tail_window(const std::vector<double>& radii, const std::vector<double>& ys,
                         double decades, double (*xf)(double)) {
    DecadeWindow w;
    const double r_min = radii.back();
    const double cutoff = r_min * std::pow(10.0, decades);
    for (std::size_t k = 0; k < radii.size(); ++k)
        if (radii[k] <= cutoff) {
            w.x.push_back(xf(radii[k]));
            w.y.push_back(ys[k]);
        }
    return w;
}

double x_log(double r) { return std::log(1.0 / r); }
double x_loglog(double r) { return std::log(std::log(1.0 / r)); }

// Per-decade increments of a cumulative sequence, with decade-midpoint
// u = log(1/eps) abscissae. Used to read off the Bertrand exponent of the
// tail: increments ~ u^{-p} diverge for p <= 1 and converge for p > 1.
void decade_increments(const std::vector<double>& radii, const std::vector<double>& I,
                       std::vector<double>& u_mid, std::vector<double>& gains) {
    const double r_hi = radii.front();
    double next_cut = r_hi / 10.0;
    double last_I = I.front();
    double last_u = x_log(r_hi);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (radii[k] <= next_cut * (1.0 + 1e-12)) {
            const double u = x_log(radii[k]);
            u_mid.push_back(0.5 * (last_u + u));
            gains.push_back(I[k] - last_I);
            last_I = I[k];
            last_u = u;
            next_cut /= 10.0;
        }
    }
}

} // namespace

namespace {

// Growth-vs-convergence classification of a cumulative sequence I over
// decreasing radii: (1) best-scale slope fit, (2) per-decade increment
// exponent, (3) Cauchy tail. Shared by the divergence test and the psi
// o(I^2) machinery.
Verdict classify_growth(const std::vector<double>& radii, const std::vector<double>& I,
                        const Thresholds& thr);

} // namespace

Verdict divergence_test(const CircleNorm& norm, const Thresholds& thr) {
    const auto& radii = norm.radii;
    if (radii.size() < 20) throw ArgumentError("divergence_test: need at least 20 radii");
    const double span = std::log10(radii.front() / radii.back());
    if (span < 4.0 - 1e-9)
        throw ArgumentError("divergence_test: radii must span at least 4 decades");

    bool hit_inf = false;
    const auto I = partial_inverse_integrals(norm, hit_inf);
    if (hit_inf) {
        Verdict v;
        for (std::size_t k = 0; k < radii.size(); ++k) v.sequence.emplace_back(radii[k], I[k]);
        v.status = Status::Satisfied;
        v.scale = "zero-norm radii contribute infinite 1/||Q||";
        return v;
    }
    return classify_growth(radii, I, thr);
}

namespace {

Verdict classify_growth(const std::vector<double>& radii, const std::vector<double>& I,
                        const Thresholds& thr) {
    Verdict v;
    for (std::size_t k = 0; k < radii.size(); ++k) v.sequence.emplace_back(radii[k], I[k]);

    const auto w_log = tail_window(radii, I, 2.0, x_log);
    const auto w_llog = tail_window(radii, I, 2.0, x_loglog);
    v.slope_log = fit_slope(w_log.x, w_log.y);
    v.slope_loglog = fit_slope(w_llog.x, w_llog.y);
    const double r2_log = fit_r2(w_log.x, w_log.y);
    const double r2_llog = fit_r2(w_llog.x, w_llog.y);
    const bool log_best = r2_log >= r2_llog;
    const double best_slope = log_best ? v.slope_log : v.slope_loglog;
    if (best_slope > thr.slope_min) {
        v.status = Status::Satisfied;
        v.scale = log_best ? "log(1/eps)" : "loglog(1/eps)";
        return v;
    }

    std::vector<double> u_mid, gains;
    decade_increments(radii, I, u_mid, gains);
    if (u_mid.size() >= 3) {
        std::vector<double> lx, ly;
        bool positive = true;
        for (std::size_t k = 0; k < gains.size(); ++k) {
            if (!(gains[k] > 0)) {
                positive = false;
                break;
            }
            lx.push_back(std::log(u_mid[k]));
            ly.push_back(std::log(gains[k]));
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
    }

    // Cauchy tail: largest per-step increment over the last decade
    const double total = I.back();
    double max_step = 0.0;
    const double cutoff = radii.back() * 10.0;
    for (std::size_t k = 1; k < radii.size(); ++k)
        if (radii[k] <= cutoff) max_step = std::max(max_step, I[k] - I[k - 1]);
    if (total > 0 && max_step < thr.cauchy_rel * total) {
        v.status = Status::Fails;
        v.scale = "cauchy tail";
        return v;
    }
    v.status = Status::Inconclusive;
    v.reason = "neither divergent growth nor a summable tail could be established";
    return v;
}

} // namespace

namespace {

// Least squares of R ~ L + C/x + D/x^2; returns the fitted limit L.
double fitted_limit(const std::vector<double>& x, const std::vector<double>& R) {
    double a[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double b[3] = {0, 0, 0};
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double basis[3] = {1.0, 1.0 / x[k], 1.0 / (x[k] * x[k])};
        for (int i = 0; i < 3; ++i) {
            b[i] += basis[i] * R[k];
            for (int j = 0; j < 3; ++j) a[i][j] += basis[i] * basis[j];
        }
    }
    // Gaussian elimination, 3x3
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        if (a[col][col] == 0) return R.back();
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    double sol[3];
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * sol[c];
        sol[r] = s / a[r][r];
    }
    return sol[0];
}

// Shared o-model decision: ratios R_k against the model scale x_k must
// tend to zero. Increasing ratios fail immediately; otherwise the
// extrapolated limit decides.
Verdict o_model_verdict(const std::vector<double>& x, const std::vector<double>& R,
                        const std::vector<double>& eps, const Thresholds& thr) {
    Verdict v;
    for (std::size_t k = 0; k < R.size(); ++k) v.sequence.emplace_back(eps[k], R[k]);
    if (R.size() < 4) {
        v.status = Status::Inconclusive;
        v.reason = "too few ratio samples";
        return v;
    }
    const std::size_t tail = R.size() / 3;
    double head_max = 0, tail_max = 0;
    for (std::size_t k = 0; k < R.size(); ++k) {
        double& slot = (k + tail >= R.size()) ? tail_max : head_max;
        slot = std::max(slot, R[k]);
    }
    if (tail_max > head_max * 1.05) {
        v.status = Status::Fails;
        v.scale = "ratio increasing";
        return v;
    }
    const double L = fitted_limit(x, R);
    v.fitted_limit = L;
    const double last = R.back();
    if (L <= thr.o_sat_frac * last) {
        v.status = Status::Satisfied;
        v.scale = "fitted limit ~ 0";
    } else if (L >= thr.o_fail_frac * last) {
        v.status = Status::Fails;
        v.scale = "fitted limit positive";
    } else {
        v.status = Status::Inconclusive;
        v.reason = "fitted limit in the undecided band";
    }
    return v;
}

} // namespace

Verdict circle_average_growth(const CircleNorm& norm, GrowthModel model, const Thresholds& thr) {
    const auto& radii = norm.radii;
    std::vector<double> ratio(radii.size());
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double u = x_log(radii[k]);
        const double m = model == GrowthModel::OLog ? u : u * std::log(u);
        ratio[k] = norm.averages[k] / m;
    }
    Verdict v;
    for (std::size_t k = 0; k < radii.size(); ++k) v.sequence.emplace_back(radii[k], ratio[k]);
    if (model == GrowthModel::OLog) {
        // bounded iff log(ratio) does not grow against log(log(1/r))
        std::vector<double> lx, ly;
        for (std::size_t k = 0; k < radii.size(); ++k)
            if (ratio[k] > 0) {
                lx.push_back(std::log(x_log(radii[k])));
                ly.push_back(std::log(ratio[k]));
            }
        const double s = fit_slope(lx, ly);
        v.slope_log = s;
        if (s <= 0.1) {
            v.status = Status::Satisfied;
            v.scale = "bounded ratio";
        } else if (s >= 0.25) {
            v.status = Status::Fails;
            v.scale = "growing ratio";
        } else {
            v.status = Status::Inconclusive;
            v.reason = "ratio growth in the undecided band";
        }
        return v;
    }
    // decay scale for the o(log loglog) model is v = loglog(1/r)
    std::vector<double> xs(radii.size());
    for (std::size_t k = 0; k < radii.size(); ++k) xs[k] = std::log(x_log(radii[k]));
    std::vector<double> eps(radii.begin(), radii.end());
    return o_model_verdict(xs, ratio, eps, thr);
}

namespace {

// Mean of phi over D cap B(z0, eps) and the mean absolute deviation from
// that mean, by composite polar quadrature with one node sweep.
void disk_mean_and_osc(const QSource& phi, cx z0, double eps, double& mean, double& osc) {
    const int nr = 160;
    std::vector<std::pair<double, double>> nodes; // (value, weight)
    nodes.reserve(nr * 128);
    for (int k = 0; k < nr; ++k) {
        const double r = eps * (k + 0.5) / nr;
        const auto arcs = circle_arcs_inside(phi.domain, z0, r, 512);
        for (auto [a, b] : arcs) {
            const double span = b - a;
            const int nt = std::max(48, int(span / (2 * kPi) * 160) + 4);
            for (int t = 0; t < nt; ++t) {
                const double th = a + span * (t + 0.5) / nt;
                const double val = phi.fn(z0 + r * cx(std::cos(th), std::sin(th)));
                nodes.emplace_back(val, r * (span / nt) * (eps / nr));
            }
        }
    }
    double acc = 0.0, area = 0.0;
    for (auto [v, w] : nodes) {
        acc += v * w;
        area += w;
    }
    mean = area > 0 ? acc / area : 0.0;
    double osc_acc = 0.0;
    for (auto [v, w] : nodes) osc_acc += std::abs(v - mean) * w;
    osc = area > 0 ? osc_acc / area : 0.0;
}

} // namespace

FmoReport fmo_estimate(const QSource& phi, cx z0, const std::vector<double>& epsilons,
                       const Thresholds& thr) {
    FmoReport rep;
    rep.z0 = z0;
    for (double e : epsilons) {
        if (phi.grid_spacing > 0 && e < 4 * phi.grid_spacing) continue; // unresolvable
        double mean = 0, osc = 0;
        disk_mean_and_osc(phi, z0, e, mean, osc);
        rep.epsilons.push_back(e);
        rep.means.push_back(mean);
        rep.oscillations.push_back(osc);
    }
    Verdict& v = rep.verdict;
    for (std::size_t k = 0; k < rep.epsilons.size(); ++k)
        v.sequence.emplace_back(rep.epsilons[k], rep.oscillations[k]);
    if (rep.epsilons.empty() ||
        std::log10(rep.epsilons.front() / rep.epsilons.back()) < 3.0 - 1e-9) {
        v.status = Status::Inconclusive;
        v.reason = "fewer than 3 decades of usable epsilons";
        return rep;
    }
    // per-decade maxima of the oscillation sequence
    std::vector<double> dec_max;
    double cut = rep.epsilons.front() / 10.0;
    double cur = 0.0;
    for (std::size_t k = 0; k < rep.epsilons.size(); ++k) {
        cur = std::max(cur, rep.oscillations[k]);
        if (rep.epsilons[k] <= cut * (1 + 1e-12)) {
            dec_max.push_back(cur);
            cur = 0.0;
            cut /= 10.0;
        }
    }
    if (cur > 0 || dec_max.empty()) dec_max.push_back(cur);
    bool growing = dec_max.size() >= 3;
    for (std::size_t k = 1; k < dec_max.size(); ++k)
        if (!(dec_max[k - 1] > 0 && dec_max[k] >= thr.growth_ratio * dec_max[k - 1])) {
            growing = false;
            break;
        }
    if (growing) {
        v.status = Status::Fails;
        v.scale = "oscillation grows per decade";
        return rep;
    }
    const double last = dec_max.back();
    const double prev = dec_max.size() >= 2 ? dec_max[dec_max.size() - 2] : last;
    if (last <= thr.fmo_bound_factor * prev + 1e-300) {
        v.status = Status::Satisfied;
        v.scale = "bounded oscillation";
    } else {
        v.status = Status::Inconclusive;
        v.reason = "oscillation neither clearly bounded nor steadily growing";
    }
    return rep;
}

double bmo_norm(const QSource& phi, const Domain& region, int depth) {
    if (depth < 1) throw ArgumentError("bmo_norm: depth must be >= 1");
    const double R0 = region.circumradius() / 2.0;
    double sup = 0.0;
    for (int d = 1; d <= depth; ++d) {
        const double rho = R0 / double(1 << d);
        const double step = 2.0 * rho;
        const int m = static_cast<int>(std::ceil(region.circumradius() / step)) + 1;
        for (int j = -m; j <= m; ++j)
            for (int i = -m; i <= m; ++i) {
                const cx c = region.center + cx(i * step, j * step);
                if (!region.contains(c) || region.boundary_distance(c) <= rho) continue;
                // full disks inside the region: midpoint polar quadrature
                const int nr = 32, nt = 64;
                double mean = 0, area = 0;
                for (int a = 0; a < nr; ++a) {
                    const double r = rho * (a + 0.5) / nr;
                    for (int t = 0; t < nt; ++t) {
                        const double th = 2 * kPi * (t + 0.5) / nt;
                        mean += phi.fn(c + r * cx(std::cos(th), std::sin(th))) * r;
                        area += r;
                    }
                }
                mean /= area;
                double osc = 0;
                for (int a = 0; a < nr; ++a) {
                    const double r = rho * (a + 0.5) / nr;
                    for (int t = 0; t < nt; ++t) {
                        const double th = 2 * kPi * (t + 0.5) / nt;
                        osc += std::abs(phi.fn(c + r * cx(std::cos(th), std::sin(th))) - mean) * r;
                    }
                }
                osc /= area;
                sup = std::max(sup, osc);
            }
    }
    return sup;
}

namespace {

// int over D cap {eps < |z-z0| < eps0} of g(z) dm by log-radial midpoint x
// angular quadrature; returns cumulative partial integrals at the radii.
std::vector<double> annular_partials(const QSource& q, cx z0,
                                     const std::vector<double>& eps_grid, double eps0,
                                     const std::function<double(double)>& radial_weight) {
    // eps_grid decreasing; integrate ring-by-ring from eps0 down with a
    // trapezoid in r over log-spaced sublevels (exact for area integrals)
    std::vector<double> partial(eps_grid.size(), 0.0);
    auto ring_density = [&](double r) {
        // integral of Q over angle at radius r, times the radial weight and r
        const auto arcs = circle_arcs_inside(q.domain, z0, r, 512);
        double ring = 0.0;
        for (auto [aa, bb] : arcs) {
            const double span = bb - aa;
            const int nt = std::max(64, int(span / (2 * kPi) * 256) + 4);
            for (int t = 0; t < nt; ++t) {
                const double th = aa + span * (t + 0.5) / nt;
                ring += q.fn(z0 + r * cx(std::cos(th), std::sin(th))) * (span / nt);
            }
        }
        const double g = ring * radial_weight(r) * r;
        if (!std::isfinite(g))
            throw QuadratureError("annular integral: non-integrable sample at r=" +
                                  std::to_string(r));
        return g;
    };
    double acc = 0.0;
    double hi = eps0;
    double g_hi = ring_density(hi);
    for (std::size_t k = 0; k < eps_grid.size(); ++k) {
        const double lo = eps_grid[k];
        const int nr = 8;
        for (int a = 0; a < nr; ++a) {
            const double r1 = hi * std::pow(lo / hi, double(a + 1) / nr);
            const double g_lo = ring_density(r1);
            const double r0 = hi * std::pow(lo / hi, double(a) / nr);
            acc += 0.5 * (g_hi + g_lo) * (r0 - r1);
            g_hi = g_lo;
        }
        partial[k] = acc;
        hi = lo;
    }
    return partial;
}

} // namespace

AnnularResult annular_weighted_integral(const QSource& q, cx z0, double eps, double eps0,
                                        AnnularWeight weight, const Thresholds& thr) {
    if (!(eps > 0 && eps < eps0)) throw ArgumentError("annular integral: need 0 < eps < eps0");
    auto wfun = [weight](double r) {
        if (weight == AnnularWeight::InvSq) return 1.0 / (r * r);
        const double L = std::log(1.0 / r);
        return 1.0 / (r * r * L * L);
    };
    // geometric levels from eps0 down to exactly eps
    const int per_decade = 12;
    const double decades = std::log10(eps0 / eps);
    const int steps = std::max(4, static_cast<int>(std::ceil(decades * per_decade)));
    std::vector<double> eps_grid(steps);
    for (int k = 1; k <= steps; ++k)
        eps_grid[k - 1] = eps0 * std::pow(eps / eps0, double(k) / steps);
    const auto partial = annular_partials(q, z0, eps_grid, eps0, wfun);

    AnnularResult out;
    out.value = partial.back();
    std::vector<double> xs(eps_grid.size()), Rs(eps_grid.size());
    for (std::size_t k = 0; k < eps_grid.size(); ++k) {
        const double u = std::log(1.0 / eps_grid[k]);
        const double model =
            weight == AnnularWeight::InvSq ? u * u : std::log(u) * std::log(u);
        xs[k] = weight == AnnularWeight::InvSq ? u : std::log(u);
        Rs[k] = partial[k] / model;
    }
    out.verdict = o_model_verdict(xs, Rs, eps_grid, thr);
    return out;
}

double exp_integrability(const QSource& q, cx z0, double alpha, double eps0) {
    if (!(alpha > 0)) throw ArgumentError("exp_integrability: alpha must be positive");
    auto eq = q;
    auto inner = q.fn;
    bool overflow = false;
    eq.fn = [inner, alpha, &overflow](cx z) {
        const double e = alpha * inner(z);
        if (e > 700.0) {
            overflow = true;
            return std::numeric_limits<double>::max() / 1e10;
        }
        return std::exp(e);
    };
    const auto eps_grid = log_spaced_radii(eps0 / 10.0, 4.0, 8);
    std::vector<double> partial;
    try {
        partial = annular_partials(eq, z0, eps_grid, eps0, [](double) { return 1.0; });
    } catch (const QuadratureError&) {
        return kInf;
    }
    if (overflow) return kInf;
    // Cauchy in the inner cutoff => finite; otherwise report +infinity
    const double total = partial.back();
    const std::size_t m = partial.size();
    const double last_gain = partial[m - 1] - partial[m - 1 - std::min<std::size_t>(8, m - 1)];
    if (total > 0 && last_gain > 0.05 * total) return kInf;
    return total;
}

PsiResult psi_family_test(const QSource& q, cx z0, PsiFamily psi, double eps0,
                          const Thresholds& thr) {
    const int per_decade = 12;
    const double decades = 5.0;
    auto radii = log_spaced_radii(eps0, decades, per_decade);

    PsiResult out;
    CircleNorm norm;
    std::function<double(double)> psi_fn;
    switch (psi) {
    case PsiFamily::InvT:
        psi_fn = [](double t) { return 1.0 / t; };
        break;
    case PsiFamily::InvTLog:
        psi_fn = [](double t) { return 1.0 / (t * std::log(1.0 / t)); };
        break;
    case PsiFamily::InvCircleNorm: {
        norm = circle_norm(q, z0, radii);
        break;
    }
    }

    // I(eps) = int_eps^eps0 psi(t) dt on the same grid
    std::vector<double> I(radii.size(), 0.0);
    if (psi == PsiFamily::InvCircleNorm) {
        bool inf = false;
        I = partial_inverse_integrals(norm, inf);
        psi_fn = [&norm](double t) {
            // interpolate 1/||Q|| against log r, where it varies smoothly
            const auto& rs = norm.radii;
            if (t >= rs.front()) return norm.values.front() > 0 ? 1.0 / norm.values.front() : 0.0;
            if (t <= rs.back()) return norm.values.back() > 0 ? 1.0 / norm.values.back() : 0.0;
            std::size_t lo = 0, hi = rs.size() - 1;
            while (hi - lo > 1) {
                const std::size_t mid = (lo + hi) / 2;
                (rs[mid] > t ? lo : hi) = mid;
            }
            const double f = std::log(rs[lo] / t) / std::log(rs[lo] / rs[hi]);
            const double v0 = norm.values[lo] > 0 ? 1.0 / norm.values[lo] : 0.0;
            const double v1 = norm.values[hi] > 0 ? 1.0 / norm.values[hi] : 0.0;
            return v0 + f * (v1 - v0);
        };
    } else {
        for (std::size_t k = 1; k < radii.size(); ++k) {
            const double seg =
                0.5 * (psi_fn(radii[k - 1]) + psi_fn(radii[k])) * (radii[k - 1] - radii[k]);
            I[k] = I[k - 1] + seg;
        }
    }
    if (!(I.back() > 0)) throw ArgumentError("psi_family_test: I(eps) vanished");

    // LHS(eps) = int over the annulus of Q psi^2(|z-z0|), honest 2D quadrature
    auto grid = radii;
    grid.erase(grid.begin());
    auto w2 = [&psi_fn](double r) {
        const double p = psi_fn(r);
        return p * p;
    };
    const auto lhs = annular_partials(q, z0, grid, eps0, w2);

    out.lhs = lhs;
    out.I.assign(I.begin() + 1, I.end());

    if (psi == PsiFamily::InvCircleNorm) {
        double worst = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (out.I[k] > 0)
                worst = std::max(worst, std::abs(lhs[k] - out.I[k]) / out.I[k]);
        }
        out.fubini_max_rel = worst;
    }

    // o(I^2) presumes I(eps) -> infinity; a bounded I fails outright because
    // the annular integral itself is increasing in the shrinking cutoff.
    const Verdict growth = classify_growth(grid, out.I, thr);
    if (growth.status == Status::Fails) {
        out.verdict = growth;
        out.verdict.status = Status::Fails;
        out.verdict.scale = "I(eps) bounded";
        return out;
    }
    std::vector<double> xs(grid.size()), Rs(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        xs[k] = out.I[k];
        Rs[k] = lhs[k] / (out.I[k] * out.I[k]);
    }
    out.verdict = o_model_verdict(xs, Rs, grid, thr);
    return out;
}

} // namespace beltrami::criteria
