#include "beltrami/coefficient.hpp"

#include <cmath>
#include <sstream>

namespace beltrami::field {

namespace {
constexpr double kClampLimit = 1.0 - 1e-14;

std::string point_str(cx z) {
    std::ostringstream os;
    os << "(" << z.real() << ", " << z.imag() << ")";
    return os.str();
}
} // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
    const std::size_t n = xs_.size();
    if (n < 2 || ys_.size() != n)
        throw ValidationError("radial_profile: need at least two (r, rho) pairs");
    for (std::size_t i = 1; i < n; ++i)
        if (!(xs_[i] > xs_[i - 1]) || !(ys_[i] > ys_[i - 1]))
            throw ValidationError("radial_profile: table must be strictly increasing");
    // Fritsch-Carlson tangents: keeps the interpolant monotone so rho' > 0
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
    slopes_.assign(n, 0.0);
    slopes_[0] = d[0];
    slopes_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) slopes_[i] = 0.5 * (d[i - 1] + d[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a = slopes_[i] / d[i], b = slopes_[i + 1] / d[i];
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double t = 3.0 / std::sqrt(s);
            slopes_[i] = t * a * d[i];
            slopes_[i + 1] = t * b * d[i];
        }
    }
}

std::size_t MonotoneCubic::segment(double x) const {
    std::size_t lo = 0, hi = xs_.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (xs_[mid] <= x ? lo : hi) = mid;
    }
    return lo;
}

double MonotoneCubic::eval(double x) const {
    if (x <= xs_.front()) return ys_.front() + slopes_.front() * (x - xs_.front());
    if (x >= xs_.back()) return ys_.back() + slopes_.back() * (x - xs_.back());
    const std::size_t i = segment(x);
    const double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * ys_[i] + h10 * h * slopes_[i] + h01 * ys_[i + 1] + h11 * h * slopes_[i + 1];
}

double MonotoneCubic::derivative(double x) const {
    if (x <= xs_.front()) return slopes_.front();
    if (x >= xs_.back()) return slopes_.back();
    const std::size_t i = segment(x);
    const double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
    const double d00 = (6 * t * t - 6 * t) / h, d10 = 3 * t * t - 4 * t + 1;
    const double d01 = (6 * t - 6 * t * t) / h, d11 = 3 * t * t - 2 * t;
    return d00 * ys_[i] + d10 * slopes_[i] + d01 * ys_[i + 1] + d11 * slopes_[i + 1];
}

BeltramiCoefficient BeltramiCoefficient::constant(cx k) {
    if (std::abs(k) >= 1.0) throw ValidationError("constant coefficient needs |k| < 1");
    BeltramiCoefficient c;
    c.family_ = CoefFamily::Constant;
    c.k_ = k;
    return c;
}

BeltramiCoefficient BeltramiCoefficient::radial_stretch(double K, cx center) {
    if (!(K >= 1.0)) throw ValidationError("radial_stretch needs K >= 1");
    BeltramiCoefficient c;
    c.family_ = CoefFamily::RadialStretch;
    c.K_ = K;
    c.center_ = center;
    return c;
}

BeltramiCoefficient BeltramiCoefficient::radial_profile(std::vector<double> radii,
                                                        std::vector<double> rho, cx center) {
    BeltramiCoefficient c;
    c.family_ = CoefFamily::RadialProfile;
    c.profile_ = MonotoneCubic(std::move(radii), std::move(rho));
    c.center_ = center;
    return c;
}

BeltramiCoefficient BeltramiCoefficient::angular(double k, cx z0, int sign) {
    if (!(k >= 0.0 && k < 1.0)) throw ValidationError("angular family needs 0 <= k < 1");
    if (sign != 1 && sign != -1) throw ValidationError("angular family sign must be +1 or -1");
    BeltramiCoefficient c;
    c.family_ = CoefFamily::Angular;
    c.k_ = cx(k, 0);
    c.center_ = z0;
    c.sign_ = sign;
    return c;
}

BeltramiCoefficient BeltramiCoefficient::degenerate_log(cx z0) {
    BeltramiCoefficient c;
    c.family_ = CoefFamily::DegenerateLog;
    c.center_ = z0;
    return c;
}

BeltramiCoefficient BeltramiCoefficient::sampled(ComplexField field, DomainMask mask) {
    BeltramiCoefficient c;
    c.family_ = CoefFamily::Sampled;
    c.field_ = std::make_shared<ComplexField>(std::move(field));
    c.mask_ = std::make_shared<DomainMask>(std::move(mask));
    return c;
}

std::string BeltramiCoefficient::describe() const {
    std::ostringstream os;
    switch (family_) {
    case CoefFamily::Constant:
        os << "constant(" << k_.real() << (k_.imag() < 0 ? "-" : "+") << std::abs(k_.imag())
           << "i)";
        break;
    case CoefFamily::RadialStretch:
        os << "radial_stretch(K=" << K_ << ")";
        break;
    case CoefFamily::RadialProfile:
        os << "radial_profile";
        break;
    case CoefFamily::Angular:
        os << "angular(k=" << k_.real() << ", sign=" << (sign_ > 0 ? "+" : "-") << ")";
        break;
    case CoefFamily::DegenerateLog:
        os << "degenerate_log(z0=" << point_str(center_) << ")";
        break;
    case CoefFamily::Sampled:
        os << "sampled";
        break;
    }
    return os.str();
}

cx BeltramiCoefficient::clamp(cx mu) const {
    const double a = std::abs(mu);
    if (a > kClampLimit) {
        counter_->fetch_add(1);
        if (a == 0.0 || !std::isfinite(a)) return cx(kClampLimit, 0.0);
        return mu * (kClampLimit / a);
    }
    return mu;
}

bool BeltramiCoefficient::defined_at(cx z) const {
    if (family_ == CoefFamily::Sampled) {
        int i, j;
        if (!mask_->grid.locate(z, i, j)) return false;
        return mask_->cell_inside(i, j);
    }
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

cx BeltramiCoefficient::eval(cx z) const {
    switch (family_) {
    case CoefFamily::Constant:
        return k_;
    case CoefFamily::RadialStretch: {
        const cx w = z - center_;
        if (w == cx(0, 0)) return cx(0, 0); // removable: |mu| constant, phase undefined
        return ((K_ - 1.0) / (K_ + 1.0)) * (w / std::conj(w));
    }
    case CoefFamily::RadialProfile: {
        const cx w = z - center_;
        const double r = std::abs(w);
        if (r == 0.0) return cx(0, 0);
        const double rho = profile_.eval(r), drho = profile_.derivative(r);
        if (!(rho > 0.0) || !(drho > 0.0))
            throw DegeneracyError("radial_profile: rho or rho' not positive at r=" +
                                  std::to_string(r));
        const double m = (r * drho - rho) / (r * drho + rho);
        return clamp(m * (w / std::conj(w)));
    }
    case CoefFamily::Angular: {
        const cx w = z - center_;
        if (w == cx(0, 0)) return cx(0, 0);
        return double(sign_) * k_.real() * (w / std::conj(w));
    }
    case CoefFamily::DegenerateLog: {
        const cx w = z - center_;
        const double r = std::abs(w);
        if (r == 0.0) {
            counter_->fetch_add(1);
            return cx(kClampLimit, 0.0);
        }
        const double L = std::max(0.0, std::log(1.0 / r)); // K = 1 + log(1/r), identity for r >= 1
        const double m = L / (2.0 + L);
        if (r >= 1.0) return cx(0, 0);
        return clamp(m * (w / std::conj(w)));
    }
    case CoefFamily::Sampled: {
        int i, j;
        if (!mask_->grid.locate(z, i, j) || !mask_->cell_inside(i, j))
            throw DomainError("sampled coefficient undefined at z=" + point_str(z));
        const cx mu = field_->values[mask_->grid.index(i, j)];
        if (!std::isfinite(mu.real()) || !std::isfinite(mu.imag()) || std::abs(mu) >= 1.0)
            throw DegeneracyError("sampled coefficient has |mu| >= 1 at z=" + point_str(z) +
                                  " (cell " + std::to_string(i) + "," + std::to_string(j) + ")");
        return mu;
    }
    }
    return cx(0, 0);
}

cx eval_mu(const BeltramiCoefficient& coef, cx z) {
    if (!coef.defined_at(z))
        throw DomainError("eval_mu: z=" + point_str(z) + " outside coefficient domain");
    const cx mu = coef.eval(z);
    if (std::abs(mu) >= 1.0)
        throw DegeneracyError("eval_mu: |mu| >= 1 at z=" + point_str(z));
    return mu;
}

double dilatation(const BeltramiCoefficient& coef, cx z) {
    const double a = std::abs(eval_mu(coef, z));
    return (1.0 + a) / (1.0 - a);
}

double tangent_dilatation_value(cx mu, cx z, cx z0) {
    if (z == z0) throw ArgumentError("tangent_dilatation: z must differ from z0");
    const cx w = z - z0;
    const cx ratio = std::conj(w) / w;
    const double num = std::norm(cx(1, 0) - ratio * mu);
    const double den = 1.0 - std::norm(mu);
    return num / den;
}

double tangent_dilatation(const BeltramiCoefficient& coef, cx z, cx z0) {
    if (z == z0) throw ArgumentError("tangent_dilatation: z must differ from z0");
    return tangent_dilatation_value(eval_mu(coef, z), z, z0);
}

ComplexField sample_field(const BeltramiCoefficient& coef, const DomainMask& mask) {
    ComplexField f;
    f.grid = mask.grid;
    f.values.assign(mask.grid.cell_count(), cx(0, 0));
    for (int j = 0; j < mask.grid.n; ++j)
        for (int i = 0; i < mask.grid.n; ++i) {
            if (!mask.cell_inside(i, j)) continue;
            const cx z = mask.grid.cell_center(i, j);
            try {
                f.values[mask.grid.index(i, j)] = eval_mu(coef, z);
            } catch (const DegeneracyError& e) {
                throw DegeneracyError(std::string(e.what()) + " [cell " + std::to_string(i) + "," +
                                      std::to_string(j) + "]");
            }
        }
    return f;
}

} // namespace beltrami::field
