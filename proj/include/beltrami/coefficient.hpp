#ifndef BELTRAMI_COEFFICIENT_HPP
#define BELTRAMI_COEFFICIENT_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "beltrami/geometry.hpp"

namespace beltrami::field {

// Families of complex dilatation coefficients mu with |mu| < 1.
//   constant        mu = k
//   radial_stretch  mu = ((K-1)/(K+1)) z/conj(z), solved exactly by z|z|^{K-1}
//   radial_profile  mu from a monotone table rho(r): mu = ((r rho'-rho)/(r rho'+rho)) z/conj(z)
//   angular         mu = sign * k (z-z0)/conj(z-z0); hits both bounds of the
//                   tangent-dilatation estimate depending on sign
//   degenerate_log  K_mu(z) = 1 + log(1/|z-z0|) for |z-z0| < 1, identity beyond
//   sampled         grid-sampled field on a mask
enum class CoefFamily { Constant, RadialStretch, RadialProfile, Angular, DegenerateLog, Sampled };

// Monotone cubic interpolation (Fritsch-Carlson) of an increasing table.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> xs, std::vector<double> ys);
    double eval(double x) const;
    double derivative(double x) const;
    double x_min() const { return xs_.front(); }
    double x_max() const { return xs_.back(); }

private:
    std::vector<double> xs_, ys_, slopes_;
    std::size_t segment(double x) const;
};

class BeltramiCoefficient {
public:
    static BeltramiCoefficient constant(cx k);
    static BeltramiCoefficient radial_stretch(double K, cx center = cx(0, 0));
    static BeltramiCoefficient radial_profile(std::vector<double> radii, std::vector<double> rho,
                                              cx center = cx(0, 0));
    static BeltramiCoefficient angular(double k, cx z0, int sign);
    static BeltramiCoefficient degenerate_log(cx z0);
    static BeltramiCoefficient sampled(ComplexField field, DomainMask mask);

    CoefFamily family() const { return family_; }
    cx family_center() const { return center_; }
    std::string describe() const;

    // mu(z); clamps |mu| <= 1 - 1e-14 and counts clamps. Degeneracy beyond
    // the clamp (non-finite or |mu| >= 1 in sampled data) raises
    // DegeneracyError with the location.
    cx eval(cx z) const;

    // Whether z lies in the coefficient's domain of definition.
    bool defined_at(cx z) const;

    std::uint64_t clamp_count() const { return counter_->load(); }

private:
    CoefFamily family_ = CoefFamily::Constant;
    cx k_{0.0, 0.0};
    double K_ = 1.0;
    int sign_ = +1;
    cx center_{0.0, 0.0};
    MonotoneCubic profile_;
    std::shared_ptr<ComplexField> field_;
    std::shared_ptr<DomainMask> mask_;
    std::shared_ptr<std::atomic<std::uint64_t>> counter_ =
        std::make_shared<std::atomic<std::uint64_t>>(0);

    cx clamp(cx mu) const;
};

// mu(z) with the domain/degeneracy error contract of the operation table.
cx eval_mu(const BeltramiCoefficient& coef, cx z);

// (1 + |mu|)/(1 - |mu|) >= 1.
double dilatation(const BeltramiCoefficient& coef, cx z);

// |1 - (conj(z-z0)/(z-z0)) mu(z)|^2 / (1 - |mu(z)|^2); requires z != z0.
double tangent_dilatation(const BeltramiCoefficient& coef, cx z, cx z0);
double tangent_dilatation_value(cx mu, cx z, cx z0);

// Pointwise mu over the masked cells.
ComplexField sample_field(const BeltramiCoefficient& coef, const DomainMask& mask);

} // namespace beltrami::field

#endif
