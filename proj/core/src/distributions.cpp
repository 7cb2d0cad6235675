#include "bsdiag/distributions.hpp"

#include "bsdiag/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bsdiag {

namespace {

void check_shape(double alpha, const char* who) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw DomainError(std::string(who) + ": alpha must be positive and finite");
}

}  // namespace

double log_cosh(double u) {
    const double a = std::abs(u);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double bs_logpdf(double t, const BSParams& p) {
    check_shape(p.alpha, "bs_logpdf");
    if (!(p.eta > 0.0)) throw DomainError("bs_logpdf: eta must be positive");
    if (!(t > 0.0)) throw DomainError("bs_logpdf: t must be positive, got " + std::to_string(t));
    const double r = p.eta / t;
    // (r^{1/2} + r^{3/2}) = sqrt(r) (1 + r)
    const double bracket = 0.5 * std::log(r) + std::log1p(r);
    const double exponent = (t / p.eta + r - 2.0) / (2.0 * p.alpha * p.alpha);
    return -std::log(2.0 * p.alpha * p.eta * std::sqrt(2.0 * std::numbers::pi)) + bracket -
           exponent;
}

double sn_logpdf(double y, const SNParams& p) {
    check_shape(p.alpha, "sn_logpdf");
    if (!(p.sigma > 0.0)) throw DomainError("sn_logpdf: sigma must be positive");
    const double z = (y - p.mu) / p.sigma;
    const double sh = std::sinh(z);
    return std::log(2.0 / (p.alpha * p.sigma * std::sqrt(2.0 * std::numbers::pi))) + log_cosh(z) -
           2.0 * sh * sh / (p.alpha * p.alpha);
}

Modality sn_modality(double alpha) {
    check_shape(alpha, "sn_modality");
    return alpha > 2.0 ? Modality::bimodal : Modality::unimodal;
}

double Rng::uniform() {
    // (k + 0.5) / 2^53 keeps the value strictly inside (0, 1).
    const std::uint64_t k = engine_() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

double sn_draw(const SNParams& p, Rng& rng) {
    return p.mu + p.sigma * std::asinh(0.5 * p.alpha * rng.normal());
}

Vector sn_sample(const SNParams& p, std::uint64_t seed, std::size_t n) {
    check_shape(p.alpha, "sn_sample");
    if (!(p.sigma > 0.0)) throw DomainError("sn_sample: sigma must be positive");
    Rng rng(seed);
    Vector out(n);
    for (double& y : out) y = sn_draw(p, rng);
    return out;
}

}  // namespace bsdiag
