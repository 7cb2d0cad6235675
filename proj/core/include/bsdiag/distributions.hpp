#pragma once

#include "bsdiag/numeric.hpp"

#include <cstdint>
#include <random>

namespace bsdiag {

/// Birnbaum-Saunders parameters: shape alpha > 0, scale eta > 0.
struct BSParams {
    double alpha = 1.0;
    double eta = 1.0;
};

/// Sinh-normal parameters: shape alpha > 0, location mu, scale sigma > 0.
/// The regression model fixes sigma = 2.
struct SNParams {
    double alpha = 1.0;
    double mu = 0.0;
    double sigma = 2.0;
};

enum class Modality { unimodal, bimodal };

/// Log-density of BS(alpha, eta) at t > 0. Throws DomainError for t <= 0 or bad params.
double bs_logpdf(double t, const BSParams& p);

/// Log-density of SN(alpha, mu, sigma):
///   log(2/(alpha sigma sqrt(2 pi))) + log cosh(z) - (2/alpha^2) sinh^2(z),  z = (y-mu)/sigma.
double sn_logpdf(double y, const SNParams& p);

/// Bimodal iff alpha > 2.
Modality sn_modality(double alpha);

/// log(cosh(u)) without overflow.
double log_cosh(double u);

/// Seedable source of uniform and standard-normal variates.
///
/// Uniforms take the top 53 bits of a 64-bit Mersenne twister draw; normals use
/// the Box-Muller transform, consuming two uniforms per pair and caching the
/// second variate. Streams are reproducible for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// n draws y = mu + sigma * asinh(alpha z / 2), z ~ N(0, 1).
Vector sn_sample(const SNParams& p, std::uint64_t seed, std::size_t n);
/// Same transform drawing from a caller-owned generator.
double sn_draw(const SNParams& p, Rng& rng);

}  // namespace bsdiag
