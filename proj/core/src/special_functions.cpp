#include "bsdiag/errors.hpp"
#include "bsdiag/numeric.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bsdiag {

double erf(double x) { return std::erf(x); }

double erfcx(double x) {
    if (!(x >= 0.0)) {
        throw DomainError("erfcx: argument must be non-negative, got " + std::to_string(x));
    }
    // Below 10 the product is well inside double range and erfc has full
    // relative accuracy.
    if (x < 10.0) return std::exp(x * x) * std::erfc(x);

    // Laplace continued fraction
    //   erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    // evaluated bottom-up; 60 levels is far past convergence for x >= 10.
    double tail = x;
    for (int k = 60; k >= 1; --k) tail = x + 0.5 * k / tail;
    return 1.0 / (std::sqrt(std::numbers::pi) * tail);
}

}  // namespace bsdiag
