#include "mmcc/rng.hpp"

#include <cmath>

namespace mmcc::rng {

double Stream::next_normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

} // namespace mmcc::rng
