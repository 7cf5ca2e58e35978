#include "mmcc/problem.hpp"

#include <stdexcept>

namespace mmcc {

void ProblemDefinition::validate() const {
    if (n_s <= 0 || n_c <= 0 || n_c0 <= 0 || n_z < 0)
        throw std::invalid_argument(name + ": bad dimensions");
    if (horizon < 1) throw std::invalid_argument(name + ": horizon must be >= 1");
    if (static_cast<int>(s0.size()) != n_s)
        throw std::invalid_argument(name + ": s0 dimension mismatch");
    for (int i : obs)
        if (i < 0 || i >= n_s)
            throw std::invalid_argument(name + ": obs index out of range");
    if (!obs_scale.empty() && obs_scale.size() != obs.size())
        throw std::invalid_argument(name + ": obs_scale length != obs length");
    if (!transition) throw std::invalid_argument(name + ": missing transition");
    if (!step_utility && !general_utility)
        throw std::invalid_argument(name + ": missing utility");
    if (step_utility && general_utility)
        throw std::invalid_argument(name + ": utility must be either time-separable or general");
    if (n_z > 0 && !sample_shock)
        throw std::invalid_argument(name + ": missing shock sampler");
    head.validate(n_c, n_s);
}

} // namespace mmcc
