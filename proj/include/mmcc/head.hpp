#pragma once

#include "mmcc/tape.hpp"

#include <vector>

namespace mmcc {

// Output head mapping raw network outputs (and, for state-dependent
// scales, the current state) into the feasible control set. Box bounds
// land in the strict interior; softmax group sums hit their scales
// exactly, which is what enforces resource identities.
struct HeadSpec {
    enum class Kind { Unconstrained, SigmoidBox, GroupedSoftmax };

    struct GroupScale {
        bool from_state = false;
        int state_index = -1; // used when from_state
        double value = 1.0;   // used otherwise
    };

    Kind kind = Kind::Unconstrained;
    std::vector<double> lo, hi;                // SigmoidBox, per coordinate
    std::vector<std::vector<int>> groups;      // GroupedSoftmax
    std::vector<GroupScale> scales;            // one per group

    static HeadSpec unconstrained() { return {}; }
    static HeadSpec sigmoid_box(std::vector<double> lo, std::vector<double> hi);
    static HeadSpec grouped_softmax(std::vector<std::vector<int>> groups,
                                    std::vector<GroupScale> scales);

    ad::V apply(ad::Tape& tape, ad::V raw, ad::V state) const;
    void validate(int n_c, int n_s) const; // throws on inconsistency
};

} // namespace mmcc
