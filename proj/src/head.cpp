#include "mmcc/head.hpp"

#include <stdexcept>

namespace mmcc {

HeadSpec HeadSpec::sigmoid_box(std::vector<double> lo, std::vector<double> hi) {
    HeadSpec h;
    h.kind = Kind::SigmoidBox;
    h.lo = std::move(lo);
    h.hi = std::move(hi);
    if (h.lo.size() != h.hi.size())
        throw std::invalid_argument("head: lo/hi length mismatch");
    for (std::size_t i = 0; i < h.lo.size(); ++i)
        if (!(h.lo[i] < h.hi[i]))
            throw std::invalid_argument("head: box bounds must satisfy lo < hi");
    return h;
}

HeadSpec HeadSpec::grouped_softmax(std::vector<std::vector<int>> groups,
                                   std::vector<GroupScale> scales) {
    HeadSpec h;
    h.kind = Kind::GroupedSoftmax;
    h.groups = std::move(groups);
    h.scales = std::move(scales);
    if (h.groups.size() != h.scales.size())
        throw std::invalid_argument("head: one scale per group required");
    for (const auto& g : h.groups)
        if (g.empty()) throw std::invalid_argument("head: empty group");
    for (const auto& s : h.scales)
        if (!s.from_state && !(s.value > 0.0))
            throw std::invalid_argument("head: group scales must be positive");
    return h;
}

void HeadSpec::validate(int n_c, int n_s) const {
    switch (kind) {
    case Kind::Unconstrained:
        return;
    case Kind::SigmoidBox:
        if (static_cast<int>(lo.size()) != n_c)
            throw std::invalid_argument("head: box dimension != control dimension");
        return;
    case Kind::GroupedSoftmax: {
        std::vector<char> seen(static_cast<std::size_t>(n_c), 0);
        for (const auto& g : groups)
            for (int i : g) {
                if (i < 0 || i >= n_c || seen[static_cast<std::size_t>(i)])
                    throw std::invalid_argument("head: groups must partition control indices");
                seen[static_cast<std::size_t>(i)] = 1;
            }
        for (char c : seen)
            if (!c) throw std::invalid_argument("head: groups must cover control indices");
        for (const auto& s : scales)
            if (s.from_state && (s.state_index < 0 || s.state_index >= n_s))
                throw std::invalid_argument("head: scale state index out of range");
        return;
    }
    }
}

ad::V HeadSpec::apply(ad::Tape& tape, ad::V raw, ad::V state) const {
    switch (kind) {
    case Kind::Unconstrained:
        return raw;
    case Kind::SigmoidBox: {
        // lo + (hi - lo) * sigmoid(raw), coordinate-wise
        ad::V s = tape.sigmoid(raw);
        std::vector<double> span(lo.size()), base = lo;
        for (std::size_t i = 0; i < lo.size(); ++i) span[i] = hi[i] - lo[i];
        ad::V spanned = tape.mul(s, tape.constant(span, static_cast<int>(span.size())));
        return tape.add(spanned, tape.constant(base, static_cast<int>(base.size())));
    }
    case Kind::GroupedSoftmax: {
        std::vector<ad::V> scale_nodes;
        scale_nodes.reserve(scales.size());
        for (const auto& s : scales) {
            if (s.from_state) {
                int idx = s.state_index;
                scale_nodes.push_back(tape.gather(state, {&idx, 1}));
            } else {
                scale_nodes.push_back(tape.scalar(s.value));
            }
        }
        ad::V sc = tape.concat(scale_nodes);
        return tape.grouped_softmax(raw, sc, groups);
    }
    }
    throw std::logic_error("head: unknown kind");
}

} // namespace mmcc
