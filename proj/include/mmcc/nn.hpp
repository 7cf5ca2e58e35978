#pragma once

#include "mmcc/rng.hpp"
#include "mmcc/tape.hpp"
#include "mmcc/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mmcc::nn {

enum class Activation : std::uint8_t {
    Identity = 0,
    Relu = 1,
    Sigmoid = 2,
    GroupedSoftmax = 3, // reserved for head specs; not applied inside Mlp
};

struct DenseLayer {
    Tensor weight; // out x in, row-major
    Tensor bias;   // out
    Activation act = Activation::Identity;

    int in() const { return static_cast<int>(weight.cols()); }
    int out() const { return static_cast<int>(weight.rows()); }
};

struct Mlp {
    std::vector<DenseLayer> layers;

    // widths = {in, h1, ..., out}; hidden layers get `hidden_act`, the last
    // layer `out_act`. Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases 0.
    static Mlp make(const std::vector<int>& widths, Activation hidden_act,
                    Activation out_act, rng::Stream& stream);

    int input_dim() const { return layers.empty() ? 0 : layers.front().in(); }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out(); }
    std::size_t param_count() const;

    void flatten(std::span<double> out) const;
    void unflatten(std::span<const double> in);
};

// Per-tape binding of an Mlp's parameters (leaf when trainable, const
// otherwise). Bind once per tape and share across all paths recorded on it.
struct BoundMlp {
    std::vector<ad::V> weights;
    std::vector<ad::V> biases;
};

BoundMlp bind(ad::Tape& tape, const Mlp& net, bool trainable);
ad::V apply(ad::Tape& tape, const Mlp& net, const BoundMlp& bound, ad::V x);

// Collects bound parameter grads in flatten() order.
void collect_grads(const ad::Tape& tape, const BoundMlp& bound, std::span<double> out);

} // namespace mmcc::nn
