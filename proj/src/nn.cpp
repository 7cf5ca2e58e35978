#include "mmcc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mmcc::nn {

Mlp Mlp::make(const std::vector<int>& widths, Activation hidden_act,
              Activation out_act, rng::Stream& stream) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least in/out widths");
    Mlp net;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        int fan_in = widths[i];
        int fan_out = widths[i + 1];
        DenseLayer layer;
        layer.weight = Tensor::zeros({static_cast<std::size_t>(fan_out),
                                      static_cast<std::size_t>(fan_in)});
        layer.bias = Tensor::zeros({static_cast<std::size_t>(fan_out)});
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : layer.weight.values)
            w = (2.0 * stream.next_uniform() - 1.0) * bound;
        layer.act = (i + 2 == widths.size()) ? out_act : hidden_act;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

void Mlp::flatten(std::span<double> out) const {
    if (out.size() != param_count()) throw std::invalid_argument("Mlp::flatten: size mismatch");
    double* p = out.data();
    for (const auto& l : layers) {
        std::copy(l.weight.values.begin(), l.weight.values.end(), p);
        p += l.weight.size();
        std::copy(l.bias.values.begin(), l.bias.values.end(), p);
        p += l.bias.size();
    }
}

void Mlp::unflatten(std::span<const double> in) {
    if (in.size() != param_count()) throw std::invalid_argument("Mlp::unflatten: size mismatch");
    const double* p = in.data();
    for (auto& l : layers) {
        std::copy(p, p + l.weight.size(), l.weight.values.begin());
        p += l.weight.size();
        std::copy(p, p + l.bias.size(), l.bias.values.begin());
        p += l.bias.size();
    }
}

BoundMlp bind(ad::Tape& tape, const Mlp& net, bool trainable) {
    BoundMlp b;
    for (const auto& l : net.layers) {
        int rows = l.out();
        int cols = l.in();
        if (trainable) {
            b.weights.push_back(tape.leaf(l.weight.values, rows, cols));
            b.biases.push_back(tape.leaf(l.bias.values, rows, 1));
        } else {
            b.weights.push_back(tape.constant(l.weight.values, rows, cols));
            b.biases.push_back(tape.constant(l.bias.values, rows, 1));
        }
    }
    return b;
}

ad::V apply(ad::Tape& tape, const Mlp& net, const BoundMlp& bound, ad::V x) {
    ad::V h = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        h = tape.add(tape.matvec(bound.weights[i], h), bound.biases[i]);
        switch (net.layers[i].act) {
        case Activation::Identity:
            break;
        case Activation::Relu:
            h = tape.relu(h);
            break;
        case Activation::Sigmoid:
            h = tape.sigmoid(h);
            break;
        case Activation::GroupedSoftmax:
            throw std::invalid_argument("Mlp: grouped-softmax is applied by the output head, not inside the network");
        }
    }
    return h;
}

void collect_grads(const ad::Tape& tape, const BoundMlp& bound, std::span<double> out) {
    double* p = out.data();
    std::size_t left = out.size();
    for (std::size_t i = 0; i < bound.weights.size(); ++i) {
        for (ad::V v : {bound.weights[i], bound.biases[i]}) {
            auto g = tape.grad(v);
            if (g.size() > left) throw std::invalid_argument("collect_grads: size mismatch");
            std::copy(g.begin(), g.end(), p);
            p += g.size();
            left -= g.size();
        }
    }
    if (left != 0) throw std::invalid_argument("collect_grads: size mismatch");
}

} // namespace mmcc::nn
