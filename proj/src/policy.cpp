#include "mmcc/policy.hpp"

#include "mmcc/serialize.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mmcc {

std::size_t PolicyStack::period_param_count(int t) const {
    if (t == 0) return c0_raw.size();
    if (t < 1 || t > static_cast<int>(nets.size()))
        throw std::out_of_range("PolicyStack: period " + std::to_string(t) + " out of range");
    return nets[static_cast<std::size_t>(t - 1)].net.param_count();
}

std::vector<double> PolicyStack::clone_period(int t) const {
    std::vector<double> out(period_param_count(t));
    if (t == 0)
        std::copy(c0_raw.begin(), c0_raw.end(), out.begin());
    else
        nets[static_cast<std::size_t>(t - 1)].net.flatten(out);
    return out;
}

void PolicyStack::restore_period(int t, std::span<const double> params) {
    if (params.size() != period_param_count(t))
        throw std::invalid_argument("PolicyStack: restore vector length mismatch for period " +
                                    std::to_string(t));
    if (t == 0)
        std::copy(params.begin(), params.end(), c0_raw.begin());
    else
        nets[static_cast<std::size_t>(t - 1)].net.unflatten(params);
}

std::uint64_t PolicyStack::fingerprint() const {
    std::uint64_t h = rng::mix(c0_raw.size());
    auto feed = [&h](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        h = rng::mix(h ^ bits);
    };
    for (double x : c0_raw) feed(x);
    for (const auto& pn : nets)
        for (const auto& l : pn.net.layers) {
            for (double x : l.weight.values) feed(x);
            for (double x : l.bias.values) feed(x);
        }
    return h;
}

PolicyStack make_stack(const ProblemDefinition& problem, const std::vector<int>& hidden,
                       std::uint64_t seed) {
    PolicyStack stack;
    stack.c0_raw.assign(static_cast<std::size_t>(problem.n_c0), 0.0);
    {
        auto s = rng::Stream::keyed(seed, rng::kInit, 0);
        for (double& x : stack.c0_raw) x = 0.1 * (2.0 * s.next_uniform() - 1.0);
    }
    int n_in = static_cast<int>(problem.obs.size());
    for (int t = 1; t < problem.horizon; ++t) {
        std::vector<int> widths;
        widths.push_back(n_in);
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(problem.n_c);
        auto s = rng::Stream::keyed(seed, rng::kInit, t);
        stack.nets.push_back(
            {t, nn::Mlp::make(widths, nn::Activation::Relu, nn::Activation::Identity, s)});
    }
    return stack;
}

BoundStack bind_stack(ad::Tape& tape, const ProblemDefinition& problem,
                      const PolicyStack& stack, int train_period) {
    if (stack.horizon() != problem.horizon)
        throw std::invalid_argument("bind_stack: stack horizon != problem horizon");
    BoundStack b;
    b.problem = &problem;
    b.stack = &stack;
    b.train_period = train_period;
    b.c0 = train_period == 0
               ? tape.leaf(stack.c0_raw, static_cast<int>(stack.c0_raw.size()))
               : tape.constant(stack.c0_raw, static_cast<int>(stack.c0_raw.size()));
    for (const auto& pn : stack.nets)
        b.nets.push_back(nn::bind(tape, pn.net, pn.period == train_period));
    return b;
}

ad::V policy_control(ad::Tape& tape, const BoundStack& bound, int t, ad::V state) {
    const ProblemDefinition& p = *bound.problem;
    if (t < 0 || t >= p.horizon)
        throw std::out_of_range("policy_control: period " + std::to_string(t) + " out of range");
    if (t == 0)
        return p.head_applies_to_c0 ? p.head.apply(tape, bound.c0, state) : bound.c0;
    ad::V input = tape.gather(state, p.obs);
    if (!p.obs_scale.empty())
        input = tape.mul(input, tape.constant(p.obs_scale, static_cast<int>(p.obs_scale.size())));
    const auto& pn = bound.stack->nets[static_cast<std::size_t>(t - 1)];
    ad::V raw = nn::apply(tape, pn.net, bound.nets[static_cast<std::size_t>(t - 1)], input);
    return p.head.apply(tape, raw, state);
}

void collect_period_grads(const ad::Tape& tape, const BoundStack& bound, std::span<double> out) {
    if (bound.train_period < 0)
        throw std::logic_error("collect_period_grads: no trained period bound");
    if (bound.train_period == 0) {
        auto g = tape.grad(bound.c0);
        if (g.size() != out.size()) throw std::invalid_argument("collect_period_grads: size mismatch");
        std::copy(g.begin(), g.end(), out.begin());
        return;
    }
    nn::collect_grads(tape, bound.nets[static_cast<std::size_t>(bound.train_period - 1)], out);
}

std::vector<double> evaluate_policy(const ProblemDefinition& problem, const PolicyStack& stack,
                                    int t, std::span<const double> state) {
    ad::Tape tape;
    BoundStack b = bind_stack(tape, problem, stack, -1);
    ad::V s = tape.constant(state, problem.n_s);
    ad::V c = policy_control(tape, b, t, s);
    auto v = tape.value(c);
    return {v.begin(), v.end()};
}

void save_stack(std::ostream& os, const PolicyStack& stack) {
    auto put_u32 = [&os](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        os.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<std::uint32_t>(stack.c0_raw.size()));
    os.write(reinterpret_cast<const char*>(stack.c0_raw.data()),
             static_cast<std::streamsize>(stack.c0_raw.size() * sizeof(double)));
    put_u32(static_cast<std::uint32_t>(stack.nets.size()));
    for (const auto& pn : stack.nets) nn::save_network(os, pn.net);
}

PolicyStack load_stack(std::istream& is) {
    auto get_u32 = [&is]() {
        unsigned char b[4];
        is.read(reinterpret_cast<char*>(b), 4);
        if (!is) throw std::runtime_error("stack checkpoint: truncated");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    PolicyStack stack;
    std::uint32_t nc0 = get_u32();
    stack.c0_raw.resize(nc0);
    is.read(reinterpret_cast<char*>(stack.c0_raw.data()),
            static_cast<std::streamsize>(nc0 * sizeof(double)));
    if (!is) throw std::runtime_error("stack checkpoint: truncated c0");
    std::uint32_t count = get_u32();
    for (std::uint32_t i = 0; i < count; ++i)
        stack.nets.push_back({static_cast<int>(i) + 1, nn::load_network(is)});
    return stack;
}

} // namespace mmcc
