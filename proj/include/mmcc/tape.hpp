#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mmcc::ad {

enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    MatVec,
    Relu,
    Sigmoid,
    Exp,
    Log,
    Sqrt,
    Square,
    PowC,  // x^c elementwise, c a compile-time-constant exponent
    Scale, // c * x
    Shift, // x + c
    BMul,  // broadcast: scalar node a times vector node b
    Sum,   // reduce to scalar
    Dot,   // scalar inner product
    Gather,
    Concat,
    GroupedSoftmax, // inputs: raw vector a, per-group scales b
};

// Node handle. Valid only for the tape that produced it, until reset().
struct V {
    int id = -1;
    bool valid() const { return id >= 0; }
};

struct Node {
    Op op;
    int a = -1, b = -1;
    int rows = 0, cols = 1; // cols > 1 only for matrix leaves/constants
    std::size_t off = 0;    // offset into the value/grad arena
    double c = 0.0;
    int aux = -1;      // offset into idata_ (Gather/Concat/GroupedSoftmax)
    int aux_len = 0;
    bool rg = false;   // requires gradient
};

// Reverse-mode tape over vector-valued operations. Forward values are
// computed eagerly at op creation; backward() visits nodes in reverse
// insertion (= topological) order exactly once. Single-writer: one
// forward/backward pair at a time per instance. reset() keeps arena
// capacity so per-minibatch reuse does not reallocate.
class Tape {
public:
    void reset();

    V leaf(std::span<const double> vals, int rows, int cols = 1);
    V constant(std::span<const double> vals, int rows, int cols = 1);
    V scalar(double x);

    V matvec(V w, V x);
    V add(V a, V b);
    V sub(V a, V b);
    V mul(V a, V b);
    V div(V a, V b);
    V neg(V a);
    V relu(V a);
    V sigmoid(V a);
    V exp_(V a);
    V log_(V a);
    V sqrt_(V a);
    V square(V a);
    V powc(V a, double p);
    V scale(V a, double c);
    V shift(V a, double c);
    V bmul(V s, V x);
    V sum(V a);
    V dot(V a, V b);
    V gather(V a, std::span<const int> idx);
    V concat(std::span<const V> parts);
    // Within each group g, output = softmax(raw | g) * scales[g].
    // `scales` is a vector node with one entry per group. Groups must
    // partition 0..len(raw)-1 and be non-empty.
    V grouped_softmax(V raw, V scales, const std::vector<std::vector<int>>& groups);

    // Seeds d(seed)/d(seed) = 1 (seed must be scalar) and accumulates
    // gradients for every node with rg set on some ancestor path.
    void backward(V seed);
    // General form: seed_adjoint must match the node's length.
    void backward(V seed, std::span<const double> seed_adjoint);

    std::span<const double> value(V v) const;
    double scalar_value(V v) const;
    std::span<const double> grad(V v) const;
    int len(V v) const;

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> grads_;
    std::vector<int> idata_;
    bool backward_run_ = false;

    V push(Node n, int out_len);
    double* val_ptr(int id);
    const double* val_ptr(int id) const;
    double* grad_ptr(int id);
    int node_len(int id) const;
    void check(V v, const char* who) const;
    [[noreturn]] void fail(const std::string& msg) const;
};

} // namespace mmcc::ad
