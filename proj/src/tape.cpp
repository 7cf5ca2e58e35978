#include "mmcc/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmcc::ad {

namespace {
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;
using CMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
} // namespace

void Tape::fail(const std::string& msg) const {
    throw std::invalid_argument("tape: " + msg + " (node " + std::to_string(nodes_.size()) + ")");
}

void Tape::check(V v, const char* who) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        fail(std::string(who) + ": invalid input node");
}

void Tape::reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    idata_.clear();
    backward_run_ = false;
}

V Tape::push(Node n, int out_len) {
    n.off = vals_.size();
    vals_.resize(vals_.size() + static_cast<std::size_t>(out_len));
    nodes_.push_back(n);
    return V{static_cast<int>(nodes_.size()) - 1};
}

double* Tape::val_ptr(int id) { return vals_.data() + nodes_[static_cast<std::size_t>(id)].off; }
const double* Tape::val_ptr(int id) const { return vals_.data() + nodes_[static_cast<std::size_t>(id)].off; }
double* Tape::grad_ptr(int id) { return grads_.data() + nodes_[static_cast<std::size_t>(id)].off; }

int Tape::node_len(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.rows * n.cols;
}

int Tape::len(V v) const {
    check(v, "len");
    return node_len(v.id);
}

std::span<const double> Tape::value(V v) const {
    check(v, "value");
    return {val_ptr(v.id), static_cast<std::size_t>(node_len(v.id))};
}

double Tape::scalar_value(V v) const {
    check(v, "scalar_value");
    if (node_len(v.id) != 1) fail("scalar_value: node is not scalar");
    return *val_ptr(v.id);
}

std::span<const double> Tape::grad(V v) const {
    check(v, "grad");
    if (!backward_run_) fail("grad: backward has not been run");
    return {grads_.data() + nodes_[static_cast<std::size_t>(v.id)].off,
            static_cast<std::size_t>(node_len(v.id))};
}

V Tape::leaf(std::span<const double> vals, int rows, int cols) {
    if (static_cast<int>(vals.size()) != rows * cols) fail("leaf: size mismatch");
    Node n{Op::Leaf};
    n.rows = rows;
    n.cols = cols;
    n.rg = true;
    V v = push(n, rows * cols);
    std::copy(vals.begin(), vals.end(), val_ptr(v.id));
    return v;
}

V Tape::constant(std::span<const double> vals, int rows, int cols) {
    if (static_cast<int>(vals.size()) != rows * cols) fail("constant: size mismatch");
    Node n{Op::Const};
    n.rows = rows;
    n.cols = cols;
    V v = push(n, rows * cols);
    std::copy(vals.begin(), vals.end(), val_ptr(v.id));
    return v;
}

V Tape::scalar(double x) { return constant({&x, 1}, 1, 1); }

V Tape::matvec(V w, V x) {
    check(w, "matvec");
    check(x, "matvec");
    // push() may reallocate nodes_, so copy dimensions out first.
    const int wrows = nodes_[static_cast<std::size_t>(w.id)].rows;
    const int wcols = nodes_[static_cast<std::size_t>(w.id)].cols;
    const Node& nx = nodes_[static_cast<std::size_t>(x.id)];
    if (nx.cols != 1) fail("matvec: x must be a vector");
    if (wcols != nx.rows) fail("matvec: dimension mismatch");
    Node n{Op::MatVec, w.id, x.id};
    n.rows = wrows;
    n.rg = nodes_[static_cast<std::size_t>(w.id)].rg || nx.rg;
    V v = push(n, n.rows);
    CMatMap wm(val_ptr(w.id), wrows, wcols);
    CVecMap xm(val_ptr(x.id), wcols);
    VecMap(val_ptr(v.id), n.rows).noalias() = wm * xm;
    return v;
}

#define MMCC_BINOP(NAME, OPK, EXPR)                                              \
    V Tape::NAME(V a, V b) {                                                     \
        check(a, #NAME);                                                         \
        check(b, #NAME);                                                         \
        int la = node_len(a.id), lb = node_len(b.id);                            \
        if (la != lb) fail(#NAME ": length mismatch");                           \
        Node n{OPK, a.id, b.id};                                                 \
        n.rows = la;                                                             \
        n.rg = nodes_[(std::size_t)a.id].rg || nodes_[(std::size_t)b.id].rg;     \
        V v = push(n, la);                                                       \
        const double* pa = val_ptr(a.id);                                        \
        const double* pb = val_ptr(b.id);                                        \
        double* po = val_ptr(v.id);                                              \
        for (int i = 0; i < la; ++i) po[i] = (EXPR);                             \
        return v;                                                                \
    }

MMCC_BINOP(add, Op::Add, pa[i] + pb[i])
MMCC_BINOP(sub, Op::Sub, pa[i] - pb[i])
MMCC_BINOP(mul, Op::Mul, pa[i] * pb[i])
MMCC_BINOP(div, Op::Div, pa[i] / pb[i])
#undef MMCC_BINOP

#define MMCC_UNOP(NAME, OPK, EXPR)                                               \
    V Tape::NAME(V a) {                                                          \
        check(a, #NAME);                                                         \
        int la = node_len(a.id);                                                 \
        Node n{OPK, a.id};                                                       \
        n.rows = la;                                                             \
        n.rg = nodes_[(std::size_t)a.id].rg;                                     \
        V v = push(n, la);                                                       \
        const double* pa = val_ptr(a.id);                                        \
        double* po = val_ptr(v.id);                                              \
        for (int i = 0; i < la; ++i) po[i] = (EXPR);                             \
        return v;                                                                \
    }

MMCC_UNOP(neg, Op::Neg, -pa[i])
MMCC_UNOP(relu, Op::Relu, pa[i] > 0.0 ? pa[i] : 0.0)
MMCC_UNOP(sigmoid, Op::Sigmoid, 1.0 / (1.0 + std::exp(-pa[i])))
MMCC_UNOP(exp_, Op::Exp, std::exp(pa[i]))
MMCC_UNOP(log_, Op::Log, std::log(pa[i]))
MMCC_UNOP(sqrt_, Op::Sqrt, std::sqrt(pa[i]))
MMCC_UNOP(square, Op::Square, pa[i] * pa[i])
#undef MMCC_UNOP

V Tape::powc(V a, double p) {
    check(a, "powc");
    int la = node_len(a.id);
    Node n{Op::PowC, a.id};
    n.rows = la;
    n.c = p;
    n.rg = nodes_[static_cast<std::size_t>(a.id)].rg;
    V v = push(n, la);
    const double* pa = val_ptr(a.id);
    double* po = val_ptr(v.id);
    for (int i = 0; i < la; ++i) po[i] = std::pow(pa[i], p);
    return v;
}

V Tape::scale(V a, double c) {
    check(a, "scale");
    int la = node_len(a.id);
    Node n{Op::Scale, a.id};
    n.rows = la;
    n.c = c;
    n.rg = nodes_[static_cast<std::size_t>(a.id)].rg;
    V v = push(n, la);
    const double* pa = val_ptr(a.id);
    double* po = val_ptr(v.id);
    for (int i = 0; i < la; ++i) po[i] = c * pa[i];
    return v;
}

V Tape::shift(V a, double c) {
    check(a, "shift");
    int la = node_len(a.id);
    Node n{Op::Shift, a.id};
    n.rows = la;
    n.c = c;
    n.rg = nodes_[static_cast<std::size_t>(a.id)].rg;
    V v = push(n, la);
    const double* pa = val_ptr(a.id);
    double* po = val_ptr(v.id);
    for (int i = 0; i < la; ++i) po[i] = pa[i] + c;
    return v;
}

V Tape::bmul(V s, V x) {
    check(s, "bmul");
    check(x, "bmul");
    if (node_len(s.id) != 1) fail("bmul: first operand must be scalar");
    int lx = node_len(x.id);
    Node n{Op::BMul, s.id, x.id};
    n.rows = lx;
    n.rg = nodes_[static_cast<std::size_t>(s.id)].rg || nodes_[static_cast<std::size_t>(x.id)].rg;
    V v = push(n, lx);
    double sv = *val_ptr(s.id);
    const double* px = val_ptr(x.id);
    double* po = val_ptr(v.id);
    for (int i = 0; i < lx; ++i) po[i] = sv * px[i];
    return v;
}

V Tape::sum(V a) {
    check(a, "sum");
    int la = node_len(a.id);
    Node n{Op::Sum, a.id};
    n.rows = 1;
    n.rg = nodes_[static_cast<std::size_t>(a.id)].rg;
    V v = push(n, 1);
    const double* pa = val_ptr(a.id);
    double acc = 0.0;
    for (int i = 0; i < la; ++i) acc += pa[i];
    *val_ptr(v.id) = acc;
    return v;
}

V Tape::dot(V a, V b) {
    check(a, "dot");
    check(b, "dot");
    int la = node_len(a.id);
    if (la != node_len(b.id)) fail("dot: length mismatch");
    Node n{Op::Dot, a.id, b.id};
    n.rows = 1;
    n.rg = nodes_[static_cast<std::size_t>(a.id)].rg || nodes_[static_cast<std::size_t>(b.id)].rg;
    V v = push(n, 1);
    const double* pa = val_ptr(a.id);
    const double* pb = val_ptr(b.id);
    double acc = 0.0;
    for (int i = 0; i < la; ++i) acc += pa[i] * pb[i];
    *val_ptr(v.id) = acc;
    return v;
}

V Tape::gather(V a, std::span<const int> idx) {
    check(a, "gather");
    int la = node_len(a.id);
    for (int i : idx)
        if (i < 0 || i >= la) fail("gather: index out of range");
    Node n{Op::Gather, a.id};
    n.rows = static_cast<int>(idx.size());
    n.aux = static_cast<int>(idata_.size());
    n.aux_len = n.rows;
    n.rg = nodes_[static_cast<std::size_t>(a.id)].rg;
    idata_.insert(idata_.end(), idx.begin(), idx.end());
    V v = push(n, n.rows);
    const double* pa = val_ptr(a.id);
    double* po = val_ptr(v.id);
    for (int i = 0; i < n.rows; ++i) po[i] = pa[idx[static_cast<std::size_t>(i)]];
    return v;
}

V Tape::concat(std::span<const V> parts) {
    if (parts.empty()) fail("concat: empty input list");
    int total = 0;
    bool rg = false;
    for (V p : parts) {
        check(p, "concat");
        total += node_len(p.id);
        rg = rg || nodes_[static_cast<std::size_t>(p.id)].rg;
    }
    Node n{Op::Concat};
    n.rows = total;
    n.aux = static_cast<int>(idata_.size());
    n.aux_len = static_cast<int>(parts.size());
    n.rg = rg;
    for (V p : parts) idata_.push_back(p.id);
    V v = push(n, total);
    double* po = val_ptr(v.id);
    for (V p : parts) {
        int lp = node_len(p.id);
        const double* pp = val_ptr(p.id);
        std::copy(pp, pp + lp, po);
        po += lp;
    }
    return v;
}

V Tape::grouped_softmax(V raw, V scales, const std::vector<std::vector<int>>& groups) {
    check(raw, "grouped_softmax");
    check(scales, "grouped_softmax");
    int lr = node_len(raw.id);
    if (static_cast<int>(groups.size()) != node_len(scales.id))
        fail("grouped_softmax: one scale per group required");
    std::vector<char> seen(static_cast<std::size_t>(lr), 0);
    for (const auto& g : groups) {
        if (g.empty()) fail("grouped_softmax: empty group");
        for (int i : g) {
            if (i < 0 || i >= lr || seen[static_cast<std::size_t>(i)])
                fail("grouped_softmax: groups must partition the output indices");
            seen[static_cast<std::size_t>(i)] = 1;
        }
    }
    for (char s : seen)
        if (!s) fail("grouped_softmax: groups must cover all output indices");

    Node n{Op::GroupedSoftmax, raw.id, scales.id};
    n.rows = lr;
    n.aux = static_cast<int>(idata_.size());
    n.aux_len = static_cast<int>(groups.size());
    n.rg = nodes_[static_cast<std::size_t>(raw.id)].rg || nodes_[static_cast<std::size_t>(scales.id)].rg;
    idata_.push_back(static_cast<int>(groups.size()));
    for (const auto& g : groups) {
        idata_.push_back(static_cast<int>(g.size()));
        idata_.insert(idata_.end(), g.begin(), g.end());
    }
    V v = push(n, lr);
    const double* pr = val_ptr(raw.id);
    const double* ps = val_ptr(scales.id);
    double* po = val_ptr(v.id);
    const int* gd = idata_.data() + nodes_[static_cast<std::size_t>(v.id)].aux;
    int ng = *gd++;
    for (int g = 0; g < ng; ++g) {
        int gl = *gd++;
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < gl; ++i) mx = std::max(mx, pr[gd[i]]);
        double z = 0.0;
        for (int i = 0; i < gl; ++i) z += std::exp(pr[gd[i]] - mx);
        for (int i = 0; i < gl; ++i) po[gd[i]] = std::exp(pr[gd[i]] - mx) / z * ps[g];
        gd += gl;
    }
    return v;
}

void Tape::backward(V seed) {
    double one = 1.0;
    backward(seed, {&one, 1});
}

void Tape::backward(V seed, std::span<const double> seed_adjoint) {
    check(seed, "backward");
    if (nodes_.empty()) fail("backward: empty tape (no forward pass recorded)");
    if (static_cast<int>(seed_adjoint.size()) != node_len(seed.id))
        fail("backward: seed adjoint shape mismatch");

    grads_.assign(vals_.size(), 0.0);
    std::copy(seed_adjoint.begin(), seed_adjoint.end(), grad_ptr(seed.id));

    for (int id = seed.id; id >= 0; --id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.rg) continue;
        const double* g = grad_ptr(id);
        int l = n.rows * n.cols;
        switch (n.op) {
        case Op::Leaf:
        case Op::Const:
            break;
        case Op::Add: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (int i = 0; i < l; ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
            break;
        }
        case Op::Sub: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (int i = 0; i < l; ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
            break;
        }
        case Op::Mul: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            const double* pa = val_ptr(n.a);
            const double* pb = val_ptr(n.b);
            for (int i = 0; i < l; ++i) {
                ga[i] += g[i] * pb[i];
                gb[i] += g[i] * pa[i];
            }
            break;
        }
        case Op::Div: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            const double* pa = val_ptr(n.a);
            const double* pb = val_ptr(n.b);
            for (int i = 0; i < l; ++i) {
                ga[i] += g[i] / pb[i];
                gb[i] -= g[i] * pa[i] / (pb[i] * pb[i]);
            }
            break;
        }
        case Op::Neg: {
            double* ga = grad_ptr(n.a);
            for (int i = 0; i < l; ++i) ga[i] -= g[i];
            break;
        }
        case Op::MatVec: {
            const Node& nw = nodes_[static_cast<std::size_t>(n.a)];
            CMatMap wm(val_ptr(n.a), nw.rows, nw.cols);
            CVecMap xm(val_ptr(n.b), nw.cols);
            CVecMap gm(g, nw.rows);
            if (nodes_[static_cast<std::size_t>(n.a)].rg) {
                Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                    gw(grad_ptr(n.a), nw.rows, nw.cols);
                gw.noalias() += gm * xm.transpose();
            }
            if (nodes_[static_cast<std::size_t>(n.b)].rg) {
                VecMap gx(grad_ptr(n.b), nw.cols);
                gx.noalias() += wm.transpose() * gm;
            }
            break;
        }
        case Op::Relu: {
            // subgradient 0 at exactly 0
            double* ga = grad_ptr(n.a);
            const double* pa = val_ptr(n.a);
            for (int i = 0; i < l; ++i)
                if (pa[i] > 0.0) ga[i] += g[i];
            break;
        }
        case Op::Sigmoid: {
            double* ga = grad_ptr(n.a);
            const double* po = val_ptr(id);
            for (int i = 0; i < l; ++i) ga[i] += g[i] * po[i] * (1.0 - po[i]);
            break;
        }
        case Op::Exp: {
            double* ga = grad_ptr(n.a);
            const double* po = val_ptr(id);
            for (int i = 0; i < l; ++i) ga[i] += g[i] * po[i];
            break;
        }
        case Op::Log: {
            double* ga = grad_ptr(n.a);
            const double* pa = val_ptr(n.a);
            for (int i = 0; i < l; ++i) ga[i] += g[i] / pa[i];
            break;
        }
        case Op::Sqrt: {
            double* ga = grad_ptr(n.a);
            const double* po = val_ptr(id);
            for (int i = 0; i < l; ++i) ga[i] += g[i] * 0.5 / po[i];
            break;
        }
        case Op::Square: {
            double* ga = grad_ptr(n.a);
            const double* pa = val_ptr(n.a);
            for (int i = 0; i < l; ++i) ga[i] += g[i] * 2.0 * pa[i];
            break;
        }
        case Op::PowC: {
            double* ga = grad_ptr(n.a);
            const double* pa = val_ptr(n.a);
            for (int i = 0; i < l; ++i)
                ga[i] += g[i] * n.c * std::pow(pa[i], n.c - 1.0);
            break;
        }
        case Op::Scale: {
            double* ga = grad_ptr(n.a);
            for (int i = 0; i < l; ++i) ga[i] += g[i] * n.c;
            break;
        }
        case Op::Shift: {
            double* ga = grad_ptr(n.a);
            for (int i = 0; i < l; ++i) ga[i] += g[i];
            break;
        }
        case Op::BMul: {
            const double* px = val_ptr(n.b);
            double sv = *val_ptr(n.a);
            if (nodes_[static_cast<std::size_t>(n.a)].rg) {
                double acc = 0.0;
                for (int i = 0; i < l; ++i) acc += g[i] * px[i];
                *grad_ptr(n.a) += acc;
            }
            if (nodes_[static_cast<std::size_t>(n.b)].rg) {
                double* gx = grad_ptr(n.b);
                for (int i = 0; i < l; ++i) gx[i] += g[i] * sv;
            }
            break;
        }
        case Op::Sum: {
            double* ga = grad_ptr(n.a);
            int la = node_len(n.a);
            for (int i = 0; i < la; ++i) ga[i] += g[0];
            break;
        }
        case Op::Dot: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            const double* pa = val_ptr(n.a);
            const double* pb = val_ptr(n.b);
            int la = node_len(n.a);
            for (int i = 0; i < la; ++i) {
                ga[i] += g[0] * pb[i];
                gb[i] += g[0] * pa[i];
            }
            break;
        }
        case Op::Gather: {
            double* ga = grad_ptr(n.a);
            const int* idx = idata_.data() + n.aux;
            for (int i = 0; i < l; ++i) ga[idx[i]] += g[i];
            break;
        }
        case Op::Concat: {
            const int* ids = idata_.data() + n.aux;
            int off = 0;
            for (int p = 0; p < n.aux_len; ++p) {
                int lp = node_len(ids[p]);
                if (nodes_[static_cast<std::size_t>(ids[p])].rg) {
                    double* gp = grad_ptr(ids[p]);
                    for (int i = 0; i < lp; ++i) gp[i] += g[off + i];
                }
                off += lp;
            }
            break;
        }
        case Op::GroupedSoftmax: {
            const double* po = val_ptr(id);
            const double* ps = val_ptr(n.b);
            double* gr = grad_ptr(n.a);
            double* gs = grad_ptr(n.b);
            bool rg_raw = nodes_[static_cast<std::size_t>(n.a)].rg;
            bool rg_scl = nodes_[static_cast<std::size_t>(n.b)].rg;
            const int* gd = idata_.data() + n.aux;
            int ng = *gd++;
            for (int gi = 0; gi < ng; ++gi) {
                int gl = *gd++;
                double s = ps[gi];
                // p_i recovered from output; dot = sum_i gbar_i p_i
                double dotv = 0.0;
                for (int i = 0; i < gl; ++i) dotv += g[gd[i]] * (po[gd[i]] / s);
                if (rg_raw)
                    for (int i = 0; i < gl; ++i) {
                        double p = po[gd[i]] / s;
                        gr[gd[i]] += s * p * (g[gd[i]] - dotv);
                    }
                if (rg_scl) gs[gi] += dotv;
                gd += gl;
            }
            break;
        }
        }
    }
    backward_run_ = true;
}

} // namespace mmcc::ad
