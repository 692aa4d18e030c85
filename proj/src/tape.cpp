#include "iilab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iilab/kernels.hpp"

namespace iilab {

namespace {

// Accumulates into the grad of `id` unless nothing upstream needs it.
void accum(Tape& t, NodeId id, const Tensor& delta) {
    ComputeNode& n = t.node(id);
    if (!n.requires_grad) return;
    for (size_t i = 0; i < delta.count(); ++i) n.grad.data[i] += delta.data[i];
}

}  // namespace

NodeId Tape::leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite()) throw InvalidInput("leaf values must be finite");
    ComputeNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.op = "leaf";
    n.value = std::move(value);
    n.grad = Tensor(n.value.shape);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

NodeId Tape::append(std::string op, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
    bool rg = false;
    for (NodeId id : inputs) rg = rg || node(id).requires_grad;
    ComputeNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.op = std::move(op);
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.grad = Tensor(n.value.shape);
    n.requires_grad = rg;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

const ComputeNode& Tape::node(NodeId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
        throw InvalidInput("node id " + std::to_string(id) + " out of range");
    return nodes_[static_cast<size_t>(id)];
}

ComputeNode& Tape::node(NodeId id) {
    return const_cast<ComputeNode&>(static_cast<const Tape&>(*this).node(id));
}

GradTable Tape::backward(NodeId root) {
    if (backward_done_) throw InvalidInput("backward may only run once per tape");
    ComputeNode& r = node(root);
    if (r.value.count() != 1)
        throw InvalidInput("backward root must be scalar, shape is " + r.value.shape.str());
    backward_done_ = true;
    GradTable table;
    if (!r.requires_grad) return table;
    r.grad.data[0] = 1.0;
    for (NodeId id = root; id >= 0; --id) {
        ComputeNode& n = nodes_[static_cast<size_t>(id)];
        if (n.requires_grad && n.backward) n.backward(*this, n);
    }
    for (const ComputeNode& n : nodes_)
        if (n.requires_grad && n.op == "leaf") table.emplace(n.id, n.grad);
    return table;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Tensor v = kernels::matmul(value(a), value(b));
    return append("matmul", {a, b}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        const Tensor& av = t.value(n.inputs[0]);
        const Tensor& bv = t.value(n.inputs[1]);
        accum(t, n.inputs[0], kernels::matmul_nt(g, bv));
        accum(t, n.inputs[1], kernels::matmul(kernels::transpose(av), g));
    });
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    Tensor v = kernels::matmul_nt(value(a), value(b));
    return append("matmul_nt", {a, b}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        const Tensor& av = t.value(n.inputs[0]);
        const Tensor& bv = t.value(n.inputs[1]);
        accum(t, n.inputs[0], kernels::matmul(g, bv));
        accum(t, n.inputs[1], kernels::matmul(kernels::transpose(g), av));
    });
}

NodeId Tape::add(NodeId a, NodeId b) {
    Tensor v = kernels::add(value(a), value(b));
    return append("add", {a, b}, std::move(v), [](Tape& t, const ComputeNode& n) {
        accum(t, n.inputs[0], n.grad);
        accum(t, n.inputs[1], n.grad);
    });
}

NodeId Tape::sub(NodeId a, NodeId b) {
    Tensor v = kernels::sub(value(a), value(b));
    return append("sub", {a, b}, std::move(v), [](Tape& t, const ComputeNode& n) {
        accum(t, n.inputs[0], n.grad);
        accum(t, n.inputs[1], kernels::scale(n.grad, -1.0));
    });
}

NodeId Tape::mul(NodeId a, NodeId b) {
    Tensor v = kernels::mul(value(a), value(b));
    return append("mul", {a, b}, std::move(v), [](Tape& t, const ComputeNode& n) {
        accum(t, n.inputs[0], kernels::mul(n.grad, t.value(n.inputs[1])));
        accum(t, n.inputs[1], kernels::mul(n.grad, t.value(n.inputs[0])));
    });
}

NodeId Tape::scale(NodeId a, double c) {
    Tensor v = kernels::scale(value(a), c);
    return append("scale", {a}, std::move(v), [c](Tape& t, const ComputeNode& n) {
        accum(t, n.inputs[0], kernels::scale(n.grad, c));
    });
}

NodeId Tape::scale_by(NodeId a, NodeId s) {
    const Tensor& sv = value(s);
    if (sv.count() != 1) throw InvalidInput("scale_by: scale operand must be scalar");
    Tensor v = kernels::scale(value(a), sv.data[0]);
    return append("scale_by", {a, s}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& av = t.value(n.inputs[0]);
        const double s0 = t.value(n.inputs[1]).data[0];
        accum(t, n.inputs[0], kernels::scale(n.grad, s0));
        double ds = 0.0;
        for (size_t i = 0; i < av.count(); ++i) ds += n.grad.data[i] * av.data[i];
        accum(t, n.inputs[1], Tensor::scalar(ds));
    });
}

NodeId Tape::add_rowvec(NodeId x, NodeId b) {
    Tensor v = kernels::add_rowvec(value(x), value(b));
    return append("add_rowvec", {x, b}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        accum(t, n.inputs[0], g);
        Tensor db(t.value(n.inputs[1]).shape);
        for (size_t i = 0; i < g.rows(); ++i)
            for (size_t j = 0; j < g.cols(); ++j) db.data[j] += g.at(i, j);
        accum(t, n.inputs[1], db);
    });
}

NodeId Tape::exp(NodeId x) {
    Tensor v = kernels::exp(value(x));
    return append("exp", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        accum(t, n.inputs[0], kernels::mul(n.grad, n.value));
    });
}

NodeId Tape::log(NodeId x) {
    Tensor v = kernels::log(value(x));
    return append("log", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& xv = t.value(n.inputs[0]);
        Tensor dx(xv.shape);
        for (size_t i = 0; i < dx.count(); ++i) dx.data[i] = n.grad.data[i] / xv.data[i];
        accum(t, n.inputs[0], dx);
    });
}

NodeId Tape::tanh(NodeId x) {
    Tensor v = kernels::tanh(value(x));
    return append("tanh", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        Tensor dx(n.value.shape);
        for (size_t i = 0; i < dx.count(); ++i)
            dx.data[i] = n.grad.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
        accum(t, n.inputs[0], dx);
    });
}

NodeId Tape::transpose(NodeId x) {
    Tensor v = kernels::transpose(value(x));
    return append("transpose", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        accum(t, n.inputs[0], kernels::transpose(n.grad));
    });
}

NodeId Tape::row_l2_normalize(NodeId x) {
    Tensor norms;
    Tensor v = kernels::row_l2_normalize(value(x), &norms);
    return append("row_l2_normalize", {x}, std::move(v),
                  [norms](Tape& t, const ComputeNode& n) {
                      const Tensor& g = n.grad;
                      const Tensor& y = n.value;
                      Tensor dx(y.shape);
                      for (size_t i = 0; i < y.rows(); ++i) {
                          double dot = 0.0;
                          for (size_t j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
                          const double r = norms.data[i];
                          for (size_t j = 0; j < y.cols(); ++j)
                              dx.at(i, j) = (g.at(i, j) - dot * y.at(i, j)) / r;
                      }
                      accum(t, n.inputs[0], dx);
                  });
}

NodeId Tape::row_softmax(NodeId x) {
    Tensor v = kernels::row_softmax(value(x));
    return append("row_softmax", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        const Tensor& p = n.value;
        Tensor dx(p.shape);
        for (size_t i = 0; i < p.rows(); ++i) {
            double dot = 0.0;
            for (size_t j = 0; j < p.cols(); ++j) dot += g.at(i, j) * p.at(i, j);
            for (size_t j = 0; j < p.cols(); ++j)
                dx.at(i, j) = p.at(i, j) * (g.at(i, j) - dot);
        }
        accum(t, n.inputs[0], dx);
    });
}

NodeId Tape::cross_entropy_rows(NodeId logits, const std::vector<size_t>& targets) {
    const Tensor& x = value(logits);
    if (x.rank() != 2) throw InvalidInput("cross_entropy_rows: logits must be rank 2");
    if (targets.size() != x.rows())
        throw InvalidInput("cross_entropy_rows: need one target per row");
    for (size_t t : targets)
        if (t >= x.cols()) throw InvalidInput("cross_entropy_rows: target column out of range");

    const size_t rows = x.rows(), cols = x.cols();
    Tensor p(x.shape);
    double total = 0.0;
    for (size_t i = 0; i < rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < cols; ++j) mx = std::max(mx, x.at(i, j));
        double z = 0.0;
        for (size_t j = 0; j < cols; ++j) z += std::exp(x.at(i, j) - mx);
        const double lse = mx + std::log(z);
        total += lse - x.at(i, targets[i]);
        for (size_t j = 0; j < cols; ++j) p.at(i, j) = std::exp(x.at(i, j) - lse);
    }
    Tensor v = Tensor::scalar(total / static_cast<double>(rows));

    return append("cross_entropy_rows", {logits}, std::move(v),
                  [p, targets](Tape& t, const ComputeNode& n) {
                      const double g0 = n.grad.data[0];
                      const double inv_n = 1.0 / static_cast<double>(p.rows());
                      Tensor dx(p.shape);
                      for (size_t i = 0; i < p.rows(); ++i)
                          for (size_t j = 0; j < p.cols(); ++j) {
                              const double onehot = (j == targets[i]) ? 1.0 : 0.0;
                              dx.at(i, j) = g0 * (p.at(i, j) - onehot) * inv_n;
                          }
                      accum(t, n.inputs[0], dx);
                  });
}

NodeId Tape::seq_mean(NodeId x) {
    Tensor v = kernels::seq_mean(value(x));
    return append("seq_mean", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        const Tensor& xv = t.value(n.inputs[0]);
        const size_t nn = xv.dim(0), tt = xv.dim(1), ee = xv.dim(2);
        Tensor dx(xv.shape);
        const double inv_t = 1.0 / static_cast<double>(tt);
        for (size_t i = 0; i < nn; ++i)
            for (size_t j = 0; j < tt; ++j)
                for (size_t k = 0; k < ee; ++k) dx.at3(i, j, k) = g.at(i, k) * inv_t;
        accum(t, n.inputs[0], dx);
    });
}

NodeId Tape::seq_matvec(NodeId x, NodeId q) {
    Tensor v = kernels::seq_matvec(value(x), value(q));
    return append("seq_matvec", {x, q}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        const Tensor& xv = t.value(n.inputs[0]);
        const Tensor& qv = t.value(n.inputs[1]);
        const size_t nn = xv.dim(0), tt = xv.dim(1), ee = xv.dim(2);
        Tensor dx(xv.shape);
        Tensor dq(qv.shape);
        for (size_t i = 0; i < nn; ++i)
            for (size_t j = 0; j < tt; ++j) {
                const double gv = g.at(i, j);
                for (size_t k = 0; k < ee; ++k) {
                    dx.at3(i, j, k) = gv * qv.data[k];
                    dq.data[k] += gv * xv.at3(i, j, k);
                }
            }
        accum(t, n.inputs[0], dx);
        accum(t, n.inputs[1], dq);
    });
}

NodeId Tape::seq_weighted_sum(NodeId x, NodeId w) {
    Tensor v = kernels::seq_weighted_sum(value(x), value(w));
    return append("seq_weighted_sum", {x, w}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& g = n.grad;
        const Tensor& xv = t.value(n.inputs[0]);
        const Tensor& wv = t.value(n.inputs[1]);
        const size_t nn = xv.dim(0), tt = xv.dim(1), ee = xv.dim(2);
        Tensor dx(xv.shape);
        Tensor dw(wv.shape);
        for (size_t i = 0; i < nn; ++i)
            for (size_t j = 0; j < tt; ++j) {
                double s = 0.0;
                for (size_t k = 0; k < ee; ++k) {
                    dx.at3(i, j, k) = wv.at(i, j) * g.at(i, k);
                    s += g.at(i, k) * xv.at3(i, j, k);
                }
                dw.at(i, j) = s;
            }
        accum(t, n.inputs[0], dx);
        accum(t, n.inputs[1], dw);
    });
}

NodeId Tape::reduce_sum(NodeId x) {
    Tensor v = Tensor::scalar(kernels::reduce_sum(value(x)));
    return append("reduce_sum", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& xv = t.value(n.inputs[0]);
        Tensor dx(xv.shape);
        for (double& d : dx.data) d = n.grad.data[0];
        accum(t, n.inputs[0], dx);
    });
}

NodeId Tape::reduce_mean(NodeId x) {
    Tensor v = Tensor::scalar(kernels::reduce_mean(value(x)));
    return append("reduce_mean", {x}, std::move(v), [](Tape& t, const ComputeNode& n) {
        const Tensor& xv = t.value(n.inputs[0]);
        const double g = n.grad.data[0] / static_cast<double>(xv.count());
        Tensor dx(xv.shape);
        for (double& d : dx.data) d = g;
        accum(t, n.inputs[0], dx);
    });
}

NodeId Tape::cosine_sim_matrix(NodeId a, NodeId b) {
    return matmul_nt(row_l2_normalize(a), row_l2_normalize(b));
}

double finite_diff_check(const GraphBuilder& build, const std::vector<Tensor>& params, double h) {
    Tape tape;
    std::vector<NodeId> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    const NodeId root = build(tape, leaves);
    if (tape.value(root).count() != 1)
        throw InvalidInput("finite_diff_check: graph must produce a scalar");
    tape.backward(root);
    std::vector<Tensor> analytic;
    analytic.reserve(leaves.size());
    for (NodeId id : leaves) analytic.push_back(tape.grad(id));

    auto eval = [&build](const std::vector<Tensor>& ps) {
        Tape t;
        std::vector<NodeId> ls;
        ls.reserve(ps.size());
        for (const Tensor& p : ps) ls.push_back(t.leaf(p, false));
        const double f = t.value(build(t, ls)).item();
        if (!std::isfinite(f)) throw RuntimeFailure("finite_diff_check: non-finite loss during probing");
        return f;
    };

    double max_rel = 0.0;
    std::vector<Tensor> work = params;
    for (size_t pi = 0; pi < work.size(); ++pi)
        for (size_t e = 0; e < work[pi].count(); ++e) {
            const double orig = work[pi].data[e];
            work[pi].data[e] = orig + h;
            const double fp = eval(work);
            work[pi].data[e] = orig - h;
            const double fm = eval(work);
            work[pi].data[e] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double ana = analytic[pi].data[e];
            const double denom = std::max({std::fabs(ana), std::fabs(numeric), 1e-12});
            max_rel = std::max(max_rel, std::fabs(ana - numeric) / denom);
        }
    return max_rel;
}

}  // namespace iilab
