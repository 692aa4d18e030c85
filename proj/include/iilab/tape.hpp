#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "iilab/tensor.hpp"

namespace iilab {

class Tape;
using NodeId = int32_t;

struct ComputeNode;
using BackwardFn = std::function<void(Tape&, const ComputeNode&)>;

struct ComputeNode {
    NodeId id = -1;
    std::string op;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;  // zero until backward()
    bool requires_grad = false;
    BackwardFn backward;  // empty on leaves
};

// Gradients of requires_grad leaves after backward(), keyed by node id.
using GradTable = std::map<NodeId, Tensor>;

// Reverse-mode autodiff over a graph built fresh per batch. Nodes are
// appended in evaluation order, so ids already form a topological order and
// backward() is a single reverse sweep. A tape is single-use: backward()
// may run once.
class Tape {
public:
    // Leaf values must be finite.
    NodeId leaf(Tensor value, bool requires_grad);

    // Appends a node with an explicit backward rule. All ops below route
    // through this; it is public so tests can plant a deliberately wrong
    // backward and confirm the finite-difference checker rejects it.
    NodeId append(std::string op, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

    const ComputeNode& node(NodeId id) const;
    ComputeNode& node(NodeId id);
    const Tensor& value(NodeId id) const { return node(id).value; }
    const Tensor& grad(NodeId id) const { return node(id).grad; }
    size_t size() const { return nodes_.size(); }

    // Seeds d(root)=1, sweeps ids in reverse, and returns the grads of all
    // requires_grad leaves. Root must be scalar; a root with no trainable
    // ancestry yields an empty table.
    GradTable backward(NodeId root);

    NodeId matmul(NodeId a, NodeId b);     // (m,k)x(k,n)
    NodeId matmul_nt(NodeId a, NodeId b);  // (m,k)x(n,k)^T
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId scale_by(NodeId a, NodeId s);  // s is a scalar node, grad flows into both
    NodeId add_rowvec(NodeId x, NodeId b);
    NodeId exp(NodeId x);
    NodeId log(NodeId x);
    NodeId tanh(NodeId x);
    NodeId transpose(NodeId x);
    NodeId row_l2_normalize(NodeId x);
    NodeId row_softmax(NodeId x);

    // Mean over rows of -log softmax(logits)[i, targets[i]], fused for
    // stability (max subtraction inside).
    NodeId cross_entropy_rows(NodeId logits, const std::vector<size_t>& targets);

    NodeId seq_mean(NodeId x);                      // (n,t,e) -> (n,e)
    NodeId seq_matvec(NodeId x, NodeId q);          // (n,t,e),(e) -> (n,t)
    NodeId seq_weighted_sum(NodeId x, NodeId w);    // (n,t,e),(n,t) -> (n,e)
    NodeId reduce_sum(NodeId x);
    NodeId reduce_mean(NodeId x);

    // Composite: matmul_nt over row-normalized operands.
    NodeId cosine_sim_matrix(NodeId a, NodeId b);

private:
    std::vector<ComputeNode> nodes_;
    bool backward_done_ = false;
};

using GraphBuilder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

// Central-difference gradient check. Builds the graph once for analytic
// grads, then twice per parameter element for the numeric estimate, and
// returns the worst relative error over every element, with the relative
// error denominator floored at 1e-12.
double finite_diff_check(const GraphBuilder& build, const std::vector<Tensor>& params,
                         double h = 1e-6);

}  // namespace iilab
