#ifndef QMDPNET_GRAPH_HPP
#define QMDPNET_GRAPH_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qmdpnet/ops.hpp"
#include "qmdpnet/tensor.hpp"

namespace qmdpnet {

using NodeId = int;

enum class Op : std::uint8_t {
    kConstant,
    kParam,
    kConv2d,
    kChannelGroupMax,
    kFullyConnected,
    kRelu,
    kTanh,
    kSigmoid,
    kSoftmaxVec,
    kKernelSoftmax,
    kGroupWeightedChannelSum,
    kGroupSpatialWeightedSum,
    kNormalizeSum1,
    kCrossEntropy,
    kMul,
    kAdd,
    kAddChannelBias,
    kScale,
    kReduceSum,
    kDot,
    kReshape,
};

// Reverse-mode tape. Nodes are appended in construction order, which is a
// topological order by construction: every input id precedes its consumer.
// backward() walks the records in exact reverse order and accumulates
// gradients additively at fan-out. A graph and its tensors belong to one
// thread; parameter tensors may be shared read-only across threads for
// forward-only evaluation.
class Graph {
public:
    NodeId constant(Tensor value);
    NodeId param(Tensor value);

    NodeId conv2d(NodeId input, NodeId kernel);
    NodeId channel_group_max(NodeId input, int groups);
    NodeId fully_connected(NodeId x, NodeId w, NodeId b);
    NodeId relu(NodeId x);
    NodeId tanh_op(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId softmax_vec(NodeId x);
    NodeId kernel_softmax(NodeId k);
    NodeId group_weighted_channel_sum(NodeId input, NodeId w, int groups);
    NodeId group_spatial_weighted_sum(NodeId input, NodeId w, int groups);
    NodeId normalize_sum1(NodeId x);
    NodeId cross_entropy(NodeId pred, int label);
    NodeId mul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId add_channel_bias(NodeId t, NodeId bias);
    NodeId scale(NodeId x, double c);
    NodeId reduce_sum(NodeId x);
    NodeId dot(NodeId a, NodeId b);
    NodeId reshape(NodeId x, std::vector<int> shape);

    // Re-enters a value as a fresh constant: gradients do not flow past it.
    NodeId detach(NodeId x) { return constant(value(x)); }

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    // Valid after backward(); zero tensor for nodes the loss does not reach.
    const Tensor& grad(NodeId id) const;

    // Accumulates d(loss)/d(node) for every node; loss must be scalar.
    void backward(NodeId loss);

    std::size_t size() const { return nodes_.size(); }
    void check_finite(bool on) { check_finite_ = on; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        Op op = Op::kConstant;
        std::array<NodeId, 3> in{-1, -1, -1};
        int n_in = 0;
        int iarg = 0;        // groups / label
        double darg = 0.0;   // scale factor
        std::vector<int> aux;  // argmax records
    };

    NodeId push(Node n);
    Tensor& grad_buf(NodeId id);

    std::vector<Node> nodes_;
    bool check_finite_ = true;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    int coords_checked = 0;
    int kinks_skipped = 0;  // coordinates where one-sided slopes disagree
    std::string worst_param;
};

// Central finite-difference check of d(loss)/d(params) against the tape.
// `build` must construct the loss from the parameter nodes it is given.
// For tensors larger than max_coords_per_param, a seeded sample of
// coordinates is checked. Relative error uses max(|a|,|n|,floor) with
// floor 1e-4; coordinate pairs below 1e-10 in both readings count as exact.
GradCheckReport grad_check(
    const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build,
    const std::vector<Tensor>& params, double eps, int max_coords_per_param = 40,
    std::uint64_t sample_seed = 0, const std::vector<std::string>* names = nullptr);

}  // namespace qmdpnet

#endif
