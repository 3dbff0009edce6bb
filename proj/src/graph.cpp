#include "qmdpnet/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "qmdpnet/errors.hpp"
#include "qmdpnet/rng.hpp"

namespace qmdpnet {

NodeId Graph::push(Node n) {
    if (check_finite_ && !n.value.all_finite())
        throw std::runtime_error("graph: non-finite value produced by op");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.op = Op::kConstant;
    return push(std::move(n));
}

NodeId Graph::param(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.op = Op::kParam;
    return push(std::move(n));
}

NodeId Graph::conv2d(NodeId input, NodeId kernel) {
    Node n;
    n.op = Op::kConv2d;
    n.in = {input, kernel, -1};
    n.n_in = 2;
    n.value = qmdpnet::conv2d(value(input), value(kernel));
    return push(std::move(n));
}

NodeId Graph::channel_group_max(NodeId input, int groups) {
    Node n;
    n.op = Op::kChannelGroupMax;
    n.in = {input, -1, -1};
    n.n_in = 1;
    n.iarg = groups;
    n.value = qmdpnet::channel_group_max(value(input), groups, &n.aux);
    return push(std::move(n));
}

NodeId Graph::fully_connected(NodeId x, NodeId w, NodeId b) {
    Node n;
    n.op = Op::kFullyConnected;
    n.in = {x, w, b};
    n.n_in = 3;
    n.value = qmdpnet::fully_connected(value(x), value(w), value(b));
    return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
    Node n;
    n.op = Op::kRelu;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = qmdpnet::relu(value(x));
    return push(std::move(n));
}

NodeId Graph::tanh_op(NodeId x) {
    Node n;
    n.op = Op::kTanh;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = qmdpnet::tanh_op(value(x));
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
    Node n;
    n.op = Op::kSigmoid;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = qmdpnet::sigmoid(value(x));
    return push(std::move(n));
}

NodeId Graph::softmax_vec(NodeId x) {
    Node n;
    n.op = Op::kSoftmaxVec;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = qmdpnet::softmax_vec(value(x));
    return push(std::move(n));
}

NodeId Graph::kernel_softmax(NodeId k) {
    Node n;
    n.op = Op::kKernelSoftmax;
    n.in = {k, -1, -1};
    n.n_in = 1;
    n.value = qmdpnet::kernel_softmax(value(k));
    return push(std::move(n));
}

NodeId Graph::group_weighted_channel_sum(NodeId input, NodeId w, int groups) {
    Node n;
    n.op = Op::kGroupWeightedChannelSum;
    n.in = {input, w, -1};
    n.n_in = 2;
    n.iarg = groups;
    n.value = qmdpnet::group_weighted_channel_sum(value(input), value(w), groups);
    return push(std::move(n));
}

NodeId Graph::group_spatial_weighted_sum(NodeId input, NodeId w, int groups) {
    Node n;
    n.op = Op::kGroupSpatialWeightedSum;
    n.in = {input, w, -1};
    n.n_in = 2;
    n.iarg = groups;
    n.value = qmdpnet::group_spatial_weighted_sum(value(input), value(w), groups);
    return push(std::move(n));
}

NodeId Graph::normalize_sum1(NodeId x) {
    Node n;
    n.op = Op::kNormalizeSum1;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = qmdpnet::normalize_sum1(value(x));
    return push(std::move(n));
}

NodeId Graph::cross_entropy(NodeId pred, int label) {
    Node n;
    n.op = Op::kCrossEntropy;
    n.in = {pred, -1, -1};
    n.n_in = 1;
    n.iarg = label;
    n.value = Tensor::scalar(qmdpnet::cross_entropy(value(pred), label));
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kMul;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.value = qmdpnet::mul(value(a), value(b));
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::kAdd;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.value = qmdpnet::add(value(a), value(b));
    return push(std::move(n));
}

NodeId Graph::add_channel_bias(NodeId t, NodeId bias) {
    Node n;
    n.op = Op::kAddChannelBias;
    n.in = {t, bias, -1};
    n.n_in = 2;
    n.value = qmdpnet::add_channel_bias(value(t), value(bias));
    return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double c) {
    Node n;
    n.op = Op::kScale;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.darg = c;
    n.value = value(x);
    for (double& v : n.value.vec()) v *= c;
    return push(std::move(n));
}

NodeId Graph::reduce_sum(NodeId x) {
    Node n;
    n.op = Op::kReduceSum;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = Tensor::scalar(value(x).sum());
    return push(std::move(n));
}

NodeId Graph::dot(NodeId a, NodeId b) {
    if (value(a).numel() != value(b).numel()) throw std::invalid_argument("dot: shape mismatch");
    Node n;
    n.op = Op::kDot;
    n.in = {a, b, -1};
    n.n_in = 2;
    double s = 0.0;
    for (int i = 0; i < value(a).numel(); ++i) s += value(a)[i] * value(b)[i];
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, std::vector<int> shape) {
    Node n;
    n.op = Op::kReshape;
    n.in = {x, -1, -1};
    n.n_in = 1;
    n.value = value(x).reshaped(std::move(shape));
    return push(std::move(n));
}

Tensor& Graph::grad_buf(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape());
        n.has_grad = true;
    }
    return n.grad;
}

const Tensor& Graph::grad(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
        static thread_local Tensor zero;
        zero = Tensor(n.value.shape());
        return zero;
    }
    return n.grad;
}

void Graph::backward(NodeId loss) {
    Node& top = nodes_[static_cast<std::size_t>(loss)];
    if (top.value.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad_buf(loss)[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.has_grad) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::kConstant:
            case Op::kParam:
                break;
            case Op::kConv2d:
                conv2d_backward(value(n.in[0]), value(n.in[1]), g, grad_buf(n.in[0]),
                                grad_buf(n.in[1]));
                break;
            case Op::kChannelGroupMax:
                channel_group_max_backward(n.aux, n.iarg, value(n.in[0]), g, grad_buf(n.in[0]));
                break;
            case Op::kFullyConnected:
                fully_connected_backward(value(n.in[0]), value(n.in[1]), g, grad_buf(n.in[0]),
                                         grad_buf(n.in[1]), grad_buf(n.in[2]));
                break;
            case Op::kRelu: {
                const Tensor& x = value(n.in[0]);
                Tensor& dx = grad_buf(n.in[0]);
                for (int i = 0; i < x.numel(); ++i)
                    if (x[i] > 0.0) dx[i] += g[i];
                break;
            }
            case Op::kTanh: {
                Tensor& dx = grad_buf(n.in[0]);
                for (int i = 0; i < n.value.numel(); ++i)
                    dx[i] += (1.0 - n.value[i] * n.value[i]) * g[i];
                break;
            }
            case Op::kSigmoid: {
                Tensor& dx = grad_buf(n.in[0]);
                for (int i = 0; i < n.value.numel(); ++i)
                    dx[i] += n.value[i] * (1.0 - n.value[i]) * g[i];
                break;
            }
            case Op::kSoftmaxVec: {
                Tensor& dx = grad_buf(n.in[0]);
                double inner = 0.0;
                for (int i = 0; i < n.value.numel(); ++i) inner += g[i] * n.value[i];
                for (int i = 0; i < n.value.numel(); ++i)
                    dx[i] += n.value[i] * (g[i] - inner);
                break;
            }
            case Op::kKernelSoftmax: {
                const Tensor& y = n.value;
                Tensor& dx = grad_buf(n.in[0]);
                const int cout = y.dim(3);
                const int taps = y.numel() / cout;
                for (int co = 0; co < cout; ++co) {
                    double inner = 0.0;
                    for (int t = 0; t < taps; ++t) inner += g[t * cout + co] * y[t * cout + co];
                    for (int t = 0; t < taps; ++t)
                        dx[t * cout + co] += y[t * cout + co] * (g[t * cout + co] - inner);
                }
                break;
            }
            case Op::kGroupWeightedChannelSum:
                group_weighted_channel_sum_backward(value(n.in[0]), value(n.in[1]), n.iarg, g,
                                                    grad_buf(n.in[0]), grad_buf(n.in[1]));
                break;
            case Op::kGroupSpatialWeightedSum:
                group_spatial_weighted_sum_backward(value(n.in[0]), value(n.in[1]), n.iarg, g,
                                                    grad_buf(n.in[0]), grad_buf(n.in[1]));
                break;
            case Op::kNormalizeSum1:
                normalize_sum1_backward(value(n.in[0]), n.value, g, grad_buf(n.in[0]));
                break;
            case Op::kCrossEntropy: {
                const Tensor& p = value(n.in[0]);
                Tensor& dp = grad_buf(n.in[0]);
                dp[n.iarg] += -g[0] / (p[n.iarg] + 1e-12);
                break;
            }
            case Op::kMul: {
                const Tensor& a = value(n.in[0]);
                const Tensor& b = value(n.in[1]);
                Tensor& da = grad_buf(n.in[0]);
                Tensor& db = grad_buf(n.in[1]);
                for (int i = 0; i < a.numel(); ++i) {
                    da[i] += b[i] * g[i];
                    db[i] += a[i] * g[i];
                }
                break;
            }
            case Op::kAdd: {
                Tensor& da = grad_buf(n.in[0]);
                Tensor& db = grad_buf(n.in[1]);
                for (int i = 0; i < g.numel(); ++i) {
                    da[i] += g[i];
                    db[i] += g[i];
                }
                break;
            }
            case Op::kAddChannelBias: {
                Tensor& dt = grad_buf(n.in[0]);
                Tensor& db = grad_buf(n.in[1]);
                const int c = db.numel();
                const int cells = g.numel() / c;
                for (int i = 0; i < g.numel(); ++i) dt[i] += g[i];
                for (int i = 0; i < cells; ++i)
                    for (int j = 0; j < c; ++j) db[j] += g[i * c + j];
                break;
            }
            case Op::kScale: {
                Tensor& dx = grad_buf(n.in[0]);
                for (int i = 0; i < g.numel(); ++i) dx[i] += n.darg * g[i];
                break;
            }
            case Op::kReduceSum: {
                Tensor& dx = grad_buf(n.in[0]);
                for (int i = 0; i < dx.numel(); ++i) dx[i] += g[0];
                break;
            }
            case Op::kDot: {
                const Tensor& a = value(n.in[0]);
                const Tensor& b = value(n.in[1]);
                Tensor& da = grad_buf(n.in[0]);
                Tensor& db = grad_buf(n.in[1]);
                for (int i = 0; i < a.numel(); ++i) {
                    da[i] += b[i] * g[0];
                    db[i] += a[i] * g[0];
                }
                break;
            }
            case Op::kReshape: {
                Tensor& dx = grad_buf(n.in[0]);
                for (int i = 0; i < g.numel(); ++i) dx[i] += g[i];
                break;
            }
        }
    }

    if (check_finite_) {
        for (const Node& n : nodes_) {
            if (n.has_grad && !n.grad.all_finite())
                throw std::runtime_error("backward: non-finite gradient");
        }
    }
}

GradCheckReport grad_check(
    const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build,
    const std::vector<Tensor>& params, double eps, int max_coords_per_param,
    std::uint64_t sample_seed, const std::vector<std::string>* names) {
    auto eval = [&](const std::vector<Tensor>& p, std::vector<Tensor>* grads) {
        Graph g;
        std::vector<NodeId> ids;
        ids.reserve(p.size());
        for (const Tensor& t : p) ids.push_back(g.param(t));
        NodeId loss = build(g, ids);
        double v = g.value(loss)[0];
        if (grads) {
            g.backward(loss);
            grads->clear();
            for (NodeId id : ids) grads->push_back(g.grad(id));
        }
        return v;
    };

    std::vector<Tensor> analytic;
    eval(params, &analytic);

    GradCheckReport report;
    Rng rng(sample_seed ^ 0x9e3779b9ULL);
    std::vector<Tensor> work = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const int n = params[pi].numel();
        std::vector<int> coords;
        if (n <= max_coords_per_param) {
            coords.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            coords = rng.sample_without_replacement(n, max_coords_per_param);
        }
        for (int c : coords) {
            const double saved = work[pi][c];
            work[pi][c] = saved + eps;
            const double up = eval(work, nullptr);
            work[pi][c] = saved - eps;
            const double dn = eval(work, nullptr);
            work[pi][c] = saved;
            const double mid = eval(work, nullptr);
            const double numeric = (up - dn) / (2.0 * eps);
            // a kink (relu, max pooling) between the probes makes the
            // one-sided slopes disagree; central differences are meaningless
            // there and the coordinate is skipped
            const double d_up = (up - mid) / eps;
            const double d_dn = (mid - dn) / eps;
            const double side_mag = std::max({std::fabs(d_up), std::fabs(d_dn), 1e-4});
            if (std::fabs(d_up - d_dn) > 0.05 * side_mag) {
                ++report.kinks_skipped;
                continue;
            }
            const double a = analytic[pi][c];
            double err;
            const double mag = std::max(std::fabs(a), std::fabs(numeric));
            if (mag < 1e-10) {
                err = 0.0;  // both readings are zero to working precision
            } else {
                err = std::fabs(a - numeric) / std::max(mag, 1e-4);
            }
            ++report.coords_checked;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = names && pi < names->size()
                                         ? (*names)[pi]
                                         : "param" + std::to_string(pi);
            }
        }
    }
    return report;
}

}  // namespace qmdpnet
