#ifndef QMDPNET_OPS_HPP
#define QMDPNET_OPS_HPP

#include <vector>

#include "qmdpnet/tensor.hpp"

namespace qmdpnet {

// Forward kernels shared by the autodiff tape and the plain (no-gradient)
// evaluation path. Each op has a matching backward rule in ops.cpp.

// Same-size 2-D convolution with zero padding. input H x W x Cin,
// kernel k x k x Cin x Cout (k odd), output H x W x Cout:
//   out[x,y,co] = sum_{dx,dy,ci} kernel[dx,dy,ci,co] * in[x+dx-(k-1)/2, y+dy-(k-1)/2, ci]
// with out-of-range reads treated as zero.
Tensor conv2d(const Tensor& input, const Tensor& kernel);
void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& dout,
                     Tensor& dinput, Tensor& dkernel);
// Input-adjoint alone (used by the adjoint-identity test).
Tensor conv2d_backward_input(const Tensor& kernel, const Tensor& dout);

// Per-cell max over G contiguous channel blocks; input H x W x (G*C) ->
// output H x W x G. argmax records, per (cell, group), the winning channel
// offset within the block; ties resolve to the lowest channel index.
Tensor channel_group_max(const Tensor& input, int groups, std::vector<int>* argmax = nullptr);
void channel_group_max_backward(const std::vector<int>& argmax, int groups, const Tensor& input,
                                const Tensor& dout, Tensor& dinput);

// out = x^T W + b.   x: n, W: n x m, b: m.
Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b);
void fully_connected_backward(const Tensor& x, const Tensor& w, const Tensor& dout, Tensor& dx,
                              Tensor& dw, Tensor& db);

Tensor relu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Softmax over the whole (flattened) tensor, max-subtracted for stability.
Tensor softmax_vec(const Tensor& x);
// Softmax over the (k*k*Cin) entries feeding each output channel of a
// k x k x Cin x Cout kernel; every constrained slice sums to one.
Tensor kernel_softmax(const Tensor& k);

// out[x,y,g] = sum_c in[x,y,g*C+c] * w[c].  input H x W x (G*C), w: C.
// The spec-level weighted_channel_sum is the G=1 case.
Tensor group_weighted_channel_sum(const Tensor& input, const Tensor& w, int groups);
void group_weighted_channel_sum_backward(const Tensor& input, const Tensor& w, int groups,
                                         const Tensor& dout, Tensor& dinput, Tensor& dw);

// out[c] = sum_{x,y,g} in[x,y,g*C+c] * w[x,y,g].  input H x W x (G*C),
// w H x W x G, output C. Contraction used by the action head.
Tensor group_spatial_weighted_sum(const Tensor& input, const Tensor& w, int groups);
void group_spatial_weighted_sum_backward(const Tensor& input, const Tensor& w, int groups,
                                         const Tensor& dout, Tensor& dinput, Tensor& dw);

// Divides a nonnegative tensor by its total mass. Throws
// DegenerateBeliefError when the mass is below 1e-12.
Tensor normalize_sum1(const Tensor& x);
void normalize_sum1_backward(const Tensor& x, const Tensor& out, const Tensor& dout, Tensor& dx);

// -log(pred[label] + 1e-12); pred must sum to 1 within 1e-6.
double cross_entropy(const Tensor& pred, int label);

Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
// tensor (... x C) + bias (C), broadcast over leading cells.
Tensor add_channel_bias(const Tensor& t, const Tensor& bias);

}  // namespace qmdpnet

#endif
