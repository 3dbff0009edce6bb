#include "qmdpnet/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "qmdpnet/errors.hpp"

namespace qmdpnet {

namespace {
void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel) {
    require(input.rank() == 3, "conv2d: input must be H x W x Cin");
    require(kernel.rank() == 4, "conv2d: kernel must be k x k x Cin x Cout");
    const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
    const int k = kernel.dim(0);
    require(kernel.dim(1) == k, "conv2d: kernel must be square");
    require(k % 2 == 1, "conv2d: kernel size must be odd");
    require(kernel.dim(2) == cin, "conv2d: kernel Cin mismatch");
    const int cout = kernel.dim(3);
    const int c = (k - 1) / 2;

    Tensor out({h, w, cout});
    for (int x = 0; x < h; ++x) {
        for (int dx = 0; dx < k; ++dx) {
            const int sx = x + dx - c;
            if (sx < 0 || sx >= h) continue;
            for (int y = 0; y < w; ++y) {
                double* orow = &out.at(x, y, 0);
                for (int dy = 0; dy < k; ++dy) {
                    const int sy = y + dy - c;
                    if (sy < 0 || sy >= w) continue;
                    const double* irow = &input.at(sx, sy, 0);
                    const double* krow = &kernel.at(dx, dy, 0, 0);
                    for (int ci = 0; ci < cin; ++ci) {
                        const double v = irow[ci];
                        if (v == 0.0) continue;
                        const double* kk = krow + ci * cout;
                        for (int co = 0; co < cout; ++co) orow[co] += v * kk[co];
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& dout,
                     Tensor& dinput, Tensor& dkernel) {
    const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
    const int k = kernel.dim(0);
    const int cout = kernel.dim(3);
    const int c = (k - 1) / 2;
    if (!dinput.same_shape(input)) dinput = Tensor(input.shape());
    if (!dkernel.same_shape(kernel)) dkernel = Tensor(kernel.shape());

    for (int x = 0; x < h; ++x) {
        for (int dx = 0; dx < k; ++dx) {
            const int sx = x + dx - c;
            if (sx < 0 || sx >= h) continue;
            for (int y = 0; y < w; ++y) {
                const double* grow = &dout.at(x, y, 0);
                for (int dy = 0; dy < k; ++dy) {
                    const int sy = y + dy - c;
                    if (sy < 0 || sy >= w) continue;
                    const double* irow = &input.at(sx, sy, 0);
                    double* dirow = &dinput.at(sx, sy, 0);
                    const double* krow = &kernel.at(dx, dy, 0, 0);
                    double* dkrow = &dkernel.at(dx, dy, 0, 0);
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* kk = krow + ci * cout;
                        double* dkk = dkrow + ci * cout;
                        const double v = irow[ci];
                        double acc = 0.0;
                        for (int co = 0; co < cout; ++co) {
                            const double g = grow[co];
                            acc += kk[co] * g;
                            dkk[co] += v * g;
                        }
                        dirow[ci] += acc;
                    }
                }
            }
        }
    }
}

Tensor conv2d_backward_input(const Tensor& kernel, const Tensor& dout) {
    Tensor shape_probe({dout.dim(0), dout.dim(1), kernel.dim(2)});
    Tensor dinput, dkernel;
    conv2d_backward(shape_probe, kernel, dout, dinput, dkernel);
    return dinput;
}

Tensor channel_group_max(const Tensor& input, int groups, std::vector<int>* argmax) {
    require(input.rank() == 3, "channel_group_max: input must be H x W x C");
    const int h = input.dim(0), w = input.dim(1), ch = input.dim(2);
    require(groups >= 1 && ch % groups == 0, "channel_group_max: channels not divisible by groups");
    const int block = ch / groups;

    Tensor out({h, w, groups});
    if (argmax) argmax->assign(static_cast<std::size_t>(h * w * groups), 0);
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < w; ++y) {
            const double* row = &input.at(x, y, 0);
            for (int g = 0; g < groups; ++g) {
                const double* blk = row + g * block;
                double best = blk[0];
                int besti = 0;
                for (int i = 1; i < block; ++i) {
                    if (blk[i] > best) {  // strict: ties keep the lowest index
                        best = blk[i];
                        besti = i;
                    }
                }
                out.at(x, y, g) = best;
                if (argmax) (*argmax)[static_cast<std::size_t>((x * w + y) * groups + g)] = besti;
            }
        }
    }
    return out;
}

void channel_group_max_backward(const std::vector<int>& argmax, int groups, const Tensor& input,
                                const Tensor& dout, Tensor& dinput) {
    const int h = input.dim(0), w = input.dim(1), ch = input.dim(2);
    const int block = ch / groups;
    if (!dinput.same_shape(input)) dinput = Tensor(input.shape());
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < w; ++y) {
            for (int g = 0; g < groups; ++g) {
                int i = argmax[static_cast<std::size_t>((x * w + y) * groups + g)];
                dinput.at(x, y, g * block + i) += dout.at(x, y, g);
            }
        }
    }
}

Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.rank() == 1, "fully_connected: x must be a vector");
    require(w.rank() == 2, "fully_connected: w must be n x m");
    require(b.rank() == 1, "fully_connected: b must be a vector");
    const int n = x.dim(0), m = w.dim(1);
    require(w.dim(0) == n, "fully_connected: w rows must match x");
    require(b.dim(0) == m, "fully_connected: b must match w columns");
    Tensor out({m});
    for (int j = 0; j < m; ++j) out[j] = b[j];
    for (int i = 0; i < n; ++i) {
        const double v = x[i];
        if (v == 0.0) continue;
        const double* wrow = &w.at(i, 0);
        for (int j = 0; j < m; ++j) out[j] += v * wrow[j];
    }
    return out;
}

void fully_connected_backward(const Tensor& x, const Tensor& w, const Tensor& dout, Tensor& dx,
                              Tensor& dw, Tensor& db) {
    const int n = x.dim(0), m = w.dim(1);
    if (!dx.same_shape(x)) dx = Tensor(x.shape());
    if (!dw.same_shape(w)) dw = Tensor(w.shape());
    if (!db.same_shape(dout)) db = Tensor(dout.shape());
    for (int j = 0; j < m; ++j) db[j] += dout[j];
    for (int i = 0; i < n; ++i) {
        const double* wrow = &w.at(i, 0);
        double* dwrow = &dw.at(i, 0);
        const double v = x[i];
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
            acc += wrow[j] * dout[j];
            dwrow[j] += v * dout[j];
        }
        dx[i] += acc;
    }
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor tanh_op(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.vec()) v = std::tanh(v);
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.vec()) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Tensor softmax_vec(const Tensor& x) {
    require(x.numel() > 0, "softmax: empty input");
    Tensor out = x;
    double m = out[0];
    for (double v : out.vec()) m = std::max(m, v);
    double total = 0.0;
    for (double& v : out.vec()) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : out.vec()) v /= total;
    return out;
}

Tensor kernel_softmax(const Tensor& k) {
    require(k.rank() == 4, "kernel_softmax: kernel must be k x k x Cin x Cout");
    const int taps = k.dim(0) * k.dim(1) * k.dim(2);
    const int cout = k.dim(3);
    Tensor out = k;
    double* d = out.data();
    for (int co = 0; co < cout; ++co) {
        double m = d[co];
        for (int t = 1; t < taps; ++t) m = std::max(m, d[t * cout + co]);
        double total = 0.0;
        for (int t = 0; t < taps; ++t) {
            double e = std::exp(d[t * cout + co] - m);
            d[t * cout + co] = e;
            total += e;
        }
        for (int t = 0; t < taps; ++t) d[t * cout + co] /= total;
    }
    return out;
}

Tensor group_weighted_channel_sum(const Tensor& input, const Tensor& w, int groups) {
    require(input.rank() == 3, "weighted_channel_sum: input must be H x W x C");
    require(w.rank() == 1, "weighted_channel_sum: weights must be a vector");
    const int h = input.dim(0), wd = input.dim(1), ch = input.dim(2);
    require(groups >= 1 && ch % groups == 0, "weighted_channel_sum: channels not divisible");
    const int block = ch / groups;
    require(w.dim(0) == block, "weighted_channel_sum: weight length mismatch");

    Tensor out({h, wd, groups});
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wd; ++y) {
            const double* row = &input.at(x, y, 0);
            for (int g = 0; g < groups; ++g) {
                const double* blk = row + g * block;
                double acc = 0.0;
                for (int c = 0; c < block; ++c) acc += blk[c] * w[c];
                out.at(x, y, g) = acc;
            }
        }
    }
    return out;
}

void group_weighted_channel_sum_backward(const Tensor& input, const Tensor& w, int groups,
                                         const Tensor& dout, Tensor& dinput, Tensor& dw) {
    const int h = input.dim(0), wd = input.dim(1), ch = input.dim(2);
    const int block = ch / groups;
    if (!dinput.same_shape(input)) dinput = Tensor(input.shape());
    if (!dw.same_shape(w)) dw = Tensor(w.shape());
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wd; ++y) {
            const double* row = &input.at(x, y, 0);
            double* drow = &dinput.at(x, y, 0);
            for (int g = 0; g < groups; ++g) {
                const double g_out = dout.at(x, y, g);
                if (g_out == 0.0) continue;
                const double* blk = row + g * block;
                double* dblk = drow + g * block;
                for (int c = 0; c < block; ++c) {
                    dblk[c] += w[c] * g_out;
                    dw[c] += blk[c] * g_out;
                }
            }
        }
    }
}

Tensor group_spatial_weighted_sum(const Tensor& input, const Tensor& w, int groups) {
    require(input.rank() == 3, "spatial_weighted_sum: input must be H x W x C");
    const int h = input.dim(0), wd = input.dim(1), ch = input.dim(2);
    require(groups >= 1 && ch % groups == 0, "spatial_weighted_sum: channels not divisible");
    const int block = ch / groups;
    require(w.numel() == h * wd * groups, "spatial_weighted_sum: weight shape mismatch");

    Tensor out({block});
    const double* wd_p = w.data();
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wd; ++y) {
            const double* row = &input.at(x, y, 0);
            for (int g = 0; g < groups; ++g) {
                const double wv = wd_p[(x * wd + y) * groups + g];
                if (wv == 0.0) continue;
                const double* blk = row + g * block;
                for (int c = 0; c < block; ++c) out[c] += blk[c] * wv;
            }
        }
    }
    return out;
}

void group_spatial_weighted_sum_backward(const Tensor& input, const Tensor& w, int groups,
                                         const Tensor& dout, Tensor& dinput, Tensor& dw) {
    const int h = input.dim(0), wd = input.dim(1), ch = input.dim(2);
    const int block = ch / groups;
    if (!dinput.same_shape(input)) dinput = Tensor(input.shape());
    if (!dw.same_shape(w)) dw = Tensor(w.shape());
    const double* wp = w.data();
    double* dwp = dw.data();
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wd; ++y) {
            const double* row = &input.at(x, y, 0);
            double* drow = &dinput.at(x, y, 0);
            for (int g = 0; g < groups; ++g) {
                const std::size_t wi = static_cast<std::size_t>((x * wd + y) * groups + g);
                const double* blk = row + g * block;
                double* dblk = drow + g * block;
                double acc = 0.0;
                for (int c = 0; c < block; ++c) {
                    dblk[c] += wp[wi] * dout[c];
                    acc += blk[c] * dout[c];
                }
                dwp[wi] += acc;
            }
        }
    }
}

Tensor normalize_sum1(const Tensor& x) {
    double total = 0.0;
    for (double v : x.vec()) {
        if (v < 0.0) throw std::invalid_argument("normalize_sum1: negative entry");
        total += v;
    }
    if (total < 1e-12) throw DegenerateBeliefError("normalize_sum1: total mass below 1e-12");
    Tensor out = x;
    for (double& v : out.vec()) v /= total;
    return out;
}

void normalize_sum1_backward(const Tensor& x, const Tensor& out, const Tensor& dout, Tensor& dx) {
    double total = 0.0;
    for (double v : x.vec()) total += v;
    double inner = 0.0;
    for (int i = 0; i < out.numel(); ++i) inner += dout[i] * out[i];
    if (!dx.same_shape(x)) dx = Tensor(x.shape());
    for (int i = 0; i < x.numel(); ++i) dx[i] += (dout[i] - inner) / total;
}

double cross_entropy(const Tensor& pred, int label) {
    if (label < 0 || label >= pred.numel())
        throw std::invalid_argument("cross_entropy: label out of range");
    double total = pred.sum();
    if (std::fabs(total - 1.0) > 1e-6)
        throw std::invalid_argument("cross_entropy: prediction does not sum to 1");
    return -std::log(pred[label] + 1e-12);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.numel() == b.numel(), "mul: shape mismatch");
    Tensor out = a;
    for (int i = 0; i < out.numel(); ++i) out[i] *= b[i];
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.numel() == b.numel(), "add: shape mismatch");
    Tensor out = a;
    for (int i = 0; i < out.numel(); ++i) out[i] += b[i];
    return out;
}

Tensor add_channel_bias(const Tensor& t, const Tensor& bias) {
    require(bias.rank() == 1, "add_channel_bias: bias must be a vector");
    const int c = bias.dim(0);
    require(t.numel() % c == 0 && t.dim(t.rank() - 1) == c,
            "add_channel_bias: last extent must match bias");
    Tensor out = t;
    double* d = out.data();
    const int cells = t.numel() / c;
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < c; ++j) d[i * c + j] += bias[j];
    return out;
}

}  // namespace qmdpnet
