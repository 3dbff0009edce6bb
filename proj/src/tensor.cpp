#include "qmdpnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "qmdpnet/rng.hpp"

namespace qmdpnet {

namespace {
std::size_t checked_numel(const std::vector<int>& shape) {
    if (shape.size() > 4) throw std::invalid_argument("tensor rank > 4");
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor extent must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) {
    std::size_t n = checked_numel(shape);
    rank_ = static_cast<int>(shape.size());
    for (int i = 0; i < rank_; ++i) dims_[static_cast<std::size_t>(i)] = shape[static_cast<std::size_t>(i)];
    data_.assign(n, 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) {
    std::size_t n = checked_numel(shape);
    if (n != data.size()) throw std::invalid_argument("tensor data length does not match shape");
    rank_ = static_cast<int>(shape.size());
    for (int i = 0; i < rank_; ++i) dims_[static_cast<std::size_t>(i)] = shape[static_cast<std::size_t>(i)];
    data_ = std::move(data);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
}

std::vector<int> Tensor::shape() const {
    std::vector<int> s(static_cast<std::size_t>(rank_));
    for (int i = 0; i < rank_; ++i) s[static_cast<std::size_t>(i)] = dims_[static_cast<std::size_t>(i)];
    return s;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double x : data_) s += x;
    return s;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::fabs(x));
    return m;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    std::size_t n = checked_numel(shape);
    if (n != data_.size()) throw std::invalid_argument("reshape changes element count");
    return Tensor(std::move(shape), data_);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < rank_; ++i) {
        if (i) os << 'x';
        os << dims_[static_cast<std::size_t>(i)];
    }
    os << ']';
    return os.str();
}

std::uint64_t tensor_checksum(const Tensor& t) {
    std::uint64_t h = fnv1a(t.data(), t.vec().size() * sizeof(double));
    int r = t.rank();
    h = fnv1a(&r, sizeof(r), h);
    for (int i = 0; i < t.rank(); ++i) {
        int d = t.dim(i);
        h = fnv1a(&d, sizeof(d), h);
    }
    return h;
}

}  // namespace qmdpnet
