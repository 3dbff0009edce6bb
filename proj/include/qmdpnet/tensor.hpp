#ifndef QMDPNET_TENSOR_HPP
#define QMDPNET_TENSOR_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace qmdpnet {

// Dense row-major array of doubles, rank 0..4. The last extent varies fastest.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({}, {v}); }
    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v);

    int rank() const { return rank_; }
    int dim(int i) const { return dims_[i]; }
    const std::array<int, 4>& dims() const { return dims_; }
    std::vector<int> shape() const;
    int numel() const { return static_cast<int>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int i, int j) { return data_[static_cast<std::size_t>(i * dims_[1] + j)]; }
    const double& at(int i, int j) const {
        return data_[static_cast<std::size_t>(i * dims_[1] + j)];
    }
    double& at(int i, int j, int k) {
        return data_[static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k)];
    }
    const double& at(int i, int j, int k) const {
        return data_[static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k)];
    }
    double& at(int i, int j, int k, int l) {
        return data_[static_cast<std::size_t>(((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l)];
    }
    const double& at(int i, int j, int k, int l) const {
        return data_[static_cast<std::size_t>(((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l)];
    }

    bool same_shape(const Tensor& o) const { return rank_ == o.rank_ && dims_ == o.dims_; }

    double sum() const;
    double max_abs() const;
    bool all_finite() const;

    // Same data, new extents; total element count must match.
    Tensor reshaped(std::vector<int> shape) const;

    std::string shape_str() const;

private:
    std::array<int, 4> dims_{1, 1, 1, 1};
    int rank_ = 0;
    std::vector<double> data_;
};

std::uint64_t tensor_checksum(const Tensor& t);

}  // namespace qmdpnet

#endif
