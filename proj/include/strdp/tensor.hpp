// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <utility>

#include "strdp/errors.hpp"
#include "strdp/rng.hpp"

namespace strdp {

/// Dense rank-3 array (channels x height x width) backed by a single Eigen
/// matrix of shape channels x (height*width), row-major so that each channel
/// is a contiguous row-major H x W plane. Latents, images, and feature maps
/// all use this type.
template <typename Scalar>
class Tensor3 {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using PlaneMap = Eigen::Map<Matrix>;
    using ConstPlaneMap = Eigen::Map<const Matrix>;

    Tensor3() = default;

    Tensor3(Eigen::Index channels, Eigen::Index height, Eigen::Index width)
        : channels_(channels), height_(height), width_(width),
          data_(Matrix::Zero(channels, height * width)) {}

    static Tensor3 zeros(Eigen::Index c, Eigen::Index h, Eigen::Index w) {
        return Tensor3(c, h, w);
    }

    static Tensor3 constant(Eigen::Index c, Eigen::Index h, Eigen::Index w, Scalar v) {
        Tensor3 t(c, h, w);
        t.data_.setConstant(v);
        return t;
    }

    static Tensor3 random_normal(Eigen::Index c, Eigen::Index h, Eigen::Index w, Rng& rng) {
        Tensor3 t(c, h, w);
        for (Eigen::Index i = 0; i < t.data_.size(); ++i) {
            t.data_.data()[i] = static_cast<Scalar>(rng.normal());
        }
        return t;
    }

    Eigen::Index channels() const { return channels_; }
    Eigen::Index height() const { return height_; }
    Eigen::Index width() const { return width_; }
    Eigen::Index pixels() const { return height_ * width_; }
    Eigen::Index size() const { return channels_ * height_ * width_; }

    Scalar operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) const {
        return data_(c, y * width_ + x);
    }
    Scalar& operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) {
        return data_(c, y * width_ + x);
    }

    /// View of one channel as an H x W row-major matrix.
    PlaneMap plane(Eigen::Index c) {
        return PlaneMap(data_.data() + c * pixels(), height_, width_);
    }
    ConstPlaneMap plane(Eigen::Index c) const {
        return ConstPlaneMap(data_.data() + c * pixels(), height_, width_);
    }

    /// The underlying channels x (H*W) matrix, for expression work.
    Matrix& mat() { return data_; }
    const Matrix& mat() const { return data_; }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    bool same_shape(const Tensor3& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

    bool all_finite() const { return data_.allFinite(); }

    template <typename T>
    Tensor3<T> cast() const {
        Tensor3<T> out(channels_, height_, width_);
        out.mat() = data_.template cast<T>();
        return out;
    }

private:
    Eigen::Index channels_ = 0;
    Eigen::Index height_ = 0;
    Eigen::Index width_ = 0;
    Matrix data_;
};

template <typename Scalar>
Scalar max_abs_diff(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff: shape mismatch");
    }
    if (a.size() == 0) {
        return Scalar(0);
    }
    return (a.mat() - b.mat()).cwiseAbs().maxCoeff();
}

template <typename Scalar>
bool bitwise_equal(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
    return a.same_shape(b) && a.mat() == b.mat();
}

using Tensor3d = Tensor3<double>;
using Tensor3f = Tensor3<float>;

} // namespace strdp
