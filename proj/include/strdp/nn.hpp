// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "strdp/container.hpp"
#include "strdp/errors.hpp"
#include "strdp/rng.hpp"
#include "strdp/tensor.hpp"

// Untrained neural-net building blocks: plain convolutions (im2col + GEMM),
// group normalization, SiLU, dense layers, sinusoidal timestep embeddings.
// Weights always come from a seeded stream; nothing here is trainable.

namespace strdp {

namespace detail {

/// Fills any dense Eigen object from the normal stream, in flat storage
/// order (deterministic for a fixed type and shape).
template <typename Dense>
void fill_normal(Dense& m, Rng& rng, double stddev) {
    using S = typename Dense::Scalar;
    S* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        p[i] = static_cast<S>(rng.normal() * stddev);
    }
}

template <typename Scalar>
std::vector<Scalar> to_vector(const Scalar* data, std::size_t n) {
    return std::vector<Scalar>(data, data + n);
}

inline const ArrayEntry& find_entry(const std::vector<ArrayEntry>& entries,
                                    const std::string& name) {
    for (const auto& e : entries) {
        if (e.name == name) {
            return e;
        }
    }
    throw FormatError("container: missing entry '" + name + "'");
}

template <typename Scalar, typename Dest>
void load_into(const std::vector<ArrayEntry>& entries, const std::string& name, Dest& dest) {
    const ArrayEntry& e = find_entry(entries, name);
    if (e.element_count() != static_cast<std::uint64_t>(dest.size())) {
        throw FormatError("container: entry '" + name + "' holds " +
                          std::to_string(e.element_count()) + " values, expected " +
                          std::to_string(dest.size()));
    }
    if (e.is_f64()) {
        const auto& v = std::get<std::vector<double>>(e.values);
        for (Eigen::Index i = 0; i < dest.size(); ++i) {
            dest.data()[i] = static_cast<Scalar>(v[static_cast<std::size_t>(i)]);
        }
    } else {
        const auto& v = std::get<std::vector<float>>(e.values);
        for (Eigen::Index i = 0; i < dest.size(); ++i) {
            dest.data()[i] = static_cast<Scalar>(v[static_cast<std::size_t>(i)]);
        }
    }
}

} // namespace detail

template <typename Scalar>
Tensor3<Scalar> silu(const Tensor3<Scalar>& x) {
    Tensor3<Scalar> out(x.channels(), x.height(), x.width());
    out.mat() = (x.mat().array() / (Scalar(1) + (-x.mat().array()).exp())).matrix();
    return out;
}

/// 2D convolution with square kernel, zero padding. Weights are stored as a
/// C_out x (C_in*k*k) matrix so the forward pass is one GEMM over im2col
/// columns.
template <typename Scalar>
struct Conv2d {
    using Matrix = typename Tensor3<Scalar>::Matrix;

    int in_ch = 0, out_ch = 0, kernel = 1, stride = 1, pad = 0;
    Matrix weight; // out_ch x (in_ch*kernel*kernel)
    Eigen::Vector<Scalar, Eigen::Dynamic> bias;

    Conv2d() = default;
    Conv2d(int in, int out, int k, int stride_, int pad_, Rng& rng, double init_std)
        : in_ch(in), out_ch(out), kernel(k), stride(stride_), pad(pad_),
          weight(out, in * k * k), bias(out) {
        detail::fill_normal(weight, rng, init_std);
        detail::fill_normal(bias, rng, init_std);
    }

    Tensor3<Scalar> apply(const Tensor3<Scalar>& x) const {
        if (x.channels() != in_ch) {
            throw ShapeError("conv2d: expected " + std::to_string(in_ch) + " channels, got " +
                             std::to_string(x.channels()));
        }
        const Eigen::Index ho = (x.height() + 2 * pad - kernel) / stride + 1;
        const Eigen::Index wo = (x.width() + 2 * pad - kernel) / stride + 1;
        Matrix cols(in_ch * kernel * kernel, ho * wo);
        for (int ci = 0; ci < in_ch; ++ci) {
            const auto plane = x.plane(ci);
            for (int ky = 0; ky < kernel; ++ky) {
                for (int kx = 0; kx < kernel; ++kx) {
                    const Eigen::Index row =
                        (static_cast<Eigen::Index>(ci) * kernel + ky) * kernel + kx;
                    Scalar* dst_row = cols.data() + row * cols.cols();
                    for (Eigen::Index oy = 0; oy < ho; ++oy) {
                        const Eigen::Index iy = oy * stride - pad + ky;
                        Scalar* dst = dst_row + oy * wo;
                        if (iy < 0 || iy >= x.height()) {
                            for (Eigen::Index ox = 0; ox < wo; ++ox) dst[ox] = Scalar(0);
                            continue;
                        }
                        for (Eigen::Index ox = 0; ox < wo; ++ox) {
                            const Eigen::Index ix = ox * stride - pad + kx;
                            dst[ox] = (ix >= 0 && ix < x.width()) ? plane(iy, ix) : Scalar(0);
                        }
                    }
                }
            }
        }
        Tensor3<Scalar> out(out_ch, ho, wo);
        out.mat().noalias() = weight * cols;
        out.mat().colwise() += bias;
        return out;
    }

    void export_params(const std::string& prefix, std::vector<ArrayEntry>& sink) const {
        sink.push_back({prefix + ".weight",
                        {static_cast<std::uint64_t>(out_ch), static_cast<std::uint64_t>(in_ch),
                         static_cast<std::uint64_t>(kernel), static_cast<std::uint64_t>(kernel)},
                        detail::to_vector(weight.data(), static_cast<std::size_t>(weight.size()))});
        sink.push_back({prefix + ".bias",
                        {static_cast<std::uint64_t>(out_ch)},
                        detail::to_vector(bias.data(), static_cast<std::size_t>(bias.size()))});
    }

    void import_params(const std::string& prefix, const std::vector<ArrayEntry>& entries) {
        detail::load_into<Scalar>(entries, prefix + ".weight", weight);
        detail::load_into<Scalar>(entries, prefix + ".bias", bias);
    }
};

/// Dense layer for timestep embeddings.
template <typename Scalar>
struct Linear {
    using Matrix = typename Tensor3<Scalar>::Matrix;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    Matrix weight; // out x in
    Vector bias;

    Linear() = default;
    Linear(int in, int out, Rng& rng, double init_std) : weight(out, in), bias(out) {
        detail::fill_normal(weight, rng, init_std);
        detail::fill_normal(bias, rng, init_std);
    }

    Vector apply(const Vector& v) const { return weight * v + bias; }

    void export_params(const std::string& prefix, std::vector<ArrayEntry>& sink) const {
        sink.push_back({prefix + ".weight",
                        {static_cast<std::uint64_t>(weight.rows()),
                         static_cast<std::uint64_t>(weight.cols())},
                        detail::to_vector(weight.data(), static_cast<std::size_t>(weight.size()))});
        sink.push_back({prefix + ".bias",
                        {static_cast<std::uint64_t>(bias.size())},
                        detail::to_vector(bias.data(), static_cast<std::size_t>(bias.size()))});
    }

    void import_params(const std::string& prefix, const std::vector<ArrayEntry>& entries) {
        detail::load_into<Scalar>(entries, prefix + ".weight", weight);
        detail::load_into<Scalar>(entries, prefix + ".bias", bias);
    }
};

/// Group normalization without affine parameters; statistics in double.
template <typename Scalar>
Tensor3<Scalar> group_norm(const Tensor3<Scalar>& x, int groups, double eps = 1e-5) {
    if (groups < 1 || x.channels() % groups != 0) {
        throw ShapeError("group_norm: " + std::to_string(x.channels()) +
                         " channels not divisible into " + std::to_string(groups) + " groups");
    }
    const Eigen::Index per_group = x.channels() / groups;
    Tensor3<Scalar> out(x.channels(), x.height(), x.width());
    for (int g = 0; g < groups; ++g) {
        const auto block = x.mat().middleRows(g * per_group, per_group).template cast<double>();
        const double m = block.mean();
        const double var = (block.array() - m).square().mean();
        const double inv = 1.0 / std::sqrt(var + eps);
        out.mat().middleRows(g * per_group, per_group) =
            ((block.array() - m) * inv).template cast<Scalar>().matrix();
    }
    return out;
}

/// Nearest-neighbour 2x spatial upsampling.
template <typename Scalar>
Tensor3<Scalar> upsample_nearest_2x(const Tensor3<Scalar>& x) {
    Tensor3<Scalar> out(x.channels(), x.height() * 2, x.width() * 2);
    for (Eigen::Index c = 0; c < x.channels(); ++c) {
        const auto src = x.plane(c);
        auto dst = out.plane(c);
        for (Eigen::Index y = 0; y < x.height(); ++y) {
            for (Eigen::Index xx = 0; xx < x.width(); ++xx) {
                const Scalar v = src(y, xx);
                dst(2 * y, 2 * xx) = v;
                dst(2 * y, 2 * xx + 1) = v;
                dst(2 * y + 1, 2 * xx) = v;
                dst(2 * y + 1, 2 * xx + 1) = v;
            }
        }
    }
    return out;
}

/// Concatenate along the channel axis; spatial shapes must match.
template <typename Scalar>
Tensor3<Scalar> concat_channels(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError("concat_channels: spatial shape mismatch");
    }
    Tensor3<Scalar> out(a.channels() + b.channels(), a.height(), a.width());
    out.mat().topRows(a.channels()) = a.mat();
    out.mat().bottomRows(b.channels()) = b.mat();
    return out;
}

/// Sinusoidal timestep embedding: [sin(t*w_i), cos(t*w_i)] with
/// geometrically spaced frequencies. dim must be even.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> sinusoidal_embedding(double t, int dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw ConfigError("sinusoidal_embedding: dim must be even and >= 2");
    }
    const int half = dim / 2;
    Eigen::Vector<Scalar, Eigen::Dynamic> emb(dim);
    for (int i = 0; i < half; ++i) {
        const double f = half > 1 ? static_cast<double>(i) / (half - 1) : 0.0;
        const double w = std::exp(-std::log(10000.0) * f);
        emb[i] = static_cast<Scalar>(std::sin(t * w));
        emb[half + i] = static_cast<Scalar>(std::cos(t * w));
    }
    return emb;
}

} // namespace strdp
