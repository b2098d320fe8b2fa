// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "strdp/errors.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

enum class BetaLaw {
    Linear,       // beta linearly spaced between the endpoints
    ScaledLinear, // sqrt(beta) linearly spaced, then squared
};

struct ScheduleParams {
    int steps = 50;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    int train_steps = 1000;
    BetaLaw beta_law = BetaLaw::ScaledLinear;
};

/// Cumulative noise schedule for deterministic (sigma_t = 0) DDIM sampling.
/// Holds alpha_bar over indices 0..T with alpha_bar(0) = 1; immutable after
/// construction.
class DiffusionSchedule {
public:
    /// Builds the full train-resolution alpha_bar ladder from the beta law,
    /// then subsamples T uniformly spaced entries with leading spacing
    /// (first sampled index is the first train step) and prepends 1.
    static DiffusionSchedule build(const ScheduleParams& p) {
        if (p.steps < 1) {
            throw ConfigError("schedule: steps must be positive");
        }
        if (p.train_steps < p.steps) {
            throw ConfigError("schedule: steps exceeds train_steps");
        }
        if (!(p.beta_start > 0.0) || !(p.beta_start <= p.beta_end) || !(p.beta_end < 1.0)) {
            throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
        }
        std::vector<double> betas(p.train_steps);
        for (int i = 0; i < p.train_steps; ++i) {
            const double f =
                p.train_steps > 1 ? static_cast<double>(i) / (p.train_steps - 1) : 0.0;
            if (p.beta_law == BetaLaw::Linear) {
                betas[i] = p.beta_start + f * (p.beta_end - p.beta_start);
            } else {
                const double s = std::sqrt(p.beta_start) +
                                 f * (std::sqrt(p.beta_end) - std::sqrt(p.beta_start));
                betas[i] = s * s;
            }
        }
        std::vector<double> ladder(p.train_steps);
        double acc = 1.0;
        for (int i = 0; i < p.train_steps; ++i) {
            acc *= 1.0 - betas[i];
            ladder[i] = acc;
        }
        std::vector<double> alphas_bar(p.steps + 1);
        alphas_bar[0] = 1.0;
        for (int t = 1; t <= p.steps; ++t) {
            const auto idx = static_cast<std::size_t>(
                (static_cast<long long>(t) - 1) * p.train_steps / p.steps);
            alphas_bar[t] = ladder[idx];
        }
        return DiffusionSchedule(std::move(alphas_bar));
    }

    /// Wraps an explicit alpha_bar sequence (index 0..T). Validates the
    /// schedule invariants.
    static DiffusionSchedule from_alphas_bar(std::vector<double> alphas_bar) {
        return DiffusionSchedule(std::move(alphas_bar));
    }

    int steps() const { return static_cast<int>(alphas_bar_.size()) - 1; }

    double alpha_bar(int t) const {
        if (t < 0 || t > steps()) {
            throw ScheduleError("schedule: step index " + std::to_string(t) +
                                " outside [0, " + std::to_string(steps()) + "]");
        }
        return alphas_bar_[static_cast<std::size_t>(t)];
    }

    const std::vector<double>& alphas_bar() const { return alphas_bar_; }

private:
    explicit DiffusionSchedule(std::vector<double> alphas_bar)
        : alphas_bar_(std::move(alphas_bar)) {
        if (alphas_bar_.size() < 2) {
            throw ConfigError("schedule: need at least one step");
        }
        if (alphas_bar_.front() != 1.0) {
            throw ConfigError("schedule: alpha_bar(0) must be 1");
        }
        for (std::size_t i = 1; i < alphas_bar_.size(); ++i) {
            if (!(alphas_bar_[i] > 0.0) || !(alphas_bar_[i] < alphas_bar_[i - 1])) {
                throw ConfigError("schedule: alpha_bar must decrease strictly within (0, 1]");
            }
        }
    }

    std::vector<double> alphas_bar_;
};

/// Number of diffusion steps used at strength S: round(S * T), half away
/// from zero.
inline int strength_to_steps(double S, int T) {
    if (!(S >= 0.0) || !(S <= 1.0)) {
        throw RangeError("strength: S must lie in [0, 1], got " + std::to_string(S));
    }
    return static_cast<int>(std::llround(S * T));
}

namespace detail {
inline void check_step(const DiffusionSchedule& sched, int t) {
    if (t < 1 || t > sched.steps()) {
        throw ScheduleError("step index " + std::to_string(t) + " outside [1, " +
                            std::to_string(sched.steps()) + "]");
    }
}
template <typename Scalar>
void check_same_shape(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": latent/noise shape mismatch");
    }
}
} // namespace detail

// Scalar forms of the DDIM step equations, shared by the tensor overloads.

inline double forward_step_scalar(const DiffusionSchedule& s, double z_prev, int t, double eps) {
    detail::check_step(s, t);
    const double a_t = s.alpha_bar(t);
    const double a_prev = s.alpha_bar(t - 1);
    return std::sqrt(a_t / a_prev) * z_prev + std::sqrt(1.0 - a_t) * eps;
}

inline double predicted_z0_scalar(const DiffusionSchedule& s, double z_t, double eps_hat, int t) {
    detail::check_step(s, t);
    const double a_t = s.alpha_bar(t);
    return (z_t - std::sqrt(1.0 - a_t) * eps_hat) / std::sqrt(a_t);
}

inline double reverse_step_scalar(const DiffusionSchedule& s, double z_t, double eps_hat, int t) {
    detail::check_step(s, t);
    const double a_prev = s.alpha_bar(t - 1);
    return std::sqrt(a_prev) * predicted_z0_scalar(s, z_t, eps_hat, t) +
           std::sqrt(1.0 - a_prev) * eps_hat;
}

inline double direct_noise_to_scalar(const DiffusionSchedule& s, double z0, int t, double eps) {
    const double a_t = s.alpha_bar(t); // throws for t outside [0, T]
    return std::sqrt(a_t) * z0 + std::sqrt(1.0 - a_t) * eps;
}

/// One DDIM forward (noising) step:
///   z_t = sqrt(a_t / a_{t-1}) * z_{t-1} + sqrt(1 - a_t) * eps.
template <typename Scalar>
Tensor3<Scalar> forward_step(const DiffusionSchedule& s, const Tensor3<Scalar>& z_prev, int t,
                             const Tensor3<Scalar>& eps) {
    detail::check_step(s, t);
    detail::check_same_shape(z_prev, eps, "forward_step");
    const double a_t = s.alpha_bar(t);
    const double a_prev = s.alpha_bar(t - 1);
    const auto c1 = static_cast<Scalar>(std::sqrt(a_t / a_prev));
    const auto c2 = static_cast<Scalar>(std::sqrt(1.0 - a_t));
    Tensor3<Scalar> out(z_prev.channels(), z_prev.height(), z_prev.width());
    out.mat() = c1 * z_prev.mat() + c2 * eps.mat();
    return out;
}

/// The "predicted z0" term of the reverse step:
///   (z_t - sqrt(1 - a_t) * eps_hat) / sqrt(a_t).
template <typename Scalar>
Tensor3<Scalar> predicted_z0(const DiffusionSchedule& s, const Tensor3<Scalar>& z_t,
                             const Tensor3<Scalar>& eps_hat, int t) {
    detail::check_step(s, t);
    detail::check_same_shape(z_t, eps_hat, "predicted_z0");
    const double a_t = s.alpha_bar(t);
    const auto c1 = static_cast<Scalar>(std::sqrt(1.0 - a_t));
    const auto inv = static_cast<Scalar>(1.0 / std::sqrt(a_t));
    Tensor3<Scalar> out(z_t.channels(), z_t.height(), z_t.width());
    out.mat() = (z_t.mat() - c1 * eps_hat.mat()) * inv;
    return out;
}

/// One deterministic DDIM reverse step (sigma_t = 0):
///   z_{t-1} = sqrt(a_{t-1}) * predicted_z0 + sqrt(1 - a_{t-1}) * eps_hat.
template <typename Scalar>
Tensor3<Scalar> reverse_step(const DiffusionSchedule& s, const Tensor3<Scalar>& z_t,
                             const Tensor3<Scalar>& eps_hat, int t) {
    Tensor3<Scalar> pred = predicted_z0(s, z_t, eps_hat, t);
    const double a_prev = s.alpha_bar(t - 1);
    const auto c1 = static_cast<Scalar>(std::sqrt(a_prev));
    const auto c2 = static_cast<Scalar>(std::sqrt(1.0 - a_prev));
    Tensor3<Scalar> out(z_t.channels(), z_t.height(), z_t.width());
    out.mat() = c1 * pred.mat() + c2 * eps_hat.mat();
    return out;
}

/// Marginal noising straight to level t:
///   z_t = sqrt(a_t) * z0 + sqrt(1 - a_t) * eps. Valid for t in [0, T].
template <typename Scalar>
Tensor3<Scalar> direct_noise_to(const DiffusionSchedule& s, const Tensor3<Scalar>& z0, int t,
                                const Tensor3<Scalar>& eps) {
    detail::check_same_shape(z0, eps, "direct_noise_to");
    const double a_t = s.alpha_bar(t);
    if (t == 0) {
        return z0; // a_0 = 1 exactly
    }
    const auto c1 = static_cast<Scalar>(std::sqrt(a_t));
    const auto c2 = static_cast<Scalar>(std::sqrt(1.0 - a_t));
    Tensor3<Scalar> out(z0.channels(), z0.height(), z0.width());
    out.mat() = c1 * z0.mat() + c2 * eps.mat();
    return out;
}

} // namespace strdp
