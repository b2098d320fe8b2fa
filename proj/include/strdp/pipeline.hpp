// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "strdp/codec.hpp"
#include "strdp/denoiser.hpp"
#include "strdp/errors.hpp"
#include "strdp/rng.hpp"
#include "strdp/schedule.hpp"
#include "strdp/stats.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

enum class TransferMode {
    Strdp,         // statistics transfer at every conv of the denoiser
    AdainOnNoise,  // AdaIN applied to the predicted noise tensors
    AdainOnLatent, // AdaIN applied between the latents before denoising
    WctFeatures,   // whitening-coloring transform at every conv
    PlainReconstruct,
};

enum class TrajectoryMode { Iterative, Direct };

inline std::string to_string(TransferMode m) {
    switch (m) {
    case TransferMode::Strdp: return "strdp";
    case TransferMode::AdainOnNoise: return "adain_on_noise";
    case TransferMode::AdainOnLatent: return "adain_on_latent";
    case TransferMode::WctFeatures: return "wct_features";
    case TransferMode::PlainReconstruct: return "plain_reconstruct";
    }
    return "?";
}

inline std::string to_string(TrajectoryMode m) {
    return m == TrajectoryMode::Iterative ? "iterative" : "direct";
}

/// The noisy latents of one image recorded over the forward diffusion,
/// indexed by noise level: latents[t] is the latent at level t, 0..T'.
template <typename Scalar>
struct StyleTrajectory {
    std::vector<Tensor3<Scalar>> latents;
    TrajectoryMode mode = TrajectoryMode::Iterative;
    std::uint64_t seed = 0;

    int t_prime() const { return static_cast<int>(latents.size()) - 1; }
};

/// Noises z0 up to level t_prime while recording every intermediate latent.
/// Iterative mode chains forward_step; direct mode samples each level from
/// the marginal form. One noise tensor is drawn per level, in level order,
/// filled in linear (channel, row, column) index order from Rng(seed).
template <typename Scalar>
StyleTrajectory<Scalar> forward_diffuse_with_history(const DiffusionSchedule& sched,
                                                     const Tensor3<Scalar>& z0, int t_prime,
                                                     std::uint64_t seed, TrajectoryMode mode) {
    if (t_prime < 0 || t_prime > sched.steps()) {
        throw RangeError("forward_diffuse: T' = " + std::to_string(t_prime) + " outside [0, " +
                         std::to_string(sched.steps()) + "]");
    }
    StyleTrajectory<Scalar> traj;
    traj.mode = mode;
    traj.seed = seed;
    traj.latents.reserve(static_cast<std::size_t>(t_prime) + 1);
    traj.latents.push_back(z0);
    Rng rng(seed);
    for (int t = 1; t <= t_prime; ++t) {
        const Tensor3<Scalar> eps =
            Tensor3<Scalar>::random_normal(z0.channels(), z0.height(), z0.width(), rng);
        if (mode == TrajectoryMode::Iterative) {
            traj.latents.push_back(forward_step(sched, traj.latents.back(), t, eps));
        } else {
            traj.latents.push_back(direct_noise_to(sched, z0, t, eps));
        }
    }
    return traj;
}

/// One reverse-step noise prediction under the selected feature-space
/// variant:
///   strdp           eps = transfer(z_t | stats captured from z_st)
///   adain_on_noise  eps = AdaIN(plain(z_t), plain(z_st))
///   adain_on_latent eps = plain(AdaIN(z_t, z_st))
///   wct_features    eps = transfer_wct(z_t | features captured from z_st)
template <typename Scalar>
Tensor3<Scalar> run_ablation_step(TransferMode mode, const Denoiser<Scalar>& d,
                                  const Tensor3<Scalar>& z_t, const Tensor3<Scalar>& z_st,
                                  int t) {
    switch (mode) {
    case TransferMode::Strdp: {
        auto [eps_style, stats] = d.forward_capture(z_st, t);
        (void)eps_style; // the style branch prediction is never consumed
        return d.forward_transfer(z_t, t, stats);
    }
    case TransferMode::AdainOnNoise:
        return adain(d.forward_plain(z_t, t), d.forward_plain(z_st, t));
    case TransferMode::AdainOnLatent:
        return d.forward_plain(adain(z_t, z_st), t);
    case TransferMode::WctFeatures: {
        auto [eps_style, feats] = d.forward_capture_features(z_st, t);
        (void)eps_style;
        return d.forward_transfer_wct(z_t, t, feats);
    }
    case TransferMode::PlainReconstruct:
        break;
    }
    throw ConfigError("run_ablation_step: mode must be one of the style-transfer variants");
}

/// Reverse diffusion from level T' down to 0 under any transfer mode. The
/// trajectory supplies the style latent at matching noise level for every
/// step; plain reconstruction ignores it.
template <typename Scalar>
Tensor3<Scalar> reverse_diffuse(const DiffusionSchedule& sched, Tensor3<Scalar> z,
                                const StyleTrajectory<Scalar>& traj, const Denoiser<Scalar>& d,
                                TransferMode mode) {
    const int t_prime = traj.t_prime();
    if (t_prime < 0 || t_prime > sched.steps()) {
        throw PipelineError("reverse_diffuse: trajectory length " +
                            std::to_string(traj.latents.size()) +
                            " does not fit the schedule (T = " +
                            std::to_string(sched.steps()) + ")");
    }
    for (int t = t_prime; t >= 1; --t) {
        const Tensor3<Scalar> eps =
            mode == TransferMode::PlainReconstruct
                ? d.forward_plain(z, t)
                : run_ablation_step(mode, d, z, traj.latents[static_cast<std::size_t>(t)], t);
        z = reverse_step(sched, z, eps, t);
    }
    return z;
}

/// The style-tracking reverse loop: at each step the stats captured from the
/// tracked style latent constrain the content pass.
template <typename Scalar>
Tensor3<Scalar> strdp_reverse(const DiffusionSchedule& sched, const Tensor3<Scalar>& z_cT,
                              const StyleTrajectory<Scalar>& traj, const Denoiser<Scalar>& d) {
    return reverse_diffuse(sched, z_cT, traj, d, TransferMode::Strdp);
}

/// Everything needed to run jobs: schedule, codec, denoiser. Shared
/// read-only between jobs.
template <typename Scalar>
struct Engine {
    DiffusionSchedule schedule;
    std::unique_ptr<Codec<Scalar>> codec;
    Denoiser<Scalar> denoiser;
};

template <typename Scalar>
struct TransferJob {
    Tensor3<Scalar> content; // 3 x H x W, values in [0, 1]
    Tensor3<Scalar> style;
    double strength = 0.5;
    std::uint64_t seed = 0;
    TransferMode mode = TransferMode::Strdp;
    TrajectoryMode trajectory = TrajectoryMode::Iterative;
};

struct TransferReport {
    int t_prime = 0;
    std::uint64_t seed = 0;
    std::uint64_t style_stream_seed = 0;
    std::uint64_t content_stream_seed = 0;
    std::string mode;
    std::string trajectory;
    double encode_ms = 0, forward_ms = 0, reverse_ms = 0, decode_ms = 0, total_ms = 0;
};

/// Optional sink for intermediate latents (--dump-latents).
template <typename Scalar>
struct LatentDump {
    Tensor3<Scalar> z_c0, z_s0, z_cT, z_hat0;
    std::vector<Tensor3<Scalar>> style_trajectory;
};

template <typename Scalar>
struct TransferResult {
    Tensor3<Scalar> image;
    TransferReport report;
};

/// Full style transfer: encode both images, noise them over T' =
/// round(S * T) levels (style with its history kept, content just to the
/// top), run the reverse loop in the selected mode, decode, clip to [0, 1].
/// Style and content noise streams are independent derivations of the job
/// seed, so swapping the style image never perturbs the content's noising.
template <typename Scalar>
TransferResult<Scalar> run_style_transfer(const TransferJob<Scalar>& job,
                                          const Engine<Scalar>& engine,
                                          LatentDump<Scalar>* dump = nullptr) {
    using Clock = std::chrono::steady_clock;
    const auto ms_since = [](Clock::time_point a, Clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };

    TransferResult<Scalar> result;
    TransferReport& rep = result.report;
    rep.seed = job.seed;
    rep.style_stream_seed = derive_seed(job.seed, "style");
    rep.content_stream_seed = derive_seed(job.seed, "content");
    rep.mode = to_string(job.mode);
    rep.trajectory = to_string(job.trajectory);

    const int t_prime = strength_to_steps(job.strength, engine.schedule.steps());
    rep.t_prime = t_prime;

    const auto t0 = Clock::now();
    const Tensor3<Scalar> z_c0 = engine.codec->encode(job.content);
    const Tensor3<Scalar> z_s0 = engine.codec->encode(job.style);
    if (z_c0.channels() != engine.denoiser.config().latent_channels) {
        throw PipelineError("engine: codec latent channels (" +
                            std::to_string(z_c0.channels()) +
                            ") do not match the denoiser config");
    }
    const auto t1 = Clock::now();
    rep.encode_ms = ms_since(t0, t1);

    const StyleTrajectory<Scalar> traj = forward_diffuse_with_history(
        engine.schedule, z_s0, t_prime, rep.style_stream_seed, job.trajectory);
    const StyleTrajectory<Scalar> content_path = forward_diffuse_with_history(
        engine.schedule, z_c0, t_prime, rep.content_stream_seed, job.trajectory);
    const Tensor3<Scalar>& z_cT = content_path.latents.back();
    const auto t2 = Clock::now();
    rep.forward_ms = ms_since(t1, t2);

    const Tensor3<Scalar> z_hat0 =
        reverse_diffuse(engine.schedule, z_cT, traj, engine.denoiser, job.mode);
    const auto t3 = Clock::now();
    rep.reverse_ms = ms_since(t2, t3);

    result.image = engine.codec->decode(z_hat0);
    result.image.mat() =
        result.image.mat().cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    const auto t4 = Clock::now();
    rep.decode_ms = ms_since(t3, t4);
    rep.total_ms = ms_since(t0, t4);

    if (dump) {
        dump->z_c0 = z_c0;
        dump->z_s0 = z_s0;
        dump->z_cT = z_cT;
        dump->z_hat0 = z_hat0;
        dump->style_trajectory = traj.latents;
    }
    return result;
}

} // namespace strdp
