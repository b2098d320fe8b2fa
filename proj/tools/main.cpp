// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: style transfers, strength sweeps, ablation grids,
// metrics, and model initialization. Every run writes a JSON report with the
// seeds, resolved T', timings, and a hash of the resolved configuration.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "strdp/config.hpp"
#include "strdp/container.hpp"
#include "strdp/histogram.hpp"
#include "strdp/image_io.hpp"
#include "strdp/metrics.hpp"
#include "strdp/pipeline.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace strdp;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::string> content, style, mode, trajectory, codec;
    std::optional<double> strength;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    bool match_colors = false;
    bool dump_latents = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_job_flags) {
    cmd->add_option("--config", f.config_path, "config file (key = value sections)");
    cmd->add_option("-o,--outdir", f.out_dir, "output directory");
    cmd->add_option("--steps", f.steps, "schedule steps T");
    cmd->add_option("--codec", f.codec, "identity | toy");
    if (with_job_flags) {
        cmd->add_option("--content", f.content, "content image (PNG)");
        cmd->add_option("--style", f.style, "style image (PNG)");
        cmd->add_option("-S,--strength", f.strength, "strength in [0, 1]");
        cmd->add_option("--seed", f.seed, "job seed");
        cmd->add_option("--mode", f.mode,
                        "strdp | adain_on_noise | adain_on_latent | wct_features | "
                        "plain_reconstruct");
        cmd->add_option("--trajectory", f.trajectory, "iterative | direct");
        cmd->add_flag("--match-colors", f.match_colors,
                      "histogram-match output colors against the style image");
        cmd->add_flag("--dump-latents", f.dump_latents,
                      "write intermediate latents to a container");
    }
}

/// File config first, then flag overrides, reusing the config validators.
Settings resolve_settings(const CommonFlags& f) {
    Settings s = f.config_path.empty() ? Settings{} : parse_config_file(f.config_path);
    if (f.steps) apply_setting(s, "schedule", "steps", std::to_string(*f.steps));
    if (f.codec) apply_setting(s, "codec", "codec", *f.codec);
    if (f.content) apply_setting(s, "job", "content", *f.content);
    if (f.style) apply_setting(s, "job", "style", *f.style);
    if (f.strength) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", *f.strength);
        apply_setting(s, "job", "S", buf);
    }
    if (f.seed) apply_setting(s, "job", "seed", std::to_string(*f.seed));
    if (f.mode) apply_setting(s, "job", "mode", *f.mode);
    if (f.trajectory) apply_setting(s, "job", "trajectory", *f.trajectory);
    if (f.match_colors) apply_setting(s, "job", "match_colors", "true");
    if (f.dump_latents) apply_setting(s, "job", "dump_latents", "true");
    return s;
}

void require_images(const Settings& s) {
    if (s.job.content_path.empty() || s.job.style_path.empty()) {
        throw ConfigError("a content and a style image are required (--content/--style or the "
                          "[job] section)");
    }
}

std::string format_strength(double S) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", S);
    return buf;
}

ordered_json base_report(const std::string& command, const Settings& s) {
    ordered_json j;
    j["command"] = command;
    j["config_hash"] = config_fingerprint(s);
    j["schedule"] = {{"steps", s.engine.schedule.steps},
                     {"beta_start", s.engine.schedule.beta_start},
                     {"beta_end", s.engine.schedule.beta_end},
                     {"train_steps", s.engine.schedule.train_steps}};
    j["seeds"] = {{"job", s.job.seed},
                  {"denoiser", s.engine.denoiser_seed},
                  {"codec", s.engine.codec.seed}};
    return j;
}

ordered_json timing_json(const TransferReport& r) {
    return {{"encode", r.encode_ms},
            {"forward", r.forward_ms},
            {"reverse", r.reverse_ms},
            {"decode", r.decode_ms},
            {"total", r.total_ms}};
}

void write_report(const fs::path& dir, const ordered_json& j) {
    std::ofstream out(dir / "report.json");
    if (!out) {
        throw IoError("cannot write report to " + (dir / "report.json").string());
    }
    out << j.dump(2) << "\n";
}

TransferJob<double> load_job(const Settings& s) {
    TransferJob<double> job;
    job.content = read_image(s.job.content_path);
    job.style = read_image(s.job.style_path);
    job.strength = s.job.strength;
    job.seed = s.job.seed;
    job.mode = s.job.mode;
    job.trajectory = s.job.trajectory;
    return job;
}

void dump_latents_container(const fs::path& path, const LatentDump<double>& dump) {
    std::vector<ArrayEntry> entries;
    const auto add = [&entries](const std::string& name, const Tensor3<double>& t) {
        entries.push_back({name,
                           {static_cast<std::uint64_t>(t.channels()),
                            static_cast<std::uint64_t>(t.height()),
                            static_cast<std::uint64_t>(t.width())},
                           std::vector<double>(t.data(), t.data() + t.size())});
    };
    add("z_c0", dump.z_c0);
    add("z_s0", dump.z_s0);
    add("z_cT", dump.z_cT);
    add("z_hat0", dump.z_hat0);
    for (std::size_t t = 0; t < dump.style_trajectory.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj.%04zu", t);
        add(name, dump.style_trajectory[t]);
    }
    save_container(path.string(), entries);
}

struct MetricsRow {
    std::string job_id;
    double strength;
    double style_loss, content_loss, psnr_db, ssim_val;
};

MetricsRow compute_metrics(const std::string& job_id, double S, const Tensor3<double>& image,
                           const Tensor3<double>& content, const Tensor3<double>& style,
                           const FeatureExtractor<double>& fe) {
    return {job_id,
            S,
            gram_style_loss(image, style, fe),
            content_loss(image, content, fe),
            psnr(image, content),
            ssim(image, content)};
}

void write_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "job_id,S,style_loss,content_loss,psnr,ssim\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.4g,%.8g,%.8g,%.8g,%.8g\n", r.job_id.c_str(),
                      r.strength, r.style_loss, r.content_loss, r.psnr_db, r.ssim_val);
        out << buf;
    }
}

int cmd_transfer(const CommonFlags& flags, const Settings& s) {
    require_images(s);
    const fs::path dir(flags.out_dir);
    fs::create_directories(dir);

    Engine<double> engine = make_engine(s.engine);
    TransferJob<double> job = load_job(s);
    LatentDump<double> dump;
    TransferResult<double> result =
        run_style_transfer(job, engine, s.job.dump_latents ? &dump : nullptr);
    if (s.job.match_colors) {
        result.image = histogram_match(result.image, job.style);
    }
    write_image((dir / "stylized.png").string(), result.image);

    ordered_json rep = base_report("transfer", s);
    rep["job"] = {{"S", s.job.strength},
                  {"mode", result.report.mode},
                  {"trajectory", result.report.trajectory},
                  {"t_prime", result.report.t_prime},
                  {"match_colors", s.job.match_colors}};
    rep["seeds"]["style_stream"] = result.report.style_stream_seed;
    rep["seeds"]["content_stream"] = result.report.content_stream_seed;
    rep["timings_ms"] = timing_json(result.report);
    rep["outputs"] = {"stylized.png"};
    if (s.job.dump_latents) {
        dump_latents_container(dir / "latents.strd", dump);
        rep["outputs"].push_back("latents.strd");
    }
    write_report(dir, rep);
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const Settings& s, std::vector<double> strengths) {
    require_images(s);
    if (strengths.empty()) {
        strengths = {0.1, 0.3, 0.5, 0.7, 0.9};
    }
    const fs::path dir(flags.out_dir);
    fs::create_directories(dir);

    Engine<double> engine = make_engine(s.engine);
    TransferJob<double> job = load_job(s);
    const FeatureExtractor<double> fe(0);

    ordered_json rep = base_report("sweep", s);
    rep["outputs"] = ordered_json::array();
    ordered_json runs = ordered_json::array();
    std::vector<MetricsRow> rows;
    for (double S : strengths) {
        job.strength = S; // validated inside strength_to_steps
        TransferResult<double> result = run_style_transfer(job, engine);
        const std::string stem = "sweep_S" + format_strength(S);
        write_image((dir / (stem + ".png")).string(), result.image);
        rows.push_back(compute_metrics(stem, S, result.image, job.content, job.style, fe));
        rep["outputs"].push_back(stem + ".png");
        runs.push_back({{"S", S},
                        {"t_prime", result.report.t_prime},
                        {"timings_ms", timing_json(result.report)}});
    }
    write_csv(dir / "sweep.csv", rows);
    rep["outputs"].push_back("sweep.csv");
    rep["runs"] = runs;
    write_report(dir, rep);
    return 0;
}

int cmd_ablate(const CommonFlags& flags, const Settings& s) {
    require_images(s);
    const fs::path dir(flags.out_dir);
    fs::create_directories(dir);

    Engine<double> engine = make_engine(s.engine);
    TransferJob<double> job = load_job(s);

    // The four feature-space variants, labelled a-d.
    const std::pair<const char*, TransferMode> variants[] = {
        {"mode_a", TransferMode::Strdp},
        {"mode_b", TransferMode::AdainOnNoise},
        {"mode_c", TransferMode::AdainOnLatent},
        {"mode_d", TransferMode::WctFeatures},
    };

    ordered_json rep = base_report("ablate", s);
    rep["job"] = {{"S", s.job.strength}, {"trajectory", to_string(s.job.trajectory)}};
    rep["outputs"] = ordered_json::array();
    ordered_json runs = ordered_json::array();
    for (const auto& [name, mode] : variants) {
        job.mode = mode;
        TransferResult<double> result = run_style_transfer(job, engine);
        write_image((dir / (std::string(name) + ".png")).string(), result.image);
        rep["outputs"].push_back(std::string(name) + ".png");
        runs.push_back({{"variant", name},
                        {"mode", result.report.mode},
                        {"t_prime", result.report.t_prime},
                        {"timings_ms", timing_json(result.report)}});
    }
    rep["runs"] = runs;
    write_report(dir, rep);
    return 0;
}

int cmd_metrics(const CommonFlags& flags, const Settings& s, const std::string& image_path,
                const std::string& job_id) {
    require_images(s);
    if (image_path.empty()) {
        throw ConfigError("metrics: --image is required");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(flags.out_dir);
    fs::create_directories(dir);

    const Tensor3<double> image = read_image(image_path);
    const Tensor3<double> content = read_image(s.job.content_path);
    const Tensor3<double> style = read_image(s.job.style_path);
    const FeatureExtractor<double> fe(0);
    const std::string id = job_id.empty() ? fs::path(image_path).stem().string() : job_id;

    std::vector<MetricsRow> rows{
        compute_metrics(id, s.job.strength, image, content, style, fe)};
    write_csv(dir / "metrics.csv", rows);

    ordered_json rep = base_report("metrics", s);
    rep["inputs"] = {{"image", image_path},
                     {"content", s.job.content_path},
                     {"style", s.job.style_path}};
    rep["outputs"] = {"metrics.csv"};
    rep["timings_ms"] = {
        {"total",
         std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
             .count()}};
    write_report(dir, rep);
    return 0;
}

int cmd_init_model(const CommonFlags& flags, const Settings& s, const std::string& out_name) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(flags.out_dir);
    fs::create_directories(dir);

    // Build with seeds; export for later runs with [denoiser] weights = ...
    EngineSettings es = s.engine;
    Engine<double> engine = make_engine(es);
    std::vector<ArrayEntry> entries = engine.denoiser.export_params("denoiser");
    for (auto& e : engine.codec->export_params("codec")) {
        entries.push_back(std::move(e));
    }
    const std::string name = out_name.empty() ? "weights.strd" : out_name;
    save_container((dir / name).string(), entries);

    ordered_json rep = base_report("init-model", s);
    rep["outputs"] = {name};
    rep["entry_count"] = entries.size();
    rep["timings_ms"] = {
        {"total",
         std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
             .count()}};
    write_report(dir, rep);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free image style transfer via statistics-constrained reverse "
                 "diffusion in a latent space"};
    app.require_subcommand(1);

    CommonFlags transfer_flags, sweep_flags, ablate_flags, metrics_flags, init_flags;
    std::vector<double> strengths;
    std::string image_path, job_id, init_out;

    CLI::App* transfer = app.add_subcommand("transfer", "stylize one content/style pair");
    add_common_flags(transfer, transfer_flags, true);

    CLI::App* sweep = app.add_subcommand("sweep", "run a list of strengths, with metrics CSV");
    add_common_flags(sweep, sweep_flags, true);
    sweep->add_option("--strengths", strengths, "comma-separated strengths")->delimiter(',');

    CLI::App* ablate = app.add_subcommand("ablate", "run the four feature-space variants a-d");
    add_common_flags(ablate, ablate_flags, true);

    CLI::App* metrics = app.add_subcommand("metrics", "score an output against content/style");
    add_common_flags(metrics, metrics_flags, true);
    metrics->add_option("--image", image_path, "stylized image to score")->required();
    metrics->add_option("--job-id", job_id, "identifier for the CSV row");

    CLI::App* init_model = app.add_subcommand("init-model", "write seeded weights container");
    add_common_flags(init_model, init_flags, false);
    init_model->add_option("--name", init_out, "container file name (default weights.strd)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const CommonFlags* flags = nullptr;
    if (transfer->parsed()) flags = &transfer_flags;
    else if (sweep->parsed()) flags = &sweep_flags;
    else if (ablate->parsed()) flags = &ablate_flags;
    else if (metrics->parsed()) flags = &metrics_flags;
    else flags = &init_flags;

    Settings settings;
    try {
        settings = resolve_settings(*flags);
        if (transfer->parsed() || sweep->parsed() || ablate->parsed() || metrics->parsed()) {
            require_images(settings);
        }
        if (metrics->parsed() && image_path.empty()) {
            throw ConfigError("metrics: --image is required");
        }
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (transfer->parsed()) return cmd_transfer(transfer_flags, settings);
        if (sweep->parsed()) return cmd_sweep(sweep_flags, settings, strengths);
        if (ablate->parsed()) return cmd_ablate(ablate_flags, settings);
        if (metrics->parsed()) return cmd_metrics(metrics_flags, settings, image_path, job_id);
        return cmd_init_model(init_flags, settings, init_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
