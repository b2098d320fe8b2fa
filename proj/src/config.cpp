// SPDX-License-Identifier: Apache-2.0

#include "strdp/config.hpp"

#include <cerrno>
#include <charconv>
#include <fstream>
#include <sstream>

#include "strdp/container.hpp"
#include "strdp/rng.hpp"

namespace strdp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long n = std::stoll(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" + v +
                          "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(parse_int(key, trim(item))));
    }
    if (out.empty()) {
        throw ConfigError("config: key '" + key + "' expects a comma-separated integer list");
    }
    return out;
}

} // namespace

TransferMode parse_transfer_mode(const std::string& v) {
    if (v == "strdp") return TransferMode::Strdp;
    if (v == "adain_on_noise") return TransferMode::AdainOnNoise;
    if (v == "adain_on_latent") return TransferMode::AdainOnLatent;
    if (v == "wct_features") return TransferMode::WctFeatures;
    if (v == "plain_reconstruct") return TransferMode::PlainReconstruct;
    throw ConfigError("config: unknown mode '" + v +
                      "' (expected strdp | adain_on_noise | adain_on_latent | wct_features | "
                      "plain_reconstruct)");
}

TrajectoryMode parse_trajectory_mode(const std::string& v) {
    if (v == "iterative") return TrajectoryMode::Iterative;
    if (v == "direct") return TrajectoryMode::Direct;
    throw ConfigError("config: unknown trajectory '" + v + "' (expected iterative | direct)");
}

void apply_setting(Settings& s, const std::string& section, const std::string& key,
                   const std::string& value) {
    if (section == "schedule") {
        if (key == "steps") {
            s.engine.schedule.steps = static_cast<int>(parse_int(key, value));
        } else if (key == "beta_start") {
            s.engine.schedule.beta_start = parse_double(key, value);
        } else if (key == "beta_end") {
            s.engine.schedule.beta_end = parse_double(key, value);
        } else if (key == "train_steps") {
            s.engine.schedule.train_steps = static_cast<int>(parse_int(key, value));
        } else if (key == "beta_law") {
            if (value == "linear") {
                s.engine.schedule.beta_law = BetaLaw::Linear;
            } else if (value == "scaled_linear") {
                s.engine.schedule.beta_law = BetaLaw::ScaledLinear;
            } else {
                throw ConfigError("config: unknown beta_law '" + value + "'");
            }
        } else {
            throw ConfigError("config: unknown key '" + key + "' in [schedule]");
        }
    } else if (section == "codec") {
        if (key == "codec") {
            if (value == "identity") {
                s.engine.codec.kind = CodecKind::Identity;
            } else if (value == "toy") {
                s.engine.codec.kind = CodecKind::Toy;
            } else {
                throw ConfigError("config: unknown codec '" + value +
                                  "' (expected identity | toy)");
            }
        } else if (key == "factor") {
            s.engine.codec.factor = static_cast<int>(parse_int(key, value));
        } else if (key == "latent_channels") {
            s.engine.codec.latent_channels = static_cast<int>(parse_int(key, value));
        } else if (key == "seed") {
            s.engine.codec.seed = parse_seed(key, value);
        } else {
            throw ConfigError("config: unknown key '" + key + "' in [codec]");
        }
    } else if (section == "denoiser") {
        if (key == "levels") {
            s.engine.denoiser.levels = static_cast<int>(parse_int(key, value));
        } else if (key == "base_channels") {
            s.engine.denoiser.base_channels = static_cast<int>(parse_int(key, value));
        } else if (key == "channel_mult") {
            s.engine.denoiser.channel_mult = parse_int_list(key, value);
        } else if (key == "groups") {
            s.engine.denoiser.norm_groups = static_cast<int>(parse_int(key, value));
        } else if (key == "time_embed_dim") {
            s.engine.denoiser.time_embed_dim = static_cast<int>(parse_int(key, value));
        } else if (key == "seed") {
            s.engine.denoiser_seed = parse_seed(key, value);
        } else if (key == "weights") {
            s.engine.weights_path = value;
        } else {
            throw ConfigError("config: unknown key '" + key + "' in [denoiser]");
        }
    } else if (section == "job") {
        if (key == "S") {
            const double v = parse_double(key, value);
            if (!(v >= 0.0) || !(v <= 1.0)) {
                throw RangeError("config: S must lie in [0, 1], got " + value);
            }
            s.job.strength = v;
        } else if (key == "seed") {
            s.job.seed = parse_seed(key, value);
        } else if (key == "mode") {
            s.job.mode = parse_transfer_mode(value);
        } else if (key == "trajectory") {
            s.job.trajectory = parse_trajectory_mode(value);
        } else if (key == "content") {
            s.job.content_path = value;
        } else if (key == "style") {
            s.job.style_path = value;
        } else if (key == "match_colors") {
            s.job.match_colors = parse_bool(key, value);
        } else if (key == "dump_latents") {
            s.job.dump_latents = parse_bool(key, value);
        } else {
            throw ConfigError("config: unknown key '" + key + "' in [job]");
        }
    } else {
        throw ConfigError("config: unknown section [" + section + "]");
    }
}

Settings parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path);
    }
    Settings s;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError("config " + path + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config " + path + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config " + path + ":" + std::to_string(lineno) + ": key '" + key +
                              "' appears before any [section]");
        }
        apply_setting(s, section, key, value);
    }
    return s;
}

std::string serialize_settings(const Settings& s) {
    std::ostringstream o;
    o << "[schedule]\n";
    o << "steps = " << s.engine.schedule.steps << "\n";
    o << "beta_start = " << s.engine.schedule.beta_start << "\n";
    o << "beta_end = " << s.engine.schedule.beta_end << "\n";
    o << "train_steps = " << s.engine.schedule.train_steps << "\n";
    o << "beta_law = "
      << (s.engine.schedule.beta_law == BetaLaw::Linear ? "linear" : "scaled_linear") << "\n";
    o << "[codec]\n";
    o << "codec = " << (s.engine.codec.kind == CodecKind::Identity ? "identity" : "toy") << "\n";
    o << "factor = " << s.engine.codec.factor << "\n";
    o << "latent_channels = " << s.engine.codec.latent_channels << "\n";
    o << "seed = " << s.engine.codec.seed << "\n";
    o << "[denoiser]\n";
    o << "levels = " << s.engine.denoiser.levels << "\n";
    o << "base_channels = " << s.engine.denoiser.base_channels << "\n";
    if (!s.engine.denoiser.channel_mult.empty()) {
        o << "channel_mult = ";
        for (std::size_t i = 0; i < s.engine.denoiser.channel_mult.size(); ++i) {
            o << (i ? "," : "") << s.engine.denoiser.channel_mult[i];
        }
        o << "\n";
    }
    o << "groups = " << s.engine.denoiser.norm_groups << "\n";
    o << "time_embed_dim = " << s.engine.denoiser.time_embed_dim << "\n";
    o << "seed = " << s.engine.denoiser_seed << "\n";
    if (!s.engine.weights_path.empty()) {
        o << "weights = " << s.engine.weights_path << "\n";
    }
    o << "[job]\n";
    o << "S = " << s.job.strength << "\n";
    o << "seed = " << s.job.seed << "\n";
    o << "mode = " << to_string(s.job.mode) << "\n";
    o << "trajectory = " << to_string(s.job.trajectory) << "\n";
    if (!s.job.content_path.empty()) {
        o << "content = " << s.job.content_path << "\n";
    }
    if (!s.job.style_path.empty()) {
        o << "style = " << s.job.style_path << "\n";
    }
    o << "match_colors = " << (s.job.match_colors ? "true" : "false") << "\n";
    o << "dump_latents = " << (s.job.dump_latents ? "true" : "false") << "\n";
    return o.str();
}

std::string config_fingerprint(const Settings& s) {
    const std::string text = serialize_settings(s);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Engine<double> make_engine(const EngineSettings& s) {
    EngineSettings resolved = s;
    DenoiserConfig dcfg = resolved.denoiser;
    auto codec = make_codec<double>(resolved.codec);
    dcfg.latent_channels = codec->latent_channels();
    Engine<double> engine{DiffusionSchedule::build(resolved.schedule), std::move(codec),
                          Denoiser<double>(dcfg, resolved.denoiser_seed)};
    if (!resolved.weights_path.empty()) {
        const auto entries = load_container(resolved.weights_path);
        engine.denoiser.import_params("denoiser", entries);
        if (auto* toy = dynamic_cast<ToyCodec<double>*>(engine.codec.get())) {
            toy->import_params("codec", entries);
        }
    }
    return engine;
}

} // namespace strdp
