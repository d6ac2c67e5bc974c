#pragma once

// Run configuration as flat `section.key = value` text. Lines starting with '#'
// and blank lines are ignored. Serialization writes every key in a fixed order
// with round-trip exact reals, so a snapshot replays the run exactly.

#include "pici/core.hpp"
#include "pici/network.hpp"
#include "pici/trainer.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pici {

/// Either a folder dataset (path) or the synthetic generator.
struct DataSpec {
    std::string path;
    bool synth = false;
    int synth_classes = 3;
    int synth_per_class = 40;
    int synth_image_size = 32;
    std::uint64_t synth_seed = 7;

    /// "synth:C,P,S,SEED" or a directory path.
    static DataSpec parse(std::string_view text);
    std::string to_string() const;
};

struct RunConfig {
    NetworkConfig model = NetworkConfig::vit_small(4);
    TrainConfig train;
    DataSpec data;
    std::string out_dir = "runs/pici";
    bool wall_time = false;
    int checkpoint_every = 10;

    void validate() const {
        model.validate();
        train.validate();
        if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every: must be >= 1");
        if (data.synth) {
            if (data.synth_classes < 1 || data.synth_per_class < 1 || data.synth_image_size < 1)
                throw ConfigError("data.synth: counts and size must be positive");
            if (data.synth_image_size % model.patch_size != 0)
                throw ConfigError("data.synth: image size must be divisible by model.patch_size");
        } else if (data.path.empty()) {
            throw ConfigError("data: set data.path or data.synth");
        }
        if (out_dir.empty()) throw ConfigError("out.dir: must not be empty");
    }

    std::string to_text() const;
    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::filesystem::path& path);
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": cannot parse '" + value + "' as a number");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

inline std::array<double, 3> parse_triple(const std::string& key, const std::string& value) {
    std::array<double, 3> out{};
    std::stringstream ss(value);
    std::string part;
    std::size_t i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= 3) throw ConfigError(key + ": expected three comma-separated reals");
        out[i++] = parse_number<double>(key, trim(part));
    }
    if (i != 3) throw ConfigError(key + ": expected three comma-separated reals");
    return out;
}

inline std::string format_triple(const std::array<double, 3>& v) {
    return format_real(v[0]) + "," + format_real(v[1]) + "," + format_real(v[2]);
}

struct ConfigField {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
    using R = RunConfig;
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        auto real = [&f](std::string key, auto getter) {
            f.push_back({key, [key, getter](R& c, const std::string& v) { getter(c) = parse_number<double>(key, v); },
                         [getter](const R& c) { return format_real(getter(c)); }});
        };
        auto integer = [&f](std::string key, auto getter) {
            f.push_back({key, [key, getter](R& c, const std::string& v) { getter(c) = parse_number<int>(key, v); },
                         [getter](const R& c) { return std::to_string(getter(c)); }});
        };
        auto boolean = [&f](std::string key, auto getter) {
            f.push_back({key, [key, getter](R& c, const std::string& v) { getter(c) = parse_bool(key, v); },
                         [getter](const R& c) { return std::string(getter(c) ? "true" : "false"); }});
        };

        integer("model.dim", [](auto& c) -> auto& { return c.model.embed_dim; });
        integer("model.layers", [](auto& c) -> auto& { return c.model.n_layers; });
        integer("model.heads", [](auto& c) -> auto& { return c.model.n_heads; });
        integer("model.decoder_dim", [](auto& c) -> auto& { return c.model.decoder_dim; });
        integer("model.decoder_layers", [](auto& c) -> auto& { return c.model.decoder_layers; });
        integer("model.decoder_heads", [](auto& c) -> auto& { return c.model.decoder_heads; });
        integer("model.patch_size", [](auto& c) -> auto& { return c.model.patch_size; });
        integer("model.image_size", [](auto& c) -> auto& { return c.model.image_size; });
        integer("model.instance_dim", [](auto& c) -> auto& { return c.model.instance_dim; });
        integer("model.clusters", [](auto& c) -> auto& { return c.model.n_clusters; });

        real("mask.ratio", [](auto& c) -> auto& { return c.train.mask_ratio; });
        boolean("mask.shared", [](auto& c) -> auto& { return c.train.mask_shared; });

        real("losses.tau_i", [](auto& c) -> auto& { return c.train.temps.tau_i; });
        real("losses.tau_c", [](auto& c) -> auto& { return c.train.temps.tau_c; });
        boolean("losses.include_self", [](auto& c) -> auto& { return c.train.include_self; });
        boolean("losses.recon_all_patches", [](auto& c) -> auto& { return c.train.recon_all_patches; });

        integer("train.e1", [](auto& c) -> auto& { return c.train.e1; });
        integer("train.e2", [](auto& c) -> auto& { return c.train.e2; });
        integer("train.e3", [](auto& c) -> auto& { return c.train.e3; });
        integer("train.batch", [](auto& c) -> auto& { return c.train.batch_size; });
        real("train.lr", [](auto& c) -> auto& { return c.train.adam.lr; });
        real("train.adam_beta1", [](auto& c) -> auto& { return c.train.adam.beta1; });
        real("train.adam_beta2", [](auto& c) -> auto& { return c.train.adam.beta2; });
        real("train.adam_eps", [](auto& c) -> auto& { return c.train.adam.eps; });
        f.push_back({"train.seed",
                     [](R& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>("train.seed", v); },
                     [](const R& c) { return std::to_string(c.train.seed); }});
        boolean("train.eps_column", [](auto& c) -> auto& { return c.train.eps_column; });
        integer("train.kmeans_iters", [](auto& c) -> auto& { return c.train.kmeans_max_iters; });
        integer("train.checkpoint_every", [](auto& c) -> auto& { return c.checkpoint_every; });

        real("augment.crop_scale_min", [](auto& c) -> auto& { return c.train.strong.crop_scale_min; });
        real("augment.crop_scale_max", [](auto& c) -> auto& { return c.train.strong.crop_scale_max; });
        real("augment.jitter", [](auto& c) -> auto& { return c.train.strong.jitter_strength; });
        real("augment.grayscale_prob", [](auto& c) -> auto& { return c.train.strong.grayscale_prob; });
        real("augment.flip_prob", [](auto& c) -> auto& { return c.train.strong.flip_prob; });
        real("augment.blur_prob", [](auto& c) -> auto& { return c.train.strong.blur_prob; });
        f.push_back({"augment.mean",
                     [](R& c, const std::string& v) {
                         if (v == "auto") {
                             c.train.normalize_from_data = true;
                             return;
                         }
                         c.train.normalize_mean = parse_triple("augment.mean", v);
                         c.train.normalize_from_data = false;
                     },
                     [](const R& c) {
                         return c.train.normalize_from_data ? std::string("auto") : format_triple(c.train.normalize_mean);
                     }});
        f.push_back({"augment.std",
                     [](R& c, const std::string& v) {
                         if (v == "auto") {
                             c.train.normalize_from_data = true;
                             return;
                         }
                         c.train.normalize_std = parse_triple("augment.std", v);
                         c.train.normalize_from_data = false;
                     },
                     [](const R& c) {
                         return c.train.normalize_from_data ? std::string("auto") : format_triple(c.train.normalize_std);
                     }});

        f.push_back({"metrics.nmi_norm",
                     [](R& c, const std::string& v) {
                         if (v == "sqrt") c.train.nmi_norm = NmiNorm::sqrt;
                         else if (v == "arithmetic") c.train.nmi_norm = NmiNorm::arithmetic;
                         else throw ConfigError("metrics.nmi_norm: expected sqrt or arithmetic, got '" + v + "'");
                     },
                     [](const R& c) { return std::string(c.train.nmi_norm == NmiNorm::sqrt ? "sqrt" : "arithmetic"); }});

        f.push_back({"data.path",
                     [](R& c, const std::string& v) {
                         if (!v.empty()) c.data = DataSpec::parse(v);
                     },
                     [](const R& c) { return c.data.synth ? std::string() : c.data.path; }});
        f.push_back({"data.synth",
                     [](R& c, const std::string& v) {
                         if (!v.empty()) c.data = DataSpec::parse("synth:" + v);
                     },
                     [](const R& c) {
                         const std::string s = c.data.synth ? c.data.to_string() : std::string();
                         return s.empty() ? s : s.substr(6);
                     }});
        f.push_back({"out.dir", [](R& c, const std::string& v) { c.out_dir = v; }, [](const R& c) { return c.out_dir; }});
        boolean("out.wall_time", [](auto& c) -> auto& { return c.wall_time; });
        return f;
    }();
    return fields;
}

/// Parses key=value lines; keys keep their file order.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        out.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    }
    return out;
}

}  // namespace detail

inline DataSpec DataSpec::parse(std::string_view text) {
    DataSpec d;
    if (text.starts_with("synth:")) {
        d.synth = true;
        std::stringstream ss{std::string(text.substr(6))};
        std::vector<std::string> parts;
        std::string part;
        while (std::getline(ss, part, ',')) parts.push_back(detail::trim(part));
        if (parts.size() != 4) throw ConfigError("data.synth: expected CLASSES,PER_CLASS,SIZE,SEED");
        d.synth_classes = detail::parse_number<int>("data.synth", parts[0]);
        d.synth_per_class = detail::parse_number<int>("data.synth", parts[1]);
        d.synth_image_size = detail::parse_number<int>("data.synth", parts[2]);
        d.synth_seed = detail::parse_number<std::uint64_t>("data.synth", parts[3]);
    } else {
        if (text.empty()) throw ConfigError("data.path: empty");
        d.path = std::string(text);
    }
    return d;
}

inline std::string DataSpec::to_string() const {
    if (!synth) return path;
    return "synth:" + std::to_string(synth_classes) + "," + std::to_string(synth_per_class) + "," +
           std::to_string(synth_image_size) + "," + std::to_string(synth_seed);
}

inline std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

/// Unknown keys are rejected except the `state.` section used by checkpoints.
inline RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, const detail::ConfigField*> by_key;
    for (const auto& f : detail::config_fields()) by_key.emplace(f.key, &f);
    for (const auto& [key, value] : detail::parse_key_values(text)) {
        if (key.starts_with("state.")) continue;
        auto it = by_key.find(key);
        if (it == by_key.end()) throw ConfigError(key + ": unknown configuration key");
        it->second->set(cfg, value);
    }
    return cfg;
}

inline RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

}  // namespace pici
