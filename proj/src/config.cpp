#include "cgtex/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace cgtex {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& prefix) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError("unknown config key: " + prefix + key);
    }
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& prefix, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for config key: " + prefix + key);
    }
}

}  // namespace

JobConfig parse_job_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    reject_unknown(j, {"modality", "mode", "statistic", "m", "n", "channels", "K", "N", "T",
                       "lr_w", "lr_theta", "init_noise_std", "kle_weight", "seed",
                       "snapshot_interval", "sampler", "inpaint", "resize", "out_dir"},
                   "");

    JobConfig cfg;
    if (j.contains("modality"))
        cfg.modality = modality_from_string(get_as<std::string>(j, "modality", "", ""));
    if (j.contains("mode"))
        cfg.mode = train_mode_from_string(get_as<std::string>(j, "mode", "", ""));
    if (j.contains("statistic"))
        cfg.statistic = stat_kind_from_string(get_as<std::string>(j, "statistic", "", ""));
    if (j.contains("m")) cfg.m = get_as<int>(j, "m", "", 0);
    if (j.contains("n")) cfg.n = get_as<int>(j, "n", "", 0);
    if (j.contains("channels")) cfg.channels = get_as<int>(j, "channels", "", 0);
    cfg.batch = get_as<int>(j, "K", "", cfg.batch);
    cfg.langevin_steps = get_as<int>(j, "N", "", cfg.langevin_steps);
    cfg.iterations = get_as<int>(j, "T", "", cfg.iterations);
    cfg.lr_w = get_as<float>(j, "lr_w", "", cfg.lr_w);
    cfg.lr_theta = get_as<float>(j, "lr_theta", "", cfg.lr_theta);
    cfg.init_noise_std = get_as<float>(j, "init_noise_std", "", cfg.init_noise_std);
    cfg.kle_weight = get_as<float>(j, "kle_weight", "", cfg.kle_weight);
    cfg.seed = get_as<std::uint64_t>(j, "seed", "", cfg.seed);
    cfg.snapshot_interval = get_as<int>(j, "snapshot_interval", "", cfg.snapshot_interval);
    cfg.out_dir = get_as<std::string>(j, "out_dir", "", cfg.out_dir);
    if (j.contains("resize"))
        cfg.resize = get_as<std::vector<int>>(j, "resize", "", {});

    if (j.contains("sampler")) {
        const json& s = j.at("sampler");
        if (!s.is_object()) throw ConfigError("bad value for config key: sampler");
        reject_unknown(s, {"epsilon", "preconditioner", "noise"}, "sampler.");
        cfg.epsilon = get_as<float>(s, "epsilon", "sampler.", cfg.epsilon);
        if (s.contains("preconditioner"))
            cfg.preconditioner =
                opt_kind_from_string(get_as<std::string>(s, "preconditioner", "sampler.", ""));
        cfg.noise = get_as<bool>(s, "noise", "sampler.", cfg.noise);
    }

    if (j.contains("inpaint")) {
        const json& p = j.at("inpaint");
        if (!p.is_object()) throw ConfigError("bad value for config key: inpaint");
        reject_unknown(p, {"search_steps", "update_steps", "grid_stride", "border", "template",
                           "interval"},
                       "inpaint.");
        cfg.inpaint.search_steps =
            get_as<int>(p, "search_steps", "inpaint.", cfg.inpaint.search_steps);
        cfg.inpaint.update_steps =
            get_as<int>(p, "update_steps", "inpaint.", cfg.inpaint.update_steps);
        cfg.inpaint.grid_stride =
            get_as<std::vector<int>>(p, "grid_stride", "inpaint.", cfg.inpaint.grid_stride);
        cfg.inpaint.border = get_as<int>(p, "border", "inpaint.", cfg.inpaint.border);
        if (p.contains("template"))
            cfg.inpaint.template_offset =
                get_as<std::vector<int>>(p, "template", "inpaint.", {});
        if (p.contains("interval"))
            cfg.inpaint.interval =
                get_as<std::vector<std::int64_t>>(p, "interval", "inpaint.", {});
    }

    if (cfg.batch < 1) throw ConfigError("bad value for config key: K (must be >= 1)");
    if (cfg.langevin_steps < 1) throw ConfigError("bad value for config key: N (must be >= 1)");
    if (cfg.iterations < 1) throw ConfigError("bad value for config key: T (must be >= 1)");
    if (cfg.epsilon <= 0.0f)
        throw ConfigError("bad value for config key: sampler.epsilon (must be > 0)");
    return cfg;
}

JobConfig parse_job_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_job_config(text);
}

int resolved_m(const JobConfig& cfg, Modality modality) {
    if (cfg.m) return *cfg.m;
    switch (modality) {
        case Modality::image: return 9;
        case Modality::dynamic: return 6;
        case Modality::sound: return 4;
    }
    return 1;
}

int resolved_n(const JobConfig& cfg, Modality modality) {
    if (cfg.n) return *cfg.n;
    return modality == Modality::image ? 3 : 0;
}

int resolved_channels(const JobConfig& cfg, Modality modality) {
    if (cfg.channels) return *cfg.channels;
    switch (modality) {
        case Modality::image: return 64;
        case Modality::dynamic: return 32;
        case Modality::sound: return 128;
    }
    return 8;
}

int resolved_border(const JobConfig& cfg, Modality modality) {
    if (cfg.inpaint.border >= 0) return cfg.inpaint.border;
    switch (modality) {
        case Modality::image: return 4;
        case Modality::dynamic: return 2;
        case Modality::sound: return 1000;
    }
    return 0;
}

NetworkSpec resolved_spec(const JobConfig& cfg, Modality modality) {
    if (cfg.modality && *cfg.modality != modality)
        throw ConfigError("config modality " + to_string(*cfg.modality) +
                          " does not match the exemplar (" + to_string(modality) + ")");
    return NetworkSpec::make(modality, resolved_m(cfg, modality), resolved_n(cfg, modality),
                             resolved_channels(cfg, modality), cfg.statistic);
}

TrainConfig resolved_train_config(const JobConfig& cfg) {
    TrainConfig t;
    t.mode = cfg.mode;
    t.batch = cfg.batch;
    t.iterations = cfg.iterations;
    t.sampler.step_size = cfg.epsilon;
    t.sampler.steps = cfg.langevin_steps;
    t.sampler.noise = cfg.noise;
    t.sampler.preconditioner = cfg.preconditioner;
    t.weight_optimizer = cfg.preconditioner == OptKind::plain ? OptKind::adam
                                                              : cfg.preconditioner;
    t.lr_w = cfg.lr_w;
    t.lr_theta = cfg.lr_theta;
    t.init_noise_std = cfg.init_noise_std;
    t.kle_weight = cfg.kle_weight;
    t.seed = cfg.seed;
    t.snapshot_interval = cfg.snapshot_interval;
    return t;
}

std::string effective_config_json(const JobConfig& cfg, Modality modality) {
    json j;
    j["modality"] = to_string(modality);
    j["mode"] = to_string(cfg.mode);
    j["statistic"] = to_string(cfg.statistic);
    j["m"] = resolved_m(cfg, modality);
    j["n"] = resolved_n(cfg, modality);
    j["channels"] = resolved_channels(cfg, modality);
    j["K"] = cfg.batch;
    j["N"] = cfg.langevin_steps;
    j["T"] = cfg.iterations;
    j["lr_w"] = cfg.lr_w;
    j["lr_theta"] = cfg.lr_theta;
    j["init_noise_std"] = cfg.init_noise_std;
    j["kle_weight"] = cfg.kle_weight;
    j["seed"] = cfg.seed;
    j["snapshot_interval"] = cfg.snapshot_interval;
    j["sampler"] = {{"epsilon", cfg.epsilon},
                    {"preconditioner", to_string(cfg.preconditioner)},
                    {"noise", cfg.noise}};
    json ip;
    ip["search_steps"] = cfg.inpaint.search_steps;
    ip["update_steps"] = cfg.inpaint.update_steps;
    const int d = modality == Modality::image ? 2 : (modality == Modality::dynamic ? 3 : 1);
    ip["grid_stride"] = cfg.inpaint.grid_stride.empty()
                            ? default_grid_stride(modality, d)
                            : cfg.inpaint.grid_stride;
    ip["border"] = resolved_border(cfg, modality);
    if (cfg.inpaint.template_offset)
        ip["template"] = *cfg.inpaint.template_offset;
    else
        ip["template"] = nullptr;
    if (cfg.inpaint.interval)
        ip["interval"] = *cfg.inpaint.interval;
    else
        ip["interval"] = nullptr;
    j["inpaint"] = ip;
    if (cfg.resize)
        j["resize"] = *cfg.resize;
    else
        j["resize"] = nullptr;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2) + "\n";
}

}  // namespace cgtex
