#include "gzm/config.hpp"

#include <json.hpp>

#include <fstream>

namespace gzm {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> keys, const char* ctx) {
    if (!j.is_object()) throw config_error(std::string(ctx) + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw config_error(std::string(ctx) + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json parse(const std::string& text, const char* ctx) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string(ctx) + ": " + e.what());
    }
}

SynthConfig synth_from(const json& j) {
    check_keys(j, {"subjects", "grasps_per_object", "frames", "fps", "seed"}, "synth config");
    SynthConfig cfg;
    read_if(j, "subjects", cfg.subjects);
    read_if(j, "grasps_per_object", cfg.grasps_per_object);
    read_if(j, "frames", cfg.frames);
    read_if(j, "fps", cfg.fps);
    read_if(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

ojson synth_to(const SynthConfig& cfg) {
    ojson j;
    j["subjects"] = cfg.subjects;
    j["grasps_per_object"] = cfg.grasps_per_object;
    j["frames"] = cfg.frames;
    j["fps"] = cfg.fps;
    j["seed"] = cfg.seed;
    return j;
}

VqVaeConfig vqvae_from(const json& j) {
    check_keys(j,
               {"codebook_size", "embed_dim", "downsample", "hidden_channels", "kernel_width",
                "beta", "gamma", "lr", "epochs", "batch", "seed"},
               "vqvae config");
    VqVaeConfig cfg;
    read_if(j, "codebook_size", cfg.codebook_size);
    read_if(j, "embed_dim", cfg.embed_dim);
    read_if(j, "downsample", cfg.downsample);
    read_if(j, "hidden_channels", cfg.hidden_channels);
    read_if(j, "kernel_width", cfg.kernel_width);
    read_if(j, "beta", cfg.beta);
    read_if(j, "gamma", cfg.gamma);
    read_if(j, "lr", cfg.lr);
    read_if(j, "epochs", cfg.epochs);
    read_if(j, "batch", cfg.batch);
    read_if(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

ojson vqvae_to(const VqVaeConfig& cfg) {
    ojson j;
    j["codebook_size"] = cfg.codebook_size;
    j["embed_dim"] = cfg.embed_dim;
    j["downsample"] = cfg.downsample;
    j["hidden_channels"] = cfg.hidden_channels;
    j["kernel_width"] = cfg.kernel_width;
    j["beta"] = cfg.beta;
    j["gamma"] = cfg.gamma;
    j["lr"] = cfg.lr;
    j["epochs"] = cfg.epochs;
    j["batch"] = cfg.batch;
    j["seed"] = cfg.seed;
    return j;
}

GeneratorConfig generator_from(const json& j) {
    check_keys(j,
               {"fusion", "gaze", "gaze_dim", "model_dim", "layers", "heads", "ffn_mult",
                "last_weight", "max_tokens", "lr", "epochs", "batch", "seed"},
               "generator config");
    GeneratorConfig cfg;
    if (j.contains("fusion")) cfg.fusion = fusion_mode_from_name(j.at("fusion").get<std::string>());
    read_if(j, "gaze", cfg.use_gaze);
    read_if(j, "gaze_dim", cfg.gaze_dim);
    read_if(j, "model_dim", cfg.model_dim);
    read_if(j, "layers", cfg.layers);
    read_if(j, "heads", cfg.heads);
    read_if(j, "ffn_mult", cfg.ffn_mult);
    read_if(j, "last_weight", cfg.last_weight);
    read_if(j, "max_tokens", cfg.max_tokens);
    read_if(j, "lr", cfg.lr);
    read_if(j, "epochs", cfg.epochs);
    read_if(j, "batch", cfg.batch);
    read_if(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

ojson generator_to(const GeneratorConfig& cfg) {
    ojson j;
    j["fusion"] = fusion_mode_name(cfg.fusion);
    j["gaze"] = cfg.use_gaze;
    j["gaze_dim"] = cfg.gaze_dim;
    j["model_dim"] = cfg.model_dim;
    j["layers"] = cfg.layers;
    j["heads"] = cfg.heads;
    j["ffn_mult"] = cfg.ffn_mult;
    j["last_weight"] = cfg.last_weight;
    j["max_tokens"] = cfg.max_tokens;
    j["lr"] = cfg.lr;
    j["epochs"] = cfg.epochs;
    j["batch"] = cfg.batch;
    j["seed"] = cfg.seed;
    return j;
}

GridConfig grid_from(const json& j) {
    check_keys(j,
               {"input_frames", "fusions", "gaze", "noise_levels", "modes", "folds", "seeds"},
               "grid config");
    GridConfig cfg;
    read_if(j, "input_frames", cfg.input_frames);
    if (j.contains("fusions")) {
        cfg.fusions.clear();
        for (const auto& f : j.at("fusions")) {
            cfg.fusions.push_back(fusion_mode_from_name(f.get<std::string>()));
        }
    }
    if (j.contains("gaze")) cfg.gaze_flags = j.at("gaze").get<std::vector<bool>>();
    read_if(j, "noise_levels", cfg.noise_levels);
    if (j.contains("modes")) {
        cfg.modes.clear();
        for (const auto& m : j.at("modes")) {
            cfg.modes.push_back(split_mode_from_name(m.get<std::string>()));
        }
    }
    read_if(j, "folds", cfg.folds);
    read_if(j, "seeds", cfg.seeds);
    return cfg;
}

ojson grid_to(const GridConfig& cfg) {
    ojson j;
    j["input_frames"] = cfg.input_frames;
    ojson fusions = ojson::array();
    for (FusionMode f : cfg.fusions) fusions.push_back(fusion_mode_name(f));
    j["fusions"] = std::move(fusions);
    j["gaze"] = cfg.gaze_flags;
    j["noise_levels"] = cfg.noise_levels;
    ojson modes = ojson::array();
    for (SplitMode m : cfg.modes) modes.push_back(split_mode_name(m));
    j["modes"] = std::move(modes);
    j["folds"] = cfg.folds;
    j["seeds"] = cfg.seeds;
    return j;
}

}  // namespace

void RunConfig::resolve_seeds() {
    const SynthConfig synth_defaults;
    const VqVaeConfig vq_defaults;
    const GeneratorConfig gen_defaults;
    if (synth.seed == synth_defaults.seed) synth.seed = seed;
    if (vqvae.seed == vq_defaults.seed) vqvae.seed = seed;
    if (generator.seed == gen_defaults.seed) generator.seed = seed;
    if (grid.seeds == GridConfig{}.seeds) grid.seeds = {seed};
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = parse(text, "run config");
    check_keys(j, {"seed", "synth", "vqvae", "generator", "grid"}, "run config");
    RunConfig cfg;
    read_if(j, "seed", cfg.seed);
    if (j.contains("synth")) cfg.synth = synth_from(j.at("synth"));
    if (j.contains("vqvae")) cfg.vqvae = vqvae_from(j.at("vqvae"));
    if (j.contains("generator")) cfg.generator = generator_from(j.at("generator"));
    if (j.contains("grid")) cfg.grid = grid_from(j.at("grid"));
    cfg.resolve_seeds();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
    ojson j;
    j["seed"] = cfg.seed;
    j["synth"] = synth_to(cfg.synth);
    j["vqvae"] = vqvae_to(cfg.vqvae);
    j["generator"] = generator_to(cfg.generator);
    j["grid"] = grid_to(cfg.grid);
    return j.dump(2);
}

GridConfig grid_config_from_json(const std::string& text) {
    return grid_from(parse(text, "grid config"));
}

GridConfig load_grid_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open grid config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return grid_config_from_json(text);
}

std::string vqvae_config_to_json(const VqVaeConfig& cfg) { return vqvae_to(cfg).dump(); }

VqVaeConfig vqvae_config_from_json(const std::string& text) {
    return vqvae_from(parse(text, "vqvae config"));
}

std::string generator_config_to_json(const GeneratorConfig& cfg) { return generator_to(cfg).dump(); }

GeneratorConfig generator_config_from_json(const std::string& text) {
    return generator_from(parse(text, "generator config"));
}

}  // namespace gzm
