#pragma once

#include <string>

#include "gzm/harness.hpp"
#include "gzm/synth.hpp"

namespace gzm {

/// Everything a run needs, resolvable from one JSON file. Unknown keys are
/// rejected at every level.
struct RunConfig {
    std::uint64_t seed = 1;
    SynthConfig synth;
    VqVaeConfig vqvae;
    GeneratorConfig generator;
    GridConfig grid;

    /// Propagate the top-level seed into sections that kept their defaults.
    void resolve_seeds();
};

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

/// Parse a bare grid object, e.g. {"input_frames":[8],"modes":["CS"]}.
GridConfig grid_config_from_json(const std::string& text);
GridConfig load_grid_config(const std::string& path);

std::string vqvae_config_to_json(const VqVaeConfig& cfg);
VqVaeConfig vqvae_config_from_json(const std::string& text);
std::string generator_config_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const std::string& text);

}  // namespace gzm
