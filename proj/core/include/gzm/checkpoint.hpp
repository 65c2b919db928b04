#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gzm/generator.hpp"
#include "gzm/tensor.hpp"
#include "gzm/vqvae.hpp"

namespace gzm {

// Binary checkpoint layout (all integers little-endian):
//   magic "GZMV" | u32 version | u32 section_count
//   section: u32 name_len | name | u64 config_len | config JSON
//            | u64 log_len | log JSON | u32 tensor_count
//   tensor:  u32 name_len | name | u32 rank | u32 dims[rank] | f64 values
// Floats are raw IEEE-754 doubles, so round trips are bitwise exact.

constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointSection {
    std::string name;
    std::string config_json;
    std::string log_json;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& tensor(const std::string& tensor_name) const;
};

struct Checkpoint {
    std::vector<CheckpointSection> sections;

    const CheckpointSection* find(const std::string& name) const;
    const CheckpointSection& require(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

/// Model <-> section converters. Generator checkpoints embed the VQ-VAE
/// section as well so prediction runs from a single file.
CheckpointSection vqvae_to_section(VqVae& model, const std::string& log_json = "{}");
VqVae vqvae_from_section(const CheckpointSection& section);

CheckpointSection generator_to_section(Generator& model, const std::string& log_json = "{}");
Generator generator_from_section(const CheckpointSection& section, const VqVae& vqvae);

}  // namespace gzm
