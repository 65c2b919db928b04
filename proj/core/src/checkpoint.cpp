#include "gzm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gzm/config.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace gzm {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw data_error(std::string("checkpoint truncated while reading ") + what);
    }
    return v;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw data_error(std::string("checkpoint truncated while reading ") + what);
    }
    return v;
}

std::string get_str(std::istream& in, std::uint64_t len, const char* what) {
    if (len > (1ull << 31)) throw data_error(std::string("checkpoint: unreasonable length for ") + what);
    std::string s(static_cast<std::size_t>(len), '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(len))) {
        throw data_error(std::string("checkpoint truncated while reading ") + what);
    }
    return s;
}

}  // namespace

const Tensor& CheckpointSection::tensor(const std::string& tensor_name) const {
    for (const auto& [n, t] : tensors) {
        if (n == tensor_name) return t;
    }
    throw data_error("checkpoint section '" + name + "' has no tensor '" + tensor_name + "'");
}

const CheckpointSection* Checkpoint::find(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

const CheckpointSection& Checkpoint::require(const std::string& name) const {
    const CheckpointSection* s = find(name);
    if (!s) throw data_error("checkpoint has no '" + name + "' section");
    return *s;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out.write("GZMV", 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.sections.size()));
    for (const auto& section : ckpt.sections) {
        put_str(out, section.name);
        put_u64(out, section.config_json.size());
        out.write(section.config_json.data(), static_cast<std::streamsize>(section.config_json.size()));
        put_u64(out, section.log_json.size());
        out.write(section.log_json.data(), static_cast<std::streamsize>(section.log_json.size()));
        put_u32(out, static_cast<std::uint32_t>(section.tensors.size()));
        for (const auto& [name, tensor] : section.tensors) {
            put_str(out, name);
            put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
            for (int d : tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
            out.write(reinterpret_cast<const char*>(tensor.v.data()),
                      static_cast<std::streamsize>(tensor.v.size() * sizeof(double)));
        }
    }
    if (!out) throw data_error("write to '" + path + "' failed");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "' for reading");
    char magic[4] = {};
    if (!in.read(magic, 4) || std::memcmp(magic, "GZMV", 4) != 0) {
        throw data_error("'" + path + "' is not a GZMV checkpoint");
    }
    const std::uint32_t version = get_u32(in, "version");
    if (version != kCheckpointVersion) {
        throw data_error("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ckpt;
    const std::uint32_t n_sections = get_u32(in, "section count");
    for (std::uint32_t si = 0; si < n_sections; ++si) {
        CheckpointSection section;
        section.name = get_str(in, get_u32(in, "section name length"), "section name");
        section.config_json = get_str(in, get_u64(in, "config length"), "config");
        section.log_json = get_str(in, get_u64(in, "log length"), "log");
        const std::uint32_t n_tensors = get_u32(in, "tensor count");
        for (std::uint32_t ti = 0; ti < n_tensors; ++ti) {
            const std::string name = get_str(in, get_u32(in, "tensor name length"), "tensor name");
            const std::uint32_t rank = get_u32(in, "tensor rank");
            if (rank > 8) throw data_error("checkpoint tensor '" + name + "' has absurd rank");
            std::vector<int> dims;
            for (std::uint32_t d = 0; d < rank; ++d) {
                dims.push_back(static_cast<int>(get_u32(in, "tensor dim")));
            }
            Tensor t(dims);
            if (!in.read(reinterpret_cast<char*>(t.v.data()),
                         static_cast<std::streamsize>(t.v.size() * sizeof(double)))) {
                throw data_error("checkpoint truncated inside tensor '" + name + "'");
            }
            section.tensors.emplace_back(name, std::move(t));
        }
        ckpt.sections.push_back(std::move(section));
    }
    return ckpt;
}

CheckpointSection vqvae_to_section(VqVae& model, const std::string& log_json) {
    CheckpointSection section;
    section.name = "vqvae";
    section.config_json = vqvae_config_to_json(model.config());
    section.log_json = log_json;
    for (auto& [name, p] : model.named_tensors()) section.tensors.emplace_back(name, *p);
    return section;
}

VqVae vqvae_from_section(const CheckpointSection& section) {
    const VqVaeConfig cfg = vqvae_config_from_json(section.config_json);
    VqVae model(cfg);
    for (auto& [name, p] : model.named_tensors()) {
        const Tensor& stored = section.tensor(name);
        if (stored.shape != p->shape) {
            throw data_error("checkpoint tensor '" + name + "' has mismatched shape");
        }
        p->v = stored.v;
    }
    return model;
}

CheckpointSection generator_to_section(Generator& model, const std::string& log_json) {
    CheckpointSection section;
    section.name = "generator";
    section.config_json = generator_config_to_json(model.config());
    section.log_json = log_json;
    for (auto& [name, p] : model.named_params()) section.tensors.emplace_back(name, *p);
    return section;
}

Generator generator_from_section(const CheckpointSection& section, const VqVae& vqvae) {
    const GeneratorConfig cfg = generator_config_from_json(section.config_json);
    Generator model(cfg, vqvae.codebook());
    for (auto& [name, p] : model.named_params()) {
        const Tensor& stored = section.tensor(name);
        if (stored.shape != p->shape) {
            throw data_error("checkpoint tensor '" + name + "' has mismatched shape");
        }
        p->v = stored.v;
    }
    return model;
}

}  // namespace gzm
