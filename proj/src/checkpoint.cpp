#include "memfuse/checkpoint.hpp"

#include "binary_io.hpp"
#include "memfuse/errors.hpp"

namespace memfuse {

namespace {

constexpr std::string_view kMagic = "MMEM";
const std::string kWhat = "checkpoint";

// Walks the length fields without trusting them; true when a declared length
// runs past the end of the buffer.
bool structurally_truncated(std::span<const std::uint8_t> bytes) {
    try {
        detail::ByteReader r(bytes, kWhat);
        r.raw(4);
        r.u16();
        const auto cfg_len = r.u32();
        r.raw(cfg_len);
        const auto count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto n = r.u64();
            if (n > r.remaining() / 8) return true;
            r.raw(n * 8);
        }
        r.u32();
        return false;
    } catch (const TruncationError&) {
        return true;
    }
}

}  // namespace

std::vector<std::uint8_t> serialize(const ModelParams& params, const ModelConfig& config) {
    detail::ByteWriter w;
    w.raw(kMagic);
    w.u16(kCheckpointVersion);
    const std::string cfg = config.canonical_json();
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    w.raw(cfg);
    w.u32(static_cast<std::uint32_t>(params.tensor_count()));
    params.for_each([&](const std::string&, const Tensor& t) {
        w.u64(t.numel());
        for (double v : t.data()) w.f64(v);
    });
    w.append_crc();
    return std::move(w.bytes());
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kMagic) {
        throw FormatError("checkpoint: bad magic (expected \"MMEM\")");
    }
    std::span<const std::uint8_t> body;
    try {
        body = detail::checked_body(bytes, kWhat);
    } catch (const ChecksumError&) {
        if (structurally_truncated(bytes)) throw TruncationError("checkpoint: truncated file");
        throw;
    }

    detail::ByteReader r(body, kWhat);
    r.raw(4);
    const auto version = r.u16();
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint: unsupported format version " + std::to_string(version) + " (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    }
    const auto cfg_len = r.u32();
    const std::string cfg_text = r.raw(cfg_len);
    ModelConfig config;
    try {
        config = ModelConfig::from_json(nlohmann::json::parse(cfg_text));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: embedded config is not valid JSON: ") + e.what());
    }

    Checkpoint ck{config, build(config, 0)};
    const auto count = r.u32();
    if (count != ck.params.tensor_count()) {
        throw ConfigMismatchError("checkpoint holds " + std::to_string(count) + " tensors but its config implies " +
                                  std::to_string(ck.params.tensor_count()));
    }
    ck.params.for_each([&](const std::string& name, Tensor& t) {
        const auto n = r.u64();
        if (n != t.numel()) {
            throw ConfigMismatchError("checkpoint tensor '" + name + "' has " + std::to_string(n) +
                                      " values, config implies " + std::to_string(t.numel()));
        }
        for (auto& v : t.data()) v = r.f64();
    });
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after parameters");
    return ck;
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes, const ModelConfig& expected) {
    Checkpoint ck = deserialize(bytes);
    if (!(ck.config == expected)) {
        std::string diff;
        if (ck.config.latent_dim != expected.latent_dim) {
            diff = "latent_dim " + std::to_string(ck.config.latent_dim) + " vs expected " +
                   std::to_string(expected.latent_dim);
        } else {
            diff = ck.config.canonical_json() + " vs expected " + expected.canonical_json();
        }
        throw ConfigMismatchError("checkpoint config mismatch: " + diff);
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& config) {
    detail::write_file(path.string(), serialize(params, config));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize(detail::read_file(path.string()));
}

}  // namespace memfuse
