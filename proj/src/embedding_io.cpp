#include <cmath>

#include "binary_io.hpp"
#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"

namespace memfuse::data {

namespace {

constexpr std::string_view kMagic = "MEMB";
constexpr std::size_t kHeaderBytes = 16;

}  // namespace

std::vector<std::uint8_t> encode_embedding(const EmbeddingSequence& seq) {
    if (seq.rows.rank() != 2) throw DimensionError("embedding rows must be [L×d], got " + shape_str(seq.rows.shape()));
    if (!seq.rows.all_finite()) throw RangeError("embedding contains non-finite values");
    detail::ByteWriter w;
    w.raw(kMagic);
    w.u16(kEmbeddingVersion);
    w.u8(static_cast<std::uint8_t>(seq.modality));
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(seq.length()));
    w.u32(static_cast<std::uint32_t>(seq.width()));
    for (double v : seq.rows.data()) w.f32(static_cast<float>(v));
    w.append_crc();
    return std::move(w.bytes());
}

EmbeddingSequence decode_embedding(std::span<const std::uint8_t> bytes) {
    const std::string what = "MEMB";
    detail::ByteReader r(bytes, what);
    r.need(kHeaderBytes);
    if (r.raw(4) != kMagic) throw FormatError("MEMB: bad magic");
    const auto version = r.u16();
    if (version != kEmbeddingVersion) {
        throw VersionError("MEMB: unsupported version " + std::to_string(version));
    }
    const auto code = r.u8();
    if (code > 2) throw FormatError("MEMB: unknown modality code " + std::to_string(code));
    const auto dtype = r.u8();
    if (dtype != 0) throw FormatError("MEMB: unsupported dtype " + std::to_string(dtype));
    const std::uint64_t len = r.u32();
    const std::uint64_t width = r.u32();
    std::vector<std::string> bad;
    if (len == 0) bad.emplace_back("MEMB: sequence length L must be >= 1");
    if (width == 0) bad.emplace_back("MEMB: width d must be >= 1");
    if (!bad.empty()) throw ValidationError(std::move(bad));
    const std::uint64_t payload = len * width * 4;
    if (bytes.size() < kHeaderBytes + payload + 4) {
        throw TruncationError("MEMB: header declares " + std::to_string(len) + "x" + std::to_string(width) +
                              " floats but the file holds " + std::to_string(bytes.size()) + " bytes");
    }
    if (bytes.size() > kHeaderBytes + payload + 4) throw FormatError("MEMB: trailing bytes after checksum");
    detail::checked_body(bytes, what);

    EmbeddingSequence seq;
    seq.modality = static_cast<Modality>(code);
    seq.rows = Tensor({static_cast<std::size_t>(len), static_cast<std::size_t>(width)});
    for (auto& v : seq.rows.data()) {
        v = static_cast<double>(r.f32());
        if (!std::isfinite(v)) throw RangeError("MEMB: non-finite value in payload");
    }
    return seq;
}

void write_embedding(const EmbeddingSequence& seq, const std::filesystem::path& path) {
    detail::write_file(path.string(), encode_embedding(seq));
}

EmbeddingSequence read_embedding(const std::filesystem::path& path) {
    try {
        return decode_embedding(detail::read_file(path.string()));
    } catch (const TruncationError& e) {
        throw TruncationError(path.string() + ": " + e.what());
    } catch (const ChecksumError& e) {
        throw ChecksumError(path.string() + ": " + e.what());
    } catch (const VersionError& e) {
        throw VersionError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const RangeError& e) {
        throw RangeError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        auto v = e.violations();
        for (auto& s : v) s = path.string() + ": " + s;
        throw ValidationError(std::move(v));
    }
}

}  // namespace memfuse::data
