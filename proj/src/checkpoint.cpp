#include "mov3d/checkpoint.h"

#include "mov3d/error.h"

namespace mov3d {

namespace {
constexpr std::string_view kMagic = "VXW1";
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

Bytes encode_checkpoint(const std::vector<NamedTensor>& tensors) {
    ByteWriter w;
    w.raw(kMagic);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.raw(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (auto e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
        for (double v : t.data()) w.f32(static_cast<float>(v));
    }
    return w.take();
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "checkpoint");
    r.expect_magic(kMagic);
    const std::uint32_t count = r.u32();
    std::vector<NamedTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor nt;
        nt.name = r.raw(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > kMaxRank) throw FormatError("checkpoint: bad rank for " + nt.name);
        Shape shape(rank);
        std::size_t numel = 1;
        for (auto& e : shape) {
            e = r.u32();
            if (e == 0) throw FormatError("checkpoint: zero extent in " + nt.name);
            numel *= e;
        }
        if (numel * 4 > r.remaining()) throw FormatError("checkpoint: truncated payload for " + nt.name);
        std::vector<double> values(numel);
        for (auto& v : values) v = r.f32();
        nt.tensor = Tensor(std::move(shape), std::move(values));
        out.push_back(std::move(nt));
    }
    if (!r.done()) throw FormatError("checkpoint: trailing bytes");
    return out;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    write_file_atomic(path, encode_checkpoint(tensors));
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

}  // namespace mov3d
