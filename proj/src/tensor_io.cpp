#include "hfsnn/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hfsnn/error.hpp"

namespace hfsnn {

namespace {

constexpr std::array<char, 4> kMagic{'H', 'F', 'S', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), 8);
    if (!in) throw DataError("truncated container header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

struct Header {
    ContainerKind kind;
    std::uint64_t n, k, t, first_bar;
};

void write_header(std::ostream& out, const Header& h) {
    out.write(kMagic.data(), 4);
    const char version[2] = {static_cast<char>(kContainerVersion & 0xff), static_cast<char>(kContainerVersion >> 8)};
    out.write(version, 2);
    const char kind[2] = {static_cast<char>(h.kind), 0};
    out.write(kind, 2);
    put_u64(out, h.n);
    put_u64(out, h.k);
    put_u64(out, h.t);
    put_u64(out, h.first_bar);
}

Header read_header(std::istream& in, ContainerKind expected) {
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || magic != kMagic) throw DataError("not an HFST container");
    unsigned char meta[4];
    in.read(reinterpret_cast<char*>(meta), 4);
    if (!in) throw DataError("truncated container header");
    const std::uint16_t version = static_cast<std::uint16_t>(meta[0] | (meta[1] << 8));
    if (version != kContainerVersion) throw DataError("unsupported container version " + std::to_string(version));
    if (meta[2] != static_cast<unsigned char>(expected)) throw DataError("unexpected container kind");
    Header h{expected, 0, 0, 0, 0};
    h.n = get_u64(in);
    h.k = get_u64(in);
    h.t = get_u64(in);
    h.first_bar = get_u64(in);
    return h;
}

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

}  // namespace

void write_features(std::ostream& out, const FeatureMatrix& features) {
    write_header(out, {ContainerKind::kFeatures, features.rows(), features.cols(), 1, features.first_bar()});
    const auto values = features.values();
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (!out) throw DataError("failed writing feature container");
}

FeatureMatrix read_features(std::istream& in) {
    const Header h = read_header(in, ContainerKind::kFeatures);
    if (h.t != 1) throw DataError("feature container must have T = 1");
    std::vector<ChannelLabel> labels;
    for (std::uint64_t c = 0; c < h.k; ++c) labels.push_back({"channel", static_cast<int>(c), ChannelSign::kUnsigned});
    FeatureMatrix fm(h.n, std::move(labels), h.first_bar);
    auto values = fm.values();
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (!in) throw DataError("truncated feature payload");
    return fm;
}

void write_spikes(std::ostream& out, const SpikeTensor& spikes, std::uint64_t first_bar) {
    write_header(out, {ContainerKind::kSpikes, spikes.timestamps(), spikes.channels(), spikes.timesteps(), first_bar});
    const auto data = spikes.data();
    std::vector<char> packed((data.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1u << (i % 8)));
    out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
    if (!out) throw DataError("failed writing spike container");
}

SpikeTensor read_spikes(std::istream& in, std::uint64_t* first_bar) {
    const Header h = read_header(in, ContainerKind::kSpikes);
    SpikeTensor spikes(h.n, h.k, h.t);
    auto data = spikes.data();
    std::vector<unsigned char> packed((data.size() + 7) / 8);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!in) throw DataError("truncated spike payload");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = (packed[i / 8] >> (i % 8)) & 1u;
    if (first_bar) *first_bar = h.first_bar;
    return spikes;
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write_features(out, features);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read_features(in);
}

void save_spikes(const std::filesystem::path& path, const SpikeTensor& spikes, std::uint64_t first_bar) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write_spikes(out, spikes, first_bar);
}

SpikeTensor load_spikes(const std::filesystem::path& path, std::uint64_t* first_bar) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read_spikes(in, first_bar);
}

}  // namespace hfsnn
