#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "hfsnn/market_data.hpp"

namespace hfsnn {

/// Binary container for feature matrices and spike tensors.
///
/// Layout (all integers little-endian):
///
///   offset  size  field
///   0       4     magic "HFST"
///   4       2     version (1)
///   6       1     kind: 1 = f64 feature matrix, 2 = bit-packed spike tensor
///   7       1     reserved, 0
///   8       8     N  (timestamps / rows)
///   16      8     K  (channels)
///   24      8     T  (timesteps; 1 for feature matrices)
///   32      8     first bar index of row 0
///   40      ...   payload
///
/// Feature payload: N*K IEEE-754 doubles, row-major.
/// Spike payload: ceil(N*K*T / 8) bytes; element i of the flat (n, k, t)
/// index sits in bit (i % 8) of byte (i / 8), LSB first.
inline constexpr std::uint16_t kContainerVersion = 1;

enum class ContainerKind : std::uint8_t { kFeatures = 1, kSpikes = 2 };

void write_features(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_features(std::istream& in);

void write_spikes(std::ostream& out, const SpikeTensor& spikes, std::uint64_t first_bar = 0);
SpikeTensor read_spikes(std::istream& in, std::uint64_t* first_bar = nullptr);

void save_features(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix load_features(const std::filesystem::path& path);
void save_spikes(const std::filesystem::path& path, const SpikeTensor& spikes, std::uint64_t first_bar = 0);
SpikeTensor load_spikes(const std::filesystem::path& path, std::uint64_t* first_bar = nullptr);

}  // namespace hfsnn
