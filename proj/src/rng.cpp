#include "hfsnn/rng.hpp"

namespace hfsnn {

std::uint64_t substream(std::uint64_t root, std::string_view name, std::uint64_t index) {
    // FNV-1a over the name, then mixed with root and index.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix(mix(root, h), index);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

}  // namespace hfsnn
