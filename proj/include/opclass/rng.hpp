#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace opclass {

// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

namespace detail {

inline void hash_part(std::uint64_t& h, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    h = fnv1a64(b, 8, h);
}

inline void hash_part(std::uint64_t& h, std::string_view s) { h = fnv1a64(s.data(), s.size(), h); }

inline void hash_part(std::uint64_t& h, const std::string& s) {
    hash_part(h, std::string_view(s));
}

inline void hash_part(std::uint64_t& h, const char* s) { hash_part(h, std::string_view(s)); }

inline void hash_part(std::uint64_t& h, int v) {
    hash_part(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
}

} // namespace detail

// Component seed = hash of (master seed, component name, coordinates...).
// A 0xff byte precedes every part so adjacent strings cannot alias.
template <class... Parts>
std::uint64_t derive_seed(std::uint64_t master, Parts&&... parts) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::hash_part(h, master);
    const unsigned char sep = 0xff;
    ((h = fnv1a64(&sep, 1, h), detail::hash_part(h, parts)), ...);
    return splitmix64(h);
}

// Seeded random stream with self-contained draw algorithms, so identical
// seeds replay identically on any platform or standard library.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t threshold = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            const std::uint64_t v = next_u64();
            if (v < threshold) return v % n;
        }
    }

    // Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace opclass
