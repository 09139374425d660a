#ifndef KS_HASH_HPP
#define KS_HASH_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace ks {

// FNV-1a 64-bit; used for config/grid/kernel fingerprints and cache checksums.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline std::string fingerprint_of(std::string_view data) { return hex64(fnv1a64(data)); }

} // namespace ks

#endif
