#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cotgate {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// FNV-1a, for manifest content digests (not cryptographic).
inline uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0; // population
};

inline MeanStd mean_std(std::span<const double> xs) {
    MeanStd out;
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - out.mean;
        ss += d * d;
    }
    out.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
    return out;
}

} // namespace cotgate
