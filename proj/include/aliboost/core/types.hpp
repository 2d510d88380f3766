#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace aliboost {

// Strong identifiers. Values are dense indices assigned at creation time.
struct UserId {
    std::int32_t value = -1;
    auto operator<=>(const UserId&) const = default;
};

struct ItemId {
    std::int32_t value = -1;
    auto operator<=>(const ItemId&) const = default;
};

struct CategoryId {
    std::int32_t value = -1;
    auto operator<=>(const CategoryId&) const = default;
};

using Slot = std::int32_t;
using Vec = std::vector<double>;

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

using Rng = std::mt19937_64;

/// Independent, reproducible RNG stream derived from a run seed and a stream tag.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5eedu};
    return Rng(seq);
}

/// splitmix64 finalizer; used for stable item hashing (A/B buckets, embedding init).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace aliboost

template <>
struct std::hash<aliboost::UserId> {
    std::size_t operator()(const aliboost::UserId& id) const noexcept {
        return std::hash<std::int32_t>{}(id.value);
    }
};

template <>
struct std::hash<aliboost::ItemId> {
    std::size_t operator()(const aliboost::ItemId& id) const noexcept {
        return std::hash<std::int32_t>{}(id.value);
    }
};

template <>
struct std::hash<aliboost::CategoryId> {
    std::size_t operator()(const aliboost::CategoryId& id) const noexcept {
        return std::hash<std::int32_t>{}(id.value);
    }
};
