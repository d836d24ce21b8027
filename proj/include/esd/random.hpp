#pragma once

#include <array>
#include <cstdint>

namespace esd {

/// Philox-4x32-10 counter-based generator. Output is a pure function of
/// (key, counter), so any draw can be regenerated independently of the order
/// in which draws are requested.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Counter operator()(Counter ctr) const;

private:
    Key key_;
};

/// Standard normal draws addressed by (seed, path, step, component).
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path) : philox_(seed), path_(path) {}

    /// Four independent N(0,1) variates for one time step.
    std::array<double, 4> step(std::uint64_t index) const;

    std::uint64_t path() const { return path_; }

private:
    Philox4x32 philox_;
    std::uint64_t path_;
};

/// Maps 64 random bits to a double in the open interval (0, 1).
double to_open_unit(std::uint64_t bits);

}  // namespace esd
