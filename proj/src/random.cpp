#include "esd/random.hpp"

#include <cmath>
#include <numbers>

namespace esd {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
constexpr int kRounds = 10;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t join(std::uint32_t hi, std::uint32_t lo) {
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const {
    Key key = key_;
    for (int r = 0; r < kRounds; ++r) {
        if (r > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

std::array<double, 4> NormalStream::step(std::uint64_t index) const {
    std::array<double, 4> out{};
    const auto path_lo = static_cast<std::uint32_t>(path_);
    const auto path_hi = static_cast<std::uint32_t>(path_ >> 32) & 0x7FFFFFFFu;
    for (std::uint32_t lane = 0; lane < 2; ++lane) {
        const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                         path_lo, path_hi | (lane << 31)};
        const auto bits = philox_(ctr);
        const double u1 = to_open_unit(join(bits[0], bits[1]));
        const double u2 = to_open_unit(join(bits[2], bits[3]));
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[2 * lane] = radius * std::cos(angle);
        out[2 * lane + 1] = radius * std::sin(angle);
    }
    return out;
}

}  // namespace esd
