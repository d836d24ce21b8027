#include "esd/brownian.hpp"

#include <cmath>
#include <limits>

#include "esd/random.hpp"

namespace esd {

BrownianGrid::BrownianGrid(IncrementMatrix fine, std::size_t refinement, double dt_coarse)
    : fine_(std::move(fine)), refinement_(refinement), dt_coarse_(dt_coarse) {
    if (refinement_ == 0) throw InvalidInput("BrownianGrid: refinement must be >= 1");
    if (n_fine() % refinement_ != 0) throw InvalidInput("BrownianGrid: fine steps not a multiple of refinement");
}

Vector4d BrownianGrid::coarse_increment(std::size_t k) const {
    if (k >= n_coarse()) throw InvalidInput("BrownianGrid: coarse index out of range");
    Vector4d sum = Vector4d::Zero();
    const auto begin = static_cast<Eigen::Index>(k * refinement_);
    for (Eigen::Index j = begin; j < begin + static_cast<Eigen::Index>(refinement_); ++j) {
        sum += fine_.row(j).transpose();
    }
    return sum;
}

IncrementMatrix BrownianGrid::coarse_increments() const {
    if (refinement_ == 1) return fine_;
    IncrementMatrix out(static_cast<Eigen::Index>(n_coarse()), 4);
    for (std::size_t k = 0; k < n_coarse(); ++k) out.row(static_cast<Eigen::Index>(k)) = coarse_increment(k).transpose();
    return out;
}

BrownianGrid generate_brownian(std::uint64_t seed, std::size_t n_coarse, std::size_t refinement, double dt_coarse,
                               std::uint64_t path) {
    if (n_coarse == 0) throw InvalidInput("generate_brownian: n_coarse must be >= 1");
    if (refinement == 0) throw InvalidInput("generate_brownian: refinement must be >= 1");
    if (!(dt_coarse > 0.0) || !std::isfinite(dt_coarse)) throw InvalidInput("generate_brownian: dt must be > 0");
    constexpr auto kMaxRows = static_cast<std::size_t>(std::numeric_limits<Eigen::Index>::max() / 4);
    if (n_coarse > kMaxRows / refinement) throw InvalidInput("generate_brownian: n_coarse * refinement overflows");
    if (path >= (std::uint64_t{1} << 63)) throw InvalidInput("generate_brownian: path index out of range");

    const std::size_t n_fine = n_coarse * refinement;
    const double scale = std::sqrt(dt_coarse / static_cast<double>(refinement));
    const NormalStream stream(seed, path);

    IncrementMatrix fine(static_cast<Eigen::Index>(n_fine), 4);
    for (std::size_t j = 0; j < n_fine; ++j) {
        const auto z = stream.step(j);
        for (int i = 0; i < 4; ++i) fine(static_cast<Eigen::Index>(j), i) = scale * z[i];
    }
    return BrownianGrid(std::move(fine), refinement, dt_coarse);
}

}  // namespace esd
