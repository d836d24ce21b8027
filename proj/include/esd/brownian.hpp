#pragma once

#include <cstdint>

#include "esd/types.hpp"

namespace esd {

using IncrementMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

/// Brownian increments on a fine grid of n_coarse * refinement steps.
/// Coarse increments are left-to-right sums of `refinement` consecutive fine
/// increments, so a coarse and a fine integration see the same path.
class BrownianGrid {
public:
    BrownianGrid(IncrementMatrix fine, std::size_t refinement, double dt_coarse);

    std::size_t n_fine() const { return static_cast<std::size_t>(fine_.rows()); }
    std::size_t n_coarse() const { return n_fine() / refinement_; }
    std::size_t refinement() const { return refinement_; }
    double dt_coarse() const { return dt_coarse_; }
    double dt_fine() const { return dt_coarse_ / static_cast<double>(refinement_); }

    const IncrementMatrix& fine_increments() const { return fine_; }
    Vector4d coarse_increment(std::size_t k) const;
    IncrementMatrix coarse_increments() const;

private:
    IncrementMatrix fine_;
    std::size_t refinement_;
    double dt_coarse_;
};

/// Deterministic in (seed, path, n_coarse, refinement): fine increment j of
/// component i is sqrt(dt_coarse / refinement) * Z(seed, path, j, i).
BrownianGrid generate_brownian(std::uint64_t seed, std::size_t n_coarse, std::size_t refinement,
                               double dt_coarse, std::uint64_t path = 0);

}  // namespace esd
