#pragma once

#include <complex>
#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace esd {

template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

using Vector4d = Vector4<double>;
using Matrix4d = Matrix4<double>;
using Vector4cd = Eigen::Matrix<std::complex<double>, 4, 1>;

// (X1 demand, X2 external supply, X3 imports, X4 renewables)
using State = Vector4d;

enum Component : int { Demand = 0, Supply = 1, Imports = 2, Renewables = 3 };

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a simulated state leaves the finite / bounded region.
class BlowUpError : public NumericFailure {
public:
    BlowUpError(std::size_t step, std::size_t path, const std::string& what)
        : NumericFailure(what + " (path " + std::to_string(path) + ", step " + std::to_string(step) + ")"),
          step_(step),
          path_(path) {}

    std::size_t step() const noexcept { return step_; }
    std::size_t path() const noexcept { return path_; }

private:
    std::size_t step_;
    std::size_t path_;
};

}  // namespace esd
