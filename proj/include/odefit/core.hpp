#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>

namespace odefit {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Thrown when a trajectory leaves the representable range mid-integration.
/// last_valid() is the index of the last sample that was still finite.
class IntegrationDivergedError : public std::runtime_error {
public:
    IntegrationDivergedError(const std::string& what, Index last_valid)
        : std::runtime_error(what), last_valid_(last_valid) {}

    Index last_valid() const noexcept { return last_valid_; }

private:
    Index last_valid_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

}  // namespace odefit
