#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace cyclone {

/// A gridded scalar field, row-major with row 0 at the southern edge.
template <typename Scalar>
using FieldT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Field = FieldT<double>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// input length, so results are reproducible regardless of caller.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> values) {
    constexpr std::size_t kLeaf = 16;
    if (values.size() <= kLeaf) {
        Scalar total = 0;
        for (Scalar v : values) total += v;
        return total;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double pairwise_sum(const std::vector<double>& values);

/// Mean of `field` over cells where `mask` is true, summed pairwise in
/// row-major order.
double masked_mean(const Field& field, const Mask& mask);

/// Population standard deviation of all cells.
double field_std(const Field& field);

bool all_finite(const Field& field);

} // namespace cyclone
