#include "cyclone/field.hpp"

#include <cmath>
#include <stdexcept>

namespace cyclone {

double pairwise_sum(const std::vector<double>& values) {
    return pairwise_sum(std::span<const double>(values));
}

double masked_mean(const Field& field, const Mask& mask) {
    if (field.rows() != mask.rows() || field.cols() != mask.cols()) {
        throw std::invalid_argument("masked_mean: field and mask shapes differ");
    }
    std::vector<double> picked;
    picked.reserve(static_cast<std::size_t>(mask.count()));
    for (Eigen::Index i = 0; i < field.size(); ++i) {
        if (mask.data()[i]) picked.push_back(field.data()[i]);
    }
    if (picked.empty()) throw std::invalid_argument("masked_mean: empty mask");
    return pairwise_sum(picked) / static_cast<double>(picked.size());
}

double field_std(const Field& field) {
    if (field.size() == 0) return 0.0;
    const std::span<const double> all(field.data(), static_cast<std::size_t>(field.size()));
    const double mean = pairwise_sum(all) / static_cast<double>(field.size());
    std::vector<double> sq(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) sq[i] = (all[i] - mean) * (all[i] - mean);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(field.size()));
}

bool all_finite(const Field& field) {
    return field.isFinite().all();
}

} // namespace cyclone
