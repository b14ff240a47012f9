#pragma once

#include "cyclone/grid.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace cyclone {

template <typename Scalar>
Scalar std_normal_cdf(Scalar z) {
    return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

template <typename Scalar>
Scalar std_normal_pdf(Scalar z) {
    return std::exp(Scalar(-0.5) * z * z) * (std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>);
}

namespace detail {

template <typename Scalar>
void check_gaussian_args(Scalar mu, Scalar sigma, Scalar y) {
    if (!(sigma > Scalar(0)) || !std::isfinite(sigma)) {
        throw std::domain_error("CRPS: sigma must be positive and finite");
    }
    if (!std::isfinite(mu) || !std::isfinite(y)) throw std::domain_error("CRPS: non-finite mu or y");
}

} // namespace detail

/// CRPS of N(mu, sigma^2) against observation y, closed form.
template <typename Scalar>
Scalar crps_gaussian(Scalar mu, Scalar sigma, Scalar y) {
    detail::check_gaussian_args(mu, sigma, y);
    const Scalar z = (y - mu) / sigma;
    return sigma * (z * (Scalar(2) * std_normal_cdf(z) - Scalar(1)) + Scalar(2) * std_normal_pdf(z) -
                    std::numbers::inv_sqrtpi_v<Scalar>);
}

template <typename Scalar>
struct CrpsGradient {
    Scalar d_mu;
    Scalar d_sigma;
};

template <typename Scalar>
CrpsGradient<Scalar> crps_gradient(Scalar mu, Scalar sigma, Scalar y) {
    detail::check_gaussian_args(mu, sigma, y);
    const Scalar z = (y - mu) / sigma;
    return {-(Scalar(2) * std_normal_cdf(z) - Scalar(1)),
            Scalar(2) * std_normal_pdf(z) - std::numbers::inv_sqrtpi_v<Scalar>};
}

/// Integral definition of the CRPS evaluated by composite Gauss-Legendre
/// quadrature, split at the observation. Used to check the closed form.
double crps_quadrature_oracle(double mu, double sigma, double y);

// ---------------------------------------------------------------------------

inline constexpr double kReferenceSigmaFloor = 1e-6;

struct GaussianField {
    Field mu;
    Field sigma;

    /// Throws std::invalid_argument unless sigma > 0 and everything is finite.
    void validate() const;
};

/// Per-cell CRPS of a forecast field against an observation field.
Field crps_field(const GaussianField& forecast, const Field& observation);

struct WeightScheme {
    std::vector<ReportIndex> indices;
    std::vector<double> weights; ///< positive, sum to 1
};

/// Weight 2^(j-1) for original report j (oldest j = 1). Midpoints between
/// j and j+1 and noise copies inherit the weight of j. Normalized.
WeightScheme make_weights(std::span<const ReportIndex> indices, int n_original);

WeightScheme equal_weights(std::span<const ReportIndex> indices);

/// sum_r w_r * mean over `mask` of the per-cell CRPS.
double weighted_loss(std::span<const GaussianField> predictions, std::span<const Report> reports,
                     const WeightScheme& weights, const Mask& mask);

/// 1 - model / reference per cell; NaN where the reference score is zero.
Field crpss(const Field& model_crps, const Field& reference_crps);

} // namespace cyclone
