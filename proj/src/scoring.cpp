#include "cyclone/scoring.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace cyclone {

namespace {

constexpr std::array<double, 4> kGaussNodes = {0.1834346424956498, 0.5255324099163290,
                                               0.7966664774136267, 0.9602898564975363};
constexpr std::array<double, 4> kGaussWeights = {0.3626837833783620, 0.3137066458778873,
                                                 0.2223810344533745, 0.1012285362903763};

template <typename F>
double integrate(F&& f, double a, double b, double max_panel) {
    if (!(b > a)) return 0.0;
    const auto panels = static_cast<long>(std::ceil((b - a) / max_panel));
    const double h = (b - a) / static_cast<double>(panels);
    std::vector<double> parts(static_cast<std::size_t>(panels));
    for (long p = 0; p < panels; ++p) {
        const double mid = a + (static_cast<double>(p) + 0.5) * h;
        double s = 0.0;
        for (std::size_t i = 0; i < kGaussNodes.size(); ++i) {
            const double dx = 0.5 * h * kGaussNodes[i];
            s += kGaussWeights[i] * (f(mid - dx) + f(mid + dx));
        }
        parts[static_cast<std::size_t>(p)] = 0.5 * h * s;
    }
    return pairwise_sum(parts);
}

} // namespace

double crps_quadrature_oracle(double mu, double sigma, double y) {
    detail::check_gaussian_args(mu, sigma, y);
    // Below y the integrand is F(q)^2, above it (1 - F(q))^2; both tails
    // beyond 12 sigma contribute less than 1e-60 sigma.
    const double lo = std::min(mu - 12.0 * sigma, y);
    const double hi = std::max(mu + 12.0 * sigma, y);
    const double panel = sigma / 8.0;
    auto below = [&](double q) {
        const double f = 0.5 * std::erfc(-(q - mu) / (sigma * std::numbers::sqrt2));
        return f * f;
    };
    auto above = [&](double q) {
        const double s = 0.5 * std::erfc((q - mu) / (sigma * std::numbers::sqrt2));
        return s * s;
    };
    return integrate(below, lo, y, panel) + integrate(above, y, hi, panel);
}

void GaussianField::validate() const {
    if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols()) {
        throw std::invalid_argument("GaussianField: mu and sigma shapes differ");
    }
    if (!all_finite(mu) || !all_finite(sigma)) throw std::invalid_argument("GaussianField: non-finite values");
    if (!(sigma > 0.0).all()) throw std::invalid_argument("GaussianField: sigma must be positive");
}

Field crps_field(const GaussianField& forecast, const Field& observation) {
    if (observation.rows() != forecast.mu.rows() || observation.cols() != forecast.mu.cols()) {
        throw std::invalid_argument("crps_field: observation shape mismatch");
    }
    Field out(observation.rows(), observation.cols());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out.data()[i] = crps_gaussian(forecast.mu.data()[i], forecast.sigma.data()[i], observation.data()[i]);
    }
    return out;
}

WeightScheme make_weights(std::span<const ReportIndex> indices, int n_original) {
    WeightScheme scheme;
    if (indices.empty()) return scheme;
    if (!std::is_sorted(indices.begin(), indices.end())) {
        throw std::invalid_argument("make_weights: indices must be sorted");
    }
    const int oldest = indices.front().floor();
    std::vector<double> raw;
    for (ReportIndex idx : indices) {
        const int j = idx.floor() - oldest + 1;
        if (n_original > 0 && j > n_original) {
            throw std::invalid_argument("make_weights: index " + idx.to_string() + " beyond " +
                                        std::to_string(n_original) + " original reports");
        }
        raw.push_back(std::ldexp(1.0, j - 1));
    }
    const double total = pairwise_sum(raw);
    scheme.indices.assign(indices.begin(), indices.end());
    for (double w : raw) scheme.weights.push_back(w / total);
    return scheme;
}

WeightScheme equal_weights(std::span<const ReportIndex> indices) {
    WeightScheme scheme;
    scheme.indices.assign(indices.begin(), indices.end());
    scheme.weights.assign(indices.size(), indices.empty() ? 0.0 : 1.0 / static_cast<double>(indices.size()));
    return scheme;
}

double weighted_loss(std::span<const GaussianField> predictions, std::span<const Report> reports,
                     const WeightScheme& weights, const Mask& mask) {
    if (predictions.size() != reports.size() || weights.weights.size() != reports.size() ||
        weights.indices.size() != reports.size()) {
        throw std::invalid_argument("weighted_loss: predictions, reports and weights are misaligned");
    }
    if (mask.count() == 0) throw std::invalid_argument("weighted_loss: empty mask");
    std::vector<double> terms;
    terms.reserve(reports.size());
    for (std::size_t r = 0; r < reports.size(); ++r) {
        if (weights.indices[r] != reports[r].index) {
            throw std::invalid_argument("weighted_loss: weight for report " + weights.indices[r].to_string() +
                                        " paired with report " + reports[r].index.to_string());
        }
        if (!reports[r].observation) {
            throw std::invalid_argument("weighted_loss: report " + reports[r].index.to_string() +
                                        " has no observation");
        }
        terms.push_back(weights.weights[r] * masked_mean(crps_field(predictions[r], *reports[r].observation), mask));
    }
    return pairwise_sum(terms);
}

Field crpss(const Field& model_crps, const Field& reference_crps) {
    if (model_crps.rows() != reference_crps.rows() || model_crps.cols() != reference_crps.cols()) {
        throw std::invalid_argument("crpss: shape mismatch");
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return (reference_crps > 0.0).select(1.0 - model_crps / reference_crps, nan);
}

} // namespace cyclone
