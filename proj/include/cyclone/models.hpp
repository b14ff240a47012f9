#pragma once

#include "cyclone/features.hpp"
#include "cyclone/nn.hpp"
#include "cyclone/scoring.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cyclone {

enum class Variant { Members, Fcn, Cnn, CnnDyn, CnnAug, CnnAll };

inline constexpr Variant kAllVariants[] = {Variant::Members, Variant::Fcn,    Variant::Cnn,
                                           Variant::CnnDyn,  Variant::CnnAug, Variant::CnnAll};

/// CLI spelling: members, fcn, cnn, cnn-dyn, cnn-aug, cnn-all.
const char* to_string(Variant variant);
Variant parse_variant(const std::string& name);

enum class WeightRule { Temporal, Equal };

/// Network arithmetic; the layers are templated, training runs in float.
using Real = float;

inline constexpr double kSigmaFloorMm = 1e-3;
inline constexpr int kCnnHiddenChannels = 32;
inline constexpr int kFcnHiddenUnits = 16;

struct ModelConfig {
    Variant variant = Variant::CnnAll;
    bool use_geo_dyn = true;
    bool use_augmentation = true;
    int epochs = 100;
    double learning_rate = 1e-3;
    double noise_scale = 0.05;
    std::uint64_t seed = 1;
    WeightRule weights = WeightRule::Temporal;

    /// Flags as in the model summary table: CNN members only, CNN-dyn adds
    /// geographic and dynamic channels, CNN-aug adds augmentation, CNN-all
    /// both; FCN and Members use neither.
    static ModelConfig for_variant(Variant variant, std::uint64_t seed = 1);
    void validate() const;
    bool trainable() const { return variant != Variant::Members; }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Gaussian with the ensemble mean and (n-1) standard deviation, floored.
GaussianField predict_members_baseline(const Report& report);

/// Maps network head outputs to millimetres: mu = offset + scale * h0,
/// sigma = scale * softplus(h1) + kSigmaFloorMm.
struct TargetScaling {
    double offset = 0.0;
    double scale = 1.0;
};

/// 2x2 convolution to 32 maps, softplus, 1x1 convolution to the two heads.
class CnnNetwork {
public:
    CnnNetwork() = default;
    CnnNetwork(int in_channels, int hidden_channels);

    void init(std::mt19937_64& rng);
    nn::Matrix<Real> forward(const nn::Tensor<Real>& input);
    /// forward() given hidden.patches(input), which must outlive backward().
    nn::Matrix<Real> forward_patches(const nn::Matrix<Real>& patches, int rows, int cols);
    void backward(const nn::Matrix<Real>& head_grad);
    std::vector<nn::Parameter<Real>*> parameters();

    nn::Conv2d<Real> hidden;
    nn::Conv2d<Real> head;

private:
    nn::Softplus<Real> activation_;
    int rows_ = 0;
    int cols_ = 0;
};

/// Per-cell network: dense to 16 units, softplus, dense to the two heads.
class FcnNetwork {
public:
    FcnNetwork() = default;
    FcnNetwork(int in_features, int hidden_units);

    void init(std::mt19937_64& rng);
    nn::Matrix<Real> forward(const nn::Tensor<Real>& input);
    void backward(const nn::Matrix<Real>& head_grad);
    std::vector<nn::Parameter<Real>*> parameters();

    nn::Dense<Real> hidden;
    nn::Dense<Real> head;

private:
    nn::Softplus<Real> activation_;
};

struct TrainingSummary {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    long steps = 0;
    std::vector<std::string> training_reports;
};

class TrainedModel {
public:
    const ModelConfig& config() const { return config_; }
    const TrainingSummary& summary() const { return summary_; }
    const NormStats& input_stats() const { return input_stats_; }
    const TargetScaling& scaling() const { return scaling_; }

    /// `track` is the cyclone centre history up to and including the target.
    GaussianField predict(const Report& report, const GridDomain& domain, std::span<const LatLon> track) const;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& j);

private:
    friend TrainedModel train_model(const ModelConfig&, std::span<const Report>, const GridDomain&);

    nn::Tensor<Real> inputs(const Report& report, const GridDomain& domain, std::span<const LatLon> track) const;
    GaussianField to_gaussian(const nn::Matrix<Real>& head, int rows, int cols) const;

    ModelConfig config_;
    NormStats input_stats_;
    TargetScaling scaling_;
    std::variant<CnnNetwork, FcnNetwork> network_;
    TrainingSummary summary_;
};

/// Trains on `history` (original reports before the target, ascending),
/// augmenting first when the config asks for it. One epoch visits every
/// training report once, one optimizer step per report.
TrainedModel train_model(const ModelConfig& config, std::span<const Report> history, const GridDomain& domain);

TrainedModel train_fcn_baseline(std::span<const Report> history, const GridDomain& domain,
                                std::uint64_t seed = 1);

/// Cyclone centres of the non-noise reports in `pool` up to `upto`.
std::vector<LatLon> track_until(std::span<const Report> pool, ReportIndex upto);

/// Track used when predicting `target` after training on `history`.
std::vector<LatLon> target_track(std::span<const Report> history, const Report& target);

struct RollingOriginResult {
    std::map<std::pair<Variant, int>, GaussianField> predictions;
    std::vector<std::string> warnings;
};

/// For each target k, trains every config on originals indexed below k and
/// predicts from report k's forecast fields only.
RollingOriginResult rolling_origin_run(std::span<const ModelConfig> configs, std::span<const Report> originals,
                                       const GridDomain& domain, std::span<const int> targets, int workers = 0);

/// CYCLONE_PP_THREADS when set, otherwise the hardware concurrency.
int default_worker_count();

/// Runs fn(0) .. fn(n - 1) on up to `workers` threads (0: default count).
/// The first exception thrown is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace cyclone
