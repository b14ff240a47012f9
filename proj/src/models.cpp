#include "cyclone/models.hpp"

#include "cyclone/augmentation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <type_traits>

namespace cyclone {

namespace {

constexpr const char* kCheckpointFormat = "cyclone-pp-model";
constexpr int kCheckpointVersion = 1;

FeatureStack model_stack(const ModelConfig& config, const Report& report, const GridDomain& domain,
                         std::span<const LatLon> track) {
    if (config.variant == Variant::Fcn) {
        const GaussianField ens = predict_members_baseline(report);
        FeatureStack s;
        s.names = {"ens_mean", "ens_std"};
        s.channels = {ens.mu, ens.sigma};
        return s;
    }
    FeatureStack s = assemble_stack(report, domain, track);
    if (!config.use_geo_dyn) {
        s.channels.resize(kMemberCount);
        s.names.resize(kMemberCount);
    }
    return s;
}

nn::Tensor<Real> to_tensor(const FeatureStack& stack) {
    const auto& first = stack.channels.front();
    nn::Tensor<Real> t(static_cast<int>(stack.channels.size()), static_cast<int>(first.rows()),
                         static_cast<int>(first.cols()));
    for (std::size_t c = 0; c < stack.channels.size(); ++c) {
        t.values.row(static_cast<Eigen::Index>(c)) =
            Eigen::Map<const Eigen::RowVectorXd>(stack.channels[c].data(), stack.channels[c].size()).cast<Real>();
    }
    return t;
}

std::vector<Eigen::Index> land_pixels(const GridDomain& domain) {
    std::vector<Eigen::Index> out;
    const Mask& land = domain.land_mask();
    for (Eigen::Index i = 0; i < land.size(); ++i) {
        if (land.data()[i]) out.push_back(i);
    }
    return out;
}

void check_history(std::span<const Report> history) {
    if (history.empty()) throw std::invalid_argument("train_model: empty training history");
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (history[i].origin != ReportOrigin::Original) {
            throw std::invalid_argument("train_model: history must contain original reports only");
        }
        if (!history[i].observation) {
            throw std::invalid_argument("train_model: history report " + history[i].index.to_string() +
                                        " has no observation");
        }
        if (i > 0 && !(history[i - 1].index < history[i].index)) {
            throw std::invalid_argument("train_model: history must be sorted by index");
        }
    }
}

std::string report_label(const Report& r) {
    return r.index.to_string() + (r.origin == ReportOrigin::NoiseInjected ? "n" : "");
}

const char* architecture_name(Variant v) { return v == Variant::Fcn ? "fcn" : "cnn"; }

} // namespace

const char* to_string(Variant variant) {
    switch (variant) {
    case Variant::Members: return "members";
    case Variant::Fcn: return "fcn";
    case Variant::Cnn: return "cnn";
    case Variant::CnnDyn: return "cnn-dyn";
    case Variant::CnnAug: return "cnn-aug";
    case Variant::CnnAll: return "cnn-all";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : kAllVariants) {
        if (name == to_string(v)) return v;
    }
    throw std::invalid_argument("unknown model variant '" + name + "'");
}

ModelConfig ModelConfig::for_variant(Variant variant, std::uint64_t seed) {
    ModelConfig c;
    c.variant = variant;
    c.seed = seed;
    c.use_geo_dyn = variant == Variant::CnnDyn || variant == Variant::CnnAll;
    c.use_augmentation = variant == Variant::CnnAug || variant == Variant::CnnAll;
    return c;
}

void ModelConfig::validate() const {
    const ModelConfig expected = for_variant(variant, seed);
    if (use_geo_dyn != expected.use_geo_dyn || use_augmentation != expected.use_augmentation) {
        throw std::invalid_argument(std::string("model config flags inconsistent with variant ") + to_string(variant));
    }
    if (epochs < 0) throw std::invalid_argument("model config: epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("model config: learning rate must be > 0");
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("model config: noise scale must be >= 0");
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"variant", to_string(c.variant)},
            {"use_geo_dyn", c.use_geo_dyn},
            {"use_augmentation", c.use_augmentation},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"noise_scale", c.noise_scale},
            {"seed", c.seed},
            {"weights", c.weights == WeightRule::Temporal ? "temporal" : "equal"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c = ModelConfig::for_variant(parse_variant(j.at("variant").get<std::string>()));
    c.use_geo_dyn = j.at("use_geo_dyn").get<bool>();
    c.use_augmentation = j.at("use_augmentation").get<bool>();
    c.epochs = j.at("epochs").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.noise_scale = j.at("noise_scale").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto w = j.at("weights").get<std::string>();
    if (w != "temporal" && w != "equal") throw std::invalid_argument("model config: unknown weight rule '" + w + "'");
    c.weights = w == "temporal" ? WeightRule::Temporal : WeightRule::Equal;
    c.validate();
    return c;
}

GaussianField predict_members_baseline(const Report& report) {
    if (report.members.size() < 2) throw std::invalid_argument("members baseline needs at least 2 members");
    const auto rows = report.members.front().rows();
    const auto cols = report.members.front().cols();
    const double n = static_cast<double>(report.members.size());
    Field sum = Field::Zero(rows, cols);
    for (const auto& m : report.members) sum += m;
    const Field mean = sum / n;
    Field ss = Field::Zero(rows, cols);
    for (const auto& m : report.members) ss += (m - mean).square();
    return {mean, (ss / (n - 1.0)).sqrt().max(kReferenceSigmaFloor)};
}

// ---------------------------------------------------------------------------

CnnNetwork::CnnNetwork(int in_channels, int hidden_channels)
    : hidden(in_channels, hidden_channels, 2), head(hidden_channels, 2, 1) {}

void CnnNetwork::init(std::mt19937_64& rng) {
    hidden.init_kaiming(rng);
    head.init_kaiming(rng);
}

nn::Matrix<Real> CnnNetwork::forward(const nn::Tensor<Real>& input) {
    return forward_patches(hidden.patches(input), input.rows, input.cols);
}

nn::Matrix<Real> CnnNetwork::forward_patches(const nn::Matrix<Real>& patches, int rows, int cols) {
    rows_ = rows;
    cols_ = cols;
    nn::Tensor<Real> h = hidden.forward_patches(patches, rows, cols);
    h.values = activation_.forward(h.values);
    return head.forward(h).values;
}

void CnnNetwork::backward(const nn::Matrix<Real>& head_grad) {
    nn::Tensor<Real> g = head.backward(nn::Tensor<Real>(head_grad, rows_, cols_));
    g.values = activation_.backward(g.values);
    hidden.backward(g, false);
}

std::vector<nn::Parameter<Real>*> CnnNetwork::parameters() {
    return {&hidden.weight, &hidden.bias, &head.weight, &head.bias};
}

FcnNetwork::FcnNetwork(int in_features, int hidden_units) : hidden(in_features, hidden_units), head(hidden_units, 2) {}

void FcnNetwork::init(std::mt19937_64& rng) {
    hidden.init_kaiming(rng);
    head.init_kaiming(rng);
}

nn::Matrix<Real> FcnNetwork::forward(const nn::Tensor<Real>& input) {
    return head.forward(activation_.forward(hidden.forward(input.values)));
}

void FcnNetwork::backward(const nn::Matrix<Real>& head_grad) {
    hidden.backward(activation_.backward(head.backward(head_grad)), false);
}

std::vector<nn::Parameter<Real>*> FcnNetwork::parameters() {
    return {&hidden.weight, &hidden.bias, &head.weight, &head.bias};
}

// ---------------------------------------------------------------------------

nn::Tensor<Real> TrainedModel::inputs(const Report& report, const GridDomain& domain,
                                        std::span<const LatLon> track) const {
    return to_tensor(apply_standardizer(model_stack(config_, report, domain, track), input_stats_));
}

GaussianField TrainedModel::to_gaussian(const nn::Matrix<Real>& head, int rows, int cols) const {
    GaussianField out{Field(rows, cols), Field(rows, cols)};
    for (Eigen::Index p = 0; p < head.cols(); ++p) {
        out.mu.data()[p] = scaling_.offset + scaling_.scale * double(head(0, p));
        out.sigma.data()[p] = scaling_.scale * nn::softplus(double(head(1, p))) + kSigmaFloorMm;
    }
    return out;
}

GaussianField TrainedModel::predict(const Report& report, const GridDomain& domain,
                                    std::span<const LatLon> track) const {
    const nn::Tensor<Real> x = inputs(report, domain, track);
    auto network = network_;
    const nn::Matrix<Real> head = std::visit([&](auto& net) { return net.forward(x); }, network);
    nn::require_finite<Real>(head, "network output");
    return to_gaussian(head, domain.rows(), domain.cols());
}

nlohmann::json TrainedModel::to_json() const {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["config"] = cyclone::to_json(config_);
    j["architecture"] = architecture_name(config_.variant);
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : input_stats_) stats.push_back({{"mean", s.mean}, {"std", s.std}});
    j["input_stats"] = stats;
    j["target_scaling"] = {{"offset", scaling_.offset}, {"scale", scaling_.scale}};
    std::visit(
        [&](const auto& net) {
            j["layers"] = {{"hidden", {{"weight", nn::parameter_to_json(net.hidden.weight)},
                                       {"bias", nn::parameter_to_json(net.hidden.bias)}}},
                           {"head", {{"weight", nn::parameter_to_json(net.head.weight)},
                                     {"bias", nn::parameter_to_json(net.head.bias)}}}};
        },
        network_);
    j["training"] = {{"initial_loss", summary_.initial_loss},
                     {"final_loss", summary_.final_loss},
                     {"steps", summary_.steps},
                     {"reports", summary_.training_reports}};
    return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw std::runtime_error("not a model checkpoint");
        }
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw std::runtime_error("unsupported checkpoint version");
        }
        TrainedModel m;
        m.config_ = model_config_from_json(j.at("config"));
        if (!m.config_.trainable()) throw std::runtime_error("checkpoint for untrainable variant");
        for (const auto& s : j.at("input_stats")) {
            m.input_stats_.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
        }
        m.scaling_ = {j.at("target_scaling").at("offset").get<double>(),
                      j.at("target_scaling").at("scale").get<double>()};
        const int in = static_cast<int>(m.input_stats_.size());
        const auto& layers = j.at("layers");
        auto load = [&](auto net) {
            nn::parameter_from_json(layers.at("hidden").at("weight"), net.hidden.weight);
            nn::parameter_from_json(layers.at("hidden").at("bias"), net.hidden.bias);
            nn::parameter_from_json(layers.at("head").at("weight"), net.head.weight);
            nn::parameter_from_json(layers.at("head").at("bias"), net.head.bias);
            return net;
        };
        if (m.config_.variant == Variant::Fcn) {
            const auto hidden = static_cast<int>(layers.at("hidden").at("bias").at("shape").at(0).get<long>());
            m.network_ = load(FcnNetwork(in, hidden));
        } else {
            const auto hidden = static_cast<int>(layers.at("hidden").at("bias").at("shape").at(0).get<long>());
            m.network_ = load(CnnNetwork(in, hidden));
        }
        const auto& t = j.at("training");
        m.summary_.initial_loss = t.at("initial_loss").get<double>();
        m.summary_.final_loss = t.at("final_loss").get<double>();
        m.summary_.steps = t.at("steps").get<long>();
        m.summary_.training_reports = t.at("reports").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed model checkpoint: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

std::vector<LatLon> track_until(std::span<const Report> pool, ReportIndex upto) {
    std::vector<const Report*> picked;
    for (const auto& r : pool) {
        if (r.origin != ReportOrigin::NoiseInjected && r.index <= upto) picked.push_back(&r);
    }
    std::stable_sort(picked.begin(), picked.end(), [](const Report* a, const Report* b) { return a->index < b->index; });
    std::vector<LatLon> track;
    for (const Report* r : picked) track.push_back(r->tc_center);
    return track;
}

std::vector<LatLon> target_track(std::span<const Report> history, const Report& target) {
    std::vector<LatLon> track;
    for (const auto& r : history) {
        if (r.origin != ReportOrigin::NoiseInjected && r.index < target.index) track.push_back(r.tc_center);
    }
    track.push_back(target.tc_center);
    return track;
}

TrainedModel train_model(const ModelConfig& config, std::span<const Report> history, const GridDomain& domain) {
    config.validate();
    if (!config.trainable()) throw std::invalid_argument("the members baseline is not trained");
    check_history(history);

    std::vector<Report> training;
    if (config.use_augmentation && history.size() >= 2) {
        const AugmentedSet set = build_augmented_set(history, config.noise_scale, config.seed);
        training = training_subset(set, history.back().index.floor() + 1);
    } else {
        training.assign(history.begin(), history.end());
    }

    TrainedModel model;
    model.config_ = config;

    std::vector<FeatureStack> raw;
    raw.reserve(training.size());
    for (const auto& r : training) raw.push_back(model_stack(config, r, domain, track_until(training, r.index)));
    model.input_stats_ = fit_standardizer(raw);
    std::vector<nn::Tensor<Real>> inputs;
    inputs.reserve(raw.size());
    for (const auto& s : raw) inputs.push_back(to_tensor(apply_standardizer(s, model.input_stats_)));
    raw.clear();

    const std::vector<Eigen::Index> land = land_pixels(domain);
    if (land.empty()) throw std::invalid_argument("train_model: domain has no land cells");
    {
        std::vector<double> values;
        for (const auto& r : training) {
            for (Eigen::Index p : land) values.push_back(r.observation->data()[p]);
        }
        const double n = static_cast<double>(values.size());
        const double mean = pairwise_sum(values) / n;
        for (double& v : values) v = (v - mean) * (v - mean);
        model.scaling_ = {mean, std::max(1.0, std::sqrt(pairwise_sum(values) / n))};
    }

    const int in_channels = inputs.front().channels();
    std::mt19937_64 init_rng(config.seed);
    if (config.variant == Variant::Fcn) {
        FcnNetwork net(in_channels, kFcnHiddenUnits);
        net.init(init_rng);
        model.network_ = std::move(net);
    } else {
        CnnNetwork net(in_channels, kCnnHiddenChannels);
        net.init(init_rng);
        model.network_ = std::move(net);
    }

    std::vector<ReportIndex> indices;
    for (const auto& r : training) indices.push_back(r.index);
    const WeightScheme weights = config.weights == WeightRule::Temporal
                                     ? make_weights(indices, static_cast<int>(history.size()))
                                     : equal_weights(indices);

    auto evaluate = [&] {
        std::vector<GaussianField> preds;
        for (const auto& x : inputs) {
            const nn::Matrix<Real> head = std::visit([&](auto& net) { return net.forward(x); }, model.network_);
            nn::require_finite<Real>(head, "network output");
            preds.push_back(model.to_gaussian(head, domain.rows(), domain.cols()));
        }
        return weighted_loss(preds, training, weights, domain.land_mask());
    };

    model.summary_.initial_loss = evaluate();
    for (const auto& r : training) model.summary_.training_reports.push_back(report_label(r));

    // Inputs never change during training, so the first convolution's
    // patch matrices are built once.
    std::vector<nn::Matrix<Real>> patches;
    if (auto* cnn = std::get_if<CnnNetwork>(&model.network_)) {
        for (const auto& x : inputs) patches.push_back(cnn->hidden.patches(x));
    }

    nn::Adam<Real> adam(nn::AdamConfig{config.learning_rate});
    const double n_reports = static_cast<double>(training.size());
    const double n_land = static_cast<double>(land.size());
    const double scale = model.scaling_.scale;
    nn::Matrix<Real> grad;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t r = 0; r < training.size(); ++r) {
            std::visit(
                [&](auto& net) {
                    auto params = net.parameters();
                    for (auto* p : params) p->zero_grad();
                    nn::Matrix<Real> head;
                    if constexpr (std::is_same_v<std::decay_t<decltype(net)>, CnnNetwork>) {
                        head = net.forward_patches(patches[r], inputs[r].rows, inputs[r].cols);
                    } else {
                        head = net.forward(inputs[r]);
                    }
                    nn::require_finite<Real>(head, "network output (epoch " + std::to_string(epoch) + ")");
                    grad.setZero(2, head.cols());
                    // Each step sees one report; rescaling by the report count
                    // keeps an epoch's summed gradient equal to that of the
                    // weighted loss.
                    const double coeff = weights.weights[r] * n_reports / n_land;
                    const Field& obs = *training[r].observation;
                    for (Eigen::Index p : land) {
                        const double h0 = head(0, p);
                        const double h1 = head(1, p);
                        const double mu = model.scaling_.offset + scale * h0;
                        const double sigma = scale * nn::softplus(h1) + kSigmaFloorMm;
                        const auto g = crps_gradient(mu, sigma, obs.data()[p]);
                        grad(0, p) = static_cast<Real>(coeff * g.d_mu * scale);
                        grad(1, p) = static_cast<Real>(coeff * g.d_sigma * scale * nn::logistic(h1));
                    }
                    net.backward(grad);
                    adam.step(params);
                },
                model.network_);
        }
    }
    model.summary_.steps = adam.steps();
    model.summary_.final_loss = config.epochs > 0 ? evaluate() : model.summary_.initial_loss;
    if (!std::isfinite(model.summary_.final_loss)) {
        throw nn::TrainingAborted("training loss diverged for variant " + std::string(to_string(config.variant)));
    }
    return model;
}

TrainedModel train_fcn_baseline(std::span<const Report> history, const GridDomain& domain, std::uint64_t seed) {
    return train_model(ModelConfig::for_variant(Variant::Fcn, seed), history, domain);
}

// ---------------------------------------------------------------------------

int default_worker_count() {
    if (const char* env = std::getenv("CYCLONE_PP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

RollingOriginResult rolling_origin_run(std::span<const ModelConfig> configs, std::span<const Report> originals,
                                       const GridDomain& domain, std::span<const int> targets, int workers) {
    struct Job {
        const ModelConfig* config;
        int target;
        std::vector<Report> history;
        const Report* target_report;
    };
    RollingOriginResult result;
    std::vector<Job> jobs;
    for (int k : targets) {
        const ReportIndex target_index = ReportIndex::whole(k);
        const Report* target = nullptr;
        std::vector<Report> history;
        for (const auto& r : originals) {
            if (r.index == target_index) target = &r;
            if (r.index < target_index) history.push_back(r);
        }
        if (!target) {
            result.warnings.push_back("target report " + std::to_string(k) + " not found; skipped");
            continue;
        }
        for (const auto& c : configs) {
            if (c.trainable() && history.empty()) {
                result.warnings.push_back(std::string(to_string(c.variant)) + " at target " + std::to_string(k) +
                                          ": no earlier reports to train on; skipped");
                continue;
            }
            if (c.use_augmentation && history.size() == 1) {
                result.warnings.push_back(std::string(to_string(c.variant)) + " at target " + std::to_string(k) +
                                          ": one earlier report, trained without augmentation");
            }
            jobs.push_back({&c, k, c.trainable() ? history : std::vector<Report>{}, target});
        }
    }

    std::vector<GaussianField> outputs(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        const Job& job = jobs[i];
        const Report target = job.target_report->forecast_only();
        if (!job.config->trainable()) {
            outputs[i] = predict_members_baseline(target);
        } else {
            const TrainedModel model = train_model(*job.config, job.history, domain);
            outputs[i] = model.predict(target, domain, target_track(job.history, target));
        }
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        result.predictions[{jobs[i].config->variant, jobs[i].target}] = std::move(outputs[i]);
    }
    return result;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const auto cap = static_cast<int>(std::min<std::size_t>(n, 1024));
    const int n_workers = std::clamp(workers > 0 ? workers : default_worker_count(), 1, cap);
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace cyclone
