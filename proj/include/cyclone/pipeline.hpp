#pragma once

// Stage entry points behind the cyclone-pp command line. Every stage reads
// manifest-verified inputs, writes into a staging directory, records a
// manifest.json and renames the directory into place only on success.

#include "cyclone/models.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cyclone {

/// "8", "6..11" or "6,7,9".
std::vector<int> parse_targets(const std::string& text);

struct GenerateOptions {
    std::optional<std::filesystem::path> spec;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
};

struct AugmentOptions {
    std::filesystem::path scenario;
    double eta = 0.05;
    std::uint64_t seed = 1;
    std::filesystem::path out;
};

struct TrainOptions {
    std::filesystem::path scenario;
    std::vector<Variant> variants;
    std::vector<int> targets;
    double eta = 0.05;
    std::uint64_t seed = 1;
    int epochs = 100;
    int workers = 0;
    std::filesystem::path out;
};

struct PredictOptions {
    std::filesystem::path scenario;
    /// Directory written by `train`; every checkpoint for a requested target
    /// is applied.
    std::optional<std::filesystem::path> checkpoints;
    bool include_members = false;
    std::vector<int> targets;
    std::filesystem::path out;
};

struct EvaluateOptions {
    std::filesystem::path scenario;
    std::vector<std::filesystem::path> predictions;
    std::vector<int> targets;
    std::filesystem::path out;
};

/// Diagnostics emitted while a stage ran (skipped targets and the like).
struct StageReport {
    std::vector<std::string> warnings;
    std::vector<std::filesystem::path> outputs;
    /// Scenario files the stage read, relative to the scenario directory.
    std::vector<std::string> scenario_reads;
};

StageReport cmd_generate(const GenerateOptions& options);
StageReport cmd_augment(const AugmentOptions& options);
StageReport cmd_train(const TrainOptions& options);
StageReport cmd_predict(const PredictOptions& options);
StageReport cmd_evaluate(const EvaluateOptions& options);

std::string checkpoint_name(Variant variant, int target);
std::string prediction_name(Variant variant, int target);

void write_prediction_csv(const std::filesystem::path& path, const GaussianField& field);
GaussianField parse_prediction_csv(const std::string& text, int rows, int cols, const std::string& label);

} // namespace cyclone
