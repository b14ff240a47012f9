// cyclone-pp: generate, augment, train, predict and evaluate stages.

#include "cyclone/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cyclone;

namespace {

std::vector<int> resolve_targets(const std::string& target, const std::string& targets) {
    if (!target.empty() && !targets.empty()) throw std::invalid_argument("give --target or --targets, not both");
    if (!target.empty()) return parse_targets(target);
    if (!targets.empty()) return parse_targets(targets);
    throw std::invalid_argument("--target or --targets is required");
}

std::vector<Variant> resolve_variants(const std::vector<std::string>& names, bool all, bool include_members) {
    std::vector<Variant> out;
    if (all) {
        for (Variant v : kAllVariants) {
            if (include_members || v != Variant::Members) out.push_back(v);
        }
        return out;
    }
    for (const auto& n : names) out.push_back(parse_variant(n));
    return out;
}

void report(const StageReport& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& p : r.outputs) std::cout << p.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble precipitation post-processing for tropical cyclones"};
    app.require_subcommand(1);

    std::string spec, scenario, out, target, targets, checkpoints;
    std::string run_targets = "6..11";
    std::vector<std::string> variants, prediction_dirs;
    bool all_variants = false;
    double eta = 0.05;
    std::uint64_t seed = 1;
    int epochs = 100;
    int workers = 0;
    std::uint64_t generate_seed = 0;

    auto* gen = app.add_subcommand("generate", "write a synthetic scenario directory");
    gen->add_option("--spec", spec, "scenario spec JSON (defaults when omitted)")->check(CLI::ExistingFile);
    auto* gen_seed = gen->add_option("--seed", generate_seed, "override the spec seed");
    gen->add_option("--out", out, "output directory")->required();

    auto* aug = app.add_subcommand("augment", "interpolate and noise-inject a scenario");
    aug->add_option("--scenario", scenario)->required()->check(CLI::ExistingDirectory);
    aug->add_option("--eta", eta, "noise scale relative to member std")->check(CLI::NonNegativeNumber);
    aug->add_option("--seed", seed);
    aug->add_option("--out", out)->required();

    auto* train = app.add_subcommand("train", "train model checkpoints for target reports");
    train->add_option("--scenario", scenario)->required()->check(CLI::ExistingDirectory);
    auto* train_variant = train->add_option("--variant", variants, "fcn, cnn, cnn-dyn, cnn-aug, cnn-all");
    auto* train_all = train->add_flag("--all-variants", all_variants, "every trainable variant");
    train_variant->excludes(train_all);
    train->add_option("--target", target);
    train->add_option("--targets", targets, "e.g. 6..11 or 6,7");
    train->add_option("--eta", eta)->check(CLI::NonNegativeNumber);
    train->add_option("--seed", seed);
    train->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    train->add_option("--workers", workers, "defaults to CYCLONE_PP_THREADS or the core count")
        ->check(CLI::NonNegativeNumber);
    train->add_option("--out", out)->required();

    auto* predict = app.add_subcommand("predict", "apply checkpoints to target reports");
    predict->add_option("--scenario", scenario)->required()->check(CLI::ExistingDirectory);
    predict->add_option("--checkpoints", checkpoints, "directory written by train")->check(CLI::ExistingDirectory);
    predict->add_option("--variant", variants, "members adds the raw-ensemble baseline");
    predict->add_option("--target", target);
    predict->add_option("--targets", targets);
    predict->add_option("--out", out)->required();

    auto* evaluate = app.add_subcommand("evaluate", "score predictions against observations");
    evaluate->add_option("--scenario", scenario)->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--predictions", prediction_dirs, "directories written by predict")
        ->required()
        ->check(CLI::ExistingDirectory);
    evaluate->add_option("--target", target);
    evaluate->add_option("--targets", targets);
    evaluate->add_option("--out", out)->required();

    auto* run = app.add_subcommand("run", "generate, train every variant, predict and evaluate");
    run->add_option("--spec", spec)->check(CLI::ExistingFile);
    run->add_option("--targets", run_targets, "defaults to 6..11");
    run->add_option("--eta", eta)->check(CLI::NonNegativeNumber);
    run->add_option("--seed", seed);
    run->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    run->add_option("--workers", workers)->check(CLI::NonNegativeNumber);
    run->add_option("--out", out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            GenerateOptions o;
            if (!spec.empty()) o.spec = spec;
            if (gen_seed->count()) o.seed = generate_seed;
            o.out = out;
            report(cmd_generate(o));
        } else if (aug->parsed()) {
            report(cmd_augment({scenario, eta, seed, out}));
        } else if (train->parsed()) {
            TrainOptions o;
            o.scenario = scenario;
            o.variants = resolve_variants(variants, all_variants, false);
            o.targets = resolve_targets(target, targets);
            o.eta = eta;
            o.seed = seed;
            o.epochs = epochs;
            o.workers = workers;
            o.out = out;
            report(cmd_train(o));
        } else if (predict->parsed()) {
            PredictOptions o;
            o.scenario = scenario;
            if (!checkpoints.empty()) o.checkpoints = checkpoints;
            for (Variant v : resolve_variants(variants, false, true)) {
                if (v != Variant::Members) {
                    throw std::invalid_argument("predict: trained variants come from --checkpoints");
                }
                o.include_members = true;
            }
            o.targets = resolve_targets(target, targets);
            o.out = out;
            report(cmd_predict(o));
        } else if (evaluate->parsed()) {
            EvaluateOptions o;
            o.scenario = scenario;
            for (const auto& p : prediction_dirs) o.predictions.emplace_back(p);
            o.targets = resolve_targets(target, targets);
            o.out = out;
            report(cmd_evaluate(o));
        } else if (run->parsed()) {
            const fs::path root = out;
            if (fs::exists(root)) throw std::invalid_argument(root.string() + " already exists");
            fs::create_directories(root);
            GenerateOptions g;
            if (!spec.empty()) g.spec = spec;
            g.out = root / "scenario";
            report(cmd_generate(g));
            TrainOptions t;
            t.scenario = g.out;
            t.variants = resolve_variants({}, true, false);
            t.targets = parse_targets(run_targets);
            t.eta = eta;
            t.seed = seed;
            t.epochs = epochs;
            t.workers = workers;
            t.out = root / "models";
            report(cmd_train(t));
            report(cmd_predict({g.out, t.out, true, t.targets, root / "predictions"}));
            report(cmd_evaluate({g.out, {root / "predictions"}, t.targets, root / "metrics"}));
        }
    } catch (const std::exception& e) {
        std::cerr << "cyclone-pp: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
