#include "cyclone/pipeline.hpp"

#include "cyclone/augmentation.hpp"
#include "cyclone/evaluation.hpp"
#include "cyclone/io.hpp"
#include "cyclone/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cyclone {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string input_record(const fs::path& dir) {
    return dir.string() + "@" + sha256_file(dir / kManifestName);
}

nlohmann::json targets_json(const std::vector<int>& targets) { return targets; }

std::vector<Report> read_history(const ScenarioStore& store, int target) {
    std::vector<Report> history;
    for (ReportIndex idx : store.original_indices()) {
        if (idx < ReportIndex::whole(target)) history.push_back(store.read_report(idx, ReportOrigin::Original, true));
    }
    return history;
}

std::vector<LatLon> read_target_track(const ScenarioStore& store, int target) {
    std::vector<LatLon> track;
    for (ReportIndex idx : store.original_indices()) {
        if (idx <= ReportIndex::whole(target)) track.push_back(store.read_center(idx, ReportOrigin::Original));
    }
    return track;
}

bool has_original(const ScenarioStore& store, int target) {
    const auto idx = store.original_indices();
    return std::find(idx.begin(), idx.end(), ReportIndex::whole(target)) != idx.end();
}

std::optional<std::pair<Variant, int>> parse_artifact_name(const std::string& name, const std::string& prefix,
                                                           const std::string& suffix) {
    if (name.rfind(prefix, 0) != 0 || name.size() <= prefix.size() + suffix.size() ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
        return std::nullopt;
    }
    const std::string core = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    const auto sep = core.rfind('_');
    if (sep == std::string::npos) return std::nullopt;
    try {
        const Variant v = parse_variant(core.substr(0, sep));
        int k = 0;
        const std::string num = core.substr(sep + 1);
        const auto res = std::from_chars(num.data(), num.data() + num.size(), k);
        if (res.ec != std::errc{} || res.ptr != num.data() + num.size()) return std::nullopt;
        return std::make_pair(v, k);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

} // namespace

std::vector<int> parse_targets(const std::string& text) {
    auto to_int = [&](const std::string& s) {
        int v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw std::invalid_argument("bad target list '" + text + "'");
        }
        return v;
    };
    std::vector<int> out;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const int lo = to_int(text.substr(0, dots));
        const int hi = to_int(text.substr(dots + 2));
        if (hi < lo) throw std::invalid_argument("empty target range '" + text + "'");
        for (int k = lo; k <= hi; ++k) out.push_back(k);
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_int(item));
    }
    if (out.empty()) throw std::invalid_argument("empty target list");
    for (int k : out) {
        if (k < 1) throw std::invalid_argument("targets must be >= 1");
    }
    std::vector<int> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("repeated target in '" + text + "'");
    }
    return out;
}

std::string checkpoint_name(Variant variant, int target) {
    return std::string("model_") + to_string(variant) + "_" + std::to_string(target) + ".json";
}

std::string prediction_name(Variant variant, int target) {
    return std::string("pred_") + to_string(variant) + "_" + std::to_string(target) + ".csv";
}

void write_prediction_csv(const fs::path& path, const GaussianField& field) {
    std::string text = "row,col,mu,sigma\n";
    for (Eigen::Index r = 0; r < field.mu.rows(); ++r) {
        for (Eigen::Index c = 0; c < field.mu.cols(); ++c) {
            text += std::to_string(r) + "," + std::to_string(c) + "," + format_double(field.mu(r, c)) + "," +
                    format_double(field.sigma(r, c)) + "\n";
        }
    }
    write_text_file(path, text);
}

GaussianField parse_prediction_csv(const std::string& text, int rows, int cols, const std::string& label) {
    GaussianField out{Field::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN()),
                      Field::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN())};
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != "row,col,mu,sigma") throw std::runtime_error(label + ": bad header");
    long seen = 0;
    while (std::getline(ss, line)) {
        int r = 0, c = 0;
        double mu = 0, sigma = 0;
        char tail = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf%c", &r, &c, &mu, &sigma, &tail) != 4 || r < 0 || r >= rows ||
            c < 0 || c >= cols) {
            throw std::runtime_error(label + ": malformed line '" + line + "'");
        }
        out.mu(r, c) = mu;
        out.sigma(r, c) = sigma;
        ++seen;
    }
    if (seen != static_cast<long>(rows) * cols) throw std::runtime_error(label + ": wrong number of cells");
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------

StageReport cmd_generate(const GenerateOptions& options) {
    const auto start = Clock::now();
    ScenarioSpec spec;
    std::vector<std::string> inputs;
    if (options.spec) {
        spec = scenario_spec_from_json(nlohmann::json::parse(read_text_file(*options.spec)));
        inputs.push_back(options.spec->string() + "@" + sha256_file(*options.spec));
    }
    if (options.seed) spec.seed = *options.seed;
    spec.validate();
    const GridDomain domain = make_island_domain(spec.domain);
    const Scenario scenario = generate_scenario(spec, domain);

    StagingDir staging(options.out);
    write_domain_file(staging.path() / "domain.txt", domain);
    write_text_file(staging.path() / "spec.json", to_json(spec).dump(2) + "\n");
    std::string track = "index,lat,lon,valid_time\n";
    for (const auto& r : scenario.reports) {
        write_report_dir(staging.path() / report_dir_name(r.index, r.origin), r);
        track += r.index.to_string() + "," + format_double(r.tc_center.lat) + "," + format_double(r.tc_center.lon) +
                 "," + format_utc(r.valid_time) + "\n";
    }
    write_text_file(staging.path() / "track.csv", track);
    write_manifest(staging.path(), {"generate", to_json(spec), spec.seed, inputs, seconds_since(start)});
    staging.commit();
    return {scenario.warnings, {options.out}, {}};
}

StageReport cmd_augment(const AugmentOptions& options) {
    const auto start = Clock::now();
    const ScenarioStore store(options.scenario);
    std::vector<Report> originals;
    for (ReportIndex idx : store.original_indices()) {
        originals.push_back(store.read_report(idx, ReportOrigin::Original, true));
    }
    const AugmentedSet set = build_augmented_set(originals, options.eta, options.seed);

    StagingDir staging(options.out);
    write_domain_file(staging.path() / "domain.txt", store.domain());
    for (const auto& r : set.reports) {
        r.validate(store.domain());
        write_report_dir(staging.path() / report_dir_name(r.index, r.origin), r);
    }
    const nlohmann::json config = {{"eta", options.eta}, {"seed", options.seed}};
    write_manifest(staging.path(), {"augment", config, options.seed, {input_record(options.scenario)}, seconds_since(start)});
    staging.commit();
    return {{}, {options.out}, store.accessed()};
}

StageReport cmd_train(const TrainOptions& options) {
    const auto start = Clock::now();
    if (options.variants.empty()) throw std::invalid_argument("train: no variant given");
    if (options.targets.empty()) throw std::invalid_argument("train: no target given");
    for (Variant v : options.variants) {
        if (v == Variant::Members) throw std::invalid_argument("train: the members baseline needs no training");
    }
    const ScenarioStore store(options.scenario);
    StageReport report;

    struct Job {
        ModelConfig config;
        int target;
    };
    std::vector<Job> jobs;
    for (int k : options.targets) {
        if (!has_original(store, k)) throw std::invalid_argument("train: no original report " + std::to_string(k));
        for (Variant v : options.variants) {
            ModelConfig c = ModelConfig::for_variant(v, options.seed);
            c.noise_scale = options.eta;
            c.epochs = options.epochs;
            jobs.push_back({c, k});
        }
    }

    // Histories are read once per target, before any training starts.
    std::map<int, std::vector<Report>> histories;
    for (int k : options.targets) {
        if (!histories.count(k)) histories[k] = read_history(store, k);
        if (histories[k].empty()) throw std::invalid_argument("train: no reports before target " + std::to_string(k));
    }

    StagingDir staging(options.out);
    std::vector<std::string> payloads(jobs.size());
    parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
        const TrainedModel model = train_model(jobs[i].config, histories.at(jobs[i].target), store.domain());
        payloads[i] = model.to_json().dump() + "\n";
    });

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].config.use_augmentation && histories.at(jobs[i].target).size() < 2) {
            report.warnings.push_back(std::string(to_string(jobs[i].config.variant)) + " at target " +
                                      std::to_string(jobs[i].target) + ": trained without augmentation (one report)");
        }
        const fs::path path = staging.path() / checkpoint_name(jobs[i].config.variant, jobs[i].target);
        write_text_file(path, payloads[i]);
        report.outputs.push_back(options.out / path.filename());
    }
    nlohmann::json variants = nlohmann::json::array();
    for (Variant v : options.variants) variants.push_back(to_string(v));
    const nlohmann::json config = {{"variants", variants},
                                   {"targets", targets_json(options.targets)},
                                   {"eta", options.eta},
                                   {"epochs", options.epochs}};
    write_manifest(staging.path(), {"train", config, options.seed, {input_record(options.scenario)}, seconds_since(start)});
    staging.commit();
    report.scenario_reads = store.accessed();
    return report;
}

StageReport cmd_predict(const PredictOptions& options) {
    const auto start = Clock::now();
    if (options.targets.empty()) throw std::invalid_argument("predict: no target given");
    if (!options.checkpoints && !options.include_members) {
        throw std::invalid_argument("predict: give a checkpoint directory and/or --variant members");
    }
    const ScenarioStore store(options.scenario);
    std::optional<VerifiedDir> models;
    std::vector<std::string> inputs{input_record(options.scenario)};
    if (options.checkpoints) {
        models.emplace(*options.checkpoints);
        inputs.push_back(input_record(*options.checkpoints));
    }

    StageReport report;
    StagingDir staging(options.out);
    for (int k : options.targets) {
        if (!has_original(store, k)) throw std::invalid_argument("predict: no original report " + std::to_string(k));
        const Report target = store.read_report(ReportIndex::whole(k), ReportOrigin::Original, false);
        if (options.include_members) {
            const fs::path path = staging.path() / prediction_name(Variant::Members, k);
            write_prediction_csv(path, predict_members_baseline(target));
            report.outputs.push_back(options.out / path.filename());
        }
        if (!models) continue;
        bool found = false;
        for (const auto& rel : models->listed()) {
            const auto parsed = parse_artifact_name(rel, "model_", ".json");
            if (!parsed || parsed->second != k) continue;
            found = true;
            const TrainedModel model = TrainedModel::from_json(nlohmann::json::parse(models->read(rel)));
            if (model.config().variant != parsed->first) {
                throw std::runtime_error(rel + ": checkpoint variant does not match file name");
            }
            const GaussianField field = model.predict(target, store.domain(), read_target_track(store, k));
            const fs::path path = staging.path() / prediction_name(parsed->first, k);
            write_prediction_csv(path, field);
            report.outputs.push_back(options.out / path.filename());
        }
        if (!found) report.warnings.push_back("no checkpoint for target " + std::to_string(k));
    }
    if (report.outputs.empty()) throw std::runtime_error("predict: no checkpoint matches the requested targets");
    const nlohmann::json config = {{"targets", targets_json(options.targets)}, {"members", options.include_members}};
    write_manifest(staging.path(), {"predict", config, 0, inputs, seconds_since(start)});
    staging.commit();
    report.scenario_reads = store.accessed();
    return report;
}

StageReport cmd_evaluate(const EvaluateOptions& options) {
    const auto start = Clock::now();
    if (options.targets.empty()) throw std::invalid_argument("evaluate: no target given");
    if (options.predictions.empty()) throw std::invalid_argument("evaluate: no prediction directory given");
    const ScenarioStore store(options.scenario);
    const GridDomain& domain = store.domain();
    std::vector<std::string> inputs{input_record(options.scenario)};

    // variant -> target -> field
    std::map<Variant, std::map<int, GaussianField>> predictions;
    const std::set<int> wanted(options.targets.begin(), options.targets.end());
    for (const auto& dir : options.predictions) {
        const VerifiedDir files(dir);
        inputs.push_back(input_record(dir));
        for (const auto& rel : files.listed()) {
            const auto parsed = parse_artifact_name(rel, "pred_", ".csv");
            if (!parsed || !wanted.count(parsed->second)) continue;
            if (predictions[parsed->first].count(parsed->second)) {
                throw std::runtime_error("duplicate prediction " + rel);
            }
            predictions[parsed->first][parsed->second] =
                parse_prediction_csv(files.read(rel), domain.rows(), domain.cols(), rel);
        }
    }
    if (predictions.empty()) throw std::runtime_error("evaluate: no predictions for the requested targets");

    std::vector<std::pair<std::string, SkillTable>> tables;
    std::map<Variant, SkillTable> pooled;
    std::map<Variant, std::pair<std::vector<double>, std::vector<double>>> reliability_data;
    std::map<int, std::vector<std::pair<std::string, std::vector<ExceedanceCell>>>> maps;
    StageReport report;

    for (int k : options.targets) {
        if (!has_original(store, k)) throw std::invalid_argument("evaluate: no original report " + std::to_string(k));
        const Report verifying = store.read_report(ReportIndex::whole(k), ReportOrigin::Original, true);
        const GaussianField reference = predict_members_baseline(verifying);
        std::map<Variant, const GaussianField*> fields;
        fields[Variant::Members] = &reference;
        for (const auto& [variant, by_target] : predictions) {
            const auto it = by_target.find(k);
            if (it == by_target.end()) {
                report.warnings.push_back(std::string("no ") + to_string(variant) + " prediction for target " +
                                          std::to_string(k));
                continue;
            }
            fields[variant] = &it->second;
            SkillTable t = build_skill_table(it->second, reference, verifying, domain);
            pooled[variant].insert(pooled[variant].end(), t.begin(), t.end());
        }
        for (const auto& [variant, field] : fields) {
            const Field p = exceedance_probability(*field, kExceedanceThresholdMm);
            maps[k].emplace_back(to_string(variant), exceedance_map(p, domain));
            auto& [probs, obs] = reliability_data[variant];
            for (Eigen::Index i = 0; i < p.size(); ++i) {
                if (!domain.land_mask().data()[i]) continue;
                probs.push_back(p.data()[i]);
                obs.push_back(verifying.observation->data()[i]);
            }
        }
    }

    StagingDir staging(options.out);
    std::vector<std::pair<std::string, std::map<Stratum, BoxSummary>>> summaries;
    for (const auto& [variant, table] : pooled) {
        tables.emplace_back(to_string(variant), table);
        summaries.emplace_back(to_string(variant), crpss_by_stratum(table));
    }
    write_skill_table_csv(staging.path() / "skill_table.csv", tables);
    write_crpss_summary_csv(staging.path() / "crpss_summary.csv", summaries);
    for (const auto& [k, m] : maps) {
        write_exceedance_csv(staging.path() / ("exceedance_map_" + std::to_string(k) + ".csv"), m);
    }
    std::vector<std::pair<std::string, ReliabilityBins>> diagrams;
    for (const auto& [variant, data] : reliability_data) {
        diagrams.emplace_back(to_string(variant), reliability_diagram(data.first, data.second));
    }
    write_reliability_csv(staging.path() / "reliability.csv", diagrams);
    for (const auto& entry : fs::directory_iterator(staging.path())) {
        report.outputs.push_back(options.out / entry.path().filename());
    }
    std::sort(report.outputs.begin(), report.outputs.end());
    const nlohmann::json config = {{"targets", targets_json(options.targets)},
                                   {"threshold_mm", kExceedanceThresholdMm}};
    write_manifest(staging.path(), {"evaluate", config, 0, inputs, seconds_since(start)});
    staging.commit();
    report.scenario_reads = store.accessed();
    return report;
}

} // namespace cyclone
