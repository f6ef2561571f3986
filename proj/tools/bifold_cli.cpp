// Command line front end for the fusion library: weight inspection,
// single-stage fusion, the two-stage cascade, evaluation, and synthetic
// data generation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bifold/bifold.hpp"

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level_from_env() {
    const char* raw = std::getenv("BIFOLD_LOG");
    if (raw == nullptr) return LogLevel::error;
    std::string value(raw);
    if (value == "error") return LogLevel::error;
    if (value == "info") return LogLevel::info;
    if (value == "debug") return LogLevel::debug;
    std::cerr << "warning: unknown BIFOLD_LOG value '" << value << "', using error\n";
    return LogLevel::error;
}

LogLevel g_log_level = LogLevel::error;

void log_info(const std::string& message) {
    if (g_log_level >= LogLevel::info) std::cerr << "[info] " << message << "\n";
}

void log_debug(const std::string& message) {
    if (g_log_level >= LogLevel::debug) std::cerr << "[debug] " << message << "\n";
}

// Usage mistakes (bad flag combinations) exit 1; data problems exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string format_weight(double w) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5f", w);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw bifold::Error(bifold::ErrorCode::Io, "cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw bifold::Error(bifold::ErrorCode::Io, "failed writing '" + path + "'");
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty())
        std::cout << text;
    else
        write_text(out_path, text);
}

int cmd_weights(const std::string& manifest_path, const std::string& stage_name,
                const std::string& out_path) {
    bifold::Stage stage = bifold::parse_stage(stage_name);
    bifold::Manifest manifest = bifold::load_manifest(manifest_path);
    const std::vector<bifold::ModelProfile>& profiles = manifest.profiles(stage);
    bifold::WeightVector weights = bifold::uwcs_weights(profiles);
    log_info("computed weights for " + std::to_string(profiles.size()) + " models");
    std::string text = "model_id,weight\n";
    for (std::size_t i = 0; i < profiles.size(); ++i)
        text += profiles[i].model_id() + "," + format_weight(weights[i]) + "\n";
    emit(text, out_path);
    return 0;
}

bifold::WeightSource weight_source_for(bifold::Method method, bool have_manifest,
                                       const std::vector<double>& explicit_weights) {
    if (!explicit_weights.empty() && method != bifold::Method::uwm)
        throw UsageError("--weights only applies to --method uwm");
    switch (method) {
    case bifold::Method::soft:
    case bifold::Method::hard:
        return bifold::WeightSource::uniform(); // unused by these methods
    case bifold::Method::uwm:
        if (!explicit_weights.empty())
            return bifold::WeightSource::explicit_list(explicit_weights);
        if (have_manifest) return bifold::WeightSource::uwcs();
        throw UsageError("--method uwm needs --weights or --manifest");
    case bifold::Method::esvt:
    case bifold::Method::nwm:
        if (!have_manifest)
            throw UsageError("--method " + std::string(bifold::to_string(method)) +
                             " needs --manifest");
        return bifold::WeightSource::uwcs();
    }
    throw UsageError("unhandled method");
}

int cmd_fuse(const std::string& predictions_path, const std::string& stage_name,
             const std::string& method_name, const std::string& manifest_path,
             const std::vector<double>& explicit_weights, const std::string& out_path) {
    bifold::Stage stage = bifold::parse_stage(stage_name);
    bifold::Method method = bifold::parse_method(method_name);
    std::optional<bifold::Manifest> manifest;
    if (!manifest_path.empty()) manifest = bifold::load_manifest(manifest_path);
    bifold::WeightSource source =
        weight_source_for(method, manifest.has_value(), explicit_weights);

    bifold::PredictionTable table = bifold::load_predictions(predictions_path, stage);
    log_info("loaded " + std::to_string(table.size()) + " predictions from '" +
             predictions_path + "'");
    const std::vector<bifold::ModelProfile>* profiles =
        manifest ? &manifest->profiles(stage) : nullptr;
    bifold::TableFusion fusion = bifold::fuse_table(table, method, source, profiles);

    std::string text = "instance_id,predicted_class,winning_model,tie_broken";
    for (std::string_view label : bifold::stage_labels(stage))
        text += ",score_" + std::string(label);
    text += "\n";
    char buf[32];
    for (const auto& [instance_id, result] : fusion.results) {
        text += instance_id + "," + std::to_string(result.predicted_class) + ",";
        if (result.winning_model) text += fusion.model_order[*result.winning_model];
        text += result.tie_broken ? ",true" : ",false";
        for (double score : result.fused_scores) {
            std::snprintf(buf, sizeof(buf), "%.17g", score);
            text += ",";
            text += buf;
        }
        text += "\n";
    }
    emit(text, out_path);
    return 0;
}

int cmd_pipeline(const std::string& det_path, const std::string& cls_path,
                 const std::string& manifest_path, const std::string& method_name,
                 const std::vector<double>& explicit_weights, const std::string& out_path) {
    bifold::Method method = bifold::parse_method(method_name);
    bifold::Manifest manifest = bifold::load_manifest(manifest_path);
    bifold::WeightSource source = weight_source_for(method, true, explicit_weights);

    bifold::PredictionTable det = bifold::load_predictions(det_path, bifold::Stage::detection);
    bifold::PredictionTable cls =
        bifold::load_predictions(cls_path, bifold::Stage::classification);
    log_info("loaded " + std::to_string(det.size()) + " detection and " +
             std::to_string(cls.size()) + " classification predictions");

    bifold::BiFoldConfig config(method);
    config.detection_weights = source;
    config.classification_weights = source;
    std::vector<bifold::BiFoldOutcome> outcomes = bifold::run_batch(det, cls, config, &manifest);
    std::vector<bifold::OutcomeRecord> records = bifold::to_records(outcomes);
    log_info("cascade produced " + std::to_string(records.size()) + " outcomes");

    if (out_path.empty()) {
        bifold::write_outcomes(std::cout, records);
    } else {
        bifold::write_outcomes(out_path, records);
    }
    return 0;
}

int cmd_eval(const std::string& outcomes_path, const std::string& truth_path,
             const std::string& out_path) {
    std::vector<bifold::OutcomeRecord> outcomes = bifold::load_outcomes(outcomes_path);
    std::vector<bifold::GroundTruth> truth = bifold::load_truth(truth_path);
    log_info("evaluating " + std::to_string(outcomes.size()) + " outcomes");
    bifold::OutcomeEvaluation eval = bifold::evaluate_outcomes(outcomes, truth);
    std::cout << bifold::format_evaluation(eval);
    if (!out_path.empty())
        write_text(out_path, bifold::evaluation_to_json(eval).dump(2) + "\n");
    return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
    bifold::SimulationSpec spec = bifold::load_simulation_spec(spec_path, seed);
    std::filesystem::create_directories(out_dir);
    for (const std::optional<bifold::SyntheticSpec>& section :
         {spec.detection, spec.classification}) {
        if (!section) continue;
        std::string stage_name(bifold::to_string(section->stage));
        log_debug("generating " + stage_name + " data with seed " +
                  std::to_string(section->seed));
        bifold::SyntheticData data = bifold::generate(*section);
        std::string predictions_path = out_dir + "/" + stage_name + "_predictions.csv";
        std::string truth_path = out_dir + "/" + stage_name + "_truth.csv";
        bifold::write_predictions(predictions_path, data.predictions);
        bifold::write_truth(truth_path, data.truth);
        log_info("wrote " + predictions_path + " and " + truth_path);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    g_log_level = log_level_from_env();

    CLI::App app{"Decision fusion for two-stage detection and classification ensembles"};
    app.require_subcommand(1);

    std::string manifest_path, stage_name, out_path;
    auto* weights_cmd = app.add_subcommand("weights", "Show F1-proportional model weights");
    weights_cmd->add_option("--manifest", manifest_path, "Model profile manifest (JSON)")
        ->required();
    weights_cmd->add_option("--stage", stage_name, "detection or classification")->required();
    weights_cmd->add_option("--out", out_path, "Write CSV here instead of stdout");

    std::string fuse_predictions, fuse_stage, fuse_method, fuse_manifest, fuse_out;
    std::vector<double> fuse_weights;
    auto* fuse_cmd = app.add_subcommand("fuse", "Fuse one stage's model predictions");
    fuse_cmd->add_option("predictions", fuse_predictions, "Prediction CSV")->required();
    fuse_cmd->add_option("--stage", fuse_stage, "detection or classification")->required();
    fuse_cmd->add_option("--method", fuse_method, "soft, hard, uwm, esvt, or nwm")->required();
    fuse_cmd->add_option("--manifest", fuse_manifest, "Model profile manifest (JSON)");
    fuse_cmd->add_option("--weights", fuse_weights, "Explicit uwm weights, comma separated")
        ->delimiter(',');
    fuse_cmd->add_option("--out", fuse_out, "Write CSV here instead of stdout");

    std::string pipe_det, pipe_cls, pipe_manifest, pipe_method, pipe_out;
    std::vector<double> pipe_weights;
    auto* pipeline_cmd =
        app.add_subcommand("pipeline", "Run the detection-then-classification cascade");
    pipeline_cmd->add_option("--det", pipe_det, "Detection prediction CSV")->required();
    pipeline_cmd->add_option("--cls", pipe_cls, "Classification prediction CSV")->required();
    pipeline_cmd->add_option("--manifest", pipe_manifest, "Model profile manifest (JSON)")
        ->required();
    pipeline_cmd->add_option("--method", pipe_method, "soft, hard, uwm, esvt, or nwm")
        ->required();
    pipeline_cmd->add_option("--weights", pipe_weights, "Explicit uwm weights, comma separated")
        ->delimiter(',');
    pipeline_cmd->add_option("--out", pipe_out, "Write outcome CSV here instead of stdout");

    std::string eval_outcomes, eval_truth, eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "Score cascade outcomes against ground truth");
    eval_cmd->add_option("outcomes", eval_outcomes, "Outcome CSV")->required();
    eval_cmd->add_option("--truth", eval_truth, "Ground truth CSV")->required();
    eval_cmd->add_option("--out", eval_out, "Write JSON report here");

    std::string sim_spec, sim_out;
    std::optional<std::uint64_t> sim_seed;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate synthetic prediction data");
    simulate_cmd->add_option("--spec", sim_spec, "Simulation spec (JSON)")->required();
    simulate_cmd->add_option("--out", sim_out, "Output directory")->required();
    simulate_cmd->add_option("--seed", sim_seed, "Override the spec's top-level seed");

    try {
        app.parse(argc, argv);
        if (weights_cmd->parsed()) return cmd_weights(manifest_path, stage_name, out_path);
        if (fuse_cmd->parsed())
            return cmd_fuse(fuse_predictions, fuse_stage, fuse_method, fuse_manifest,
                            fuse_weights, fuse_out);
        if (pipeline_cmd->parsed())
            return cmd_pipeline(pipe_det, pipe_cls, pipe_manifest, pipe_method, pipe_weights,
                                pipe_out);
        if (eval_cmd->parsed()) return cmd_eval(eval_outcomes, eval_truth, eval_out);
        if (simulate_cmd->parsed()) return cmd_simulate(sim_spec, sim_out, sim_seed);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const bifold::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        // A malformed spec or an unknown stage/method name is a usage
        // problem; everything else is a data problem.
        return e.code() == bifold::ErrorCode::InvalidSpec ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
