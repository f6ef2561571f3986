#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bifold/errors.hpp"
#include "bifold/metrics.hpp"
#include "bifold/profiles.hpp"
#include "bifold/types.hpp"

namespace bifold {

struct PredictionRecord {
    std::string instance_id;
    std::string model_id;
    int run_id = 1;
    ProbabilityVector probabilities;
};

// All predictions for one stage. Model order is first appearance, which
// downstream code treats as the fusion order when no manifest overrides it.
class PredictionTable {
public:
    explicit PredictionTable(Stage stage) : stage_(stage) {}

    Stage stage() const noexcept { return stage_; }

    void add(PredictionRecord record) {
        if (record.probabilities.class_count() != class_count(stage_))
            throw Error(ErrorCode::ShapeMismatch,
                        "prediction for instance '" + record.instance_id + "' has " +
                            std::to_string(record.probabilities.class_count()) +
                            " classes, stage needs " + std::to_string(class_count(stage_)));
        auto key = std::make_tuple(record.instance_id, record.model_id, record.run_id);
        if (!keys_.insert(key).second)
            throw Error(ErrorCode::DuplicateRecord,
                        "duplicate prediction for instance '" + record.instance_id + "', model '" +
                            record.model_id + "', run " + std::to_string(record.run_id));
        if (model_set_.insert(record.model_id).second) model_ids_.push_back(record.model_id);
        instance_set_.insert(record.instance_id);
        index_[{record.instance_id, record.model_id}].push_back(records_.size());
        records_.push_back(std::move(record));
    }

    const std::vector<PredictionRecord>& records() const noexcept { return records_; }
    const std::vector<std::string>& model_ids() const noexcept { return model_ids_; }

    std::vector<std::string> instance_ids() const {
        return {instance_set_.begin(), instance_set_.end()};
    }

    bool has(const std::string& instance_id, const std::string& model_id) const {
        return index_.count({instance_id, model_id}) != 0;
    }

    /// Per-run predictions in file order for one instance/model pair.
    std::vector<ProbabilityVector> runs(const std::string& instance_id,
                                        const std::string& model_id) const {
        auto it = index_.find({instance_id, model_id});
        if (it == index_.end())
            throw Error(ErrorCode::MissingPredictions,
                        "no predictions for instance '" + instance_id + "', model '" + model_id +
                            "'");
        std::vector<ProbabilityVector> out;
        out.reserve(it->second.size());
        for (std::size_t i : it->second) out.push_back(records_[i].probabilities);
        return out;
    }

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

private:
    Stage stage_;
    std::vector<PredictionRecord> records_;
    std::vector<std::string> model_ids_;
    std::set<std::string> model_set_;
    std::set<std::string> instance_set_;
    std::set<std::tuple<std::string, std::string, int>> keys_;
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> index_;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    fields.push_back(current);
    return fields;
}

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

inline Error malformed(std::size_t line_no, const std::string& what) {
    return Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + what);
}

inline double parse_double(const std::string& field, std::size_t line_no) {
    if (field.empty()) throw malformed(line_no, "empty numeric field");
    const char* begin = field.c_str();
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end != begin + field.size())
        throw malformed(line_no, "'" + field + "' is not a number");
    return value;
}

inline long parse_long(const std::string& field, std::size_t line_no) {
    if (field.empty()) throw malformed(line_no, "empty integer field");
    const char* begin = field.c_str();
    char* end = nullptr;
    long value = std::strtol(begin, &end, 10);
    if (end != begin + field.size())
        throw malformed(line_no, "'" + field + "' is not an integer");
    return value;
}

/// Maps expected column names to their positions in the header. Columns may
/// appear in any order but the name set must match exactly.
inline std::map<std::string, std::size_t> bind_header(const std::string& header_line,
                                                      std::span<const std::string> expected) {
    std::vector<std::string> names = split_csv(header_line);
    std::map<std::string, std::size_t> positions;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (!positions.emplace(names[i], i).second)
            throw malformed(1, "duplicate column '" + names[i] + "'");
    if (positions.size() != expected.size())
        throw malformed(1, "expected " + std::to_string(expected.size()) + " columns, found " +
                               std::to_string(positions.size()));
    for (const std::string& name : expected)
        if (positions.find(name) == positions.end())
            throw malformed(1, "missing column '" + name + "'");
    return positions;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

inline std::string format_probability(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

inline std::vector<std::string> prediction_columns(Stage stage) {
    std::vector<std::string> cols{"instance_id", "model_id", "run_id"};
    for (std::string_view label : stage_labels(stage)) cols.push_back("p_" + std::string(label));
    return cols;
}

} // namespace detail

/// Loads one stage's prediction CSV. Probabilities must lie in [0,1] and
/// each row must sum to 1 within 1e-3; rows inside that tolerance are
/// rescaled to sum exactly.
inline PredictionTable load_predictions(const std::string& path, Stage stage) {
    std::ifstream in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw detail::malformed(1, "missing header");
    std::vector<std::string> columns = detail::prediction_columns(stage);
    auto positions = detail::bind_header(detail::strip_cr(line), columns);
    std::size_t k = class_count(stage);

    PredictionTable table(stage);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_csv(line);
        if (fields.size() != columns.size())
            throw detail::malformed(line_no, "expected " + std::to_string(columns.size()) +
                                                 " fields, found " + std::to_string(fields.size()));
        std::string instance_id = fields[positions.at("instance_id")];
        std::string model_id = fields[positions.at("model_id")];
        if (instance_id.empty()) throw detail::malformed(line_no, "empty instance_id");
        if (model_id.empty()) throw detail::malformed(line_no, "empty model_id");
        int run_id = static_cast<int>(detail::parse_long(fields[positions.at("run_id")], line_no));
        std::vector<double> probs(k, 0.0);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double p = detail::parse_double(fields[positions.at(columns[3 + c])], line_no);
            if (!(p >= 0.0 && p <= 1.0))
                throw Error(ErrorCode::ProbabilityOutOfRange,
                            "line " + std::to_string(line_no) + ": probability " +
                                fields[positions.at(columns[3 + c])] + " outside [0,1]");
            probs[c] = p;
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-3)
            throw Error(ErrorCode::DistributionViolation,
                        "line " + std::to_string(line_no) + ": probabilities sum to " +
                            std::to_string(sum));
        table.add(PredictionRecord{std::move(instance_id), std::move(model_id), run_id,
                                   ProbabilityVector::renormalized(std::move(probs), 1e-3)});
    }
    return table;
}

inline void write_predictions(const std::string& path, const PredictionTable& table) {
    std::ofstream out = detail::open_output(path);
    std::vector<std::string> columns = detail::prediction_columns(table.stage());
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const PredictionRecord& record : table.records()) {
        out << record.instance_id << "," << record.model_id << "," << record.run_id;
        for (double p : record.probabilities.values())
            out << "," << detail::format_probability(p);
        out << "\n";
    }
    detail::finish_output(out, path);
}

/// Validation F1 profiles for both stages, loaded together so the cascade
/// can weight each stage's models from one file.
struct Manifest {
    std::vector<ModelProfile> detection;
    std::vector<ModelProfile> classification;

    const std::vector<ModelProfile>& profiles(Stage stage) const noexcept {
        return stage == Stage::detection ? detection : classification;
    }
};

namespace detail {

inline std::vector<ModelProfile> parse_manifest_stage(const nlohmann::json& entries, Stage stage,
                                                      const std::string& key) {
    if (!entries.is_array())
        throw Error(ErrorCode::ManifestInvalid, "'" + key + "' must be a list of models");
    if (entries.empty())
        throw Error(ErrorCode::ManifestIncomplete, "'" + key + "' model list is empty");
    std::vector<ModelProfile> profiles;
    std::set<std::string> ids;
    for (const nlohmann::json& entry : entries) {
        if (!entry.is_object())
            throw Error(ErrorCode::ManifestInvalid, "'" + key + "' entries must be objects");
        for (const auto& item : entry.items())
            if (item.key() != "model_id" && item.key() != "per_class_f1" &&
                item.key() != "f1_average")
                throw Error(ErrorCode::ManifestInvalid,
                            "unknown key '" + item.key() + "' in '" + key + "' entry");
        if (!entry.contains("model_id") || !entry["model_id"].is_string() ||
            entry["model_id"].get<std::string>().empty())
            throw Error(ErrorCode::ManifestInvalid, "'" + key + "' entry needs a model_id string");
        std::string model_id = entry["model_id"].get<std::string>();
        if (!ids.insert(model_id).second)
            throw Error(ErrorCode::DuplicateRecord,
                        "model '" + model_id + "' appears twice under '" + key + "'");

        bool has_per_class = entry.contains("per_class_f1");
        bool has_average = entry.contains("f1_average");
        if (!has_per_class && !has_average)
            throw Error(ErrorCode::ManifestInvalid,
                        "model '" + model_id + "' needs per_class_f1 or f1_average");

        std::vector<double> per_class;
        if (has_per_class) {
            const nlohmann::json& arr = entry["per_class_f1"];
            if (!arr.is_array())
                throw Error(ErrorCode::ManifestInvalid,
                            "per_class_f1 for model '" + model_id + "' must be a list");
            for (const nlohmann::json& v : arr) {
                if (!v.is_number())
                    throw Error(ErrorCode::ManifestInvalid,
                                "per_class_f1 for model '" + model_id + "' must hold numbers");
                per_class.push_back(v.get<double>());
            }
            if (per_class.size() != class_count(stage))
                throw Error(ErrorCode::ManifestInvalid,
                            "model '" + model_id + "' lists " + std::to_string(per_class.size()) +
                                " F1 scores, stage needs " + std::to_string(class_count(stage)));
        }
        double average = 0.0;
        if (has_average) {
            if (!entry["f1_average"].is_number())
                throw Error(ErrorCode::ManifestInvalid,
                            "f1_average for model '" + model_id + "' must be a number");
            average = entry["f1_average"].get<double>();
        }
        if (has_per_class && has_average &&
            std::abs(average_f1(per_class) - average) > 1e-6)
            throw Error(ErrorCode::ManifestConflict,
                        "model '" + model_id + "': f1_average disagrees with per_class_f1");

        profiles.push_back(has_per_class
                               ? ModelProfile::from_per_class(model_id, stage, std::move(per_class))
                               : ModelProfile::from_average(model_id, stage, average));
    }
    return profiles;
}

} // namespace detail

inline Manifest load_manifest(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ManifestInvalid, e.what());
    }
    if (!doc.is_object())
        throw Error(ErrorCode::ManifestInvalid, "manifest root must be an object");
    for (const auto& item : doc.items())
        if (item.key() != "detection" && item.key() != "classification")
            throw Error(ErrorCode::ManifestInvalid, "unknown key '" + item.key() + "'");
    if (!doc.contains("detection"))
        throw Error(ErrorCode::ManifestIncomplete, "manifest lacks 'detection'");
    if (!doc.contains("classification"))
        throw Error(ErrorCode::ManifestIncomplete, "manifest lacks 'classification'");
    Manifest manifest;
    manifest.detection =
        detail::parse_manifest_stage(doc["detection"], Stage::detection, "detection");
    manifest.classification =
        detail::parse_manifest_stage(doc["classification"], Stage::classification, "classification");
    return manifest;
}

inline void write_manifest(const std::string& path, const Manifest& manifest) {
    nlohmann::ordered_json doc;
    for (Stage stage : {Stage::detection, Stage::classification}) {
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const ModelProfile& profile : manifest.profiles(stage)) {
            nlohmann::ordered_json entry;
            entry["model_id"] = profile.model_id();
            if (profile.has_per_class())
                entry["per_class_f1"] = profile.per_class_f1();
            else
                entry["f1_average"] = profile.f1_average();
            list.push_back(std::move(entry));
        }
        doc[std::string(to_string(stage))] = std::move(list);
    }
    std::ofstream out = detail::open_output(path);
    out << doc.dump(2) << "\n";
    detail::finish_output(out, path);
}

inline std::vector<GroundTruth> load_truth(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw detail::malformed(1, "missing header");
    std::vector<std::string> columns{"instance_id", "label"};
    auto positions = detail::bind_header(detail::strip_cr(line), columns);

    std::vector<GroundTruth> truth;
    std::set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_csv(line);
        if (fields.size() != columns.size())
            throw detail::malformed(line_no, "expected 2 fields, found " +
                                                 std::to_string(fields.size()));
        GroundTruth gt;
        gt.instance_id = fields[positions.at("instance_id")];
        if (gt.instance_id.empty()) throw detail::malformed(line_no, "empty instance_id");
        try {
            gt.label = parse_final_label(fields[positions.at("label")]);
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
        }
        if (!ids.insert(gt.instance_id).second)
            throw Error(ErrorCode::DuplicateRecord,
                        "line " + std::to_string(line_no) + ": instance '" + gt.instance_id +
                            "' labelled twice");
        truth.push_back(std::move(gt));
    }
    return truth;
}

inline void write_truth(const std::string& path, std::span<const GroundTruth> truth) {
    std::ofstream out = detail::open_output(path);
    out << "instance_id,label\n";
    for (const GroundTruth& gt : truth)
        out << gt.instance_id << "," << to_string(gt.label) << "\n";
    detail::finish_output(out, path);
}

/// Loads cascade outcomes, holding each row to the gate rule: detection
/// class 1 exactly when the final label is notumor.
inline std::vector<OutcomeRecord> load_outcomes(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw detail::malformed(1, "missing header");
    std::vector<std::string> columns{"instance_id", "final_label", "detection_class", "tie_broken"};
    auto positions = detail::bind_header(detail::strip_cr(line), columns);

    std::vector<OutcomeRecord> outcomes;
    std::set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_csv(line);
        if (fields.size() != columns.size())
            throw detail::malformed(line_no, "expected 4 fields, found " +
                                                 std::to_string(fields.size()));
        OutcomeRecord rec;
        rec.instance_id = fields[positions.at("instance_id")];
        if (rec.instance_id.empty()) throw detail::malformed(line_no, "empty instance_id");
        try {
            rec.final_label = parse_final_label(fields[positions.at("final_label")]);
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
        }
        long det = detail::parse_long(fields[positions.at("detection_class")], line_no);
        if (det != 0 && det != 1)
            throw detail::malformed(line_no, "detection_class must be 0 or 1");
        rec.detection_class = static_cast<int>(det);
        const std::string& tie = fields[positions.at("tie_broken")];
        if (tie == "true") rec.tie_broken = true;
        else if (tie == "false") rec.tie_broken = false;
        else throw detail::malformed(line_no, "tie_broken must be true or false");
        if ((rec.detection_class == 1) != (rec.final_label == FinalLabel::notumor))
            throw detail::malformed(line_no,
                                    "detection_class disagrees with final_label '" +
                                        std::string(to_string(rec.final_label)) + "'");
        if (!ids.insert(rec.instance_id).second)
            throw Error(ErrorCode::DuplicateRecord,
                        "line " + std::to_string(line_no) + ": instance '" + rec.instance_id +
                            "' has two outcomes");
        outcomes.push_back(std::move(rec));
    }
    return outcomes;
}

inline void write_outcomes(std::ostream& out, std::span<const OutcomeRecord> outcomes) {
    out << "instance_id,final_label,detection_class,tie_broken\n";
    for (const OutcomeRecord& rec : outcomes)
        out << rec.instance_id << "," << to_string(rec.final_label) << "," << rec.detection_class
            << "," << (rec.tie_broken ? "true" : "false") << "\n";
}

inline void write_outcomes(const std::string& path, std::span<const OutcomeRecord> outcomes) {
    std::ofstream out = detail::open_output(path);
    write_outcomes(out, outcomes);
    detail::finish_output(out, path);
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
    nlohmann::ordered_json j;
    j["correct"] = report.correct;
    j["total"] = report.total;
    j["accuracy"] = report.accuracy;
    j["accuracy_percent"] = report.accuracy_percent;
    j["macro_f1"] = report.macro_f1;
    j["tie_count"] = report.tie_count;
    nlohmann::ordered_json confusion;
    confusion["row_labels"] = report.confusion.row_labels();
    confusion["col_labels"] = report.confusion.col_labels();
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < report.confusion.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < report.confusion.cols(); ++c)
            row.push_back(report.confusion.at(r, c));
        counts.push_back(std::move(row));
    }
    confusion["counts"] = std::move(counts);
    j["confusion"] = std::move(confusion);
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (const ClassMetrics& cm : report.per_class) {
        nlohmann::ordered_json entry;
        entry["label"] = cm.label;
        entry["precision"] = cm.precision;
        entry["recall"] = cm.recall;
        entry["f1"] = cm.f1;
        entry["support"] = cm.support;
        per_class.push_back(std::move(entry));
    }
    j["per_class"] = std::move(per_class);
    return j;
}

inline nlohmann::ordered_json evaluation_to_json(const OutcomeEvaluation& eval) {
    nlohmann::ordered_json j;
    j["detection"] = report_to_json(eval.detection);
    if (eval.classification) j["classification"] = report_to_json(*eval.classification);
    return j;
}

namespace detail {

inline std::string pad_left(const std::string& text, std::size_t width) {
    return text.size() >= width ? text : std::string(width - text.size(), ' ') + text;
}

inline std::string pad_right(const std::string& text, std::size_t width) {
    return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

inline std::string format_fixed(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

} // namespace detail

inline std::string format_report(const EvaluationReport& report, const std::string& title) {
    std::ostringstream out;
    out << title << "\n";
    out << "  accuracy " << report.accuracy_percent << "% (" << report.correct << "/"
        << report.total << "), macro F1 " << detail::format_fixed(report.macro_f1) << ", ties "
        << report.tie_count << "\n\n";

    const ConfusionMatrix& m = report.confusion;
    std::size_t label_width = std::string("true\\pred").size();
    for (const std::string& label : m.row_labels()) label_width = std::max(label_width, label.size());
    std::vector<std::size_t> col_widths(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        col_widths[c] = m.col_labels()[c].size();
        for (std::size_t r = 0; r < m.rows(); ++r)
            col_widths[c] = std::max(col_widths[c], std::to_string(m.at(r, c)).size());
    }
    out << "  " << detail::pad_right("true\\pred", label_width);
    for (std::size_t c = 0; c < m.cols(); ++c)
        out << "  " << detail::pad_left(m.col_labels()[c], col_widths[c]);
    out << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << "  " << detail::pad_right(m.row_labels()[r], label_width);
        for (std::size_t c = 0; c < m.cols(); ++c)
            out << "  " << detail::pad_left(std::to_string(m.at(r, c)), col_widths[c]);
        out << "\n";
    }
    out << "\n";

    std::size_t class_width = std::string("class").size();
    for (const ClassMetrics& cm : report.per_class) class_width = std::max(class_width, cm.label.size());
    out << "  " << detail::pad_right("class", class_width) << "  precision  recall      f1  support\n";
    for (const ClassMetrics& cm : report.per_class) {
        out << "  " << detail::pad_right(cm.label, class_width) << "  "
            << detail::pad_left(detail::format_fixed(cm.precision), 9) << "  "
            << detail::pad_left(detail::format_fixed(cm.recall), 6) << "  "
            << detail::pad_left(detail::format_fixed(cm.f1), 6) << "  "
            << detail::pad_left(std::to_string(cm.support), 7) << "\n";
    }
    return out.str();
}

inline std::string format_evaluation(const OutcomeEvaluation& eval) {
    std::string text = format_report(eval.detection, "detection");
    if (eval.classification) {
        text += "\n";
        text += format_report(*eval.classification, "classification");
    }
    return text;
}

} // namespace bifold
