#include "bidev/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "bidev/errors.hpp"
#include "bidev/util.hpp"

namespace bidev {

LabelMap default_label_map() {
    return LabelMap{
        {"SUPPORTED", Label::Support},     {"SUPPORTS", Label::Support},
        {"Support", Label::Support},       {"NOT_SUPPORTED", Label::Refute},
        {"REFUTES", Label::Refute},        {"Refute", Label::Refute},
    };
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path,
                                        const LabelMap& label_map) {
    std::vector<DatasetRecord> records;
    std::set<std::string> seen_ids;
    for_each_jsonl_line(path, [&](int line, const std::string& text) {
        nlohmann::json json;
        try {
            json = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& error) {
            throw MalformedRecordError(line, error.what());
        }
        if (!json.is_object()) throw MalformedRecordError(line, "record is not a JSON object");
        for (const char* field : {"claim_id", "claim", "label"}) {
            if (!json.contains(field) || !json[field].is_string()) {
                throw MalformedRecordError(line, std::string(field) + " must be a string");
            }
        }

        DatasetRecord record;
        record.claim_id = json["claim_id"].get<std::string>();
        record.claim = json["claim"].get<std::string>();
        if (!seen_ids.insert(record.claim_id).second) {
            throw MalformedRecordError(line, "duplicate claim_id: " + record.claim_id);
        }

        const auto raw_label = json["label"].get<std::string>();
        const auto mapped = label_map.find(raw_label);
        if (mapped == label_map.end()) throw UnmappableLabelError(line, raw_label);
        record.gold_label = mapped->second;

        if (json.contains("docs")) {
            if (!json["docs"].is_array()) throw MalformedRecordError(line, "docs must be an array");
            for (const auto& entry : json["docs"]) {
                if (!entry.is_string()) {
                    throw MalformedRecordError(line, "docs entries must be strings");
                }
                record.gold_doc_ids.push_back(entry.get<std::string>());
            }
        }
        if (json.contains("num_hops")) {
            if (!json["num_hops"].is_number_integer()) {
                throw MalformedRecordError(line, "num_hops must be an integer");
            }
            record.num_hops = json["num_hops"].get<int>();
        }
        records.push_back(std::move(record));
    });
    return records;
}

namespace {

void require_same_keys(const std::map<std::string, Label>& predictions,
                       const std::map<std::string, Label>& golds) {
    if (predictions.size() != golds.size()) {
        throw KeyMismatchError("prediction and gold key sets differ in size");
    }
    auto p = predictions.begin();
    auto g = golds.begin();
    for (; p != predictions.end(); ++p, ++g) {
        if (p->first != g->first) {
            throw KeyMismatchError("prediction key missing from golds: " + p->first);
        }
    }
}

}  // namespace

ClassMetrics class_metrics(const std::map<std::string, Label>& predictions,
                           const std::map<std::string, Label>& golds, Label positive) {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    for (const auto& [claim_id, predicted] : predictions) {
        const Label gold = golds.at(claim_id);
        if (predicted == positive && gold == positive) ++tp;
        if (predicted == positive && gold != positive) ++fp;
        if (predicted != positive && gold == positive) ++fn;
    }
    ClassMetrics metrics;
    metrics.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    metrics.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double pr = metrics.precision + metrics.recall;
    metrics.f1 = pr > 0.0 ? 2.0 * metrics.precision * metrics.recall / pr : 0.0;
    return metrics;
}

double macro_f1(const std::map<std::string, Label>& predictions,
                const std::map<std::string, Label>& golds) {
    require_same_keys(predictions, golds);
    const ClassMetrics support = class_metrics(predictions, golds, Label::Support);
    const ClassMetrics refute = class_metrics(predictions, golds, Label::Refute);
    return (support.f1 + refute.f1) / 2.0;
}

EvalResult compute_eval(const std::map<std::string, Label>& predictions,
                        const std::map<std::string, Label>& golds, int failure_count) {
    require_same_keys(predictions, golds);
    EvalResult result;
    result.predictions = predictions;
    result.item_count = static_cast<int>(predictions.size());
    result.failure_count = failure_count;
    if (!predictions.empty()) {
        result.support = class_metrics(predictions, golds, Label::Support);
        result.refute = class_metrics(predictions, golds, Label::Refute);
        result.macro_f1 = (result.support.f1 + result.refute.f1) / 2.0;
    }
    return result;
}

namespace {

nlohmann::json class_metrics_to_json(const ClassMetrics& metrics) {
    return nlohmann::json{
        {"precision", metrics.precision},
        {"recall", metrics.recall},
        {"f1", metrics.f1},
    };
}

}  // namespace

nlohmann::json eval_to_json(const EvalResult& result) {
    nlohmann::json predictions = nlohmann::json::object();
    for (const auto& [claim_id, label] : result.predictions) {
        predictions[claim_id] = to_string(label);
    }
    nlohmann::json json{
        {"predictions", predictions},
        {"support", class_metrics_to_json(result.support)},
        {"refute", class_metrics_to_json(result.refute)},
        {"item_count", result.item_count},
        {"failure_count", result.failure_count},
    };
    json["macro_f1"] = result.macro_f1 ? nlohmann::json(*result.macro_f1) : nlohmann::json(nullptr);
    return json;
}

BootstrapReport bootstrap_compare(const std::map<std::string, Label>& preds_a,
                                  const std::map<std::string, Label>& preds_b,
                                  const std::map<std::string, Label>& golds, int rounds,
                                  std::uint64_t seed) {
    if (rounds < 1) throw ContractError("bootstrap rounds must be >= 1");
    require_same_keys(preds_a, golds);
    require_same_keys(preds_b, golds);

    std::vector<std::string> ids;
    ids.reserve(golds.size());
    for (const auto& [claim_id, label] : golds) ids.push_back(claim_id);
    const std::size_t n = ids.size();
    if (n == 0) throw ContractError("bootstrap requires at least one item");

    BootstrapReport report;
    report.rounds = rounds;
    report.seed = seed;

    std::mt19937_64 gen(seed);
    for (int round = 0; round < rounds; ++round) {
        // Resampled ids collide, so keys get a draw-index suffix to stay unique.
        std::map<std::string, Label> sample_golds;
        std::map<std::string, Label> sample_a;
        std::map<std::string, Label> sample_b;
        for (std::size_t draw = 0; draw < n; ++draw) {
            const std::string& id = ids[gen() % n];
            const std::string key = id + "#" + std::to_string(draw);
            sample_golds[key] = golds.at(id);
            sample_a[key] = preds_a.at(id);
            sample_b[key] = preds_b.at(id);
        }
        const double score_a = macro_f1(sample_a, sample_golds);
        const double score_b = macro_f1(sample_b, sample_golds);
        report.round_scores.emplace_back(score_a, score_b);
        if (score_a <= score_b) ++report.win_count;
    }
    report.p_estimate = static_cast<double>(report.win_count) / rounds;
    return report;
}

BenchmarkResult run_benchmark(const Verifier& verifier, const std::vector<DatasetRecord>& dataset,
                              const BenchmarkOptions& options) {
    if (options.workers < 1) throw ConfigError("workers must be >= 1");

    BenchmarkResult result;
    for (const auto& record : dataset) {
        if (options.hop_filter && record.num_hops != options.hop_filter) continue;
        result.records.push_back(record);
    }

    const std::size_t count = result.records.size();
    result.outcomes.resize(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= count) break;
            const DatasetRecord& record = result.records[index];
            result.outcomes[index] =
                verifier.verify(record.claim_id, record.claim, &record.gold_doc_ids);
        }
    };

    const int worker_count = std::min<int>(options.workers, static_cast<int>(std::max<std::size_t>(count, 1)));
    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(worker_count);
        for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
        for (auto& thread : threads) thread.join();
    }

    std::map<std::string, Label> predictions;
    std::map<std::string, Label> golds;
    int failures = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& record = result.records[i];
        const auto& outcome = result.outcomes[i];
        predictions[record.claim_id] = outcome.label;  // failures already carry Refute
        golds[record.claim_id] = record.gold_label;
        if (!outcome.ok) ++failures;
    }
    result.eval = compute_eval(predictions, golds, failures);
    return result;
}

void write_predictions_jsonl(const BenchmarkResult& result, const std::filesystem::path& path) {
    std::ostringstream out;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        const auto& record = result.records[i];
        const auto& outcome = result.outcomes[i];
        nlohmann::json json{
            {"claim_id", record.claim_id},
            {"gold", to_string(record.gold_label)},
            {"predicted", to_string(outcome.label)},
            {"ok", outcome.ok},
        };
        json["failure"] = outcome.ok ? nlohmann::json(nullptr) : nlohmann::json(outcome.error);
        out << json.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Iterations: return "iterations";
        case SweepAxis::TopK: return "top_k";
        case SweepAxis::Strategy: return "strategy";
        case SweepAxis::Ablation: return "ablation";
    }
    throw ContractError("unhandled sweep axis");
}

SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "iterations") return SweepAxis::Iterations;
    if (text == "top_k") return SweepAxis::TopK;
    if (text == "strategy") return SweepAxis::Strategy;
    if (text == "ablation") return SweepAxis::Ablation;
    throw ConfigError("unknown sweep axis: " + text);
}

namespace {

int parse_int_value(const std::string& text) {
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("axis value is not an integer: " + text);
    }
    if (used != text.size()) throw ConfigError("axis value is not an integer: " + text);
    return value;
}

PipelineConfig config_for_cell(SweepAxis axis, const std::string& value,
                               const PipelineConfig& base) {
    PipelineConfig config = base;
    switch (axis) {
        case SweepAxis::Iterations: {
            const int iterations = parse_int_value(value);
            if (iterations < 0 || iterations > 5) {
                throw ConfigError("iterations axis values must be in 0..5: " + value);
            }
            config.max_iterations = iterations;
            break;
        }
        case SweepAxis::TopK: {
            const int k = parse_int_value(value);
            if (k < 1) throw ConfigError("top_k axis values must be >= 1: " + value);
            config.top_k = k;
            break;
        }
        case SweepAxis::Strategy:
            config.strategy = parse_strategy(value);
            break;
        case SweepAxis::Ablation:
            config.ablation.clear();
            if (value != "none") config.ablation.insert(parse_ablation(value));
            break;
    }
    return config;
}

}  // namespace

SweepTable run_sweep(SweepAxis axis, const std::vector<std::string>& values,
                     const PipelineConfig& base, std::shared_ptr<TextBackend> backend,
                     const TemplateLibrary& templates, const CorpusStore* corpus,
                     const RetrievalIndex* index, const RoleOptions& role_options,
                     const std::vector<DatasetRecord>& dataset, const BenchmarkOptions& options) {
    if (values.empty()) throw ConfigError("sweep requires at least one axis value");

    SweepTable table;
    table.axis = axis;
    for (const auto& value : values) {
        SweepCell cell;
        cell.axis_value = value;
        try {
            const PipelineConfig config = config_for_cell(axis, value, base);
            Verifier verifier(backend, templates, config, corpus, index, role_options);
            BenchmarkResult bench = run_benchmark(verifier, dataset, options);
            cell.eval = std::move(bench.eval);
            for (const auto& outcome : bench.outcomes) {
                cell.backend_calls += outcome.trace.backend_calls_total;
            }
            cell.ok = true;
        } catch (const std::exception& error) {
            cell.ok = false;
            cell.error = error.what();
        }
        table.cells.push_back(std::move(cell));
    }
    return table;
}

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string escaped = "\"";
    for (char c : field) {
        if (c == '"') escaped += "\"\"";
        else escaped += c;
    }
    escaped += "\"";
    return escaped;
}

std::string format_metric(double value) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << value;
    return out.str();
}

}  // namespace

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "axis,value,items,failures,macro_f1,support_f1,refute_f1,backend_calls,error\n";
    for (const auto& cell : table.cells) {
        out << to_string(table.axis) << "," << csv_escape(cell.axis_value) << ",";
        if (cell.ok) {
            out << cell.eval.item_count << "," << cell.eval.failure_count << ",";
            out << (cell.eval.macro_f1 ? format_metric(*cell.eval.macro_f1) : std::string()) << ",";
            out << format_metric(cell.eval.support.f1) << "," << format_metric(cell.eval.refute.f1)
                << "," << cell.backend_calls << ",";
        } else {
            out << ",,,,,," << csv_escape(cell.error);
        }
        out << "\n";
    }
    write_file_atomic(path, out.str());
}

}  // namespace bidev
