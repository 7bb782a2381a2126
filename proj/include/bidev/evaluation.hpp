#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bidev/pipeline.hpp"
#include "bidev/types.hpp"

namespace bidev {

struct DatasetRecord {
    std::string claim_id;
    std::string claim;
    Label gold_label = Label::Refute;
    std::vector<std::string> gold_doc_ids;
    std::optional<int> num_hops;
};

// Raw label string -> binary label. Unlisted strings are rejected at load.
using LabelMap = std::map<std::string, Label>;

LabelMap default_label_map();

// JSON-lines {"claim_id", "claim", "label", "docs"?: [...], "num_hops"?: int}.
// Throws MalformedRecordError / UnmappableLabelError with 1-based line numbers.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path,
                                        const LabelMap& label_map = default_label_map());

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Per-class scores for `positive` treated as the positive class; every ratio
// with a zero denominator is defined as 0.
ClassMetrics class_metrics(const std::map<std::string, Label>& predictions,
                           const std::map<std::string, Label>& golds, Label positive);

// Unweighted mean of the Support and Refute F1 scores. Key sets must match
// exactly (KeyMismatchError otherwise).
double macro_f1(const std::map<std::string, Label>& predictions,
                const std::map<std::string, Label>& golds);

struct EvalResult {
    std::map<std::string, Label> predictions;
    std::optional<double> macro_f1;  // nullopt when nothing was scored
    ClassMetrics support;
    ClassMetrics refute;
    int item_count = 0;
    int failure_count = 0;
};

// Scores predictions against golds; failure_count is carried through.
EvalResult compute_eval(const std::map<std::string, Label>& predictions,
                        const std::map<std::string, Label>& golds, int failure_count);

nlohmann::json eval_to_json(const EvalResult& result);

struct BootstrapReport {
    int rounds = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<double, double>> round_scores;  // (system A, system B)
    int win_count = 0;  // rounds where A <= B
    double p_estimate = 0.0;  // win_count / rounds
};

/// Paired bootstrap over the shared claim set: each round draws N ids with
/// replacement from a mt19937_64 seeded generator (index = gen() % N over
/// the sorted id list) and scores both systems on the same sample.
BootstrapReport bootstrap_compare(const std::map<std::string, Label>& preds_a,
                                  const std::map<std::string, Label>& preds_b,
                                  const std::map<std::string, Label>& golds, int rounds = 10,
                                  std::uint64_t seed = 0);

struct BenchmarkOptions {
    int workers = 1;
    std::optional<int> hop_filter;  // keep only records with this num_hops
};

struct BenchmarkResult {
    EvalResult eval;
    std::vector<DatasetRecord> records;          // the records actually scored
    std::vector<VerificationOutcome> outcomes;   // aligned with records
};

/// Verifies every (hop-filtered) record through the pipeline. Per-claim
/// failures become Refute predictions and bump failure_count; the run never
/// aborts mid-dataset. workers > 1 verifies claims concurrently.
BenchmarkResult run_benchmark(const Verifier& verifier, const std::vector<DatasetRecord>& dataset,
                              const BenchmarkOptions& options = {});

void write_predictions_jsonl(const BenchmarkResult& result, const std::filesystem::path& path);

enum class SweepAxis { Iterations, TopK, Strategy, Ablation };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& text);

struct SweepCell {
    std::string axis_value;
    bool ok = false;
    std::string error;  // set when !ok
    EvalResult eval;
    int backend_calls = 0;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::Iterations;
    std::vector<SweepCell> cells;
};

/// One benchmark per axis value, everything else held at `base`. Axis values
/// are parsed per axis: iterations 0..5, top_k positive integers, strategy
/// names, ablation flag names ("none" = full system; a flag value replaces
/// the base ablation set). A failing cell is recorded with its error and the
/// sweep continues.
SweepTable run_sweep(SweepAxis axis, const std::vector<std::string>& values,
                     const PipelineConfig& base, std::shared_ptr<TextBackend> backend,
                     const TemplateLibrary& templates, const CorpusStore* corpus,
                     const RetrievalIndex* index, const RoleOptions& role_options,
                     const std::vector<DatasetRecord>& dataset,
                     const BenchmarkOptions& options = {});

// Plot-ready CSV: axis,value,items,failures,macro_f1,support_f1,refute_f1,
// backend_calls,error. macro_f1 cells are empty when undefined.
void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path);

}  // namespace bidev
