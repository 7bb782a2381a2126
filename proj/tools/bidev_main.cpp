// bidev: claim-verification pipeline driver.
//
// Subcommands:
//   index   build and serialize a BM25 index from a corpus
//   verify  run one claim through the pipeline and write its trace
//   bench   score a dataset and write results.json / predictions.jsonl / traces.jsonl
//   sweep   run bench once per axis value and write sweep.csv
//   report  render a Markdown table from one or more results.json files
//
// Exit codes: 0 success, 1 configuration or startup error, 2 the claim could
// not be verified (verify only).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "bidev/backend.hpp"
#include "bidev/errors.hpp"
#include "bidev/evaluation.hpp"
#include "bidev/pipeline.hpp"
#include "bidev/prompt.hpp"
#include "bidev/retrieval.hpp"
#include "bidev/roles.hpp"
#include "bidev/util.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kArtifactVersion = "bidev-0.1.0";

struct CommonOpts {
    std::string config_path;
    std::string setting;
    std::string strategy;
    int max_iterations = 3;
    int top_k = 10;
    std::string ablate;  // comma-separated flag names
    std::string index_path;
    std::string corpus_path;
    std::string dataset_path;
    std::string script_path;
    std::string out;
    std::string templates_dir = "templates";
    int workers = 1;
    std::uint64_t seed = 0;

    CLI::Option* setting_opt = nullptr;
    CLI::Option* strategy_opt = nullptr;
    CLI::Option* max_iterations_opt = nullptr;
    CLI::Option* top_k_opt = nullptr;
    CLI::Option* ablate_opt = nullptr;
};

void add_common_options(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file; flags override its values");
    opts.setting_opt =
        cmd->add_option("--setting", opts.setting, "Evidence setting: gold, open, or close");
    opts.strategy_opt = cmd->add_option("--strategy", opts.strategy,
                                        "Decomposition strategy: direct, naive, or bidev");
    opts.max_iterations_opt = cmd->add_option("--max-iterations", opts.max_iterations,
                                              "Simplification iteration cap (>= 0)");
    opts.top_k_opt = cmd->add_option("--top-k", opts.top_k, "Documents retrieved per query");
    opts.ablate_opt =
        cmd->add_option("--ablate", opts.ablate, "Comma-separated role switches, e.g. disable_filter");
    cmd->add_option("--index", opts.index_path, "Serialized retrieval index");
    cmd->add_option("--corpus", opts.corpus_path, "Corpus JSONL file");
    cmd->add_option("--dataset", opts.dataset_path, "Dataset JSONL file");
    cmd->add_option("--script", opts.script_path, "Scripted-backend fixture (offline runs)");
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->add_option("--templates", opts.templates_dir, "Prompt template directory")
        ->capture_default_str();
    cmd->add_option("--workers", opts.workers, "Concurrent claim verifications")
        ->capture_default_str();
    cmd->add_option("--seed", opts.seed, "Random seed recorded in the run manifest")
        ->capture_default_str();
}

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream stream(text);
    std::string part;
    while (std::getline(stream, part, ',')) {
        const std::string trimmed = bidev::trim(part);
        if (!trimmed.empty()) parts.push_back(trimmed);
    }
    return parts;
}

nlohmann::json load_config_file(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    nlohmann::json json;
    try {
        json = nlohmann::json::parse(bidev::read_file(path));
    } catch (const nlohmann::json::exception& error) {
        throw bidev::ConfigError(std::string("config file is not valid JSON: ") + error.what());
    }
    if (!json.is_object()) throw bidev::ConfigError("config file must hold a JSON object");
    return json;
}

bidev::PipelineConfig effective_config(const CommonOpts& opts, const nlohmann::json& file_config) {
    bidev::PipelineConfig config;
    if (file_config.contains("pipeline")) {
        config = bidev::config_from_json(file_config.at("pipeline"));
    }
    if (*opts.setting_opt) config.setting = bidev::parse_setting(opts.setting);
    if (*opts.strategy_opt) config.strategy = bidev::parse_strategy(opts.strategy);
    if (*opts.max_iterations_opt) config.max_iterations = opts.max_iterations;
    if (*opts.top_k_opt) config.top_k = opts.top_k;
    if (*opts.ablate_opt) {
        config.ablation.clear();
        for (const auto& name : split_csv_list(opts.ablate)) {
            config.ablation.insert(bidev::parse_ablation(name));
        }
    }
    config.validate();
    return config;
}

bidev::LabelMap label_map_from_config(const nlohmann::json& file_config) {
    if (!file_config.contains("label_map")) return bidev::default_label_map();
    bidev::LabelMap map;
    for (const auto& [raw, mapped] : file_config.at("label_map").items()) {
        map[raw] = bidev::parse_label(mapped.get<std::string>());
    }
    return map;
}

std::shared_ptr<bidev::TextBackend> build_backend(const CommonOpts& opts,
                                                  const nlohmann::json& file_config) {
    std::shared_ptr<bidev::TextBackend> backend;
    if (!opts.script_path.empty()) {
        auto scripted = std::make_shared<bidev::ScriptedBackend>();
        bidev::load_script_fixture(*scripted, opts.script_path);
        backend = scripted;
    } else if (file_config.contains("backend")) {
        const auto& section = file_config.at("backend");
        bidev::HttpBackendConfig http;
        http.url = section.value("url", std::string());
        http.model = section.value("model", std::string());
        http.api_key = section.value("api_key", std::string());
        http.timeout_ms = section.value("timeout_ms", http.timeout_ms);
        http.max_retries = section.value("max_retries", http.max_retries);
        http.initial_backoff_ms = section.value("initial_backoff_ms", http.initial_backoff_ms);
        backend = std::make_shared<bidev::HttpBackend>(http);
        if (section.contains("cache_dir")) {
            backend = std::make_shared<bidev::CachingBackend>(
                backend, section.at("cache_dir").get<std::string>());
        }
    } else {
        throw bidev::ConfigError(
            "no backend configured: pass --script FIXTURE or a \"backend\" config block");
    }
    return backend;
}

struct Resources {
    std::optional<bidev::CorpusStore> corpus;
    std::optional<bidev::RetrievalIndex> index;
};

Resources load_resources(const CommonOpts& opts, const bidev::PipelineConfig& config) {
    Resources resources;
    if (!opts.corpus_path.empty()) {
        resources.corpus = bidev::CorpusStore::load_jsonl(opts.corpus_path);
    }
    if (!opts.index_path.empty()) {
        resources.index = bidev::RetrievalIndex::load(opts.index_path);
    } else if (config.setting == bidev::EvidenceSetting::Open && resources.corpus) {
        resources.index = bidev::RetrievalIndex::build(resources.corpus->docs());
    }
    if (config.setting == bidev::EvidenceSetting::Gold && !resources.corpus) {
        throw bidev::ConfigError("gold setting requires --corpus");
    }
    if (config.setting == bidev::EvidenceSetting::Open && !resources.index) {
        throw bidev::ConfigError("open setting requires --index or --corpus");
    }
    return resources;
}

bidev::TemplateLibrary load_templates(const CommonOpts& opts) {
    bidev::TemplateLibrary templates = bidev::TemplateLibrary::load_dir(opts.templates_dir);
    templates.require_pipeline_templates();
    return templates;
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    bidev::write_file_atomic(dir / ".incomplete", bidev::iso8601_now() + "\n");
    return dir;
}

void finish_run(const fs::path& out_dir, const std::string& command,
                const bidev::PipelineConfig& config, const std::string& backend_id,
                const CommonOpts& opts, const std::string& started_at) {
    nlohmann::json manifest{
        {"command", command},
        {"config", bidev::config_to_json(config)},
        {"backend_id", backend_id},
        {"started_at", started_at},
        {"finished_at", bidev::iso8601_now()},
        {"seed", opts.seed},
        {"artifact_version", kArtifactVersion},
    };
    manifest["corpus_digest"] = opts.corpus_path.empty()
                                    ? nlohmann::json(nullptr)
                                    : nlohmann::json(bidev::file_digest(opts.corpus_path));
    manifest["dataset_digest"] = opts.dataset_path.empty()
                                     ? nlohmann::json(nullptr)
                                     : nlohmann::json(bidev::file_digest(opts.dataset_path));
    bidev::write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    fs::remove(out_dir / ".incomplete");
}

int cmd_index(const CommonOpts& opts) {
    if (opts.corpus_path.empty()) throw bidev::ConfigError("index requires --corpus");
    if (opts.out.empty()) throw bidev::ConfigError("index requires --out FILE");
    const bidev::CorpusStore corpus = bidev::CorpusStore::load_jsonl(opts.corpus_path);
    const bidev::RetrievalIndex index = bidev::RetrievalIndex::build(corpus.docs());
    if (!fs::path(opts.out).parent_path().empty()) {
        fs::create_directories(fs::path(opts.out).parent_path());
    }
    index.save(opts.out);
    std::cout << "doc_count=" << index.doc_count() << " avg_doc_length=" << index.avg_doc_length()
              << "\n";
    return 0;
}

int cmd_verify(const CommonOpts& opts, const std::string& claim_arg,
               const std::string& claim_file, const std::string& docs_arg) {
    const std::string started_at = bidev::iso8601_now();
    const nlohmann::json file_config = load_config_file(opts.config_path);
    const bidev::PipelineConfig config = effective_config(opts, file_config);

    std::string claim = claim_arg;
    if (claim.empty() && !claim_file.empty()) claim = bidev::trim(bidev::read_file(claim_file));
    if (claim.empty()) throw bidev::ConfigError("verify requires a claim argument or --claim-file");

    const auto backend = build_backend(opts, file_config);
    const bidev::TemplateLibrary templates = load_templates(opts);
    const Resources resources = load_resources(opts, config);
    const std::vector<std::string> gold_doc_ids = split_csv_list(docs_arg);

    bidev::Verifier verifier(backend, templates, config,
                             resources.corpus ? &*resources.corpus : nullptr,
                             resources.index ? &*resources.index : nullptr);
    const bidev::VerificationOutcome outcome = verifier.verify("cli", claim, &gold_doc_ids);

    if (!opts.out.empty()) {
        const fs::path out_dir = prepare_out_dir(opts.out);
        bidev::write_file_atomic(out_dir / "trace.json",
                                 bidev::trace_to_json(outcome.trace).dump(2) + "\n");
        finish_run(out_dir, "verify", config, backend->backend_id(), opts, started_at);
    }

    std::cout << bidev::to_string(outcome.label) << "\n";
    if (!outcome.ok) {
        std::cerr << "verification failed: " << outcome.error << "\n";
        return 2;
    }
    return 0;
}

void write_traces_jsonl(const bidev::BenchmarkResult& result, const fs::path& path) {
    std::ostringstream out;
    for (const auto& outcome : result.outcomes) {
        out << bidev::trace_to_json(outcome.trace).dump() << "\n";
    }
    bidev::write_file_atomic(path, out.str());
}

int cmd_bench(const CommonOpts& opts, std::optional<int> hop_filter) {
    const std::string started_at = bidev::iso8601_now();
    const nlohmann::json file_config = load_config_file(opts.config_path);
    const bidev::PipelineConfig config = effective_config(opts, file_config);
    if (opts.dataset_path.empty()) throw bidev::ConfigError("bench requires --dataset");
    if (opts.out.empty()) throw bidev::ConfigError("bench requires --out DIR");

    const auto dataset = bidev::load_dataset(opts.dataset_path, label_map_from_config(file_config));
    const auto backend = build_backend(opts, file_config);
    const bidev::TemplateLibrary templates = load_templates(opts);
    const Resources resources = load_resources(opts, config);

    bidev::Verifier verifier(backend, templates, config,
                             resources.corpus ? &*resources.corpus : nullptr,
                             resources.index ? &*resources.index : nullptr);
    bidev::BenchmarkOptions options;
    options.workers = opts.workers;
    options.hop_filter = hop_filter;
    const bidev::BenchmarkResult result = bidev::run_benchmark(verifier, dataset, options);

    const fs::path out_dir = prepare_out_dir(opts.out);
    bidev::write_file_atomic(out_dir / "results.json",
                             bidev::eval_to_json(result.eval).dump(2) + "\n");
    bidev::write_predictions_jsonl(result, out_dir / "predictions.jsonl");
    write_traces_jsonl(result, out_dir / "traces.jsonl");
    finish_run(out_dir, "bench", config, backend->backend_id(), opts, started_at);

    std::cout << "items=" << result.eval.item_count << " failures=" << result.eval.failure_count
              << " macro_f1=";
    if (result.eval.macro_f1) {
        std::cout << *result.eval.macro_f1;
    } else {
        std::cout << "undefined";
    }
    std::cout << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis_name,
              const std::vector<std::string>& values, std::optional<int> hop_filter) {
    const std::string started_at = bidev::iso8601_now();
    const nlohmann::json file_config = load_config_file(opts.config_path);
    const bidev::PipelineConfig config = effective_config(opts, file_config);
    if (opts.dataset_path.empty()) throw bidev::ConfigError("sweep requires --dataset");
    if (opts.out.empty()) throw bidev::ConfigError("sweep requires --out DIR");

    const bidev::SweepAxis axis = bidev::parse_sweep_axis(axis_name);
    const auto dataset = bidev::load_dataset(opts.dataset_path, label_map_from_config(file_config));
    const auto backend = build_backend(opts, file_config);
    const bidev::TemplateLibrary templates = load_templates(opts);
    const Resources resources = load_resources(opts, config);

    bidev::BenchmarkOptions options;
    options.workers = opts.workers;
    options.hop_filter = hop_filter;
    const bidev::SweepTable table = bidev::run_sweep(
        axis, values, config, backend, templates, resources.corpus ? &*resources.corpus : nullptr,
        resources.index ? &*resources.index : nullptr, bidev::RoleOptions{}, dataset, options);

    const fs::path out_dir = prepare_out_dir(opts.out);
    bidev::write_sweep_csv(table, out_dir / "sweep.csv");
    finish_run(out_dir, "sweep", config, backend->backend_id(), opts, started_at);

    for (const auto& cell : table.cells) {
        std::cout << bidev::to_string(axis) << "=" << cell.axis_value << " ";
        if (cell.ok) {
            std::cout << "macro_f1=";
            if (cell.eval.macro_f1) {
                std::cout << *cell.eval.macro_f1;
            } else {
                std::cout << "undefined";
            }
        } else {
            std::cout << "error=" << cell.error;
        }
        std::cout << "\n";
    }
    return 0;
}

std::string format_cell(const nlohmann::json& json, const char* key) {
    if (!json.contains(key) || json.at(key).is_null()) return "-";
    std::ostringstream out;
    if (json.at(key).is_number_float()) {
        out.precision(4);
        out << std::fixed << json.at(key).get<double>();
    } else {
        out << json.at(key);
    }
    return out.str();
}

int cmd_report(const std::vector<std::string>& results_files, const std::string& out_file) {
    std::ostringstream out;
    out << "| run | items | failures | macro_f1 | support_f1 | refute_f1 |\n";
    out << "|-----|-------|----------|----------|------------|-----------|\n";
    for (const auto& file : results_files) {
        nlohmann::json json;
        try {
            json = nlohmann::json::parse(bidev::read_file(file));
        } catch (const nlohmann::json::exception& error) {
            throw bidev::ConfigError(file + " is not a results file: " + error.what());
        }
        out << "| " << fs::path(file).parent_path().filename().string() << "/"
            << fs::path(file).filename().string() << " | " << format_cell(json, "item_count")
            << " | " << format_cell(json, "failure_count") << " | " << format_cell(json, "macro_f1")
            << " | " << format_cell(json["support"], "f1") << " | "
            << format_cell(json["refute"], "f1") << " |\n";
    }
    std::cout << out.str();
    if (!out_file.empty()) bidev::write_file_atomic(out_file, out.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Claim verification via iterative simplification, decomposition, and checking"};
    app.require_subcommand(1);

    CommonOpts index_opts;
    CLI::App* index_cmd = app.add_subcommand("index", "Build and serialize a BM25 index");
    add_common_options(index_cmd, index_opts);

    CommonOpts verify_opts;
    std::string claim_arg;
    std::string claim_file;
    std::string docs_arg;
    CLI::App* verify_cmd = app.add_subcommand("verify", "Verify a single claim");
    verify_cmd->add_option("claim", claim_arg, "Claim text");
    verify_cmd->add_option("--claim-file", claim_file, "File holding the claim text");
    verify_cmd->add_option("--docs", docs_arg, "Comma-separated gold evidence doc ids");
    add_common_options(verify_cmd, verify_opts);

    CommonOpts bench_opts;
    int bench_hops = -1;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Score a dataset");
    CLI::Option* bench_hops_opt =
        bench_cmd->add_option("--hops", bench_hops, "Score only records with this num_hops");
    add_common_options(bench_cmd, bench_opts);

    CommonOpts sweep_opts;
    std::string sweep_axis;
    std::vector<std::string> sweep_values;
    int sweep_hops = -1;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Benchmark across one config axis");
    sweep_cmd->add_option("--axis", sweep_axis, "iterations, top_k, strategy, or ablation")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "Axis values, e.g. --values 0 1 2 3")
        ->required()
        ->expected(-1);
    CLI::Option* sweep_hops_opt =
        sweep_cmd->add_option("--hops", sweep_hops, "Score only records with this num_hops");
    add_common_options(sweep_cmd, sweep_opts);

    std::vector<std::string> report_files;
    std::string report_out;
    CLI::App* report_cmd = app.add_subcommand("report", "Summarize results.json files");
    report_cmd->add_option("results", report_files, "results.json files")->required()->expected(-1);
    report_cmd->add_option("--out", report_out, "Also write the table to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        const int code = app.exit(error);
        return code == 0 ? 0 : 1;
    }

    try {
        if (index_cmd->parsed()) return cmd_index(index_opts);
        if (verify_cmd->parsed()) return cmd_verify(verify_opts, claim_arg, claim_file, docs_arg);
        if (bench_cmd->parsed()) {
            std::optional<int> hops;
            if (*bench_hops_opt) hops = bench_hops;
            return cmd_bench(bench_opts, hops);
        }
        if (sweep_cmd->parsed()) {
            std::optional<int> hops;
            if (*sweep_hops_opt) hops = sweep_hops;
            return cmd_sweep(sweep_opts, sweep_axis, sweep_values, hops);
        }
        if (report_cmd->parsed()) return cmd_report(report_files, report_out);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 1;
}
