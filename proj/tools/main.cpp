#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "timing/data/dataset.hpp"
#include "timing/data/split.hpp"
#include "timing/diff/checkpoint.hpp"
#include "timing/nets/model.hpp"
#include "timing/syn/analysis.hpp"
#include "timing/syn/generate.hpp"
#include "timing/util/hash.hpp"
#include "timing/util/rng.hpp"
#include "timing/util/table.hpp"
#include "timing/xp/sweeps.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace timing;

namespace {

// Every run leaves one of these next to its outputs, so a result file can
// always be traced back to the exact inputs that produced it.
struct RunManifest {
    std::string subcommand;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string dataset_hash;
    std::string output_dir;
    std::string started_utc;
    std::string finished_utc;
};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["subcommand"] = m.subcommand;
    j["config_path"] = m.config_path;
    j["seed"] = m.seed;
    j["dataset_hash"] = m.dataset_hash;
    j["output_dir"] = m.output_dir;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    const fs::path path = fs::path(m.output_dir) / "manifest.json";
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest to '" + path.string() + "'");
}

std::string default_out(const std::string& subcommand) {
    const char* root = std::getenv("TIMING_OUT_ROOT");
    const std::string base = root != nullptr && *root != '\0' ? root : "out";
    return base + "/" + subcommand;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json j;
    in >> j;
    if (!j.is_object()) throw std::runtime_error("config root must be a JSON object");
    return j;
}

void check_keys(const json& section, const std::vector<std::string>& allowed,
                const std::string& name) {
    for (const auto& item : section.items())
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw std::runtime_error("config section '" + name + "' has unknown key '" +
                                     item.key() + "'");
}

json section(const json& config, const std::string& name) {
    if (!config.contains(name)) return json::object();
    if (!config.at(name).is_object())
        throw std::runtime_error("config section '" + name + "' must be a JSON object");
    return config.at(name);
}

syn::GeneratorConfig generator_from(const json& config) {
    const json g = section(config, "generator");
    check_keys(g,
               {"num_users", "num_devices", "num_controls", "target_instances", "start_day",
                "end_day", "seed"},
               "generator");
    syn::GeneratorConfig c;
    c.num_users = g.value("num_users", c.num_users);
    c.num_devices = g.value("num_devices", c.num_devices);
    c.num_controls = g.value("num_controls", c.num_controls);
    c.target_instances = g.value("target_instances", c.target_instances);
    c.start_day = g.value("start_day", c.start_day);
    c.end_day = g.value("end_day", c.end_day);
    c.seed = g.value("seed", c.seed);
    return c;
}

nets::ModelConfig model_from(const json& config) {
    const json m = section(config, "model");
    check_keys(m,
               {"variant", "schema", "num_devices", "num_controls", "bins", "embed_dim",
                "actions_per_session", "heads", "layers", "ff_width", "leaky_slope",
                "positional_before", "regression"},
               "model");
    nets::ModelConfig c;
    c.variant = m.value("variant", c.variant);
    if (m.contains("schema")) c.schema = data::schema_from_name(m.at("schema").get<std::string>());
    c.num_devices = m.value("num_devices", c.num_devices);
    c.num_controls = m.value("num_controls", c.num_controls);
    c.bins = m.value("bins", c.bins);
    c.embed_dim = m.value("embed_dim", c.embed_dim);
    c.actions_per_session = m.value("actions_per_session", c.actions_per_session);
    c.heads = m.value("heads", c.heads);
    c.layers = m.value("layers", c.layers);
    c.ff_width = m.value("ff_width", c.ff_width);
    c.leaky_slope = m.value("leaky_slope", c.leaky_slope);
    c.positional_before = m.value("positional_before", c.positional_before);
    c.regression = m.value("regression", c.regression);
    return c;
}

xp::TrainConfig train_from(const json& config) {
    const json t = section(config, "train");
    check_keys(t, {"batch_size", "learning_rate", "l2reg", "max_epochs", "patience", "seed"},
               "train");
    xp::TrainConfig c;
    c.batch_size = t.value("batch_size", c.batch_size);
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    c.l2reg = t.value("l2reg", c.l2reg);
    c.max_epochs = t.value("max_epochs", c.max_epochs);
    c.patience = t.value("patience", c.patience);
    c.seed = t.value("seed", c.seed);
    return c;
}

void check_top_level(const json& config) {
    check_keys(config, {"generator", "model", "train", "sweep", "split_seed"}, "<root>");
}

// Vocabulary, schema, and window length always come from the data file; the
// config only decides architecture and training knobs.
void adopt_dataset(nets::ModelConfig& model, const data::Dataset& dataset) {
    model.schema = dataset.schema;
    model.num_devices = dataset.num_devices;
    model.num_controls = dataset.num_controls;
    model.actions_per_session = dataset.actions_per_session;
}

util::Table metrics_table(const xp::MetricReport& report) {
    std::vector<std::string> columns{"model", "dataset", "examples"};
    for (auto it = report.precision.rbegin(); it != report.precision.rend(); ++it)
        columns.push_back("p" + std::to_string(it->first));
    columns.push_back("rmse_seconds");
    util::Table table(std::move(columns));

    std::vector<std::string> row{report.model, report.dataset,
                                 util::Table::fmt(static_cast<long long>(report.num_examples))};
    for (auto it = report.precision.rbegin(); it != report.precision.rend(); ++it)
        row.push_back(util::Table::fmt(it->second, 4));
    row.push_back(util::Table::fmt(report.rmse, 2));
    table.add_row(std::move(row));
    return table;
}

util::Table history_table(const std::vector<xp::EpochStats>& history) {
    util::Table table({"epoch", "train_loss", "val_precision", "is_best"});
    for (const auto& stats : history)
        table.add_row({util::Table::fmt(static_cast<long long>(stats.epoch)),
                       util::Table::fmt(stats.train_loss, 6),
                       util::Table::fmt(stats.val_precision, 4),
                       util::Table::fmt(static_cast<long long>(stats.is_best ? 1 : 0))});
    return table;
}

struct GenerateArgs {
    std::string config_path;
    std::string out_dir = default_out("generate");
    std::string routines;
    std::uint64_t seed = 0;
    int users = 0;
    bool seed_set = false;
    bool users_set = false;
};

int run_generate(const GenerateArgs& args) {
    RunManifest manifest;
    manifest.subcommand = "generate";
    manifest.config_path = args.config_path;
    manifest.output_dir = args.out_dir;
    manifest.started_utc = utc_now();

    const json config = load_config_file(args.config_path);
    check_top_level(config);
    syn::GeneratorConfig gen = generator_from(config);
    if (args.seed_set) gen.seed = args.seed;
    if (args.users_set) gen.num_users = args.users;

    std::vector<syn::RoutineSpec> bank;
    if (args.routines == "none")
        throw std::runtime_error(
            "generation needs a routine bank; pass --routines <file> or omit the flag to use "
            "the built-in bank");
    bank = args.routines.empty() ? syn::default_routine_bank(gen)
                                 : syn::load_routine_bank(args.routines);
    syn::validate_bank(bank, gen);

    const data::Dataset dataset = syn::generate(gen, bank);
    fs::create_directories(args.out_dir);
    data::save_dataset(dataset, (fs::path(args.out_dir) / "dataset.txt").string());
    data::save_vocab_sidecar(dataset, (fs::path(args.out_dir) / "vocab.txt").string());
    syn::analyze_time_diffs(dataset.sessions)
        .to_table()
        .write_tsv((fs::path(args.out_dir) / "time_diffs.tsv").string());
    syn::analyze_device_frequency(dataset.sessions)
        .to_table()
        .write_tsv((fs::path(args.out_dir) / "device_frequency.tsv").string());

    manifest.seed = gen.seed;
    manifest.dataset_hash = util::hex64(xp::dataset_fingerprint(dataset));
    manifest.finished_utc = utc_now();
    write_manifest(manifest);

    std::cout << "wrote " << dataset.sessions.size() << " sessions to " << args.out_dir << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir = default_out("train");
    std::string model;
    std::uint64_t seed = 0;
    int bins = 0;
    bool seed_set = false;
    bool model_set = false;
    bool bins_set = false;
};

int run_train(const TrainArgs& args) {
    RunManifest manifest;
    manifest.subcommand = "train";
    manifest.config_path = args.config_path;
    manifest.output_dir = args.out_dir;
    manifest.started_utc = utc_now();

    const json config = load_config_file(args.config_path);
    check_top_level(config);
    const data::Dataset dataset = data::load_dataset(args.data_path);

    nets::ModelConfig mc = model_from(config);
    adopt_dataset(mc, dataset);
    if (args.model_set) mc.variant = args.model;
    if (args.bins_set) mc.bins = args.bins;
    // 3-hour-range data supports exactly 8 bins; flip the default but keep any
    // explicit choice so validation can explain it
    const bool bins_chosen = args.bins_set || section(config, "model").contains("bins");
    if (dataset.schema == data::Schema::kSmartSense && !bins_chosen) mc.bins = 8;

    xp::TrainConfig tc = train_from(config);
    if (args.seed_set) tc.seed = args.seed;
    const auto split_seed = config.value("split_seed", std::uint64_t{1});

    const data::DatasetSplit split = data::split_sessions(dataset.sessions, {}, split_seed);
    util::Rng rng(tc.seed);
    auto model = nets::build_model(mc, rng);
    const xp::TrainResult result = xp::train(*model, split, tc);

    fs::create_directories(args.out_dir);
    diff::save_checkpoint((fs::path(args.out_dir) / "checkpoint.txt").string(),
                          mc.to_json().dump(), model->params().all());
    history_table(result.history).write_tsv((fs::path(args.out_dir) / "history.tsv").string());
    xp::MetricReport test = result.test;
    test.dataset = args.data_path;
    metrics_table(test).write_tsv((fs::path(args.out_dir) / "metrics.tsv").string());

    manifest.seed = tc.seed;
    manifest.dataset_hash = util::hex64(xp::dataset_fingerprint(dataset));
    manifest.finished_utc = utc_now();
    write_manifest(manifest);

    std::cout << "trained " << mc.variant << " for " << result.history.size() << " epochs, best "
              << result.best_epoch << " (val " << util::Table::fmt(result.best_val_precision, 4)
              << ")\n"
              << "test " << test.precision_str() << " rmse "
              << util::Table::fmt(test.rmse, 2) << "\n";
    return 0;
}

struct EvalArgs {
    std::string config_path;
    std::string checkpoint_path;
    std::string data_path;
    std::string out_dir = default_out("eval");
    std::string split = "test";
    int bins = 0;
    bool bins_set = false;
};

int run_eval(const EvalArgs& args) {
    RunManifest manifest;
    manifest.subcommand = "eval";
    manifest.config_path = args.config_path;
    manifest.output_dir = args.out_dir;
    manifest.started_utc = utc_now();

    const json config = load_config_file(args.config_path);
    check_top_level(config);
    const diff::Checkpoint ckpt = diff::load_checkpoint(args.checkpoint_path);
    const nets::ModelConfig mc = nets::ModelConfig::from_json(json::parse(ckpt.config_json));
    const data::Dataset dataset = data::load_dataset(args.data_path);

    if (mc.schema != dataset.schema)
        throw std::runtime_error("checkpoint schema '" + data::schema_name(mc.schema) +
                                 "' does not match dataset schema '" +
                                 data::schema_name(dataset.schema) + "'");
    if (mc.num_devices != dataset.num_devices || mc.num_controls != dataset.num_controls)
        throw std::runtime_error("checkpoint vocabulary does not match the dataset");
    if (mc.actions_per_session != dataset.actions_per_session)
        throw std::runtime_error("checkpoint session length does not match the dataset");

    util::Rng rng(1);
    auto model = nets::build_model(mc, rng);
    diff::assign_from_checkpoint(ckpt, model->params());

    const std::vector<int> report_bins =
        args.bins_set ? std::vector<int>{args.bins} : xp::default_report_bins(mc.bins);
    const auto split_seed = config.value("split_seed", std::uint64_t{1});

    xp::MetricReport report;
    if (args.split == "test") {
        const data::DatasetSplit split = data::split_sessions(dataset.sessions, {}, split_seed);
        report = xp::evaluate(*model, split.test(), report_bins);
    } else {
        report = xp::evaluate(*model, dataset.sessions, report_bins);
    }
    report.dataset = args.data_path;

    fs::create_directories(args.out_dir);
    metrics_table(report).write_tsv((fs::path(args.out_dir) / "metrics.tsv").string());

    manifest.seed = split_seed;
    manifest.dataset_hash = util::hex64(xp::dataset_fingerprint(dataset));
    manifest.finished_utc = utc_now();
    write_manifest(manifest);

    std::cout << report.model << " on " << report.num_examples << " sessions: "
              << report.precision_str() << " rmse " << util::Table::fmt(report.rmse, 2) << "\n";
    return 0;
}

struct SweepArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir = default_out("sweep");
    std::string kind;
    std::uint64_t seed = 0;
    int bins = 0;
    int jobs = 0;
    std::vector<int> windows;
    std::vector<int> layers;
    bool seed_set = false;
    bool bins_set = false;
    bool jobs_set = false;
};

int run_sweep(const SweepArgs& args) {
    RunManifest manifest;
    manifest.subcommand = "sweep";
    manifest.config_path = args.config_path;
    manifest.output_dir = args.out_dir;
    manifest.started_utc = utc_now();

    const json config = load_config_file(args.config_path);
    check_top_level(config);
    const data::Dataset dataset = data::load_dataset(args.data_path);

    xp::SweepConfig sc;
    sc.train = train_from(config);
    sc.model = model_from(config);
    sc.split_seed = config.value("split_seed", std::uint64_t{1});
    if (args.seed_set) sc.train.seed = args.seed;
    if (args.bins_set) sc.model.bins = args.bins;

    const json sw = section(config, "sweep");
    check_keys(sw, {"jobs", "windows", "layer_counts", "bin_counts"}, "sweep");
    sc.jobs = sw.value("jobs", sc.jobs);
    if (args.jobs_set) sc.jobs = args.jobs;
    std::vector<int> windows = sw.value("windows", std::vector<int>{5, 10, 20, 50, 100, 200});
    std::vector<int> layer_counts = sw.value("layer_counts", std::vector<int>{2, 4});
    const std::vector<int> bin_counts =
        sw.value("bin_counts", std::vector<int>{8, 12, 24, 48, 96, 288});
    if (!args.windows.empty()) windows = args.windows;
    if (!args.layers.empty()) layer_counts = args.layers;

    const util::Table table = [&]() -> util::Table {
        if (args.kind == "context") return xp::sweep_context(dataset, sc, windows, layer_counts);
        if (args.kind == "bins") return xp::sweep_bins(dataset, sc, bin_counts);
        if (args.kind == "regcls") return xp::compare_regression_classification(dataset, sc);
        return xp::run_ablations(dataset, sc);
    }();

    fs::create_directories(args.out_dir);
    table.write_tsv((fs::path(args.out_dir) / (args.kind + ".tsv")).string());

    manifest.seed = sc.train.seed;
    manifest.dataset_hash = util::hex64(xp::dataset_fingerprint(dataset));
    manifest.finished_utc = utc_now();
    write_manifest(manifest);

    std::cout << table.to_tsv();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Next-action-time prediction over smart-home action logs"};
    app.require_subcommand(1);

    GenerateArgs gen_args;
    CLI::App* gen = app.add_subcommand("generate", "Sample a synthetic action log from routines");
    gen->add_option("--config", gen_args.config_path, "JSON config file; flags win over it");
    gen->add_option("--out", gen_args.out_dir,
                    "Output directory (default $TIMING_OUT_ROOT/generate or out/generate)");
    gen->add_option("--seed", gen_args.seed, "Generator seed override");
    gen->add_option("--users", gen_args.users, "Number of simulated users override");
    gen->add_option("--routines", gen_args.routines,
                    "Routine bank file; omit for the built-in bank");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a model and keep its best checkpoint");
    train->add_option("--config", train_args.config_path, "JSON config file; flags win over it");
    train->add_option("--data", train_args.data_path, "Dataset file")->required();
    train->add_option("--out", train_args.out_dir,
                      "Output directory (default $TIMING_OUT_ROOT/train or out/train)");
    train->add_option("--model", train_args.model, "Model name (see README for the list)");
    train->add_option("--bins", train_args.bins, "Time bins per day override");
    train->add_option("--seed", train_args.seed, "Training seed override");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Score an existing checkpoint on a dataset");
    eval->add_option("--config", eval_args.config_path, "JSON config file; flags win over it");
    eval->add_option("--checkpoint", eval_args.checkpoint_path, "Checkpoint file")->required();
    eval->add_option("--data", eval_args.data_path, "Dataset file")->required();
    eval->add_option("--out", eval_args.out_dir,
                     "Output directory (default $TIMING_OUT_ROOT/eval or out/eval)");
    eval->add_option("--bins", eval_args.bins, "Report precision at this bin count only");
    eval->add_option("--split", eval_args.split, "Evaluate 'test' (default) or 'full'")
        ->check(CLI::IsMember({"test", "full"}));

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "Run a retraining sweep and emit its table");
    sweep->add_option("--kind", sweep_args.kind, "One of context, bins, regcls, ablation")
        ->required()
        ->check(CLI::IsMember({"context", "bins", "regcls", "ablation"}));
    sweep->add_option("--config", sweep_args.config_path, "JSON config file; flags win over it");
    sweep->add_option("--data", sweep_args.data_path, "Dataset file")->required();
    sweep->add_option("--out", sweep_args.out_dir,
                      "Output directory (default $TIMING_OUT_ROOT/sweep or out/sweep)");
    sweep->add_option("--seed", sweep_args.seed, "Per-trial training seed override");
    sweep->add_option("--bins", sweep_args.bins, "Model bin count override");
    sweep->add_option("--jobs", sweep_args.jobs, "Parallel trial workers");
    sweep->add_option("--window", sweep_args.windows, "Context sweep window sizes")
        ->delimiter(',');
    sweep->add_option("--layers", sweep_args.layers, "Context sweep layer counts")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_args.seed_set = gen->count("--seed") > 0;
            gen_args.users_set = gen->count("--users") > 0;
            return run_generate(gen_args);
        }
        if (train->parsed()) {
            train_args.seed_set = train->count("--seed") > 0;
            train_args.model_set = train->count("--model") > 0;
            train_args.bins_set = train->count("--bins") > 0;
            return run_train(train_args);
        }
        if (eval->parsed()) {
            eval_args.bins_set = eval->count("--bins") > 0;
            return run_eval(eval_args);
        }
        if (sweep->parsed()) {
            sweep_args.seed_set = sweep->count("--seed") > 0;
            sweep_args.bins_set = sweep->count("--bins") > 0;
            sweep_args.jobs_set = sweep->count("--jobs") > 0;
            return run_sweep(sweep_args);
        }
    } catch (const std::exception& e) {
        std::cerr << "timing: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
