#include "timing/xp/sweeps.hpp"

#include <atomic>
#include <exception>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>

#include "timing/util/rng.hpp"

namespace timing::xp {

namespace {

bool same_action(const data::ActionRecord& a, const data::ActionRecord& b) {
    return a.day == b.day && a.time == b.time && a.device == b.device && a.control == b.control &&
           a.user == b.user && a.device_control == b.device_control;
}

void require_timestamps(const data::Dataset& dataset, const std::string& what) {
    if (dataset.schema != data::Schema::kAn)
        throw std::invalid_argument(what +
                                    " needs second-level timestamps; 3-hour-range data cannot "
                                    "be scored at fine granularity");
}

// One independent retraining job. Everything a worker reads is owned by the
// spec or behind the sessions pointer, which outlives the run.
struct Trial {
    nets::ModelConfig model;
    TrainConfig train;
    const std::vector<data::Session>* sessions = nullptr;
    std::uint64_t split_seed = 1;
};

MetricReport run_trial(const Trial& trial) {
    data::DatasetSplit split = data::split_sessions(*trial.sessions, {}, trial.split_seed);
    util::Rng rng(trial.train.seed);
    auto model = nets::build_model(trial.model, rng);
    TrainResult result = train(*model, split, trial.train);
    return result.test;
}

std::vector<MetricReport> run_trials(const std::vector<Trial>& trials, int jobs) {
    std::vector<MetricReport> results(trials.size());
    const int workers = std::max(1, std::min(jobs, static_cast<int>(trials.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < trials.size(); ++i) results[i] = run_trial(trials[i]);
        return results;
    }

    // results[i] depends only on trials[i], so the table is identical for
    // every worker count; errors surface after all workers drain the queue
    std::vector<std::exception_ptr> errors(trials.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < trials.size(); i = next.fetch_add(1)) {
                try {
                    results[i] = run_trial(trials[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

nets::ModelConfig base_model(const SweepConfig& config, const data::Dataset& dataset) {
    nets::ModelConfig m = config.model;
    m.schema = dataset.schema;
    m.num_devices = dataset.num_devices;
    m.num_controls = dataset.num_controls;
    m.actions_per_session = dataset.actions_per_session;
    return m;
}

std::vector<std::string> precision_columns(int bins) {
    std::vector<std::string> names;
    for (int k : default_report_bins(bins)) names.push_back("p" + std::to_string(k));
    return names;
}

void append_precisions(std::vector<std::string>& cells, const MetricReport& report, int bins) {
    for (int k : default_report_bins(bins))
        cells.push_back(util::Table::fmt(report.precision.at(k), 4));
}

}  // namespace

std::vector<data::Session> rewindow(const data::Dataset& dataset, int actions_per_session) {
    if (actions_per_session < 2)
        throw std::invalid_argument("rewindow: sessions need at least 2 actions");
    if (dataset.sessions.empty()) throw std::invalid_argument("rewindow: empty dataset");

    // sessions are stride-1 windows listed in window order per user, so each
    // user's stream is the first window plus every later window's last action
    std::map<int, std::vector<data::ActionRecord>> streams;
    for (const auto& session : dataset.sessions) {
        auto& stream = streams[session.user];
        if (stream.empty()) {
            stream = session.actions;
            continue;
        }
        const std::size_t overlap = session.actions.size() - 1;
        bool aligned = stream.size() >= overlap;
        for (std::size_t i = 0; aligned && i < overlap; ++i)
            aligned = same_action(session.actions[i], stream[stream.size() - overlap + i]);
        if (!aligned)
            throw std::invalid_argument(
                "rewindow: session windows of user " + std::to_string(session.user) +
                " do not overlap stride-1; streams cannot be rebuilt");
        stream.push_back(session.actions.back());
    }

    std::vector<data::Session> out;
    const std::size_t length = static_cast<std::size_t>(actions_per_session);
    for (const auto& [user, stream] : streams) {
        if (stream.size() < length) continue;
        for (std::size_t start = 0; start + length <= stream.size(); ++start) {
            data::Session s;
            s.user = user;
            s.schema = dataset.schema;
            s.actions.assign(stream.begin() + static_cast<std::ptrdiff_t>(start),
                             stream.begin() + static_cast<std::ptrdiff_t>(start + length));
            out.push_back(std::move(s));
        }
    }
    if (out.empty())
        throw std::invalid_argument("rewindow: no user stream reaches " +
                                    std::to_string(actions_per_session) + " actions");
    return out;
}

util::Table sweep_context(const data::Dataset& dataset, const SweepConfig& config,
                          const std::vector<int>& windows, const std::vector<int>& layer_counts) {
    require_timestamps(dataset, "context sweep");
    if (windows.empty() || layer_counts.empty())
        throw std::invalid_argument("context sweep: empty grid");

    std::vector<std::vector<data::Session>> per_window;
    per_window.reserve(windows.size());
    for (int w : windows) per_window.push_back(rewindow(dataset, w + 1));

    std::vector<Trial> trials;
    for (std::size_t wi = 0; wi < windows.size(); ++wi)
        for (int layers : layer_counts) {
            Trial t;
            t.model = base_model(config, dataset);
            t.model.actions_per_session = windows[wi] + 1;
            t.model.layers = layers;
            t.train = config.train;
            t.sessions = &per_window[wi];
            t.split_seed = config.split_seed;
            trials.push_back(t);
        }
    std::vector<MetricReport> reports = run_trials(trials, config.jobs);

    std::vector<std::string> columns{"window", "layers", "sessions"};
    for (const auto& name : precision_columns(config.model.bins)) columns.push_back(name);
    util::Table table(std::move(columns));
    std::size_t row = 0;
    for (std::size_t wi = 0; wi < windows.size(); ++wi)
        for (int layers : layer_counts) {
            std::vector<std::string> cells{util::Table::fmt(static_cast<long long>(windows[wi])),
                                           util::Table::fmt(static_cast<long long>(layers)),
                                           util::Table::fmt(static_cast<long long>(
                                               per_window[wi].size()))};
            append_precisions(cells, reports[row++], config.model.bins);
            table.add_row(std::move(cells));
        }
    return table;
}

util::Table sweep_bins(const data::Dataset& dataset, const SweepConfig& config,
                       const std::vector<int>& bin_counts) {
    require_timestamps(dataset, "bin-size sweep");
    if (bin_counts.empty()) throw std::invalid_argument("bin-size sweep: empty grid");

    std::vector<Trial> trials;
    for (int bins : bin_counts) {
        Trial t;
        t.model = base_model(config, dataset);
        t.model.bins = bins;
        t.train = config.train;
        t.sessions = &dataset.sessions;
        t.split_seed = config.split_seed;
        trials.push_back(t);
    }
    std::vector<MetricReport> reports = run_trials(trials, config.jobs);

    util::Table table({"bins", "precision", "rmse_seconds"});
    for (std::size_t i = 0; i < trials.size(); ++i)
        table.add_row({util::Table::fmt(static_cast<long long>(bin_counts[i])),
                       util::Table::fmt(reports[i].precision.at(bin_counts[i]), 4),
                       util::Table::fmt(reports[i].rmse, 2)});
    return table;
}

util::Table compare_regression_classification(const data::Dataset& dataset,
                                              const SweepConfig& config) {
    require_timestamps(dataset, "regression comparison");

    std::vector<Trial> trials;
    for (bool regression : {true, false}) {
        Trial t;
        t.model = base_model(config, dataset);
        t.model.regression = regression;
        t.train = config.train;
        t.sessions = &dataset.sessions;
        t.split_seed = config.split_seed;
        trials.push_back(t);
    }
    std::vector<MetricReport> reports = run_trials(trials, config.jobs);

    std::vector<std::string> columns{"head"};
    for (const auto& name : precision_columns(config.model.bins)) columns.push_back(name);
    columns.push_back("rmse_seconds");
    util::Table table(std::move(columns));
    const std::vector<std::string> heads{"regression", "classification"};
    for (std::size_t i = 0; i < trials.size(); ++i) {
        std::vector<std::string> cells{heads[i]};
        append_precisions(cells, reports[i], config.model.bins);
        cells.push_back(util::Table::fmt(reports[i].rmse, 2));
        table.add_row(std::move(cells));
    }
    return table;
}

util::Table run_ablations(const data::Dataset& dataset, const SweepConfig& config) {
    require_timestamps(dataset, "ablation run");

    const std::vector<std::string> variants{"timing-matters", "minus-rbf", "minus-time-encoder",
                                            "minus-sequence-encoder"};
    std::vector<Trial> trials;
    for (const auto& variant : variants) {
        Trial t;
        t.model = base_model(config, dataset);
        t.model.variant = variant;
        t.train = config.train;
        t.sessions = &dataset.sessions;
        t.split_seed = config.split_seed;
        trials.push_back(t);
    }
    std::vector<MetricReport> reports = run_trials(trials, config.jobs);

    std::vector<std::string> columns{"model"};
    for (const auto& name : precision_columns(config.model.bins)) columns.push_back(name);
    util::Table table(std::move(columns));
    for (std::size_t i = 0; i < trials.size(); ++i) {
        std::vector<std::string> cells{variants[i]};
        append_precisions(cells, reports[i], config.model.bins);
        table.add_row(std::move(cells));
    }
    return table;
}

}  // namespace timing::xp
