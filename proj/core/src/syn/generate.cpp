#include "timing/syn/generate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "timing/util/hash.hpp"
#include "timing/util/rng.hpp"

namespace timing::syn {

namespace {

using data::ActionRecord;
using data::Dataset;
using data::kSecondsPerDay;
using data::Schema;
using data::Session;

// Per-user stream sampling. Each user gets an independent generator keyed by
// (run seed, user id) so streams are reproducible regardless of whether users
// are processed serially or in parallel.
std::vector<ActionRecord> sample_user_stream(const GeneratorConfig& config,
                                             const RoutineSpec& spec) {
    std::uint64_t user_seed = util::fnv1a64(&config.seed, sizeof config.seed);
    user_seed = util::fnv1a64(&spec.user, sizeof spec.user, user_seed);
    util::Rng rng(user_seed);

    std::vector<ActionRecord> events;
    for (int day = config.start_day; day <= config.end_day; ++day) {
        const int dow = day % 7;
        for (const RoutineTemplate& t : spec.routines) {
            if (!t.day_mask[static_cast<std::size_t>(dow)]) continue;
            if (!rng.coin(t.probability)) continue;
            double when = rng.normal(static_cast<double>(t.anchor_mean),
                                     static_cast<double>(t.anchor_sigma));
            if (when < 0.0) when = 0.0;
            int event_day = day;
            int event_time = static_cast<int>(std::llround(when));
            if (event_time >= kSecondsPerDay) {  // habit slipped past midnight
                ++event_day;
                event_time -= kSecondsPerDay;
                if (event_time >= kSecondsPerDay || event_day > 365) continue;
            }
            ActionRecord a;
            a.day = event_day;
            a.time = event_time;
            a.device = t.device;
            a.control = t.control;
            a.user = spec.user;
            events.push_back(a);
        }
        const int noise_events = rng.poisson(spec.noise_rate);
        for (int i = 0; i < noise_events; ++i) {
            ActionRecord a;
            a.day = day;
            a.time = static_cast<int>(rng.below(kSecondsPerDay));
            a.device = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.num_devices)));
            a.control = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.num_controls)));
            a.user = spec.user;
            events.push_back(a);
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const ActionRecord& x, const ActionRecord& y) {
        return x.day != y.day ? x.day < y.day : x.time < y.time;
    });
    return events;
}

}  // namespace

Dataset generate(const GeneratorConfig& config, const std::vector<RoutineSpec>& bank) {
    if (config.num_users <= 0 || config.num_devices <= 0 || config.num_controls <= 0)
        throw std::invalid_argument("generate: vocabulary sizes must be positive");
    if (config.target_instances <= 0)
        throw std::invalid_argument("generate: target_instances must be positive");
    if (config.start_day < 0 || config.end_day > 365 || config.start_day > config.end_day)
        throw std::invalid_argument("generate: bad day range");
    validate_bank(bank, config);

    const int per_session = data::kActionsPerSession;
    std::vector<std::vector<ActionRecord>> streams;
    streams.reserve(bank.size());
    std::vector<std::int64_t> windows(bank.size(), 0);
    std::int64_t total_windows = 0;
    for (std::size_t u = 0; u < bank.size(); ++u) {
        streams.push_back(sample_user_stream(config, bank[u]));
        const std::int64_t n = static_cast<std::int64_t>(streams[u].size());
        windows[u] = std::max<std::int64_t>(0, n - (per_session - 1));
        total_windows += windows[u];
    }
    if (total_windows < config.target_instances)
        throw std::runtime_error("generate: routines produce only " + std::to_string(total_windows) +
                                 " sessions; target is " + std::to_string(config.target_instances) +
                                 " (extend the date range or add routines)");

    // Largest-remainder apportionment of the session budget over users. Each
    // user keeps their EARLIEST quota windows, so every kept stream is a
    // prefix of the sampled stream; rewindowing for other context lengths can
    // rebuild identical prefixes later.
    const std::int64_t target = config.target_instances;
    std::vector<std::int64_t> quota(bank.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t assigned = 0;
    for (std::size_t u = 0; u < bank.size(); ++u) {
        const double exact = static_cast<double>(target) * static_cast<double>(windows[u]) /
                             static_cast<double>(total_windows);
        quota[u] = static_cast<std::int64_t>(exact);
        assigned += quota[u];
        remainders.emplace_back(exact - static_cast<double>(quota[u]), u);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < target; ++i) {
        const std::size_t u = remainders[i % remainders.size()].second;
        if (quota[u] < windows[u]) {
            ++quota[u];
            ++assigned;
        }
    }

    Dataset out;
    out.schema = Schema::kAn;
    out.num_devices = config.num_devices;
    out.num_controls = config.num_controls;
    out.num_users = config.num_users;
    out.actions_per_session = per_session;
    out.sessions.reserve(static_cast<std::size_t>(target));

    struct Keyed {
        int day;
        int time;
        int user;
        std::int64_t window;
        Session session;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(static_cast<std::size_t>(target));
    for (std::size_t u = 0; u < bank.size(); ++u) {
        for (std::int64_t w = 0; w < quota[u]; ++w) {
            Session s;
            s.schema = Schema::kAn;
            s.user = bank[u].user;
            s.actions.assign(streams[u].begin() + w, streams[u].begin() + w + per_session);
            keyed.push_back(Keyed{s.actions.front().day, s.actions.front().time, s.user, w,
                                  std::move(s)});
        }
    }
    // Deterministic global order regardless of how user streams were
    // produced: first action's moment, then user, then window counter.
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        if (a.day != b.day) return a.day < b.day;
        if (a.time != b.time) return a.time < b.time;
        if (a.user != b.user) return a.user < b.user;
        return a.window < b.window;
    });
    for (Keyed& k : keyed) out.sessions.push_back(std::move(k.session));

    std::vector<bool> device_seen(static_cast<std::size_t>(config.num_devices), false);
    std::vector<bool> control_seen(static_cast<std::size_t>(config.num_controls), false);
    for (std::size_t i = 0; i < out.sessions.size(); ++i) {
        data::validate_session(out.sessions[i], out, i);
        for (const ActionRecord& a : out.sessions[i].actions) {
            device_seen[static_cast<std::size_t>(a.device)] = true;
            control_seen[static_cast<std::size_t>(a.control)] = true;
        }
    }
    for (int d = 0; d < config.num_devices; ++d)
        if (!device_seen[static_cast<std::size_t>(d)])
            throw std::runtime_error("generate: device " + std::to_string(d) +
                                     " never appears in the trimmed output");
    for (int c = 0; c < config.num_controls; ++c)
        if (!control_seen[static_cast<std::size_t>(c)])
            throw std::runtime_error("generate: control " + std::to_string(c) +
                                     " never appears in the trimmed output");
    return out;
}

}  // namespace timing::syn
