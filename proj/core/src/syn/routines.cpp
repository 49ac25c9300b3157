#include "timing/syn/routines.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "timing/util/rng.hpp"

namespace timing::syn {

namespace {

using ordered_json = nlohmann::ordered_json;

// Time-of-day clusters the bank draws anchors from. Three blocks roughly
// matching when people actually touch their homes: get-up, lunch, evening.
struct Cluster {
    int lo;
    int hi;
};
constexpr Cluster kClusters[3] = {
    {23400, 30600},  // 06:30 - 08:30
    {41400, 48600},  // 11:30 - 13:30
    {63000, 80100},  // 17:30 - 22:15
};

}  // namespace

std::vector<RoutineSpec> default_routine_bank(const GeneratorConfig& config) {
    // Fixed internal seed: the bank is part of the shipped configuration, not
    // of any particular generation run.
    util::Rng rng(0xA11CE5u);

    // Devices beyond the coverage slots are drawn with a skew so a couple of
    // devices dominate, mirroring real homes where a light switch and a plug
    // outnumber everything else.
    std::vector<double> device_weights(static_cast<std::size_t>(config.num_devices), 1.0);
    if (config.num_devices >= 2) {
        device_weights[0] = 6.0;
        device_weights[1] = 4.0;
    }

    std::vector<RoutineSpec> bank(static_cast<std::size_t>(config.num_users));
    int slot = 0;  // global routine counter, drives coverage of the vocabularies
    for (int u = 0; u < config.num_users; ++u) {
        RoutineSpec& spec = bank[static_cast<std::size_t>(u)];
        spec.user = u;
        spec.noise_rate = rng.uniform(0.5, 1.2);
        const int routines = 7 + static_cast<int>(rng.below(4));  // 7..10 habits per user
        spec.routines.reserve(static_cast<std::size_t>(routines));
        for (int r = 0; r < routines; ++r, ++slot) {
            RoutineTemplate t;
            t.control = slot < config.num_controls ? slot
                                                   : static_cast<int>(rng.below(
                                                         static_cast<std::uint64_t>(config.num_controls)));
            t.device = slot < config.num_devices ? slot : static_cast<int>(rng.weighted(device_weights));
            const Cluster& c = kClusters[slot % 3];
            t.anchor_mean = rng.range_int(c.lo, c.hi);
            t.anchor_sigma = rng.range_int(240, 900);
            t.probability = rng.uniform(0.80, 0.98);
            const double mask_kind = rng.uniform();
            if (mask_kind < 0.70) {
                t.day_mask = {true, true, true, true, true, true, true};
            } else if (mask_kind < 0.85) {
                t.day_mask = {true, true, true, true, true, false, false};
            } else {
                t.day_mask = {false, false, false, false, false, true, true};
            }
            spec.routines.push_back(t);
        }
    }
    validate_bank(bank, config);
    return bank;
}

void validate_bank(const std::vector<RoutineSpec>& bank, const GeneratorConfig& config) {
    if (bank.empty()) throw std::invalid_argument("routine bank: no users");
    if (static_cast<int>(bank.size()) != config.num_users)
        throw std::invalid_argument("routine bank: " + std::to_string(bank.size()) +
                                    " users, config expects " + std::to_string(config.num_users));
    std::vector<bool> device_seen(static_cast<std::size_t>(config.num_devices), false);
    std::vector<bool> control_seen(static_cast<std::size_t>(config.num_controls), false);
    for (const RoutineSpec& spec : bank) {
        if (spec.user < 0 || spec.user >= config.num_users)
            throw std::invalid_argument("routine bank: user id " + std::to_string(spec.user) +
                                        " outside vocabulary");
        if (spec.noise_rate < 0.0)
            throw std::invalid_argument("routine bank: negative noise rate");
        for (const RoutineTemplate& t : spec.routines) {
            if (t.device < 0 || t.device >= config.num_devices)
                throw std::invalid_argument("routine bank: device id out of range");
            if (t.control < 0 || t.control >= config.num_controls)
                throw std::invalid_argument("routine bank: control id out of range");
            if (t.anchor_mean < 0 || t.anchor_mean >= 86400)
                throw std::invalid_argument("routine bank: anchor mean outside the day");
            if (t.anchor_sigma <= 0)
                throw std::invalid_argument("routine bank: anchor sigma must be positive");
            if (t.probability < 0.0 || t.probability > 1.0)
                throw std::invalid_argument("routine bank: probability outside [0,1]");
        }
    }
    for (const RoutineSpec& spec : bank)
        for (const RoutineTemplate& t : spec.routines) {
            device_seen[static_cast<std::size_t>(t.device)] = true;
            control_seen[static_cast<std::size_t>(t.control)] = true;
        }
    for (int d = 0; d < config.num_devices; ++d)
        if (!device_seen[static_cast<std::size_t>(d)])
            throw std::invalid_argument("routine bank: device " + std::to_string(d) +
                                        " never appears in any routine");
    for (int c = 0; c < config.num_controls; ++c)
        if (!control_seen[static_cast<std::size_t>(c)])
            throw std::invalid_argument("routine bank: control " + std::to_string(c) +
                                        " never appears in any routine");
}

void save_routine_bank(const std::vector<RoutineSpec>& bank, const std::string& path) {
    ordered_json users = ordered_json::array();
    for (const RoutineSpec& spec : bank) {
        ordered_json u;
        u["user"] = spec.user;
        u["noise_rate"] = spec.noise_rate;
        ordered_json routines = ordered_json::array();
        for (const RoutineTemplate& t : spec.routines) {
            ordered_json r;
            r["device"] = t.device;
            r["control"] = t.control;
            r["anchor_mean"] = t.anchor_mean;
            r["anchor_sigma"] = t.anchor_sigma;
            r["day_mask"] = t.day_mask;
            r["probability"] = t.probability;
            routines.push_back(std::move(r));
        }
        u["routines"] = std::move(routines);
        users.push_back(std::move(u));
    }
    ordered_json doc;
    doc["users"] = std::move(users);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("routine bank: cannot open " + path + " for writing");
    file << doc.dump(2) << '\n';
    if (!file) throw std::runtime_error("routine bank: write failed for " + path);
}

std::vector<RoutineSpec> load_routine_bank(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("routine bank: cannot open " + path);
    ordered_json doc;
    try {
        file >> doc;
    } catch (const std::exception& e) {
        throw std::runtime_error("routine bank: " + path + " is not valid JSON: " + e.what());
    }
    std::vector<RoutineSpec> bank;
    for (const auto& u : doc.at("users")) {
        RoutineSpec spec;
        spec.user = u.at("user").get<int>();
        spec.noise_rate = u.at("noise_rate").get<double>();
        for (const auto& r : u.at("routines")) {
            RoutineTemplate t;
            t.device = r.at("device").get<int>();
            t.control = r.at("control").get<int>();
            t.anchor_mean = r.at("anchor_mean").get<int>();
            t.anchor_sigma = r.at("anchor_sigma").get<int>();
            const auto mask = r.at("day_mask");
            if (mask.size() != 7)
                throw std::runtime_error("routine bank: day_mask must have 7 entries");
            for (std::size_t i = 0; i < 7; ++i) t.day_mask[i] = mask[i].get<bool>();
            t.probability = r.at("probability").get<double>();
            spec.routines.push_back(t);
        }
        bank.push_back(std::move(spec));
    }
    return bank;
}

}  // namespace timing::syn
