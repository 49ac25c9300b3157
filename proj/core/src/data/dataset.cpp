#include "timing/data/dataset.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace timing::data {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string pad_id(int id, int width) {
    std::string digits = std::to_string(id);
    if (static_cast<int>(digits.size()) < width)
        digits.insert(0, static_cast<std::size_t>(width - static_cast<int>(digits.size())), '0');
    return digits;
}

int id_width(int vocab) { return static_cast<int>(std::to_string(std::max(vocab - 1, 0)).size()); }

void check_range(int value, int lo, int hi_excl, const char* field, std::size_t row) {
    if (value < lo || value >= hi_excl)
        throw std::runtime_error("dataset: row " + std::to_string(row) + ": " + field + " = " +
                                 std::to_string(value) + " outside [" + std::to_string(lo) + ", " +
                                 std::to_string(hi_excl) + ")");
}

ordered_json header_json(const Dataset& d) {
    ordered_json h;
    h["schema"] = schema_name(d.schema);
    h["devices"] = d.num_devices;
    h["controls"] = d.num_controls;
    if (d.schema == Schema::kAn)
        h["users"] = d.num_users;
    else
        h["device_controls"] = d.num_device_controls;
    h["actions_per_session"] = d.actions_per_session;
    return h;
}

Dataset parse_header(const std::string& line, const std::string& path) {
    ordered_json h;
    try {
        h = ordered_json::parse(line);
    } catch (const std::exception& e) {
        throw std::runtime_error("dataset: " + path + " has a malformed header: " + e.what());
    }
    Dataset d;
    d.schema = schema_from_name(h.at("schema").get<std::string>());
    d.num_devices = h.at("devices").get<int>();
    d.num_controls = h.at("controls").get<int>();
    if (d.schema == Schema::kAn)
        d.num_users = h.at("users").get<int>();
    else
        d.num_device_controls = h.at("device_controls").get<int>();
    d.actions_per_session = h.value("actions_per_session", kActionsPerSession);
    if (d.num_devices <= 0 || d.num_controls <= 0 || d.actions_per_session < 2)
        throw std::runtime_error("dataset: " + path + " header declares empty vocabularies");
    return d;
}

Dataset load_impl(const std::string& path, Schema expected) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("dataset: cannot open " + path);
    std::string line;
    if (!std::getline(file, line))
        throw std::runtime_error("dataset: " + path + " is empty");
    Dataset d = parse_header(line, path);
    if (d.schema != expected)
        throw std::runtime_error("dataset: " + path + " is '" + schema_name(d.schema) +
                                 "', expected '" + schema_name(expected) + "'");

    std::vector<ActionRecord> actions;
    std::size_t row = 0;  // 1-based data-row index, assigned per line below
    while (std::getline(file, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream cells(line);
        ActionRecord a;
        int c4 = 0, c5 = 0;
        std::string extra;
        if (!(cells >> a.day >> a.time >> a.device >> c4 >> c5) || (cells >> extra))
            throw std::runtime_error("dataset: row " + std::to_string(row) +
                                     ": expected 5 integer columns");
        if (d.schema == Schema::kAn) {
            a.user = c4;
            a.control = c5;
        } else {
            a.control = c4;
            a.device_control = c5;
        }
        actions.push_back(a);
    }
    if (actions.empty()) throw std::runtime_error("dataset: " + path + " has no rows");
    if (actions.size() % static_cast<std::size_t>(d.actions_per_session) != 0)
        throw std::runtime_error("dataset: " + path + ": " + std::to_string(actions.size()) +
                                 " rows do not group into sessions of " +
                                 std::to_string(d.actions_per_session));

    // SmartSense keeps the redundant combined id; enforce that it is at least
    // a function of (device, control).
    std::map<std::pair<int, int>, int> combined;

    const std::size_t per = static_cast<std::size_t>(d.actions_per_session);
    d.sessions.reserve(actions.size() / per);
    for (std::size_t s = 0; s * per < actions.size(); ++s) {
        Session session;
        session.schema = d.schema;
        session.actions.assign(actions.begin() + static_cast<std::ptrdiff_t>(s * per),
                               actions.begin() + static_cast<std::ptrdiff_t>((s + 1) * per));
        session.user = d.schema == Schema::kAn ? session.actions.front().user : static_cast<int>(s);
        if (d.schema == Schema::kSmartSense) {
            for (std::size_t i = 0; i < session.actions.size(); ++i) {
                const ActionRecord& a = session.actions[i];
                auto [it, fresh] = combined.try_emplace({a.device, a.control}, a.device_control);
                if (!fresh && it->second != a.device_control)
                    throw std::runtime_error(
                        "dataset: row " + std::to_string(s * per + i + 1) + ": device_control " +
                        std::to_string(a.device_control) + " contradicts earlier value " +
                        std::to_string(it->second) + " for the same (device, control)");
            }
        }
        validate_session(session, d, s);
        d.sessions.push_back(std::move(session));
    }
    return d;
}

}  // namespace

void validate_session(const Session& session, const Dataset& dataset, std::size_t index) {
    const std::size_t per = static_cast<std::size_t>(dataset.actions_per_session);
    if (session.actions.size() != per)
        throw std::runtime_error("dataset: session " + std::to_string(index) + " has " +
                                 std::to_string(session.actions.size()) + " actions, expected " +
                                 std::to_string(per));
    for (std::size_t i = 0; i < session.actions.size(); ++i) {
        const ActionRecord& a = session.actions[i];
        const std::size_t row = index * per + i + 1;
        if (dataset.schema == Schema::kAn) {
            check_range(a.day, 0, 366, "day", row);
            check_range(a.time, 0, kSecondsPerDay, "time", row);
            check_range(a.user, 0, dataset.num_users, "user", row);
            if (a.user != session.user)
                throw std::runtime_error("dataset: row " + std::to_string(row) +
                                         ": user changes inside a session");
            if (i > 0) {
                const ActionRecord& prev = session.actions[i - 1];
                if (a.day < prev.day || (a.day == prev.day && a.time < prev.time))
                    throw std::runtime_error("dataset: row " + std::to_string(row) +
                                             ": time goes backwards inside a session");
            }
        } else {
            check_range(a.day, 0, 7, "day", row);
            check_range(a.time, 0, kSmartSenseRanges, "hour_range", row);
            check_range(a.device_control, 0, dataset.num_device_controls, "device_control", row);
        }
        check_range(a.device, 0, dataset.num_devices, "device", row);
        check_range(a.control, 0, dataset.num_controls, "control", row);
    }
}

Dataset load_an(const std::string& path) { return load_impl(path, Schema::kAn); }

Dataset load_smartsense(const std::string& path) { return load_impl(path, Schema::kSmartSense); }

Dataset load_dataset(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("dataset: cannot open " + path);
    std::string line;
    if (!std::getline(file, line)) throw std::runtime_error("dataset: " + path + " is empty");
    return load_impl(path, parse_header(line, path).schema);
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("dataset: cannot open " + path + " for writing");
    file << header_json(dataset).dump() << '\n';
    for (const Session& session : dataset.sessions) {
        for (const ActionRecord& a : session.actions) {
            if (dataset.schema == Schema::kAn)
                file << a.day << ' ' << a.time << ' ' << a.device << ' ' << a.user << ' '
                     << a.control << '\n';
            else
                file << a.day << ' ' << a.time << ' ' << a.device << ' ' << a.control << ' '
                     << a.device_control << '\n';
        }
    }
    if (!file) throw std::runtime_error("dataset: write failed for " + path);
}

Dataset to_smartsense(const Dataset& an) {
    if (an.schema != Schema::kAn)
        throw std::invalid_argument("to_smartsense: input is not an-style");
    Dataset out;
    out.schema = Schema::kSmartSense;
    out.num_devices = an.num_devices;
    out.num_controls = an.num_controls;
    out.num_device_controls = an.num_devices * an.num_controls;
    out.actions_per_session = an.actions_per_session;
    out.sessions.reserve(an.sessions.size());
    const int range_width = kSecondsPerDay / kSmartSenseRanges;
    for (const Session& s : an.sessions) {
        Session t;
        t.schema = Schema::kSmartSense;
        t.user = s.user;
        t.actions.reserve(s.actions.size());
        for (const ActionRecord& a : s.actions) {
            ActionRecord b;
            b.day = a.day % 7;
            b.time = a.time / range_width;
            b.device = a.device;
            b.control = a.control;
            b.device_control = a.device * an.num_controls + a.control;
            t.actions.push_back(b);
        }
        out.sessions.push_back(std::move(t));
    }
    return out;
}

void save_vocab_sidecar(const Dataset& dataset, const std::string& path) {
    ordered_json vocab;
    auto fill = [](int count, const std::string& prefix) {
        ordered_json m;
        const int width = id_width(count);
        for (int i = 0; i < count; ++i) m[prefix + "_" + pad_id(i, width)] = i;
        return m;
    };
    vocab["devices"] = fill(dataset.num_devices, "device");
    vocab["controls"] = fill(dataset.num_controls, "control");
    if (dataset.schema == Schema::kAn)
        vocab["users"] = fill(dataset.num_users, "user");
    else
        vocab["device_controls"] = fill(dataset.num_device_controls, "device_control");
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("vocab: cannot open " + path + " for writing");
    file << vocab.dump(2) << '\n';
    if (!file) throw std::runtime_error("vocab: write failed for " + path);
}

}  // namespace timing::data
