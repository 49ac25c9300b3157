#pragma once

#include <string>
#include <vector>

#include "timing/data/records.hpp"

namespace timing::data {

// A loaded log file: schema, vocabulary sizes, and fixed-length sessions.
// Immutable after construction by convention; nothing here mutates it.
struct Dataset {
    Schema schema = Schema::kAn;
    int num_devices = 0;
    int num_controls = 0;
    int num_users = 0;           // an only
    int num_device_controls = 0; // smartsense only
    int actions_per_session = kActionsPerSession;
    std::vector<Session> sessions;
};

// File layout: one JSON header line carrying schema and vocabulary sizes,
// then one whitespace-separated row of 5 integers per action, sessions as
// consecutive groups of actions_per_session rows.
//   an row:          day time device user control
//   smartsense row:  day hour_range device control device_control
Dataset load_an(const std::string& path);
Dataset load_smartsense(const std::string& path);
Dataset load_dataset(const std::string& path);  // dispatch on the header's schema tag
void save_dataset(const Dataset& dataset, const std::string& path);

// Validates one session against schema invariants; throws with the session
// index baked into the message.
void validate_session(const Session& session, const Dataset& dataset, std::size_t index);

// Down-conversion: day of year -> day of week, seconds -> 3-hour range,
// (device, control) -> combined device_control id.
Dataset to_smartsense(const Dataset& an);

// Sidecar file with human-readable name -> id dictionaries for each
// vocabulary in the dataset.
void save_vocab_sidecar(const Dataset& dataset, const std::string& path);

}  // namespace timing::data
