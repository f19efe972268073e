#pragma once

#include "pmon/store/store.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace pmon::api {

// Shortest decimal that reads back as the same binary32, always with a
// decimal point: 220.0f -> "220.0", 49.99f -> "49.99".
std::string legacy_number(float value);

// JSON number with the same shortest spelling as legacy_number().
double json_number(float value);

// Legacy shape of the records endpoint: one key, the device's table name,
// holding an array of rows whose values are all strings.
//   {"pm01":[{"active_power":"2618.0","current":"14.0",...,"id":"1","ts":"..."}]}
// Keys are emitted in sorted order.
nlohmann::json legacy_row(const store::StoredRow& row);
std::string records_json(const std::string& device, const std::vector<store::StoredRow>& rows);

// Reverse of records_json() for sample rows. Throws std::invalid_argument on
// any deviation from the legacy shape.
std::pair<std::string, std::vector<store::StoredRow>> parse_records_json(const std::string& text);

// Modern shape of /latest: JSON numbers plus "device", "id" and "ts".
nlohmann::json latest_json(const store::StoredRow& row);

} // namespace pmon::api
