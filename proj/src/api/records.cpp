#include "pmon/api/records.hpp"

#include <charconv>
#include <stdexcept>

namespace pmon::api {

std::string legacy_number(float value)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
    std::string out(buf, end);
    if (out.find('.') == std::string::npos)
        out += ".0";
    return out;
}

double json_number(float value)
{
    const auto text = legacy_number(value);
    double out = 0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

nlohmann::json legacy_row(const store::StoredRow& row)
{
    const auto& s = row.sample();
    nlohmann::json j;
    j["id"] = std::to_string(row.id);
    j["ts"] = format_iso(s.ts);
    for (auto kind : kAllKinds)
        j[std::string(name_of(kind))] = legacy_number(s.values.get(kind));
    return j;
}

std::string records_json(const std::string& device, const std::vector<store::StoredRow>& rows)
{
    nlohmann::json list = nlohmann::json::array();
    for (const auto& row : rows)
        if (row.is_sample())
            list.push_back(legacy_row(row));
    nlohmann::json out;
    out[device] = std::move(list);
    return out.dump();
}

namespace {

float parse_float_field(const nlohmann::json& row, std::string_view key)
{
    const auto& v = row.at(std::string(key));
    if (!v.is_string())
        throw std::invalid_argument("field '" + std::string(key) + "' is not a string");
    const auto& text = v.get_ref<const std::string&>();
    float out = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || p != text.data() + text.size())
        throw std::invalid_argument("field '" + std::string(key) + "' is not a decimal: " + text);
    return out;
}

} // namespace

std::pair<std::string, std::vector<store::StoredRow>> parse_records_json(const std::string& text)
try {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_object() || doc.size() != 1)
        throw std::invalid_argument("records document must be an object with exactly one key");
    const std::string device = doc.begin().key();
    const auto& list = doc.begin().value();
    if (!list.is_array())
        throw std::invalid_argument("records value must be an array");
    std::vector<store::StoredRow> rows;
    for (const auto& r : list) {
        if (!r.is_object() || r.size() != 2 + kMeasurementCount)
            throw std::invalid_argument("row has unexpected fields");
        store::StoredRow row;
        const auto& id = r.at("id").get_ref<const std::string&>();
        row.id = std::stoull(id);
        const auto ts = parse_time(r.at("ts").get_ref<const std::string&>());
        if (!ts)
            throw std::invalid_argument("bad ts in row " + id);
        Sample s{device, *ts, {}};
        for (auto kind : kAllKinds)
            s.values.set(kind, parse_float_field(r, name_of(kind)));
        row.reading = std::move(s);
        rows.push_back(std::move(row));
    }
    return {device, std::move(rows)};
} catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed records document: ") + e.what());
}

nlohmann::json latest_json(const store::StoredRow& row)
{
    const auto& s = row.sample();
    nlohmann::json j;
    j["device"] = s.device;
    j["id"] = row.id;
    j["ts"] = format_iso(s.ts);
    for (auto kind : kAllKinds)
        j[std::string(name_of(kind))] = json_number(s.values.get(kind));
    return j;
}

} // namespace pmon::api
