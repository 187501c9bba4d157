#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pillarmetry/errors.hpp"
#include "pillarmetry/io.hpp"
#include "pillarmetry/segment.hpp"

namespace pillarmetry {

/// One row of the per-structure measurement table produced by `segment`.
struct MeasurementRow {
    int image_id = 0;
    int component_id = 0;
    std::optional<int> grid_i;
    std::optional<int> grid_j;
    long long pixel_count = 0;
    double area_nm2 = 0.0;
    double centroid_x_nm = 0.0;
    double centroid_y_nm = 0.0;
    std::optional<int> tile_id;
};

inline constexpr const char* kMeasurementCsvHeader =
    "image_id,component_id,grid_i,grid_j,pixel_count,area_nm2,centroid_x_nm,centroid_y_nm,tile_id";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::optional<int> parse_optional_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return static_cast<int>(parse_int(s));
}

inline std::string optional_int_to_csv(const std::optional<int>& v) {
    return v ? std::to_string(*v) : std::string();
}

}  // namespace detail

inline MeasurementRow measurement_row_from(const StructureMeasurement& m, int image_id) {
    MeasurementRow row;
    row.image_id = image_id;
    row.component_id = m.component_id;
    row.grid_i = m.grid_i;
    row.grid_j = m.grid_j;
    row.pixel_count = m.pixel_count;
    row.area_nm2 = m.area_nm2;
    row.centroid_x_nm = m.centroid_x_nm;
    row.centroid_y_nm = m.centroid_y_nm;
    row.tile_id = m.tile_id;
    return row;
}

inline std::string encode_measurement_csv(const std::vector<MeasurementRow>& rows) {
    std::string out = kMeasurementCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.image_id);
        out += ',';
        out += std::to_string(r.component_id);
        out += ',';
        out += detail::optional_int_to_csv(r.grid_i);
        out += ',';
        out += detail::optional_int_to_csv(r.grid_j);
        out += ',';
        out += std::to_string(r.pixel_count);
        out += ',';
        out += format_double(r.area_nm2);
        out += ',';
        out += format_double(r.centroid_x_nm);
        out += ',';
        out += format_double(r.centroid_y_nm);
        out += ',';
        out += detail::optional_int_to_csv(r.tile_id);
        out += '\n';
    }
    return out;
}

inline std::vector<MeasurementRow> decode_measurement_csv(const std::string& text) {
    if (text.empty()) throw ParseError(ParseError::Kind::EmptyInput, "measurement CSV is empty");
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(ParseError::Kind::EmptyInput, "measurement CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMeasurementCsvHeader)
        throw ParseError(ParseError::Kind::MalformedHeader,
                         "measurement CSV header mismatch: got '" + line + "'");

    std::vector<MeasurementRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 9)
            throw ParseError(ParseError::Kind::RaggedRows,
                             "measurement CSV line " + std::to_string(lineno) + " has " +
                                 std::to_string(f.size()) + " fields, expected 9");
        MeasurementRow r;
        r.image_id = static_cast<int>(parse_int(f[0]));
        r.component_id = static_cast<int>(parse_int(f[1]));
        r.grid_i = detail::parse_optional_int(f[2]);
        r.grid_j = detail::parse_optional_int(f[3]);
        r.pixel_count = parse_int(f[4]);
        r.area_nm2 = parse_double(f[5]);
        r.centroid_x_nm = parse_double(f[6]);
        r.centroid_y_nm = parse_double(f[7]);
        r.tile_id = detail::parse_optional_int(f[8]);
        rows.push_back(r);
    }
    return rows;
}

/// Keyed value series, the interchange format for `compare`. The key column
/// is optional; when both series carry keys they are joined on them.
struct SeriesEntry {
    std::string key;
    double value = 0.0;
};

struct Series {
    bool has_keys = false;
    std::vector<SeriesEntry> entries;
};

inline std::string encode_series_csv(const Series& s) {
    std::string out = s.has_keys ? "key,value\n" : "value\n";
    for (const auto& e : s.entries) {
        if (s.has_keys) {
            out += e.key;
            out += ',';
        }
        out += format_double(e.value);
        out += '\n';
    }
    return out;
}

inline Series decode_series_csv(const std::string& text) {
    if (text.empty()) throw ParseError(ParseError::Kind::EmptyInput, "series CSV is empty");
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(ParseError::Kind::EmptyInput, "series CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    Series s;
    if (line == "key,value")
        s.has_keys = true;
    else if (line == "value")
        s.has_keys = false;
    else
        throw ParseError(ParseError::Kind::MalformedHeader,
                         "series CSV header must be 'key,value' or 'value', got '" + line + "'");

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        const std::size_t want = s.has_keys ? 2 : 1;
        if (f.size() != want)
            throw ParseError(ParseError::Kind::RaggedRows,
                             "series CSV line " + std::to_string(lineno) + " has " +
                                 std::to_string(f.size()) + " fields, expected " +
                                 std::to_string(want));
        SeriesEntry e;
        if (s.has_keys) {
            if (f[0].empty())
                throw ParseError(ParseError::Kind::BadSchema,
                                 "series CSV line " + std::to_string(lineno) + " has an empty key");
            e.key = f[0];
            e.value = parse_double(f[1]);
        } else {
            e.value = parse_double(f[0]);
        }
        s.entries.push_back(e);
    }
    return s;
}

}  // namespace pillarmetry
