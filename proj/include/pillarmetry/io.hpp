#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "pillarmetry/errors.hpp"
#include "pillarmetry/heightmap.hpp"
#include "pillarmetry/image.hpp"
#include "pillarmetry/manifest.hpp"

namespace pillarmetry {

// ---------------------------------------------------------------------------
// number formatting

/// Shortest decimal representation that round-trips exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError(ParseError::Kind::BadNumber, "not a number: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError(ParseError::Kind::BadNumber, "not an integer: '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// file helpers

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    if (is.bad()) throw IoError("read failed: " + path.string());
    return ss.str();
}

/// Writes via a temp file in the same directory, then renames. A crashed run
/// never leaves a half-written artifact under the final name.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        os.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// binary portable graymap (magic "P5")
//
// Header: "P5\n<width> <height>\n<maxval>\n" followed by raw samples,
// row-major, big-endian for 16-bit. maxval is 255 or 65535. The reader
// accepts any whitespace run between header tokens but requires exactly one
// whitespace character after maxval and an exact payload length, so that
// read and write are byte-exact inverses.

namespace detail {

inline bool pgm_is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::size_t pgm_skip_space(const std::string& data, std::size_t pos) {
    while (pos < data.size() && pgm_is_space(data[pos])) ++pos;
    return pos;
}

inline std::size_t pgm_parse_uint(const std::string& data, std::size_t pos, long long& out, const char* what) {
    pos = pgm_skip_space(data, pos);
    std::size_t start = pos;
    while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') ++pos;
    if (pos == start)
        throw ParseError(ParseError::Kind::MalformedHeader, std::string("expected ") + what + " in graymap header");
    out = 0;
    for (std::size_t i = start; i < pos; ++i) {
        out = out * 10 + (data[i] - '0');
        if (out > 1'000'000'000LL)
            throw ParseError(ParseError::Kind::MalformedHeader, std::string(what) + " out of range");
    }
    return pos;
}

}  // namespace detail

inline GrayImage decode_gray_image(const std::string& data) {
    if (data.empty())
        throw ParseError(ParseError::Kind::EmptyInput, "empty input");
    if (data.size() < 2 || data[0] != 'P' || data[1] != '5')
        throw ParseError(ParseError::Kind::MalformedHeader, "bad magic, expected P5");

    long long w = 0, h = 0, maxval = 0;
    std::size_t pos = 2;
    pos = detail::pgm_parse_uint(data, pos, w, "width");
    pos = detail::pgm_parse_uint(data, pos, h, "height");
    pos = detail::pgm_parse_uint(data, pos, maxval, "maxval");
    if (pos >= data.size() || !detail::pgm_is_space(data[pos]))
        throw ParseError(ParseError::Kind::MalformedHeader, "missing whitespace after maxval");
    ++pos;  // exactly one whitespace byte before the payload

    if (w < 1 || h < 1)
        throw ParseError(ParseError::Kind::MalformedHeader, "dimensions must be >= 1");
    if (maxval != 255 && maxval != 65535)
        throw ParseError(ParseError::Kind::UnsupportedDepth,
                         "unsupported maxval " + std::to_string(maxval) + " (expected 255 or 65535)");

    GrayImage img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.bit_depth = maxval == 255 ? 8 : 16;

    const std::size_t npix = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    const std::size_t bytes_per = img.bit_depth == 8 ? 1 : 2;
    const std::size_t need = npix * bytes_per;
    const std::size_t have = data.size() - pos;
    if (have < need)
        throw ParseError(ParseError::Kind::TruncatedPayload,
                         "truncated payload: need " + std::to_string(need) + " bytes, have " + std::to_string(have));
    if (have > need)
        throw ParseError(ParseError::Kind::TrailingData,
                         "trailing data after payload: " + std::to_string(have - need) + " extra bytes");

    img.pixels.resize(npix);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data()) + pos;
    if (bytes_per == 1) {
        for (std::size_t i = 0; i < npix; ++i) img.pixels[i] = p[i];
    } else {
        for (std::size_t i = 0; i < npix; ++i)
            img.pixels[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
    }
    return img;
}

inline std::string encode_gray_image(const GrayImage& img) {
    img.validate();
    std::string out;
    out += "P5\n";
    out += std::to_string(img.width);
    out += ' ';
    out += std::to_string(img.height);
    out += '\n';
    out += std::to_string(img.maxval());
    out += '\n';
    const std::size_t npix = img.pixels.size();
    if (img.bit_depth == 8) {
        out.reserve(out.size() + npix);
        for (std::size_t i = 0; i < npix; ++i)
            out.push_back(static_cast<char>(img.pixels[i] & 0xFF));
    } else {
        out.reserve(out.size() + 2 * npix);
        for (std::size_t i = 0; i < npix; ++i) {
            out.push_back(static_cast<char>((img.pixels[i] >> 8) & 0xFF));
            out.push_back(static_cast<char>(img.pixels[i] & 0xFF));
        }
    }
    return out;
}

inline GrayImage read_gray_image(const std::filesystem::path& path) {
    return decode_gray_image(read_file_bytes(path));
}

inline void write_gray_image(const GrayImage& img, const std::filesystem::path& path) {
    write_file_atomic(path, encode_gray_image(img));
}

// ---------------------------------------------------------------------------
// height map: one "# pixel_scale_nm=<v>" comment line, then a comma-separated
// numeric matrix. Values use shortest-round-trip formatting, so a write/read
// cycle reproduces every height bit-exactly.

inline HeightMap decode_heightmap(const std::string& text) {
    if (text.empty())
        throw ParseError(ParseError::Kind::EmptyInput, "empty input");

    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line))
        throw ParseError(ParseError::Kind::EmptyInput, "empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::string prefix = "# pixel_scale_nm=";
    if (line.rfind(prefix, 0) != 0)
        throw ParseError(ParseError::Kind::MalformedHeader, "missing '# pixel_scale_nm=' header line");
    HeightMap map;
    map.pixel_scale_nm = parse_double(std::string_view(line).substr(prefix.size()));
    if (!(map.pixel_scale_nm > 0.0))
        throw ParseError(ParseError::Kind::MalformedHeader, "pixel_scale_nm must be > 0");

    std::vector<double> values;
    int rows = 0;
    int cols = -1;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        int ncols = 0;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            std::string_view cell(line.data() + start,
                                  (comma == std::string::npos ? line.size() : comma) - start);
            values.push_back(parse_double(cell));
            ++ncols;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cols < 0)
            cols = ncols;
        else if (ncols != cols)
            throw ParseError(ParseError::Kind::RaggedRows,
                             "ragged row " + std::to_string(rows) + ": " + std::to_string(ncols) +
                                 " cells, expected " + std::to_string(cols));
        ++rows;
    }
    if (rows == 0)
        throw ParseError(ParseError::Kind::MalformedHeader, "height map has no data rows");

    map.rows = rows;
    map.cols = cols;
    map.heights = std::move(values);
    map.validate();
    return map;
}

inline std::string encode_heightmap(const HeightMap& map) {
    map.validate();
    std::string out = "# pixel_scale_nm=" + format_double(map.pixel_scale_nm) + "\n";
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (c) out += ',';
            out += format_double(map.at(r, c));
        }
        out += '\n';
    }
    return out;
}

inline HeightMap read_heightmap(const std::filesystem::path& path) {
    return decode_heightmap(read_file_bytes(path));
}

inline void write_heightmap(const HeightMap& map, const std::filesystem::path& path) {
    write_file_atomic(path, encode_heightmap(map));
}

// ---------------------------------------------------------------------------
// JSON documents. Key sets are fixed; unknown keys are rejected so that
// generator and analyzer versions cannot silently drift apart.

namespace detail {

inline void require_exact_keys(const nlohmann::json& j, std::initializer_list<const char*> keys,
                               const char* what) {
    if (!j.is_object())
        throw ParseError(ParseError::Kind::BadSchema, std::string(what) + ": expected a JSON object");
    for (const char* k : keys)
        if (!j.contains(k))
            throw ParseError(ParseError::Kind::BadSchema, std::string(what) + ": missing key '" + k + "'");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) { known = true; break; }
        if (!known)
            throw ParseError(ParseError::Kind::BadSchema, std::string(what) + ": unknown key '" + it.key() + "'");
    }
}

inline double json_number(const nlohmann::json& j, const char* key, const char* what) {
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ParseError(ParseError::Kind::BadSchema, std::string(what) + ": key '" + key + "' must be a number");
    return v.get<double>();
}

}  // namespace detail

inline nlohmann::json parse_json_text(const std::string& text, const char* what = "JSON input") {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded())
        throw ParseError(ParseError::Kind::BadSchema, std::string(what) + ": invalid JSON");
    return j;
}

inline SceneManifest manifest_from_json(const nlohmann::json& j) {
    detail::require_exact_keys(j, {"pixel_scale_nm", "pitch_nm", "seed", "structures"}, "manifest");
    SceneManifest m;
    m.pixel_scale_nm = detail::json_number(j, "pixel_scale_nm", "manifest");
    m.pitch_nm = detail::json_number(j, "pitch_nm", "manifest");
    if (!j.at("seed").is_number_unsigned())
        throw ParseError(ParseError::Kind::BadSchema, "manifest: 'seed' must be a non-negative integer");
    m.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("structures").is_array())
        throw ParseError(ParseError::Kind::BadSchema, "manifest: 'structures' must be an array");
    for (const auto& js : j.at("structures")) {
        detail::require_exact_keys(js,
                                   {"grid_i", "grid_j", "centroid_x_nm", "centroid_y_nm", "true_area_nm2",
                                    "true_height_nm", "shape", "is_outlier"},
                                   "manifest structure");
        StructureRecord s;
        if (!js.at("grid_i").is_number_integer() || !js.at("grid_j").is_number_integer())
            throw ParseError(ParseError::Kind::BadSchema, "manifest structure: grid indices must be integers");
        s.grid_i = js.at("grid_i").get<int>();
        s.grid_j = js.at("grid_j").get<int>();
        s.centroid_x_nm = detail::json_number(js, "centroid_x_nm", "manifest structure");
        s.centroid_y_nm = detail::json_number(js, "centroid_y_nm", "manifest structure");
        s.true_area_nm2 = detail::json_number(js, "true_area_nm2", "manifest structure");
        s.true_height_nm = detail::json_number(js, "true_height_nm", "manifest structure");
        if (!js.at("shape").is_string())
            throw ParseError(ParseError::Kind::BadSchema, "manifest structure: 'shape' must be a string");
        s.shape = shape_kind_from_string(js.at("shape").get<std::string>());
        if (!js.at("is_outlier").is_boolean())
            throw ParseError(ParseError::Kind::BadSchema, "manifest structure: 'is_outlier' must be a boolean");
        s.is_outlier = js.at("is_outlier").get<bool>();
        m.structures.push_back(s);
    }
    m.validate();
    return m;
}

inline nlohmann::json manifest_to_json(const SceneManifest& m) {
    m.validate();
    nlohmann::json j;
    j["pixel_scale_nm"] = m.pixel_scale_nm;
    j["pitch_nm"] = m.pitch_nm;
    j["seed"] = m.seed;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : m.structures) {
        nlohmann::json js;
        js["grid_i"] = s.grid_i;
        js["grid_j"] = s.grid_j;
        js["centroid_x_nm"] = s.centroid_x_nm;
        js["centroid_y_nm"] = s.centroid_y_nm;
        js["true_area_nm2"] = s.true_area_nm2;
        js["true_height_nm"] = s.true_height_nm;
        js["shape"] = to_string(s.shape);
        js["is_outlier"] = s.is_outlier;
        arr.push_back(std::move(js));
    }
    j["structures"] = std::move(arr);
    return j;
}

inline SceneManifest read_manifest(const std::filesystem::path& path) {
    return manifest_from_json(parse_json_text(read_file_bytes(path), "manifest"));
}

inline void write_manifest(const SceneManifest& m, const std::filesystem::path& path) {
    write_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

inline Calibration read_calibration(const std::filesystem::path& path) {
    nlohmann::json j = parse_json_text(read_file_bytes(path), "calibration");
    detail::require_exact_keys(j, {"pixel_scale_nm", "source"}, "calibration");
    Calibration cal;
    cal.pixel_scale_nm = detail::json_number(j, "pixel_scale_nm", "calibration");
    if (!j.at("source").is_string())
        throw ParseError(ParseError::Kind::BadSchema, "calibration: 'source' must be a string");
    cal.source = j.at("source").get<std::string>();
    cal.validate();
    return cal;
}

inline void write_calibration(const Calibration& cal, const std::filesystem::path& path) {
    cal.validate();
    nlohmann::json j;
    j["pixel_scale_nm"] = cal.pixel_scale_nm;
    j["source"] = cal.source;
    write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace pillarmetry
