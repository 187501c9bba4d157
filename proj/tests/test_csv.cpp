#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "pillarmetry/csv.hpp"

using namespace pillarmetry;

namespace {

MeasurementRow sample_row(int image, int component) {
    MeasurementRow r;
    r.image_id = image;
    r.component_id = component;
    r.grid_i = 2;
    r.grid_j = 4;
    r.pixel_count = 9876;
    r.area_nm2 = 2587.25;
    r.centroid_x_nm = 150.125;
    r.centroid_y_nm = 297.5;
    r.tile_id = 12;
    return r;
}

}  // namespace

TEST_CASE("measurement table round-trips") {
    std::vector<MeasurementRow> rows;
    rows.push_back(sample_row(0, 1));
    rows.push_back(sample_row(0, 2));
    MeasurementRow loose = sample_row(3, 1);
    loose.grid_i.reset();
    loose.grid_j.reset();
    loose.tile_id.reset();
    rows.push_back(loose);

    const std::string text = encode_measurement_csv(rows);
    const auto back = decode_measurement_csv(text);
    REQUIRE(back.size() == rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        CHECK(back[k].image_id == rows[k].image_id);
        CHECK(back[k].component_id == rows[k].component_id);
        CHECK(back[k].grid_i == rows[k].grid_i);
        CHECK(back[k].grid_j == rows[k].grid_j);
        CHECK(back[k].pixel_count == rows[k].pixel_count);
        CHECK(back[k].area_nm2 == rows[k].area_nm2);
        CHECK(back[k].centroid_x_nm == rows[k].centroid_x_nm);
        CHECK(back[k].centroid_y_nm == rows[k].centroid_y_nm);
        CHECK(back[k].tile_id == rows[k].tile_id);
    }
}

TEST_CASE("measurement values survive encoding exactly") {
    MeasurementRow r = sample_row(1, 1);
    r.area_nm2 = 0.1 + 0.2;  // a value with no short decimal form
    const auto back = decode_measurement_csv(encode_measurement_csv({r}));
    REQUIRE(back.size() == 1);
    CHECK(back[0].area_nm2 == r.area_nm2);
}

TEST_CASE("an empty measurement table is just the header") {
    const std::string text = encode_measurement_csv({});
    CHECK(text == std::string(kMeasurementCsvHeader) + "\n");
    CHECK(decode_measurement_csv(text).empty());
}

TEST_CASE("a wrong header is rejected up front") {
    const std::string text = "image,component\n1,2\n";
    try {
        decode_measurement_csv(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::MalformedHeader);
    }
}

TEST_CASE("ragged measurement rows carry a line number") {
    std::string text = encode_measurement_csv({sample_row(0, 1)});
    text += "1,2,3\n";
    try {
        decode_measurement_csv(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::RaggedRows);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("non-numeric measurement fields are rejected") {
    std::string text(kMeasurementCsvHeader);
    text += "\n0,1,2,4,x,2600,10,20,0\n";
    CHECK_THROWS_AS(decode_measurement_csv(text), ParseError);
}

TEST_CASE("required measurement fields cannot be blank") {
    std::string text(kMeasurementCsvHeader);
    text += "\n0,,2,4,100,2600,10,20,0\n";
    CHECK_THROWS_AS(decode_measurement_csv(text), ParseError);
}

TEST_CASE("windows line endings and trailing blank lines are tolerated") {
    std::string text = encode_measurement_csv({sample_row(0, 1), sample_row(0, 2)});
    std::string crlf;
    for (char c : text) {
        if (c == '\n') crlf += "\r\n";
        else crlf += c;
    }
    crlf += "\r\n\r\n";
    const auto back = decode_measurement_csv(crlf);
    CHECK(back.size() == 2);
}

TEST_CASE("keyed series round-trips") {
    Series s;
    s.has_keys = true;
    s.entries = {{"0_0", 68.2}, {"0_1", 67.9}, {"1_0", 68.5}};
    const auto back = decode_series_csv(encode_series_csv(s));
    REQUIRE(back.has_keys);
    REQUIRE(back.entries.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back.entries[k].key == s.entries[k].key);
        CHECK(back.entries[k].value == s.entries[k].value);
    }
}

TEST_CASE("bare value series round-trips") {
    Series s;
    s.has_keys = false;
    s.entries = {{"", 1.5}, {"", -2.25}, {"", 0.0}};
    const auto back = decode_series_csv(encode_series_csv(s));
    REQUIRE_FALSE(back.has_keys);
    REQUIRE(back.entries.size() == 3);
    CHECK(back.entries[1].value == -2.25);
}

TEST_CASE("a keyed series rejects empty keys") {
    const std::string text = "key,value\n,1.5\n";
    try {
        decode_series_csv(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::BadSchema);
    }
}

TEST_CASE("a series with an unknown header is rejected") {
    CHECK_THROWS_AS(decode_series_csv("foo,bar\n1,2\n"), ParseError);
    CHECK_THROWS_AS(decode_series_csv(""), ParseError);
}

TEST_CASE("series values must be numeric") {
    CHECK_THROWS_AS(decode_series_csv("value\nabc\n"), ParseError);
    CHECK_THROWS_AS(decode_series_csv("key,value\nk,\n"), ParseError);
}

TEST_CASE("random byte streams fail cleanly") {
    std::mt19937_64 gen(20260815ULL);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 240);
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const int n = len(gen);
        for (int k = 0; k < n; ++k) text.push_back(static_cast<char>(byte(gen)));
        try {
            (void)decode_measurement_csv(text);
        } catch (const Error&) {
            // typed failure is the contract; anything else escapes and fails the test
        }
        try {
            (void)decode_series_csv(text);
        } catch (const Error&) {
        }
    }
    SUCCEED("no untyped exceptions escaped");
}
