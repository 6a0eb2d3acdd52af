#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "curvematch/error.hpp"
#include "curvematch/image.hpp"
#include "curvematch/rng.hpp"
#include "oracles.hpp"

using namespace curvematch;

namespace {

BinaryImage from_rows(const std::vector<std::vector<int>>& rows) {
    BinaryImage img(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) img.at(x, y) = rows[y][x] ? 1 : 0;
    return img;
}

bool all_binary(const BinaryImage& img) {
    for (const auto p : img.pixels)
        if (p != 0 && p != 1) return false;
    return true;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("pgm parse P5 binary") {
    const std::vector<std::uint8_t> bytes = {'P', '5', '\n', '2', ' ', '2', '\n',
                                             '2', '5', '5', '\n', 0, 255, 255, 0};
    const BinaryImage img = parse_pgm(bytes, "mem");
    CHECK(img == from_rows({{0, 1}, {1, 0}}));
}

TEST_CASE("pgm parse P2 ascii") {
    const std::string text = "P2 1 1 255 200";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    const BinaryImage img = parse_pgm(bytes, "mem");
    CHECK(img == from_rows({{1}}));
}

TEST_CASE("pgm rejects unsupported magic") {
    const std::string text = "P6 1 1 255 xxx";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    CHECK_THROWS_AS(parse_pgm(bytes, "mem"), format_error);
}

TEST_CASE("pgm rejects truncated payload and reports offset") {
    const std::string text = "P5\n4 4\n255\nab";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    try {
        parse_pgm(bytes, "mem");
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("pgm accepts comment lines in the header") {
    const std::string text = "P2\n# generated\n2 1\n255\n255 0";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    CHECK(parse_pgm(bytes, "mem") == from_rows({{1, 0}}));
}

TEST_CASE("pgm encode payload bytes") {
    const auto bytes = encode_pgm(from_rows({{0, 1}}));
    REQUIRE(bytes.size() >= 2);
    CHECK(bytes[bytes.size() - 2] == 0);
    CHECK(bytes[bytes.size() - 1] == 255);
}

TEST_CASE("pgm round-trip is bit-exact") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const int w = static_cast<int>(rng.uniform_int(1, 40));
        const int h = static_cast<int>(rng.uniform_int(1, 40));
        const BinaryImage img = oracle::random_image(rng, w, h);
        const auto path = temp_path("cm_roundtrip.pgm");
        save_pgm(img, path);
        CHECK(load_pgm(path) == img);
        std::remove(path.c_str());
    }
}

TEST_CASE("degenerate image cannot be constructed or encoded") {
    CHECK_THROWS_AS(BinaryImage(0, 0), argument_error);
    CHECK_THROWS_AS(encode_pgm(BinaryImage{}), argument_error);
}

TEST_CASE("rotate identity and quarter turns") {
    Rng rng(12);
    const BinaryImage img = oracle::random_image(rng, 13, 9);
    CHECK(rotate(img, 0) == img);
    CHECK(rotate(img, 360) == img);
    CHECK(rotate(img, -720) == img);

    const BinaryImage r90 = rotate(img, 90);
    CHECK(r90.width == img.height);
    CHECK(r90.height == img.width);
    CHECK(rotate(r90, 270) == img);

    // full turn by quarter steps
    BinaryImage cur = img;
    for (int i = 0; i < 4; ++i) cur = rotate(cur, 90);
    CHECK(cur == img);
}

TEST_CASE("rotate matches the inverse-map reference") {
    Rng rng(13);
    for (const double theta : {37.0, 123.0, 305.5}) {
        const BinaryImage img = oracle::random_image(rng, 31, 17);
        const BinaryImage got = rotate(img, theta);
        const BinaryImage want = oracle::rotate_reference(img, theta);
        REQUIRE(got.width == want.width);
        REQUIRE(got.height == want.height);
        CHECK(got == want);
        CHECK(all_binary(got));
    }
}

TEST_CASE("flip definition and involution") {
    const BinaryImage img = from_rows({{1, 0}});
    CHECK(flip(img, FlipMode::Horizontal) == from_rows({{0, 1}}));
    CHECK(flip(img, FlipMode::None) == img);

    Rng rng(14);
    const BinaryImage rnd = oracle::random_image(rng, 15, 8);
    CHECK(flip(flip(rnd, FlipMode::Horizontal), FlipMode::Horizontal) == rnd);
    CHECK(flip(flip(rnd, FlipMode::Vertical), FlipMode::Vertical) == rnd);
}

TEST_CASE("fisheye identity, fixed center, and reference equality") {
    Rng rng(15);
    const BinaryImage img = oracle::random_image(rng, 33, 33);
    CHECK(fisheye(img, 1.0) == img);

    for (const double e : {0.7, 1.25, 1.5}) {
        const BinaryImage out = fisheye(img, e);
        CHECK(out.at(16, 16) == img.at(16, 16));  // center ray is fixed
        CHECK(out == oracle::fisheye_reference(img, e));
    }
    CHECK_THROWS_AS(fisheye(img, 0.0), argument_error);
    CHECK_THROWS_AS(fisheye(img, -2.0), argument_error);
}

TEST_CASE("resize identity, replication, and reference equality") {
    Rng rng(16);
    const BinaryImage img = oracle::random_image(rng, 13, 7);
    CHECK(resize_nearest(img, 13, 7) == img);

    const BinaryImage ones = from_rows({{1}});
    const BinaryImage up = resize_nearest(ones, 3, 3);
    CHECK(up.foreground_count() == 9);

    const BinaryImage up4 = resize_nearest(img, 52, 28);
    CHECK(resize_nearest(up4, 13, 7) == img);
    CHECK(up4 == oracle::resize_reference(img, 52, 28));
}

TEST_CASE("pose grid matches the enumeration rule") {
    // 10x10 design, 3x3 template: R = 3, (10 + 2R - 2)^2 centers
    const PoseGrid g = pose_grid(10, 10, 3, 3);
    CHECK(g.pad == 3);
    CHECK(g.nx == 14);
    CHECK(g.ny == 14);

    // enumeration straight from the documented fit rule
    const int R = g.pad;
    const int ax = (3 - 1) / 2;
    int count = 0, lo = 1000, hi = -1000;
    for (int x = -50; x <= 50; ++x) {
        if (x - ax >= -R && x - ax + 3 - 1 <= 10 - 1 + R) {
            ++count;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    CHECK(count == g.nx);
    CHECK(lo == g.x_min);
    CHECK(hi == g.x_min + g.nx - 1);
}

TEST_CASE("crop_patch basics") {
    Rng rng(17);
    SherdTemplate tmpl;
    tmpl.mask = BinaryImage(5, 5, 1);
    tmpl.curve = oracle::random_image(rng, 5, 5);
    for (int i = 0; i < 25; ++i) tmpl.curve.pixels[i] &= tmpl.mask.pixels[i];

    const BinaryImage zeros(16, 16, 0);
    const BinaryImage patch = crop_patch(zeros, Pose{8, 8, 0}, tmpl);
    CHECK(patch.foreground_count() == 0);

    const BinaryImage ones(16, 16, 1);
    const BinaryImage full = crop_patch(ones, Pose{8, 8, 0}, tmpl);
    CHECK(full.foreground_count() == 25);

    CHECK_THROWS_AS(crop_patch(zeros, Pose{500, 8, 0}, tmpl), argument_error);
}

TEST_CASE("template invariants are enforced") {
    SherdTemplate bad;
    bad.curve = from_rows({{1, 0}});
    bad.mask = from_rows({{0, 0}});
    CHECK_THROWS_AS(bad.validate(), argument_error);

    SherdTemplate empty;
    empty.curve = from_rows({{0, 0}});
    empty.mask = from_rows({{0, 0}});
    CHECK_THROWS_AS(empty.validate(), argument_error);

    SherdTemplate mismatched;
    mismatched.curve = from_rows({{0}});
    mismatched.mask = from_rows({{1, 1}});
    CHECK_THROWS_AS(mismatched.validate(), argument_error);
}

TEST_CASE("transforms preserve binarity") {
    Rng rng(18);
    for (int i = 0; i < 10; ++i) {
        const BinaryImage img = oracle::random_image(rng, 21, 15);
        CHECK(all_binary(rotate(img, rng.uniform(0, 360))));
        CHECK(all_binary(fisheye(img, rng.uniform(0.5, 2.0))));
        CHECK(all_binary(resize_nearest(img, 9, 30)));
    }
}
