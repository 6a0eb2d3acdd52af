#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "curvematch/error.hpp"
#include "curvematch/stage1.hpp"
#include "oracles.hpp"

using namespace curvematch;

namespace {

SherdTemplate random_template(Rng& rng, int w, int h, double mask_density = 0.7) {
    SherdTemplate t;
    t.mask = BinaryImage(w, h);
    t.curve = BinaryImage(w, h);
    for (int i = 0; i < w * h; ++i) {
        t.mask.pixels[i] = rng.bernoulli(mask_density) ? 1 : 0;
        t.curve.pixels[i] = t.mask.pixels[i] && rng.bernoulli(0.5) ? 1 : 0;
    }
    if (t.mask.foreground_count() == 0) t.mask.pixels[0] = 1;
    return t;
}

CostVolume random_volume(Rng& rng, int nx, int ny, int slices, int stride,
                         std::int32_t max_phi = 50) {
    CostVolume vol;
    vol.design_id = "rand";
    vol.theta_stride = stride;
    vol.grid = PoseGrid{0, 0, nx, ny, 0};
    vol.slices.resize(slices);
    for (auto& s : vol.slices) {
        s.resize(static_cast<std::size_t>(nx) * ny);
        for (auto& v : s) v = static_cast<std::int32_t>(rng.uniform_int(0, max_phi));
    }
    return vol;
}

}  // namespace

TEST_CASE("direct plane: template equal to a design patch scores zero") {
    Rng rng(21);
    const BinaryImage design = oracle::random_image(rng, 24, 24);
    SherdTemplate tmpl;
    tmpl.mask = BinaryImage(6, 6, 1);
    tmpl.curve = BinaryImage(6, 6);
    // cut the template straight out of the design at (10, 9)
    const Pose truth{10, 9, 0};
    const int ax = canvas_anchor(6), ay = canvas_anchor(6);
    for (int v = 0; v < 6; ++v)
        for (int u = 0; u < 6; ++u)
            tmpl.curve.at(u, v) = design.at(truth.x + u - ax, truth.y + v - ay);

    const PoseGrid grid = valid_poses(design, tmpl, 0);
    const auto plane = cost_plane_direct(design, tmpl, 0);
    const int ix = truth.x - grid.x_min, iy = truth.y - grid.y_min;
    CHECK(plane[static_cast<std::size_t>(iy) * grid.nx + ix] == 0);
}

TEST_CASE("direct plane: hand-checked Hamming examples") {
    // 2x2 design region [[1,1],[0,1]] against template [[1,0],[0,1]]
    BinaryImage design(2, 2);
    design.at(0, 0) = 1;
    design.at(1, 0) = 1;
    design.at(1, 1) = 1;
    SherdTemplate tmpl;
    tmpl.mask = BinaryImage(2, 2, 1);
    tmpl.curve = BinaryImage(2, 2);
    tmpl.curve.at(0, 0) = 1;
    tmpl.curve.at(1, 1) = 1;

    const PoseGrid grid = valid_poses(design, tmpl, 0);
    const auto plane = cost_plane_direct(design, tmpl, 0);
    // center (0,0): template anchor (0,0) -> canvas covers the whole design
    const int ix = 0 - grid.x_min, iy = 0 - grid.y_min;
    CHECK(plane[static_cast<std::size_t>(iy) * grid.nx + ix] == 1);

    // all-zero template curve against the same design: phi = foreground count
    SherdTemplate zero = tmpl;
    zero.curve = BinaryImage(2, 2);
    const auto plane0 = cost_plane_direct(design, zero, 0);
    CHECK(plane0[static_cast<std::size_t>(iy) * grid.nx + ix] == 3);
}

TEST_CASE("fft plane equals direct plane exactly") {
    Rng rng(22);
    for (int rep = 0; rep < 6; ++rep) {
        const int dw = static_cast<int>(rng.uniform_int(16, 32));
        const int dh = static_cast<int>(rng.uniform_int(16, 32));
        const int tw = static_cast<int>(rng.uniform_int(4, 9));
        const int th = static_cast<int>(rng.uniform_int(4, 9));
        const BinaryImage design = oracle::random_image(rng, dw, dh);
        const SherdTemplate tmpl = random_template(rng, tw, th, 0.5);
        for (int theta = 0; theta < 360; theta += 45) {
            const auto direct = cost_plane_direct(design, tmpl, theta);
            const auto fast = cost_plane_fft(design, tmpl, theta);
            REQUIRE(direct.size() == fast.size());
            CHECK(direct == fast);
        }
    }
}

TEST_CASE("fft plane degenerate cases") {
    Rng rng(23);
    const SherdTemplate tmpl = random_template(rng, 5, 5, 0.8);
    const auto a_term = rotate(tmpl.curve, 30).foreground_count();

    const BinaryImage zeros(20, 20, 0);
    const auto plane = cost_plane_fft(zeros, tmpl, 30);
    for (const auto v : plane) CHECK(v == a_term);

    // full-ones design and template: zero at fully interior centers
    SherdTemplate ones;
    ones.curve = BinaryImage(5, 5, 1);
    ones.mask = BinaryImage(5, 5, 1);
    const BinaryImage design(20, 20, 1);
    const PoseGrid grid = valid_poses(design, ones, 0);
    const auto plane1 = cost_plane_fft(design, ones, 0);
    const int ix = 10 - grid.x_min, iy = 10 - grid.y_min;
    CHECK(plane1[static_cast<std::size_t>(iy) * grid.nx + ix] == 0);
}

TEST_CASE("build_cost_volume slice count and zero minimum at exact crop") {
    Rng rng(24);
    const BinaryImage design = oracle::random_image(rng, 24, 24);
    SherdTemplate tmpl;
    tmpl.mask = BinaryImage(5, 5, 1);
    tmpl.curve = BinaryImage(5, 5);
    const Pose truth{12, 11, 0};
    for (int v = 0; v < 5; ++v)
        for (int u = 0; u < 5; ++u)
            tmpl.curve.at(u, v) = design.at(truth.x + u - 2, truth.y + v - 2);

    MatchConfig cfg;
    cfg.theta_stride = 90;
    const CostVolume vol = build_cost_volume(design, tmpl, cfg, "d0");
    CHECK(vol.slices.size() == 4);
    const int ix = truth.x - vol.grid.x_min, iy = truth.y - vol.grid.y_min;
    CHECK(vol.at(0, ix, iy) == 0);

    std::int32_t global_min = vol.at(0, 0, 0);
    for (const auto& s : vol.slices)
        for (const auto v : s) global_min = std::min(global_min, v);
    CHECK(global_min == 0);
}

TEST_CASE("nms matches the brute-force 26-neighbor oracle") {
    Rng rng(25);
    for (int rep = 0; rep < 12; ++rep) {
        const int nx = static_cast<int>(rng.uniform_int(3, 8));
        const int ny = static_cast<int>(rng.uniform_int(3, 8));
        const int slices = static_cast<int>(rng.uniform_int(2, 8));
        CostVolume vol = random_volume(rng, nx, ny, slices, 360 / slices, 12);
        // theta_stride must divide 360 for pose conversion; relabel
        vol.theta_stride = 360 / slices;

        const auto got = nms_local_minima(vol);
        const auto want = oracle::nms_reference(vol.slices, nx, ny);
        REQUIRE(got.size() == want.size());

        std::set<std::tuple<int, int, int>> got_set, want_set;
        for (const auto& m : got)
            got_set.insert({m.pose.theta / vol.theta_stride, m.pose.x, m.pose.y});
        for (const auto& c : want) want_set.insert({c.t, c.ix, c.iy});
        CHECK(got_set == want_set);
    }
}

TEST_CASE("nms on a constant volume returns every cell") {
    CostVolume vol;
    vol.theta_stride = 90;
    vol.grid = PoseGrid{0, 0, 4, 3, 0};
    vol.slices.assign(4, std::vector<std::int32_t>(12, 7));
    CHECK(nms_local_minima(vol).size() == 4u * 12u);
}

TEST_CASE("nms finds a unique strict minimum") {
    Rng rng(26);
    CostVolume vol = random_volume(rng, 6, 6, 4, 90, 50);
    for (auto& s : vol.slices)
        for (auto& v : s) v += 10;  // floor above zero
    vol.slices[2][3 * 6 + 4] = 0;
    const auto minima = nms_local_minima(vol);
    bool found = false;
    for (const auto& m : minima)
        if (m.phi == 0 && m.pose.theta == 180 && m.pose.x == 4 && m.pose.y == 3) found = true;
    CHECK(found);
}

TEST_CASE("select_candidates matches the greedy oracle") {
    Rng rng(27);
    for (int rep = 0; rep < 10; ++rep) {
        const int slices = 8;
        CostVolume vol = random_volume(rng, 8, 8, slices, 45, 6);
        const auto minima = nms_local_minima(vol);

        MatchConfig cfg;
        cfg.k = 3;
        cfg.theta_stride = 45;
        const auto got = select_candidates(minima, cfg, "d0");

        std::vector<oracle::VolumeCell> cells;
        for (const auto& c : oracle::nms_reference(vol.slices, 8, 8)) cells.push_back(c);
        const auto want = oracle::select_reference(cells, cfg.k, slices);

        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].pose.x == want[i].ix);
            CHECK(got[i].pose.y == want[i].iy);
            CHECK(got[i].pose.theta == want[i].t * 45);
            CHECK(got[i].phi == want[i].phi);
        }
    }
}

TEST_CASE("select_candidates keeps everything when minima are scarce") {
    MatchConfig cfg;
    cfg.k = 3;
    cfg.theta_stride = 90;
    std::vector<Minimum> minima = {{Pose{0, 0, 0}, 5}, {Pose{10, 10, 90}, 3}};
    const auto out = select_candidates(minima, cfg, "d0");
    REQUIRE(out.size() == 2);
    CHECK(out[0].phi == 3);  // sorted ascending by phi
    CHECK(out[1].phi == 5);
}

TEST_CASE("selected candidates are mutually non-adjacent") {
    Rng rng(28);
    CostVolume vol = random_volume(rng, 10, 10, 8, 45, 4);
    MatchConfig cfg;
    cfg.k = 5;
    cfg.theta_stride = 45;
    const auto got = select_candidates(nms_local_minima(vol), cfg, "d0");
    for (std::size_t i = 0; i < got.size(); ++i)
        for (std::size_t j = i + 1; j < got.size(); ++j) {
            const auto& a = got[i].pose;
            const auto& b = got[j].pose;
            const int dt = std::abs(a.theta - b.theta) / 45;
            const bool adj = std::abs(a.x - b.x) <= 1 && std::abs(a.y - b.y) <= 1 &&
                             std::min(dt, 8 - dt) <= 1;
            CHECK_FALSE(adj);
        }
}

TEST_CASE("match_design streaming path equals materialized path") {
    Rng rng(29);
    const BinaryImage design = oracle::random_image(rng, 28, 28);
    const SherdTemplate tmpl = random_template(rng, 7, 7);

    Design d{"d0", design};
    MatchConfig small;
    small.theta_stride = 30;  // 12 slices
    small.k = 3;
    small.materialize_threshold = std::size_t{1} << 30;
    const auto materialized = match_design(d, tmpl, small);

    MatchConfig streaming = small;
    streaming.materialize_threshold = 0;  // force the streaming path
    const auto streamed = match_design(d, tmpl, streaming);

    REQUIRE(materialized.size() == streamed.size());
    for (std::size_t i = 0; i < materialized.size(); ++i) {
        CHECK(materialized[i].pose == streamed[i].pose);
        CHECK(materialized[i].phi == streamed[i].phi);
    }
}

TEST_CASE("match_catalog ordering, determinism across threads") {
    Rng rng(30);
    std::vector<Design> catalog;
    for (int i = 0; i < 4; ++i)
        catalog.push_back({"d" + std::to_string(3 - i), oracle::random_image(rng, 26, 26)});
    const SherdTemplate tmpl = random_template(rng, 6, 6);

    MatchConfig cfg;
    cfg.theta_stride = 45;
    cfg.k = 2;
    cfg.threads = 1;
    const auto serial = match_catalog(catalog, tmpl, cfg);

    cfg.threads = 4;
    const auto parallel = match_catalog(catalog, tmpl, cfg);

    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].design_id == parallel[i].design_id);
        CHECK(serial[i].pose == parallel[i].pose);
        CHECK(serial[i].phi == parallel[i].phi);
    }
    // ascending design id blocks
    for (std::size_t i = 1; i < serial.size(); ++i)
        CHECK(serial[i - 1].design_id <= serial[i].design_id);
}

TEST_CASE("single design, k = 1 returns the best pose") {
    Rng rng(31);
    const BinaryImage design = oracle::random_image(rng, 24, 24);
    const SherdTemplate tmpl = random_template(rng, 6, 6);
    MatchConfig cfg;
    cfg.theta_stride = 90;
    cfg.k = 1;
    const auto out = match_catalog({{"only", design}}, tmpl, cfg);
    REQUIRE(out.size() == 1);

    // phi at the winner is the global volume minimum
    const CostVolume vol = build_cost_volume(design, tmpl, cfg, "only");
    std::int32_t global_min = vol.at(0, 0, 0);
    for (const auto& s : vol.slices)
        for (const auto v : s) global_min = std::min(global_min, v);
    CHECK(out[0].phi == global_min);
}

TEST_CASE("candidate JSON round-trip") {
    std::vector<Candidate> cands;
    cands.push_back({"d1", Pose{-3, 7, 120}, 42, std::nullopt});
    cands.push_back({"d2", Pose{0, 0, 0}, 0, 1.25});
    const auto text = candidates_to_json(cands);
    const auto back = candidates_from_json(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].design_id == "d1");
    CHECK(back[0].pose == Pose{-3, 7, 120});
    CHECK(back[0].phi == 42);
    CHECK_FALSE(back[0].psi_bar.has_value());
    CHECK(back[1].psi_bar == 1.25);

    CHECK_THROWS_AS(candidates_from_json("{"), format_error);
    CHECK_THROWS_AS(candidates_from_json("{\"a\":1}"), format_error);
}

TEST_CASE("config validation") {
    MatchConfig bad;
    bad.k = 0;
    CHECK_THROWS_AS(bad.validate(), argument_error);
    bad.k = 1;
    bad.theta_stride = 7;  // does not divide 360
    CHECK_THROWS_AS(bad.validate(), argument_error);
}
