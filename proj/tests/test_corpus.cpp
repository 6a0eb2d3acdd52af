#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "curvematch/corpus.hpp"
#include "curvematch/error.hpp"
#include "curvematch/stage1.hpp"
#include "oracles.hpp"

using namespace curvematch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cm_corpus_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("gen_design determinism, distinctness, density") {
    const auto a = gen_design(42, 128, 128, DesignStyle::Waves, 2);
    const auto b = gen_design(42, 128, 128, DesignStyle::Waves, 2);
    CHECK(a == b);

    const auto c = gen_design(43, 128, 128, DesignStyle::Waves, 2);
    CHECK(a != c);

    for (const auto style :
         {DesignStyle::Waves, DesignStyle::Arcs, DesignStyle::Lattice, DesignStyle::Mixed}) {
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            const auto img = gen_design(seed, 128, 96, style, 2);
            const double density =
                static_cast<double>(img.foreground_count()) / static_cast<double>(img.size());
            CHECK(density >= 0.05);
            CHECK(density <= 0.5);
        }
    }
}

TEST_CASE("gen_sherd: clean sherds reproduce the design patch exactly") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto design = gen_design(seed, 128, 128,
                                       seed % 2 ? DesignStyle::Arcs : DesignStyle::Lattice, 2);
        const auto g = gen_sherd(design, "d", seed * 13, 32, 44, 10, DegradationSpec::none());

        // rotated curve equals the masked design patch bit-for-bit
        const BinaryImage patch = crop_patch(design, g.record.truth_pose, g.tmpl);
        const BinaryImage rotated = rotate(g.tmpl.curve, g.record.truth_pose.theta);
        REQUIRE(rotated.width == patch.width);
        REQUIRE(rotated.height == patch.height);
        CHECK(rotated == patch);

        // hence phi at the truth pose is exactly zero
        const PoseGrid grid = valid_poses(design, g.tmpl, g.record.truth_pose.theta);
        const auto plane = cost_plane_direct(design, g.tmpl, g.record.truth_pose.theta);
        const int ix = g.record.truth_pose.x - grid.x_min;
        const int iy = g.record.truth_pose.y - grid.y_min;
        CHECK(plane[static_cast<std::size_t>(iy) * grid.nx + ix] == 0);

        // truth pose is a valid grid member
        CHECK(grid.contains(g.record.truth_pose.x, g.record.truth_pose.y));
    }
}

TEST_CASE("gen_sherd: mask fill fraction stays inside its bounding box bounds") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto design = gen_design(3, 128, 128, DesignStyle::Mixed, 2);
        const auto g = gen_sherd(design, "d", seed, 32, 44, 10, DegradationSpec::none());
        int bx0 = g.tmpl.mask.width, bx1 = -1, by0 = g.tmpl.mask.height, by1 = -1;
        std::int64_t fg = 0;
        for (int y = 0; y < g.tmpl.mask.height; ++y)
            for (int x = 0; x < g.tmpl.mask.width; ++x)
                if (g.tmpl.mask.at(x, y)) {
                    ++fg;
                    bx0 = std::min(bx0, x);
                    bx1 = std::max(bx1, x);
                    by0 = std::min(by0, y);
                    by1 = std::max(by1, y);
                }
        const double fill =
            static_cast<double>(fg) / (static_cast<double>(bx1 - bx0 + 1) * (by1 - by0 + 1));
        CHECK(fill > 0.10);
        CHECK(fill < 0.95);
    }
}

TEST_CASE("gen_sherd determinism and degradation monotonicity") {
    const auto design = gen_design(7, 160, 160, DesignStyle::Mixed, 2);

    const auto a = gen_sherd(design, "d", 999, 40, 56, 10, DegradationSpec::mild());
    const auto b = gen_sherd(design, "d", 999, 40, 56, 10, DegradationSpec::mild());
    CHECK(a.tmpl.curve == b.tmpl.curve);
    CHECK(a.tmpl.mask == b.tmpl.mask);
    CHECK(a.record.truth_pose == b.record.truth_pose);

    // mean Hamming distance clean -> degraded grows with severity
    double mild_sum = 0, heavy_sum = 0;
    int count = 0;
    for (std::uint64_t seed = 500; seed < 525; ++seed) {
        const auto clean = gen_sherd(design, "d", seed, 40, 56, 10, DegradationSpec::none());
        const auto mild = gen_sherd(design, "d", seed, 40, 56, 10, DegradationSpec::mild());
        const auto heavy = gen_sherd(design, "d", seed, 40, 56, 10, DegradationSpec::heavy());
        // same seed chain -> same pose/polygon, degradations applied on top
        REQUIRE(clean.record.truth_pose == mild.record.truth_pose);
        REQUIRE(clean.record.truth_pose == heavy.record.truth_pose);
        auto hamming = [](const BinaryImage& x, const BinaryImage& y) {
            std::int64_t acc = 0;
            for (std::size_t i = 0; i < x.pixels.size(); ++i)
                acc += x.pixels[i] != y.pixels[i];
            return static_cast<double>(acc);
        };
        mild_sum += hamming(clean.tmpl.curve, mild.tmpl.curve);
        heavy_sum += hamming(clean.tmpl.curve, heavy.tmpl.curve);
        ++count;
    }
    CHECK(count >= 20);
    CHECK(heavy_sum / count > mild_sum / count);
}

TEST_CASE("catalog generation, reload, and invariants") {
    TempDir dir;
    CatalogConfig cfg;
    cfg.designs = 3;
    cfg.sherds_per_design = 2;
    cfg.design_width = 96;
    cfg.design_height = 96;
    cfg.sherd_min = 24;
    cfg.sherd_max = 32;
    cfg.seed = 11;
    cfg.level = "mild";
    cfg.degradation = DegradationSpec::mild();

    const Manifest m = gen_catalog(cfg, dir.path.string());
    CHECK(m.designs.size() == 3);
    CHECK(m.sherds.size() == 6);

    const Manifest loaded = load_manifest(dir.path.string());
    CHECK(loaded.designs.size() == 3);
    CHECK(loaded.sherds.size() == 6);
    CHECK(loaded.config.seed == 11);

    const auto designs = load_designs(dir.path.string(), loaded);
    for (const auto& d : designs) {
        CHECK(d.image.width == 96);
        for (const auto p : d.image.pixels) CHECK((p == 0 || p == 1));
    }
    for (const auto& rec : loaded.sherds) {
        const SherdTemplate t = load_sherd(dir.path.string(), rec);  // validates invariants
        const PoseGrid grid = pose_grid(96, 96, t.curve.width, t.curve.height);
        CHECK(grid.contains(rec.truth_pose.x, rec.truth_pose.y));
    }
}

TEST_CASE("catalog regeneration is byte-identical") {
    TempDir a, b;
    CatalogConfig cfg;
    cfg.designs = 2;
    cfg.sherds_per_design = 2;
    cfg.design_width = 96;
    cfg.design_height = 96;
    cfg.sherd_min = 24;
    cfg.sherd_max = 32;
    cfg.seed = 21;

    gen_catalog(cfg, a.path.string());
    gen_catalog(cfg, b.path.string());

    for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a.path);
        std::ifstream fa(entry.path(), std::ios::binary);
        std::ifstream fb(b.path / rel, std::ios::binary);
        REQUIRE(fb.good());
        const std::string ca((std::istreambuf_iterator<char>(fa)),
                             std::istreambuf_iterator<char>());
        const std::string cb((std::istreambuf_iterator<char>(fb)),
                             std::istreambuf_iterator<char>());
        CHECK(ca == cb);
    }
}

TEST_CASE("split_train_test is disjoint, exhaustive, deterministic, stratified") {
    Manifest m;
    m.config = CatalogConfig{};
    for (int d = 0; d < 6; ++d)
        for (int s = 0; s < 10; ++s) {
            SherdRecord r;
            r.id = "s" + std::to_string(d * 10 + s);
            r.design_id = "d" + std::to_string(d);
            m.sherds.push_back(r);
        }

    const Split split = split_train_test(m, 0.5, 3);
    CHECK(split.train.size() == 30);
    CHECK(split.test.size() == 30);

    std::set<std::string> all(split.train.begin(), split.train.end());
    for (const auto& id : split.test) CHECK(all.insert(id).second);  // disjoint
    CHECK(all.size() == 60);

    const Split again = split_train_test(m, 0.5, 3);
    CHECK(split.train == again.train);
    CHECK(split.test == again.test);

    // stratification: every design contributes to both sides
    std::map<std::string, int> train_by_design;
    for (const auto& id : split.train) {
        const int idx = std::stoi(id.substr(1));
        train_by_design["d" + std::to_string(idx / 10)]++;
    }
    for (const auto& [d, n] : train_by_design) {
        CHECK(n >= 4);
        CHECK(n <= 6);
    }

    CHECK_THROWS_AS(split_train_test(m, 0.0, 1), argument_error);
    CHECK_THROWS_AS(split_train_test(m, 1.0, 1), argument_error);
}

TEST_CASE("split save/load round-trip") {
    TempDir dir;
    Split s;
    s.train = {"a", "b"};
    s.test = {"c"};
    const auto path = (dir.path / "split.json").string();
    save_split(s, path);
    const Split back = load_split(path);
    CHECK(back.train == s.train);
    CHECK(back.test == s.test);
}

TEST_CASE("manifest JSON round-trip") {
    Manifest m;
    m.config = CatalogConfig{};
    m.config.seed = 77;
    m.config.level = "heavy";
    m.config.degradation = DegradationSpec::heavy();
    DesignRecord d;
    d.id = "d000";
    d.file = "designs/d000.pgm";
    d.width = 160;
    d.height = 160;
    m.designs.push_back(d);
    SherdRecord s;
    s.id = "s0000";
    s.curve_file = "sherds/s0000_curve.pgm";
    s.mask_file = "sherds/s0000_mask.pgm";
    s.design_id = "d000";
    s.truth_pose = Pose{10, -3, 120};
    s.degradation = DegradationSpec::heavy();
    s.seed = 5;
    m.sherds.push_back(s);

    const Manifest back = manifest_from_json(manifest_to_json(m));
    CHECK(back.config.seed == 77);
    CHECK(back.designs.size() == 1);
    CHECK(back.sherds.size() == 1);
    CHECK(back.sherds[0].truth_pose == s.truth_pose);
    CHECK(back.sherds[0].degradation.speckle_rate == DegradationSpec::heavy().speckle_rate);

    CHECK_THROWS_AS(manifest_from_json("{]"), format_error);
}

TEST_CASE("degradation presets validate; bad specs are rejected") {
    DegradationSpec::none().validate();
    DegradationSpec::mild().validate();
    DegradationSpec::heavy().validate();
    CHECK(DegradationSpec::from_level("none").is_noop());
    CHECK_THROWS_AS(DegradationSpec::from_level("brutal"), argument_error);

    DegradationSpec bad;
    bad.speckle_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), argument_error);
    bad = DegradationSpec{};
    bad.fisheye_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), argument_error);
}
