#include "curvematch/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "curvematch/error.hpp"
#include "curvematch/rng.hpp"

namespace fs = std::filesystem;

namespace curvematch {

void DegradationSpec::validate() const {
    if (dropout_blobs < 0 || dropout_radius_min < 0 || dropout_radius_max < dropout_radius_min)
        throw argument_error("bad dropout spec");
    if (speckle_rate < 0.0 || speckle_rate > 1.0)
        throw argument_error("speckle_rate must be in [0,1]");
    if (!(fisheye_min > 0.0) || fisheye_max < fisheye_min)
        throw argument_error("fisheye exponent range must be positive");
    if (boundary_erode_px < 0) throw argument_error("boundary_erode_px must be >= 0");
}

bool DegradationSpec::is_noop() const {
    return dropout_blobs == 0 && speckle_rate == 0.0 && fisheye_min == 1.0 &&
           fisheye_max == 1.0 && boundary_erode_px == 0;
}

DegradationSpec DegradationSpec::none() { return {}; }

DegradationSpec DegradationSpec::mild() {
    DegradationSpec d;
    d.dropout_blobs = 2;
    d.dropout_radius_min = 2;
    d.dropout_radius_max = 4;
    d.speckle_rate = 0.02;
    d.fisheye_min = 0.95;
    d.fisheye_max = 1.05;
    d.boundary_erode_px = 1;
    return d;
}

DegradationSpec DegradationSpec::heavy() {
    DegradationSpec d;
    d.dropout_blobs = 5;
    d.dropout_radius_min = 3;
    d.dropout_radius_max = 7;
    d.speckle_rate = 0.06;
    d.fisheye_min = 0.85;
    d.fisheye_max = 1.2;
    d.boundary_erode_px = 2;
    return d;
}

DegradationSpec DegradationSpec::from_level(const std::string& level) {
    if (level == "none") return none();
    if (level == "mild") return mild();
    if (level == "heavy") return heavy();
    throw argument_error("unknown degradation level \"" + level + "\"");
}

DesignStyle design_style_from_string(const std::string& name) {
    if (name == "waves") return DesignStyle::Waves;
    if (name == "arcs") return DesignStyle::Arcs;
    if (name == "lattice") return DesignStyle::Lattice;
    if (name == "mixed") return DesignStyle::Mixed;
    throw argument_error("unknown design style \"" + name + "\"");
}

std::string to_string(DesignStyle style) {
    switch (style) {
        case DesignStyle::Waves: return "waves";
        case DesignStyle::Arcs: return "arcs";
        case DesignStyle::Lattice: return "lattice";
        case DesignStyle::Mixed: return "mixed";
    }
    return "waves";
}

void CatalogConfig::validate() const {
    if (designs < 1 || sherds_per_design < 1) throw argument_error("catalog counts must be >= 1");
    if (design_width < 64 || design_height < 64)
        throw argument_error("design dimensions must be >= 64");
    if (sherd_min < 8 || sherd_max < sherd_min) throw argument_error("bad sherd size range");
    if (stroke_px < 1) throw argument_error("stroke must be >= 1");
    if (theta_snap < 1 || 360 % theta_snap != 0)
        throw argument_error("theta_snap must divide 360");
    degradation.validate();
}

// ---------------------------------------------------------------------------
// design synthesis: closed-form curve families, stroke-thick
// ---------------------------------------------------------------------------

namespace {

double positive_fmod(double v, double m) {
    double r = std::fmod(v, m);
    if (r < 0) r += m;
    return r;
}

void render_waves(BinaryImage& img, Rng& rng, int stroke) {
    const int w = img.width, h = img.height;
    const double spacing = rng.uniform(4.5 * stroke, 8.0 * stroke);
    const double amp = rng.uniform(spacing * 0.4, spacing * 1.2);
    const double freq = rng.uniform(1.5, 4.0);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    const double tilt = rng.uniform(-0.15, 0.15);
    const double half = stroke * 0.5;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double wave = amp * std::sin(6.283185307179586 * freq * x / w + phase);
            const double u = y + tilt * x - wave;
            const double d = positive_fmod(u, spacing);
            if (d < half || spacing - d < half) img.at(x, y) = 1;
        }
}

void render_arcs(BinaryImage& img, Rng& rng, int stroke) {
    const int w = img.width, h = img.height;
    const double cx = rng.uniform(-0.4 * w, 1.4 * w);
    const double cy = rng.uniform(-0.4 * h, 1.4 * h);
    const double spacing = rng.uniform(4.5 * stroke, 9.0 * stroke);
    const double phase = rng.uniform(0.0, spacing);
    const double half = stroke * 0.5;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double r = std::hypot(x - cx, y - cy);
            const double d = positive_fmod(r - phase, spacing);
            if (d < half || spacing - d < half) img.at(x, y) = 1;
        }
}

void render_lattice(BinaryImage& img, Rng& rng, int stroke) {
    const int w = img.width, h = img.height;
    const double a1 = rng.uniform(0.0, 3.141592653589793);
    const double a2 = a1 + rng.uniform(1.0, 2.1);  // 60-120 degrees apart
    const double half = stroke * 0.5;
    for (const double a : {a1, a2}) {
        const double spacing = rng.uniform(5.0 * stroke, 9.0 * stroke);
        const double phase = rng.uniform(0.0, spacing);
        const double ca = std::cos(a), sa = std::sin(a);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double u = ca * x + sa * y;
                const double d = positive_fmod(u - phase, spacing);
                if (d < half || spacing - d < half) img.at(x, y) = 1;
            }
    }
}

BinaryImage render_design(std::uint64_t seed, int w, int h, DesignStyle style, int stroke) {
    BinaryImage img(w, h);
    Rng rng(derive_seed(seed, "design"));
    switch (style) {
        case DesignStyle::Waves: render_waves(img, rng, stroke); break;
        case DesignStyle::Arcs: render_arcs(img, rng, stroke); break;
        case DesignStyle::Lattice: render_lattice(img, rng, stroke); break;
        case DesignStyle::Mixed: {
            const int first = static_cast<int>(rng.uniform_int(0, 2));
            int second = static_cast<int>(rng.uniform_int(0, 2));
            if (second == first) second = (second + 1) % 3;
            for (const int pick : {first, second}) {
                if (pick == 0) render_waves(img, rng, stroke);
                else if (pick == 1) render_arcs(img, rng, stroke);
                else render_lattice(img, rng, stroke);
            }
            break;
        }
    }
    return img;
}

}  // namespace

BinaryImage gen_design(std::uint64_t seed, int width, int height, DesignStyle style,
                       int stroke_px) {
    if (width < 64 || height < 64) throw argument_error("design dimensions must be >= 64");
    if (stroke_px < 1) throw argument_error("stroke must be >= 1");

    std::uint64_t s = seed;
    for (int attempt = 0; attempt < 10; ++attempt) {
        BinaryImage img = render_design(s, width, height, style, stroke_px);
        const double density =
            static_cast<double>(img.foreground_count()) / static_cast<double>(img.size());
        if (density >= 0.05 && density <= 0.5) return img;
        s = splitmix64(s + attempt + 1);
    }
    throw argument_error("gen_design: density outside [0.05,0.5] after 10 retries");
}

// ---------------------------------------------------------------------------
// sherd synthesis
// ---------------------------------------------------------------------------

namespace {

// filled polygon via even-odd scanline rule
BinaryImage fill_polygon(const std::vector<std::pair<double, double>>& poly, int w, int h) {
    BinaryImage img(w, h);
    const std::size_t n = poly.size();
    for (int y = 0; y < h; ++y) {
        std::vector<double> xs;
        const double fy = y;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& [x1, y1] = poly[i];
            const auto& [x2, y2] = poly[(i + 1) % n];
            if ((y1 <= fy && y2 > fy) || (y2 <= fy && y1 > fy))
                xs.push_back(x1 + (fy - y1) / (y2 - y1) * (x2 - x1));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            const int x_lo = std::max(0, static_cast<int>(std::ceil(xs[i])));
            const int x_hi = std::min(w - 1, static_cast<int>(std::floor(xs[i + 1])));
            for (int x = x_lo; x <= x_hi; ++x) img.at(x, y) = 1;
        }
    }
    return img;
}

BinaryImage random_polygon_mask(Rng& rng, int w, int h) {
    const int nv = static_cast<int>(rng.uniform_int(5, 9));
    const double cx = (w - 1) * 0.5;
    const double cy = (h - 1) * 0.5;
    const double ax = (w - 1) * 0.5;
    const double ay = (h - 1) * 0.5;
    std::vector<std::pair<double, double>> poly;
    poly.reserve(nv);
    for (int i = 0; i < nv; ++i) {
        const double jitter = rng.uniform(-0.35, 0.35);
        const double ang = 6.283185307179586 * (i + jitter) / nv;
        const double rad = rng.uniform(0.55, 0.98);
        poly.emplace_back(cx + ax * rad * std::cos(ang), cy + ay * rad * std::sin(ang));
    }
    return fill_polygon(poly, w, h);
}

// pixels of mask within `band` steps of its boundary (4-neighborhood erosion)
BinaryImage boundary_band(const BinaryImage& mask, int band) {
    BinaryImage eroded = mask;
    for (int step = 0; step < band; ++step) {
        BinaryImage next = eroded;
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x) {
                if (!eroded.at(x, y)) continue;
                if (!eroded.at_or_zero(x - 1, y) || !eroded.at_or_zero(x + 1, y) ||
                    !eroded.at_or_zero(x, y - 1) || !eroded.at_or_zero(x, y + 1))
                    next.at(x, y) = 0;
            }
        eroded = std::move(next);
    }
    BinaryImage out(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.pixels.size(); ++i)
        out.pixels[i] = mask.pixels[i] && !eroded.pixels[i];
    return out;
}

struct PullbackResult {
    BinaryImage curve;
    BinaryImage mask;
};

// Template-canvas curve whose rotation reproduces the masked design patch
// exactly. Mask pixels whose rotated-canvas preimages disagree about the
// design value are dropped so the round trip through nearest-neighbor
// rotation stays bit-exact.
PullbackResult pull_back_curve(const BinaryImage& design, const BinaryImage& mask0,
                               const Pose& pose) {
    const int tw = mask0.width, th = mask0.height;
    const Extent re = rotated_extent(tw, th, pose.theta);
    const int ax = canvas_anchor(re.width);
    const int ay = canvas_anchor(re.height);

    // -1 unseen, 0/1 sampled value, 2 conflict
    std::vector<std::int8_t> sample(static_cast<std::size_t>(tw) * th, -1);
    for (int py = 0; py < re.height; ++py) {
        for (int px = 0; px < re.width; ++px) {
            const auto [qx, qy] =
                rotate_source_pixel(px, py, tw, th, re.width, re.height, pose.theta);
            if (qx < 0 || qx >= tw || qy < 0 || qy >= th) continue;
            const std::uint8_t value =
                design.at_or_zero(pose.x + px - ax, pose.y + py - ay);
            auto& slot = sample[static_cast<std::size_t>(qy) * tw + qx];
            if (slot == -1) slot = static_cast<std::int8_t>(value);
            else if (slot != static_cast<std::int8_t>(value)) slot = 2;
        }
    }

    PullbackResult out;
    out.curve = BinaryImage(tw, th);
    out.mask = BinaryImage(tw, th);
    for (int qy = 0; qy < th; ++qy)
        for (int qx = 0; qx < tw; ++qx) {
            if (!mask0.at(qx, qy)) continue;
            const std::int8_t s = sample[static_cast<std::size_t>(qy) * tw + qx];
            if (s == 2) continue;  // conflicting preimages: drop from the mask
            out.mask.at(qx, qy) = 1;
            if (s == 1) out.curve.at(qx, qy) = 1;
        }
    return out;
}

}  // namespace

GeneratedSherd gen_sherd(const BinaryImage& design, const std::string& design_id,
                         std::uint64_t seed, int size_min, int size_max, int theta_snap,
                         const DegradationSpec& degradation) {
    degradation.validate();
    if (size_min < 8 || size_max < size_min) throw argument_error("bad sherd size range");
    if (theta_snap < 1 || 360 % theta_snap != 0)
        throw argument_error("theta_snap must divide 360");

    Rng rng(derive_seed(seed, "sherd"));
    for (int attempt = 0; attempt < 10; ++attempt) {
        const int tw = static_cast<int>(rng.uniform_int(size_min, size_max));
        const int th = static_cast<int>(rng.uniform_int(size_min, size_max));

        const BinaryImage mask0 = random_polygon_mask(rng, tw, th);
        // mask fill fraction of its own bounding box
        int bx0 = tw, bx1 = -1, by0 = th, by1 = -1;
        std::int64_t mask_fg = 0;
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x)
                if (mask0.at(x, y)) {
                    ++mask_fg;
                    bx0 = std::min(bx0, x);
                    bx1 = std::max(bx1, x);
                    by0 = std::min(by0, y);
                    by1 = std::max(by1, y);
                }
        if (mask_fg == 0) continue;
        const double bbox_area = static_cast<double>(bx1 - bx0 + 1) * (by1 - by0 + 1);
        const double fill = static_cast<double>(mask_fg) / bbox_area;
        if (fill <= 0.10 || fill >= 0.95) continue;

        // interior placement so the sherd lands on actual pattern
        const int axc = canvas_anchor(tw);
        const int ayc = canvas_anchor(th);
        const int x_lo = axc;
        const int x_hi = design.width - 1 - (tw - 1 - axc);
        const int y_lo = ayc;
        const int y_hi = design.height - 1 - (th - 1 - ayc);
        if (x_lo > x_hi || y_lo > y_hi) throw argument_error("sherd larger than design");
        Pose pose;
        pose.x = static_cast<int>(rng.uniform_int(x_lo, x_hi));
        pose.y = static_cast<int>(rng.uniform_int(y_lo, y_hi));
        pose.theta = theta_snap * static_cast<int>(rng.uniform_int(0, 360 / theta_snap - 1));

        PullbackResult pb = pull_back_curve(design, mask0, pose);
        const auto mask_count = pb.mask.foreground_count();
        if (mask_count < 1) continue;
        // nearly blank sherds carry no signal; resample
        if (static_cast<double>(pb.curve.foreground_count()) < 0.03 * mask_count) continue;

        BinaryImage curve = pb.curve;
        BinaryImage mask = pb.mask;

        if (!degradation.is_noop()) {
            if (degradation.fisheye_min != 1.0 || degradation.fisheye_max != 1.0) {
                const double e = rng.uniform(degradation.fisheye_min, degradation.fisheye_max);
                curve = fisheye(curve, e);
                mask = fisheye(mask, e);
                if (mask.foreground_count() < 1) continue;
            }
            for (int b = 0; b < degradation.dropout_blobs; ++b) {
                const int r = static_cast<int>(rng.uniform_int(degradation.dropout_radius_min,
                                                               degradation.dropout_radius_max));
                const int cx = static_cast<int>(rng.uniform_int(0, tw - 1));
                const int cy = static_cast<int>(rng.uniform_int(0, th - 1));
                for (int y = std::max(0, cy - r); y <= std::min(th - 1, cy + r); ++y)
                    for (int x = std::max(0, cx - r); x <= std::min(tw - 1, cx + r); ++x)
                        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
                            curve.at(x, y) = 0;
            }
            if (degradation.speckle_rate > 0.0) {
                for (int y = 0; y < th; ++y)
                    for (int x = 0; x < tw; ++x)
                        if (mask.at(x, y) && rng.bernoulli(degradation.speckle_rate))
                            curve.at(x, y) ^= 1;
            }
            if (degradation.boundary_erode_px > 0) {
                const BinaryImage band = boundary_band(mask, degradation.boundary_erode_px);
                for (int y = 0; y < th; ++y)
                    for (int x = 0; x < tw; ++x)
                        if (band.at(x, y) && rng.bernoulli(0.5)) curve.at(x, y) ^= 1;
            }
        }

        GeneratedSherd out;
        out.record.design_id = design_id;
        out.record.truth_pose = pose;
        out.record.degradation = degradation;
        out.record.seed = seed;
        out.tmpl.curve = std::move(curve);
        out.tmpl.mask = std::move(mask);
        out.tmpl.validate();
        return out;
    }
    throw argument_error("gen_sherd: no acceptable sherd after 10 retries");
}

// ---------------------------------------------------------------------------
// catalog generation and persistence
// ---------------------------------------------------------------------------

namespace {

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

nlohmann::json degradation_json(const DegradationSpec& d) {
    return {{"dropout_blobs", d.dropout_blobs},
            {"dropout_radius_min", d.dropout_radius_min},
            {"dropout_radius_max", d.dropout_radius_max},
            {"speckle_rate", d.speckle_rate},
            {"fisheye_min", d.fisheye_min},
            {"fisheye_max", d.fisheye_max},
            {"boundary_erode_px", d.boundary_erode_px}};
}

DegradationSpec degradation_from(const nlohmann::json& j) {
    DegradationSpec d;
    d.dropout_blobs = j.at("dropout_blobs").get<int>();
    d.dropout_radius_min = j.at("dropout_radius_min").get<int>();
    d.dropout_radius_max = j.at("dropout_radius_max").get<int>();
    d.speckle_rate = j.at("speckle_rate").get<double>();
    d.fisheye_min = j.at("fisheye_min").get<double>();
    d.fisheye_max = j.at("fisheye_max").get<double>();
    d.boundary_erode_px = j.at("boundary_erode_px").get<int>();
    return d;
}

}  // namespace

std::string manifest_to_json(const Manifest& m) {
    nlohmann::json j;
    j["config"] = {{"designs", m.config.designs},
                   {"sherds_per_design", m.config.sherds_per_design},
                   {"design_width", m.config.design_width},
                   {"design_height", m.config.design_height},
                   {"sherd_min", m.config.sherd_min},
                   {"sherd_max", m.config.sherd_max},
                   {"stroke_px", m.config.stroke_px},
                   {"theta_snap", m.config.theta_snap},
                   {"level", m.config.level},
                   {"degradation", degradation_json(m.config.degradation)},
                   {"seed", m.config.seed}};
    nlohmann::json designs = nlohmann::json::array();
    for (const auto& d : m.designs)
        designs.push_back(
            {{"id", d.id}, {"file", d.file}, {"width", d.width}, {"height", d.height}});
    j["designs"] = designs;
    nlohmann::json sherds = nlohmann::json::array();
    for (const auto& s : m.sherds)
        sherds.push_back({{"id", s.id},
                          {"curve_file", s.curve_file},
                          {"mask_file", s.mask_file},
                          {"design_id", s.design_id},
                          {"truth_pose",
                           {{"x", s.truth_pose.x}, {"y", s.truth_pose.y},
                            {"theta", s.truth_pose.theta}}},
                          {"degradation", degradation_json(s.degradation)},
                          {"seed", s.seed}});
    j["sherds"] = sherds;
    return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("manifest JSON: ") + e.what());
    }
    Manifest m;
    try {
        const auto& c = j.at("config");
        m.config.designs = c.at("designs").get<int>();
        m.config.sherds_per_design = c.at("sherds_per_design").get<int>();
        m.config.design_width = c.at("design_width").get<int>();
        m.config.design_height = c.at("design_height").get<int>();
        m.config.sherd_min = c.at("sherd_min").get<int>();
        m.config.sherd_max = c.at("sherd_max").get<int>();
        m.config.stroke_px = c.at("stroke_px").get<int>();
        m.config.theta_snap = c.at("theta_snap").get<int>();
        m.config.level = c.at("level").get<std::string>();
        m.config.degradation = degradation_from(c.at("degradation"));
        m.config.seed = c.at("seed").get<std::uint64_t>();
        for (const auto& d : j.at("designs")) {
            DesignRecord r;
            r.id = d.at("id").get<std::string>();
            r.file = d.at("file").get<std::string>();
            r.width = d.at("width").get<int>();
            r.height = d.at("height").get<int>();
            m.designs.push_back(std::move(r));
        }
        for (const auto& s : j.at("sherds")) {
            SherdRecord r;
            r.id = s.at("id").get<std::string>();
            r.curve_file = s.at("curve_file").get<std::string>();
            r.mask_file = s.at("mask_file").get<std::string>();
            r.design_id = s.at("design_id").get<std::string>();
            r.truth_pose.x = s.at("truth_pose").at("x").get<int>();
            r.truth_pose.y = s.at("truth_pose").at("y").get<int>();
            r.truth_pose.theta = s.at("truth_pose").at("theta").get<int>();
            r.degradation = degradation_from(s.at("degradation"));
            r.seed = s.at("seed").get<std::uint64_t>();
            m.sherds.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("manifest JSON: ") + e.what());
    }
    return m;
}

Manifest gen_catalog(const CatalogConfig& config, const std::string& out_dir) {
    config.validate();

    fs::create_directories(fs::path(out_dir) / "designs");
    fs::create_directories(fs::path(out_dir) / "sherds");
    fs::create_directories(fs::path(out_dir) / "splits");

    Manifest manifest;
    manifest.config = config;

    const DesignStyle styles[4] = {DesignStyle::Waves, DesignStyle::Arcs, DesignStyle::Lattice,
                                   DesignStyle::Mixed};

    std::vector<BinaryImage> images(config.designs);
    for (int i = 0; i < config.designs; ++i) {
        const std::string id = "d" + zero_pad(i, 3);
        const auto seed = derive_seed(config.seed, "design-" + id);
        images[i] = gen_design(seed, config.design_width, config.design_height, styles[i % 4],
                               config.stroke_px);
        DesignRecord rec;
        rec.id = id;
        rec.file = "designs/" + id + ".pgm";
        rec.width = images[i].width;
        rec.height = images[i].height;
        manifest.designs.push_back(rec);
        save_pgm(images[i], (fs::path(out_dir) / rec.file).string());
    }

    struct Slot {
        SherdRecord record;
        SherdTemplate tmpl;
    };
    const int total = config.designs * config.sherds_per_design;
    std::vector<Slot> slots(static_cast<std::size_t>(total));

    // records derive their own seeds, so generation order is irrelevant
    std::vector<std::string> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic)
    for (int idx = 0; idx < total; ++idx) {
        const int di = idx / config.sherds_per_design;
        const std::string id = "s" + zero_pad(idx, 4);
        const auto seed = derive_seed(config.seed, "sherd-" + id);
        try {
            GeneratedSherd g = gen_sherd(images[di], manifest.designs[di].id, seed,
                                         config.sherd_min, config.sherd_max, config.theta_snap,
                                         config.degradation);
            g.record.id = id;
            g.record.curve_file = "sherds/" + id + "_curve.pgm";
            g.record.mask_file = "sherds/" + id + "_mask.pgm";
            slots[idx] = Slot{std::move(g.record), std::move(g.tmpl)};
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    for (int idx = 0; idx < total; ++idx)
        if (!errors[idx].empty())
            throw argument_error("sherd s" + zero_pad(idx, 4) + ": " + errors[idx]);

    for (auto& slot : slots) {
        save_pgm(slot.tmpl.curve, (fs::path(out_dir) / slot.record.curve_file).string());
        save_pgm(slot.tmpl.mask, (fs::path(out_dir) / slot.record.mask_file).string());
        manifest.sherds.push_back(slot.record);
    }

    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!mf) throw io_error("cannot write manifest.json under " + out_dir);
    mf << manifest_to_json(manifest);
    return manifest;
}

Manifest load_manifest(const std::string& catalog_dir) {
    const auto path = fs::path(catalog_dir) / "manifest.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return manifest_from_json(text);
}

std::vector<Design> load_designs(const std::string& catalog_dir, const Manifest& manifest) {
    std::vector<Design> out;
    out.reserve(manifest.designs.size());
    for (const auto& rec : manifest.designs) {
        Design d;
        d.id = rec.id;
        d.image = load_pgm((fs::path(catalog_dir) / rec.file).string());
        if (d.image.width != rec.width || d.image.height != rec.height)
            throw format_error("design " + rec.id + " dimensions disagree with manifest");
        out.push_back(std::move(d));
    }
    return out;
}

SherdTemplate load_sherd(const std::string& catalog_dir, const SherdRecord& record) {
    SherdTemplate t;
    t.curve = load_pgm((fs::path(catalog_dir) / record.curve_file).string());
    t.mask = load_pgm((fs::path(catalog_dir) / record.mask_file).string());
    t.validate();
    return t;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

Split split_train_test(const Manifest& manifest, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw argument_error("split fraction must be in (0,1)");

    std::map<std::string, std::vector<std::string>> by_design;
    for (const auto& s : manifest.sherds) by_design[s.design_id].push_back(s.id);

    const auto total = static_cast<std::int64_t>(manifest.sherds.size());
    auto target = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(total)));
    target = std::clamp<std::int64_t>(target, 1, total - 1);

    Rng rng(derive_seed(seed, "split"));
    Split split;
    std::vector<std::pair<std::string, std::vector<std::string>>> groups(by_design.begin(),
                                                                         by_design.end());
    // floor of the per-group share first, remainder round-robin in seeded order
    std::int64_t assigned = 0;
    std::vector<std::size_t> remainder_order(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) remainder_order[i] = i;
    rng.shuffle(remainder_order);

    std::vector<std::int64_t> take(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        rng.shuffle(groups[i].second);
        take[i] = static_cast<std::int64_t>(
            std::floor(fraction * static_cast<double>(groups[i].second.size())));
        take[i] = std::min<std::int64_t>(take[i], static_cast<std::int64_t>(groups[i].second.size()));
        assigned += take[i];
    }
    for (std::size_t k = 0; assigned < target && k < remainder_order.size() * 4; ++k) {
        const std::size_t gi = remainder_order[k % remainder_order.size()];
        if (take[gi] < static_cast<std::int64_t>(groups[gi].second.size())) {
            ++take[gi];
            ++assigned;
        }
    }

    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = 0; j < groups[i].second.size(); ++j) {
            if (static_cast<std::int64_t>(j) < take[i]) split.train.push_back(groups[i].second[j]);
            else split.test.push_back(groups[i].second[j]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void save_split(const Split& split, const std::string& path) {
    nlohmann::json j = {{"train", split.train}, {"test", split.test}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

Split load_split(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        const auto j = nlohmann::json::parse(text);
        Split s;
        s.train = j.at("train").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": " + e.what());
    }
}

}  // namespace curvematch
