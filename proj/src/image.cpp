#include "curvematch/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "curvematch/error.hpp"

namespace curvematch {

BinaryImage::BinaryImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw argument_error("BinaryImage dimensions must be >= 1");
    pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

std::int64_t BinaryImage::foreground_count() const {
    return std::accumulate(pixels.begin(), pixels.end(), std::int64_t{0});
}

void SherdTemplate::validate() const {
    if (curve.width != mask.width || curve.height != mask.height)
        throw argument_error("template curve and mask dimensions differ");
    for (std::size_t i = 0; i < curve.pixels.size(); ++i)
        if (curve.pixels[i] && !mask.pixels[i])
            throw argument_error("template curve pixel outside mask");
    if (mask.foreground_count() < 1) throw argument_error("template mask is empty");
}

// ---------------------------------------------------------------------------
// rotation geometry
// ---------------------------------------------------------------------------

namespace {

double normalize_deg(double deg) {
    double d = std::fmod(deg, 360.0);
    if (d < 0) d += 360.0;
    return d;
}

// sin/cos exact at the quarter turns so 90-degree rotations stay lossless
void sincos_deg(double deg, double& s, double& c) {
    const double d = normalize_deg(deg);
    if (d == 0.0) {
        s = 0.0;
        c = 1.0;
    } else if (d == 90.0) {
        s = 1.0;
        c = 0.0;
    } else if (d == 180.0) {
        s = 0.0;
        c = -1.0;
    } else if (d == 270.0) {
        s = -1.0;
        c = 0.0;
    } else {
        const double rad = d * (3.14159265358979323846 / 180.0);
        s = std::sin(rad);
        c = std::cos(rad);
    }
}

}  // namespace

Extent rotated_extent(int w, int h, double theta_deg) {
    double s, c;
    sincos_deg(theta_deg, s, c);
    const double hx = (w - 1) * 0.5;
    const double hy = (h - 1) * 0.5;
    // same span for the four corners by symmetry
    const double span_x = 2.0 * (std::abs(c) * hx + std::abs(s) * hy);
    const double span_y = 2.0 * (std::abs(s) * hx + std::abs(c) * hy);
    Extent e;
    e.width = static_cast<int>(std::ceil(span_x - 1e-9)) + 1;
    e.height = static_cast<int>(std::ceil(span_y - 1e-9)) + 1;
    return e;
}

std::pair<int, int> rotate_source_pixel(int ox, int oy, int in_w, int in_h, int out_w, int out_h,
                                        double theta_deg) {
    double s, c;
    sincos_deg(theta_deg, s, c);
    const double dx = ox - (out_w - 1) * 0.5;
    const double dy = oy - (out_h - 1) * 0.5;
    // inverse rotation R(-theta)
    const double sx = c * dx + s * dy + (in_w - 1) * 0.5;
    const double sy = -s * dx + c * dy + (in_h - 1) * 0.5;
    return {static_cast<int>(std::lround(sx)), static_cast<int>(std::lround(sy))};
}

int pose_padding(int tmpl_w, int tmpl_h) {
    const double diag = std::sqrt(static_cast<double>(tmpl_w) * tmpl_w +
                                  static_cast<double>(tmpl_h) * tmpl_h);
    return static_cast<int>(std::ceil(diag * 0.5 - 1e-12));
}

PoseGrid pose_grid(int design_w, int design_h, int tmpl_w, int tmpl_h) {
    PoseGrid g;
    g.pad = pose_padding(tmpl_w, tmpl_h);
    const int ax = canvas_anchor(tmpl_w);
    const int ay = canvas_anchor(tmpl_h);
    g.x_min = ax - g.pad;
    g.y_min = ay - g.pad;
    g.nx = design_w + 2 * g.pad - tmpl_w + 1;
    g.ny = design_h + 2 * g.pad - tmpl_h + 1;
    if (g.nx <= 0 || g.ny <= 0) {
        g.nx = 0;
        g.ny = 0;
    }
    return g;
}

// ---------------------------------------------------------------------------
// transforms
// ---------------------------------------------------------------------------

BinaryImage rotate(const BinaryImage& image, double theta_deg) {
    const double d = normalize_deg(theta_deg);
    if (d == 0.0) return image;

    const Extent e = rotated_extent(image.width, image.height, d);
    BinaryImage out(e.width, e.height);
    for (int oy = 0; oy < e.height; ++oy) {
        for (int ox = 0; ox < e.width; ++ox) {
            const auto [sx, sy] = rotate_source_pixel(ox, oy, image.width, image.height, e.width,
                                                      e.height, d);
            out.at(ox, oy) = image.at_or_zero(sx, sy);
        }
    }
    return out;
}

BinaryImage flip(const BinaryImage& image, FlipMode mode) {
    if (mode == FlipMode::None) return image;
    BinaryImage out(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const int sx = (mode == FlipMode::Horizontal) ? image.width - 1 - x : x;
            const int sy = (mode == FlipMode::Vertical) ? image.height - 1 - y : y;
            out.at(x, y) = image.at(sx, sy);
        }
    return out;
}

BinaryImage fisheye(const BinaryImage& image, double exponent) {
    if (!(exponent > 0.0)) throw argument_error("fisheye exponent must be > 0");
    if (exponent == 1.0) return image;

    const double cx = (image.width - 1) * 0.5;
    const double cy = (image.height - 1) * 0.5;
    const double half_diag = 0.5 * std::sqrt(static_cast<double>(image.width) * image.width +
                                             static_cast<double>(image.height) * image.height);
    BinaryImage out(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r == 0.0) {
                out.at(x, y) = image.at_or_zero(static_cast<int>(std::lround(cx)),
                                                static_cast<int>(std::lround(cy)));
                continue;
            }
            const double rn = r / half_diag;
            const double scale = std::pow(rn, exponent - 1.0);
            const int sx = static_cast<int>(std::lround(cx + dx * scale));
            const int sy = static_cast<int>(std::lround(cy + dy * scale));
            out.at(x, y) = image.at_or_zero(sx, sy);
        }
    }
    return out;
}

BinaryImage resize_nearest(const BinaryImage& image, int w, int h) {
    if (w < 1 || h < 1) throw argument_error("resize target must be >= 1x1");
    if (w == image.width && h == image.height) return image;
    BinaryImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(image.height - 1,
                                static_cast<int>((y + 0.5) * image.height / h));
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(image.width - 1,
                                    static_cast<int>((x + 0.5) * image.width / w));
            out.at(x, y) = image.at(sx, sy);
        }
    }
    return out;
}

BinaryImage crop_patch(const BinaryImage& design, const Pose& pose, const SherdTemplate& tmpl) {
    const PoseGrid grid = pose_grid(design.width, design.height, tmpl.curve.width,
                                    tmpl.curve.height);
    if (!grid.contains(pose.x, pose.y))
        throw argument_error("crop_patch pose outside the valid pose grid");
    if (pose.theta < 0 || pose.theta >= 360) throw argument_error("pose theta outside [0,360)");

    const BinaryImage rmask = rotate(tmpl.mask, pose.theta);
    const int ax = canvas_anchor(rmask.width);
    const int ay = canvas_anchor(rmask.height);
    BinaryImage out(rmask.width, rmask.height);
    for (int v = 0; v < rmask.height; ++v)
        for (int u = 0; u < rmask.width; ++u)
            if (rmask.at(u, v)) out.at(u, v) = design.at_or_zero(pose.x + u - ax, pose.y + v - ay);
    return out;
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

namespace {

struct PgmCursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    const std::string& origin;

    [[noreturn]] void fail(const std::string& what) const {
        throw format_error(origin + ": " + what + " at byte offset " + std::to_string(pos));
    }

    bool eof() const { return pos >= bytes.size(); }
    std::uint8_t peek() const { return bytes[pos]; }

    // whitespace and '#' comment lines between header tokens
    void skip_separators() {
        while (!eof()) {
            const std::uint8_t c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (std::isspace(c)) {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int(const char* name) {
        skip_separators();
        if (eof()) fail(std::string("missing ") + name);
        if (!std::isdigit(peek())) fail(std::string("expected digit for ") + name);
        long v = 0;
        while (!eof() && std::isdigit(peek())) {
            v = v * 10 + (peek() - '0');
            if (v > 1000000000L) fail(std::string(name) + " out of range");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

}  // namespace

BinaryImage parse_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    PgmCursor cur{bytes, 0, origin};
    if (bytes.size() < 2) cur.fail("truncated magic");
    const char m0 = static_cast<char>(bytes[0]);
    const char m1 = static_cast<char>(bytes[1]);
    if (m0 != 'P' || (m1 != '2' && m1 != '5')) {
        cur.pos = 0;
        cur.fail(std::string("unsupported magic \"") + m0 + m1 + "\"");
    }
    const bool binary = (m1 == '5');
    cur.pos = 2;

    const int width = cur.read_int("width");
    const int height = cur.read_int("height");
    const int maxval = cur.read_int("maxval");
    if (width < 1 || height < 1) cur.fail("dimensions must be >= 1");
    if (maxval < 1 || maxval > 255) cur.fail("maxval must be in [1,255]");

    BinaryImage img(width, height);
    const std::size_t count = img.size();

    if (binary) {
        // exactly one whitespace byte after maxval
        if (cur.eof() || !std::isspace(cur.peek())) cur.fail("missing separator after maxval");
        ++cur.pos;
        if (bytes.size() - cur.pos < count) {
            cur.pos = bytes.size();
            cur.fail("truncated pixel payload");
        }
        for (std::size_t i = 0; i < count; ++i)
            img.pixels[i] = bytes[cur.pos + i] >= 128 ? 1 : 0;
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const int v = cur.read_int("pixel");
            if (v > maxval) cur.fail("pixel value exceeds maxval");
            img.pixels[i] = v >= 128 ? 1 : 0;
        }
    }
    return img;
}

std::vector<std::uint8_t> encode_pgm(const BinaryImage& image) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
        throw argument_error("cannot encode degenerate image");
    char header[64];
    const int n = std::snprintf(header, sizeof header, "P5\n%d %d\n255\n", image.width,
                                image.height);
    std::vector<std::uint8_t> out(header, header + n);
    out.reserve(out.size() + image.size());
    for (const auto p : image.pixels) out.push_back(p ? 255 : 0);
    return out;
}

BinaryImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_pgm(bytes, path);
}

void save_pgm(const BinaryImage& image, const std::string& path) {
    const auto bytes = encode_pgm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write to " + path);
}

}  // namespace curvematch
