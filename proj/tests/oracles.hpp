#pragma once

// Independent reference implementations used only by tests. These re-derive
// results straight from the documented rules and deliberately avoid the
// library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "curvematch/image.hpp"
#include "curvematch/rng.hpp"
#include "curvematch/stage1.hpp"

namespace oracle {

using curvematch::BinaryImage;

inline BinaryImage random_image(curvematch::Rng& rng, int w, int h, double density = 0.5) {
    BinaryImage img(w, h);
    for (auto& p : img.pixels) p = rng.bernoulli(density) ? 1 : 0;
    return img;
}

// rotation: output canvas from rotated corner span, inverse nearest map
inline BinaryImage rotate_reference(const BinaryImage& in, double theta_deg) {
    double d = std::fmod(theta_deg, 360.0);
    if (d < 0) d += 360.0;
    if (d == 0.0) return in;

    double s, c;
    if (d == 90.0) {
        s = 1;
        c = 0;
    } else if (d == 180.0) {
        s = 0;
        c = -1;
    } else if (d == 270.0) {
        s = -1;
        c = 0;
    } else {
        s = std::sin(d * M_PI / 180.0);
        c = std::cos(d * M_PI / 180.0);
    }

    const double hx = (in.width - 1) / 2.0;
    const double hy = (in.height - 1) / 2.0;
    const double span_x = 2.0 * (std::fabs(c) * hx + std::fabs(s) * hy);
    const double span_y = 2.0 * (std::fabs(s) * hx + std::fabs(c) * hy);
    const int ow = static_cast<int>(std::ceil(span_x - 1e-9)) + 1;
    const int oh = static_cast<int>(std::ceil(span_y - 1e-9)) + 1;

    BinaryImage out(ow, oh);
    const double ocx = (ow - 1) / 2.0, ocy = (oh - 1) / 2.0;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const double dx = ox - ocx, dy = oy - ocy;
            const long sx = std::lround(c * dx + s * dy + hx);
            const long sy = std::lround(-s * dx + c * dy + hy);
            if (sx >= 0 && sx < in.width && sy >= 0 && sy < in.height)
                out.at(ox, oy) = in.at(static_cast<int>(sx), static_cast<int>(sy));
        }
    return out;
}

// fisheye: per-pixel radial remap, r normalized by half the diagonal
inline BinaryImage fisheye_reference(const BinaryImage& in, double e) {
    if (e == 1.0) return in;
    BinaryImage out(in.width, in.height);
    const double cx = (in.width - 1) / 2.0, cy = (in.height - 1) / 2.0;
    const double rmax = std::sqrt(static_cast<double>(in.width) * in.width +
                                  static_cast<double>(in.height) * in.height) /
                        2.0;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double r = std::sqrt(dx * dx + dy * dy);
            long sx, sy;
            if (r == 0.0) {
                sx = std::lround(cx);
                sy = std::lround(cy);
            } else {
                const double rs = std::pow(r / rmax, e) * rmax;
                sx = std::lround(cx + dx / r * rs);
                sy = std::lround(cy + dy / r * rs);
            }
            if (sx >= 0 && sx < in.width && sy >= 0 && sy < in.height)
                out.at(x, y) = in.at(static_cast<int>(sx), static_cast<int>(sy));
        }
    return out;
}

// nearest-neighbor resize by the pixel-area index map
inline BinaryImage resize_reference(const BinaryImage& in, int w, int h) {
    BinaryImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int sx = static_cast<int>(std::floor((x + 0.5) * in.width / w));
            int sy = static_cast<int>(std::floor((y + 0.5) * in.height / h));
            sx = std::min(sx, in.width - 1);
            sy = std::min(sy, in.height - 1);
            out.at(x, y) = in.at(sx, sy);
        }
    return out;
}

// brute-force 26-neighbor local minima with theta wraparound
struct VolumeCell {
    int t, ix, iy;
    std::int64_t phi;
};

inline std::vector<VolumeCell> nms_reference(const std::vector<std::vector<std::int32_t>>& slices,
                                             int nx, int ny) {
    const int T = static_cast<int>(slices.size());
    std::vector<VolumeCell> out;
    for (int t = 0; t < T; ++t)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const std::int32_t v = slices[t][iy * nx + ix];
                bool ok = true;
                for (int dt = -1; dt <= 1 && ok; ++dt)
                    for (int dy = -1; dy <= 1 && ok; ++dy)
                        for (int dx = -1; dx <= 1 && ok; ++dx) {
                            if (dt == 0 && dy == 0 && dx == 0) continue;
                            const int jt = ((t + dt) % T + T) % T;
                            const int jy = iy + dy, jx = ix + dx;
                            if (jy < 0 || jy >= ny || jx < 0 || jx >= nx) continue;
                            if (slices[jt][jy * nx + jx] < v) ok = false;
                        }
                if (ok) out.push_back({t, ix, iy, v});
            }
    return out;
}

// greedy top-K selection over the minima list per the documented tie-break
inline std::vector<VolumeCell> select_reference(std::vector<VolumeCell> minima, int k, int T) {
    std::sort(minima.begin(), minima.end(), [](const VolumeCell& a, const VolumeCell& b) {
        return std::tie(a.phi, a.t, a.iy, a.ix) < std::tie(b.phi, b.t, b.iy, b.ix);
    });
    std::vector<VolumeCell> out;
    for (const auto& m : minima) {
        bool near = false;
        for (const auto& a : out) {
            const int dt = std::abs(m.t - a.t);
            if (std::abs(m.ix - a.ix) <= 1 && std::abs(m.iy - a.iy) <= 1 &&
                std::min(dt, T - dt) <= 1) {
                near = true;
                break;
            }
        }
        if (!near) out.push_back(m);
        if (static_cast<int>(out.size()) == k) break;
    }
    return out;
}

// brute-force nearest foreground pixel distance
inline std::vector<double> distance_map_reference(const BinaryImage& img) {
    std::vector<std::pair<int, int>> fg;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.at(x, y)) fg.emplace_back(x, y);
    std::vector<double> out(img.size(), std::numeric_limits<double>::infinity());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [fx, fy] : fg) {
                const double dx = x - fx, dy = y - fy;
                best = std::min(best, dx * dx + dy * dy);
            }
            out[static_cast<std::size_t>(y) * img.width + x] = std::sqrt(best);
        }
    return out;
}

}  // namespace oracle
