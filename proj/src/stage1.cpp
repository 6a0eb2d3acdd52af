#include "curvematch/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <nlohmann/json.hpp>

#include "curvematch/error.hpp"
#include "curvematch/fft.hpp"

namespace curvematch {

void MatchConfig::validate() const {
    if (k < 1) throw argument_error("MatchConfig.k must be >= 1");
    if (theta_stride < 1 || theta_stride > 360 || 360 % theta_stride != 0)
        throw argument_error("MatchConfig.theta_stride must divide 360");
}

PoseGrid valid_poses(const BinaryImage& design, const SherdTemplate& tmpl, int /*theta_deg*/) {
    return pose_grid(design.width, design.height, tmpl.curve.width, tmpl.curve.height);
}

// ---------------------------------------------------------------------------
// direct plane (serial reference)
// ---------------------------------------------------------------------------

std::vector<std::int32_t> cost_plane_direct(const BinaryImage& design, const SherdTemplate& tmpl,
                                            int theta_deg) {
    const PoseGrid grid = valid_poses(design, tmpl, theta_deg);
    const BinaryImage rc = rotate(tmpl.curve, theta_deg);
    const BinaryImage rm = rotate(tmpl.mask, theta_deg);
    const int ax = canvas_anchor(rm.width);
    const int ay = canvas_anchor(rm.height);

    std::vector<std::int32_t> plane(grid.cell_count(), 0);
    for (int iy = 0; iy < grid.ny; ++iy) {
        const int y = grid.y_min + iy;
        for (int ix = 0; ix < grid.nx; ++ix) {
            const int x = grid.x_min + ix;
            std::int32_t phi = 0;
            for (int v = 0; v < rm.height; ++v) {
                const int dy = y + v - ay;
                for (int u = 0; u < rm.width; ++u) {
                    if (!rm.at(u, v)) continue;
                    const std::uint8_t t = rc.at(u, v);
                    const std::uint8_t d = design.at_or_zero(x + u - ax, dy);
                    phi += (t != d);
                }
            }
            plane[static_cast<std::size_t>(iy) * grid.nx + ix] = phi;
        }
    }
    return plane;
}

// ---------------------------------------------------------------------------
// FFT plane
//
// phi(c) = A + B(c) - 2 C(c) with A = |rotated curve|,
// B = corr(rotated mask, design), C = corr(rotated curve, design).
// Both correlations come out of a single packed transform pair:
// mask in the real part, curve in the imaginary part.
// ---------------------------------------------------------------------------

namespace {

using cplx = std::complex<double>;

// FFT of the design embedded at the origin of a Px x Py grid, cached per
// padded size so theta slices (and sherds of the same size class) share it.
class DesignSpectrumCache {
public:
    explicit DesignSpectrumCache(const BinaryImage& design) : design_(design) {}

    const std::vector<cplx>& get(int px, int py) {
        auto& slot = spectra_[{px, py}];
        if (slot.empty()) {
            slot.assign(static_cast<std::size_t>(px) * py, cplx{});
            for (int y = 0; y < design_.height; ++y)
                for (int x = 0; x < design_.width; ++x)
                    if (design_.at(x, y)) slot[static_cast<std::size_t>(y) * px + x] = 1.0;
            fft::transform_2d(slot, px, py, false);
        }
        return slot;
    }

private:
    const BinaryImage& design_;
    std::map<std::pair<int, int>, std::vector<cplx>> spectra_;
};

std::vector<std::int32_t> fft_plane(const BinaryImage& design, const SherdTemplate& tmpl,
                                    int theta_deg, DesignSpectrumCache& cache) {
    const PoseGrid grid = pose_grid(design.width, design.height, tmpl.curve.width,
                                    tmpl.curve.height);
    const BinaryImage rc = rotate(tmpl.curve, theta_deg);
    const BinaryImage rm = rotate(tmpl.mask, theta_deg);
    const int rw = rm.width, rh = rm.height;
    const int ax = canvas_anchor(rw);
    const int ay = canvas_anchor(rh);
    const double a_term = static_cast<double>(rc.foreground_count());

    const int px = fft::next_pow2(design.width + rw - 1);
    const int py = fft::next_pow2(design.height + rh - 1);
    const std::size_t cells = static_cast<std::size_t>(px) * py;
    const std::vector<cplx>& fd = cache.get(px, py);

    // packed kernels: z = mask + i*curve
    std::vector<cplx> z(cells, cplx{});
    for (int v = 0; v < rh; ++v)
        for (int u = 0; u < rw; ++u)
            if (rm.at(u, v))
                z[static_cast<std::size_t>(v) * px + u] = cplx(1.0, rc.at(u, v) ? 1.0 : 0.0);
    fft::transform_2d(z, px, py, false);

    // S = conj(F_mask)*FD + i * conj(F_curve)*FD, separated via Hermitian
    // symmetry of the packed transform
    std::vector<cplx> s(cells);
    for (int fy = 0; fy < py; ++fy) {
        const int gy = (py - fy) % py;
        for (int fx = 0; fx < px; ++fx) {
            const int gx = (px - fx) % px;
            const cplx zf = z[static_cast<std::size_t>(fy) * px + fx];
            const cplx zr = std::conj(z[static_cast<std::size_t>(gy) * px + gx]);
            const cplx fm = 0.5 * (zf + zr);
            const cplx fc = cplx(0.0, -0.5) * (zf - zr);
            const cplx d = fd[static_cast<std::size_t>(fy) * px + fx];
            s[static_cast<std::size_t>(fy) * px + fx] =
                std::conj(fm) * d + cplx(0.0, 1.0) * (std::conj(fc) * d);
        }
    }
    fft::transform_2d(s, px, py, true);

    // correlation support per axis: shift n in [-(kernel-1), design-1]
    std::vector<std::int32_t> plane(grid.cell_count(), 0);
    for (int iy = 0; iy < grid.ny; ++iy) {
        const int ny = grid.y_min + iy - ay;
        const bool y_in = ny >= -(rh - 1) && ny <= design.height - 1;
        const int wy = ((ny % py) + py) % py;
        for (int ix = 0; ix < grid.nx; ++ix) {
            const int nx = grid.x_min + ix - ax;
            double b = 0.0, c = 0.0;
            if (y_in && nx >= -(rw - 1) && nx <= design.width - 1) {
                const int wx = ((nx % px) + px) % px;
                const cplx w = s[static_cast<std::size_t>(wy) * px + wx];
                b = w.real();
                c = w.imag();
            }
            const auto phi = std::llround(a_term + b - 2.0 * c);
            plane[static_cast<std::size_t>(iy) * grid.nx + ix] =
                static_cast<std::int32_t>(std::max<std::int64_t>(phi, 0));
        }
    }
    return plane;
}

}  // namespace

std::vector<std::int32_t> cost_plane_fft(const BinaryImage& design, const SherdTemplate& tmpl,
                                         int theta_deg) {
    DesignSpectrumCache cache(design);
    return fft_plane(design, tmpl, theta_deg, cache);
}

CostVolume build_cost_volume(const BinaryImage& design, const SherdTemplate& tmpl,
                             const MatchConfig& config, const std::string& design_id) {
    config.validate();
    tmpl.validate();
    CostVolume vol;
    vol.design_id = design_id;
    vol.theta_stride = config.theta_stride;
    vol.grid = pose_grid(design.width, design.height, tmpl.curve.width, tmpl.curve.height);
    if (vol.grid.empty())
        throw argument_error("template exceeds design: empty pose grid for design " + design_id);

    DesignSpectrumCache cache(design);
    const int slices = config.slice_count();
    vol.slices.reserve(slices);
    for (int t = 0; t < slices; ++t)
        vol.slices.push_back(fft_plane(design, tmpl, t * config.theta_stride, cache));
    return vol;
}

// ---------------------------------------------------------------------------
// non-minimum suppression
// ---------------------------------------------------------------------------

namespace {

// minima of `cur` given its wrapped theta neighbors
void minima_in_window(const std::vector<std::int32_t>& prev, const std::vector<std::int32_t>& cur,
                      const std::vector<std::int32_t>& next, const PoseGrid& grid, int theta_deg,
                      std::vector<Minimum>& out) {
    const std::vector<std::int32_t>* win[3] = {&prev, &cur, &next};
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const std::int32_t v = cur[static_cast<std::size_t>(iy) * grid.nx + ix];
            bool is_min = true;
            for (int w = 0; w < 3 && is_min; ++w) {
                const auto& slice = *win[w];
                for (int dy = -1; dy <= 1 && is_min; ++dy) {
                    const int jy = iy + dy;
                    if (jy < 0 || jy >= grid.ny) continue;  // +inf padding
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (w == 1 && dy == 0 && dx == 0) continue;
                        const int jx = ix + dx;
                        if (jx < 0 || jx >= grid.nx) continue;
                        if (slice[static_cast<std::size_t>(jy) * grid.nx + jx] < v) {
                            is_min = false;
                            break;
                        }
                    }
                }
            }
            if (is_min)
                out.push_back({Pose{grid.x_min + ix, grid.y_min + iy, theta_deg}, v});
        }
    }
}

}  // namespace

std::vector<Minimum> nms_local_minima(const CostVolume& volume) {
    std::vector<Minimum> out;
    const int slices = static_cast<int>(volume.slices.size());
    for (int t = 0; t < slices; ++t) {
        const auto& prev = volume.slices[(t + slices - 1) % slices];
        const auto& next = volume.slices[(t + 1) % slices];
        minima_in_window(prev, volume.slices[t], next, volume.grid, t * volume.theta_stride, out);
    }
    return out;
}

std::vector<Candidate> select_candidates(const std::vector<Minimum>& minima,
                                         const MatchConfig& config,
                                         const std::string& design_id) {
    config.validate();
    std::vector<Minimum> sorted = minima;
    std::sort(sorted.begin(), sorted.end(), [](const Minimum& a, const Minimum& b) {
        return std::tie(a.phi, a.pose.theta, a.pose.y, a.pose.x) <
               std::tie(b.phi, b.pose.theta, b.pose.y, b.pose.x);
    });

    const int slices = config.slice_count();
    auto adjacent = [&](const Pose& a, const Pose& b) {
        if (std::abs(a.x - b.x) > 1 || std::abs(a.y - b.y) > 1) return false;
        const int ta = a.theta / config.theta_stride;
        const int tb = b.theta / config.theta_stride;
        const int d = std::abs(ta - tb);
        return std::min(d, slices - d) <= 1;
    };

    std::vector<Candidate> out;
    for (const auto& m : sorted) {
        bool suppressed = false;
        for (const auto& c : out) {
            if (adjacent(m.pose, c.pose)) {
                suppressed = true;
                break;
            }
        }
        if (suppressed) continue;
        out.push_back(Candidate{design_id, m.pose, m.phi, std::nullopt});
        if (static_cast<int>(out.size()) == config.k) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// per-design search with streaming NMS
// ---------------------------------------------------------------------------

namespace {

std::vector<Minimum> streaming_minima(const BinaryImage& design, const SherdTemplate& tmpl,
                                      const MatchConfig& config) {
    const PoseGrid grid = pose_grid(design.width, design.height, tmpl.curve.width,
                                    tmpl.curve.height);
    const int slices = config.slice_count();  // >= 5 on this path
    DesignSpectrumCache cache(design);
    auto plane = [&](int t) { return fft_plane(design, tmpl, t * config.theta_stride, cache); };

    std::vector<std::vector<Minimum>> per_slice(slices);

    std::vector<std::int32_t> first0 = plane(0);
    std::vector<std::int32_t> first1 = plane(1);
    std::vector<std::int32_t> prev = first0;
    std::vector<std::int32_t> cur = first1;
    for (int t = 1; t + 1 < slices; ++t) {
        std::vector<std::int32_t> next = plane(t + 1);
        minima_in_window(prev, cur, next, grid, t * config.theta_stride, per_slice[t]);
        prev = std::move(cur);
        cur = std::move(next);
    }
    // wraparound slices: prev = T-2, cur = T-1
    minima_in_window(prev, cur, first0, grid, (slices - 1) * config.theta_stride,
                     per_slice[slices - 1]);
    minima_in_window(cur, first0, first1, grid, 0, per_slice[0]);

    std::vector<Minimum> out;
    for (auto& s : per_slice)
        out.insert(out.end(), s.begin(), s.end());
    return out;
}

}  // namespace

std::vector<Candidate> match_design(const Design& design, const SherdTemplate& tmpl,
                                    const MatchConfig& config) {
    config.validate();
    tmpl.validate();
    const PoseGrid grid = pose_grid(design.image.width, design.image.height, tmpl.curve.width,
                                    tmpl.curve.height);
    if (grid.empty())
        throw argument_error("template exceeds design: empty pose grid for design " + design.id);

    const std::size_t cells = grid.cell_count() * static_cast<std::size_t>(config.slice_count());
    std::vector<Minimum> minima;
    if (config.slice_count() <= 4 || cells <= config.materialize_threshold) {
        const CostVolume vol = build_cost_volume(design.image, tmpl, config, design.id);
        minima = nms_local_minima(vol);
    } else {
        minima = streaming_minima(design.image, tmpl, config);
    }
    return select_candidates(minima, config, design.id);
}

std::vector<Candidate> match_catalog(const std::vector<Design>& catalog,
                                     const SherdTemplate& tmpl, const MatchConfig& config) {
    config.validate();
    tmpl.validate();
    if (catalog.empty()) throw argument_error("catalog is empty");

    std::vector<std::size_t> order(catalog.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return catalog[a].id < catalog[b].id; });

    const auto n = static_cast<std::int64_t>(order.size());
    std::vector<std::vector<Candidate>> results(order.size());
    std::vector<std::string> errors(order.size());

    int num_threads = config.threads;
#ifdef _OPENMP
    if (num_threads <= 0) num_threads = omp_get_max_threads();
#else
    num_threads = 1;
#endif
#pragma omp parallel for schedule(dynamic) num_threads(num_threads) if (num_threads > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        const Design& d = catalog[order[i]];
        try {
            results[i] = match_design(d, tmpl, config);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    for (std::size_t i = 0; i < order.size(); ++i)
        if (!errors[i].empty())
            throw argument_error("design " + catalog[order[i]].id + ": " + errors[i]);

    std::vector<Candidate> out;
    for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
    return out;
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

std::string candidates_to_json(const std::vector<Candidate>& candidates) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : candidates) {
        nlohmann::json o = {{"design_id", c.design_id}, {"x", c.pose.x},     {"y", c.pose.y},
                            {"theta", c.pose.theta},    {"phi", c.phi}};
        if (c.psi_bar) o["psi_bar"] = *c.psi_bar;
        arr.push_back(std::move(o));
    }
    return arr.dump(2) + "\n";
}

std::vector<Candidate> candidates_from_json(const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("candidate JSON: ") + e.what());
    }
    if (!arr.is_array()) throw format_error("candidate JSON: expected an array");
    std::vector<Candidate> out;
    for (const auto& o : arr) {
        Candidate c;
        try {
            c.design_id = o.at("design_id").get<std::string>();
            c.pose.x = o.at("x").get<int>();
            c.pose.y = o.at("y").get<int>();
            c.pose.theta = o.at("theta").get<int>();
            c.phi = o.at("phi").get<std::int64_t>();
            if (o.contains("psi_bar")) c.psi_bar = o.at("psi_bar").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw format_error(std::string("candidate JSON: ") + e.what());
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace curvematch
