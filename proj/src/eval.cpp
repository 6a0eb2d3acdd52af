#include "curvematch/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "curvematch/error.hpp"
#include "curvematch/stage2.hpp"

namespace curvematch {

// ---------------------------------------------------------------------------
// CMC
// ---------------------------------------------------------------------------

CmcCurve cmc(const std::vector<std::vector<std::string>>& rankings,
             const std::vector<std::string>& truths) {
    if (rankings.empty() || rankings.size() != truths.size())
        throw argument_error("cmc: one ranking per truth required");
    const std::size_t n = rankings.front().size();

    CmcCurve curve;
    curve.values.assign(n, 0.0);
    std::vector<std::size_t> hits(n, 0);
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        if (rankings[i].size() != n) throw argument_error("cmc: ranking lengths differ");
        const auto it = std::find(rankings[i].begin(), rankings[i].end(), truths[i]);
        if (it == rankings[i].end())
            throw argument_error("cmc: truth design " + truths[i] + " absent from ranking");
        hits[static_cast<std::size_t>(it - rankings[i].begin())]++;
    }
    std::size_t acc = 0;
    for (std::size_t l = 0; l < n; ++l) {
        acc += hits[l];
        curve.values[l] = static_cast<double>(acc) / static_cast<double>(rankings.size());
    }
    return curve;
}

// ---------------------------------------------------------------------------
// rankers
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> rank_by_cost(const std::map<std::string, double>& cost_by_design) {
    std::vector<std::pair<double, std::string>> rows;
    rows.reserve(cost_by_design.size());
    for (const auto& [id, cost] : cost_by_design) rows.emplace_back(cost, id);
    std::sort(rows.begin(), rows.end());
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& [cost, id] : rows) out.push_back(id);
    return out;
}

}  // namespace

std::vector<std::string> rank_stage1(const std::vector<Candidate>& candidates) {
    std::map<std::string, double> best;
    for (const auto& c : candidates) {
        const auto it = best.find(c.design_id);
        const auto phi = static_cast<double>(c.phi);
        if (it == best.end() || phi < it->second) best[c.design_id] = phi;
    }
    return rank_by_cost(best);
}

std::vector<std::string> rank_nearest_neighbor(const SherdTemplate& tmpl,
                                               const std::vector<Design>& catalog,
                                               const std::vector<Candidate>& candidates) {
    std::map<std::string, const Design*> designs;
    for (const auto& d : catalog) designs[d.id] = &d;

    std::map<std::string, double> best;
    for (const auto& c : candidates) {
        const auto it = designs.find(c.design_id);
        if (it == designs.end()) throw argument_error("unknown design id " + c.design_id);
        const BinaryImage rc = rotate(tmpl.curve, c.pose.theta);
        const BinaryImage rm = rotate(tmpl.mask, c.pose.theta);
        const BinaryImage patch = crop_patch(it->second->image, c.pose, tmpl);
        std::int64_t cost = 0;
        for (int y = 0; y < rc.height; ++y)
            for (int x = 0; x < rc.width; ++x) {
                const int a = rm.at(x, y) ? rc.at(x, y) : 0;
                const int b = patch.at(x, y);
                cost += std::abs(a - b);
            }
        const auto cv = static_cast<double>(cost);
        const auto bit = best.find(c.design_id);
        if (bit == best.end() || cv < bit->second) best[c.design_id] = cv;
    }
    return rank_by_cost(best);
}

// ---------------------------------------------------------------------------
// Zhang-Suen thinning
// ---------------------------------------------------------------------------

Skeleton skeletonize(const BinaryImage& image) {
    BinaryImage img = image;
    const int w = img.width, h = img.height;
    auto p = [&](int x, int y) -> int { return img.at_or_zero(x, y); };

    bool changed = true;
    std::vector<std::pair<int, int>> kill;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            kill.clear();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (!img.at(x, y)) continue;
                    const int p2 = p(x, y - 1), p3 = p(x + 1, y - 1), p4 = p(x + 1, y);
                    const int p5 = p(x + 1, y + 1), p6 = p(x, y + 1), p7 = p(x - 1, y + 1);
                    const int p8 = p(x - 1, y), p9 = p(x - 1, y - 1);
                    const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    int a = 0;
                    const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    for (int i = 0; i < 8; ++i)
                        if (seq[i] == 0 && seq[i + 1] == 1) ++a;
                    if (a != 1) continue;
                    if (pass == 0) {
                        if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
                    } else {
                        if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
                    }
                    kill.emplace_back(x, y);
                }
            }
            for (const auto& [x, y] : kill) img.at(x, y) = 0;
            if (!kill.empty()) changed = true;
        }
    }

    Skeleton s;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (img.at(x, y)) s.points.emplace_back(x, y);
    return s;
}

BinaryImage skeleton_raster(const Skeleton& skeleton, int width, int height) {
    BinaryImage img(width, height);
    for (const auto& [x, y] : skeleton.points)
        if (img.in_bounds(x, y)) img.at(x, y) = 1;
    return img;
}

// ---------------------------------------------------------------------------
// exact Euclidean distance transform (Felzenszwalb & Huttenlocher)
// ---------------------------------------------------------------------------

namespace {

// large finite stand-in for +inf; keeps the parabola intersections finite
// on empty rows/columns while staying exact for every reachable cell
constexpr double kFarAway = 1e20;

void edt_1d(const std::vector<double>& f, int n, std::vector<double>& d) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n) + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int pq = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[pq] + static_cast<double>(pq) * pq)) /
                (2.0 * (q - pq));
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double diff = q - v[k];
        d[q] = diff * diff + f[v[k]];
    }
}

}  // namespace

std::vector<double> distance_map(const BinaryImage& image) {
    const int w = image.width, h = image.height;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(image.size());
    for (std::size_t i = 0; i < image.pixels.size(); ++i)
        grid[i] = image.pixels[i] ? 0.0 : inf;

    std::vector<double> col(static_cast<std::size_t>(h)), dcol(static_cast<std::size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(col, h, dcol);
        for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = dcol[y];
    }
    std::vector<double> row(static_cast<std::size_t>(w)), drow(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[x] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(row, w, drow);
        for (int x = 0; x < w; ++x)
            grid[static_cast<std::size_t>(y) * w + x] = std::sqrt(drow[x]);
    }
    return grid;
}

double chamfer_distance(const Skeleton& u, const Skeleton& v,
                        const std::vector<double>& v_distance_map, int map_width,
                        int map_height) {
    if (u.points.empty() || v.points.empty())
        throw argument_error("chamfer_distance: empty skeleton");
    if (v_distance_map.size() != static_cast<std::size_t>(map_width) * map_height)
        throw argument_error("chamfer_distance: distance map size mismatch");
    double acc = 0.0;
    for (const auto& [x, y] : u.points) {
        if (x < 0 || x >= map_width || y < 0 || y >= map_height)
            throw argument_error("chamfer_distance: point outside distance map");
        acc += v_distance_map[static_cast<std::size_t>(y) * map_width + x];
    }
    return acc / static_cast<double>(u.points.size());
}

// ---------------------------------------------------------------------------
// Chamfer baseline over the Stage-1 pose grid
// ---------------------------------------------------------------------------

std::vector<std::string> rank_chamfer(const SherdTemplate& tmpl,
                                      const std::vector<Design>& catalog,
                                      const MatchConfig& config) {
    config.validate();
    const Skeleton u = skeletonize(tmpl.curve);
    if (u.points.empty()) throw argument_error("rank_chamfer: template skeleton is empty");

    const int tw = tmpl.curve.width, th = tmpl.curve.height;
    const int slices = config.slice_count();

    // rotated template skeleton offsets per theta, relative to the canvas anchor
    std::vector<std::vector<std::pair<int, int>>> rotated(static_cast<std::size_t>(slices));
    for (int t = 0; t < slices; ++t) {
        const int theta = t * config.theta_stride;
        double s, c;
        const double rad = theta * (3.14159265358979323846 / 180.0);
        s = std::sin(rad);
        c = std::cos(rad);
        const Extent e = rotated_extent(tw, th, theta);
        const double icx = (tw - 1) * 0.5, icy = (th - 1) * 0.5;
        const double ocx = (e.width - 1) * 0.5, ocy = (e.height - 1) * 0.5;
        const int ax = canvas_anchor(e.width), ay = canvas_anchor(e.height);
        auto& pts = rotated[t];
        pts.reserve(u.points.size());
        for (const auto& [qx, qy] : u.points) {
            const double dx = qx - icx, dy = qy - icy;
            const double px = c * dx - s * dy + ocx;
            const double py = s * dx + c * dy + ocy;
            pts.emplace_back(static_cast<int>(std::lround(px)) - ax,
                             static_cast<int>(std::lround(py)) - ay);
        }
    }

    struct Row {
        double cost;
        std::string id;
    };
    std::vector<Row> rows(catalog.size());

    const auto n = static_cast<std::int64_t>(catalog.size());
#pragma omp parallel for schedule(dynamic) if (config.threads != 1)
    for (std::int64_t di = 0; di < n; ++di) {
        const Design& design = catalog[di];
        const Skeleton v = skeletonize(design.image);
        if (v.points.empty()) {
            rows[di] = {std::numeric_limits<double>::infinity(), design.id};
            continue;
        }
        const PoseGrid grid = pose_grid(design.image.width, design.image.height, tw, th);
        const int margin = 2 * grid.pad + 2;
        const int mw = design.image.width + 2 * margin;
        const int mh = design.image.height + 2 * margin;
        BinaryImage raster(mw, mh);
        for (const auto& [x, y] : v.points) raster.at(x + margin, y + margin) = 1;
        const std::vector<double> dmap = distance_map(raster);

        double best = std::numeric_limits<double>::infinity();
        for (int t = 0; t < slices; ++t) {
            const auto& pts = rotated[t];
            for (int iy = 0; iy < grid.ny; ++iy) {
                const int y0 = grid.y_min + iy + margin;
                for (int ix = 0; ix < grid.nx; ++ix) {
                    const int x0 = grid.x_min + ix + margin;
                    double acc = 0.0;
                    for (const auto& [ox, oy] : pts) {
                        const int mx = std::clamp(x0 + ox, 0, mw - 1);
                        const int my = std::clamp(y0 + oy, 0, mh - 1);
                        acc += dmap[static_cast<std::size_t>(my) * mw + mx];
                    }
                    const double cost = acc / static_cast<double>(pts.size());
                    if (cost < best) best = cost;
                }
            }
        }
        rows[di] = {best, design.id};
    }

    for (const auto& r : rows)
        if (std::isinf(r.cost))
            std::cerr << "warning: design " << r.id << " has an empty skeleton, ranked last\n";

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.id < b.id;
    });
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.id);
    return out;
}

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

namespace {

double rank1_for(const AblationInput& input, const EmbeddingNet& net, bool tta) {
    std::vector<std::vector<std::string>> rankings;
    rankings.reserve(input.sherds.size());
    for (std::size_t i = 0; i < input.sherds.size(); ++i) {
        const auto ranked = rerank(net, input.sherds[i], input.catalog, input.candidates[i], tta,
                                   input.threads);
        std::vector<std::string> ids;
        ids.reserve(ranked.size());
        for (const auto& c : ranked) ids.push_back(c.design_id);
        rankings.push_back(std::move(ids));
    }
    return cmc(rankings, input.truths).values.at(0);
}

}  // namespace

std::vector<AblationRow> run_ablations(const AblationInput& input) {
    if (input.sherds.empty() || input.sherds.size() != input.truths.size() ||
        input.sherds.size() != input.candidates.size())
        throw argument_error("run_ablations: inconsistent inputs");

    using clock = std::chrono::steady_clock;
    std::vector<AblationRow> rows;

    const auto taps = input.net.config.tappable_layers();
    for (std::size_t ci = 0; ci < taps.size(); ++ci) {
        for (const bool tta : {true, false}) {
            EmbeddingNet tapped = input.net;
            tapped.config.embed_tap = taps[ci];
            const auto t0 = clock::now();
            const double r1 = rank1_for(input, tapped, tta);
            const double secs = std::chrono::duration<double>(clock::now() - t0).count();
            rows.push_back({"conv" + std::to_string(ci + 1) + (tta ? "_tta_on" : "_tta_off"),
                            r1, secs});
        }
    }

    // Stage-1 cost of one sherd against one design, FFT vs direct sweep
    {
        const SherdTemplate& probe = input.sherds.front();
        const Design& design = input.catalog.front();
        const int slices = input.match_config.slice_count();

        const auto t0 = clock::now();
        for (int t = 0; t < slices; ++t)
            cost_plane_fft(design.image, probe, t * input.match_config.theta_stride);
        const double fft_secs = std::chrono::duration<double>(clock::now() - t0).count();

        const auto t1 = clock::now();
        for (int t = 0; t < slices; ++t)
            cost_plane_direct(design.image, probe, t * input.match_config.theta_stride);
        const double direct_secs = std::chrono::duration<double>(clock::now() - t1).count();

        rows.push_back({"stage1_fft_exhaustive", -1.0, fft_secs});
        rows.push_back({"stage1_direct_exhaustive", -1.0, direct_secs});
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "condition,rank1,seconds\n";
    char buf[128];
    for (const auto& r : rows) {
        if (r.rank1 >= 0.0)
            std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f\n", r.condition.c_str(), r.rank1,
                          r.seconds);
        else
            std::snprintf(buf, sizeof buf, "%s,,%.6f\n", r.condition.c_str(), r.seconds);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

std::string cmc_csv(const std::map<std::string, CmcCurve>& curves) {
    std::string out = "method,rank,value\n";
    char buf[160];
    for (const auto& [method, curve] : curves) {
        for (std::size_t l = 0; l < curve.values.size(); ++l) {
            std::snprintf(buf, sizeof buf, "%s,%zu,%.17g\n", method.c_str(), l + 1,
                          curve.values[l]);
            out += buf;
        }
    }
    return out;
}

std::map<std::string, CmcCurve> cmc_from_csv(const std::string& text) {
    std::map<std::string, CmcCurve> out;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == "method,rank,value") continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw format_error("CMC CSV: malformed row \"" + line + "\"");
        const std::string method = line.substr(0, c1);
        const std::size_t rank = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
        const double value = std::stod(line.substr(c2 + 1));
        auto& curve = out[method];
        if (curve.values.size() < rank) curve.values.resize(rank, 0.0);
        curve.values[rank - 1] = value;
    }
    return out;
}

std::string cmc_svg(const std::map<std::string, CmcCurve>& curves) {
    constexpr int kWidth = 640, kHeight = 480;
    constexpr int kLeft = 60, kRight = 20, kTop = 20, kBottom = 50;
    const int plot_w = kWidth - kLeft - kRight;
    const int plot_h = kHeight - kTop - kBottom;

    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::size_t n = 1;
    for (const auto& [m, c] : curves) n = std::max(n, c.values.size());

    std::string svg;
    char buf[256];
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";

    // axes
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", kLeft,
                  kTop + plot_h, kLeft + plot_w, kTop + plot_h);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", kLeft,
                  kTop, kLeft, kTop + plot_h);
    svg += buf;
    for (int tick = 0; tick <= 10; tick += 2) {
        const double frac = tick / 10.0;
        const int y = kTop + plot_h - static_cast<int>(frac * plot_h);
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\" text-anchor=\"end\">%.1f</text>\n",
                      kLeft - 6, y + 4, frac);
        svg += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" font-size=\"13\" text-anchor=\"middle\">rank</text>\n",
                  kLeft + plot_w / 2, kHeight - 14);
    svg += buf;
    std::snprintf(
        buf, sizeof buf,
        "<text x=\"16\" y=\"%d\" font-size=\"13\" transform=\"rotate(-90 16 %d)\" "
        "text-anchor=\"middle\">CMC</text>\n",
        kTop + plot_h / 2, kTop + plot_h / 2);
    svg += buf;

    int color = 0;
    int legend_y = kTop + 14;
    for (const auto& [method, curve] : curves) {
        const char* stroke = kPalette[color % 8];
        std::string pts;
        for (std::size_t l = 0; l < curve.values.size(); ++l) {
            const double fx = (n == 1) ? 1.0 : static_cast<double>(l) / (n - 1);
            const double x = kLeft + fx * plot_w;
            const double y = kTop + plot_h - curve.values[l] * plot_h;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
            pts += buf;
        }
        if (!pts.empty()) pts.pop_back();
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += stroke;
        svg += "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                      kLeft + 10, legend_y, stroke, method.c_str());
        svg += buf;
        legend_y += 16;
        ++color;
    }
    svg += "</svg>\n";
    return svg;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw io_error("short write to " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace curvematch
