#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "curvematch/image.hpp"
#include "curvematch/net.hpp"
#include "curvematch/stage1.hpp"

namespace curvematch {

// values[L-1] = fraction of sherds whose truth design ranks within the
// top L. Non-decreasing, terminal value 1 when truths are in the catalog.
struct CmcCurve {
    std::vector<double> values;
};

CmcCurve cmc(const std::vector<std::vector<std::string>>& rankings,
             const std::vector<std::string>& truths);

// Rank designs by minimum Stage-1 cost (ties by design id).
std::vector<std::string> rank_stage1(const std::vector<Candidate>& candidates);

// Rank by sum of absolute pixel differences between the rotated masked
// template and the masked patch. Independent of the phi code path even
// though the two coincide on binary inputs.
std::vector<std::string> rank_nearest_neighbor(const SherdTemplate& tmpl,
                                               const std::vector<Design>& catalog,
                                               const std::vector<Candidate>& candidates);

struct Skeleton {
    std::vector<std::pair<int, int>> points;  // (x, y), scan order
};

// Zhang-Suen thinning to a one-pixel-wide skeleton; idempotent.
Skeleton skeletonize(const BinaryImage& image);
BinaryImage skeleton_raster(const Skeleton& skeleton, int width, int height);

// Exact Euclidean distance to the nearest foreground pixel, Felzenszwalb
// two-pass squared transform followed by a square root.
std::vector<double> distance_map(const BinaryImage& image);

// Directed mean nearest-point distance from U into V's distance map.
double chamfer_distance(const Skeleton& u, const Skeleton& v,
                        const std::vector<double>& v_distance_map, int map_width,
                        int map_height);

// Chamfer baseline: minimize the directed distance over the Stage-1 pose
// grid at the same theta stride. Designs with an empty skeleton are ranked
// last with a warning on stderr.
std::vector<std::string> rank_chamfer(const SherdTemplate& tmpl,
                                      const std::vector<Design>& catalog,
                                      const MatchConfig& config);

struct AblationRow {
    std::string condition;
    double rank1 = -1.0;  // negative: not applicable
    double seconds = 0.0;
};

struct AblationInput {
    std::vector<Design> catalog;
    std::vector<SherdTemplate> sherds;
    std::vector<std::string> truths;
    std::vector<std::vector<Candidate>> candidates;  // per sherd
    EmbeddingNet net;
    MatchConfig match_config;
    int threads = 1;
};

// Rank-1 per {tta on/off} x {embedding tap}, plus a timing row comparing
// the exhaustive FFT and direct Stage-1 paths on the first sherd.
std::vector<AblationRow> run_ablations(const AblationInput& input);

std::string ablation_csv(const std::vector<AblationRow>& rows);

// CSV (method,rank,value) and a standalone SVG with one polyline per
// method. Both byte-deterministic for identical inputs.
std::string cmc_csv(const std::map<std::string, CmcCurve>& curves);
std::map<std::string, CmcCurve> cmc_from_csv(const std::string& text);
std::string cmc_svg(const std::map<std::string, CmcCurve>& curves);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace curvematch
