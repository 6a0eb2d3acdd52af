#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curvematch/image.hpp"

namespace curvematch {

struct Design {
    std::string id;
    BinaryImage image;
};

struct MatchConfig {
    int k = 3;
    int theta_stride = 1;
    // volumes above this many cells are streamed three slices at a time
    std::size_t materialize_threshold = std::size_t{8} << 20;
    int threads = 1;

    int slice_count() const { return 360 / theta_stride; }
    void validate() const;
};

// Matching cost over the full (theta, y, x) search grid of one design.
// slices[t] holds phi for theta = t * theta_stride, row-major over grid.
struct CostVolume {
    std::string design_id;
    int theta_stride = 1;
    PoseGrid grid;
    std::vector<std::vector<std::int32_t>> slices;

    std::int32_t at(int t, int ix, int iy) const {
        return slices[t][static_cast<std::size_t>(iy) * grid.nx + ix];
    }
};

struct Candidate {
    std::string design_id;
    Pose pose;
    std::int64_t phi = 0;
    std::optional<double> psi_bar;
};

struct Minimum {
    Pose pose;
    std::int64_t phi = 0;
};

// Placement grid shared by every rotation angle (see image.hpp).
PoseGrid valid_poses(const BinaryImage& design, const SherdTemplate& tmpl, int theta_deg);

// Masked SSD plane at one angle, straightforward nested loops. Serial
// reference path; the FFT plane is validated against it.
std::vector<std::int32_t> cost_plane_direct(const BinaryImage& design, const SherdTemplate& tmpl,
                                            int theta_deg);

// Same values via the decomposition phi = A + B - 2C with B and C computed
// as FFT cross-correlations, rounded back to exact integers.
std::vector<std::int32_t> cost_plane_fft(const BinaryImage& design, const SherdTemplate& tmpl,
                                         int theta_deg);

// Fully materialized volume, one FFT plane per theta step.
CostVolume build_cost_volume(const BinaryImage& design, const SherdTemplate& tmpl,
                             const MatchConfig& config, const std::string& design_id = {});

// Cells that are <= all 26 neighbors; theta wraps, spatial out-of-range
// neighbors count as +inf. Scan order (theta, y, x).
std::vector<Minimum> nms_local_minima(const CostVolume& volume);

// Lowest-cost minima, lexicographic (phi, theta, y, x) tie-break, greedy
// suppression of poses within Chebyshev distance 1 (theta wrapped).
std::vector<Candidate> select_candidates(const std::vector<Minimum>& minima,
                                         const MatchConfig& config, const std::string& design_id);

// Per-design candidates for one design; streams theta slices when the
// volume exceeds the materialization threshold.
std::vector<Candidate> match_design(const Design& design, const SherdTemplate& tmpl,
                                    const MatchConfig& config);

// Stage-1 search over the whole catalog. Designs run on parallel workers;
// output is ordered by ascending design id then per-design rank and does
// not depend on the thread count.
std::vector<Candidate> match_catalog(const std::vector<Design>& catalog,
                                     const SherdTemplate& tmpl, const MatchConfig& config);

// Candidate list JSON (array of {design_id,x,y,theta,phi}).
std::string candidates_to_json(const std::vector<Candidate>& candidates);
std::vector<Candidate> candidates_from_json(const std::string& text);

}  // namespace curvematch
