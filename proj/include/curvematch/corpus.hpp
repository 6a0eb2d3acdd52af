#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvematch/image.hpp"
#include "curvematch/stage1.hpp"

namespace curvematch {

// Synthetic degradations applied to generated sherds, in order:
// fisheye deformation, dropout blobs, speckle, boundary-band corruption.
struct DegradationSpec {
    int dropout_blobs = 0;
    int dropout_radius_min = 2;
    int dropout_radius_max = 4;
    double speckle_rate = 0.0;
    double fisheye_min = 1.0;
    double fisheye_max = 1.0;
    int boundary_erode_px = 0;

    void validate() const;
    bool is_noop() const;

    static DegradationSpec none();
    static DegradationSpec mild();
    static DegradationSpec heavy();
    static DegradationSpec from_level(const std::string& level);
};

struct SherdRecord {
    std::string id;
    std::string curve_file;
    std::string mask_file;
    std::string design_id;
    Pose truth_pose;
    DegradationSpec degradation;
    std::uint64_t seed = 0;
};

struct DesignRecord {
    std::string id;
    std::string file;
    int width = 0;
    int height = 0;
};

enum class DesignStyle { Waves, Arcs, Lattice, Mixed };

DesignStyle design_style_from_string(const std::string& name);
std::string to_string(DesignStyle style);

struct CatalogConfig {
    int designs = 12;
    int sherds_per_design = 5;
    int design_width = 160;
    int design_height = 160;
    int sherd_min = 48;
    int sherd_max = 64;
    int stroke_px = 2;
    int theta_snap = 10;  // truth angles are multiples of this
    std::string level = "none";
    DegradationSpec degradation = DegradationSpec::none();
    std::uint64_t seed = 7;

    void validate() const;
};

struct Manifest {
    CatalogConfig config;
    std::vector<DesignRecord> designs;
    std::vector<SherdRecord> sherds;
};

// Deterministic curve-family raster; retries with a perturbed seed until
// the foreground density lands in [0.05, 0.5].
BinaryImage gen_design(std::uint64_t seed, int width, int height, DesignStyle style,
                       int stroke_px);

struct GeneratedSherd {
    SherdRecord record;
    SherdTemplate tmpl;
};

// Polygon-masked crop of the design at a seeded pose. With no degradation
// the rotated curve reproduces the masked design patch bit-for-bit, so the
// Stage-1 cost at the truth pose is exactly zero.
GeneratedSherd gen_sherd(const BinaryImage& design, const std::string& design_id,
                         std::uint64_t seed, int size_min, int size_max, int theta_snap,
                         const DegradationSpec& degradation);

// Full on-disk catalog: designs/, sherds/, manifest.json. Byte-identical
// for identical configs.
Manifest gen_catalog(const CatalogConfig& config, const std::string& out_dir);

Manifest load_manifest(const std::string& catalog_dir);
std::vector<Design> load_designs(const std::string& catalog_dir, const Manifest& manifest);
SherdTemplate load_sherd(const std::string& catalog_dir, const SherdRecord& record);

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

// Seeded, stratified-by-design split of sherd ids.
Split split_train_test(const Manifest& manifest, double fraction, std::uint64_t seed);

void save_split(const Split& split, const std::string& path);
Split load_split(const std::string& path);

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);

}  // namespace curvematch
