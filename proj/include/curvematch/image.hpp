#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace curvematch {

// Binary raster, row-major, one byte per pixel holding 0 or 1.
struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    BinaryImage() = default;
    BinaryImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    // reads 0 outside the raster
    std::uint8_t at_or_zero(int x, int y) const { return in_bounds(x, y) ? at(x, y) : 0; }

    std::size_t size() const { return pixels.size(); }
    std::int64_t foreground_count() const;

    bool operator==(const BinaryImage&) const = default;
};

// Sherd query: segmented curve raster plus the sherd-boundary mask.
// Invariants: same dimensions, curve implies mask, mask nonempty.
struct SherdTemplate {
    BinaryImage curve;
    BinaryImage mask;

    void validate() const;  // throws argument_error on invariant breach
};

// Placement of a template on a design: canvas center at design pixel
// (x, y), rotated theta degrees counterclockwise. theta in [0, 360).
struct Pose {
    int x = 0;
    int y = 0;
    int theta = 0;

    bool operator==(const Pose&) const = default;
};

enum class FlipMode { None, Horizontal, Vertical };

// ---------------------------------------------------------------------------
// Shared placement geometry.
//
// A w-wide canvas placed at center x covers design columns
// [x - anchor, x - anchor + w - 1] with anchor = (w - 1) / 2 (floor).
// Every consumer of poses (cost planes, crop_patch, the corpus generator)
// uses this one convention.
// ---------------------------------------------------------------------------

inline int canvas_anchor(int extent) { return (extent - 1) / 2; }

struct Extent {
    int width = 0;
    int height = 0;
};

// Canvas of rotate(): axis-aligned bounding box of the input pixel centers
// rotated about the image center. Exact for multiples of 90 degrees.
Extent rotated_extent(int w, int h, double theta_deg);

// Inverse map used by rotate(): source pixel sampled by output pixel
// (ox, oy). May be out of [0,w)x[0,h); callers treat that as background.
// Rounding is nearest, halves away from zero.
std::pair<int, int> rotate_source_pixel(int ox, int oy, int in_w, int in_h, int out_w, int out_h,
                                        double theta_deg);

// Grid of valid placement centers for a (design, template) pair. The design
// is conceptually zero-padded by pad on each side; a center is valid when
// the unrotated template canvas fits in the padded extent. The same grid is
// used for every rotation angle.
struct PoseGrid {
    int x_min = 0;
    int y_min = 0;
    int nx = 0;
    int ny = 0;
    int pad = 0;  // padding radius R used to build the grid

    bool empty() const { return nx <= 0 || ny <= 0; }
    std::size_t cell_count() const { return empty() ? 0 : static_cast<std::size_t>(nx) * ny; }
    bool contains(int x, int y) const {
        return x >= x_min && x < x_min + nx && y >= y_min && y < y_min + ny;
    }
};

// Padding radius: half the template canvas diagonal, rounded up.
int pose_padding(int tmpl_w, int tmpl_h);

PoseGrid pose_grid(int design_w, int design_h, int tmpl_w, int tmpl_h);

// ---------------------------------------------------------------------------
// Geometric transforms. All pure, all binary-preserving.
// ---------------------------------------------------------------------------

// Nearest-neighbor rotation about the image center onto the rotated
// bounding-box canvas. theta = 0 (mod 360) is a bit-exact identity.
BinaryImage rotate(const BinaryImage& image, double theta_deg);

BinaryImage flip(const BinaryImage& image, FlipMode mode);

// Radial power remap about the image center: an output pixel at normalized
// radius r (r = 1 at the canvas corner) samples the input at radius
// r^exponent along the same ray. exponent = 1 returns the input bit-exactly.
BinaryImage fisheye(const BinaryImage& image, double exponent);

BinaryImage resize_nearest(const BinaryImage& image, int w, int h);

// Design patch under the rotated template canvas placed at pose: pixels
// outside the rotated mask are 0, design reads 0 outside its extent. The
// result has the rotated canvas dimensions.
BinaryImage crop_patch(const BinaryImage& design, const Pose& pose, const SherdTemplate& tmpl);

// ---------------------------------------------------------------------------
// PGM I/O. P5 written; P5 and P2 accepted. Foreground = 255 on disk,
// threshold at 128 on load.
// ---------------------------------------------------------------------------

BinaryImage load_pgm(const std::string& path);
void save_pgm(const BinaryImage& image, const std::string& path);

// Parse/serialize against memory; the file functions wrap these.
BinaryImage parse_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin);
std::vector<std::uint8_t> encode_pgm(const BinaryImage& image);

}  // namespace curvematch
