#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epivox/geometry.hpp"

namespace epivox::viewgen {

// The nine standard echocardiographic views.
enum class StandardView {
    RV_inflow,
    PLAX,
    PSAX_AV,
    PSAX_MV,
    PSAX_PM,
    PSAX_apex,
    A4C,
    A5C,
    A2C,
};

const std::vector<StandardView>& all_views();
std::string view_name(StandardView v);
StandardView view_from_name(const std::string& name);  // InvalidParams on unknown

// Landmark recipe for a view: either a plane fit to three landmarks or a
// short-axis plane on the MV_center -> LV_apex axis at a fractional level.
struct ViewRecipe {
    bool axis_based = false;
    std::array<const char*, 3> landmarks{nullptr, nullptr, nullptr};  // 3-point
    double level = 0.0;  // axis recipes: 0 = MV_center, 1 = LV_apex
};
const ViewRecipe& view_recipe(StandardView v);

geom::ViewPlane standard_view_plane(StandardView view, const geom::LandmarkSet& lm);

struct MaskImage {
    int width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // {0,1}, row-major
    double mm_per_pixel = 1.0;

    std::uint8_t at(int x, int y) const { return pixels[y * width + x]; }
    std::size_t count_nonzero() const;
};

struct GrayImage {
    int width = 0, height = 0;
    std::vector<double> pixels;  // [0,1], row-major
    double mm_per_pixel = 1.0;

    double at(int x, int y) const { return pixels[y * width + x]; }
};

struct RasterParams {
    int width = 128;
    int height = 128;
    double mm_per_pixel = 1.0;
    bool auto_center = true;                 // center on the section's bbox
    std::array<double, 2> center{0.0, 0.0};  // used when auto_center is false
};

// Even-odd fill of the section loops; `center` maps to the image midpoint.
MaskImage rasterize_section(const geom::CrossSection& section, int width, int height,
                            double mm_per_pixel, std::array<double, 2> center);

enum class NoiseOrder { NoiseThenBlur, BlurThenNoise };

struct PseudoUsParams {
    double cone_apex_x = 64.0;  // pixels
    double cone_apex_y = -8.0;
    double cone_half_angle_deg = 38.0;  // around the +y image axis
    double cone_min_radius = 10.0;      // pixels
    double cone_max_radius = 140.0;
    bool cone_enabled = true;
    double noise_std = 0.08;
    double blur_sigma = 1.5;
    int blur_kernel_size = 7;  // odd
    NoiseOrder order = NoiseOrder::NoiseThenBlur;
    double tissue_gain = 0.65;
    double background_level = 0.12;
    std::uint64_t seed = 0;
};

GrayImage pseudo_us(const MaskImage& mask, const PseudoUsParams& p);

bool inside_cone(const PseudoUsParams& p, double px, double py);

// Building blocks shared with the test-side reference implementation.
std::vector<double> gaussian_noise_field(int width, int height, double std_dev,
                                         std::uint64_t seed);
std::vector<double> gaussian_kernel(double sigma, int size);  // sums to 1
// separable, edge-clamped
GrayImage gaussian_blur(const GrayImage& img, double sigma, int size);

struct ViewImages {
    StandardView view;
    MaskImage mask;
    std::optional<GrayImage> pseudo;
};

// plane -> slice -> rasterize -> optional pseudo-US for each requested view;
// errors are annotated with the failing view's name
std::vector<ViewImages> build_view_set(const geom::LabeledMesh& mesh,
                                       const geom::LandmarkSet& lm,
                                       const std::vector<StandardView>& views,
                                       const RasterParams& raster,
                                       const std::optional<PseudoUsParams>& us);

// PGM with a `# mm_per_pixel <v>` comment. Masks store 0/255.
void save_pgm(const MaskImage& img, const std::string& path, bool binary = true);
void save_pgm(const GrayImage& img, const std::string& path, bool binary = true);
GrayImage load_pgm(const std::string& path);
MaskImage load_pgm_mask(const std::string& path);

}  // namespace epivox::viewgen
