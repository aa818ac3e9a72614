#pragma once

#include <cstdint>
#include <utility>

#include "epivox/geometry.hpp"

namespace epivox::geom {

// Structure label ids used by generated phantoms (0 = WholeHeart alias).
namespace structure_id {
inline constexpr int WholeHeart = 0;
inline constexpr int LV_endo = 1;
inline constexpr int LV_epi = 2;
inline constexpr int RV = 3;
inline constexpr int LA = 4;
inline constexpr int RA = 5;
inline constexpr int MV = 6;
inline constexpr int AV = 7;
inline constexpr int PV = 8;
inline constexpr int TV = 9;
}  // namespace structure_id

// Procedural heart stand-in: LV endo/epi prolate spheroids, RV shell, LA/RA
// spheroids and four disc-like valve annuli. All dimensions in millimetres.
struct PhantomParams {
    double lv_endo_radius = 20.0;    // LV endocardial short semi-axis
    double lv_endo_length = 35.0;    // LV endocardial long semi-axis
    double lv_wall_thickness = 7.0;  // lateral wall
    double lv_apex_thickness = 3.0;  // apical wall (thinnest point by design)
    double atrium_radius = 12.0;
    double rv_scale = 1.0;
    double valve_radius = 7.0;
    double valve_thickness = 2.0;
    double perturb_amplitude = 0.0;  // smooth radial perturbation, mm
    int mesh_segments = 48;          // longitude segments (latitude = half)

    void validate() const;
};

// Deterministic for a given (params, seed); landmark set comes from the
// construction, so it is exact ground truth for the landmark operations.
std::pair<LabeledMesh, LandmarkSet> generate_phantom(const PhantomParams& params,
                                                     std::uint64_t seed);

// Closed UV-sphere ellipsoid; exposed for geometry tests.
LabeledMesh make_ellipsoid(const Point3& center, const Vec3& semi_axes, int segments,
                           int label, const std::string& name);

// Merge `src` into `dst` (vertices re-indexed, structure tables united).
void append_mesh(LabeledMesh& dst, const LabeledMesh& src);

}  // namespace epivox::geom
