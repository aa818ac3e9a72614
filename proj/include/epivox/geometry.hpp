#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "epivox/errors.hpp"

namespace epivox::geom {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const;
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Positions and directions share the representation; both are millimetres.
using Point3 = Vec3;

struct Face {
    std::array<int, 3> v;
};

// Triangulated multi-structure surface. Each face carries one structure label;
// the structures table maps label ids to anatomical names. Label 0 is reserved
// for "WholeHeart" and never labels faces directly: in label-set arguments it
// expands to every structure that has faces.
struct LabeledMesh {
    std::vector<Point3> vertices;
    std::vector<Face> faces;
    std::vector<int> face_labels;
    std::map<int, std::string> structures;

    static constexpr int kWholeHeart = 0;

    std::size_t face_count() const { return faces.size(); }
    Point3 face_centroid(std::size_t f) const;
    double face_area(std::size_t f) const;
    Vec3 face_normal(std::size_t f) const;  // unit, CCW-outward convention

    bool has_structure(int label) const { return structures.count(label) > 0; }
    std::vector<int> labels_with_faces() const;
    // expands kWholeHeart, validates that every id is known
    std::set<int> expand_labels(const std::set<int>& labels) const;

    // every edge of the labeled sub-mesh shared by exactly two faces
    bool structure_closed(int label) const;

    void bounding_box(Point3& lo, Point3& hi) const;

    // basic consistency: indices in range, finite vertices, labels known,
    // face areas above the degeneracy floor
    void validate() const;
};

// Oriented slicing plane with an in-plane right-handed frame (u, v, normal).
struct ViewPlane {
    Point3 origin;
    Vec3 normal;
    Vec3 u_axis;
    Vec3 v_axis;

    double signed_distance(const Point3& p) const {
        return (p - origin).dot(normal);
    }
    std::array<double, 2> to_plane(const Point3& p) const {
        const Vec3 d = p - origin;
        return {d.dot(u_axis), d.dot(v_axis)};
    }
    Point3 to_world(double u, double v) const {
        return origin + u_axis * u + v_axis * v;
    }
};

struct LandmarkSet {
    std::map<std::string, Point3> points;

    bool has(const std::string& name) const { return points.count(name) > 0; }
    const Point3& at(const std::string& name) const;
    void set(const std::string& name, const Point3& p) { points[name] = p; }
};

// Canonical landmark names
namespace landmarks {
inline constexpr const char* MV_center = "MV_center";
inline constexpr const char* AV_center = "AV_center";
inline constexpr const char* PV_center = "PV_center";
inline constexpr const char* LA_center = "LA_center";
inline constexpr const char* RA_center = "RA_center";
inline constexpr const char* RV_center = "RV_center";
inline constexpr const char* LV_apex  = "LV_apex";
}  // namespace landmarks

// Occupancy volume. Ground-truth grids hold {0,1}; predictions hold [0,1].
// Storage is x-fastest: values[ix + nx*(iy + ny*iz)].
struct VoxelGrid {
    std::array<int, 3> dims{0, 0, 0};
    Point3 bounds_min;
    Point3 bounds_max;
    std::vector<double> values;

    static VoxelGrid zeros(std::array<int, 3> dims, const Point3& lo, const Point3& hi);

    std::size_t index(int ix, int iy, int iz) const {
        return static_cast<std::size_t>(ix) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(iy) +
                    static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(iz));
    }
    std::size_t size() const { return values.size(); }
    Point3 voxel_center(int ix, int iy, int iz) const;
    double occupied_fraction() const;
};

// Closed planar loops in the (u, v) frame of `plane`, millimetres.
struct CrossSection {
    using Loop = std::vector<std::array<double, 2>>;
    std::vector<Loop> polylines;
    ViewPlane plane;

    bool empty() const { return polylines.empty(); }
    static double loop_area(const Loop& loop);       // absolute shoelace area
    static double loop_perimeter(const Loop& loop);  // closed-loop perimeter
};

// ---- Operations ------------------------------------------------------------

// Area-weighted centroid of all faces carrying `structure`.
Point3 center_of_mass(const LabeledMesh& mesh, int structure);

struct ApexCast {
    Point3 apex;       // endocardial (first) hit of the thinnest pair
    double thickness;  // separation of that hit pair, mm
    Vec3 direction;    // unit ray direction that produced it
};

// Casts n_dirs Fibonacci-sphere rays from mv_center against the faces labeled
// with `lv_labels` (endo- and epicardial shells together) and returns the hit
// pair with minimal wall thickness.
ApexCast ray_cast_apex(const LabeledMesh& mesh, const std::set<int>& lv_labels,
                       const Point3& mv_center, int n_dirs = 2048);

ViewPlane plane_from_points(const Point3& p0, const Point3& p1, const Point3& p2);

// Short-axis construction: normal along p0->p1, origin at `level` of the way.
ViewPlane plane_from_axis(const Point3& p0, const Point3& p1, double level);

CrossSection slice_mesh(const LabeledMesh& mesh, const ViewPlane& plane,
                        const std::set<int>& labels);

// Occupancy by +x ray parity per structure, OR-ed over the requested labels.
// Each structure must be a closed surface. Deterministic jitter resolves
// rays that graze vertices or edges.
VoxelGrid voxelize(const LabeledMesh& mesh, const std::set<int>& labels,
                   std::array<int, 3> dims, const Point3& bounds_min,
                   const Point3& bounds_max);

// Fibonacci-sphere direction set (unit vectors, deterministic).
std::vector<Vec3> fibonacci_directions(int n);

// All hits of ray origin+t*dir (t > 0) against faces with labels in `labels`,
// sorted by t. Used by ray_cast_apex and exposed for tests.
struct RayHit {
    double t;
    Point3 point;
    std::size_t face;
};
std::vector<RayHit> ray_mesh_hits(const LabeledMesh& mesh, const std::set<int>& labels,
                                  const Point3& origin, const Vec3& dir);

// ---- File formats ----------------------------------------------------------
// Mesh: ASCII lines `structure id name`, `v x y z`, `f i j k label` (0-based).
void save_mesh(const LabeledMesh& mesh, const std::string& path);
LabeledMesh load_mesh(const std::string& path);
void write_mesh(const LabeledMesh& mesh, std::ostream& os);
LabeledMesh read_mesh(std::istream& is);

// VoxelGrid: `VOXGRID 1 nx ny nz xmin ymin zmin xmax ymax zmax` + values
// in x-fastest order.
void save_voxgrid(const VoxelGrid& grid, const std::string& path);
VoxelGrid load_voxgrid(const std::string& path);

}  // namespace epivox::geom
