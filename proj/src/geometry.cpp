#include "epivox/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace epivox::geom {

namespace {

constexpr double kMinFaceArea = 1e-9;  // mm^2, degeneracy floor
constexpr double kOnPlaneTol = 1e-9;   // mm, vertex-on-plane classification
constexpr double kChainSnap = 1e-6;    // mm, segment endpoint matching

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Vec3 Vec3::normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw InvalidParams("cannot normalize zero-length or non-finite vector");
    }
    return *this / n;
}

// ---- LabeledMesh -----------------------------------------------------------

Point3 LabeledMesh::face_centroid(std::size_t f) const {
    const auto& [i, j, k] = faces[f].v;
    return (vertices[i] + vertices[j] + vertices[k]) / 3.0;
}

double LabeledMesh::face_area(std::size_t f) const {
    const auto& [i, j, k] = faces[f].v;
    return 0.5 * (vertices[j] - vertices[i]).cross(vertices[k] - vertices[i]).norm();
}

Vec3 LabeledMesh::face_normal(std::size_t f) const {
    const auto& [i, j, k] = faces[f].v;
    return (vertices[j] - vertices[i]).cross(vertices[k] - vertices[i]).normalized();
}

std::vector<int> LabeledMesh::labels_with_faces() const {
    std::set<int> seen(face_labels.begin(), face_labels.end());
    return {seen.begin(), seen.end()};
}

std::set<int> LabeledMesh::expand_labels(const std::set<int>& labels) const {
    std::set<int> out;
    for (const int label : labels) {
        if (!has_structure(label)) {
            throw UnknownStructure("label id " + std::to_string(label) +
                                   " not in structures table");
        }
        if (label == kWholeHeart) {
            for (const int l : labels_with_faces()) out.insert(l);
        } else {
            out.insert(label);
        }
    }
    return out;
}

bool LabeledMesh::structure_closed(int label) const {
    // every edge of the labeled sub-mesh must be shared by exactly two faces
    std::unordered_map<std::uint64_t, int> edge_count;
    const auto key = [](int a, int b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    };
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (face_labels[f] != label) continue;
        const auto& v = faces[f].v;
        ++edge_count[key(v[0], v[1])];
        ++edge_count[key(v[1], v[2])];
        ++edge_count[key(v[2], v[0])];
    }
    for (const auto& [k, c] : edge_count) {
        if (c != 2) return false;
    }
    return true;
}

void LabeledMesh::bounding_box(Point3& lo, Point3& hi) const {
    if (vertices.empty()) throw InvalidParams("empty mesh has no bounding box");
    lo = hi = vertices[0];
    for (const auto& p : vertices) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
}

void LabeledMesh::validate() const {
    if (faces.size() != face_labels.size()) {
        throw InvalidParams("face_labels size does not match faces");
    }
    for (const auto& p : vertices) {
        if (!p.finite()) throw InvalidParams("non-finite vertex");
    }
    const int n = static_cast<int>(vertices.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (const int i : faces[f].v) {
            if (i < 0 || i >= n) throw InvalidParams("face index out of range");
        }
        if (face_area(f) <= kMinFaceArea) {
            throw InvalidParams("degenerate face " + std::to_string(f));
        }
        if (!structures.count(face_labels[f])) {
            throw UnknownStructure("face label " + std::to_string(face_labels[f]) +
                                   " missing from structures table");
        }
    }
}

// ---- VoxelGrid ---------------------------------------------------------

VoxelGrid VoxelGrid::zeros(std::array<int, 3> dims, const Point3& lo, const Point3& hi) {
    if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) {
        throw InvalidParams("voxel grid dims must be >= 2 per axis");
    }
    if (!(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z)) {
        throw InvalidParams("voxel grid bounds_min must be < bounds_max");
    }
    VoxelGrid g;
    g.dims = dims;
    g.bounds_min = lo;
    g.bounds_max = hi;
    g.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0);
    return g;
}

Point3 VoxelGrid::voxel_center(int ix, int iy, int iz) const {
    const Vec3 ext = bounds_max - bounds_min;
    return {bounds_min.x + (ix + 0.5) * ext.x / dims[0],
            bounds_min.y + (iy + 0.5) * ext.y / dims[1],
            bounds_min.z + (iz + 0.5) * ext.z / dims[2]};
}

double VoxelGrid::occupied_fraction() const {
    double s = 0.0;
    for (const double v : values) s += v;
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

// ---- CrossSection ----------------------------------------------------------

double CrossSection::loop_area(const Loop& loop) {
    double a = 0.0;
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = loop[i];
        const auto& q = loop[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    return std::abs(a) * 0.5;
}

double CrossSection::loop_perimeter(const Loop& loop) {
    double s = 0.0;
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = loop[i];
        const auto& q = loop[(i + 1) % n];
        s += std::hypot(q[0] - p[0], q[1] - p[1]);
    }
    return s;
}

const Point3& LandmarkSet::at(const std::string& name) const {
    const auto it = points.find(name);
    if (it == points.end()) throw MissingLandmark("landmark " + name + " not present");
    return it->second;
}

// ---- center_of_mass --------------------------------------------------------

Point3 center_of_mass(const LabeledMesh& mesh, int structure) {
    const auto wanted = mesh.expand_labels({structure});
    Vec3 acc{0, 0, 0};
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        if (!wanted.count(mesh.face_labels[f])) continue;
        const double a = mesh.face_area(f);
        acc += mesh.face_centroid(f) * a;
        total += a;
    }
    if (total <= 0.0) {
        throw UnknownStructure("no faces carry label " + std::to_string(structure));
    }
    return acc / total;
}

// ---- ray casting -----------------------------------------------------------

std::vector<Vec3> fibonacci_directions(int n) {
    if (n < 1) throw InvalidParams("direction count must be positive");
    std::vector<Vec3> dirs;
    dirs.reserve(n);
    const double golden_angle = 3.1415926535897932384626433832795 * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < n; ++k) {
        const double z = 1.0 - (2.0 * k + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * k;
        dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
    return dirs;
}

namespace {

// Moller-Trumbore. Returns true on a hit with t > tmin; degenerate marks hits
// that graze an edge/vertex or near-parallel triangles.
struct TriHit {
    double t;
    bool degenerate;
};

bool ray_triangle(const Point3& o, const Vec3& d, const Point3& a, const Point3& b,
                  const Point3& c, double tmin, TriHit& hit) {
    constexpr double kBaryEps = 1e-10;
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 p = d.cross(e2);
    const double det = e1.dot(p);
    const double scale = e1.norm() * e2.norm();
    if (std::abs(det) <= 1e-14 * std::max(1.0, scale)) return false;
    const double inv = 1.0 / det;
    const Vec3 s = o - a;
    const double u = s.dot(p) * inv;
    if (u < -kBaryEps || u > 1.0 + kBaryEps) return false;
    const Vec3 q = s.cross(e1);
    const double v = d.dot(q) * inv;
    if (v < -kBaryEps || u + v > 1.0 + kBaryEps) return false;
    const double t = e2.dot(q) * inv;
    if (t <= tmin) return false;
    hit.t = t;
    hit.degenerate = (u < kBaryEps || v < kBaryEps || u + v > 1.0 - kBaryEps);
    return true;
}

}  // namespace

std::vector<RayHit> ray_mesh_hits(const LabeledMesh& mesh, const std::set<int>& labels,
                                  const Point3& origin, const Vec3& dir) {
    if (!(dir.norm() > 0.0) || !dir.finite()) {
        throw DegenerateRay("ray direction must be finite and non-zero");
    }
    const auto wanted = mesh.expand_labels(labels);
    std::vector<RayHit> hits;
    TriHit h;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        if (!wanted.count(mesh.face_labels[f])) continue;
        const auto& v = mesh.faces[f].v;
        if (ray_triangle(origin, dir, mesh.vertices[v[0]], mesh.vertices[v[1]],
                         mesh.vertices[v[2]], 1e-9, h)) {
            hits.push_back({h.t, origin + dir * h.t, f});
        }
    }
    std::sort(hits.begin(), hits.end(),
              [](const RayHit& a, const RayHit& b) { return a.t < b.t; });
    // collapse duplicate hits where the ray crossed a shared edge
    std::vector<RayHit> out;
    for (const auto& hit : hits) {
        if (!out.empty() && hit.t - out.back().t < 1e-9) continue;
        out.push_back(hit);
    }
    return out;
}

ApexCast ray_cast_apex(const LabeledMesh& mesh, const std::set<int>& lv_labels,
                       const Point3& mv_center, int n_dirs) {
    if (n_dirs < 64) throw InvalidParams("apex ray cast needs n_dirs >= 64");
    if (!mv_center.finite()) throw InvalidParams("mv_center must be finite");

    ApexCast best;
    best.thickness = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const Vec3& dir : fibonacci_directions(n_dirs)) {
        const auto hits = ray_mesh_hits(mesh, lv_labels, mv_center, dir);
        if (hits.size() < 2) continue;
        const double thickness = hits[1].t - hits[0].t;  // |dir| = 1
        if (thickness < best.thickness) {
            best = {hits[0].point, thickness, dir};
            found = true;
        }
    }
    if (!found) {
        throw NoWallPair("no ray from mv_center crossed both wall surfaces");
    }
    return best;
}

// ---- plane construction ----------------------------------------------------

ViewPlane plane_from_points(const Point3& p0, const Point3& p1, const Point3& p2) {
    const Vec3 e1 = p1 - p0;
    const Vec3 e2 = p2 - p0;
    const Vec3 n = e1.cross(e2);
    if (0.5 * n.norm() <= kMinFaceArea) {
        throw CollinearLandmarks("plane landmarks are collinear");
    }
    ViewPlane plane;
    plane.origin = (p0 + p1 + p2) / 3.0;
    plane.normal = n.normalized();
    plane.u_axis = e1.normalized();
    plane.v_axis = plane.normal.cross(plane.u_axis);
    return plane;
}

ViewPlane plane_from_axis(const Point3& p0, const Point3& p1, double level) {
    const Vec3 axis = p1 - p0;
    if (axis.norm() <= 1e-6) {
        throw CoincidentLandmarks("axis landmarks coincide");
    }
    ViewPlane plane;
    plane.normal = axis.normalized();
    plane.origin = p0 + axis * level;
    // deterministic in-plane frame: project +x onto the plane, fall back to +y
    Vec3 u = Vec3{1, 0, 0} - plane.normal * plane.normal.x;
    if (u.norm() < 1e-9) {
        u = Vec3{0, 1, 0} - plane.normal * plane.normal.y;
    }
    plane.u_axis = u.normalized();
    plane.v_axis = plane.normal.cross(plane.u_axis);
    return plane;
}

// ---- slicing ---------------------------------------------------------------

namespace {

struct Segment2 {
    std::array<double, 2> a;
    std::array<double, 2> b;
};

std::int64_t snap(double v) { return std::llround(v / kChainSnap); }

struct KeyHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
        return std::hash<std::int64_t>()(k.first * 1000003 + k.second);
    }
};

}  // namespace

CrossSection slice_mesh(const LabeledMesh& mesh, const ViewPlane& plane,
                        const std::set<int>& labels) {
    if (labels.empty()) throw InvalidParams("slice requires a non-empty label set");
    const auto wanted = mesh.expand_labels(labels);

    std::vector<Segment2> segments;
    std::unordered_set<std::uint64_t> seen_edges;  // dedup edge-on-plane emissions

    const auto uv = [&](const Point3& p) { return plane.to_plane(p); };
    const auto lerp_cross = [&](const Point3& a, const Point3& b, double da, double db) {
        return a + (b - a) * (da / (da - db));
    };

    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        if (!wanted.count(mesh.face_labels[f])) continue;
        const auto& vi = mesh.faces[f].v;
        const Point3 p[3] = {mesh.vertices[vi[0]], mesh.vertices[vi[1]],
                             mesh.vertices[vi[2]]};
        double d[3];
        int sign[3];
        int zeros = 0;
        for (int i = 0; i < 3; ++i) {
            d[i] = plane.signed_distance(p[i]);
            sign[i] = std::abs(d[i]) <= kOnPlaneTol ? 0 : (d[i] > 0 ? 1 : -1);
            if (sign[i] == 0) ++zeros;
        }
        if (zeros == 3) continue;  // coplanar face contributes no unique segment

        if (zeros == 2) {
            // an edge lies on the plane; emit it once across the two adjacent
            // faces by requiring the off-plane vertex to be on the + side
            int off = sign[0] != 0 ? 0 : (sign[1] != 0 ? 1 : 2);
            if (sign[off] < 0) continue;
            const int a = (off + 1) % 3;
            const int b = (off + 2) % 3;
            std::uint64_t lo = std::min(vi[a], vi[b]);
            std::uint64_t hi = std::max(vi[a], vi[b]);
            if (!seen_edges.insert((lo << 32) | hi).second) continue;
            segments.push_back({uv(p[a]), uv(p[b])});
            continue;
        }
        if (zeros == 1) {
            const int z = sign[0] == 0 ? 0 : (sign[1] == 0 ? 1 : 2);
            const int a = (z + 1) % 3;
            const int b = (z + 2) % 3;
            if (sign[a] * sign[b] >= 0) continue;  // touch at a vertex only
            segments.push_back({uv(p[z]), uv(lerp_cross(p[a], p[b], d[a], d[b]))});
            continue;
        }
        // no on-plane vertices: need mixed signs, one vertex isolated
        if (sign[0] == sign[1] && sign[1] == sign[2]) continue;
        int lone = 0;
        if (sign[1] == sign[2]) lone = 0;
        else if (sign[0] == sign[2]) lone = 1;
        else lone = 2;
        const int a = (lone + 1) % 3;
        const int b = (lone + 2) % 3;
        segments.push_back({uv(lerp_cross(p[lone], p[a], d[lone], d[a])),
                            uv(lerp_cross(p[lone], p[b], d[lone], d[b]))});
    }

    // drop zero-length segments, then chain endpoint-to-endpoint
    std::vector<Segment2> segs;
    for (const auto& s : segments) {
        if (std::hypot(s.b[0] - s.a[0], s.b[1] - s.a[1]) > 1e-9) segs.push_back(s);
    }

    using Key = std::pair<std::int64_t, std::int64_t>;
    std::unordered_map<Key, std::vector<std::pair<std::size_t, int>>, KeyHash> incident;
    const auto key_of = [](const std::array<double, 2>& pt) {
        return Key{snap(pt[0]), snap(pt[1])};
    };
    for (std::size_t i = 0; i < segs.size(); ++i) {
        incident[key_of(segs[i].a)].push_back({i, 0});
        incident[key_of(segs[i].b)].push_back({i, 1});
    }

    // find an unused segment incident to a point, searching neighbor cells so
    // endpoints within the snap tolerance on a cell border still match
    std::vector<bool> used(segs.size(), false);
    const auto find_next = [&](const std::array<double, 2>& pt)
        -> std::pair<std::size_t, int> {
        const Key base = key_of(pt);
        for (std::int64_t du = -1; du <= 1; ++du) {
            for (std::int64_t dv = -1; dv <= 1; ++dv) {
                const auto it = incident.find({base.first + du, base.second + dv});
                if (it == incident.end()) continue;
                for (const auto& [idx, end] : it->second) {
                    if (used[idx]) continue;
                    const auto& cand = end == 0 ? segs[idx].a : segs[idx].b;
                    if (std::hypot(cand[0] - pt[0], cand[1] - pt[1]) <= 2 * kChainSnap) {
                        return {idx, end};
                    }
                }
            }
        }
        return {segs.size(), -1};
    };

    CrossSection section;
    section.plane = plane;
    for (std::size_t start = 0; start < segs.size(); ++start) {
        if (used[start]) continue;
        used[start] = true;
        CrossSection::Loop loop{segs[start].a, segs[start].b};
        bool closed = false;
        while (true) {
            const auto [idx, end] = find_next(loop.back());
            if (end < 0) break;
            used[idx] = true;
            const auto& far = end == 0 ? segs[idx].b : segs[idx].a;
            if (std::hypot(far[0] - loop.front()[0], far[1] - loop.front()[1]) <=
                2 * kChainSnap) {
                closed = true;
                break;
            }
            loop.push_back(far);
        }
        if (closed && loop.size() >= 3) {
            section.polylines.push_back(std::move(loop));
        }
    }
    return section;
}

// ---- voxelization ----------------------------------------------------------

VoxelGrid voxelize(const LabeledMesh& mesh, const std::set<int>& labels,
                   std::array<int, 3> dims, const Point3& bounds_min,
                   const Point3& bounds_max) {
    const auto wanted = mesh.expand_labels(labels);
    for (const int label : wanted) {
        if (!mesh.structure_closed(label)) {
            throw OpenSurface("structure " + std::to_string(label) +
                              " (" + mesh.structures.at(label) + ") is not closed");
        }
    }
    VoxelGrid grid = VoxelGrid::zeros(dims, bounds_min, bounds_max);

    // per-structure face lists with (y, z) bounding boxes for row rejection
    struct FaceRef {
        std::size_t f;
        double ymin, ymax, zmin, zmax;
    };
    std::vector<std::vector<FaceRef>> by_label;
    std::vector<int> label_list(wanted.begin(), wanted.end());
    by_label.resize(label_list.size());
    std::unordered_map<int, std::size_t> label_pos;
    for (std::size_t i = 0; i < label_list.size(); ++i) label_pos[label_list[i]] = i;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const auto it = label_pos.find(mesh.face_labels[f]);
        if (it == label_pos.end()) continue;
        const auto& v = mesh.faces[f].v;
        const Point3& a = mesh.vertices[v[0]];
        const Point3& b = mesh.vertices[v[1]];
        const Point3& c = mesh.vertices[v[2]];
        by_label[it->second].push_back(
            {f, std::min({a.y, b.y, c.y}), std::max({a.y, b.y, c.y}),
             std::min({a.z, b.z, c.z}), std::max({a.z, b.z, c.z})});
    }

    Point3 mesh_lo, mesh_hi;
    mesh.bounding_box(mesh_lo, mesh_hi);
    const double x_start = std::min(bounds_min.x, mesh_lo.x) - 1.0;
    const double extent = std::max({bounds_max.x - bounds_min.x,
                                    bounds_max.y - bounds_min.y,
                                    bounds_max.z - bounds_min.z});
    const Vec3 dir{1, 0, 0};

    // one +x ray per (iy, iz) row classifies all voxels in the row; rows whose
    // ray grazes a vertex or edge are re-cast with a deterministic jitter
    std::vector<double> crossings;
    TriHit h;
    for (int iz = 0; iz < dims[2]; ++iz) {
        for (int iy = 0; iy < dims[1]; ++iy) {
            const Point3 c0 = grid.voxel_center(0, iy, iz);
            for (std::size_t li = 0; li < label_list.size(); ++li) {
                double yc = c0.y, zc = c0.z;
                bool ok = false;
                for (int attempt = 0; attempt < 9 && !ok; ++attempt) {
                    crossings.clear();
                    ok = true;
                    const Point3 origin{x_start, yc, zc};
                    for (const auto& fr : by_label[li]) {
                        if (yc < fr.ymin || yc > fr.ymax || zc < fr.zmin || zc > fr.zmax)
                            continue;
                        const auto& v = mesh.faces[fr.f].v;
                        if (ray_triangle(origin, dir, mesh.vertices[v[0]],
                                         mesh.vertices[v[1]], mesh.vertices[v[2]], 0.0,
                                         h)) {
                            if (h.degenerate) {
                                ok = false;
                                break;
                            }
                            crossings.push_back(origin.x + h.t);
                        }
                    }
                    if (!ok) {
                        const double delta = extent * 1e-7 * (attempt + 1);
                        yc = c0.y + delta;
                        zc = c0.z + delta * 0.6180339887498949;
                    }
                }
                std::sort(crossings.begin(), crossings.end());
                std::size_t ptr = 0;
                for (int ix = 0; ix < dims[0]; ++ix) {
                    const double xc = grid.voxel_center(ix, iy, iz).x;
                    while (ptr < crossings.size() && crossings[ptr] < xc) ++ptr;
                    if (ptr % 2 == 1) grid.values[grid.index(ix, iy, iz)] = 1.0;
                }
            }
        }
    }
    return grid;
}

// ---- file formats ----------------------------------------------------------

void write_mesh(const LabeledMesh& mesh, std::ostream& os) {
    for (const auto& [id, name] : mesh.structures) {
        os << "structure " << id << ' ' << name << '\n';
    }
    for (const auto& p : mesh.vertices) {
        os << "v " << fmt_double(p.x) << ' ' << fmt_double(p.y) << ' '
           << fmt_double(p.z) << '\n';
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& v = mesh.faces[f].v;
        os << "f " << v[0] << ' ' << v[1] << ' ' << v[2] << ' ' << mesh.face_labels[f]
           << '\n';
    }
}

LabeledMesh read_mesh(std::istream& is) {
    LabeledMesh mesh;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "structure") {
            int id;
            std::string name;
            if (!(ss >> id >> name)) throw IoError("bad structure line: " + line);
            mesh.structures[id] = name;
        } else if (tag == "v") {
            Point3 p;
            if (!(ss >> p.x >> p.y >> p.z)) throw IoError("bad vertex line: " + line);
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            Face f{};
            int label;
            if (!(ss >> f.v[0] >> f.v[1] >> f.v[2] >> label)) {
                throw IoError("bad face line: " + line);
            }
            mesh.faces.push_back(f);
            mesh.face_labels.push_back(label);
        } else {
            throw IoError("unknown mesh line tag: " + tag);
        }
    }
    mesh.validate();
    return mesh;
}

void save_mesh(const LabeledMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_mesh(mesh, os);
    if (!os.good()) throw IoError("write failed: " + path);
}

LabeledMesh load_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return read_mesh(is);
}

void save_voxgrid(const VoxelGrid& grid, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "VOXGRID 1 " << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2]
       << ' ' << fmt_double(grid.bounds_min.x) << ' ' << fmt_double(grid.bounds_min.y)
       << ' ' << fmt_double(grid.bounds_min.z) << ' ' << fmt_double(grid.bounds_max.x)
       << ' ' << fmt_double(grid.bounds_max.y) << ' ' << fmt_double(grid.bounds_max.z)
       << '\n';
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        os << fmt_double(grid.values[i]);
        os << (((i + 1) % 32 == 0) ? '\n' : ' ');
    }
    os << '\n';
    if (!os.good()) throw IoError("write failed: " + path);
}

VoxelGrid load_voxgrid(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::string magic;
    int version;
    VoxelGrid g;
    is >> magic >> version;
    if (magic != "VOXGRID" || version != 1) throw IoError("bad voxgrid header in " + path);
    is >> g.dims[0] >> g.dims[1] >> g.dims[2] >> g.bounds_min.x >> g.bounds_min.y >>
        g.bounds_min.z >> g.bounds_max.x >> g.bounds_max.y >> g.bounds_max.z;
    if (!is) throw IoError("bad voxgrid header in " + path);
    const std::size_t n =
        static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
    g.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(is >> g.values[i])) throw IoError("truncated voxgrid data in " + path);
    }
    return g;
}

}  // namespace epivox::geom
