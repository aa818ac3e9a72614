#include "epivox/phantom.hpp"

#include <cmath>

#include "epivox/rng.hpp"

namespace epivox::geom {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

// Smooth low-frequency scalar field on the unit sphere, bounded to [-1, 1].
// Six random plane waves; draw order is fixed so phantoms are reproducible.
class RadialField {
public:
    RadialField() = default;
    explicit RadialField(Rng& rng) {
        double csum = 0.0;
        for (auto& w : waves_) {
            Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
            while (dir.norm() < 1e-6) dir = {rng.normal(), rng.normal(), rng.normal()};
            w.dir = dir.normalized();
            w.freq = rng.uniform(1.5, 3.5);
            w.coef = rng.uniform(-1.0, 1.0);
            w.phase = rng.uniform(0.0, 2.0 * kPi);
            csum += std::abs(w.coef);
        }
        inv_sum_ = 1.0 / std::max(csum, 1e-9);
        active_ = true;
    }

    double operator()(const Vec3& d) const {
        if (!active_) return 0.0;
        double s = 0.0;
        for (const auto& w : waves_) {
            s += w.coef * std::cos(w.freq * w.dir.dot(d) * kPi + w.phase);
        }
        return s * inv_sum_;
    }

private:
    struct Wave {
        Vec3 dir;
        double freq = 0, coef = 0, phase = 0;
    };
    std::array<Wave, 6> waves_{};
    double inv_sum_ = 0.0;
    bool active_ = false;
};

Vec3 sphere_dir(double theta, double phi) {
    const double st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

// radius of an axis-aligned ellipsoid along unit direction d
double ellipsoid_radius(const Vec3& semi, const Vec3& d) {
    const double q = (d.x / semi.x) * (d.x / semi.x) + (d.y / semi.y) * (d.y / semi.y) +
                     (d.z / semi.z) * (d.z / semi.z);
    return 1.0 / std::sqrt(q);
}

LabeledMesh make_ellipsoid_perturbed(const Point3& center, const Vec3& semi,
                                     int segments, int label, const std::string& name,
                                     double amplitude, const RadialField& field,
                                     Point3* apex_out = nullptr) {
    if (segments < 8 || segments % 2 != 0) {
        throw InvalidParams("ellipsoid segments must be even and >= 8");
    }
    const int nphi = segments;
    const int ntheta = segments / 2;
    // half-cell azimuth offset keeps meridians off the coordinate planes
    const double phi0 = kPi / nphi;

    LabeledMesh mesh;
    mesh.structures[label] = name;

    const auto place = [&](const Vec3& d) {
        const Vec3 radial{semi.x * d.x, semi.y * d.y, semi.z * d.z};
        return center + radial + d * (amplitude * field(d));
    };

    mesh.vertices.push_back(place({0, 0, 1}));  // north pole, index 0
    for (int i = 1; i < ntheta; ++i) {
        const double theta = kPi * i / ntheta;
        for (int j = 0; j < nphi; ++j) {
            mesh.vertices.push_back(place(sphere_dir(theta, phi0 + 2.0 * kPi * j / nphi)));
        }
    }
    const int south = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(place({0, 0, -1}));
    if (apex_out) *apex_out = mesh.vertices[south];  // -z pole is the LV apex side

    const auto ring = [&](int i, int j) { return 1 + (i - 1) * nphi + (j % nphi); };
    const auto add = [&](int a, int b, int c) {
        mesh.faces.push_back({{a, b, c}});
        mesh.face_labels.push_back(label);
    };
    for (int j = 0; j < nphi; ++j) add(0, ring(1, j), ring(1, j + 1));
    for (int i = 1; i < ntheta - 1; ++i) {
        for (int j = 0; j < nphi; ++j) {
            const int a = ring(i, j), b = ring(i, j + 1);
            const int c = ring(i + 1, j + 1), d = ring(i + 1, j);
            add(b, a, d);
            add(b, d, c);
        }
    }
    for (int j = 0; j < nphi; ++j) add(south, ring(ntheta - 1, j + 1), ring(ntheta - 1, j));
    return mesh;
}

// Curved-slab solid between two ellipsoidal patches: the RV free wall wrapped
// around the LV epicardium. One closed surface (outer patch + inner patch +
// rim band around the shared rectangular boundary).
LabeledMesh make_crescent_shell(const Point3& around_center, const Vec3& around_semi,
                                double gap, double thickness, double theta_lo,
                                double theta_hi, double phi_lo, double phi_hi,
                                int label, const std::string& name, Point3* center_out) {
    const int nu = 24;  // theta samples
    const int nv = 18;  // phi samples

    LabeledMesh mesh;
    mesh.structures[label] = name;

    const auto dir_at = [&](int i, int j) {
        const double theta = theta_lo + (theta_hi - theta_lo) * i / (nu - 1);
        const double phi = phi_lo + (phi_hi - phi_lo) * j / (nv - 1);
        return sphere_dir(theta, phi);
    };
    // inner sheet hugs the reference ellipsoid at `gap`; outer adds thickness
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const Vec3 d = dir_at(i, j);
            const double r_in = ellipsoid_radius(around_semi, d) + gap;
            mesh.vertices.push_back(around_center + d * r_in);
        }
    }
    const int outer0 = nu * nv;
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const Vec3 d = dir_at(i, j);
            const double r_in = ellipsoid_radius(around_semi, d) + gap;
            mesh.vertices.push_back(around_center + d * (r_in + thickness));
        }
    }
    const auto inner = [&](int i, int j) { return i * nv + j; };
    const auto outer = [&](int i, int j) { return outer0 + i * nv + j; };
    const auto add = [&](int a, int b, int c) {
        mesh.faces.push_back({{a, b, c}});
        mesh.face_labels.push_back(label);
    };
    for (int i = 0; i + 1 < nu; ++i) {
        for (int j = 0; j + 1 < nv; ++j) {
            // outer sheet faces out (+radial), inner sheet faces in (-radial)
            add(outer(i, j), outer(i + 1, j), outer(i + 1, j + 1));
            add(outer(i, j), outer(i + 1, j + 1), outer(i, j + 1));
            add(inner(i, j), inner(i + 1, j + 1), inner(i + 1, j));
            add(inner(i, j), inner(i, j + 1), inner(i + 1, j + 1));
        }
    }
    // rim band: stitch the four boundary edges, keeping outward orientation
    // (each rim face traverses its shared sheet edge opposite to the sheet)
    for (int j = 0; j + 1 < nv; ++j) {
        add(inner(0, j), outer(0, j), outer(0, j + 1));
        add(inner(0, j), outer(0, j + 1), inner(0, j + 1));
        add(inner(nu - 1, j), inner(nu - 1, j + 1), outer(nu - 1, j + 1));
        add(inner(nu - 1, j), outer(nu - 1, j + 1), outer(nu - 1, j));
    }
    for (int i = 0; i + 1 < nu; ++i) {
        add(inner(i, 0), inner(i + 1, 0), outer(i + 1, 0));
        add(inner(i, 0), outer(i + 1, 0), outer(i, 0));
        add(inner(i, nv - 1), outer(i, nv - 1), outer(i + 1, nv - 1));
        add(inner(i, nv - 1), outer(i + 1, nv - 1), inner(i + 1, nv - 1));
    }
    if (center_out) {
        const Vec3 d = dir_at(nu / 2, nv / 2);
        const double r = ellipsoid_radius(around_semi, d) + gap + 0.5 * thickness;
        *center_out = around_center + d * r;
    }
    return mesh;
}

}  // namespace

LabeledMesh make_ellipsoid(const Point3& center, const Vec3& semi_axes, int segments,
                           int label, const std::string& name) {
    return make_ellipsoid_perturbed(center, semi_axes, segments, label, name, 0.0,
                                    RadialField{});
}

void append_mesh(LabeledMesh& dst, const LabeledMesh& src) {
    const int base = static_cast<int>(dst.vertices.size());
    dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
    for (const auto& f : src.faces) {
        dst.faces.push_back({{f.v[0] + base, f.v[1] + base, f.v[2] + base}});
    }
    dst.face_labels.insert(dst.face_labels.end(), src.face_labels.begin(),
                           src.face_labels.end());
    for (const auto& [id, name] : src.structures) {
        const auto it = dst.structures.find(id);
        if (it != dst.structures.end() && it->second != name) {
            throw InvalidParams("conflicting structure name for id " + std::to_string(id));
        }
        dst.structures[id] = name;
    }
}

void PhantomParams::validate() const {
    if (lv_wall_thickness <= 0 || lv_apex_thickness <= 0 || valve_thickness <= 0) {
        throw InvalidParams("phantom thickness parameters must be positive");
    }
    if (lv_endo_radius <= 0 || lv_endo_length <= 0 || atrium_radius <= 0 ||
        valve_radius <= 0 || rv_scale <= 0) {
        throw InvalidParams("phantom size parameters must be positive");
    }
    if (lv_apex_thickness >= lv_wall_thickness) {
        throw InvalidParams("apex thickness must be below lateral wall thickness");
    }
    if (perturb_amplitude < 0) {
        throw InvalidParams("perturbation amplitude must be non-negative");
    }
    if (perturb_amplitude >= 0.45 * lv_apex_thickness) {
        throw InvalidParams("perturbation amplitude would self-intersect the LV wall");
    }
    if (mesh_segments < 8 || mesh_segments % 2 != 0) {
        throw InvalidParams("mesh_segments must be even and >= 8");
    }
}

std::pair<LabeledMesh, LandmarkSet> generate_phantom(const PhantomParams& p,
                                                     std::uint64_t seed) {
    p.validate();
    Rng rng(seed);

    const double L = p.lv_endo_length;
    const double r = p.lv_endo_radius;
    const double w = p.lv_wall_thickness;
    const double a = p.lv_apex_thickness;
    const double A = p.perturb_amplitude;

    LabeledMesh heart;
    heart.structures[structure_id::WholeHeart] = "WholeHeart";
    LandmarkSet lm;

    // chambers are perturbed, valve annuli and the RV shell stay exact;
    // the perturbation fields are drawn in a fixed order
    const RadialField f_endo(rng);
    const RadialField f_epi(rng);
    const RadialField f_la(rng);
    const RadialField f_ra(rng);

    // LV: endocardial spheroid at the origin, epicardial spheroid shifted
    // toward the base so the wall is thinnest at the apex (-z pole)
    Point3 apex;
    append_mesh(heart, make_ellipsoid_perturbed({0, 0, 0}, {r, r, L}, p.mesh_segments,
                                                structure_id::LV_endo, "LV_endo", A,
                                                f_endo, &apex));
    append_mesh(heart, make_ellipsoid_perturbed({0, 0, w - a}, {r + w, r + w, L + w},
                                                p.mesh_segments, structure_id::LV_epi,
                                                "LV_epi", A, f_epi));
    lm.set(landmarks::LV_apex, apex);

    // RV free wall wraps the LV epicardium on its +y side
    Point3 rv_center;
    append_mesh(heart,
                make_crescent_shell({0, 0, w - a}, {r + w, r + w, L + w}, 1.5,
                                    4.0 * p.rv_scale, 25.0 * kPi / 180.0,
                                    150.0 * kPi / 180.0, 20.0 * kPi / 180.0,
                                    160.0 * kPi / 180.0, structure_id::RV, "RV",
                                    &rv_center));
    lm.set(landmarks::RV_center, rv_center);

    // atria above the base
    const Point3 la_center{0, 0.3 * r, 1.71 * L};
    const Point3 ra_center{-0.2 * r, 1.5 * r, 1.49 * L};
    const double ar = p.atrium_radius;
    append_mesh(heart, make_ellipsoid_perturbed(la_center, {ar, ar, 0.85 * ar},
                                                p.mesh_segments, structure_id::LA, "LA",
                                                0.6 * A, f_la));
    append_mesh(heart, make_ellipsoid_perturbed(ra_center, {0.92 * ar, 0.92 * ar,
                                                            0.78 * ar},
                                                p.mesh_segments, structure_id::RA, "RA",
                                                0.6 * A, f_ra));
    lm.set(landmarks::LA_center, la_center);
    lm.set(landmarks::RA_center, ra_center);

    // valve annuli: thin discs; MV and AV sit inside the LV cavity
    const double vt = 0.5 * p.valve_thickness;
    const int vseg = 16;
    const Point3 mv{0, 0.2 * r, 0.8 * L};
    const Point3 av{0.35 * r, -0.15 * r, 0.74 * L};
    const Point3 pv{0.9 * r, 1.0 * r, 1.31 * L};
    const Point3 tv{-0.3 * r, 1.7 * r, 1.14 * L};
    append_mesh(heart, make_ellipsoid(mv, {p.valve_radius, p.valve_radius, vt}, vseg,
                                      structure_id::MV, "MV"));
    append_mesh(heart, make_ellipsoid(av, {0.75 * p.valve_radius, 0.75 * p.valve_radius,
                                           vt},
                                      vseg, structure_id::AV, "AV"));
    append_mesh(heart, make_ellipsoid(pv, {0.7 * p.valve_radius, 0.7 * p.valve_radius,
                                           vt},
                                      vseg, structure_id::PV, "PV"));
    append_mesh(heart, make_ellipsoid(tv, {0.85 * p.valve_radius, 0.85 * p.valve_radius,
                                           vt},
                                      vseg, structure_id::TV, "TV"));
    lm.set(landmarks::MV_center, mv);
    lm.set(landmarks::AV_center, av);
    lm.set(landmarks::PV_center, pv);

    heart.validate();
    return {std::move(heart), std::move(lm)};
}

}  // namespace epivox::geom
