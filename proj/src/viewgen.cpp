#include "epivox/viewgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "epivox/rng.hpp"

namespace epivox::viewgen {

using geom::CrossSection;
using geom::LandmarkSet;
using geom::ViewPlane;

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;
}

// ---- view catalog ------------------------------------------------------
// Landmark recipes per view. The three PSAX planes are short-axis recipes on
// the MV_center -> LV_apex axis at basal/mid/apical levels.

const std::vector<StandardView>& all_views() {
    static const std::vector<StandardView> views = {
        StandardView::RV_inflow, StandardView::PLAX,      StandardView::PSAX_AV,
        StandardView::PSAX_MV,   StandardView::PSAX_PM,   StandardView::PSAX_apex,
        StandardView::A4C,       StandardView::A5C,       StandardView::A2C,
    };
    return views;
}

std::string view_name(StandardView v) {
    switch (v) {
        case StandardView::RV_inflow: return "rv_inflow";
        case StandardView::PLAX: return "plax";
        case StandardView::PSAX_AV: return "psax_av";
        case StandardView::PSAX_MV: return "psax_mv";
        case StandardView::PSAX_PM: return "psax_pm";
        case StandardView::PSAX_apex: return "psax_apex";
        case StandardView::A4C: return "a4c";
        case StandardView::A5C: return "a5c";
        case StandardView::A2C: return "a2c";
    }
    throw InvalidParams("unknown view enum value");
}

StandardView view_from_name(const std::string& name) {
    for (const auto v : all_views()) {
        if (view_name(v) == name) return v;
    }
    throw InvalidParams("unknown view name: " + name);
}

const ViewRecipe& view_recipe(StandardView v) {
    namespace lk = geom::landmarks;
    static const ViewRecipe rv_inflow{false, {lk::RV_center, lk::RA_center, lk::PV_center}, 0};
    static const ViewRecipe plax{false, {lk::LV_apex, lk::MV_center, lk::AV_center}, 0};
    static const ViewRecipe psax_av{false, {lk::LA_center, lk::RA_center, lk::AV_center}, 0};
    static const ViewRecipe psax_mv{true, {nullptr, nullptr, nullptr}, 0.2};
    static const ViewRecipe psax_pm{true, {nullptr, nullptr, nullptr}, 0.5};
    static const ViewRecipe psax_apex{true, {nullptr, nullptr, nullptr}, 0.8};
    static const ViewRecipe a4c{false, {lk::LA_center, lk::RA_center, lk::LV_apex}, 0};
    static const ViewRecipe a5c{false, {lk::LA_center, lk::AV_center, lk::LV_apex}, 0};
    static const ViewRecipe a2c{false, {lk::LV_apex, lk::MV_center, lk::RV_center}, 0};
    switch (v) {
        case StandardView::RV_inflow: return rv_inflow;
        case StandardView::PLAX: return plax;
        case StandardView::PSAX_AV: return psax_av;
        case StandardView::PSAX_MV: return psax_mv;
        case StandardView::PSAX_PM: return psax_pm;
        case StandardView::PSAX_apex: return psax_apex;
        case StandardView::A4C: return a4c;
        case StandardView::A5C: return a5c;
        case StandardView::A2C: return a2c;
    }
    throw InvalidParams("unknown view enum value");
}

ViewPlane standard_view_plane(StandardView view, const LandmarkSet& lm) {
    const ViewRecipe& r = view_recipe(view);
    if (r.axis_based) {
        return geom::plane_from_axis(lm.at(geom::landmarks::MV_center),
                                     lm.at(geom::landmarks::LV_apex), r.level);
    }
    return geom::plane_from_points(lm.at(r.landmarks[0]), lm.at(r.landmarks[1]),
                                   lm.at(r.landmarks[2]));
}

// ---- rasterization -----------------------------------------------------

std::size_t MaskImage::count_nonzero() const {
    std::size_t n = 0;
    for (const auto p : pixels) n += p != 0;
    return n;
}

MaskImage rasterize_section(const CrossSection& section, int width, int height,
                            double mm_per_pixel, std::array<double, 2> center) {
    if (width < 1 || height < 1) throw InvalidParams("raster dims must be positive");
    if (!(mm_per_pixel > 0)) throw InvalidParams("mm_per_pixel must be positive");

    MaskImage img;
    img.width = width;
    img.height = height;
    img.mm_per_pixel = mm_per_pixel;
    img.pixels.assign(static_cast<std::size_t>(width) * height, 0);

    // scanline even-odd across all loops; half-open vertex rule avoids double
    // counting when a scanline passes through a loop vertex
    std::vector<double> crossings;
    for (int iy = 0; iy < height; ++iy) {
        const double v = center[1] + (iy + 0.5 - height / 2.0) * mm_per_pixel;
        crossings.clear();
        for (const auto& loop : section.polylines) {
            const std::size_t n = loop.size();
            for (std::size_t i = 0; i < n; ++i) {
                const auto& p = loop[i];
                const auto& q = loop[(i + 1) % n];
                if ((p[1] > v) == (q[1] > v)) continue;
                crossings.push_back(p[0] + (q[0] - p[0]) * (v - p[1]) / (q[1] - p[1]));
            }
        }
        std::sort(crossings.begin(), crossings.end());
        std::size_t ptr = 0;
        for (int ix = 0; ix < width; ++ix) {
            const double u = center[0] + (ix + 0.5 - width / 2.0) * mm_per_pixel;
            while (ptr < crossings.size() && crossings[ptr] < u) ++ptr;
            if (ptr % 2 == 1) img.pixels[static_cast<std::size_t>(iy) * width + ix] = 1;
        }
    }
    return img;
}

// ---- pseudo ultrasound ---------------------------------------------------

std::vector<double> gaussian_noise_field(int width, int height, double std_dev,
                                         std::uint64_t seed) {
    std::vector<double> field(static_cast<std::size_t>(width) * height, 0.0);
    if (std_dev <= 0) return field;
    Rng rng(seed);
    for (auto& v : field) v = std_dev * rng.normal();
    return field;
}

std::vector<double> gaussian_kernel(double sigma, int size) {
    if (size < 1 || size % 2 == 0) {
        throw BadKernel("gaussian kernel size must be odd and >= 1");
    }
    std::vector<double> k(size, 0.0);
    if (size == 1 || sigma <= 0) {
        k[size / 2] = 1.0;
        return k;
    }
    const int c = size / 2;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += k[i];
    }
    for (auto& v : k) v /= total;
    return k;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma, int size) {
    const std::vector<double> k = gaussian_kernel(sigma, size);
    const int c = size / 2;
    GrayImage tmp = img, out = img;
    // horizontal pass, edge-clamped
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < size; ++i) {
                const int xx = std::clamp(x + i - c, 0, img.width - 1);
                acc += k[i] * img.pixels[static_cast<std::size_t>(y) * img.width + xx];
            }
            tmp.pixels[static_cast<std::size_t>(y) * img.width + x] = acc;
        }
    }
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < size; ++i) {
                const int yy = std::clamp(y + i - c, 0, img.height - 1);
                acc += k[i] * tmp.pixels[static_cast<std::size_t>(yy) * img.width + x];
            }
            out.pixels[static_cast<std::size_t>(y) * img.width + x] = acc;
        }
    }
    return out;
}

bool inside_cone(const PseudoUsParams& p, double px, double py) {
    const double dx = px - p.cone_apex_x;
    const double dy = py - p.cone_apex_y;
    const double dist = std::hypot(dx, dy);
    if (dist < p.cone_min_radius || dist > p.cone_max_radius) return false;
    if (dist == 0.0) return false;
    // sector opens along +y (downward in image coordinates)
    const double cos_angle = dy / dist;
    return cos_angle >= std::cos(p.cone_half_angle_deg * kPi / 180.0);
}

GrayImage pseudo_us(const MaskImage& mask, const PseudoUsParams& p) {
    if (p.blur_kernel_size < 1 || p.blur_kernel_size % 2 == 0) {
        throw BadKernel("blur kernel size must be odd and >= 1");
    }
    if (p.noise_std < 0) throw InvalidParams("noise_std must be >= 0");
    if (!(p.cone_half_angle_deg > 0 && p.cone_half_angle_deg < 90)) {
        throw InvalidParams("cone half-angle must be in (0, 90) degrees");
    }

    GrayImage img;
    img.width = mask.width;
    img.height = mask.height;
    img.mm_per_pixel = mask.mm_per_pixel;
    img.pixels.resize(mask.pixels.size());
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
        img.pixels[i] = p.background_level + p.tissue_gain * mask.pixels[i];
    }

    const auto noise = gaussian_noise_field(img.width, img.height, p.noise_std, p.seed);
    const auto add_noise = [&] {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] += noise[i];
    };
    if (p.order == NoiseOrder::NoiseThenBlur) {
        add_noise();
        img = gaussian_blur(img, p.blur_sigma, p.blur_kernel_size);
    } else {
        img = gaussian_blur(img, p.blur_sigma, p.blur_kernel_size);
        add_noise();
    }

    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            if (p.cone_enabled && !inside_cone(p, x + 0.5, y + 0.5)) {
                img.pixels[i] = 0.0;
            } else {
                img.pixels[i] = std::clamp(img.pixels[i], 0.0, 1.0);
            }
        }
    }
    return img;
}

// ---- view pipeline ---------------------------------------------------------

std::vector<ViewImages> build_view_set(const geom::LabeledMesh& mesh,
                                       const LandmarkSet& lm,
                                       const std::vector<StandardView>& views,
                                       const RasterParams& raster,
                                       const std::optional<PseudoUsParams>& us) {
    if (views.empty()) throw InvalidParams("build_view_set: no views requested");
    std::vector<ViewImages> out;
    out.reserve(views.size());
    for (const auto view : views) {
        try {
            const ViewPlane plane = standard_view_plane(view, lm);
            const CrossSection section =
                geom::slice_mesh(mesh, plane, {geom::LabeledMesh::kWholeHeart});
            std::array<double, 2> center = raster.center;
            if (raster.auto_center && !section.empty()) {
                double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
                for (const auto& loop : section.polylines) {
                    for (const auto& p : loop) {
                        ulo = std::min(ulo, p[0]); uhi = std::max(uhi, p[0]);
                        vlo = std::min(vlo, p[1]); vhi = std::max(vhi, p[1]);
                    }
                }
                center = {(ulo + uhi) / 2.0, (vlo + vhi) / 2.0};
            }
            ViewImages result;
            result.view = view;
            result.mask = rasterize_section(section, raster.width, raster.height,
                                            raster.mm_per_pixel, center);
            if (us) {
                PseudoUsParams params = *us;
                params.seed = derive_seed(us->seed, hash_name(view_name(view)));
                result.pseudo = pseudo_us(result.mask, params);
            }
            out.push_back(std::move(result));
        } catch (const Error& e) {
            throw Error(e.kind(), "view " + view_name(view) + ": " + e.what());
        }
    }
    return out;
}

// ---- PGM I/O ---------------------------------------------------------------

namespace {

void write_pgm(std::ostream& os, int width, int height, double mm_per_pixel,
               const std::vector<std::uint8_t>& bytes, bool binary) {
    char comment[64];
    std::snprintf(comment, sizeof(comment), "# mm_per_pixel %.17g", mm_per_pixel);
    os << (binary ? "P5" : "P2") << '\n' << comment << '\n'
       << width << ' ' << height << "\n255\n";
    if (binary) {
        os.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    } else {
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            os << static_cast<int>(bytes[i])
               << (((i + 1) % width == 0) ? '\n' : ' ');
        }
    }
}

struct PgmData {
    int width, height, maxval;
    bool binary;
    double mm_per_pixel = 1.0;
    std::vector<int> values;
};

PgmData read_pgm(std::istream& is, const std::string& path) {
    PgmData d;
    std::string magic;
    is >> magic;
    if (magic == "P5") d.binary = true;
    else if (magic == "P2") d.binary = false;
    else throw IoError("not a PGM file: " + path);

    // header tokens with interleaved comments; a comment may carry mm_per_pixel
    int fields[3];
    int have = 0;
    std::string tok;
    while (have < 3 && is >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(is, rest);
            std::istringstream cs(tok.substr(1) + rest);
            std::string key;
            double val;
            if (cs >> key >> val && key == "mm_per_pixel") d.mm_per_pixel = val;
            continue;
        }
        fields[have++] = std::stoi(tok);
    }
    // handle "# mm_per_pixel" where '#' is its own token
    if (have < 3) throw IoError("truncated PGM header: " + path);
    d.width = fields[0];
    d.height = fields[1];
    d.maxval = fields[2];
    if (d.width < 1 || d.height < 1 || d.maxval < 1 || d.maxval > 255) {
        throw IoError("unsupported PGM header in " + path);
    }
    const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
    d.values.resize(n);
    if (d.binary) {
        is.get();  // single whitespace after maxval
        std::vector<std::uint8_t> raw(n);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (!is) throw IoError("truncated PGM payload: " + path);
        for (std::size_t i = 0; i < n; ++i) d.values[i] = raw[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            if (!(is >> d.values[i])) throw IoError("truncated PGM payload: " + path);
        }
    }
    return d;
}

}  // namespace

void save_pgm(const MaskImage& img, const std::string& path, bool binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = img.pixels[i] ? 255 : 0;
    write_pgm(os, img.width, img.height, img.mm_per_pixel, bytes, binary);
    if (!os.good()) throw IoError("write failed: " + path);
}

void save_pgm(const GrayImage& img, const std::string& path, bool binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(
            std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
    }
    write_pgm(os, img.width, img.height, img.mm_per_pixel, bytes, binary);
    if (!os.good()) throw IoError("write failed: " + path);
}

GrayImage load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    const PgmData d = read_pgm(is, path);
    GrayImage img;
    img.width = d.width;
    img.height = d.height;
    img.mm_per_pixel = d.mm_per_pixel;
    img.pixels.resize(d.values.size());
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        img.pixels[i] = static_cast<double>(d.values[i]) / d.maxval;
    }
    return img;
}

MaskImage load_pgm_mask(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    const PgmData d = read_pgm(is, path);
    MaskImage img;
    img.width = d.width;
    img.height = d.height;
    img.mm_per_pixel = d.mm_per_pixel;
    img.pixels.resize(d.values.size());
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        img.pixels[i] = d.values[i] ? 1 : 0;
    }
    return img;
}

}  // namespace epivox::viewgen
