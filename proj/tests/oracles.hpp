#pragma once

// Test-side reference implementations, kept independent of the library code
// paths they check.

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "epivox/geometry.hpp"
#include "epivox/tensor.hpp"
#include "epivox/viewgen.hpp"

namespace oracle {

// ---- point-in-polyhedron by winding number (Van Oosterom & Strackee) --------

inline double solid_angle(const epivox::geom::Vec3& a, const epivox::geom::Vec3& b,
                          const epivox::geom::Vec3& c) {
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double det = a.dot(b.cross(c));
    const double denom =
        la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    return 2.0 * std::atan2(det, denom);
}

inline bool inside_structure(const epivox::geom::LabeledMesh& mesh, int label,
                             const epivox::geom::Point3& p) {
    double w = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        if (mesh.face_labels[f] != label) continue;
        const auto& v = mesh.faces[f].v;
        w += solid_angle(mesh.vertices[v[0]] - p, mesh.vertices[v[1]] - p,
                         mesh.vertices[v[2]] - p);
    }
    return std::abs(w) > 2.0 * 3.14159265358979323846;  // |winding| > 1/2
}

inline bool inside_union(const epivox::geom::LabeledMesh& mesh,
                         const std::set<int>& labels, const epivox::geom::Point3& p) {
    for (const int label : labels) {
        if (inside_structure(mesh, label, p)) return true;
    }
    return false;
}

// ---- instrumented naive layers -------------------------------------------
// Plain loops that count every multiply; shared by the MAC-accounting checks
// and the convolution correctness checks.

struct Counted {
    epivox::ad::Tensor value;
    std::uint64_t multiplies = 0;
};

inline Counted naive_conv2d(const epivox::ad::Tensor& x, const epivox::ad::Tensor& w,
                            const epivox::ad::Tensor& b, int s, int p) {
    using epivox::ad::Tensor;
    const auto ci = x.shape[0], h = x.shape[1], ww = x.shape[2];
    const auto co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    const auto oh = (h + 2 * p - kh) / s + 1;
    const auto ow = (ww + 2 * p - kw) / s + 1;
    Counted out{Tensor::zeros({co, oh, ow}), 0};
    for (std::int64_t o = 0; o < co; ++o) {
        for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t z = 0; z < ow; ++z) {
                double acc = b.numel() ? b.data[o] : 0.0;
                for (std::int64_t c = 0; c < ci; ++c) {
                    for (std::int64_t a = 0; a < kh; ++a) {
                        for (std::int64_t d = 0; d < kw; ++d) {
                            const auto iy = y * s - p + a;
                            const auto iz = z * s - p + d;
                            if (iy < 0 || iy >= h || iz < 0 || iz >= ww) continue;
                            acc += x.data[(c * h + iy) * ww + iz] *
                                   w.data[((o * ci + c) * kh + a) * kw + d];
                            ++out.multiplies;
                        }
                    }
                }
                out.value.data[(o * oh + y) * ow + z] = acc;
            }
        }
    }
    return out;
}

inline Counted naive_conv3d(const epivox::ad::Tensor& x, const epivox::ad::Tensor& w,
                            const epivox::ad::Tensor& b, std::array<int, 3> s,
                            std::array<int, 3> p) {
    using epivox::ad::Tensor;
    const auto ci = x.shape[0], dd = x.shape[1], hh = x.shape[2], ww = x.shape[3];
    const auto co = w.shape[0], kd = w.shape[2], kh = w.shape[3], kw = w.shape[4];
    const auto od = (dd + 2 * p[0] - kd) / s[0] + 1;
    const auto oh = (hh + 2 * p[1] - kh) / s[1] + 1;
    const auto ow = (ww + 2 * p[2] - kw) / s[2] + 1;
    Counted out{Tensor::zeros({co, od, oh, ow}), 0};
    for (std::int64_t o = 0; o < co; ++o) {
        for (std::int64_t zd = 0; zd < od; ++zd) {
            for (std::int64_t zh = 0; zh < oh; ++zh) {
                for (std::int64_t zw = 0; zw < ow; ++zw) {
                    double acc = b.numel() ? b.data[o] : 0.0;
                    for (std::int64_t c = 0; c < ci; ++c) {
                        for (std::int64_t a = 0; a < kd; ++a) {
                            for (std::int64_t e = 0; e < kh; ++e) {
                                for (std::int64_t f = 0; f < kw; ++f) {
                                    const auto id = zd * s[0] - p[0] + a;
                                    const auto ih = zh * s[1] - p[1] + e;
                                    const auto iw = zw * s[2] - p[2] + f;
                                    if (id < 0 || id >= dd || ih < 0 || ih >= hh ||
                                        iw < 0 || iw >= ww) {
                                        continue;
                                    }
                                    acc += x.data[((c * dd + id) * hh + ih) * ww + iw] *
                                           w.data[(((o * ci + c) * kd + a) * kh + e) *
                                                      kw + f];
                                    ++out.multiplies;
                                }
                            }
                        }
                    }
                    out.value.data[((o * od + zd) * oh + zh) * ow + zw] = acc;
                }
            }
        }
    }
    return out;
}

inline Counted naive_conv_transpose3d(const epivox::ad::Tensor& x,
                                      const epivox::ad::Tensor& w,
                                      const epivox::ad::Tensor& b, std::array<int, 3> s,
                                      std::array<int, 3> p) {
    using epivox::ad::Tensor;
    const auto ci = x.shape[0], dd = x.shape[1], hh = x.shape[2], ww = x.shape[3];
    const auto co = w.shape[1], kd = w.shape[2], kh = w.shape[3], kw = w.shape[4];
    const auto od = (dd - 1) * s[0] - 2 * p[0] + kd;
    const auto oh = (hh - 1) * s[1] - 2 * p[1] + kh;
    const auto ow = (ww - 1) * s[2] - 2 * p[2] + kw;
    Counted out{Tensor::zeros({co, od, oh, ow}), 0};
    if (b.numel()) {
        for (std::int64_t o = 0; o < co; ++o) {
            for (std::int64_t i = 0; i < od * oh * ow; ++i) {
                out.value.data[o * od * oh * ow + i] = b.data[o];
            }
        }
    }
    for (std::int64_t c = 0; c < ci; ++c) {
        for (std::int64_t id = 0; id < dd; ++id) {
            for (std::int64_t ih = 0; ih < hh; ++ih) {
                for (std::int64_t iw = 0; iw < ww; ++iw) {
                    const double v = x.data[((c * dd + id) * hh + ih) * ww + iw];
                    for (std::int64_t o = 0; o < co; ++o) {
                        for (std::int64_t a = 0; a < kd; ++a) {
                            const auto zd = id * s[0] - p[0] + a;
                            if (zd < 0 || zd >= od) continue;
                            for (std::int64_t e = 0; e < kh; ++e) {
                                const auto zh = ih * s[1] - p[1] + e;
                                if (zh < 0 || zh >= oh) continue;
                                for (std::int64_t f = 0; f < kw; ++f) {
                                    const auto zw = iw * s[2] - p[2] + f;
                                    if (zw < 0 || zw >= ow) continue;
                                    out.value.data[((o * od + zd) * oh + zh) * ow + zw] +=
                                        v * w.data[(((c * co + o) * kd + a) * kh + e) *
                                                       kw + f];
                                    ++out.multiplies;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

inline std::uint64_t naive_fc_multiplies(std::int64_t in, std::int64_t out) {
    std::uint64_t n = 0;
    for (std::int64_t o = 0; o < out; ++o) {
        for (std::int64_t i = 0; i < in; ++i) ++n;
    }
    return n;
}

// window elements visited per output, matching op_count's definition
inline std::uint64_t naive_maxpool_visits(std::int64_t c, std::int64_t h,
                                          std::int64_t w, int win, int s) {
    const auto oh = (h - win) / s + 1;
    const auto ow = (w - win) / s + 1;
    std::uint64_t n = 0;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t x = 0; x < ow; ++x) {
                for (int a = 0; a < win; ++a) {
                    for (int b = 0; b < win; ++b) ++n;
                }
            }
        }
    }
    return n;
}

// ---- naive full-kernel blur + composition for the pseudo-US check --------

inline epivox::viewgen::GrayImage naive_blur2d(const epivox::viewgen::GrayImage& img,
                                               double sigma, int size) {
    const auto k1 = epivox::viewgen::gaussian_kernel(sigma, size);
    epivox::viewgen::GrayImage out = img;
    const int c = size / 2;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int a = 0; a < size; ++a) {
                for (int b = 0; b < size; ++b) {
                    const int yy = std::min(std::max(y + a - c, 0), img.height - 1);
                    const int xx = std::min(std::max(x + b - c, 0), img.width - 1);
                    acc += k1[a] * k1[b] *
                           img.pixels[static_cast<std::size_t>(yy) * img.width + xx];
                }
            }
            out.pixels[static_cast<std::size_t>(y) * img.width + x] = acc;
        }
    }
    return out;
}

}  // namespace oracle
