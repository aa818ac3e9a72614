#include "epivox/reconnet.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "epivox/rng.hpp"

namespace epivox::net {

using ad::Tensor;
using nlohmann::json;

std::string family_name(Family f) {
    return f == Family::baseline ? "baseline" : "efficient";
}

std::string tier_name(Tier t) { return t == Tier::fast ? "fast" : "accurate"; }

Family family_from_name(const std::string& s) {
    if (s == "baseline") return Family::baseline;
    if (s == "efficient") return Family::efficient;
    throw InvalidSpec("unknown family: " + s);
}

Tier tier_from_name(const std::string& s) {
    if (s == "fast") return Tier::fast;
    if (s == "accurate") return Tier::accurate;
    throw InvalidSpec("unknown tier: " + s);
}

// ---- config ------------------------------------------------------------

void ModelConfig::validate() const {
    if (num_views < 1) throw InvalidSpec("num_views must be >= 1");
    if (tier == Tier::fast && refiner_enabled) {
        throw InvalidSpec("fast tier has no refiner");
    }
    if (static_cast<int>(encoder_channels.size()) != encoder_blocks()) {
        throw InvalidSpec("encoder_channels must list " +
                          std::to_string(encoder_blocks()) + " blocks for tier " +
                          tier_name(tier));
    }
    for (const int c : encoder_channels) {
        if (c < 1) throw InvalidSpec("encoder channel widths must be positive");
    }
    int s = image_size;
    for (int b = 0; b < encoder_blocks(); ++b) {
        if (s < 2 || s % 2 != 0) {
            throw InvalidSpec("image_size does not survive the encoder pooling");
        }
        s /= 2;
    }
    const std::int64_t feat = static_cast<std::int64_t>(encoder_channels.back()) * s * s;
    const std::int64_t lat = static_cast<std::int64_t>(latent[0]) * latent[1] *
                             latent[2] * latent[3];
    if (feat != lat) {
        throw InvalidSpec("encoder output elements (" + std::to_string(feat) +
                          ") must equal latent elements (" + std::to_string(lat) + ")");
    }
    if (latent[1] != latent[2] || latent[2] != latent[3]) {
        throw InvalidSpec("latent grid must be cubic");
    }
    if (decoder_channels.empty()) throw InvalidSpec("decoder needs at least one block");
    for (const int c : decoder_channels) {
        if (c < 1) throw InvalidSpec("decoder channel widths must be positive");
    }
    const int r = latent[1] << decoder_channels.size();
    if (r != resolution) {
        throw InvalidSpec("decoder blocks produce " + std::to_string(r) +
                          "^3, config says " + std::to_string(resolution) + "^3");
    }
    if (refiner_enabled) {
        if (resolution % 2 != 0 || resolution < 4) {
            throw InvalidSpec("refiner needs an even resolution >= 4");
        }
        if (refiner_channels < 1) throw InvalidSpec("refiner_channels must be positive");
    }
    if (scorer_hidden < 1) throw InvalidSpec("scorer_hidden must be positive");
}

ModelConfig ModelConfig::make_default(Family family, Tier tier, int num_views,
                                      int resolution) {
    ModelConfig cfg;
    cfg.family = family;
    cfg.tier = tier;
    cfg.num_views = num_views;
    cfg.image_size = 64;
    cfg.latent = {2, 4, 4, 4};
    cfg.refiner_enabled = tier == Tier::accurate;
    cfg.resolution = resolution;

    const int blocks = cfg.encoder_blocks();
    const int s = cfg.image_size >> blocks;
    const int c_out = static_cast<int>((2LL * 4 * 4 * 4) / (s * s));
    cfg.encoder_channels = tier == Tier::fast ? std::vector<int>{8, 16, c_out}
                                              : std::vector<int>{8, 16, 32, c_out};

    int up_blocks = 0;
    for (int r = cfg.latent[1]; r < resolution; r *= 2) ++up_blocks;
    if (up_blocks < 1) throw InvalidSpec("resolution must exceed the latent grid");
    std::vector<int> dec;
    int w = tier == Tier::fast ? (8 << up_blocks) / 2 : (16 << up_blocks) / 2;
    for (int b = 0; b < up_blocks; ++b) {
        dec.push_back(std::max(4, w));
        w /= 2;
    }
    cfg.decoder_channels = dec;
    cfg.validate();
    return cfg;
}

std::string ModelConfig::to_json() const {
    json j;
    j["family"] = family_name(family);
    j["tier"] = tier_name(tier);
    j["num_views"] = num_views;
    j["image_size"] = image_size;
    j["encoder_channels"] = encoder_channels;
    j["latent"] = latent;
    j["decoder_channels"] = decoder_channels;
    j["resolution"] = resolution;
    j["refiner_enabled"] = refiner_enabled;
    j["refiner_channels"] = refiner_channels;
    j["scorer_hidden"] = scorer_hidden;
    j["seed"] = seed;
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidSpec(std::string("model config is not valid JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.family = family_from_name(j.at("family").get<std::string>());
        cfg.tier = tier_from_name(j.at("tier").get<std::string>());
        cfg.num_views = j.at("num_views").get<int>();
        cfg.image_size = j.at("image_size").get<int>();
        cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
        const auto lat = j.at("latent").get<std::vector<int>>();
        if (lat.size() != 4) throw InvalidSpec("latent must have 4 entries");
        std::copy(lat.begin(), lat.end(), cfg.latent.begin());
        cfg.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
        cfg.resolution = j.at("resolution").get<int>();
        cfg.refiner_enabled = j.value("refiner_enabled", cfg.tier == Tier::accurate);
        cfg.refiner_channels = j.value("refiner_channels", 8);
        cfg.scorer_hidden = j.value("scorer_hidden", 4);
        cfg.seed = j.value("seed", std::uint64_t{1});
    } catch (const json::exception& e) {
        throw InvalidSpec(std::string("model config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ModelConfig ModelConfig::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

// ---- parameter construction ----------------------------------------------

namespace {

struct ParamDef {
    std::string name;
    ad::Shape shape;
    std::int64_t fan_in;
};

// every parameter tensor the config instantiates, in a fixed order
std::vector<ParamDef> param_defs(const ModelConfig& cfg) {
    std::vector<ParamDef> defs;
    const auto push = [&](const std::string& name, ad::Shape shape, std::int64_t fan) {
        defs.push_back({name, std::move(shape), fan});
    };

    std::int64_t in_ch = 1;
    for (std::size_t b = 0; b < cfg.encoder_channels.size(); ++b) {
        const std::int64_t out_ch = cfg.encoder_channels[b];
        const std::string base = "encoder/block" + std::to_string(b);
        push(base + "/w", {out_ch, in_ch, 3, 3}, in_ch * 9);
        push(base + "/b", {out_ch}, 0);
        in_ch = out_ch;
    }

    const std::int64_t cl = cfg.latent[0];
    if (cfg.family == Family::efficient) {
        push("viewfuse/w", {cl, cl, cfg.num_views, 3, 3}, cl * cfg.num_views * 9);
        push("viewfuse/b", {cl}, 0);
    }

    std::int64_t dc = cl;
    const std::int64_t k = cfg.deconv_kernel();
    for (std::size_t b = 0; b < cfg.decoder_channels.size(); ++b) {
        const std::int64_t out_ch = cfg.decoder_channels[b];
        const std::string base = "decoder/up" + std::to_string(b);
        push(base + "/w", {dc, out_ch, k, k, k}, dc * k * k * k);
        push(base + "/b", {out_ch}, 0);
        dc = out_ch;
    }
    push("decoder/head/w", {1, dc, 1, 1, 1}, dc);
    push("decoder/head/b", {1}, 0);

    if (cfg.family == Family::baseline) {
        const std::int64_t sh = cfg.scorer_hidden;
        push("scorer/c0/w", {sh, dc, 3, 3, 3}, dc * 27);
        push("scorer/c0/b", {sh}, 0);
        push("scorer/c1/w", {1, sh, 3, 3, 3}, sh * 27);
        push("scorer/c1/b", {1}, 0);
    }

    if (cfg.refiner_enabled) {
        const std::int64_t rc = cfg.refiner_channels;
        push("refiner/pre/w", {rc, 1, 3, 3, 3}, 27);
        push("refiner/pre/b", {rc}, 0);
        push("refiner/down/w", {rc, rc, 4, 4, 4}, rc * 64);
        push("refiner/down/b", {rc}, 0);
        push("refiner/up/w", {rc, rc, 4, 4, 4}, rc * 64);
        push("refiner/up/b", {rc}, 0);
        push("refiner/head/w", {1, rc, 3, 3, 3}, rc * 27);
        push("refiner/head/b", {1}, 0);
    }
    return defs;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams params;
    for (const auto& def : param_defs(cfg)) {
        Tensor t = Tensor::zeros(def.shape);
        if (def.name == "viewfuse/w") {
            // uniform averaging over views: identity channel map, center tap 1/V
            const std::int64_t cl = def.shape[0], v = def.shape[2];
            for (std::int64_t c = 0; c < cl; ++c) {
                for (std::int64_t vi = 0; vi < v; ++vi) {
                    t.data[(((c * cl + c) * v + vi) * 3 + 1) * 3 + 1] =
                        1.0 / static_cast<double>(v);
                }
            }
        } else if (def.name == "refiner/head/w") {
            // zero: the refiner starts as the identity
        } else if (def.fan_in > 0) {
            Rng rng(derive_seed(cfg.seed, hash_name(def.name)));
            const double bound = 1.0 / std::sqrt(static_cast<double>(def.fan_in));
            for (auto& v : t.data) v = rng.uniform(-bound, bound);
        }
        params.emplace(def.name, std::move(t));
    }
    return params;
}

// ---- network stages ------------------------------------------------------

namespace {

const Tensor& param(const ModelParams& params, const std::string& name) {
    const auto it = params.find(name);
    if (it == params.end()) throw InvalidSpec("missing parameter tensor: " + name);
    return it->second;
}

Tensor encode_one(const ModelConfig& cfg, const ModelParams& params, const Tensor& img,
                  ad::Tape* tape) {
    if (img.shape != ad::Shape{1, cfg.image_size, cfg.image_size}) {
        throw ShapeMismatch("encoder expects [1," + std::to_string(cfg.image_size) +
                            "," + std::to_string(cfg.image_size) + "] images, got " +
                            ad::shape_str(img.shape));
    }
    Tensor h = img;
    for (std::size_t b = 0; b < cfg.encoder_channels.size(); ++b) {
        const std::string base = "encoder/block" + std::to_string(b);
        h = ad::conv2d(h, param(params, base + "/w"), param(params, base + "/b"), 1, 1,
                       tape);
        h = ad::elu(h, 1.0, tape);
        h = ad::maxpool2d(h, 2, 2, tape);
    }
    return ad::reshape(h, {cfg.latent[0], cfg.latent[1], cfg.latent[2], cfg.latent[3]},
                       tape);
}

}  // namespace

std::vector<Tensor> encode_views(const ModelConfig& cfg, const ModelParams& params,
                                 const std::vector<Tensor>& images, ad::Tape* tape) {
    if (images.empty()) throw ShapeMismatch("encode_views: no images");
    std::vector<Tensor> latents;
    latents.reserve(images.size());
    for (const auto& img : images) latents.push_back(encode_one(cfg, params, img, tape));
    return latents;
}

Tensor fuse_views_efficient(const ModelConfig& cfg, const ModelParams& params,
                            const std::vector<Tensor>& latents, ad::Tape* tape) {
    if (cfg.family != Family::efficient) {
        throw InvalidSpec("view fusion belongs to the efficient family");
    }
    if (static_cast<int>(latents.size()) != cfg.num_views) {
        throw ViewCountMismatch("fusion kernel has depth " +
                                std::to_string(cfg.num_views) + ", got " +
                                std::to_string(latents.size()) + " latents");
    }
    Tensor stacked = ad::stack_views(latents, tape);  // [C, V, D*H, W]
    Tensor fused = ad::conv3d(stacked, param(params, "viewfuse/w"),
                              param(params, "viewfuse/b"), {1, 1, 1}, {0, 1, 1}, tape);
    return ad::reshape(fused, {cfg.latent[0], cfg.latent[1], cfg.latent[2],
                               cfg.latent[3]},
                       tape);
}

Decoded decode(const ModelConfig& cfg, const ModelParams& params, const Tensor& latent,
               ad::Tape* tape) {
    const ad::Shape want{cfg.latent[0], cfg.latent[1], cfg.latent[2], cfg.latent[3]};
    if (latent.shape != want) {
        throw ShapeMismatch("decode expects latent " + ad::shape_str(want) + ", got " +
                            ad::shape_str(latent.shape));
    }
    const int k = cfg.deconv_kernel();
    const int p = cfg.deconv_padding();
    Tensor h = latent;
    for (std::size_t b = 0; b < cfg.decoder_channels.size(); ++b) {
        const std::string base = "decoder/up" + std::to_string(b);
        h = ad::conv_transpose3d(h, param(params, base + "/w"),
                                 param(params, base + "/b"), {2, 2, 2}, {p, p, p}, tape);
        h = ad::elu(h, 1.0, tape);
    }
    Tensor logits = ad::conv3d(h, param(params, "decoder/head/w"),
                               param(params, "decoder/head/b"), {1, 1, 1}, {0, 0, 0},
                               tape);
    const int r = cfg.resolution;
    Decoded out;
    out.volume = ad::reshape(ad::sigmoid(logits, tape), {r, r, r}, tape);
    out.features = h;
    return out;
}

Tensor score_map(const ModelConfig& cfg, const ModelParams& params,
                 const Tensor& features, ad::Tape* tape) {
    if (cfg.family != Family::baseline) {
        throw InvalidSpec("score maps belong to the baseline family");
    }
    Tensor h = ad::conv3d(features, param(params, "scorer/c0/w"),
                          param(params, "scorer/c0/b"), {1, 1, 1}, {1, 1, 1}, tape);
    h = ad::elu(h, 1.0, tape);
    h = ad::conv3d(h, param(params, "scorer/c1/w"), param(params, "scorer/c1/b"),
                   {1, 1, 1}, {1, 1, 1}, tape);
    const int r = cfg.resolution;
    return ad::reshape(h, {r, r, r}, tape);
}

Tensor refine(const ModelConfig& cfg, const ModelParams& params, const Tensor& volume,
              ad::Tape* tape) {
    if (!cfg.refiner_enabled) {
        throw RefinerDisabled("refiner not present in tier " + tier_name(cfg.tier));
    }
    const int r = cfg.resolution;
    Tensor v4 = ad::reshape(volume, {1, r, r, r}, tape);
    Tensor f1 = ad::elu(ad::conv3d(v4, param(params, "refiner/pre/w"),
                                   param(params, "refiner/pre/b"), {1, 1, 1}, {1, 1, 1},
                                   tape),
                        1.0, tape);
    Tensor dn = ad::elu(ad::conv3d(f1, param(params, "refiner/down/w"),
                                   param(params, "refiner/down/b"), {2, 2, 2},
                                   {1, 1, 1}, tape),
                        1.0, tape);
    Tensor up = ad::elu(ad::conv_transpose3d(dn, param(params, "refiner/up/w"),
                                             param(params, "refiner/up/b"), {2, 2, 2},
                                             {1, 1, 1}, tape),
                        1.0, tape);
    Tensor sk = ad::add(up, f1, tape);  // skip connection
    Tensor delta = ad::conv3d(sk, param(params, "refiner/head/w"),
                              param(params, "refiner/head/b"), {1, 1, 1}, {1, 1, 1},
                              tape);
    Tensor out = ad::sigmoid(ad::add(ad::logit(v4, tape), delta, tape), tape);
    return ad::reshape(out, {r, r, r}, tape);
}

namespace {

// contiguous group-mean pooling of N latents down to V
std::vector<Tensor> pool_latents(const std::vector<Tensor>& latents, int v,
                                 ad::Tape* tape) {
    const int n = static_cast<int>(latents.size());
    std::vector<Tensor> pooled;
    pooled.reserve(v);
    const int base = n / v;
    const int extra = n % v;
    int at = 0;
    for (int g = 0; g < v; ++g) {
        const int len = base + (g < extra ? 1 : 0);
        Tensor acc = latents[at];
        for (int i = 1; i < len; ++i) acc = ad::add(acc, latents[at + i], tape);
        pooled.push_back(len > 1 ? ad::scale(acc, 1.0 / len, tape) : acc);
        at += len;
    }
    return pooled;
}

}  // namespace

Tensor forward(const ModelConfig& cfg, const ModelParams& params,
               const std::vector<Tensor>& images, ad::Tape* tape) {
    cfg.validate();
    if (images.empty()) throw ViewCountMismatch("forward: no input images");
    std::vector<Tensor> latents = encode_views(cfg, params, images, tape);

    if (cfg.family == Family::efficient) {
        const int n = static_cast<int>(latents.size());
        if (n < cfg.num_views) {
            throw ViewCountMismatch("model trained for " +
                                    std::to_string(cfg.num_views) + " views, got " +
                                    std::to_string(n));
        }
        if (n > cfg.num_views) latents = pool_latents(latents, cfg.num_views, tape);
        const Tensor fused = fuse_views_efficient(cfg, params, latents, tape);
        Tensor vol = decode(cfg, params, fused, tape).volume;
        if (cfg.refiner_enabled) vol = refine(cfg, params, vol, tape);
        return vol;
    }

    std::vector<Tensor> volumes, scores;
    volumes.reserve(latents.size());
    scores.reserve(latents.size());
    for (const auto& latent : latents) {
        Decoded dec = decode(cfg, params, latent, tape);
        scores.push_back(score_map(cfg, params, dec.features, tape));
        volumes.push_back(std::move(dec.volume));
    }
    Tensor vol = ad::context_fuse(volumes, scores, tape);
    if (cfg.refiner_enabled) vol = refine(cfg, params, vol, tape);
    return vol;
}

// ---- complexity ----------------------------------------------------------

const ComplexityReport::Row& ComplexityReport::module(const std::string& name) const {
    for (const auto& row : rows) {
        if (row.module == name) return row;
    }
    throw InvalidSpec("no module named " + name + " in complexity report");
}

std::string ComplexityReport::to_csv() const {
    std::string csv = "module,params,macs\n";
    for (const auto& row : rows) {
        csv += row.module + ',' + std::to_string(row.params) + ',' +
               std::to_string(row.macs) + '\n';
    }
    csv += "total," + std::to_string(total_params) + ',' + std::to_string(total_macs) +
           '\n';
    return csv;
}

ComplexityReport report_complexity(const ModelConfig& cfg) {
    cfg.validate();
    using Kind = ad::LayerSpec::Kind;
    ComplexityReport report;
    report.num_views = cfg.num_views;

    const auto add_row = [&](const std::string& module,
                             const std::vector<ad::LayerSpec>& layers,
                             std::uint64_t mac_multiplier) {
        ComplexityReport::Row row;
        row.module = module;
        for (const auto& spec : layers) {
            row.params += ad::param_count(spec);
            row.macs += ad::mac_count(spec) * mac_multiplier;
        }
        report.rows.push_back(row);
    };

    // encoder: conv/elu/pool per block, run once per view
    std::vector<ad::LayerSpec> enc;
    {
        std::int64_t ch = 1;
        std::int64_t s = cfg.image_size;
        for (const int out_ch : cfg.encoder_channels) {
            ad::LayerSpec conv;
            conv.kind = Kind::conv2d;
            conv.in_channels = ch;
            conv.out_channels = out_ch;
            conv.kernel = {1, 3, 3};
            conv.padding = {0, 1, 1};
            conv.in_spatial = {1, s, s};
            conv.out_spatial = {1, s, s};
            enc.push_back(conv);
            ad::LayerSpec act;
            act.kind = Kind::elementwise;
            act.in_channels = act.out_channels = out_ch;
            act.in_spatial = act.out_spatial = {1, s, s};
            act.has_bias = false;
            enc.push_back(act);
            ad::LayerSpec pool;
            pool.kind = Kind::maxpool;
            pool.in_channels = pool.out_channels = out_ch;
            pool.kernel = {1, 2, 2};
            pool.stride = {1, 2, 2};
            pool.in_spatial = {1, s, s};
            pool.out_spatial = {1, s / 2, s / 2};
            pool.has_bias = false;
            enc.push_back(pool);
            ch = out_ch;
            s /= 2;
        }
    }
    add_row("encoder", enc, cfg.num_views);

    const std::int64_t cl = cfg.latent[0];
    const std::int64_t dl = cfg.latent[1];
    if (cfg.family == Family::efficient) {
        ad::LayerSpec fuse;
        fuse.kind = Kind::conv3d;
        fuse.in_channels = fuse.out_channels = cl;
        fuse.kernel = {cfg.num_views, 3, 3};
        fuse.padding = {0, 1, 1};
        fuse.in_spatial = {cfg.num_views, dl * dl, dl};
        fuse.out_spatial = {1, dl * dl, dl};
        add_row("view_fusion", {fuse}, 1);
    }

    std::vector<ad::LayerSpec> dec;
    {
        std::int64_t ch = cl;
        std::int64_t s = dl;
        const std::int64_t k = cfg.deconv_kernel();
        const std::int64_t p = cfg.deconv_padding();
        for (const int out_ch : cfg.decoder_channels) {
            ad::LayerSpec up;
            up.kind = Kind::conv_transpose3d;
            up.in_channels = ch;
            up.out_channels = out_ch;
            up.kernel = {k, k, k};
            up.stride = {2, 2, 2};
            up.padding = {p, p, p};
            up.in_spatial = {s, s, s};
            up.out_spatial = {2 * s, 2 * s, 2 * s};
            dec.push_back(up);
            ad::LayerSpec act;
            act.kind = Kind::elementwise;
            act.in_channels = act.out_channels = out_ch;
            act.in_spatial = act.out_spatial = {2 * s, 2 * s, 2 * s};
            act.has_bias = false;
            dec.push_back(act);
            ch = out_ch;
            s *= 2;
        }
        ad::LayerSpec head;
        head.kind = Kind::conv3d;
        head.in_channels = ch;
        head.out_channels = 1;
        head.in_spatial = {s, s, s};
        head.out_spatial = {s, s, s};
        dec.push_back(head);
        ad::LayerSpec sig;
        sig.kind = Kind::elementwise;
        sig.in_channels = sig.out_channels = 1;
        sig.in_spatial = sig.out_spatial = {s, s, s};
        sig.has_bias = false;
        dec.push_back(sig);
    }
    // the baseline family decodes every view; the efficient family decodes once
    add_row("decoder", dec, cfg.family == Family::baseline ? cfg.num_views : 1);

    if (cfg.family == Family::baseline) {
        const std::int64_t r = cfg.resolution;
        const std::int64_t dc = cfg.decoder_channels.back();
        ad::LayerSpec s0;
        s0.kind = Kind::conv3d;
        s0.in_channels = dc;
        s0.out_channels = cfg.scorer_hidden;
        s0.kernel = {3, 3, 3};
        s0.padding = {1, 1, 1};
        s0.in_spatial = {r, r, r};
        s0.out_spatial = {r, r, r};
        ad::LayerSpec act;
        act.kind = Kind::elementwise;
        act.in_channels = act.out_channels = cfg.scorer_hidden;
        act.in_spatial = act.out_spatial = {r, r, r};
        act.has_bias = false;
        ad::LayerSpec s1 = s0;
        s1.in_channels = cfg.scorer_hidden;
        s1.out_channels = 1;
        add_row("scorer", {s0, act, s1}, cfg.num_views);
    }

    if (cfg.refiner_enabled) {
        const std::int64_t r = cfg.resolution;
        const std::int64_t rc = cfg.refiner_channels;
        ad::LayerSpec pre;
        pre.kind = Kind::conv3d;
        pre.in_channels = 1;
        pre.out_channels = rc;
        pre.kernel = {3, 3, 3};
        pre.padding = {1, 1, 1};
        pre.in_spatial = {r, r, r};
        pre.out_spatial = {r, r, r};
        ad::LayerSpec down;
        down.kind = Kind::conv3d;
        down.in_channels = down.out_channels = rc;
        down.kernel = {4, 4, 4};
        down.stride = {2, 2, 2};
        down.padding = {1, 1, 1};
        down.in_spatial = {r, r, r};
        down.out_spatial = {r / 2, r / 2, r / 2};
        ad::LayerSpec up;
        up.kind = Kind::conv_transpose3d;
        up.in_channels = up.out_channels = rc;
        up.kernel = {4, 4, 4};
        up.stride = {2, 2, 2};
        up.padding = {1, 1, 1};
        up.in_spatial = {r / 2, r / 2, r / 2};
        up.out_spatial = {r, r, r};
        ad::LayerSpec head;
        head.kind = Kind::conv3d;
        head.in_channels = rc;
        head.out_channels = 1;
        head.kernel = {3, 3, 3};
        head.padding = {1, 1, 1};
        head.in_spatial = {r, r, r};
        head.out_spatial = {r, r, r};
        add_row("refiner", {pre, down, up, head}, 1);
    }

    for (const auto& row : report.rows) {
        report.total_params += row.params;
        report.total_macs += row.macs;
    }
    return report;
}

}  // namespace epivox::net
