#include "epivox/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "epivox/rng.hpp"

namespace epivox::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << content;
    if (!os.good()) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// ---- manifest ------------------------------------------------------------

std::string RunManifest::resolve(const std::string& rel) const {
    if (rel.empty()) return rel;
    const fs::path p(rel);
    if (p.is_absolute() || root.empty()) return rel;
    return (fs::path(root) / p).string();
}

void RunManifest::save(const std::string& path) {
    json j;
    j["version"] = version;
    j["tool"] = "epivox";
    j["seed"] = seed;
    j["config"] = json::parse(config_json);
    json jcases = json::array();
    for (const auto& c : cases) {
        json jc;
        jc["id"] = c.id;
        jc["mesh"] = c.mesh_path;
        jc["landmarks"] = c.landmarks_path;
        jc["masks"] = c.mask_paths;
        jc["pseudo"] = c.pseudo_paths;
        jc["voxgrid"] = c.voxgrid_path;
        jcases.push_back(jc);
    }
    j["cases"] = jcases;
    write_text_file(path, j.dump(2) + "\n");
    root = fs::path(path).parent_path().string();
}

RunManifest RunManifest::load(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw IoError("manifest " + path + " is not valid JSON: " + e.what());
    }
    RunManifest m;
    try {
        m.version = j.at("version").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_json = j.value("config", json::object()).dump();
        for (const auto& jc : j.at("cases")) {
            CaseEntry c;
            c.id = jc.at("id").get<std::string>();
            c.mesh_path = jc.value("mesh", "");
            c.landmarks_path = jc.value("landmarks", "");
            c.mask_paths = jc.value("masks", std::map<std::string, std::string>{});
            c.pseudo_paths = jc.value("pseudo", std::map<std::string, std::string>{});
            c.voxgrid_path = jc.value("voxgrid", "");
            m.cases.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw IoError("manifest " + path + " field error: " + e.what());
    }
    m.root = fs::path(path).parent_path().string();
    return m;
}

// ---- landmarks -----------------------------------------------------------

void save_landmarks(const geom::LandmarkSet& lm, const std::string& path) {
    json j;
    for (const auto& [name, p] : lm.points) j[name] = {p.x, p.y, p.z};
    write_text_file(path, j.dump(2) + "\n");
}

geom::LandmarkSet load_landmarks(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw IoError("landmarks " + path + ": " + e.what());
    }
    geom::LandmarkSet lm;
    for (const auto& [name, arr] : j.items()) {
        if (!arr.is_array() || arr.size() != 3) {
            throw IoError("landmark " + name + " in " + path + " is not a 3-vector");
        }
        lm.set(name, {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()});
    }
    return lm;
}

geom::LandmarkSet derive_landmarks(const geom::LabeledMesh& mesh, int apex_rays) {
    namespace sid = geom::structure_id;
    namespace lk = geom::landmarks;
    geom::LandmarkSet lm;
    lm.set(lk::MV_center, geom::center_of_mass(mesh, sid::MV));
    lm.set(lk::AV_center, geom::center_of_mass(mesh, sid::AV));
    lm.set(lk::PV_center, geom::center_of_mass(mesh, sid::PV));
    lm.set(lk::LA_center, geom::center_of_mass(mesh, sid::LA));
    lm.set(lk::RA_center, geom::center_of_mass(mesh, sid::RA));
    lm.set(lk::RV_center, geom::center_of_mass(mesh, sid::RV));
    const auto apex = geom::ray_cast_apex(mesh, {sid::LV_endo, sid::LV_epi},
                                          lm.at(lk::MV_center), apex_rays);
    lm.set(lk::LV_apex, apex.apex);
    return lm;
}

// ---- phantom sets ----------------------------------------------------------

namespace {

std::string case_id(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "case_%04d", i);
    return buf;
}

geom::PhantomParams jitter_params(const geom::PhantomParams& base, double jitter,
                                  Rng& rng) {
    geom::PhantomParams p = base;
    const auto scaled = [&](double v) { return v * (1.0 + jitter * rng.uniform(-1, 1)); };
    p.lv_endo_radius = scaled(base.lv_endo_radius);
    p.lv_endo_length = scaled(base.lv_endo_length);
    p.lv_wall_thickness = scaled(base.lv_wall_thickness);
    p.lv_apex_thickness = scaled(base.lv_apex_thickness);
    p.atrium_radius = scaled(base.atrium_radius);
    p.rv_scale = scaled(base.rv_scale);
    p.valve_radius = scaled(base.valve_radius);
    return p;
}

}  // namespace

RunManifest make_phantom_set(int count, const PhantomSetConfig& cfg,
                             const std::string& out_dir) {
    if (count < 0) throw InvalidParams("phantom count must be >= 0");
    cfg.base.validate();
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "meshes", ec);
    fs::create_directories(fs::path(out_dir) / "landmarks", ec);
    if (!fs::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir);
    }

    RunManifest manifest;
    manifest.seed = cfg.seed;
    json snapshot;
    snapshot["phantom"] = {{"count", count},
                           {"size_jitter", cfg.size_jitter},
                           {"perturb_amplitude", cfg.base.perturb_amplitude},
                           {"mesh_segments", cfg.base.mesh_segments}};
    manifest.config_json = snapshot.dump();

    for (int i = 0; i < count; ++i) {
        Rng jrng(derive_seed(cfg.seed, 0x4a49545445ull + i));
        const geom::PhantomParams params =
            jitter_params(cfg.base, cfg.size_jitter, jrng);
        const auto [mesh, lm] = geom::generate_phantom(params,
                                                       derive_seed(cfg.seed, i));
        CaseEntry entry;
        entry.id = case_id(i);
        entry.mesh_path = "meshes/" + entry.id + ".mesh";
        entry.landmarks_path = "landmarks/" + entry.id + ".json";
        geom::save_mesh(mesh, (fs::path(out_dir) / entry.mesh_path).string());
        save_landmarks(lm, (fs::path(out_dir) / entry.landmarks_path).string());
        manifest.cases.push_back(std::move(entry));
    }
    manifest.save((fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

// ---- views -----------------------------------------------------------------

std::vector<CaseFailure> make_views(RunManifest& manifest, const ViewGenConfig& cfg) {
    std::vector<viewgen::StandardView> views =
        cfg.views.empty() ? viewgen::all_views() : cfg.views;
    std::vector<CaseFailure> failures;
    for (auto& entry : manifest.cases) {
        try {
            const geom::LabeledMesh mesh =
                geom::load_mesh(manifest.resolve(entry.mesh_path));
            const geom::LandmarkSet lm = derive_landmarks(mesh, cfg.apex_rays);

            const fs::path view_dir = fs::path(manifest.root) / "views" / entry.id;
            std::error_code ec;
            fs::create_directories(view_dir, ec);
            const auto images = viewgen::build_view_set(mesh, lm, views, cfg.raster,
                                                        cfg.pseudo);
            for (const auto& vi : images) {
                const std::string name = viewgen::view_name(vi.view);
                const std::string mask_rel = "views/" + entry.id + "/" + name +
                                             "_mask.pgm";
                viewgen::save_pgm(vi.mask, manifest.resolve(mask_rel));
                entry.mask_paths[name] = mask_rel;
                if (vi.pseudo) {
                    const std::string us_rel = "views/" + entry.id + "/" + name +
                                               "_us.pgm";
                    viewgen::save_pgm(*vi.pseudo, manifest.resolve(us_rel));
                    entry.pseudo_paths[name] = us_rel;
                }
            }

            // cubic, slightly padded bounds keep voxels isotropic
            geom::Point3 lo, hi;
            mesh.bounding_box(lo, hi);
            const geom::Point3 center = (lo + hi) / 2.0;
            const geom::Vec3 ext = hi - lo;
            const double half = 0.5 * (1.0 + cfg.bounds_margin) *
                                std::max({ext.x, ext.y, ext.z});
            const geom::Point3 bmin = center - geom::Vec3{half, half, half};
            const geom::Point3 bmax = center + geom::Vec3{half, half, half};
            const int r = cfg.grid_resolution;
            const geom::VoxelGrid gt =
                geom::voxelize(mesh, {geom::LabeledMesh::kWholeHeart}, {r, r, r},
                               bmin, bmax);
            fs::create_directories(fs::path(manifest.root) / "volumes", ec);
            const std::string vox_rel = "volumes/" + entry.id + ".voxgrid";
            geom::save_voxgrid(gt, manifest.resolve(vox_rel));
            entry.voxgrid_path = vox_rel;
        } catch (const std::exception& e) {
            failures.push_back({entry.id, e.what()});
        }
    }
    manifest.save((fs::path(manifest.root) / "manifest.json").string());
    return failures;
}

// ---- dataset loading -----------------------------------------------------

namespace {

ad::Tensor image_tensor(const std::string& path, bool is_mask) {
    if (is_mask) {
        const viewgen::MaskImage img = viewgen::load_pgm_mask(path);
        ad::Tensor t = ad::Tensor::zeros({1, img.height, img.width});
        for (std::size_t i = 0; i < img.pixels.size(); ++i) t.data[i] = img.pixels[i];
        return t;
    }
    const viewgen::GrayImage img = viewgen::load_pgm(path);
    ad::Tensor t = ad::Tensor::zeros({1, img.height, img.width});
    std::copy(img.pixels.begin(), img.pixels.end(), t.data.begin());
    return t;
}

ad::Tensor grid_tensor(const geom::VoxelGrid& g) {
    // VoxelGrid is x-fastest, so [z,y,x] tensor order shares the flat layout
    ad::Tensor t = ad::Tensor::zeros({g.dims[2], g.dims[1], g.dims[0]});
    std::copy(g.values.begin(), g.values.end(), t.data.begin());
    return t;
}

}  // namespace

train::Dataset load_dataset(const RunManifest& manifest,
                            const std::vector<std::string>& view_names,
                            bool use_pseudo) {
    if (view_names.empty()) throw InvalidParams("load_dataset: no views requested");
    train::Dataset ds;
    ds.view_names = view_names;
    for (const auto& entry : manifest.cases) {
        train::TrainCase c;
        c.id = entry.id;
        for (const auto& name : view_names) {
            const auto& table = use_pseudo ? entry.pseudo_paths : entry.mask_paths;
            const auto it = table.find(name);
            if (it == table.end()) {
                throw IoError("case " + entry.id + " has no " +
                              (use_pseudo ? "pseudo" : "mask") + " image for view " +
                              name);
            }
            c.views.push_back(image_tensor(manifest.resolve(it->second), !use_pseudo));
        }
        if (entry.voxgrid_path.empty()) {
            throw IoError("case " + entry.id + " has no ground-truth grid");
        }
        c.gt = grid_tensor(geom::load_voxgrid(manifest.resolve(entry.voxgrid_path)));
        ds.cases.push_back(std::move(c));
    }
    return ds;
}

// ---- training run --------------------------------------------------------

TrainOutputs run_training(const RunManifest& manifest, const TrainRunConfig& cfg,
                          const std::string& out_dir, bool resume) {
    cfg.model.validate();
    cfg.training.validate();
    if (static_cast<int>(cfg.views.size()) != cfg.model.num_views) {
        throw ViewCountMismatch("training on " + std::to_string(cfg.views.size()) +
                                " views but the model expects " +
                                std::to_string(cfg.model.num_views));
    }
    const train::Dataset ds = load_dataset(manifest, cfg.views, cfg.use_pseudo);
    for (const auto& c : ds.cases) {
        const ad::Shape want{cfg.model.resolution, cfg.model.resolution,
                             cfg.model.resolution};
        if (c.gt.shape != want) {
            throw ShapeMismatch("ground truth for " + c.id + " is " +
                                ad::shape_str(c.gt.shape) + ", model resolution is " +
                                std::to_string(cfg.model.resolution));
        }
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    TrainOutputs out;
    out.checkpoint = (fs::path(out_dir) / "checkpoint.epvx").string();
    out.best_checkpoint = (fs::path(out_dir) / "checkpoint_best_val.epvx").string();
    out.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
    out.config_json = (fs::path(out_dir) / "run_config.json").string();

    std::optional<net::ModelParams> initial;
    int start_epoch = 0;
    std::string previous_rows;
    if (resume) {
        initial = ad::load_checkpoint(out.checkpoint);
        const std::string old_csv = read_text_file(out.metrics_csv);
        std::istringstream ss(old_csv);
        std::string line;
        std::getline(ss, line);  // header
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            previous_rows += line + "\n";
            start_epoch = std::stoi(line.substr(0, line.find(',')));
        }
    }

    const train::TrainResult result =
        train::train(cfg.model, cfg.training, ds, initial, start_epoch);

    ad::save_checkpoint(result.params, out.checkpoint);
    ad::save_checkpoint(result.best_val_params, out.best_checkpoint);
    write_text_file(out.metrics_csv,
                    "epoch,train_loss,val_iou\n" + previous_rows +
                        [&] {
                            std::string rows;
                            const std::string full = result.metrics.to_csv();
                            rows = full.substr(full.find('\n') + 1);
                            return rows;
                        }());

    json snapshot;
    snapshot["model"] = json::parse(cfg.model.to_json());
    snapshot["training"] = json::parse(cfg.training.to_json());
    snapshot["views"] = cfg.views;
    snapshot["use_pseudo"] = cfg.use_pseudo;
    snapshot["dataset_seed"] = manifest.seed;
    snapshot["best_val_epoch"] = result.metrics.best_val_epoch;
    snapshot["best_val_iou"] = result.metrics.best_val_iou;
    snapshot["final_train_iou"] = result.metrics.final_train_iou;
    write_text_file(out.config_json, snapshot.dump(2) + "\n");

    out.metrics = result.metrics;
    return out;
}

// ---- evaluation run --------------------------------------------------------

train::EvalReport run_evaluation(const net::ModelConfig& model_cfg,
                                 const net::ModelParams& params,
                                 const RunManifest& manifest, const EvalRunConfig& cfg,
                                 const std::string& model_name) {
    std::vector<std::string> names = cfg.views;
    if (names.empty()) {
        std::set<std::string> uniq;
        for (const auto& set : cfg.eval.view_sets) uniq.insert(set.begin(), set.end());
        names.assign(uniq.begin(), uniq.end());
    }
    if (names.empty()) throw EmptyTestSet("no views requested for evaluation");

    train::Dataset ds = load_dataset(manifest, names, cfg.use_pseudo);
    if (cfg.split_seed) {
        const auto split = train::split_dataset(static_cast<int>(ds.cases.size()),
                                                cfg.split_ratios, *cfg.split_seed);
        train::Dataset test;
        test.view_names = ds.view_names;
        for (const int id : split.test) test.cases.push_back(std::move(ds.cases[id]));
        ds = std::move(test);
    }
    return train::evaluate(model_cfg, params, ds, cfg.eval, model_name);
}

// ---- complexity sweep ------------------------------------------------------

std::string complexity_sweep_csv(const std::vector<int>& view_counts, int resolution) {
    std::string csv = "family,tier,views,module,params,macs\n";
    for (const auto family : {net::Family::baseline, net::Family::efficient}) {
        for (const auto tier : {net::Tier::fast, net::Tier::accurate}) {
            for (const int v : view_counts) {
                const auto cfg = net::ModelConfig::make_default(family, tier, v,
                                                                resolution);
                const auto report = net::report_complexity(cfg);
                const std::string prefix = net::family_name(family) + "," +
                                           net::tier_name(tier) + "," +
                                           std::to_string(v) + ",";
                for (const auto& row : report.rows) {
                    csv += prefix + row.module + ',' + std::to_string(row.params) +
                           ',' + std::to_string(row.macs) + '\n';
                }
                csv += prefix + "total," + std::to_string(report.total_params) + ',' +
                       std::to_string(report.total_macs) + '\n';
            }
        }
    }
    return csv;
}

}  // namespace epivox::pipe
