#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "epivox/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string out_root() {
    const char* env = std::getenv("EPIVOX_OUT_ROOT");
    return env ? env : ".";
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<epivox::viewgen::StandardView> parse_views(const std::string& csv) {
    std::vector<epivox::viewgen::StandardView> out;
    for (const auto& name : split_list(csv)) {
        out.push_back(epivox::viewgen::view_from_name(name));
    }
    return out;
}

epivox::geom::PhantomParams phantom_params_from_json(const std::string& text) {
    epivox::geom::PhantomParams p;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw epivox::InvalidParams(std::string("phantom params JSON: ") + e.what());
    }
    p.lv_endo_radius = j.value("lv_endo_radius", p.lv_endo_radius);
    p.lv_endo_length = j.value("lv_endo_length", p.lv_endo_length);
    p.lv_wall_thickness = j.value("lv_wall_thickness", p.lv_wall_thickness);
    p.lv_apex_thickness = j.value("lv_apex_thickness", p.lv_apex_thickness);
    p.atrium_radius = j.value("atrium_radius", p.atrium_radius);
    p.rv_scale = j.value("rv_scale", p.rv_scale);
    p.valve_radius = j.value("valve_radius", p.valve_radius);
    p.valve_thickness = j.value("valve_thickness", p.valve_thickness);
    p.perturb_amplitude = j.value("perturb_amplitude", p.perturb_amplitude);
    p.mesh_segments = j.value("mesh_segments", p.mesh_segments);
    return p;
}

int cmd_phantoms(int count, const std::string& params_file, std::uint64_t seed,
                 double jitter, double amplitude, int segments,
                 const std::string& out_dir) {
    epivox::pipe::PhantomSetConfig cfg;
    if (!params_file.empty()) {
        cfg.base = phantom_params_from_json(epivox::pipe::read_text_file(params_file));
    }
    if (amplitude >= 0) cfg.base.perturb_amplitude = amplitude;
    if (segments > 0) cfg.base.mesh_segments = segments;
    cfg.size_jitter = jitter;
    cfg.seed = seed;
    const auto manifest = epivox::pipe::make_phantom_set(count, cfg, out_dir);
    std::cout << "wrote " << manifest.cases.size() << " phantoms under " << out_dir
              << " (seed " << seed << ")\n";
    return 0;
}

int cmd_views(const std::string& manifest_path, const std::string& views_csv,
              int resolution, int image_size, double mm_per_pixel, bool pseudo,
              double noise_std, double blur_sigma, int kernel,
              const std::string& order, std::uint64_t pseudo_seed, int apex_rays) {
    auto manifest = epivox::pipe::RunManifest::load(manifest_path);
    epivox::pipe::ViewGenConfig cfg;
    if (!views_csv.empty()) cfg.views = parse_views(views_csv);
    cfg.raster.width = image_size;
    cfg.raster.height = image_size;
    cfg.raster.mm_per_pixel = mm_per_pixel;
    cfg.grid_resolution = resolution;
    cfg.apex_rays = apex_rays;
    if (pseudo) {
        epivox::viewgen::PseudoUsParams us;
        us.noise_std = noise_std;
        us.blur_sigma = blur_sigma;
        us.blur_kernel_size = kernel;
        us.order = order == "blur_then_noise"
                       ? epivox::viewgen::NoiseOrder::BlurThenNoise
                       : epivox::viewgen::NoiseOrder::NoiseThenBlur;
        us.cone_apex_x = image_size / 2.0;
        us.cone_apex_y = -image_size / 8.0;
        us.cone_max_radius = image_size * 1.2;
        us.cone_min_radius = image_size / 12.0;
        us.seed = pseudo_seed;
        cfg.pseudo = us;
    }
    const auto failures = epivox::pipe::make_views(manifest, cfg);
    std::cout << "views/ground truth written for "
              << manifest.cases.size() - failures.size() << "/" << manifest.cases.size()
              << " cases\n";
    for (const auto& f : failures) {
        std::cerr << "case " << f.id << " failed: " << f.error << "\n";
    }
    return failures.empty() ? 0 : 1;
}

int cmd_train(const std::string& manifest_path, const std::string& model_config,
              const std::string& train_config, const std::string& views_csv,
              bool use_pseudo, const std::string& out_dir, bool resume,
              const std::optional<std::uint64_t>& seed,
              const std::optional<int>& epochs, const std::optional<double>& lr) {
    const auto manifest = epivox::pipe::RunManifest::load(manifest_path);
    epivox::pipe::TrainRunConfig cfg;
    cfg.model = epivox::net::ModelConfig::from_json_file(model_config);
    cfg.training = train_config.empty()
                       ? epivox::train::TrainConfig{}
                       : epivox::train::TrainConfig::from_json_file(train_config);
    if (seed) cfg.training.seed = *seed;
    if (epochs) cfg.training.epochs = *epochs;
    if (lr) cfg.training.learning_rate = *lr;
    cfg.views = split_list(views_csv);
    cfg.use_pseudo = use_pseudo;
    const auto out = epivox::pipe::run_training(manifest, cfg, out_dir, resume);
    std::cout << "checkpoint: " << out.checkpoint << "\n"
              << "metrics:    " << out.metrics_csv << "\n"
              << "epochs run: " << out.metrics.epochs.size() << ", final train IoU "
              << out.metrics.final_train_iou << ", best val IoU "
              << out.metrics.best_val_iou << " (epoch " << out.metrics.best_val_epoch
              << ")\n";
    return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& checkpoint,
             const std::string& model_config, const std::string& checkpoint_b,
             const std::string& model_config_b, const std::string& name_a,
             const std::string& name_b, const std::string& view_sets,
             const std::string& thresholds, bool use_pseudo,
             const std::optional<std::uint64_t>& split_seed,
             const std::string& out_dir) {
    const auto manifest = epivox::pipe::RunManifest::load(manifest_path);
    epivox::pipe::EvalRunConfig cfg;
    for (const auto& group : split_list(view_sets)) {
        std::vector<std::string> names;
        std::string cur;
        for (const char c : group) {
            if (c == '+') {
                if (!cur.empty()) names.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) names.push_back(cur);
        if (!names.empty()) cfg.eval.view_sets.push_back(names);
    }
    for (const auto& t : split_list(thresholds)) {
        cfg.eval.threshold_sweep.push_back(std::stod(t));
    }
    cfg.use_pseudo = use_pseudo;
    cfg.split_seed = split_seed;

    const auto model_a = epivox::net::ModelConfig::from_json_file(model_config);
    const auto params_a = epivox::ad::load_checkpoint(checkpoint);
    const auto report_a =
        epivox::pipe::run_evaluation(model_a, params_a, manifest, cfg, name_a);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const std::string report_path = (fs::path(out_dir) / "report.csv").string();
    epivox::pipe::write_text_file(report_path, report_a.to_csv());
    std::cout << "report: " << report_path << "\n";

    if (!checkpoint_b.empty()) {
        const auto model_b = epivox::net::ModelConfig::from_json_file(
            model_config_b.empty() ? model_config : model_config_b);
        const auto params_b = epivox::ad::load_checkpoint(checkpoint_b);
        const auto report_b =
            epivox::pipe::run_evaluation(model_b, params_b, manifest, cfg, name_b);
        const std::string b_path = (fs::path(out_dir) / "report_b.csv").string();
        epivox::pipe::write_text_file(b_path, report_b.to_csv());
        const std::string cmp_path = (fs::path(out_dir) / "comparison.csv").string();
        epivox::pipe::write_text_file(cmp_path,
                                      epivox::train::comparison_csv(report_a, report_b));
        std::cout << "comparison: " << cmp_path << "\n";
    }
    return 0;
}

int cmd_complexity(const std::string& views_csv, int resolution,
                   const std::string& out_path) {
    std::vector<int> vs;
    for (const auto& v : split_list(views_csv)) vs.push_back(std::stoi(v));
    const std::string csv = epivox::pipe::complexity_sweep_csv(vs, resolution);
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        epivox::pipe::write_text_file(out_path, csv);
        std::cout << "complexity table: " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D cardiac occupancy reconstruction workbench"};
    app.require_subcommand(1);

    // phantoms
    auto* phantoms = app.add_subcommand("phantoms", "generate a phantom heart cohort");
    int count = 8;
    std::string params_file;
    std::uint64_t seed = 1;
    double jitter = 0.08, amplitude = 1.0;
    int segments = 0;
    std::string out_dir = (fs::path(out_root()) / "phantom_set").string();
    phantoms->add_option("--count", count, "number of phantoms");
    phantoms->add_option("--params", params_file, "phantom parameter JSON file");
    phantoms->add_option("--seed", seed, "cohort seed");
    phantoms->add_option("--jitter", jitter, "relative size jitter across cases");
    phantoms->add_option("--amplitude", amplitude, "radial perturbation amplitude, mm");
    phantoms->add_option("--segments", segments, "mesh longitude segments");
    phantoms->add_option("--out", out_dir, "output directory");

    // views
    auto* views = app.add_subcommand("views", "slice views + ground-truth volumes");
    std::string manifest_path, views_csv;
    int resolution = 64, image_size = 64;
    double mm_per_pixel = 2.0;
    bool pseudo = false;
    double noise_std = 0.08, blur_sigma = 1.5;
    int kernel = 7, apex_rays = 2048;
    std::string order = "noise_then_blur";
    std::uint64_t pseudo_seed = 1;
    views->add_option("--manifest", manifest_path, "manifest.json path")->required();
    views->add_option("--views", views_csv, "comma-separated view names (default all)");
    views->add_option("--resolution", resolution, "ground-truth grid edge");
    views->add_option("--image-size", image_size, "view image edge, pixels");
    views->add_option("--mm-per-pixel", mm_per_pixel, "raster scale");
    views->add_flag("--pseudo", pseudo, "also render pseudo-ultrasound images");
    views->add_option("--noise-std", noise_std, "pseudo-US noise sigma");
    views->add_option("--blur-sigma", blur_sigma, "pseudo-US blur sigma");
    views->add_option("--blur-kernel", kernel, "pseudo-US blur kernel size (odd)");
    views->add_option("--order", order, "noise_then_blur | blur_then_noise");
    views->add_option("--pseudo-seed", pseudo_seed, "noise seed");
    views->add_option("--apex-rays", apex_rays, "ray count for the apex search");

    // train
    auto* tr = app.add_subcommand("train", "train a reconstruction model");
    std::string model_config, train_config, train_views;
    bool use_pseudo = false, resume = false;
    std::string train_out = (fs::path(out_root()) / "train_run").string();
    std::optional<std::uint64_t> train_seed;
    std::optional<int> epochs;
    std::optional<double> lr;
    tr->add_option("--manifest", manifest_path, "manifest.json path")->required();
    tr->add_option("--model-config", model_config, "model config JSON")->required();
    tr->add_option("--train-config", train_config, "train config JSON");
    tr->add_option("--views", train_views, "comma-separated views to train on")
        ->required();
    tr->add_flag("--use-pseudo", use_pseudo, "train on pseudo-US images");
    tr->add_flag("--resume", resume, "continue from the existing checkpoint");
    tr->add_option("--out", train_out, "output directory");
    tr->add_option("--seed", train_seed, "override training seed");
    tr->add_option("--epochs", epochs, "override epoch count");
    tr->add_option("--lr", lr, "override learning rate");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate checkpoints (IoU per view set)");
    std::string checkpoint, checkpoint_b, model_config_b;
    std::string name_a = "model_a", name_b = "model_b";
    std::string view_sets = "a2c,a4c,a2c+a4c";
    std::string thresholds = "0.3";
    std::optional<std::uint64_t> split_seed;
    std::string eval_out = (fs::path(out_root()) / "eval_run").string();
    ev->add_option("--manifest", manifest_path, "manifest.json path")->required();
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--model-config", model_config, "model config JSON")->required();
    ev->add_option("--checkpoint-b", checkpoint_b, "second checkpoint to compare");
    ev->add_option("--model-config-b", model_config_b, "second model config JSON");
    ev->add_option("--name", name_a, "label for the first model");
    ev->add_option("--name-b", name_b, "label for the second model");
    ev->add_option("--view-sets", view_sets,
                   "comma-separated view sets; join views with '+'");
    ev->add_option("--thresholds", thresholds, "comma-separated IoU thresholds");
    ev->add_flag("--use-pseudo", use_pseudo, "evaluate on pseudo-US images");
    ev->add_option("--split-seed", split_seed,
                   "evaluate only the 70/15/15 test split for this seed");
    ev->add_option("--out", eval_out, "output directory");

    // complexity
    auto* cx = app.add_subcommand("complexity", "parameter/MAC accounting table");
    std::string cx_views = "1,2,4,8";
    int cx_resolution = 64;
    std::string cx_out;
    cx->add_option("--views", cx_views, "comma-separated view counts");
    cx->add_option("--resolution", cx_resolution, "output volume edge");
    cx->add_option("--out", cx_out, "output CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantoms->parsed()) {
            return cmd_phantoms(count, params_file, seed, jitter, amplitude, segments,
                                out_dir);
        }
        if (views->parsed()) {
            return cmd_views(manifest_path, views_csv, resolution, image_size,
                             mm_per_pixel, pseudo, noise_std, blur_sigma, kernel, order,
                             pseudo_seed, apex_rays);
        }
        if (tr->parsed()) {
            return cmd_train(manifest_path, model_config, train_config, train_views,
                             use_pseudo, train_out, resume, train_seed, epochs, lr);
        }
        if (ev->parsed()) {
            return cmd_eval(manifest_path, checkpoint, model_config, checkpoint_b,
                            model_config_b, name_a, name_b, view_sets, thresholds,
                            use_pseudo, split_seed, eval_out);
        }
        if (cx->parsed()) {
            return cmd_complexity(cx_views, cx_resolution, cx_out);
        }
    } catch (const epivox::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
