#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epivox/phantom.hpp"
#include "epivox/training.hpp"
#include "epivox/viewgen.hpp"

namespace epivox::pipe {

// One dataset case. Paths are stored relative to the manifest's directory.
struct CaseEntry {
    std::string id;
    std::string mesh_path;
    std::string landmarks_path;
    std::map<std::string, std::string> mask_paths;    // view name -> PGM
    std::map<std::string, std::string> pseudo_paths;  // view name -> PGM
    std::string voxgrid_path;
};

struct RunManifest {
    int version = 1;
    std::uint64_t seed = 0;
    std::string config_json = "{}";  // snapshot of the generating configuration
    std::vector<CaseEntry> cases;
    std::string root;  // directory holding the manifest; set on load/save

    std::string resolve(const std::string& rel) const;

    void save(const std::string& path);
    static RunManifest load(const std::string& path);
};

void save_landmarks(const geom::LandmarkSet& lm, const std::string& path);
geom::LandmarkSet load_landmarks(const std::string& path);

// landmarks recomputed from mesh structures: valve/chamber centroids plus the
// ray-cast apex from the mitral valve centroid
geom::LandmarkSet derive_landmarks(const geom::LabeledMesh& mesh, int apex_rays = 2048);

// ---- phantoms -------------------------------------------------------------

struct PhantomSetConfig {
    geom::PhantomParams base;
    double size_jitter = 0.08;  // relative, applied per case deterministically
    std::uint64_t seed = 1;
};

// writes `count` meshes + landmark files + manifest.json under out_dir
RunManifest make_phantom_set(int count, const PhantomSetConfig& cfg,
                             const std::string& out_dir);

// ---- views + ground truth ---------------------------------------------

struct ViewGenConfig {
    std::vector<viewgen::StandardView> views;  // empty: all nine
    viewgen::RasterParams raster;
    std::optional<viewgen::PseudoUsParams> pseudo;
    int grid_resolution = 64;  // ground-truth voxel grid edge
    int apex_rays = 2048;
    double bounds_margin = 0.05;  // cubic bounds, relative margin around the mesh
};

struct CaseFailure {
    std::string id;
    std::string error;
};

// per-case: landmarks -> planes -> masks (-> pseudo-US) -> ground truth grid;
// failures are collected per case, surviving cases are updated in the manifest
std::vector<CaseFailure> make_views(RunManifest& manifest, const ViewGenConfig& cfg);

// ---- datasets ------------------------------------------------------------

// Loads the named views (mask or pseudo-US channel) and ground-truth grids as
// tensors ready for training/evaluation.
train::Dataset load_dataset(const RunManifest& manifest,
                            const std::vector<std::string>& view_names,
                            bool use_pseudo);

// ---- train / eval ----------------------------------------------------------

struct TrainRunConfig {
    net::ModelConfig model;
    train::TrainConfig training;
    std::vector<std::string> views;  // names; must match model.num_views
    bool use_pseudo = false;
};

struct TrainOutputs {
    std::string checkpoint;       // final weights
    std::string best_checkpoint;  // best validation IoU weights
    std::string metrics_csv;
    std::string config_json;  // merged run snapshot
    train::Metrics metrics;
};

TrainOutputs run_training(const RunManifest& manifest, const TrainRunConfig& cfg,
                          const std::string& out_dir, bool resume = false);

struct EvalRunConfig {
    train::EvalConfig eval;
    std::vector<std::string> views;  // union of views to load; empty: all in sets
    bool use_pseudo = false;
    // when set, evaluate only the test split of split_dataset(n, ratios, seed)
    std::optional<std::uint64_t> split_seed;
    std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
};

train::EvalReport run_evaluation(const net::ModelConfig& model_cfg,
                                 const net::ModelParams& params,
                                 const RunManifest& manifest, const EvalRunConfig& cfg,
                                 const std::string& model_name);

// family,tier,views,module,params,macs rows for every family/tier at each V
std::string complexity_sweep_csv(const std::vector<int>& view_counts, int resolution);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace epivox::pipe
