#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epivox/geometry.hpp"
#include "epivox/reconnet.hpp"
#include "epivox/tensor.hpp"

namespace epivox::train {

struct TrainConfig {
    int epochs = 200;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-3;
    int batch_size = 4;
    std::uint64_t seed = 7;
    std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
    double val_threshold = 0.3;     // IoU threshold for per-epoch validation
    double stop_at_train_iou = 0.0; // > 0: stop once train IoU reaches it

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
};

struct EvalConfig {
    double iou_threshold = 0.3;
    std::vector<double> threshold_sweep;                // empty: just iou_threshold
    std::vector<std::vector<std::string>> view_sets;    // view-name subsets

    std::vector<double> thresholds() const;
};

struct SplitAssignment {
    std::vector<int> train, val, test;
};

// Seeded shuffle, then floor(r0*n) / floor(r1*n) / remainder.
SplitAssignment split_dataset(int n, std::array<double, 3> ratios, std::uint64_t seed);

// ---- losses, optimizer, metrics --------------------------------------------

// mean voxel binary cross-entropy; predictions clamped to [1e-7, 1-1e-7]
ad::Tensor bce_loss(const ad::Tensor& pred, const ad::Tensor& gt,
                    ad::Tape* tape = nullptr);

struct AdamState {
    std::map<std::string, ad::Tensor> m;
    std::map<std::string, ad::Tensor> v;
};

// standard bias-corrected update; `t` is the 1-based step counter
void adam_step(net::ModelParams& params, const std::map<std::string, ad::Tensor>& grads,
               AdamState& state, int t, const TrainConfig& cfg);

// IoU of [pred >= t] against a binary ground truth; empty-vs-empty is 1.0
double thresholded_iou(const ad::Tensor& pred, const ad::Tensor& gt, double t);
double thresholded_iou(const geom::VoxelGrid& pred, const geom::VoxelGrid& gt, double t);

// 100 * (a - b) / b
double percent_diff(double a, double b);

// ---- training --------------------------------------------------------------

struct TrainCase {
    std::string id;
    std::vector<ad::Tensor> views;  // [1,H,W] each, order matches Dataset::view_names
    ad::Tensor gt;                  // [R,R,R] binary occupancy
};

struct Dataset {
    std::vector<TrainCase> cases;
    std::vector<std::string> view_names;
};

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_iou = 0.0;
    double train_iou = 0.0;  // not serialized; used for the overfit stop
};

struct Metrics {
    std::vector<EpochMetrics> epochs;
    double best_val_iou = 0.0;
    int best_val_epoch = 0;
    double final_train_iou = 0.0;

    std::string to_csv() const;  // epoch,train_loss,val_iou
};

struct TrainResult {
    net::ModelParams params;           // final-epoch weights
    net::ModelParams best_val_params;  // weights at the best validation IoU
    Metrics metrics;
    SplitAssignment split;
};

// Minibatch Adam on BCE with per-epoch validation IoU. Deterministic given the
// config seeds. `initial`/`start_epoch` support resuming from a checkpoint.
TrainResult train(const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const Dataset& dataset,
                  const std::optional<net::ModelParams>& initial = std::nullopt,
                  int start_epoch = 0);

// ---- evaluation --------------------------------------------------------

struct EvalRow {
    std::string view_set;  // "+"-joined view names
    double threshold = 0.0;
    double iou = 0.0;
};

struct EvalReport {
    std::string model;
    std::vector<EvalRow> rows;

    std::string to_csv() const;  // model,view_set,threshold,iou
    double iou_for(const std::string& view_set, double threshold) const;
};

// mean test IoU per requested view subset and threshold
EvalReport evaluate(const net::ModelConfig& cfg, const net::ModelParams& params,
                    const Dataset& test_set, const EvalConfig& eval_cfg,
                    const std::string& model_name = "model");

// Table-style comparison of two evaluations: the second model's rows carry the
// percentage difference against the first.
std::string comparison_csv(const EvalReport& reference, const EvalReport& other);

}  // namespace epivox::train
