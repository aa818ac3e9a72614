#include "epivox/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "epivox/rng.hpp"

namespace epivox::train {

using ad::Tensor;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// ---- configs -----------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidParams("epochs must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
        throw InvalidParams("betas must lie in [0, 1)");
    }
    if (!(learning_rate > 0)) throw InvalidParams("learning rate must be positive");
    if (!(epsilon > 0)) throw InvalidParams("epsilon must be positive");
    if (batch_size < 1) throw InvalidParams("batch size must be >= 1");
    const double s = split_ratios[0] + split_ratios[1] + split_ratios[2];
    if (std::abs(s - 1.0) > 1e-12) throw InvalidParams("split ratios must sum to 1");
    if (!(val_threshold > 0 && val_threshold < 1)) {
        throw InvalidParams("validation IoU threshold must lie in (0, 1)");
    }
}

std::string TrainConfig::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["epsilon"] = epsilon;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["split_ratios"] = split_ratios;
    j["val_threshold"] = val_threshold;
    j["stop_at_train_iou"] = stop_at_train_iou;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidParams(std::string("train config is not valid JSON: ") + e.what());
    }
    TrainConfig cfg;
    try {
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.epsilon = j.value("epsilon", cfg.epsilon);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("split_ratios")) {
            const auto r = j.at("split_ratios").get<std::vector<double>>();
            if (r.size() != 3) throw InvalidParams("split_ratios needs 3 entries");
            std::copy(r.begin(), r.end(), cfg.split_ratios.begin());
        }
        cfg.val_threshold = j.value("val_threshold", cfg.val_threshold);
        cfg.stop_at_train_iou = j.value("stop_at_train_iou", cfg.stop_at_train_iou);
    } catch (const json::exception& e) {
        throw InvalidParams(std::string("train config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

std::vector<double> EvalConfig::thresholds() const {
    if (threshold_sweep.empty()) return {iou_threshold};
    return threshold_sweep;
}

// ---- split ---------------------------------------------------------------

SplitAssignment split_dataset(int n, std::array<double, 3> ratios, std::uint64_t seed) {
    const double s = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(s - 1.0) > 1e-12 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
        throw InvalidParams("split ratios must be non-negative and sum to 1");
    }
    if (n < 3) throw TooFewCases("need at least 3 cases to split, got " +
                                 std::to_string(n));
    // +1e-9 absorbs representation error (0.7 * 1000 is just below 700)
    const int n_train = static_cast<int>(std::floor(ratios[0] * n + 1e-9));
    const int n_val = static_cast<int>(std::floor(ratios[1] * n + 1e-9));
    const int n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1) {
        throw TooFewCases("split " + std::to_string(n_train) + "/" +
                          std::to_string(n_val) + "/" + std::to_string(n_test) +
                          " leaves an empty subset");
    }
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        std::swap(ids[i], ids[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    SplitAssignment out;
    out.train.assign(ids.begin(), ids.begin() + n_train);
    out.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    out.test.assign(ids.begin() + n_train + n_val, ids.end());
    return out;
}

// ---- loss / optimizer / metrics ----------------------------------------

ad::Tensor bce_loss(const Tensor& pred, const Tensor& gt, ad::Tape* tape) {
    return ad::bce_mean(pred, gt, tape);
}

void adam_step(net::ModelParams& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, int t, const TrainConfig& cfg) {
    if (t < 1) throw InvalidParams("adam step counter starts at 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, theta] : params) {
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(name, Tensor::zeros(theta.shape)).first;
            state.v.emplace(name, Tensor::zeros(theta.shape));
        }
        Tensor& m = mit->second;
        Tensor& v = state.v.at(name);
        if (!m.same_shape(theta)) {
            throw ShapeMismatch("adam state shape mismatch for " + name);
        }
        const auto git = grads.find(name);
        const Tensor* g = git != grads.end() ? &git->second : nullptr;
        if (g && !g->same_shape(theta)) {
            throw ShapeMismatch("gradient shape mismatch for " + name);
        }
        for (std::size_t i = 0; i < theta.data.size(); ++i) {
            const double gi = g ? g->data[i] : 0.0;
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            theta.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

namespace {

double iou_impl(const double* pred, const double* gt, std::size_t n, double t) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (gt[i] != 0.0 && gt[i] != 1.0) {
            throw InvalidParams("ground truth grid is not binary");
        }
        const bool b = pred[i] >= t;
        const bool g = gt[i] == 1.0;
        inter += b && g;
        uni += b || g;
    }
    if (uni == 0) return 1.0;  // both empty: perfect agreement on emptiness
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double thresholded_iou(const Tensor& pred, const Tensor& gt, double t) {
    if (!pred.same_shape(gt)) {
        throw ShapeMismatch("iou: " + ad::shape_str(pred.shape) + " vs " +
                            ad::shape_str(gt.shape));
    }
    return iou_impl(pred.data.data(), gt.data.data(), pred.data.size(), t);
}

double thresholded_iou(const geom::VoxelGrid& pred, const geom::VoxelGrid& gt,
                       double t) {
    if (pred.dims != gt.dims) throw ShapeMismatch("iou: voxel grid dims differ");
    return iou_impl(pred.values.data(), gt.values.data(), pred.values.size(), t);
}

double percent_diff(double a, double b) {
    if (b == 0.0) throw DivisionByZero("percent_diff reference value is zero");
    return 100.0 * (a - b) / b;
}

std::string Metrics::to_csv() const {
    std::string csv = "epoch,train_loss,val_iou\n";
    for (const auto& e : epochs) {
        csv += std::to_string(e.epoch) + ',' + fmt_double(e.train_loss) + ',' +
               fmt_double(e.val_iou) + '\n';
    }
    return csv;
}

// ---- training loop ---------------------------------------------------------

namespace {

double mean_iou(const net::ModelConfig& cfg, const net::ModelParams& params,
                const Dataset& data, const std::vector<int>& ids, double threshold) {
    if (ids.empty()) return 0.0;
    double acc = 0.0;
    for (const int id : ids) {
        const Tensor pred = net::forward(cfg, params, data.cases[id].views);
        acc += thresholded_iou(pred, data.cases[id].gt, threshold);
    }
    return acc / static_cast<double>(ids.size());
}

}  // namespace

TrainResult train(const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const Dataset& dataset, const std::optional<net::ModelParams>& initial,
                  int start_epoch) {
    model_cfg.validate();
    cfg.validate();
    const int n = static_cast<int>(dataset.cases.size());
    for (const auto& c : dataset.cases) {
        if (static_cast<int>(c.views.size()) != model_cfg.num_views) {
            throw ViewCountMismatch("case " + c.id + " has " +
                                    std::to_string(c.views.size()) +
                                    " views, model expects " +
                                    std::to_string(model_cfg.num_views));
        }
    }

    TrainResult result;
    result.split = split_dataset(n, cfg.split_ratios, cfg.seed);
    result.params = initial ? *initial : net::init_params(model_cfg);

    AdamState adam;
    int step = 0;
    std::vector<int> order;

    for (int epoch = start_epoch + 1; epoch <= start_epoch + cfg.epochs; ++epoch) {
        order = result.split.train;
        Rng shuffle_rng(derive_seed(cfg.seed, 0x45504F43ull + epoch));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            std::swap(order[i], order[shuffle_rng.below(static_cast<std::uint64_t>(i) + 1)]);
        }

        double loss_sum = 0.0;
        int batch_count = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(order.size(),
                                             at + static_cast<std::size_t>(cfg.batch_size));
            try {
                ad::Tape tape;
                net::ModelParams live;
                std::map<std::string, int> nodes;
                for (const auto& [name, t] : result.params) {
                    Tensor leafed = tape.leaf(t);
                    nodes[name] = leafed.node;
                    live.emplace(name, std::move(leafed));
                }
                Tensor loss;
                for (std::size_t i = at; i < end; ++i) {
                    const TrainCase& item = dataset.cases[order[i]];
                    const Tensor pred = net::forward(model_cfg, live, item.views, &tape);
                    const Tensor l = bce_loss(pred, item.gt, &tape);
                    loss = (i == at) ? l : ad::add(loss, l, &tape);
                }
                loss = ad::scale(loss, 1.0 / static_cast<double>(end - at), &tape);
                if (!std::isfinite(loss.scalar())) {
                    throw NonFiniteValue("training loss is not finite");
                }
                const auto node_grads = tape.backward(loss.node);
                std::map<std::string, Tensor> grads;
                for (const auto& [name, node] : nodes) {
                    const auto it = node_grads.find(node);
                    if (it == node_grads.end()) continue;
                    check_finite(it->second, "gradient");
                    grads.emplace(name, it->second);
                }
                adam_step(result.params, grads, adam, ++step, cfg);
                loss_sum += loss.scalar();
                ++batch_count;
            } catch (const NonFiniteValue& e) {
                throw NonFiniteLoss("diverged at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step + 1) + ": " +
                                    e.what());
            }
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = batch_count ? loss_sum / batch_count : 0.0;
        em.val_iou = mean_iou(model_cfg, result.params, dataset, result.split.val,
                              cfg.val_threshold);
        em.train_iou = mean_iou(model_cfg, result.params, dataset, result.split.train,
                                cfg.val_threshold);
        result.metrics.epochs.push_back(em);
        result.metrics.final_train_iou = em.train_iou;
        if (em.val_iou > result.metrics.best_val_iou ||
            result.metrics.best_val_epoch == 0) {
            result.metrics.best_val_iou = em.val_iou;
            result.metrics.best_val_epoch = epoch;
            result.best_val_params = result.params;
        }
        if (cfg.stop_at_train_iou > 0 && em.train_iou >= cfg.stop_at_train_iou) break;
    }
    if (result.best_val_params.empty()) result.best_val_params = result.params;
    return result;
}

// ---- evaluation --------------------------------------------------------

std::string EvalReport::to_csv() const {
    std::string csv = "model,view_set,threshold,iou\n";
    for (const auto& row : rows) {
        csv += model + ',' + row.view_set + ',' + fmt_double(row.threshold) + ',' +
               fmt_double(row.iou) + '\n';
    }
    return csv;
}

double EvalReport::iou_for(const std::string& view_set, double threshold) const {
    for (const auto& row : rows) {
        if (row.view_set == view_set && row.threshold == threshold) return row.iou;
    }
    throw InvalidParams("no evaluation row for " + view_set);
}

EvalReport evaluate(const net::ModelConfig& cfg, const net::ModelParams& params,
                    const Dataset& test_set, const EvalConfig& eval_cfg,
                    const std::string& model_name) {
    if (test_set.cases.empty()) throw EmptyTestSet("no test cases");
    std::vector<std::vector<std::string>> sets = eval_cfg.view_sets;
    if (sets.empty()) sets.push_back(test_set.view_names);

    EvalReport report;
    report.model = model_name;
    for (const auto& names : sets) {
        if (names.empty()) throw EmptyTestSet("empty view subset requested");
        std::vector<std::size_t> idx;
        for (const auto& name : names) {
            const auto it = std::find(test_set.view_names.begin(),
                                      test_set.view_names.end(), name);
            if (it == test_set.view_names.end()) {
                throw EmptyTestSet("view " + name + " not present in the dataset");
            }
            idx.push_back(static_cast<std::size_t>(it - test_set.view_names.begin()));
        }
        std::string set_name = names[0];
        for (std::size_t i = 1; i < names.size(); ++i) set_name += "+" + names[i];

        // predictions are threshold-independent; compute once per case
        std::vector<Tensor> preds;
        preds.reserve(test_set.cases.size());
        for (const auto& c : test_set.cases) {
            std::vector<Tensor> views;
            views.reserve(idx.size());
            for (const auto i : idx) views.push_back(c.views[i]);
            preds.push_back(net::forward(cfg, params, views));
        }
        for (const double t : eval_cfg.thresholds()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                acc += thresholded_iou(preds[i], test_set.cases[i].gt, t);
            }
            report.rows.push_back(
                {set_name, t, acc / static_cast<double>(preds.size())});
        }
    }
    return report;
}

std::string comparison_csv(const EvalReport& reference, const EvalReport& other) {
    std::string csv = "method,views,iou,pct_diff\n";
    for (const auto& row : reference.rows) {
        csv += reference.model + ',' + row.view_set + ',' + fmt_double(row.iou) + ",\n";
        const double b = other.iou_for(row.view_set, row.threshold);
        csv += other.model + ',' + row.view_set + ',' + fmt_double(b) + ',' +
               fmt_double(percent_diff(b, row.iou)) + '\n';
    }
    return csv;
}

}  // namespace epivox::train
