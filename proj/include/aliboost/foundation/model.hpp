#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/core/error.hpp"
#include "aliboost/core/mlp.hpp"
#include "aliboost/core/stats.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/world.hpp"

namespace aliboost::foundation {

enum class Provenance { foundation, cold };

struct CTRPrediction {
    double value = 0.5;
    Provenance source = Provenance::foundation;
};

struct TrainConfig {
    int embedding_dim = 8;
    int hidden = 16;
    int epochs = 4;
    int batch_size = 128;
    double learning_rate = 0.01;
    double l2 = 1e-6;
    double init_scale = 0.1;
    double holdout_fraction = 0.1;
    Slot cutoff = 0;  // items uploaded at or after this slot may not appear in training events
    std::uint64_t seed = 1;
};

/// Platform CTR model: user/item embeddings feeding a two-layer head over
/// [e_u * e_i, f_u, f_i]. Items without a trained row (everything uploaded
/// after training) use the zero embedding.
class FoundationModel {
public:
    int dim = 0;
    std::size_t user_feature_dim = 0;
    std::size_t item_feature_dim = 0;
    Vec user_embeddings;          // num_users x dim
    std::vector<int> item_row;    // item id -> embedding row, -1 when untrained
    Vec item_embeddings;          // rows x dim
    Mlp head;
    Slot trained_on_slot = 0;

    static FoundationModel zeros(std::size_t num_users, std::size_t user_feature_dim, std::size_t item_feature_dim,
                                 int dim, int hidden) {
        FoundationModel m;
        m.dim = dim;
        m.user_feature_dim = user_feature_dim;
        m.item_feature_dim = item_feature_dim;
        m.user_embeddings.assign(num_users * static_cast<std::size_t>(dim), 0.0);
        m.head = Mlp({static_cast<int>(dim + user_feature_dim + item_feature_dim), hidden, 1},
                     {Activation::tanh, Activation::identity});
        return m;
    }

    std::size_t input_dim() const { return static_cast<std::size_t>(dim) + user_feature_dim + item_feature_dim; }
    std::size_t num_users() const { return dim == 0 ? 0 : user_embeddings.size() / static_cast<std::size_t>(dim); }

    bool has_trained_embedding(ItemId item) const {
        return item.value >= 0 && static_cast<std::size_t>(item.value) < item_row.size() &&
               item_row[static_cast<std::size_t>(item.value)] >= 0;
    }

    std::span<const double> user_embedding(UserId u) const {
        if (u.value < 0 || static_cast<std::size_t>(u.value) >= num_users()) {
            throw LookupError("foundation: unknown user id " + std::to_string(u.value));
        }
        return {user_embeddings.data() + static_cast<std::size_t>(u.value) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }

    /// Trained row, or an empty span for the zero fallback.
    std::span<const double> item_embedding(ItemId i) const {
        if (!has_trained_embedding(i)) return {};
        const auto row = static_cast<std::size_t>(item_row[static_cast<std::size_t>(i.value)]);
        return {item_embeddings.data() + row * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }

    void assemble_input(std::span<const double> eu, std::span<const double> fu, std::span<const double> ei,
                        std::span<const double> fi, Vec& x) const {
        if (fu.size() != user_feature_dim || fi.size() != item_feature_dim) {
            throw FeatureError("foundation: feature dimension mismatch");
        }
        x.resize(input_dim());
        for (int k = 0; k < dim; ++k) {
            x[static_cast<std::size_t>(k)] = ei.empty() ? 0.0 : eu[static_cast<std::size_t>(k)] * ei[static_cast<std::size_t>(k)];
        }
        std::copy(fu.begin(), fu.end(), x.begin() + dim);
        std::copy(fi.begin(), fi.end(), x.begin() + dim + static_cast<std::ptrdiff_t>(user_feature_dim));
    }

    double logit(UserId u, std::span<const double> fu, ItemId i, std::span<const double> fi) const {
        Vec x;
        assemble_input(user_embedding(u), fu, item_embedding(i), fi, x);
        return head.forward(x);
    }
};

inline double foundation_logit(const FoundationModel& model, const sim::WorldState& world, UserId user, ItemId item) {
    const auto& u = world.user(user);
    const auto& it = world.item(item);
    return model.logit(user, u.features, item, it.content_features);
}

/// y^foun for a (user, item) pair. Pure; cold items go through the zero-embedding path.
inline CTRPrediction foundation_predict(const FoundationModel& model, const sim::WorldState& world, UserId user,
                                        ItemId item, Slot /*slot*/ = 0) {
    return {sigmoid(foundation_logit(model, world, user, item)), Provenance::foundation};
}

/// Memoized foundation logits. Valid because the model is frozen and the
/// features it reads are static, so each (user, item) pair is scored once.
class FoundationCache {
public:
    FoundationCache(const FoundationModel& model, const sim::WorldState& world) : model_(&model), world_(&world) {}

    double logit(UserId user, ItemId item) {
        const auto i = static_cast<std::size_t>(item.value);
        if (!world_->has_item(item)) throw LookupError("unknown item id " + std::to_string(item.value));
        if (!world_->has_user(user)) throw LookupError("unknown user id " + std::to_string(user.value));
        if (rows_.size() <= i) rows_.resize(world_->items.size());
        Vec& row = rows_[i];
        if (row.empty()) row.assign(world_->users.size(), std::numeric_limits<double>::quiet_NaN());
        double& v = row[static_cast<std::size_t>(user.value)];
        if (std::isnan(v)) v = foundation_logit(*model_, *world_, user, item);
        return v;
    }

    double predict(UserId user, ItemId item) { return sigmoid(logit(user, item)); }

    const FoundationModel& model() const { return *model_; }

private:
    const FoundationModel* model_;
    const sim::WorldState* world_;
    std::vector<Vec> rows_;
};

/// Gradient buffers laid out like the model's parameter tables.
struct FoundationGrad {
    Vec head;
    Vec user_embeddings;
    Vec item_embeddings;
    std::vector<int> touched_users;
    std::vector<int> touched_item_rows;

    void reset(const FoundationModel& m) {
        head.assign(m.head.param_count(), 0.0);
        if (user_embeddings.size() != m.user_embeddings.size()) user_embeddings.assign(m.user_embeddings.size(), 0.0);
        if (item_embeddings.size() != m.item_embeddings.size()) item_embeddings.assign(m.item_embeddings.size(), 0.0);
        const auto d = static_cast<std::size_t>(m.dim);
        for (int u : touched_users) std::fill_n(user_embeddings.begin() + static_cast<std::ptrdiff_t>(u * d), d, 0.0);
        for (int r : touched_item_rows) std::fill_n(item_embeddings.begin() + static_cast<std::ptrdiff_t>(r * d), d, 0.0);
        touched_users.clear();
        touched_item_rows.clear();
    }
};

/// Mean binary cross-entropy over the batch plus l2 * (||head||^2 + squared
/// norms of the embedding rows the batch touches). Fills `grad` when given.
inline double foundation_loss(const FoundationModel& model, const sim::WorldState& world,
                              std::span<const sim::EventRecord> batch, double l2, FoundationGrad* grad) {
    if (batch.empty()) throw TrainingError("foundation: empty batch");
    if (grad != nullptr) grad->reset(model);
    const auto d = static_cast<std::size_t>(model.dim);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    Vec x;
    Vec dx(model.input_dim());
    Mlp::Trace trace;
    std::vector<int> users_in_batch;
    std::vector<int> rows_in_batch;

    for (const auto& e : batch) {
        const auto& u = world.user(e.user_id);
        const auto& it = world.item(e.item_id);
        const auto eu = model.user_embedding(e.user_id);
        const auto ei = model.item_embedding(e.item_id);
        model.assemble_input(eu, u.features, ei, it.content_features, x);
        const double z = model.head.forward(x, trace);
        const double p = std::clamp(sigmoid(z), 1e-12, 1.0 - 1e-12);
        const double y = e.clicked ? 1.0 : 0.0;
        loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * scale;
        if (std::find(users_in_batch.begin(), users_in_batch.end(), e.user_id.value) == users_in_batch.end()) {
            users_in_batch.push_back(e.user_id.value);
        }
        const int row = model.has_trained_embedding(e.item_id) ? model.item_row[static_cast<std::size_t>(e.item_id.value)] : -1;
        if (row >= 0 && std::find(rows_in_batch.begin(), rows_in_batch.end(), row) == rows_in_batch.end()) {
            rows_in_batch.push_back(row);
        }
        if (grad == nullptr) continue;
        const double dz = (sigmoid(z) - y) * scale;
        model.head.backward(trace, x, dz, grad->head, dx);
        if (row >= 0) {
            double* gu = grad->user_embeddings.data() + static_cast<std::size_t>(e.user_id.value) * d;
            double* gi = grad->item_embeddings.data() + static_cast<std::size_t>(row) * d;
            for (std::size_t k = 0; k < d; ++k) {
                gu[k] += dx[k] * ei[k];
                gi[k] += dx[k] * eu[k];
            }
        }
    }

    // L2 over the head and the touched rows.
    double reg = 0.0;
    for (double w : model.head.params()) reg += w * w;
    for (int uid : users_in_batch) {
        for (double w : model.user_embedding(UserId{uid})) reg += w * w;
    }
    for (int row : rows_in_batch) {
        for (std::size_t k = 0; k < d; ++k) {
            const double w = model.item_embeddings[static_cast<std::size_t>(row) * d + k];
            reg += w * w;
        }
    }
    loss += l2 * reg;
    if (grad != nullptr) {
        const auto params = model.head.params();
        for (std::size_t k = 0; k < params.size(); ++k) grad->head[k] += 2.0 * l2 * params[k];
        for (int uid : users_in_batch) {
            const auto eu = model.user_embedding(UserId{uid});
            double* g = grad->user_embeddings.data() + static_cast<std::size_t>(uid) * d;
            for (std::size_t k = 0; k < d; ++k) g[k] += 2.0 * l2 * eu[k];
        }
        for (int row : rows_in_batch) {
            double* g = grad->item_embeddings.data() + static_cast<std::size_t>(row) * d;
            for (std::size_t k = 0; k < d; ++k) g[k] += 2.0 * l2 * model.item_embeddings[static_cast<std::size_t>(row) * d + k];
        }
        grad->touched_users = users_in_batch;
        grad->touched_item_rows = rows_in_batch;
    }
    return loss;
}

struct TrainResult {
    FoundationModel model;
    double train_auc = 0.5;
    double holdout_auc = 0.5;
    std::size_t train_size = 0;
    std::size_t holdout_size = 0;
};

inline double evaluate_auc(const FoundationModel& model, const sim::WorldState& world,
                           std::span<const sim::EventRecord> events) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(events.size());
    labels.reserve(events.size());
    for (const auto& e : events) {
        scores.push_back(foundation_logit(model, world, e.user_id, e.item_id));
        labels.push_back(e.clicked ? 1 : 0);
    }
    return auc(scores, labels).value_or(0.5);
}

/// Fits the foundation model on warm-item exposures with Adam on mini-batches.
/// A hashed `holdout_fraction` of events is kept out for the held-out AUC.
inline TrainResult train_foundation(std::span<const sim::EventRecord> events, const sim::WorldState& world,
                                    const TrainConfig& cfg) {
    if (events.empty()) throw TrainingError("foundation: empty event stream");
    if (cfg.embedding_dim < 1 || cfg.hidden < 1 || cfg.batch_size < 1 || cfg.epochs < 0) {
        throw ConfigError("foundation: invalid training configuration");
    }
    Slot last_slot = events.front().slot;
    for (const auto& e : events) {
        if (world.item(e.item_id).upload_slot >= cfg.cutoff) {
            throw TrainingError("foundation: training events include item " + std::to_string(e.item_id.value) +
                                " uploaded after the cutoff");
        }
        last_slot = std::max(last_slot, e.slot);
    }

    TrainResult result;
    FoundationModel& m = result.model;
    m = FoundationModel::zeros(world.users.size(), world.user_feature_dim(), world.item_feature_dim(), cfg.embedding_dim,
                               cfg.hidden);
    m.trained_on_slot = last_slot;
    m.item_row.assign(world.items.size(), -1);
    int rows = 0;
    for (const auto& it : world.items) {
        if (it.upload_slot < cfg.cutoff) m.item_row[static_cast<std::size_t>(it.id.value)] = rows++;
    }
    m.item_embeddings.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cfg.embedding_dim), 0.0);

    Rng rng = make_rng(cfg.seed, 0xf0f0);
    std::uniform_real_distribution<double> init(-cfg.init_scale, cfg.init_scale);
    for (auto& w : m.user_embeddings) w = init(rng);
    for (auto& w : m.item_embeddings) w = init(rng);
    m.head.init_uniform(rng);

    std::vector<sim::EventRecord> train;
    std::vector<sim::EventRecord> holdout;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const double h = static_cast<double>(mix64(cfg.seed * 0x9e37ULL + k) >> 11) * 0x1.0p-53;
        (h < cfg.holdout_fraction ? holdout : train).push_back(events[k]);
    }
    if (train.empty()) throw TrainingError("foundation: no training events after holdout split");

    const auto d = static_cast<std::size_t>(m.dim);
    AdamConfig adam{cfg.learning_rate};
    Vec head_m(m.head.param_count(), 0.0), head_v(m.head.param_count(), 0.0);
    Vec user_m(m.user_embeddings.size(), 0.0), user_v(m.user_embeddings.size(), 0.0);
    Vec item_m(m.item_embeddings.size(), 0.0), item_v(m.item_embeddings.size(), 0.0);
    FoundationGrad grad;
    long step = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<sim::EventRecord> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
            foundation_loss(m, world, batch, cfg.l2, &grad);
            ++step;
            adam_update(m.head.params(), grad.head, head_m, head_v, step, adam);
            for (int uid : grad.touched_users) {
                const std::size_t off = static_cast<std::size_t>(uid) * d;
                adam_update(std::span<double>(m.user_embeddings).subspan(off, d),
                            std::span<const double>(grad.user_embeddings).subspan(off, d),
                            std::span<double>(user_m).subspan(off, d), std::span<double>(user_v).subspan(off, d), step, adam);
            }
            for (int row : grad.touched_item_rows) {
                const std::size_t off = static_cast<std::size_t>(row) * d;
                adam_update(std::span<double>(m.item_embeddings).subspan(off, d),
                            std::span<const double>(grad.item_embeddings).subspan(off, d),
                            std::span<double>(item_m).subspan(off, d), std::span<double>(item_v).subspan(off, d), step, adam);
            }
        }
    }
    result.train_size = train.size();
    result.holdout_size = holdout.size();
    result.train_auc = evaluate_auc(m, world, train);
    result.holdout_auc = holdout.empty() ? result.train_auc : evaluate_auc(m, world, holdout);
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format (structured text, version 1):
//   {"format": "aliboost.foundation", "version": 1, "dim", "user_feature_dim",
//    "item_feature_dim", "trained_on_slot", "head": {"sizes", "activations",
//    "params"}, "user_embeddings": [...], "item_row": [...],
//    "item_embeddings": [...]}
// Arrays are flat and row-major. Serialization is deterministic.
// ---------------------------------------------------------------------------

constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json to_json(const FoundationModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "aliboost.foundation";
    j["version"] = kCheckpointVersion;
    j["dim"] = m.dim;
    j["user_feature_dim"] = m.user_feature_dim;
    j["item_feature_dim"] = m.item_feature_dim;
    j["trained_on_slot"] = m.trained_on_slot;
    nlohmann::ordered_json head;
    head["sizes"] = m.head.sizes();
    std::vector<std::string> acts;
    for (auto a : m.head.activations()) acts.emplace_back(to_string(a));
    head["activations"] = acts;
    head["params"] = Vec(m.head.params().begin(), m.head.params().end());
    j["head"] = head;
    j["user_embeddings"] = m.user_embeddings;
    j["item_row"] = m.item_row;
    j["item_embeddings"] = m.item_embeddings;
    return j;
}

inline FoundationModel foundation_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "aliboost.foundation" || j.value("version", 0) != kCheckpointVersion) {
        throw ConfigError("foundation checkpoint: unsupported format or version");
    }
    FoundationModel m;
    m.dim = j.at("dim").get<int>();
    m.user_feature_dim = j.at("user_feature_dim").get<std::size_t>();
    m.item_feature_dim = j.at("item_feature_dim").get<std::size_t>();
    m.trained_on_slot = j.at("trained_on_slot").get<Slot>();
    const auto& head = j.at("head");
    std::vector<Activation> acts;
    for (const auto& a : head.at("activations")) acts.push_back(activation_from_string(a.get<std::string>()));
    m.head = Mlp(head.at("sizes").get<std::vector<int>>(), acts);
    const auto params = head.at("params").get<Vec>();
    if (params.size() != m.head.param_count()) throw ConfigError("foundation checkpoint: head parameter count mismatch");
    std::copy(params.begin(), params.end(), m.head.params().begin());
    m.user_embeddings = j.at("user_embeddings").get<Vec>();
    m.item_row = j.at("item_row").get<std::vector<int>>();
    m.item_embeddings = j.at("item_embeddings").get<Vec>();
    return m;
}

inline void save_checkpoint(const FoundationModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out << to_json(m).dump() << '\n';
}

inline FoundationModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read checkpoint: " + path);
    return foundation_from_json(nlohmann::json::parse(in));
}

}  // namespace aliboost::foundation
