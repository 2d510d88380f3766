#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "aliboost/core/error.hpp"
#include "aliboost/core/mlp.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/sim/world.hpp"
#include "aliboost/stack/features.hpp"

namespace aliboost::stack {

struct StackConfig {
    std::vector<int> hidden{32};
    std::size_t cold_dim = 8;
    double regularization_coeff = 1e-4;
    double cold_init_scale = 0.05;
    std::map<std::string, double> source_weights{{"boost", 1.0}, {"natural", 1.0}};
};

struct FineTuneConfig {
    int epochs = 1;
    int batch_size = 64;
    double learning_rate = 0.005;
    std::uint64_t seed = 1;
};

/// Stacked cold-item CTR head: an MLP over the stacked input with ReLU hidden
/// layers and a logistic output, plus the trainable cold item embeddings.
///
/// Cold rows are materialized lazily. Until fine-tuning first touches an item,
/// its embedding is a deterministic function of (seed, item id), so reading
/// features never mutates the model.
class StackModel {
public:
    StackLayout layout;
    Mlp mlp;
    double regularization_coeff = 0.0;
    double cold_init_scale = 0.05;
    std::map<std::string, double> source_weights;
    std::uint64_t seed = 0;
    std::vector<Vec> cold_rows;  // by item id; empty until trained

    // Adam state.
    Vec mlp_m, mlp_v;
    std::vector<Vec> cold_m, cold_v;
    long step = 0;

    static StackModel create(const StackLayout& layout, const StackConfig& cfg, std::uint64_t seed) {
        if (cfg.regularization_coeff < 0.0) throw ConfigError("stack: regularization_coeff must be >= 0");
        if (cfg.source_weights.empty()) throw ConfigError("stack: at least one source weight required");
        for (const auto& [tag, w] : cfg.source_weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("stack: invalid weight for source '" + tag + "'");
        }
        StackModel m;
        m.layout = layout;
        m.layout.cold_dim = cfg.cold_dim;
        std::vector<int> sizes{static_cast<int>(m.layout.total_dim())};
        std::vector<Activation> acts;
        for (int h : cfg.hidden) {
            sizes.push_back(h);
            acts.push_back(Activation::relu);
        }
        sizes.push_back(1);
        acts.push_back(Activation::identity);
        m.mlp = Mlp(sizes, acts);
        Rng rng = make_rng(seed, 0x57ac);
        m.mlp.init_uniform(rng);
        m.regularization_coeff = cfg.regularization_coeff;
        m.cold_init_scale = cfg.cold_init_scale;
        m.source_weights = cfg.source_weights;
        m.seed = seed;
        m.mlp_m.assign(m.mlp.param_count(), 0.0);
        m.mlp_v.assign(m.mlp.param_count(), 0.0);
        return m;
    }

    bool has_cold_row(ItemId item) const {
        return item.value >= 0 && static_cast<std::size_t>(item.value) < cold_rows.size() &&
               !cold_rows[static_cast<std::size_t>(item.value)].empty();
    }

    void cold_embedding(ItemId item, std::span<double> out) const {
        if (out.size() != layout.cold_dim) throw FeatureError("stack: cold embedding size mismatch");
        if (has_cold_row(item)) {
            const Vec& row = cold_rows[static_cast<std::size_t>(item.value)];
            std::copy(row.begin(), row.end(), out.begin());
            return;
        }
        Rng rng = make_rng(seed, 0xc01d000000ULL + static_cast<std::uint64_t>(item.value));
        std::uniform_real_distribution<double> init(-cold_init_scale, cold_init_scale);
        for (auto& v : out) v = init(rng);
    }

    Vec cold_embedding(ItemId item) const {
        Vec v(layout.cold_dim);
        cold_embedding(item, v);
        return v;
    }

    Vec& materialize(ItemId item) {
        const auto i = static_cast<std::size_t>(item.value);
        if (cold_rows.size() <= i) {
            cold_rows.resize(i + 1);
            cold_m.resize(i + 1);
            cold_v.resize(i + 1);
        }
        if (cold_rows[i].empty()) {
            cold_rows[i] = cold_embedding(item);
            cold_m[i].assign(layout.cold_dim, 0.0);
            cold_v[i].assign(layout.cold_dim, 0.0);
        }
        return cold_rows[i];
    }

    double source_weight(const std::string& source) const {
        auto it = source_weights.find(source);
        if (it == source_weights.end()) throw ConfigError("stack: unknown sample source '" + source + "'");
        return it->second;
    }
};

/// Writes the stacked input for (user, item) into `x` given y_foun.
inline void write_stack_input(const StackModel& model, const foundation::FoundationModel& foundation,
                              const sim::WorldState& world, UserId user, ItemId item, const ItemSignals& signals,
                              Slot slot, double foundation_score, std::span<double> x) {
    const StackLayout& l = model.layout;
    if (x.size() != l.total_dim()) throw FeatureError("stack: input buffer has wrong dimension");
    if (static_cast<std::size_t>(foundation.dim) != l.foundation_dim) {
        throw FeatureError("stack: foundation embedding dimension does not match layout");
    }
    const auto& u = world.user(user);
    const auto& it = world.item(item);
    if (u.features.size() != l.user_feature_dim) throw FeatureError("stack: user feature dimension mismatch");
    x[l.score_offset()] = foundation_score;
    const auto eu = foundation.user_embedding(user);
    std::copy(eu.begin(), eu.end(), x.begin() + static_cast<std::ptrdiff_t>(l.user_embedding_offset()));
    std::copy(u.features.begin(), u.features.end(), x.begin() + static_cast<std::ptrdiff_t>(l.user_feature_offset()));
    model.cold_embedding(item, x.subspan(l.cold_offset(), l.cold_dim));
    fill_boost_features(l, it, signals, slot, x.subspan(l.boost_offset(), l.boost_dim()));
    fill_natural_features(signals, x.subspan(l.natural_offset(), StackLayout::natural_dim()));
}

/// x^stack = [y_foun, e_u, f_u, e_i^cold, f_i^boost, f_i^natural]. Pure.
inline StackFeatureVector build_stack_features(const foundation::FoundationModel& foundation, const StackModel& model,
                                               const sim::WorldState& world, UserId user, ItemId item,
                                               const RealtimeStats& realtime, Slot slot) {
    Vec x(model.layout.total_dim());
    const double y = foundation::foundation_predict(foundation, world, user, item, slot).value;
    write_stack_input(model, foundation, world, user, item, realtime.signals(item), slot, y, x);
    const StackLayout& l = model.layout;
    auto part = [&](std::size_t off, std::size_t n) {
        return Vec(x.begin() + static_cast<std::ptrdiff_t>(off), x.begin() + static_cast<std::ptrdiff_t>(off + n));
    };
    StackFeatureVector f;
    f.foundation_score = y;
    f.user_embedding = part(l.user_embedding_offset(), l.foundation_dim);
    f.user_features = part(l.user_feature_offset(), l.user_feature_dim);
    f.cold_embedding = part(l.cold_offset(), l.cold_dim);
    f.boost_features = part(l.boost_offset(), l.boost_dim());
    f.natural_features = part(l.natural_offset(), StackLayout::natural_dim());
    return f;
}

inline double stack_predict(const StackModel& model, std::span<const double> x) {
    return sigmoid(model.mlp.forward(x));
}

inline double stack_predict(const StackModel& model, const StackFeatureVector& x) {
    return stack_predict(model, x.values());
}

/// One labelled exposure used for fine-tuning; `source` must be a key of the
/// model's source weights.
struct EnrichedSample {
    UserId user;
    ItemId item;
    int label = 0;
    std::string source = "natural";
    Slot slot = 0;
};

/// An enriched sample with its stacked input frozen at exposure time. The
/// cold-embedding segment is re-read from the model on every use.
struct TrainingExample {
    EnrichedSample sample;
    Vec x;
};

inline TrainingExample prepare_example(const StackModel& model, foundation::FoundationCache& foundation,
                                       const sim::WorldState& world, const RealtimeStats& realtime,
                                       const EnrichedSample& s) {
    if (s.label != 0 && s.label != 1) throw TrainingError("stack: label must be 0 or 1");
    TrainingExample ex{s, Vec(model.layout.total_dim())};
    write_stack_input(model, foundation.model(), world, s.user, s.item, realtime.signals(s.item), s.slot,
                      foundation.predict(s.user, s.item), ex.x);
    return ex;
}

inline void refresh_cold_segment(const StackModel& model, const TrainingExample& ex, Vec& x) {
    x = ex.x;
    model.cold_embedding(ex.sample.item, std::span<double>(x).subspan(model.layout.cold_offset(), model.layout.cold_dim));
}

struct StackGradient {
    Vec mlp;
    std::map<std::int32_t, Vec> cold;  // item id -> d loss / d e_i^cold
};

constexpr double kPredictionClamp = 1e-7;

/// loss = sum_s w_s * BCE(y, p) + alpha * (||MLP params||^2 + ||touched cold rows||^2).
/// `predictions` must be stack_predict on the same batch; they are clamped to
/// [1e-7, 1 - 1e-7] before the logarithms. Non-finite or out-of-range
/// predictions raise NumericError.
inline double stack_loss(const StackModel& model, std::span<const TrainingExample> batch,
                         std::span<const double> predictions, StackGradient* grad = nullptr) {
    if (batch.empty() || batch.size() != predictions.size()) {
        throw TrainingError("stack: batch and predictions must be non-empty and equal in size");
    }
    const StackLayout& l = model.layout;
    if (grad != nullptr) {
        grad->mlp.assign(model.mlp.param_count(), 0.0);
        grad->cold.clear();
    }
    double loss = 0.0;
    Vec x;
    Vec dx(l.total_dim());
    Mlp::Trace trace;
    std::map<std::int32_t, bool> touched;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const TrainingExample& ex = batch[k];
        const double p_raw = predictions[k];
        if (!std::isfinite(p_raw) || p_raw < 0.0 || p_raw > 1.0) {
            throw NumericError("stack: prediction outside [0,1]");
        }
        const double p = std::clamp(p_raw, kPredictionClamp, 1.0 - kPredictionClamp);
        const double y = static_cast<double>(ex.sample.label);
        const double w = model.source_weight(ex.sample.source);
        loss += w * -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        touched[ex.sample.item.value] = true;
        if (grad == nullptr) continue;
        refresh_cold_segment(model, ex, x);
        model.mlp.forward(x, trace);
        model.mlp.backward(trace, x, w * (p_raw - y), grad->mlp, dx);
        Vec& gc = grad->cold[ex.sample.item.value];
        if (gc.empty()) gc.assign(l.cold_dim, 0.0);
        for (std::size_t c = 0; c < l.cold_dim; ++c) gc[c] += dx[l.cold_offset() + c];
    }
    const double a = model.regularization_coeff;
    if (a > 0.0) {
        double reg = 0.0;
        for (double v : model.mlp.params()) reg += v * v;
        Vec e(l.cold_dim);
        for (const auto& [id, unused] : touched) {
            model.cold_embedding(ItemId{id}, e);
            for (double v : e) reg += v * v;
            if (grad != nullptr) {
                Vec& gc = grad->cold[id];
                for (std::size_t c = 0; c < l.cold_dim; ++c) gc[c] += 2.0 * a * e[c];
            }
        }
        loss += a * reg;
        if (grad != nullptr) {
            const auto params = model.mlp.params();
            for (std::size_t k = 0; k < params.size(); ++k) grad->mlp[k] += 2.0 * a * params[k];
        }
    }
    return loss;
}

inline Vec stack_predictions(const StackModel& model, std::span<const TrainingExample> batch) {
    Vec preds;
    preds.reserve(batch.size());
    Vec x;
    for (const auto& ex : batch) {
        refresh_cold_segment(model, ex, x);
        preds.push_back(stack_predict(model, x));
    }
    return preds;
}

/// Predict-then-loss on the current parameters.
inline double stack_objective(const StackModel& model, std::span<const TrainingExample> batch,
                              StackGradient* grad = nullptr) {
    const Vec preds = stack_predictions(model, batch);
    return stack_loss(model, batch, preds, grad);
}

/// Incremental Adam steps over one slot's examples. The foundation model is
/// not an argument and so cannot change.
inline StackModel& fine_tune(StackModel& model, std::span<const TrainingExample> examples, const FineTuneConfig& cfg) {
    if (examples.empty() || cfg.learning_rate == 0.0 || cfg.epochs <= 0) return model;
    if (cfg.batch_size < 1) throw ConfigError("stack: batch_size must be >= 1");
    const AdamConfig adam{cfg.learning_rate};
    Rng rng = make_rng(cfg.seed, 0xf17e0000ULL + static_cast<std::uint64_t>(model.step));
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TrainingExample> batch;
    StackGradient grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
            stack_objective(model, batch, &grad);
            ++model.step;
            adam_update(model.mlp.params(), grad.mlp, model.mlp_m, model.mlp_v, model.step, adam);
            for (auto& [id, g] : grad.cold) {
                Vec& row = model.materialize(ItemId{id});
                const auto i = static_cast<std::size_t>(id);
                adam_update(row, g, model.cold_m[i], model.cold_v[i], model.step, adam);
            }
        }
    }
    return model;
}

/// Fast scorer for one slot. The first layer splits into a user part, an item
/// part and the y_foun column; both parts are cached, so scoring a pair costs
/// one hidden-layer pass. Agrees with stack_predict up to rounding.
class PairScorer {
public:
    PairScorer(const StackModel& model, foundation::FoundationCache& foundation, const sim::WorldState& world,
               const RealtimeStats& realtime, Slot slot)
        : model_(&model), foundation_(&foundation), world_(&world), realtime_(&realtime), slot_(slot) {
        hidden_ = static_cast<std::size_t>(model.mlp.sizes()[1]);
        cols_ = model.layout.total_dim();
    }

    Slot slot() const { return slot_; }

    double foundation_score(UserId user, ItemId item) { return foundation_->predict(user, item); }

    double predict(UserId user, ItemId item) { return predict(user, item, foundation_score(user, item)); }

    double predict(UserId user, ItemId item, double foundation_score) {
        const Vec& ip = item_part(item);
        const Vec& up = user_part(user);
        pre_.resize(hidden_);
        for (std::size_t r = 0; r < hidden_; ++r) {
            pre_[r] = ip[r] + up[r] + model_->mlp.weight(0, r, 0) * foundation_score;
        }
        return sigmoid(model_->mlp.forward_from_first_pre(pre_));
    }

    Vec distribution(ItemId item, std::span<const UserId> users) {
        Vec out;
        out.reserve(users.size());
        for (UserId u : users) out.push_back(predict(u, item));
        return out;
    }

private:
    const Vec& item_part(ItemId item) {
        const auto i = static_cast<std::size_t>(item.value);
        if (item_cache_.size() <= i) item_cache_.resize(std::max(i + 1, world_->items.size()));
        Vec& v = item_cache_[i];
        if (v.empty()) {
            Vec x(cols_);
            write_stack_input(*model_, foundation_->model(), *world_, UserId{0}, item, realtime_->signals(item), slot_,
                              0.0, x);
            v.assign(hidden_, 0.0);
            const std::size_t from = model_->layout.item_offset();
            for (std::size_t r = 0; r < hidden_; ++r) {
                double s = model_->mlp.bias(0, r);
                for (std::size_t c = from; c < cols_; ++c) s += model_->mlp.weight(0, r, c) * x[c];
                v[r] = s;
            }
        }
        return v;
    }

    const Vec& user_part(UserId user) {
        const auto u = static_cast<std::size_t>(user.value);
        if (!world_->has_user(user)) throw LookupError("unknown user id " + std::to_string(user.value));
        if (user_cache_.size() <= u) user_cache_.resize(world_->users.size());
        Vec& v = user_cache_[u];
        if (v.empty()) {
            const auto& l = model_->layout;
            const auto eu = foundation_->model().user_embedding(user);
            const auto& fu = world_->user(user).features;
            v.assign(hidden_, 0.0);
            for (std::size_t r = 0; r < hidden_; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < l.foundation_dim; ++c) s += model_->mlp.weight(0, r, l.user_embedding_offset() + c) * eu[c];
                for (std::size_t c = 0; c < l.user_feature_dim; ++c) s += model_->mlp.weight(0, r, l.user_feature_offset() + c) * fu[c];
                v[r] = s;
            }
        }
        return v;
    }

    const StackModel* model_;
    foundation::FoundationCache* foundation_;
    const sim::WorldState* world_;
    const RealtimeStats* realtime_;
    Slot slot_;
    std::size_t hidden_ = 0;
    std::size_t cols_ = 0;
    std::vector<Vec> item_cache_;
    std::vector<Vec> user_cache_;
    Vec pre_;
};

}  // namespace aliboost::stack
