#include "mo3tr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mo3tr/checkpoint.hpp"

namespace mo3tr {

void TrainingConfig::validate(const ModelConfig& model) const {
    if (history_min < 1 || history_max < history_min || history_max > model.alignment_width) {
        throw Error(ErrorKind::Config,
                    "train.history range must lie within [1, track.alignment_width]");
    }
    if (future_horizon < 1) {
        throw Error(ErrorKind::Config, "train.future_horizon must be at least 1");
    }
    if (learning_rate <= 0 || lr_decay_epochs < 1 || batch_size < 1) {
        throw Error(ErrorKind::Config, "bad optimizer settings");
    }
    if (stage1_epochs < 0 || stage2_epochs < 0) {
        throw Error(ErrorKind::Config, "epoch counts must be nonnegative");
    }
    if (p_fn < 0 || p_fn > 1 || p_fp < 0 || p_fp > 1 || bg_weight < 0) {
        throw Error(ErrorKind::Config, "bad augmentation settings");
    }
}

TrackSet build_tracklets(const Mo3trModel& model, const SyntheticSequence& seq, int t, int K) {
    if (t < 1 || K < 1) {
        throw Error(ErrorKind::Usage, "build_tracklets requires t >= 1 and K >= 1");
    }
    K = std::min(K, t);
    TrackSet ts(model.config().alignment_width);
    TrackSet no_history(model.config().alignment_width);
    const CostWeights weights; // assignment uses the standard (5, 2) weights

    for (int k = t - K; k < t; ++k) {
        FrameResult fr = model.forward_frame(no_history, seq.frames[k], k);
        std::vector<const GtBox*> visible;
        for (const GtBox& g : seq.gt[k]) {
            if (g.visible) visible.push_back(&g);
        }
        if (visible.empty()) continue;

        const int slots = static_cast<int>(fr.slots.size());
        CostMatrix c{static_cast<int>(visible.size()), slots, {}};
        c.values.resize(static_cast<std::size_t>(c.rows) * c.cols);
        for (int i = 0; i < c.rows; ++i) {
            for (int j = 0; j < c.cols; ++j) {
                c.at(i, j) = matching_cost(fr.slots[j].p_object, visible[i]->box,
                                           fr.slots[j].box, weights);
            }
        }
        for (auto [i, j] : hungarian(c).pairs) {
            const SlotResult& slot = fr.slots[j];
            // only embeddings classified as objects enter the history
            ts.append(visible[i]->id, k, slot.embedding.values(), slot.p_object);
        }
    }
    return ts;
}

namespace {

Tensor gt_box_tensor(const BBox& b) {
    return Tensor::from_values(1, 4, {b.cx, b.cy, b.w, b.h});
}

// -log p(target) from the logits
Tensor ce_term(const Tensor& logits, int target) {
    Tensor ls = log_softmax_rows(logits);
    return mul_scalar(slice_cols(ls, target, target + 1), -1.0);
}

struct BoxLossAcc {
    Tensor l1 = Tensor::scalar(0.0);
    Tensor giou_cost = Tensor::scalar(0.0);
    int pairs = 0;

    void add_pair(const Tensor& gt, const Tensor& pred, const CostWeights& w) {
        l1 = add(l1, mul_scalar(sum_all(abs_elems(sub(gt, pred))), w.alpha_l1));
        giou_cost = add(giou_cost, mul_scalar(sub(Tensor::scalar(1.0), giou_t(gt, pred)),
                                              w.alpha_giou));
        ++pairs;
    }
};

} // namespace

LossInfo match_and_loss(const FrameResult& fr, const std::vector<GtBox>& gt,
                        const TrainingConfig& cfg) {
    std::set<int64_t> gt_ids;
    for (const GtBox& g : gt) {
        if (!gt_ids.insert(g.id).second) {
            throw Error(ErrorKind::Data, "duplicate identity in ground truth");
        }
    }

    LossInfo info;
    const int num_slots = static_cast<int>(fr.slots.size());
    Tensor ce_acc = Tensor::scalar(0.0);
    BoxLossAcc box;

    // tracked slots: identity decides the partner, never the matcher
    std::set<int64_t> claimed;
    for (int i = 0; i < fr.num_tracked; ++i) {
        const SlotResult& slot = fr.slots[i];
        const GtBox* partner = nullptr;
        for (const GtBox& g : gt) {
            if (g.id == slot.identity) {
                partner = &g;
                break;
            }
        }
        if (partner != nullptr) {
            claimed.insert(partner->id);
            ce_acc = add(ce_acc, ce_term(slot.class_logits, 0));
            box.add_pair(gt_box_tensor(partner->box), slot.box_t, cfg.cost);
        } else {
            // vanished identity supervises background
            ce_acc = add(ce_acc, mul_scalar(ce_term(slot.class_logits, 1), cfg.bg_weight));
        }
    }

    // initiation slots: Hungarian against the unclaimed visible ground truth
    std::vector<const GtBox*> remaining;
    for (const GtBox& g : gt) {
        if (g.visible && claimed.count(g.id) == 0) remaining.push_back(&g);
    }
    const int num_init = num_slots - fr.num_tracked;
    std::vector<int> init_partner(num_init, -1);
    if (!remaining.empty() && num_init > 0) {
        CostMatrix c{static_cast<int>(remaining.size()), num_init, {}};
        c.values.resize(static_cast<std::size_t>(c.rows) * c.cols);
        for (int i = 0; i < c.rows; ++i) {
            for (int j = 0; j < c.cols; ++j) {
                const SlotResult& slot = fr.slots[fr.num_tracked + j];
                c.at(i, j) = matching_cost(slot.p_object, remaining[i]->box, slot.box, cfg.cost);
            }
        }
        info.hungarian_rows = c.rows;
        info.hungarian_cols = c.cols;
        for (auto [i, j] : hungarian(c).pairs) init_partner[j] = i;
    }
    for (int j = 0; j < num_init; ++j) {
        const SlotResult& slot = fr.slots[fr.num_tracked + j];
        if (init_partner[j] >= 0) {
            ce_acc = add(ce_acc, ce_term(slot.class_logits, 0));
            box.add_pair(gt_box_tensor(remaining[init_partner[j]]->box), slot.box_t, cfg.cost);
            ++info.matched_initiations;
        } else {
            ce_acc = add(ce_acc, mul_scalar(ce_term(slot.class_logits, 1), cfg.bg_weight));
        }
    }

    Tensor ce_mean = mul_scalar(ce_acc, num_slots > 0 ? 1.0 / num_slots : 0.0);
    double box_norm = 1.0 / std::max(1, box.pairs);
    Tensor l1_mean = mul_scalar(box.l1, box_norm);
    Tensor giou_mean = mul_scalar(box.giou_cost, box_norm);
    info.loss = add(add(ce_mean, l1_mean), giou_mean);
    info.parts.ce = ce_mean.scalar_value();
    info.parts.l1 = l1_mean.scalar_value();
    info.parts.giou = giou_mean.scalar_value();
    info.parts.total = info.loss.scalar_value();
    return info;
}

LossInfo future_rollout_loss(const Mo3trModel& model, const TrackSet& ts,
                             const SyntheticSequence& seq, int t, int horizon,
                             const TrainingConfig& cfg) {
    if (horizon < 1) {
        throw Error(ErrorKind::Usage, "future_rollout_loss: horizon must be at least 1");
    }
    const int d_z = model.config().d_z;
    LossInfo info;
    BoxLossAcc box;

    TrackSet::AlignedView view = ts.right_align(t);
    for (std::size_t row = 0; row < view.identities.size(); ++row) {
        std::vector<Tensor> encoded;
        int ordinal = 0;
        for (int col = 0; col < view.width; ++col) {
            if (!view.mask[row][col]) continue;
            const TrackEntry* e = view.cells[row][col];
            Tensor emb = Tensor::from_values(1, d_z, e->embedding);
            int idx = cfg.aug_right_align ? e->frame : ordinal;
            encoded.push_back(add(emb, pe_time(idx, d_z)));
            ++ordinal;
        }
        if (encoded.empty()) continue;
        Tensor history = encoded.size() == 1 ? encoded[0] : concat_rows(encoded);
        const int64_t id = view.identities[row];

        for (int j = 0; j < horizon; ++j) {
            int tau = t + j;
            if (tau >= seq.spec.length) break;
            const GtBox* target = nullptr;
            for (const GtBox& g : seq.gt[tau]) {
                if (g.id == id) {
                    target = &g;
                    break;
                }
            }
            if (target == nullptr) continue; // object absent at tau
            int query_time = cfg.aug_right_align ? tau : ordinal + j;
            Tensor z = model.temporal.predict(history, query_time).embedding;
            Tensor pred_box = model.heads.apply(z).boxes;
            box.add_pair(gt_box_tensor(target->box), pred_box, cfg.cost);
        }
    }

    if (box.pairs == 0) {
        info.loss = Tensor::scalar(0.0);
        return info;
    }
    double norm = 1.0 / box.pairs;
    Tensor l1_mean = mul_scalar(box.l1, norm);
    Tensor giou_mean = mul_scalar(box.giou_cost, norm);
    info.loss = add(l1_mean, giou_mean);
    info.parts.l1 = l1_mean.scalar_value();
    info.parts.giou = giou_mean.scalar_value();
    info.parts.total = info.loss.scalar_value();
    return info;
}

void augment_trackset(TrackSet& ts, const TrainingConfig& cfg, int window_begin,
                      int window_end, Rng& rng) {
    auto& tracks = ts.mutable_tracks();

    if (cfg.aug_fn && cfg.p_fn > 0.0) {
        for (auto& [id, track] : tracks) {
            std::vector<TrackEntry> kept;
            for (TrackEntry& e : track.history) {
                if (rng.uniform() >= cfg.p_fn) kept.push_back(std::move(e));
            }
            track.history = std::move(kept);
        }
    }

    if (cfg.aug_fp && cfg.p_fp > 0.0) {
        for (auto& [id, track] : tracks) {
            if (rng.uniform() >= cfg.p_fp) continue;
            if (window_end <= window_begin) continue;
            int frame = rng.uniform_int(window_begin, window_end - 1);
            bool occupied = false;
            for (const TrackEntry& e : track.history) {
                if (e.frame == frame) occupied = true;
            }
            if (occupied) continue;

            // prefer another track's embedding at the same frame (the look of
            // an occluder), then any foreign entry, then noise
            const std::vector<double>* source = nullptr;
            for (const auto& [oid, other] : tracks) {
                if (oid == id) continue;
                for (const TrackEntry& e : other.history) {
                    if (e.frame == frame) {
                        source = &e.embedding;
                        break;
                    }
                }
                if (source != nullptr) break;
            }
            if (source == nullptr) {
                for (const auto& [oid, other] : tracks) {
                    if (oid == id || other.history.empty()) continue;
                    source = &other.history[rng.next_u64() % other.history.size()].embedding;
                    break;
                }
            }
            std::vector<double> content;
            if (source != nullptr) {
                content = *source;
            } else if (!track.history.empty()) {
                content.resize(track.history[0].embedding.size());
                for (double& v : content) v = rng.normal();
            } else {
                continue;
            }
            track.history.push_back({frame, std::move(content)});
            std::sort(track.history.begin(), track.history.end(),
                      [](const TrackEntry& a, const TrackEntry& b) { return a.frame < b.frame; });
        }
    }
}

double scheduled_lr(double base, int epoch, int decay_epochs) {
    return base * std::pow(0.1, epoch / decay_epochs);
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    steps_.assign(params_.size(), 0);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].size(), 0.0);
        v_[i].assign(params_[i].size(), 0.0);
    }
}

void AdamOptimizer::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

void AdamOptimizer::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) continue;
        ++steps_[i];
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_[i]));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_[i]));
        auto vals = params_[i].mutable_values();
        auto grads = params_[i].grad();
        for (std::size_t c = 0; c < vals.size(); ++c) {
            const double g = grads[c];
            m_[i][c] = beta1_ * m_[i][c] + (1.0 - beta1_) * g;
            v_[i][c] = beta2_ * v_[i][c] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][c] / bc1;
            const double vhat = v_[i][c] / bc2;
            vals[c] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

template <typename T>
void shuffle_inplace(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.next_u64() % i]);
    }
}

Tensor piq_aux_loss(const Mo3trModel& model, const Tensor& memory,
                    const std::vector<GtBox>& gt) {
    const ModelConfig& cfg = model.config();
    Tensor logits = model.encoder_cell_logits(memory); // [(h*w) x 1]
    std::vector<double> target(static_cast<std::size_t>(cfg.cells()), 0.0);
    for (int r = 0; r < cfg.grid_h; ++r) {
        double cy = (r + 0.5) / cfg.grid_h;
        for (int c = 0; c < cfg.grid_w; ++c) {
            double cx = (c + 0.5) / cfg.grid_w;
            for (const GtBox& g : gt) {
                if (!g.visible) continue;
                if (cx >= g.box.left() && cx <= g.box.right() && cy >= g.box.top() &&
                    cy <= g.box.bottom()) {
                    target[static_cast<std::size_t>(r) * cfg.grid_w + c] = 1.0;
                    break;
                }
            }
        }
    }
    Tensor y = Tensor::from_values(cfg.cells(), 1, std::move(target));
    Tensor s = sigmoid(logits);
    Tensor pos = mul(y, log_elems(add_scalar(s, 1e-12)));
    Tensor one_minus_y = sub(Tensor::full(cfg.cells(), 1, 1.0), y);
    Tensor neg = mul(one_minus_y, log_elems(add_scalar(sub(Tensor::full(cfg.cells(), 1, 1.0), s), 1e-12)));
    return mul_scalar(sum_all(add(pos, neg)), -1.0 / cfg.cells());
}

} // namespace

TrainResult train(Mo3trModel& model, const std::vector<SyntheticSequence>& data,
                  const TrainingConfig& cfg, const std::string& loss_csv_path,
                  const std::string& checkpoint_stem) {
    cfg.validate(model.config());
    if (data.empty()) {
        throw Error(ErrorKind::Data, "training dataset is empty");
    }
    for (const SyntheticSequence& seq : data) {
        if (seq.spec.grid_h != model.config().grid_h ||
            seq.spec.grid_w != model.config().grid_w ||
            seq.spec.channels != model.config().channels) {
            throw Error(ErrorKind::Config, "dataset grid does not match the model configuration");
        }
    }

    std::ofstream csv;
    if (!loss_csv_path.empty()) {
        csv.open(loss_csv_path);
        if (!csv) {
            throw Error(ErrorKind::Io, "cannot write " + loss_csv_path);
        }
        csv << "epoch,stage,loss_total,loss_ce,loss_l1,loss_giou\n";
    }

    ParamRegistry reg = model.params();
    std::vector<Tensor> params;
    params.reserve(reg.items.size());
    for (auto& [name, t] : reg.items) params.push_back(t);

    TrainResult result;
    Rng root(cfg.seed);
    int global_epoch = 0;

    auto finish_epoch = [&](int stage, const LossBreakdown& sum, int steps) {
        EpochStats stats;
        stats.epoch = global_epoch;
        stats.stage = stage;
        if (steps > 0) {
            stats.mean.total = sum.total / steps;
            stats.mean.ce = sum.ce / steps;
            stats.mean.l1 = sum.l1 / steps;
            stats.mean.giou = sum.giou / steps;
        }
        result.curve.push_back(stats);
        if (csv.is_open()) {
            csv << stats.epoch << "," << stage << "," << stats.mean.total << ","
                << stats.mean.ce << "," << stats.mean.l1 << "," << stats.mean.giou << "\n";
            csv.flush();
        }
        ++global_epoch;
        if (!checkpoint_stem.empty() && cfg.checkpoint_every > 0 &&
            global_epoch % cfg.checkpoint_every == 0) {
            save_checkpoint(model, checkpoint_stem + ".epoch" + std::to_string(global_epoch) +
                                       ".ckpt");
        }
    };

    // stage 1: detection-only frames, initiation path and encoder
    {
        AdamOptimizer opt(params, cfg.learning_rate);
        TrackSet no_history(model.config().alignment_width);
        for (int epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
            opt.set_lr(scheduled_lr(cfg.learning_rate, epoch, cfg.lr_decay_epochs));
            Rng erng = root.split("stage1-epoch-" + std::to_string(epoch));
            std::vector<std::pair<int, int>> items; // (sequence, frame)
            for (std::size_t si = 0; si < data.size(); ++si) {
                for (int k = 0; k < data[si].spec.length; ++k) {
                    items.emplace_back(static_cast<int>(si), k);
                }
            }
            shuffle_inplace(items, erng);
            if (cfg.stage1_frames_per_epoch > 0 &&
                static_cast<int>(items.size()) > cfg.stage1_frames_per_epoch) {
                items.resize(cfg.stage1_frames_per_epoch);
            }

            LossBreakdown sum;
            int pending = 0;
            opt.zero_grad();
            for (auto [si, k] : items) {
                const SyntheticSequence& seq = data[si];
                Tape tape;
                FrameResult fr = model.forward_frame(no_history, seq.frames[k], k);
                LossInfo li = match_and_loss(fr, seq.gt[k], cfg);
                Tensor total = li.loss;
                if (cfg.piq_aux_weight > 0.0) {
                    total = add(total, mul_scalar(piq_aux_loss(model, fr.memory, seq.gt[k]),
                                                  cfg.piq_aux_weight));
                }
                backward(total);
                sum.total += li.parts.total;
                sum.ce += li.parts.ce;
                sum.l1 += li.parts.l1;
                sum.giou += li.parts.giou;
                if (++pending == cfg.batch_size) {
                    opt.step();
                    opt.zero_grad();
                    pending = 0;
                }
            }
            if (pending > 0) {
                opt.step();
                opt.zero_grad();
            }
            finish_epoch(1, sum, static_cast<int>(items.size()));
        }
    }

    // stage 2: end to end with tracklets, future rollout and augmentation
    {
        AdamOptimizer opt(params, cfg.learning_rate);
        for (int epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
            opt.set_lr(scheduled_lr(cfg.learning_rate, epoch, cfg.lr_decay_epochs));
            Rng erng = root.split("stage2-epoch-" + std::to_string(epoch));
            std::vector<std::pair<int, int>> steps; // (sequence, t)
            for (std::size_t si = 0; si < data.size(); ++si) {
                for (int t = 1; t < data[si].spec.length; ++t) {
                    steps.emplace_back(static_cast<int>(si), t);
                }
            }
            shuffle_inplace(steps, erng);
            if (cfg.stage2_steps_per_epoch > 0 &&
                static_cast<int>(steps.size()) > cfg.stage2_steps_per_epoch) {
                steps.resize(cfg.stage2_steps_per_epoch);
            }

            LossBreakdown sum;
            int pending = 0;
            opt.zero_grad();
            for (auto [si, t] : steps) {
                const SyntheticSequence& seq = data[si];
                int K = cfg.aug_random_len ? erng.uniform_int(cfg.history_min, cfg.history_max)
                                           : cfg.history_max;
                TrackSet ts = build_tracklets(model, seq, t, K);
                augment_trackset(ts, cfg, std::max(0, t - std::min(K, t)), t, erng);

                Tape tape;
                StepOptions so;
                so.right_align = cfg.aug_right_align;
                FrameResult fr = model.forward_frame(ts, seq.frames[t], t, so);
                LossInfo li = match_and_loss(fr, seq.gt[t], cfg);
                LossInfo fu = future_rollout_loss(model, ts, seq, t, cfg.future_horizon, cfg);
                Tensor total = add(li.loss, mul_scalar(fu.loss, cfg.future_loss_weight));
                backward(total);
                sum.total += total.scalar_value();
                sum.ce += li.parts.ce;
                sum.l1 += li.parts.l1 + fu.parts.l1;
                sum.giou += li.parts.giou + fu.parts.giou;
                if (++pending == cfg.batch_size) {
                    opt.step();
                    opt.zero_grad();
                    pending = 0;
                }
            }
            if (pending > 0) {
                opt.step();
                opt.zero_grad();
            }
            finish_epoch(2, sum, static_cast<int>(steps.size()));
        }
    }
    return result;
}

} // namespace mo3tr
