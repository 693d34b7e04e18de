#pragma once

#include <string>
#include <vector>

#include "mo3tr/model.hpp"

namespace mo3tr {

struct TrainingConfig {
    int history_min = 1;
    int history_max = 30;
    int future_horizon = 10;
    double learning_rate = 1e-4;
    int lr_decay_epochs = 100; // x0.1 every this many epochs, per stage
    int stage1_epochs = 20;
    int stage2_epochs = 20;
    int batch_size = 4; // gradient accumulation
    int stage1_frames_per_epoch = 0; // 0 = every frame once
    int stage2_steps_per_epoch = 0;  // 0 = one step per eligible (sequence, t)
    bool aug_fn = true;
    bool aug_fp = true;
    bool aug_random_len = true;
    bool aug_right_align = true;
    double p_fn = 0.15; // drop probability per history entry
    double p_fp = 0.1;  // spurious-insert probability per track per window
    double bg_weight = 0.1;
    double future_loss_weight = 1.0;
    double piq_aux_weight = 0.1; // stage-1 per-cell objectness auxiliary
    CostWeights cost;
    uint64_t seed = 0;
    int checkpoint_every = 0; // epochs; 0 = only the final checkpoint

    void validate(const ModelConfig& model) const;
};

struct LossBreakdown {
    double total = 0, ce = 0, l1 = 0, giou = 0;
};

struct LossInfo {
    Tensor loss; // scalar, graph-connected
    LossBreakdown parts;
    int matched_initiations = 0;
    // what the assignment stage actually saw; tracked slots never enter it
    int hungarian_rows = 0;
    int hungarian_cols = 0;
};

// Runs frames t-K..t-1 through the model without history (initiation only),
// matches each frame's outputs against the visible ground truth, and groups
// the matched embeddings by identity into a right-aligned track set. Must be
// called without an active tape; stored embeddings are plain values.
TrackSet build_tracklets(const Mo3trModel& model, const SyntheticSequence& seq, int t, int K);

// Tracked slots pair with ground truth by identity alone (vanished identities
// supervise background); only initiation slots enter the Hungarian matching,
// against the visible ground truth that is not claimed by a tracked slot.
LossInfo match_and_loss(const FrameResult& fr, const std::vector<GtBox>& gt,
                        const TrainingConfig& cfg);

// Queries the temporal stack at t..t+horizon-1 from the same history and
// supervises the regressed boxes with the ground-truth future boxes. Frames
// where an object is absent contribute nothing; the result is the mean over
// contributing (track, frame) pairs.
LossInfo future_rollout_loss(const Mo3trModel& model, const TrackSet& ts,
                             const SyntheticSequence& seq, int t, int horizon,
                             const TrainingConfig& cfg);

// History perturbations: entry dropout (including the most recent entry,
// which forces re-identification) and spurious insertions sourced from other
// tracks' embeddings at the same frame, noise as a fallback.
void augment_trackset(TrackSet& ts, const TrainingConfig& cfg, int window_begin,
                      int window_end, Rng& rng);

double scheduled_lr(double base, int epoch, int decay_epochs);

class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    void zero_grad();
    void step();

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    std::vector<int64_t> steps_;
    double lr_, beta1_, beta2_, eps_;
};

struct EpochStats {
    int epoch = 0; // global epoch index across both stages
    int stage = 0;
    LossBreakdown mean;
};

struct TrainResult {
    std::vector<EpochStats> curve;
};

// Stage 1 trains the encoder and spatial path on detection-only frames;
// stage 2 trains end to end with tracklets, the future rollout and
// augmentation. Emits a per-epoch loss CSV and optional periodic checkpoints.
TrainResult train(Mo3trModel& model, const std::vector<SyntheticSequence>& data,
                  const TrainingConfig& cfg, const std::string& loss_csv_path = "",
                  const std::string& checkpoint_stem = "");

} // namespace mo3tr
