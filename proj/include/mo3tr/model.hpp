#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mo3tr/assignment.hpp"
#include "mo3tr/motmetrics.hpp"
#include "mo3tr/synthworld.hpp"
#include "mo3tr/trackstore.hpp"
#include "mo3tr/transformer.hpp"

namespace mo3tr {

struct ModelConfig {
    int d_z = 256;
    int num_heads = 8;
    int temporal_layers = 3;
    int encoder_layers = 6;
    int decoder_layers = 6;
    int ffn_mult = 4;
    int num_queries = 100;
    int grid_h = 16;
    int grid_w = 16;
    int channels = 8;
    std::string query_mode = "learned"; // "learned" | "piq"
    int alignment_width = 30;
    int patience = 5;
    double cd_threshold = 1.0;  // center-distance gate, in units of max(w, h)
    double iou_threshold = 0.5; // IoU gate

    int cells() const { return grid_h * grid_w; }
    void validate() const;
};

struct SlotResult {
    int64_t identity = -1; // >= 0 tracked, -1 initiation candidate
    double p_object = 0.0;
    BBox box;              // normalized center format
    Tensor embedding;      // [1 x d_z] refined
    Tensor class_logits;   // [1 x 2]
    Tensor class_probs;    // [1 x 2]
    Tensor box_t;          // [1 x 4]
};

struct TemporalAttentionRecord {
    int64_t identity = -1;
    std::vector<int> columns; // right-aligned column of each attended entry
    // [layer][head][entry]
    std::vector<std::vector<std::vector<double>>> weights;
};

struct FrameResult {
    int num_tracked = 0; // tracked slots come first, in ascending identity order
    std::vector<SlotResult> slots;
    std::vector<TemporalAttentionRecord> attention;
    Tensor memory; // encoded frame, for auxiliary losses
};

// Externally supplied per-frame detections (normalized corner boxes converted
// to center format), used only to license track initiations.
struct PublicDetections {
    std::map<int, std::vector<BBox>> frames; // 0-based frame index
};

PublicDetections load_public_detections(const std::string& path);

struct StepOptions {
    int history_cap = 0; // 0 means the full alignment width
    bool collect_attention = false;
    const PublicDetections* detections = nullptr;
    std::string filter_mode; // "", "cd", "iou"
    // When false, history entries are time-encoded by their ordinal position
    // instead of their absolute frame, so columns no longer line up across
    // tracks (the non-right-aligned training regime).
    bool right_align = true;
};

// Returns indices of candidates licensed by the detections, one detection per
// candidate at most. CD mode gates by center distance within
// threshold*max(w,h) of the detection; IoU mode by overlap.
std::vector<int> filter_initiations(const std::vector<BBox>& candidates,
                                    const std::vector<BBox>& detections,
                                    const std::string& mode, double threshold);

// Indices of the k highest-scoring cells, descending score, ties by cell
// order. k is clipped to the cell count.
std::vector<int> piq_top_k(const std::vector<double>& scores, int k);

class Mo3trModel {
public:
    Mo3trModel(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // tracking-time override for the public-detection gates
    void set_filter_thresholds(double cd, double iou) {
        cfg_.cd_threshold = cd;
        cfg_.iou_threshold = iou;
    }

    // Per-cell linear map over the rendered channels, the encoder stack, then
    // the 2D positional field. Result is [(h*w) x d_z].
    Tensor encode_frame(std::span<const float> frame) const;

    Tensor encoder_cell_logits(const Tensor& memory) const; // [(h*w) x 1]

    struct QuerySet {
        Tensor content; // [k x d_z]
        Tensor slot_pe; // [k x d_z]
    };
    QuerySet initiation_queries(const Tensor& memory) const;

    // Pure per-frame function: temporal prediction for every open track,
    // spatial decoding of {predictions, initiation queries}, heads. Does not
    // touch the track set. Tracked slots that fall below the score threshold
    // still take part in the decode; only lifecycle reacts to the threshold.
    FrameResult forward_frame(const TrackSet& ts, std::span<const float> frame, int t,
                              const StepOptions& opts = {}) const;

    // forward_frame plus lifecycle: confirmed tracked slots append, confirmed
    // initiation slots (surviving the public-detection filter, when enabled)
    // spawn fresh identities, misses consume patience and exhaust into
    // termination.
    FrameResult step(TrackSet& ts, std::span<const float> frame, int t,
                     const StepOptions& opts = {});

    ParamRegistry params() const;

    // weights are public for tests and the training loop
    Tensor cell_proj_w, cell_proj_b;
    SpatialTransformer spatial;
    TemporalTransformer temporal;
    Heads heads;
    Tensor learned_queries;   // [num_queries x d_z]
    Tensor query_slot_pe;     // [num_queries x d_z]
    Tensor padding_embedding; // [1 x d_z]; fills alignment padding, masked from keys
    Tensor enc_cls_w, enc_cls_b;
    Tensor grid_pe; // fixed sinusoid field, not a parameter

private:
    ModelConfig cfg_;
};

struct TrackingOptions {
    int history_cap = 0;
    const PublicDetections* detections = nullptr;
    std::string filter_mode;
    std::string attention_dump_path;  // empty = off
    std::string embeddings_dump_path; // empty = off
};

// Runs the model over a whole sequence and returns MOT rows at kMotScale.
TrackFile track_sequence(Mo3trModel& model, const SyntheticSequence& seq,
                         const TrackingOptions& opts = {});

} // namespace mo3tr
