#pragma once

#include <string>
#include <vector>

#include "mo3tr/tensor.hpp"

namespace mo3tr {

// Named parameter list used by checkpoints and the optimizer. Order is the
// registration order and is stable across runs.
struct ParamRegistry {
    std::vector<std::pair<std::string, Tensor>> items;

    void add(const std::string& name, const Tensor& t) { items.emplace_back(name, t); }
};

// Sinusoidal encoding of a nonnegative time index:
// index 2i -> sin(t / 10000^(2i/d)), index 2i+1 -> cos(same). d must be even.
Tensor pe_time(int t, int d_z);

// 2D grid encoding: independent sinusoids over row and column, each d_z/2
// wide, concatenated. Cells are row-major, shape [(h*w) x d_z].
Tensor pe_grid(int h, int w, int d_z);

struct MhaOutput {
    Tensor out;                       // [q x d_z]
    std::vector<Tensor> head_weights; // per head, [q x k], rows sum to 1
};

struct MultiHeadAttention {
    int d_z = 0;
    int num_heads = 0;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;

    MultiHeadAttention() = default;
    MultiHeadAttention(int d_z, int num_heads, Rng& rng);

    // Scaled dot-product attention per head over the full key set, heads
    // concatenated and output-projected. keys and values must have equal row
    // counts; zero keys is an empty-context error.
    MhaOutput forward(const Tensor& queries, const Tensor& keys, const Tensor& values) const;

    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

struct FeedForward {
    Tensor w1, b1, w2, b2; // d_z -> ffn_mult*d_z -> d_z, relu in between

    FeedForward() = default;
    FeedForward(int d_z, int hidden, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

struct LayerNormParams {
    Tensor gain, bias;

    LayerNormParams() = default;
    explicit LayerNormParams(int d_z);

    Tensor forward(const Tensor& x) const { return layer_norm(x, gain, bias); }
    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

// Pre-norm self-attention encoder layer.
struct EncoderLayer {
    MultiHeadAttention self_attn;
    FeedForward ffn;
    LayerNormParams ln_attn, ln_ffn;

    EncoderLayer() = default;
    EncoderLayer(int d_z, int num_heads, int hidden, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

// Pre-norm decoder layer: self-attention among the object set, then
// cross-attention onto the encoded frame, then feed-forward. slot_pe is added
// to queries and keys of the self-attention and to queries of the
// cross-attention, never to values.
struct DecoderLayer {
    MultiHeadAttention self_attn;
    MultiHeadAttention cross_attn;
    FeedForward ffn;
    LayerNormParams ln_self, ln_cross, ln_ffn;

    DecoderLayer() = default;
    DecoderLayer(int d_z, int num_heads, int hidden, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& slot_pe, const Tensor& memory) const;
    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

// Cross-attention-only layer of the temporal stack: the query stream refines
// against the time-encoded history.
struct TemporalLayer {
    MultiHeadAttention cross_attn;
    FeedForward ffn;
    LayerNormParams ln_cross, ln_ffn;

    TemporalLayer() = default;
    TemporalLayer(int d_z, int num_heads, int hidden, Rng& rng);

    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

struct TemporalPrediction {
    Tensor embedding;                          // [1 x d_z]
    std::vector<std::vector<Tensor>> attention; // [layer][head] -> [1 x k]
};

// Predicts an object's embedding for a requested (possibly future) time step
// from its time-encoded history. The query is the time encoding of the
// requested step itself; callers add pe_time of each entry's own frame to the
// history rows before passing them in.
struct TemporalTransformer {
    int d_z = 0;
    std::vector<TemporalLayer> layers;
    LayerNormParams final_ln;

    TemporalTransformer() = default;
    TemporalTransformer(int d_z, int num_heads, int num_layers, int hidden, Rng& rng);

    TemporalPrediction predict(const Tensor& encoded_history, int target_time) const;

    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

struct SpatialTransformer {
    int d_z = 0;
    std::vector<EncoderLayer> encoder;
    std::vector<DecoderLayer> decoder;
    LayerNormParams encoder_ln, decoder_ln;

    SpatialTransformer() = default;
    SpatialTransformer(int d_z, int num_heads, int encoder_layers, int decoder_layers,
                       int hidden, Rng& rng);

    // Self-attention stack over the raw cell features. Positional content is
    // added by the caller after encoding.
    Tensor encode(const Tensor& grid) const;

    // Refines the concatenated object set against the encoded frame. Slot
    // order is preserved. slot_pe must match the object set shape.
    Tensor decode(const Tensor& objects, const Tensor& slot_pe, const Tensor& memory) const;

    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

struct HeadsOutput {
    Tensor class_logits; // [n x 2] (object, background)
    Tensor class_probs;  // [n x 2], rows sum to 1
    Tensor boxes;        // [n x 4] (cx, cy, w, h) in (0,1)
};

// Classification (1-layer) and box regression (3-layer, sigmoid-squashed).
struct Heads {
    Tensor cls_w, cls_b;
    Tensor box_w1, box_b1, box_w2, box_b2, box_w3, box_b3;

    Heads() = default;
    Heads(int d_z, Rng& rng);

    HeadsOutput apply(const Tensor& embeddings) const;
    void collect_params(ParamRegistry& reg, const std::string& prefix) const;
};

} // namespace mo3tr
