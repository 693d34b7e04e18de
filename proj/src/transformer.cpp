#include "mo3tr/transformer.hpp"

#include <cmath>

namespace mo3tr {

Tensor pe_time(int t, int d_z) {
    if (t < 0) {
        throw Error(ErrorKind::Usage, "pe_time: negative time index");
    }
    if (d_z <= 0 || d_z % 2 != 0) {
        throw Error(ErrorKind::Dimension, "pe_time: d_z must be positive and even");
    }
    std::vector<double> v(static_cast<std::size_t>(d_z));
    for (int i = 0; i < d_z / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * i / d_z);
        v[2 * i] = std::sin(t * freq);
        v[2 * i + 1] = std::cos(t * freq);
    }
    return Tensor::from_values(1, d_z, std::move(v));
}

Tensor pe_grid(int h, int w, int d_z) {
    if (d_z % 4 != 0) {
        throw Error(ErrorKind::Dimension, "pe_grid: d_z must be divisible by 4");
    }
    const int half = d_z / 2;
    std::vector<double> v(static_cast<std::size_t>(h) * w * d_z);
    for (int r = 0; r < h; ++r) {
        Tensor row_pe = pe_time(r, half);
        for (int c = 0; c < w; ++c) {
            Tensor col_pe = pe_time(c, half);
            double* cell = v.data() + (static_cast<std::size_t>(r) * w + c) * d_z;
            for (int i = 0; i < half; ++i) cell[i] = row_pe.at(0, i);
            for (int i = 0; i < half; ++i) cell[half + i] = col_pe.at(0, i);
        }
    }
    return Tensor::from_values(h * w, d_z, std::move(v));
}

MultiHeadAttention::MultiHeadAttention(int d_z_, int num_heads_, Rng& rng)
    : d_z(d_z_), num_heads(num_heads_) {
    if (d_z % num_heads != 0) {
        throw Error(ErrorKind::Dimension, "attention: d_z not divisible by head count");
    }
    wq = Tensor::xavier_uniform(d_z, d_z, rng);
    bq = Tensor::zeros(1, d_z, true);
    wk = Tensor::xavier_uniform(d_z, d_z, rng);
    bk = Tensor::zeros(1, d_z, true);
    wv = Tensor::xavier_uniform(d_z, d_z, rng);
    bv = Tensor::zeros(1, d_z, true);
    wo = Tensor::xavier_uniform(d_z, d_z, rng);
    bo = Tensor::zeros(1, d_z, true);
}

MhaOutput MultiHeadAttention::forward(const Tensor& queries, const Tensor& keys,
                                      const Tensor& values) const {
    if (!queries.valid() || !keys.valid() || !values.valid() || keys.rows() < 1) {
        throw Error(ErrorKind::Usage, "attention: empty context (no keys)");
    }
    if (keys.rows() != values.rows()) {
        throw Error(ErrorKind::Dimension, "attention: key/value row mismatch");
    }
    if (queries.cols() != d_z || keys.cols() != d_z || values.cols() != d_z) {
        throw Error(ErrorKind::Dimension, "attention: input width does not match d_z");
    }
    const int d_head = d_z / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    Tensor q = add_row_bias(matmul(queries, wq), bq);
    Tensor k = add_row_bias(matmul(keys, wk), bk);
    Tensor v = add_row_bias(matmul(values, wv), bv);

    MhaOutput result;
    std::vector<Tensor> head_outs;
    head_outs.reserve(num_heads);
    for (int h = 0; h < num_heads; ++h) {
        Tensor qh = slice_cols(q, h * d_head, (h + 1) * d_head);
        Tensor kh = slice_cols(k, h * d_head, (h + 1) * d_head);
        Tensor vh = slice_cols(v, h * d_head, (h + 1) * d_head);
        Tensor scores = mul_scalar(matmul(qh, transpose(kh)), scale);
        Tensor weights = softmax_rows(scores);
        head_outs.push_back(matmul(weights, vh));
        result.head_weights.push_back(weights);
    }
    Tensor merged = num_heads == 1 ? head_outs[0] : concat_cols(head_outs);
    result.out = add_row_bias(matmul(merged, wo), bo);
    return result;
}

void MultiHeadAttention::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add(prefix + ".wq", wq);
    reg.add(prefix + ".bq", bq);
    reg.add(prefix + ".wk", wk);
    reg.add(prefix + ".bk", bk);
    reg.add(prefix + ".wv", wv);
    reg.add(prefix + ".bv", bv);
    reg.add(prefix + ".wo", wo);
    reg.add(prefix + ".bo", bo);
}

FeedForward::FeedForward(int d_z, int hidden, Rng& rng) {
    w1 = Tensor::xavier_uniform(d_z, hidden, rng);
    b1 = Tensor::zeros(1, hidden, true);
    w2 = Tensor::xavier_uniform(hidden, d_z, rng);
    b2 = Tensor::zeros(1, d_z, true);
}

Tensor FeedForward::forward(const Tensor& x) const {
    Tensor h = relu(add_row_bias(matmul(x, w1), b1));
    return add_row_bias(matmul(h, w2), b2);
}

void FeedForward::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add(prefix + ".w1", w1);
    reg.add(prefix + ".b1", b1);
    reg.add(prefix + ".w2", w2);
    reg.add(prefix + ".b2", b2);
}

LayerNormParams::LayerNormParams(int d_z) {
    gain = Tensor::full(1, d_z, 1.0, true);
    bias = Tensor::zeros(1, d_z, true);
}

void LayerNormParams::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add(prefix + ".gain", gain);
    reg.add(prefix + ".bias", bias);
}

EncoderLayer::EncoderLayer(int d_z, int num_heads, int hidden, Rng& rng)
    : self_attn(d_z, num_heads, rng), ffn(d_z, hidden, rng), ln_attn(d_z), ln_ffn(d_z) {}

Tensor EncoderLayer::forward(const Tensor& x) const {
    Tensor n = ln_attn.forward(x);
    Tensor y = add(x, self_attn.forward(n, n, n).out);
    return add(y, ffn.forward(ln_ffn.forward(y)));
}

void EncoderLayer::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    self_attn.collect_params(reg, prefix + ".self");
    ffn.collect_params(reg, prefix + ".ffn");
    ln_attn.collect_params(reg, prefix + ".ln_attn");
    ln_ffn.collect_params(reg, prefix + ".ln_ffn");
}

DecoderLayer::DecoderLayer(int d_z, int num_heads, int hidden, Rng& rng)
    : self_attn(d_z, num_heads, rng),
      cross_attn(d_z, num_heads, rng),
      ffn(d_z, hidden, rng),
      ln_self(d_z),
      ln_cross(d_z),
      ln_ffn(d_z) {}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& slot_pe, const Tensor& memory) const {
    Tensor n = ln_self.forward(x);
    Tensor qk = add(n, slot_pe);
    Tensor y = add(x, self_attn.forward(qk, qk, n).out);

    Tensor n2 = ln_cross.forward(y);
    Tensor q2 = add(n2, slot_pe);
    Tensor z = add(y, cross_attn.forward(q2, memory, memory).out);

    return add(z, ffn.forward(ln_ffn.forward(z)));
}

void DecoderLayer::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    self_attn.collect_params(reg, prefix + ".self");
    cross_attn.collect_params(reg, prefix + ".cross");
    ffn.collect_params(reg, prefix + ".ffn");
    ln_self.collect_params(reg, prefix + ".ln_self");
    ln_cross.collect_params(reg, prefix + ".ln_cross");
    ln_ffn.collect_params(reg, prefix + ".ln_ffn");
}

TemporalLayer::TemporalLayer(int d_z, int num_heads, int hidden, Rng& rng)
    : cross_attn(d_z, num_heads, rng), ffn(d_z, hidden, rng), ln_cross(d_z), ln_ffn(d_z) {}

void TemporalLayer::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    cross_attn.collect_params(reg, prefix + ".cross");
    ffn.collect_params(reg, prefix + ".ffn");
    ln_cross.collect_params(reg, prefix + ".ln_cross");
    ln_ffn.collect_params(reg, prefix + ".ln_ffn");
}

TemporalTransformer::TemporalTransformer(int d_z_, int num_heads, int num_layers,
                                         int hidden, Rng& rng)
    : d_z(d_z_), final_ln(d_z_) {
    layers.reserve(num_layers);
    for (int i = 0; i < num_layers; ++i) layers.emplace_back(d_z, num_heads, hidden, rng);
}

TemporalPrediction TemporalTransformer::predict(const Tensor& encoded_history,
                                                int target_time) const {
    if (!encoded_history.valid() || encoded_history.rows() < 1) {
        throw Error(ErrorKind::Usage, "temporal_predict: empty history");
    }
    if (encoded_history.cols() != d_z) {
        throw Error(ErrorKind::Dimension, "temporal_predict: history width does not match d_z");
    }
    const Tensor& keys = encoded_history;

    TemporalPrediction pred;
    Tensor x = pe_time(target_time, d_z);
    for (const TemporalLayer& layer : layers) {
        MhaOutput att = layer.cross_attn.forward(layer.ln_cross.forward(x), keys, keys);
        x = add(x, att.out);
        x = add(x, layer.ffn.forward(layer.ln_ffn.forward(x)));
        pred.attention.push_back(std::move(att.head_weights));
    }
    pred.embedding = final_ln.forward(x);
    return pred;
}

void TemporalTransformer::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        layers[i].collect_params(reg, prefix + ".layer" + std::to_string(i));
    final_ln.collect_params(reg, prefix + ".final_ln");
}

SpatialTransformer::SpatialTransformer(int d_z_, int num_heads, int encoder_layers,
                                       int decoder_layers, int hidden, Rng& rng)
    : d_z(d_z_), encoder_ln(d_z_), decoder_ln(d_z_) {
    encoder.reserve(encoder_layers);
    for (int i = 0; i < encoder_layers; ++i) encoder.emplace_back(d_z, num_heads, hidden, rng);
    decoder.reserve(decoder_layers);
    for (int i = 0; i < decoder_layers; ++i) decoder.emplace_back(d_z, num_heads, hidden, rng);
}

Tensor SpatialTransformer::encode(const Tensor& grid) const {
    if (!grid.valid() || grid.rows() < 1) {
        throw Error(ErrorKind::Usage, "spatial encode: empty grid");
    }
    Tensor x = grid;
    for (const EncoderLayer& layer : encoder) x = layer.forward(x);
    return encoder_ln.forward(x);
}

Tensor SpatialTransformer::decode(const Tensor& objects, const Tensor& slot_pe,
                                  const Tensor& memory) const {
    if (!memory.valid() || memory.rows() < 1) {
        throw Error(ErrorKind::Usage, "spatial decode: empty grid");
    }
    Tensor x = objects;
    for (const DecoderLayer& layer : decoder) x = layer.forward(x, slot_pe, memory);
    return decoder_ln.forward(x);
}

void SpatialTransformer::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    for (std::size_t i = 0; i < encoder.size(); ++i)
        encoder[i].collect_params(reg, prefix + ".enc" + std::to_string(i));
    encoder_ln.collect_params(reg, prefix + ".encoder_ln");
    for (std::size_t i = 0; i < decoder.size(); ++i)
        decoder[i].collect_params(reg, prefix + ".dec" + std::to_string(i));
    decoder_ln.collect_params(reg, prefix + ".decoder_ln");
}

Heads::Heads(int d_z, Rng& rng) {
    cls_w = Tensor::xavier_uniform(d_z, 2, rng);
    cls_b = Tensor::zeros(1, 2, true);
    box_w1 = Tensor::xavier_uniform(d_z, d_z, rng);
    box_b1 = Tensor::zeros(1, d_z, true);
    box_w2 = Tensor::xavier_uniform(d_z, d_z, rng);
    box_b2 = Tensor::zeros(1, d_z, true);
    box_w3 = Tensor::xavier_uniform(d_z, 4, rng);
    box_b3 = Tensor::zeros(1, 4, true);
}

HeadsOutput Heads::apply(const Tensor& embeddings) const {
    HeadsOutput out;
    out.class_logits = add_row_bias(matmul(embeddings, cls_w), cls_b);
    out.class_probs = softmax_rows(out.class_logits);
    Tensor h = relu(add_row_bias(matmul(embeddings, box_w1), box_b1));
    h = relu(add_row_bias(matmul(h, box_w2), box_b2));
    out.boxes = sigmoid(add_row_bias(matmul(h, box_w3), box_b3));
    return out;
}

void Heads::collect_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add(prefix + ".cls_w", cls_w);
    reg.add(prefix + ".cls_b", cls_b);
    reg.add(prefix + ".box_w1", box_w1);
    reg.add(prefix + ".box_b1", box_b1);
    reg.add(prefix + ".box_w2", box_w2);
    reg.add(prefix + ".box_b2", box_b2);
    reg.add(prefix + ".box_w3", box_w3);
    reg.add(prefix + ".box_b3", box_b3);
}

} // namespace mo3tr
