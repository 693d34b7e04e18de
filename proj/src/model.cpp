#include "mo3tr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mo3tr {

void ModelConfig::validate() const {
    if (d_z < 4 || d_z % 4 != 0) {
        throw Error(ErrorKind::Config, "model.d_z must be a positive multiple of 4");
    }
    if (num_heads < 1 || d_z % num_heads != 0) {
        throw Error(ErrorKind::Config, "model.d_z must be divisible by model.num_heads");
    }
    if (temporal_layers < 1 || encoder_layers < 1 || decoder_layers < 1) {
        throw Error(ErrorKind::Config, "layer counts must be positive");
    }
    if (ffn_mult < 1) {
        throw Error(ErrorKind::Config, "model.ffn_mult must be positive");
    }
    if (num_queries < 1) {
        throw Error(ErrorKind::Config, "model.num_queries must be positive");
    }
    if (grid_h < 1 || grid_w < 1 || channels < 1) {
        throw Error(ErrorKind::Config, "grid dimensions must be positive");
    }
    if (query_mode != "learned" && query_mode != "piq") {
        throw Error(ErrorKind::Config, "model.query_mode must be 'learned' or 'piq'");
    }
    if (alignment_width < 1 || patience < 1) {
        throw Error(ErrorKind::Config, "track.alignment_width and track.patience must be positive");
    }
}

PublicDetections load_public_detections(const std::string& path) {
    PublicDetections dets;
    for (const TrackRow& r : parse_detections_file(path)) {
        dets.frames[r.frame - 1].push_back(BBox::from_corner(
            r.left / kMotScale, r.top / kMotScale, r.width / kMotScale, r.height / kMotScale));
    }
    return dets;
}

std::vector<int> filter_initiations(const std::vector<BBox>& candidates,
                                    const std::vector<BBox>& detections,
                                    const std::string& mode, double threshold) {
    if (mode != "cd" && mode != "iou") {
        throw Error(ErrorKind::Config, "filter mode must be 'cd' or 'iou'");
    }
    struct Pair {
        double score; // lower is better
        int cand;
        int det;
    };
    std::vector<Pair> pairs;
    for (int ci = 0; ci < static_cast<int>(candidates.size()); ++ci) {
        for (int di = 0; di < static_cast<int>(detections.size()); ++di) {
            const BBox& c = candidates[ci];
            const BBox& d = detections[di];
            if (mode == "cd") {
                double dist = std::hypot(c.cx - d.cx, c.cy - d.cy);
                if (dist <= threshold * std::max(d.w, d.h)) pairs.push_back({dist, ci, di});
            } else {
                double overlap = iou(c, d);
                if (overlap >= threshold) pairs.push_back({-overlap, ci, di});
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.cand != b.cand) return a.cand < b.cand;
        return a.det < b.det;
    });
    std::vector<char> cand_used(candidates.size(), 0), det_used(detections.size(), 0);
    std::vector<int> survivors;
    for (const Pair& p : pairs) {
        if (cand_used[p.cand] || det_used[p.det]) continue;
        cand_used[p.cand] = det_used[p.det] = 1;
        survivors.push_back(p.cand);
    }
    std::sort(survivors.begin(), survivors.end());
    return survivors;
}

std::vector<int> piq_top_k(const std::vector<double>& scores, int k) {
    k = std::min<int>(k, static_cast<int>(scores.size()));
    std::vector<int> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    order.resize(k);
    return order;
}

Mo3trModel::Mo3trModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng(seed).split("model-init");
    cell_proj_w = Tensor::xavier_uniform(cfg_.channels, cfg_.d_z, rng);
    cell_proj_b = Tensor::zeros(1, cfg_.d_z, true);
    int hidden = cfg_.ffn_mult * cfg_.d_z;
    spatial = SpatialTransformer(cfg_.d_z, cfg_.num_heads, cfg_.encoder_layers,
                                 cfg_.decoder_layers, hidden, rng);
    temporal = TemporalTransformer(cfg_.d_z, cfg_.num_heads, cfg_.temporal_layers, hidden, rng);
    heads = Heads(cfg_.d_z, rng);
    learned_queries = Tensor::randn(cfg_.num_queries, cfg_.d_z, rng, 1.0, true);
    query_slot_pe = Tensor::randn(cfg_.num_queries, cfg_.d_z, rng, 1.0, true);
    padding_embedding = Tensor::randn(1, cfg_.d_z, rng, 1.0, true);
    enc_cls_w = Tensor::xavier_uniform(cfg_.d_z, 1, rng);
    enc_cls_b = Tensor::zeros(1, 1, true);
    grid_pe = pe_grid(cfg_.grid_h, cfg_.grid_w, cfg_.d_z);
}

ParamRegistry Mo3trModel::params() const {
    ParamRegistry reg;
    reg.add("encoder.cell_proj_w", cell_proj_w);
    reg.add("encoder.cell_proj_b", cell_proj_b);
    spatial.collect_params(reg, "spatial");
    temporal.collect_params(reg, "temporal");
    heads.collect_params(reg, "heads");
    reg.add("queries.content", learned_queries);
    reg.add("queries.slot_pe", query_slot_pe);
    reg.add("tracks.padding_embedding", padding_embedding);
    reg.add("encoder.cls_w", enc_cls_w);
    reg.add("encoder.cls_b", enc_cls_b);
    return reg;
}

Tensor Mo3trModel::encode_frame(std::span<const float> frame) const {
    const int cells = cfg_.cells();
    if (static_cast<int>(frame.size()) != cells * cfg_.channels) {
        throw Error(ErrorKind::Config,
                    "frame has " + std::to_string(frame.size()) + " floats, config expects " +
                        std::to_string(cells * cfg_.channels));
    }
    std::vector<double> vals(frame.begin(), frame.end());
    Tensor x = Tensor::from_values(cells, cfg_.channels, std::move(vals));
    Tensor projected = add_row_bias(matmul(x, cell_proj_w), cell_proj_b);
    Tensor encoded = spatial.encode(projected);
    return add(encoded, grid_pe);
}

Tensor Mo3trModel::encoder_cell_logits(const Tensor& memory) const {
    return add_row_bias(matmul(memory, enc_cls_w), enc_cls_b);
}

Mo3trModel::QuerySet Mo3trModel::initiation_queries(const Tensor& memory) const {
    QuerySet qs;
    if (cfg_.query_mode == "learned") {
        qs.content = learned_queries;
        qs.slot_pe = query_slot_pe;
        return qs;
    }
    // predicted initiation queries: the top-k encoder cells by objectness
    Tensor logits = encoder_cell_logits(memory);
    std::vector<double> scores(logits.values().begin(), logits.values().end());
    std::vector<int> picked = piq_top_k(scores, cfg_.num_queries);
    std::vector<Tensor> content_rows, pe_rows;
    content_rows.reserve(picked.size());
    for (int cell : picked) {
        content_rows.push_back(slice_rows(memory, cell, cell + 1));
        pe_rows.push_back(slice_rows(grid_pe, cell, cell + 1));
    }
    qs.content = content_rows.size() == 1 ? content_rows[0] : concat_rows(content_rows);
    qs.slot_pe = pe_rows.size() == 1 ? pe_rows[0] : concat_rows(pe_rows);
    return qs;
}

FrameResult Mo3trModel::forward_frame(const TrackSet& ts, std::span<const float> frame, int t,
                                      const StepOptions& opts) const {
    Tensor memory = encode_frame(frame);
    QuerySet queries = initiation_queries(memory);

    const int cap = opts.history_cap > 0 ? std::min(opts.history_cap, cfg_.alignment_width)
                                         : cfg_.alignment_width;
    FrameResult result;

    // temporal prediction per open track, aligned-window entries only
    TrackSet::AlignedView view = ts.right_align(t);
    std::vector<Tensor> predicted;
    std::vector<int64_t> predicted_ids;
    for (std::size_t row = 0; row < view.identities.size(); ++row) {
        std::vector<const TrackEntry*> entries;
        std::vector<int> columns;
        for (int col = 0; col < view.width; ++col) {
            if (!view.mask[row][col]) continue;
            entries.push_back(view.cells[row][col]);
            columns.push_back(col);
        }
        if (static_cast<int>(entries.size()) > cap) {
            entries.erase(entries.begin(), entries.end() - cap);
            columns.erase(columns.begin(), columns.end() - cap);
        }
        if (entries.empty()) continue; // nothing usable; lifecycle handles it as a miss
        std::vector<Tensor> encoded;
        encoded.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            Tensor emb = Tensor::from_values(1, cfg_.d_z, entries[i]->embedding);
            int time_index = opts.right_align ? entries[i]->frame : static_cast<int>(i);
            encoded.push_back(add(emb, pe_time(time_index, cfg_.d_z)));
        }
        Tensor history = encoded.size() == 1 ? encoded[0] : concat_rows(encoded);
        int target = opts.right_align ? t : static_cast<int>(encoded.size());
        TemporalPrediction pred = temporal.predict(history, target);
        predicted.push_back(pred.embedding);
        predicted_ids.push_back(view.identities[row]);
        if (opts.collect_attention) {
            TemporalAttentionRecord rec;
            rec.identity = view.identities[row];
            rec.columns = columns;
            for (const auto& layer : pred.attention) {
                std::vector<std::vector<double>> heads_w;
                for (const Tensor& hw : layer) {
                    heads_w.emplace_back(hw.values().begin(), hw.values().end());
                }
                rec.weights.push_back(std::move(heads_w));
            }
            result.attention.push_back(std::move(rec));
        }
    }

    result.num_tracked = static_cast<int>(predicted.size());
    Tensor objects, slot_pe;
    if (predicted.empty()) {
        objects = queries.content;
        slot_pe = queries.slot_pe;
    } else {
        std::vector<Tensor> obj_parts = predicted;
        obj_parts.push_back(queries.content);
        objects = concat_rows(obj_parts);
        std::vector<Tensor> pe_parts = {Tensor::zeros(result.num_tracked, cfg_.d_z),
                                        queries.slot_pe};
        slot_pe = concat_rows(pe_parts);
    }

    Tensor decoded = spatial.decode(objects, slot_pe, memory);
    HeadsOutput ho = heads.apply(decoded);
    result.memory = memory;

    const int total = decoded.rows();
    result.slots.reserve(total);
    for (int i = 0; i < total; ++i) {
        SlotResult slot;
        slot.identity = i < result.num_tracked ? predicted_ids[i] : -1;
        slot.embedding = slice_rows(decoded, i, i + 1);
        slot.class_logits = slice_rows(ho.class_logits, i, i + 1);
        slot.class_probs = slice_rows(ho.class_probs, i, i + 1);
        slot.box_t = slice_rows(ho.boxes, i, i + 1);
        slot.p_object = ho.class_probs.at(i, 0);
        slot.box = BBox{ho.boxes.at(i, 0), ho.boxes.at(i, 1), ho.boxes.at(i, 2),
                        ho.boxes.at(i, 3)};
        result.slots.push_back(std::move(slot));
    }
    return result;
}

FrameResult Mo3trModel::step(TrackSet& ts, std::span<const float> frame, int t,
                             const StepOptions& opts) {
    FrameResult fr = forward_frame(ts, frame, t, opts);

    // tracked slots: confirm or miss
    std::vector<int64_t> seen;
    for (int i = 0; i < fr.num_tracked; ++i) {
        const SlotResult& slot = fr.slots[i];
        seen.push_back(slot.identity);
        if (slot.p_object > 0.5) {
            ts.append(slot.identity, t, slot.embedding.values(), slot.p_object);
            ts.clear_misses(slot.identity);
        } else {
            ts.record_miss(slot.identity);
        }
    }
    // open tracks that produced no usable history this frame also miss
    for (int64_t id : ts.open_identities()) {
        if (std::find(seen.begin(), seen.end(), id) == seen.end()) {
            ts.record_miss(id);
        }
    }
    for (int64_t id : ts.open_identities()) {
        if (ts.track(id).consecutive_misses >= cfg_.patience) {
            ts.terminate(id, t);
        }
    }

    // initiation slots: candidates above threshold, optionally filtered
    std::vector<int> candidate_slots;
    std::vector<BBox> candidate_boxes;
    for (int i = fr.num_tracked; i < static_cast<int>(fr.slots.size()); ++i) {
        if (fr.slots[i].p_object > 0.5) {
            candidate_slots.push_back(i);
            candidate_boxes.push_back(fr.slots[i].box);
        }
    }
    std::vector<int> surviving;
    if (!opts.filter_mode.empty()) {
        std::vector<BBox> dets;
        if (opts.detections != nullptr) {
            auto it = opts.detections->frames.find(t);
            if (it != opts.detections->frames.end()) dets = it->second;
        }
        double threshold = opts.filter_mode == "cd" ? cfg_.cd_threshold : cfg_.iou_threshold;
        for (int idx : filter_initiations(candidate_boxes, dets, opts.filter_mode, threshold)) {
            surviving.push_back(candidate_slots[idx]);
        }
    } else {
        surviving = candidate_slots;
    }
    for (int i : surviving) {
        int64_t id = ts.fresh_identity();
        ts.append(id, t, fr.slots[i].embedding.values(), fr.slots[i].p_object);
        fr.slots[i].identity = id;
    }
    return fr;
}

TrackFile track_sequence(Mo3trModel& model, const SyntheticSequence& seq,
                         const TrackingOptions& opts) {
    if (seq.spec.grid_h != model.config().grid_h || seq.spec.grid_w != model.config().grid_w ||
        seq.spec.channels != model.config().channels) {
        throw Error(ErrorKind::Config, "sequence grid does not match the model configuration");
    }
    TrackSet ts(model.config().alignment_width);
    StepOptions step_opts;
    step_opts.history_cap = opts.history_cap;
    step_opts.detections = opts.detections;
    step_opts.filter_mode = opts.filter_mode;
    step_opts.collect_attention = !opts.attention_dump_path.empty();

    std::FILE* attn = nullptr;
    if (!opts.attention_dump_path.empty()) {
        attn = std::fopen(opts.attention_dump_path.c_str(), "w");
        if (attn == nullptr) {
            throw Error(ErrorKind::Io, "cannot write " + opts.attention_dump_path);
        }
        std::fprintf(attn, "frame,identity,layer,head,history_slot,weight\n");
    }

    TrackFile out;
    for (int t = 0; t < seq.spec.length; ++t) {
        FrameResult fr = model.step(ts, seq.frames[t], t, step_opts);
        for (const SlotResult& slot : fr.slots) {
            if (slot.identity < 0 || !(slot.p_object > 0.5)) continue;
            TrackRow row;
            row.frame = t + 1;
            row.id = slot.identity;
            row.left = slot.box.left() * kMotScale;
            row.top = slot.box.top() * kMotScale;
            row.width = slot.box.w * kMotScale;
            row.height = slot.box.h * kMotScale;
            row.conf = slot.p_object;
            out.rows.push_back(row);
        }
        if (attn != nullptr) {
            for (const TemporalAttentionRecord& rec : fr.attention) {
                for (std::size_t layer = 0; layer < rec.weights.size(); ++layer) {
                    for (std::size_t head = 0; head < rec.weights[layer].size(); ++head) {
                        const auto& w = rec.weights[layer][head];
                        for (std::size_t s = 0; s < w.size(); ++s) {
                            std::fprintf(attn, "%d,%lld,%zu,%zu,%d,%.9f\n", t,
                                         static_cast<long long>(rec.identity), layer, head,
                                         rec.columns[s], w[s]);
                        }
                    }
                }
            }
        }
    }
    if (attn != nullptr) std::fclose(attn);
    if (!opts.embeddings_dump_path.empty()) {
        ts.dump_embeddings(opts.embeddings_dump_path);
    }
    return out;
}

} // namespace mo3tr
