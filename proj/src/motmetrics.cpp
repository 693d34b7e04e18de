#include "mo3tr/motmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mo3tr {

namespace {

constexpr double kInfeasible = 1e6; // gated-out pair cost inside a frame

TrackRow parse_row(const std::string& line, int line_no, bool allow_duplicate_ids) {
    (void)allow_duplicate_ids;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    if (fields.size() != 10) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 10 fields, got " +
                                          std::to_string(fields.size()));
    }
    TrackRow row;
    try {
        std::size_t used = 0;
        row.frame = std::stoi(fields[0], &used);
        row.id = std::stoll(fields[1]);
        row.left = std::stod(fields[2]);
        row.top = std::stod(fields[3]);
        row.width = std::stod(fields[4]);
        row.height = std::stod(fields[5]);
        row.conf = std::stod(fields[6]);
        row.x = std::stod(fields[7]);
        row.y = std::stod(fields[8]);
        row.z = std::stod(fields[9]);
    } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed field");
    }
    if (row.frame < 1) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": frame must be >= 1");
    }
    return row;
}

TrackFile parse_stream(std::istream& in, bool enforce_unique) {
    TrackFile tf;
    std::string line;
    int line_no = 0;
    std::set<std::pair<int, int64_t>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        TrackRow row = parse_row(line, line_no, !enforce_unique);
        if (enforce_unique && !seen.insert({row.frame, row.id}).second) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": duplicate (frame, id) pair");
        }
        tf.rows.push_back(row);
    }
    return tf;
}

BBox row_box(const TrackRow& r) {
    return BBox::from_corner(r.left, r.top, r.width, r.height);
}

} // namespace

TrackFile parse_mot(std::istream& in) { return parse_stream(in, true); }

TrackFile parse_mot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "missing file " + path);
    }
    return parse_mot(in);
}

void write_mot(const TrackFile& tf, std::ostream& out) {
    char buf[256];
    for (const TrackRow& r : tf.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      r.frame, static_cast<long long>(r.id), r.left, r.top, r.width,
                      r.height, r.conf, r.x, r.y, r.z);
        out << buf;
    }
}

void write_mot_file(const TrackFile& tf, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path);
    }
    write_mot(tf, out);
}

std::vector<TrackRow> parse_detections_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "missing file " + path);
    }
    return parse_stream(in, false).rows;
}

MetricReport evaluate(const TrackFile& hypotheses, const TrackFile& ground_truth,
                      double iou_threshold) {
    // frame -> (id -> box); std::map keeps everything order independent
    std::map<int, std::map<int64_t, BBox>> gt, hyp;
    for (const TrackRow& r : ground_truth.rows) {
        if (!gt[r.frame].emplace(r.id, row_box(r)).second) {
            throw Error(ErrorKind::Eval, "duplicate ground-truth (frame, id)");
        }
    }
    for (const TrackRow& r : hypotheses.rows) {
        if (!hyp[r.frame].emplace(r.id, row_box(r)).second) {
            throw Error(ErrorKind::Eval, "duplicate hypothesis (frame, id)");
        }
    }
    if (!gt.empty() && !hyp.empty()) {
        if (hyp.rbegin()->first < gt.begin()->first || gt.rbegin()->first < hyp.begin()->first) {
            throw Error(ErrorKind::Eval, "hypothesis and ground-truth frame ranges do not overlap");
        }
    }

    MetricReport rep;
    rep.num_gt_boxes = static_cast<int64_t>(ground_truth.rows.size());
    rep.num_hyp_boxes = static_cast<int64_t>(hypotheses.rows.size());

    std::set<int> frames;
    for (const auto& [f, boxes] : gt) frames.insert(f);
    for (const auto& [f, boxes] : hyp) frames.insert(f);

    std::map<int64_t, int64_t> last_match;             // gt id -> last matched hyp id
    std::map<int64_t, int64_t> active;                 // correspondences from the previous frame
    std::map<int64_t, int> gt_lifespan, gt_covered;
    // identity-level overlap counts for IDF1
    std::map<std::pair<int64_t, int64_t>, int64_t> pair_overlap;
    std::set<int64_t> gt_ids_all, hyp_ids_all;

    for (int f : frames) {
        const auto git = gt.find(f);
        const auto hit = hyp.find(f);
        const std::map<int64_t, BBox> empty;
        const auto& gboxes = git == gt.end() ? empty : git->second;
        const auto& hboxes = hit == hyp.end() ? empty : hit->second;

        for (const auto& [gid, gbox] : gboxes) {
            ++gt_lifespan[gid];
            gt_ids_all.insert(gid);
            for (const auto& [hid, hbox] : hboxes) {
                if (iou(gbox, hbox) >= iou_threshold) ++pair_overlap[{gid, hid}];
            }
        }
        for (const auto& [hid, hbox] : hboxes) hyp_ids_all.insert(hid);

        // 1. keep correspondences that are still valid
        std::map<int64_t, int64_t> matched; // gt id -> hyp id this frame
        std::set<int64_t> used_hyp;
        for (const auto& [gid, hid] : active) {
            auto g = gboxes.find(gid);
            auto h = hboxes.find(hid);
            if (g != gboxes.end() && h != hboxes.end() && iou(g->second, h->second) >= iou_threshold) {
                matched[gid] = hid;
                used_hyp.insert(hid);
            }
        }

        // 2. Hungarian over the remainder, gated at the threshold
        std::vector<int64_t> free_gt, free_hyp;
        for (const auto& [gid, gbox] : gboxes) {
            if (!matched.count(gid)) free_gt.push_back(gid);
        }
        for (const auto& [hid, hbox] : hboxes) {
            if (!used_hyp.count(hid)) free_hyp.push_back(hid);
        }
        if (!free_gt.empty() && !free_hyp.empty()) {
            CostMatrix c{static_cast<int>(free_gt.size()), static_cast<int>(free_hyp.size()), {}};
            c.values.resize(static_cast<std::size_t>(c.rows) * c.cols);
            for (int i = 0; i < c.rows; ++i) {
                for (int j = 0; j < c.cols; ++j) {
                    double overlap = iou(gboxes.at(free_gt[i]), hboxes.at(free_hyp[j]));
                    c.at(i, j) = overlap >= iou_threshold ? 1.0 - overlap : kInfeasible;
                }
            }
            Assignment assign = hungarian(c);
            for (auto [i, j] : assign.pairs) {
                if (c.at(i, j) >= kInfeasible) continue;
                matched[free_gt[i]] = free_hyp[j];
            }
        }

        // bookkeeping
        for (const auto& [gid, hid] : matched) {
            auto lm = last_match.find(gid);
            if (lm != last_match.end() && lm->second != hid) ++rep.id_switches;
            last_match[gid] = hid;
            ++gt_covered[gid];
            ++rep.matches;
        }
        rep.fn += static_cast<int64_t>(gboxes.size()) - static_cast<int64_t>(matched.size());
        rep.fp += static_cast<int64_t>(hboxes.size()) - static_cast<int64_t>(matched.size());
        active = matched;
    }

    rep.num_gt_tracks = static_cast<int>(gt_lifespan.size());
    for (const auto& [gid, span] : gt_lifespan) {
        double ratio = static_cast<double>(gt_covered[gid]) / span;
        if (ratio >= 0.8) ++rep.mt;
        if (ratio <= 0.2) ++rep.ml;
    }
    rep.mota = rep.num_gt_boxes > 0
                   ? 1.0 - static_cast<double>(rep.fp + rep.fn + rep.id_switches) / rep.num_gt_boxes
                   : 1.0;

    // IDF1: maximize total per-pair overlap with a one-to-one identity map
    std::vector<int64_t> gids(gt_ids_all.begin(), gt_ids_all.end());
    std::vector<int64_t> hids(hyp_ids_all.begin(), hyp_ids_all.end());
    if (!gids.empty() && !hids.empty()) {
        CostMatrix c{static_cast<int>(gids.size()), static_cast<int>(hids.size()), {}};
        c.values.resize(static_cast<std::size_t>(c.rows) * c.cols);
        for (int i = 0; i < c.rows; ++i) {
            for (int j = 0; j < c.cols; ++j) {
                auto it = pair_overlap.find({gids[i], hids[j]});
                c.at(i, j) = it == pair_overlap.end() ? 0.0 : -static_cast<double>(it->second);
            }
        }
        Assignment assign = hungarian(c);
        for (auto [i, j] : assign.pairs) rep.idtp += static_cast<int64_t>(-c.at(i, j));
    }
    int64_t denom = rep.num_gt_boxes + rep.num_hyp_boxes;
    rep.idf1 = denom > 0 ? 2.0 * static_cast<double>(rep.idtp) / static_cast<double>(denom) : 1.0;
    return rep;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
    MetricReport total;
    total.name = "OVERALL";
    for (const MetricReport& r : reports) {
        total.mt += r.mt;
        total.ml += r.ml;
        total.fp += r.fp;
        total.fn += r.fn;
        total.id_switches += r.id_switches;
        total.num_gt_boxes += r.num_gt_boxes;
        total.num_hyp_boxes += r.num_hyp_boxes;
        total.idtp += r.idtp;
        total.num_gt_tracks += r.num_gt_tracks;
        total.matches += r.matches;
    }
    total.mota = total.num_gt_boxes > 0
                     ? 1.0 - static_cast<double>(total.fp + total.fn + total.id_switches) /
                                 total.num_gt_boxes
                     : 1.0;
    int64_t denom = total.num_gt_boxes + total.num_hyp_boxes;
    total.idf1 = denom > 0 ? 2.0 * static_cast<double>(total.idtp) / static_cast<double>(denom) : 1.0;
    return total;
}

std::string render_report_table(const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-20s %8s %8s %5s %5s %8s %8s %6s\n", "sequence", "MOTA",
                  "IDF1", "MT", "ML", "FP", "FN", "IDs");
    out << buf;
    for (const MetricReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "%-20s %8.3f %8.3f %5d %5d %8lld %8lld %6lld\n",
                      r.name.c_str(), r.mota, r.idf1, r.mt, r.ml,
                      static_cast<long long>(r.fp), static_cast<long long>(r.fn),
                      static_cast<long long>(r.id_switches));
        out << buf;
    }
    return out.str();
}

std::string report_to_json(const std::vector<MetricReport>& reports) {
    nlohmann::json j = nlohmann::json::array();
    for (const MetricReport& r : reports) {
        j.push_back({{"name", r.name},
                     {"MOTA", r.mota},
                     {"IDF1", r.idf1},
                     {"MT", r.mt},
                     {"ML", r.ml},
                     {"FP", r.fp},
                     {"FN", r.fn},
                     {"IDs", r.id_switches},
                     {"num_gt", r.num_gt_boxes}});
    }
    return j.dump(2);
}

TrackFile trackfile_from_gt(const SyntheticSequence& seq) {
    // quantized to the 6-decimal file grid so export and reparse are identical
    auto canon = [](double v) { return std::round(v * 1e6) / 1e6; };
    TrackFile tf;
    for (std::size_t f = 0; f < seq.gt.size(); ++f) {
        for (const GtBox& g : seq.gt[f]) {
            TrackRow row;
            row.frame = static_cast<int>(f) + 1;
            row.id = g.id;
            row.left = canon(g.box.left() * kMotScale);
            row.top = canon(g.box.top() * kMotScale);
            row.width = canon(g.box.w * kMotScale);
            row.height = canon(g.box.h * kMotScale);
            row.conf = 1.0;
            tf.rows.push_back(row);
        }
    }
    return tf;
}

} // namespace mo3tr
