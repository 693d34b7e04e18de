#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mo3tr/assignment.hpp"
#include "mo3tr/synthworld.hpp"

namespace mo3tr {

// Nominal pixel scale used when normalized boxes leave or enter MOT files.
inline constexpr double kMotScale = 1000.0;

struct TrackRow {
    int frame = 0; // 1-based in files
    int64_t id = 0;
    double left = 0, top = 0, width = 0, height = 0;
    double conf = 1, x = -1, y = -1, z = -1;

    bool operator==(const TrackRow&) const = default;
};

struct TrackFile {
    std::vector<TrackRow> rows;

    bool operator==(const TrackFile&) const = default;
};

// Strict 10-column MOTChallenge CSV. Parse errors carry the line number;
// (frame, id) pairs must be unique and frames must be >= 1.
TrackFile parse_mot(std::istream& in);
TrackFile parse_mot_file(const std::string& path);
void write_mot(const TrackFile& tf, std::ostream& out); // 6-decimal fixed floats
void write_mot_file(const TrackFile& tf, const std::string& path);

// Per-frame detections; same row format but duplicate ids are permitted.
std::vector<TrackRow> parse_detections_file(const std::string& path);

struct MetricReport {
    std::string name = "all";
    double mota = 0.0;
    double idf1 = 0.0;
    int mt = 0;
    int ml = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t id_switches = 0;
    // accumulators that make aggregation exact
    int64_t num_gt_boxes = 0;
    int64_t num_hyp_boxes = 0;
    int64_t idtp = 0;
    int num_gt_tracks = 0;
    int64_t matches = 0;
};

// CLEAR protocol with match persistence: previous-frame correspondences are
// kept while still above the IoU threshold, then remaining boxes are matched
// by Hungarian assignment. IDF1 follows the identity-level global matching.
MetricReport evaluate(const TrackFile& hypotheses, const TrackFile& ground_truth,
                      double iou_threshold = 0.5);

MetricReport aggregate(const std::vector<MetricReport>& reports);

std::string render_report_table(const std::vector<MetricReport>& reports);
std::string report_to_json(const std::vector<MetricReport>& reports);

// Ground truth of a synthetic sequence as a MOT track file at kMotScale.
TrackFile trackfile_from_gt(const SyntheticSequence& seq);

} // namespace mo3tr
