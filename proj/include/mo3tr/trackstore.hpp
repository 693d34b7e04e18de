#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mo3tr/errors.hpp"

namespace mo3tr {

struct TrackEntry {
    int frame;
    std::vector<double> embedding;

    bool operator==(const TrackEntry&) const = default;
};

// One identity's time-ordered embedding history with lifespan bookkeeping.
struct Track {
    int64_t identity = -1;
    int start_frame = -1;
    std::optional<int> end_frame; // set on termination
    std::vector<TrackEntry> history; // frames strictly increasing
    int consecutive_misses = 0;

    bool open() const { return !end_frame.has_value(); }
    int last_frame() const { return history.back().frame; }
};

// Identity-keyed track collection. Histories are capped at alignment_width
// entries; identities are handed out monotonically and never reused.
class TrackSet {
public:
    explicit TrackSet(int alignment_width = 30);

    int alignment_width() const { return alignment_width_; }
    std::size_t size() const { return tracks_.size(); }
    bool contains(int64_t identity) const { return tracks_.count(identity) > 0; }
    const Track& track(int64_t identity) const;

    // Appends only when class_prob(object) > 0.5; a fresh identity creates a
    // track starting at this frame. Returns whether an append happened.
    bool append(int64_t identity, int frame, std::span<const double> embedding,
                double class_prob);

    // Closes the track: its end becomes the last frame it was appended at and
    // it leaves the active set. Double termination is a lookup error.
    void terminate(int64_t identity, int frame);

    void record_miss(int64_t identity);
    void clear_misses(int64_t identity);

    // Open identities in ascending order; this is the slot order used
    // everywhere downstream.
    std::vector<int64_t> open_identities() const;

    int64_t fresh_identity() { return next_identity_++; }

    // Right-aligned window over the open tracks: column j holds the entry from
    // absolute frame (current_frame - alignment_width + j) when present.
    struct AlignedView {
        int width = 0;
        int first_frame = 0; // absolute frame of column 0
        std::vector<int64_t> identities;
        // entry pointers per row/column; nullptr marks a padding slot
        std::vector<std::vector<const TrackEntry*>> cells;
        std::vector<std::vector<char>> mask;
    };
    AlignedView right_align(int current_frame) const;

    // Sidecar dump: one CSV row per stored embedding (identity, frame, d_z floats).
    void dump_embeddings(const std::string& path) const;

    const std::map<int64_t, Track>& tracks() const { return tracks_; }
    // direct history surgery for training-time augmentation
    std::map<int64_t, Track>& mutable_tracks() { return tracks_; }

private:
    int alignment_width_;
    std::map<int64_t, Track> tracks_;
    int64_t next_identity_ = 0;
};

} // namespace mo3tr
