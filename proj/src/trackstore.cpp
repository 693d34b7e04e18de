#include "mo3tr/trackstore.hpp"

#include <cstdio>
#include <string>

namespace mo3tr {

TrackSet::TrackSet(int alignment_width) : alignment_width_(alignment_width) {
    if (alignment_width < 1) {
        throw Error(ErrorKind::Config, "alignment_width must be at least 1");
    }
}

const Track& TrackSet::track(int64_t identity) const {
    auto it = tracks_.find(identity);
    if (it == tracks_.end()) {
        throw Error(ErrorKind::Lookup, "unknown identity " + std::to_string(identity));
    }
    return it->second;
}

bool TrackSet::append(int64_t identity, int frame, std::span<const double> embedding,
                      double class_prob) {
    if (!(class_prob > 0.5)) return false;

    auto it = tracks_.find(identity);
    if (it == tracks_.end()) {
        Track t;
        t.identity = identity;
        t.start_frame = frame;
        t.history.push_back({frame, {embedding.begin(), embedding.end()}});
        tracks_.emplace(identity, std::move(t));
        if (identity >= next_identity_) next_identity_ = identity + 1;
        return true;
    }

    Track& t = it->second;
    if (!t.open()) {
        throw Error(ErrorKind::Lookup,
                    "identity " + std::to_string(identity) + " is terminated");
    }
    if (frame <= t.last_frame()) {
        throw Error(ErrorKind::Ordering,
                    "append at frame " + std::to_string(frame) +
                        " not after latest frame " + std::to_string(t.last_frame()));
    }
    t.history.push_back({frame, {embedding.begin(), embedding.end()}});
    if (static_cast<int>(t.history.size()) > alignment_width_) {
        t.history.erase(t.history.begin());
    }
    return true;
}

void TrackSet::terminate(int64_t identity, int frame) {
    (void)frame; // the end time is the last appended frame, not the current one
    auto it = tracks_.find(identity);
    if (it == tracks_.end()) {
        throw Error(ErrorKind::Lookup, "unknown identity " + std::to_string(identity));
    }
    if (!it->second.open()) {
        throw Error(ErrorKind::Lookup,
                    "identity " + std::to_string(identity) + " already terminated");
    }
    it->second.end_frame = it->second.last_frame();
}

void TrackSet::record_miss(int64_t identity) {
    auto it = tracks_.find(identity);
    if (it == tracks_.end()) {
        throw Error(ErrorKind::Lookup, "unknown identity " + std::to_string(identity));
    }
    ++it->second.consecutive_misses;
}

void TrackSet::clear_misses(int64_t identity) {
    auto it = tracks_.find(identity);
    if (it == tracks_.end()) {
        throw Error(ErrorKind::Lookup, "unknown identity " + std::to_string(identity));
    }
    it->second.consecutive_misses = 0;
}

std::vector<int64_t> TrackSet::open_identities() const {
    std::vector<int64_t> ids;
    for (const auto& [id, t] : tracks_) {
        if (t.open()) ids.push_back(id);
    }
    return ids; // map iteration is already ascending
}

TrackSet::AlignedView TrackSet::right_align(int current_frame) const {
    AlignedView view;
    view.width = alignment_width_;
    view.first_frame = current_frame - alignment_width_;
    for (const auto& [id, t] : tracks_) {
        if (!t.open()) continue;
        view.identities.push_back(id);
        std::vector<const TrackEntry*> row(alignment_width_, nullptr);
        std::vector<char> mask(alignment_width_, 0);
        for (const TrackEntry& e : t.history) {
            int col = e.frame - view.first_frame;
            if (col >= 0 && col < alignment_width_) {
                row[col] = &e;
                mask[col] = 1;
            }
        }
        view.cells.push_back(std::move(row));
        view.mask.push_back(std::move(mask));
    }
    return view;
}

void TrackSet::dump_embeddings(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) {
        throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    }
    for (const auto& [id, t] : tracks_) {
        for (const TrackEntry& e : t.history) {
            std::fprintf(f, "%lld,%d", static_cast<long long>(id), e.frame);
            for (double v : e.embedding) std::fprintf(f, ",%.17g", v);
            std::fprintf(f, "\n");
        }
    }
    std::fclose(f);
}

} // namespace mo3tr
