#include "doctest.h"

#include <vector>

#include "mo3tr/rng.hpp"
#include "mo3tr/trackstore.hpp"

using namespace mo3tr;

namespace {
std::vector<double> emb(double v) { return {v, v, v}; }
} // namespace

TEST_CASE("append gates on the class probability") {
    TrackSet ts(30);
    CHECK_FALSE(ts.append(0, 3, emb(1), 0.4));
    CHECK(ts.size() == 0);

    CHECK(ts.append(7, 7, emb(1), 0.9));
    const Track& t = ts.track(7);
    CHECK(t.start_frame == 7);
    CHECK(t.history.size() == 1);

    // low-probability append leaves the track byte-identical
    auto before = t.history;
    CHECK_FALSE(ts.append(7, 8, emb(2), 0.5));
    CHECK(ts.track(7).history == before);
    CHECK(ts.track(7).consecutive_misses == 0);
}

TEST_CASE("history is capped at the alignment width") {
    TrackSet ts(30);
    for (int f = 1; f <= 31; ++f) ts.append(0, f, emb(f), 1.0);
    const Track& t = ts.track(0);
    CHECK(t.history.size() == 30);
    CHECK(t.history.front().frame == 2);
    CHECK(t.history.back().frame == 31);
}

TEST_CASE("append rejects non-monotonic frames") {
    TrackSet ts(30);
    ts.append(0, 5, emb(1), 1.0);
    CHECK_THROWS_AS(ts.append(0, 5, emb(2), 1.0), Error);
    CHECK_THROWS_AS(ts.append(0, 4, emb(2), 1.0), Error);
}

TEST_CASE("right_align places equal frames in equal columns") {
    TrackSet ts(4);
    ts.append(0, 4, emb(1), 1.0);
    ts.append(0, 5, emb(2), 1.0);
    ts.append(1, 3, emb(3), 1.0);
    ts.append(1, 4, emb(4), 1.0);
    ts.append(1, 5, emb(5), 1.0);

    auto view = ts.right_align(6);
    REQUIRE(view.identities.size() == 2);
    CHECK(view.first_frame == 2);
    // frame 5 sits in the last column for both rows
    CHECK(view.mask[0][3] == 1);
    CHECK(view.cells[0][3]->frame == 5);
    CHECK(view.mask[1][3] == 1);
    CHECK(view.cells[1][3]->frame == 5);
    // track 0 occupies the two rightmost columns, track 1 the three rightmost
    CHECK(view.mask[0][1] == 0);
    CHECK(view.mask[0][2] == 1);
    CHECK(view.mask[1][1] == 1);

    TrackSet empty(4);
    CHECK(empty.right_align(6).identities.empty());
}

TEST_CASE("right_align marks gaps as padding") {
    TrackSet ts(4);
    ts.append(0, 3, emb(1), 1.0);
    ts.append(0, 5, emb(2), 1.0); // frame 4 missing
    auto view = ts.right_align(6);
    // columns: frames 2,3,4,5
    CHECK(view.mask[0][0] == 0);
    CHECK(view.mask[0][1] == 1);
    CHECK(view.mask[0][2] == 0);
    CHECK(view.mask[0][3] == 1);
}

TEST_CASE("terminate closes at the last appended frame") {
    TrackSet ts(30);
    ts.append(0, 8, emb(1), 1.0);
    ts.append(0, 9, emb(2), 1.0);
    ts.terminate(0, 12);
    CHECK(ts.track(0).end_frame == 9);
    CHECK(ts.open_identities().empty());
    CHECK_THROWS_AS(ts.terminate(0, 13), Error);
    CHECK_THROWS_AS(ts.terminate(42, 13), Error);
}

TEST_CASE("column consistency on randomized track sets") {
    Rng rng(81);
    for (int trial = 0; trial < 30; ++trial) {
        int width = rng.uniform_int(3, 10);
        TrackSet ts(width);
        int num_tracks = rng.uniform_int(2, 6);
        for (int64_t id = 0; id < num_tracks; ++id) {
            int f = rng.uniform_int(0, 4);
            while (f < 20) {
                ts.append(id, f, emb(static_cast<double>(f)), 1.0);
                f += rng.uniform_int(1, 3);
            }
        }
        int current = 21;
        auto view = ts.right_align(current);
        for (std::size_t r = 0; r < view.identities.size(); ++r) {
            for (int c = 0; c < view.width; ++c) {
                if (view.mask[r][c]) {
                    CHECK(view.cells[r][c]->frame == view.first_frame + c);
                }
            }
        }
        // any two tracks sharing a frame appear in the same column by definition
        for (const auto& [id, t] : ts.tracks()) {
            (void)id;
            CHECK(static_cast<int>(t.history.size()) <= width);
        }
    }
}

TEST_CASE("fresh identities are monotone and never reused") {
    TrackSet ts(30);
    int64_t a = ts.fresh_identity();
    int64_t b = ts.fresh_identity();
    CHECK(b == a + 1);
    ts.append(b, 1, emb(1), 1.0);
    ts.terminate(b, 2);
    CHECK(ts.fresh_identity() > b);
}
