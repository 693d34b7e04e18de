#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mo3tr/motmetrics.hpp"
#include "mo3tr/rng.hpp"

using namespace mo3tr;

namespace {

TrackRow box_row(int frame, int64_t id, double left, double top, double w, double h) {
    TrackRow r;
    r.frame = frame;
    r.id = id;
    r.left = left;
    r.top = top;
    r.width = w;
    r.height = h;
    return r;
}

// Two ground-truth tracks over three frames; the hypothesis swaps identities
// at frame 2, loses one track at frame 3 and adds a spurious box.
//
// Hand-worked trace (IoU threshold 0.5):
//   F1: (gt1,h1), (gt2,h2) fresh matches.           FP 0  FN 0  IDs 0
//   F2: carryovers fail (boxes moved apart), fresh matching gives
//       (gt1,h2), (gt2,h1): both partners changed.  FP 0  FN 0  IDs 2
//   F3: (gt1,h2) carried over; gt2 unmatched (its partner vanished),
//       h3 unmatched.                               FP 1  FN 1  IDs 0
// Totals: GT boxes 6, FP 1, FN 1, IDs 2 -> MOTA = 1 - 4/6 = 1/3.
// MT: gt1 covered 3/3; gt2 covered 2/3 -> MT 1, ML 0.
// IDF1: best identity map is {gt1-h2 (2 overlaps), gt2-h1 (1)} -> IDTP 3,
// hyp boxes 6 -> IDF1 = 2*3 / (6+6) = 0.5.
struct GoldenTrace {
    TrackFile gt, hyp;
};

GoldenTrace golden_trace() {
    GoldenTrace t;
    auto A = [](int f) { return std::pair<double, double>{10.0 + 20.0 * (f - 1), 10.0}; };
    auto B = [](int f) { return std::pair<double, double>{10.0 + 20.0 * (f - 1), 40.0}; };
    for (int f = 1; f <= 3; ++f) {
        t.gt.rows.push_back(box_row(f, 1, A(f).first, A(f).second, 5, 5));
        t.gt.rows.push_back(box_row(f, 2, B(f).first, B(f).second, 5, 5));
    }
    // h1: at gt1 in F1, at gt2 in F2, absent in F3
    t.hyp.rows.push_back(box_row(1, 1, A(1).first, A(1).second, 5, 5));
    t.hyp.rows.push_back(box_row(2, 1, B(2).first, B(2).second, 5, 5));
    // h2: at gt2 in F1, at gt1 in F2 and F3
    t.hyp.rows.push_back(box_row(1, 2, B(1).first, B(1).second, 5, 5));
    t.hyp.rows.push_back(box_row(2, 2, A(2).first, A(2).second, 5, 5));
    t.hyp.rows.push_back(box_row(3, 2, A(3).first, A(3).second, 5, 5));
    // h3: spurious far-away box in F3
    t.hyp.rows.push_back(box_row(3, 3, 80, 80, 5, 5));
    return t;
}

} // namespace

TEST_CASE("parse reads the documented row format") {
    std::istringstream in("1,3,10.0,20.0,5.0,8.0,1,-1,-1,-1\n");
    TrackFile tf = parse_mot(in);
    REQUIRE(tf.rows.size() == 1);
    CHECK(tf.rows[0].frame == 1);
    CHECK(tf.rows[0].id == 3);
    CHECK(tf.rows[0].left == 10.0);
    CHECK(tf.rows[0].top == 20.0);
    CHECK(tf.rows[0].width == 5.0);
    CHECK(tf.rows[0].height == 8.0);
}

TEST_CASE("parse of an empty stream yields an empty file") {
    std::istringstream in("");
    CHECK(parse_mot(in).rows.empty());
}

TEST_CASE("parse errors carry the line number") {
    std::istringstream in("1,1,0,0,5,5,1,-1,-1,-1\nbogus line\n");
    try {
        parse_mot(in);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::istringstream dup("1,1,0,0,5,5,1,-1,-1,-1\n1,1,0,0,5,5,1,-1,-1,-1\n");
    CHECK_THROWS_AS(parse_mot(dup), Error);

    std::istringstream frame0("0,1,0,0,5,5,1,-1,-1,-1\n");
    CHECK_THROWS_AS(parse_mot(frame0), Error);
}

TEST_CASE("canonical files round-trip bit-identically") {
    GoldenTrace t = golden_trace();
    std::ostringstream first;
    write_mot(t.hyp, first);
    std::istringstream back(first.str());
    TrackFile reparsed = parse_mot(back);
    CHECK(reparsed == t.hyp);
    std::ostringstream second;
    write_mot(reparsed, second);
    CHECK(second.str() == first.str());
}

TEST_CASE("perfect tracking scores ones across the board") {
    GoldenTrace t = golden_trace();
    MetricReport rep = evaluate(t.gt, t.gt);
    CHECK(rep.mota == 1.0);
    CHECK(rep.idf1 == 1.0);
    CHECK(rep.fp == 0);
    CHECK(rep.fn == 0);
    CHECK(rep.id_switches == 0);
    CHECK(rep.mt == rep.num_gt_tracks);
    CHECK(rep.ml == 0);
}

TEST_CASE("MOTA substitution fixture: 10 boxes, FP 1, FN 2, IDs 1") {
    TrackFile gt, hyp;
    for (int f = 1; f <= 10; ++f) gt.rows.push_back(box_row(f, 1, 10, 10, 5, 5));
    // hA covers frames 1-4, hB frames 5-8 (one switch), frames 9-10 missed
    for (int f = 1; f <= 4; ++f) hyp.rows.push_back(box_row(f, 10, 10, 10, 5, 5));
    for (int f = 5; f <= 8; ++f) hyp.rows.push_back(box_row(f, 11, 10, 10, 5, 5));
    hyp.rows.push_back(box_row(1, 12, 80, 80, 5, 5)); // spurious

    MetricReport rep = evaluate(hyp, gt);
    CHECK(rep.fp == 1);
    CHECK(rep.fn == 2);
    CHECK(rep.id_switches == 1);
    CHECK(rep.num_gt_boxes == 10);
    CHECK(rep.mota == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("hand-worked three-frame trace matches on every field") {
    GoldenTrace t = golden_trace();
    MetricReport rep = evaluate(t.hyp, t.gt);
    CHECK(rep.num_gt_boxes == 6);
    CHECK(rep.fp == 1);
    CHECK(rep.fn == 1);
    CHECK(rep.id_switches == 2);
    CHECK(rep.mota == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rep.mt == 1);
    CHECK(rep.ml == 0);
    CHECK(rep.idtp == 3);
    CHECK(rep.idf1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("deleting one true box moves FN and MOTA by exactly one unit") {
    TrackFile gt;
    for (int f = 1; f <= 5; ++f) {
        gt.rows.push_back(box_row(f, 1, 10, 10, 5, 5));
        gt.rows.push_back(box_row(f, 2, 40, 40, 5, 5));
    }
    MetricReport full = evaluate(gt, gt);
    CHECK(full.mota == 1.0);

    TrackFile pruned = gt;
    pruned.rows.erase(std::remove_if(pruned.rows.begin(), pruned.rows.end(),
                                     [](const TrackRow& r) { return r.frame == 3 && r.id == 1; }),
                      pruned.rows.end());
    MetricReport rep = evaluate(pruned, gt);
    CHECK(rep.fn == 1);
    CHECK(rep.fp == 0);
    CHECK(rep.id_switches == 0); // the same identity re-matches after the gap
    CHECK(rep.mota == doctest::Approx(1.0 - 1.0 / 10.0).epsilon(1e-12));
}

TEST_CASE("IDF1 is invariant under bijective relabeling of hypothesis ids") {
    GoldenTrace t = golden_trace();
    MetricReport base = evaluate(t.hyp, t.gt);
    TrackFile renamed = t.hyp;
    for (TrackRow& r : renamed.rows) r.id += 1000;
    MetricReport rep = evaluate(renamed, t.gt);
    CHECK(rep.idf1 == base.idf1);
    CHECK(rep.idtp == base.idtp);
}

TEST_CASE("evaluate ignores input row order") {
    GoldenTrace t = golden_trace();
    MetricReport base = evaluate(t.hyp, t.gt);
    TrackFile shuffled = t.hyp;
    Rng rng(91);
    for (std::size_t i = shuffled.rows.size(); i > 1; --i) {
        std::swap(shuffled.rows[i - 1], shuffled.rows[rng.next_u64() % i]);
    }
    MetricReport rep = evaluate(shuffled, t.gt);
    CHECK(rep.mota == base.mota);
    CHECK(rep.idf1 == base.idf1);
    CHECK(rep.fp == base.fp);
    CHECK(rep.fn == base.fn);
    CHECK(rep.id_switches == base.id_switches);
}

TEST_CASE("disjoint frame ranges are rejected") {
    TrackFile gt, hyp;
    gt.rows.push_back(box_row(1, 1, 10, 10, 5, 5));
    hyp.rows.push_back(box_row(50, 1, 10, 10, 5, 5));
    CHECK_THROWS_AS(evaluate(hyp, gt), Error);
}

TEST_CASE("suite ground truth exports and reparses exactly") {
    auto specs = standard_suite("overfit-tiny");
    SyntheticSequence seq = generate(specs[1]);
    TrackFile gt = trackfile_from_gt(seq);
    std::ostringstream out;
    write_mot(gt, out);
    std::istringstream in(out.str());
    TrackFile back = parse_mot(in);
    CHECK(back == gt);

    // and a perfect self-evaluation on the exported file
    MetricReport rep = evaluate(back, gt);
    CHECK(rep.mota == 1.0);
    CHECK(rep.idf1 == 1.0);
}
