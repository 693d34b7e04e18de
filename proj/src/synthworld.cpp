#include "mo3tr/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace mo3tr {

namespace {

constexpr double kBlobSupport = 0.02; // minimum Gaussian weight that paints a pixel

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

std::pair<double, double> path_position(const ObjectScript& obj, int frame) {
    const auto& wp = obj.waypoints;
    if (wp.size() == 1) return wp[0];
    int life = std::max(1, obj.exit - 1 - obj.entry);
    double u = clamp(static_cast<double>(frame - obj.entry) / life, 0.0, 1.0);
    double seg_pos = u * (wp.size() - 1);
    int seg = std::min(static_cast<int>(seg_pos), static_cast<int>(wp.size()) - 2);
    double frac = seg_pos - seg;
    return {wp[seg].first + frac * (wp[seg + 1].first - wp[seg].first),
            wp[seg].second + frac * (wp[seg + 1].second - wp[seg].second)};
}

void validate(const ScenarioSpec& spec) {
    if (spec.length < 1 || spec.grid_h < 1 || spec.grid_w < 1 || spec.channels < 1) {
        throw Error(ErrorKind::Data, "scenario: grid and length must be positive");
    }
    std::set<int64_t> ids;
    std::map<int64_t, const ObjectScript*> by_id;
    for (const ObjectScript& o : spec.objects) {
        if (!ids.insert(o.id).second) {
            throw Error(ErrorKind::Data,
                        "scenario: duplicate object identity " + std::to_string(o.id));
        }
        by_id[o.id] = &o;
        if (o.entry < 0 || o.entry >= o.exit || o.exit > spec.length) {
            throw Error(ErrorKind::Data, "scenario: object lifespan must satisfy 0 <= entry < exit <= length");
        }
        if (o.waypoints.empty()) {
            throw Error(ErrorKind::Data, "scenario: object needs at least one waypoint");
        }
        if (o.width <= 0 || o.height <= 0) {
            throw Error(ErrorKind::Data, "scenario: object extents must be positive");
        }
    }
    for (const OcclusionScript& oc : spec.occlusions) {
        auto er = by_id.find(oc.occluder);
        auto ee = by_id.find(oc.occludee);
        if (er == by_id.end() || ee == by_id.end()) {
            throw Error(ErrorKind::Data, "scenario: occlusion references unknown identity");
        }
        int end = oc.start + oc.duration;
        if (oc.duration < 1 || oc.start < er->second->entry || end > er->second->exit ||
            oc.start < ee->second->entry || end > ee->second->exit) {
            throw Error(ErrorKind::Data, "scenario: occlusion interval must lie inside both lifespans");
        }
    }
}

} // namespace

std::vector<double> appearance_vector(uint64_t appearance_seed, int channels) {
    Rng rng(appearance_seed);
    std::vector<double> v(channels);
    double norm = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (double& x : v) x /= norm;
    return v;
}

SyntheticSequence generate(const ScenarioSpec& spec) {
    validate(spec);
    SyntheticSequence seq;
    seq.spec = spec;
    const int H = spec.grid_h, W = spec.grid_w, C = spec.channels;

    std::map<int64_t, std::vector<double>> appearance;
    std::map<int64_t, int> base_z;
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        appearance[spec.objects[i].id] = appearance_vector(spec.objects[i].appearance_seed, C);
        base_z[spec.objects[i].id] = static_cast<int>(i);
    }

    for (int f = 0; f < spec.length; ++f) {
        std::vector<GtBox> gt;
        std::set<int64_t> fully_occluded;
        std::map<int64_t, int> z; // render priority for this frame
        for (const ObjectScript& o : spec.objects) {
            if (f >= o.entry && f < o.exit) z[o.id] = base_z[o.id];
        }
        for (const OcclusionScript& oc : spec.occlusions) {
            if (f >= oc.start && f < oc.start + oc.duration) {
                if (oc.full) fully_occluded.insert(oc.occludee);
                z[oc.occluder] = 1000 + base_z[oc.occluder];
            }
        }

        struct Placed {
            int64_t id;
            double cx, cy, sx, sy;
            const std::vector<double>* app;
            int z;
        };
        std::vector<Placed> placed;
        for (const ObjectScript& o : spec.objects) {
            if (f < o.entry || f >= o.exit) continue;
            auto [cx, cy] = path_position(o, f);
            if (spec.jitter > 0.0) {
                Rng jr(spec.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(o.id + 1)) ^
                       (0xbf58476d1ce4e5b9ULL * static_cast<uint64_t>(f + 1)));
                cx += jr.normal(0.0, spec.jitter);
                cy += jr.normal(0.0, spec.jitter);
            }
            cx = clamp(cx, o.width / 2, 1.0 - o.width / 2);
            cy = clamp(cy, o.height / 2, 1.0 - o.height / 2);
            gt.push_back({o.id, BBox{cx, cy, o.width, o.height}, fully_occluded.count(o.id) == 0});
            if (fully_occluded.count(o.id)) continue; // no pixel evidence at all
            placed.push_back({o.id, cx, cy, o.width / 4.0, o.height / 4.0,
                              &appearance[o.id], z[o.id]});
        }
        std::stable_sort(placed.begin(), placed.end(),
                         [](const Placed& a, const Placed& b) { return a.z < b.z; });

        std::vector<float> frame(static_cast<std::size_t>(H) * W * C, 0.0f);
        for (const Placed& p : placed) {
            for (int r = 0; r < H; ++r) {
                double py = (r + 0.5) / H;
                for (int c = 0; c < W; ++c) {
                    double px = (c + 0.5) / W;
                    double dx = (px - p.cx) / p.sx;
                    double dy = (py - p.cy) / p.sy;
                    double g = std::exp(-0.5 * (dx * dx + dy * dy));
                    if (g < kBlobSupport) continue;
                    float* cell = frame.data() + (static_cast<std::size_t>(r) * W + c) * C;
                    for (int ch = 0; ch < C; ++ch)
                        cell[ch] = static_cast<float>(g * (*p.app)[ch]);
                }
            }
        }
        seq.frames.push_back(std::move(frame));
        seq.gt.push_back(std::move(gt));
    }
    return seq;
}

namespace {

using nlohmann::json;

json spec_to_json(const ScenarioSpec& spec) {
    json j;
    j["format_version"] = 1;
    j["name"] = spec.name;
    j["grid_h"] = spec.grid_h;
    j["grid_w"] = spec.grid_w;
    j["channels"] = spec.channels;
    j["length"] = spec.length;
    j["jitter"] = spec.jitter;
    j["seed"] = spec.seed;
    j["objects"] = json::array();
    for (const ObjectScript& o : spec.objects) {
        json wp = json::array();
        for (auto [x, y] : o.waypoints) wp.push_back({x, y});
        j["objects"].push_back({{"id", o.id},
                                {"entry", o.entry},
                                {"exit", o.exit},
                                {"waypoints", wp},
                                {"width", o.width},
                                {"height", o.height},
                                {"appearance_seed", o.appearance_seed}});
    }
    j["occlusions"] = json::array();
    for (const OcclusionScript& oc : spec.occlusions) {
        j["occlusions"].push_back({{"occluder", oc.occluder},
                                   {"occludee", oc.occludee},
                                   {"start", oc.start},
                                   {"duration", oc.duration},
                                   {"full", oc.full}});
    }
    return j;
}

ScenarioSpec spec_from_json(const json& j) {
    ScenarioSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.grid_h = j.at("grid_h").get<int>();
    spec.grid_w = j.at("grid_w").get<int>();
    spec.channels = j.at("channels").get<int>();
    spec.length = j.at("length").get<int>();
    spec.jitter = j.at("jitter").get<double>();
    spec.seed = j.at("seed").get<uint64_t>();
    for (const json& o : j.at("objects")) {
        ObjectScript obj;
        obj.id = o.at("id").get<int64_t>();
        obj.entry = o.at("entry").get<int>();
        obj.exit = o.at("exit").get<int>();
        for (const json& wp : o.at("waypoints"))
            obj.waypoints.emplace_back(wp.at(0).get<double>(), wp.at(1).get<double>());
        obj.width = o.at("width").get<double>();
        obj.height = o.at("height").get<double>();
        obj.appearance_seed = o.at("appearance_seed").get<uint64_t>();
        spec.objects.push_back(std::move(obj));
    }
    for (const json& oc : j.at("occlusions")) {
        spec.occlusions.push_back({oc.at("occluder").get<int64_t>(),
                                   oc.at("occludee").get<int64_t>(),
                                   oc.at("start").get<int>(),
                                   oc.at("duration").get<int>(),
                                   oc.at("full").get<bool>()});
    }
    return spec;
}

} // namespace

void save_sequence(const SyntheticSequence& seq, const std::string& base_path) {
    json j = spec_to_json(seq.spec);
    j["gt"] = json::array();
    for (const auto& frame_gt : seq.gt) {
        json fj = json::array();
        for (const GtBox& g : frame_gt) {
            fj.push_back({{"id", g.id},
                          {"cx", g.box.cx},
                          {"cy", g.box.cy},
                          {"w", g.box.w},
                          {"h", g.box.h},
                          {"visible", g.visible}});
        }
        j["gt"].push_back(std::move(fj));
    }
    std::ofstream scene(base_path + ".scene.json");
    if (!scene) {
        throw Error(ErrorKind::Io, "cannot write " + base_path + ".scene.json");
    }
    scene << j.dump(2) << "\n";

    std::ofstream bin(base_path + ".frames.bin", std::ios::binary);
    if (!bin) {
        throw Error(ErrorKind::Io, "cannot write " + base_path + ".frames.bin");
    }
    for (const auto& frame : seq.frames) {
        bin.write(reinterpret_cast<const char*>(frame.data()),
                  static_cast<std::streamsize>(frame.size() * sizeof(float)));
    }
}

SyntheticSequence load_sequence(const std::string& base_path) {
    std::ifstream scene(base_path + ".scene.json");
    if (!scene) {
        throw Error(ErrorKind::Io, "missing file " + base_path + ".scene.json");
    }
    json j;
    try {
        scene >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, "bad scene json: " + std::string(e.what()));
    }
    SyntheticSequence seq;
    seq.spec = spec_from_json(j);
    for (const json& fj : j.at("gt")) {
        std::vector<GtBox> frame_gt;
        for (const json& g : fj) {
            frame_gt.push_back({g.at("id").get<int64_t>(),
                                BBox{g.at("cx").get<double>(), g.at("cy").get<double>(),
                                     g.at("w").get<double>(), g.at("h").get<double>()},
                                g.at("visible").get<bool>()});
        }
        seq.gt.push_back(std::move(frame_gt));
    }

    std::ifstream bin(base_path + ".frames.bin", std::ios::binary);
    if (!bin) {
        throw Error(ErrorKind::Io, "missing file " + base_path + ".frames.bin");
    }
    const int per_frame = seq.frame_floats();
    for (int f = 0; f < seq.spec.length; ++f) {
        std::vector<float> frame(per_frame);
        bin.read(reinterpret_cast<char*>(frame.data()),
                 static_cast<std::streamsize>(frame.size() * sizeof(float)));
        if (bin.gcount() != static_cast<std::streamsize>(frame.size() * sizeof(float))) {
            throw Error(ErrorKind::Parse, "frames payload truncated in " + base_path);
        }
        seq.frames.push_back(std::move(frame));
    }
    if (static_cast<int>(seq.gt.size()) != seq.spec.length) {
        throw Error(ErrorKind::Parse, "ground truth frame count mismatch in " + base_path);
    }
    return seq;
}

namespace {

// Random but fully seeded scenario content. Waypoints keep boxes inside the
// unit square.
ObjectScript random_object(int64_t id, int entry, int exit, Rng& rng, double speed_scale,
                           double min_size = 0.14, double max_size = 0.2) {
    ObjectScript o;
    o.id = id;
    o.entry = entry;
    o.exit = exit;
    o.width = rng.uniform(min_size, max_size);
    o.height = rng.uniform(min_size, max_size);
    o.appearance_seed = rng.next_u64();
    double x = rng.uniform(0.2, 0.8);
    double y = rng.uniform(0.2, 0.8);
    o.waypoints.emplace_back(x, y);
    int hops = 1 + static_cast<int>(speed_scale > 0.0) * 2;
    for (int i = 0; i < hops; ++i) {
        x = clamp(x + rng.uniform(-speed_scale, speed_scale), 0.12, 0.88);
        y = clamp(y + rng.uniform(-speed_scale, speed_scale), 0.12, 0.88);
        o.waypoints.emplace_back(x, y);
    }
    return o;
}

std::vector<ScenarioSpec> suite_overfit_tiny() {
    std::vector<ScenarioSpec> suite;
    Rng rng(0x0f17);
    for (int s = 0; s < 5; ++s) {
        ScenarioSpec spec;
        spec.name = "overfit-tiny-" + std::to_string(s);
        spec.length = 40;
        spec.seed = 0x0f17 + s;
        int objects = 2 + s % 3; // 2..4
        for (int i = 0; i < objects; ++i) {
            spec.objects.push_back(random_object(i, 0, spec.length, rng, 0.25));
        }
        suite.push_back(std::move(spec));
    }
    return suite;
}

std::vector<ScenarioSpec> suite_occlusion() {
    std::vector<ScenarioSpec> suite;
    Rng rng(0x0cc1);
    for (int s = 0; s < 8; ++s) {
        ScenarioSpec spec;
        spec.name = "occlusion-" + std::to_string(s);
        spec.length = 40;
        spec.seed = 0x0cc1 + s;
        // two moving occludees plus one large occluder crossing them
        ObjectScript a = random_object(0, 0, spec.length, rng, 0.3);
        ObjectScript b = random_object(1, 0, spec.length, rng, 0.3);
        ObjectScript blocker = random_object(2, 0, spec.length, rng, 0.35, 0.22, 0.3);
        spec.objects = {a, b, blocker};
        int t0 = 6 + rng.uniform_int(0, 3);
        int d0 = rng.uniform_int(3, 8);
        int t1 = 20 + rng.uniform_int(0, 3);
        int d1 = rng.uniform_int(3, 8);
        int t2 = 31 + rng.uniform_int(0, 2);
        int d2 = rng.uniform_int(3, 6);
        int t3 = 14 + rng.uniform_int(0, 2);
        int d3 = rng.uniform_int(3, 5);
        spec.occlusions = {{2, 0, t0, d0, true},
                           {2, 1, t1, d1, true},
                           {2, 0, t2, d2, true},
                           {2, 1, t3, d3, false}};
        suite.push_back(std::move(spec));
    }
    return suite;
}

std::vector<ScenarioSpec> suite_lifecycle() {
    std::vector<ScenarioSpec> suite;
    Rng rng(0x11fe);
    for (int s = 0; s < 6; ++s) {
        ScenarioSpec spec;
        spec.name = "lifecycle-" + std::to_string(s);
        spec.length = 40;
        spec.seed = 0x11fe + s;
        int objects = 4 + s % 3;
        for (int i = 0; i < objects; ++i) {
            int entry = rng.uniform_int(0, 20);
            int exit = std::min(spec.length, entry + rng.uniform_int(12, 30));
            spec.objects.push_back(random_object(i, entry, exit, rng, 0.3));
        }
        suite.push_back(std::move(spec));
    }
    return suite;
}

std::vector<ScenarioSpec> suite_crowd() {
    std::vector<ScenarioSpec> suite;
    Rng rng(0xc04d);
    for (int s = 0; s < 4; ++s) {
        ScenarioSpec spec;
        spec.name = "crowd-" + std::to_string(s);
        spec.length = 30;
        spec.seed = 0xc04d + s;
        int objects = 9 + s; // up to 12
        for (int i = 0; i < objects; ++i) {
            int entry = rng.uniform_int(0, 6);
            int exit = std::min(spec.length, entry + rng.uniform_int(18, 30));
            spec.objects.push_back(random_object(i, entry, exit, rng, 0.2, 0.1, 0.16));
        }
        suite.push_back(std::move(spec));
    }
    return suite;
}

} // namespace

std::vector<std::string> standard_suite_names() {
    return {"overfit-tiny", "occlusion-suite", "lifecycle-suite", "crowd-suite"};
}

std::vector<ScenarioSpec> standard_suite(const std::string& name) {
    if (name == "overfit-tiny") return suite_overfit_tiny();
    if (name == "occlusion-suite") return suite_occlusion();
    if (name == "lifecycle-suite") return suite_lifecycle();
    if (name == "crowd-suite") return suite_crowd();
    throw Error(ErrorKind::Config, "unknown suite '" + name + "'");
}

} // namespace mo3tr
