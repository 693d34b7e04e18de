#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mo3tr/assignment.hpp"
#include "mo3tr/errors.hpp"
#include "mo3tr/rng.hpp"

namespace mo3tr {

// Alive on frames [entry, exit). Moves along the waypoint polyline,
// parameterized linearly over the lifespan, with optional per-frame jitter.
struct ObjectScript {
    int64_t id = 0;
    int entry = 0;
    int exit = 0;
    std::vector<std::pair<double, double>> waypoints; // normalized centers
    double width = 0.1;
    double height = 0.1;
    uint64_t appearance_seed = 0;
};

struct OcclusionScript {
    int64_t occluder = 0;
    int64_t occludee = 0;
    int start = 0;
    int duration = 0;
    bool full = true; // full occlusion removes the occludee's pixels entirely
};

struct ScenarioSpec {
    std::string name;
    int grid_h = 16;
    int grid_w = 16;
    int channels = 8;
    int length = 0;
    double jitter = 0.0;
    uint64_t seed = 0;
    std::vector<ObjectScript> objects;
    std::vector<OcclusionScript> occlusions;
};

struct GtBox {
    int64_t id = 0;
    BBox box;
    bool visible = true;
};

struct SyntheticSequence {
    ScenarioSpec spec;
    // per frame, grid_h * grid_w * channels floats, row-major (row, col, channel)
    std::vector<std::vector<float>> frames;
    std::vector<std::vector<GtBox>> gt;

    int frame_floats() const { return spec.grid_h * spec.grid_w * spec.channels; }
};

// Renders appearance-keyed Gaussian blobs along the scripted paths. Occluders
// overwrite occludees where they overlap; fully occluded objects leave no
// pixel evidence but stay in the ground truth with visible=false.
SyntheticSequence generate(const ScenarioSpec& spec);

// Fixed named collections: "overfit-tiny", "occlusion-suite",
// "lifecycle-suite", "crowd-suite".
std::vector<ScenarioSpec> standard_suite(const std::string& name);
std::vector<std::string> standard_suite_names();

// <base>.scene.json + <base>.frames.bin (little-endian float32 payload).
void save_sequence(const SyntheticSequence& seq, const std::string& base_path);
SyntheticSequence load_sequence(const std::string& base_path);

// Ground-truth appearance vector for an object, unit length, one value per
// rendered channel.
std::vector<double> appearance_vector(uint64_t appearance_seed, int channels);

} // namespace mo3tr
