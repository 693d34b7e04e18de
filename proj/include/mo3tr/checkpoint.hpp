#pragma once

#include <string>

#include "mo3tr/model.hpp"

namespace mo3tr {

// Versioned container: 8-byte magic, u32 version, u64 header length, JSON
// header (model configuration plus a tensor directory), then the raw
// little-endian float64 payload. Weights round-trip bit-exactly.
void save_checkpoint(const Mo3trModel& model, const std::string& path);

// Rebuilds the model from the stored configuration and loads every named
// tensor. Shape or name mismatches are config errors.
Mo3trModel load_checkpoint(const std::string& path);

// Applies stored weights onto an existing model; the stored configuration
// must match the model's.
void load_weights(Mo3trModel& model, const std::string& path);

} // namespace mo3tr
