#pragma once

#include <string>

#include "gzm/data.hpp"

namespace gzm {

// Dataset files are UTF-8 JSON Lines, one sample per line, fields in fixed
// order:
//   {"v":1,"subject":..,"motion":..,"fps":..,"frames":[[126]..],
//    "gaze":[[3]..],"objects":[{"kind":..,"points":[[3]..]}],"target":..}
// Floats round-trip exactly.

void write_dataset(const Dataset& dataset, const std::string& path);

/// Strict reader: unknown fields, bad shapes, or version mismatches raise
/// data_error naming the failing line.
Dataset read_dataset(const std::string& path);

/// Serialize one sample to its JSON line (no trailing newline).
std::string sample_to_json_line(const TrajectorySample& sample);

/// Parse one sample; `line_no` only labels error messages.
TrajectorySample sample_from_json_line(const std::string& line, int line_no);

}  // namespace gzm
