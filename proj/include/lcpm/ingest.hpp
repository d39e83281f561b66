#pragma once

#include <filesystem>
#include <string>

#include "lcpm/types.hpp"

namespace lcpm {

// Reads one recording from the three-file drone-trajectory layout:
// per-frame rows (tracks), per-vehicle dimensions (tracks meta) and
// recording-level scalars (recording meta). Rows are grouped per vehicle
// and sorted by frame. See docs/FORMATS.md for the column contract.
Recording parse_recording(const std::filesystem::path& tracks_csv,
                          const std::filesystem::path& tracks_meta_csv,
                          const std::filesystem::path& recording_meta_csv);

struct CanonicalizeResult {
  Recording recording;
  // Tracks dropped because their direction of travel is ambiguous
  // (|mean vx| below the threshold).
  int excluded_tracks = 0;
};

// Rewrites every track into the canonical frame: x increases along the
// direction of travel for all vehicles. Tracks already driving forward
// are returned unchanged; backward tracks are rotated half a turn about
// the recording extents (positions mirrored in x and y, velocities and
// accelerations negated), which keeps the sign of lateral motion
// comparable across driving directions. Lane ids are opaque labels and
// are preserved. Idempotent.
CanonicalizeResult canonicalize(const Recording& recording,
                                double ambiguous_vx_threshold = 0.1);

// Optional pre-modeling smoothing hook: centered moving average of the
// kinematic channels over `window` frames (shrunk near track ends).
// window <= 1 returns the input unchanged; even windows are rejected.
// Lane ids and frame indices are untouched.
Recording smooth_recording(const Recording& recording, int window);

// Single-file canonical form; parse_canonical inverts serialize_recording
// exactly (values are written with round-trip precision).
std::string serialize_recording(const Recording& recording);
Recording parse_canonical_string(const std::string& text,
                                 const std::string& origin);
Recording parse_canonical(const std::filesystem::path& path);
void write_recording(const std::filesystem::path& path,
                     const Recording& recording);

}  // namespace lcpm
