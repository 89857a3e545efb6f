#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "longtrack/data_io.hpp"

namespace longtrack {

/// One piece of the target's motion program.
///   drift:     move by (vx, vy) pixels per frame, reflecting at the edges
///   offscreen: target hidden (ground truth absent), position unchanged
///   teleport:  jump to (x, y) on the first frame, then drift by (vx, vy)
///   cut:       like teleport, and the background switches to a new scene
struct MotionSegment {
  enum class Kind { drift, offscreen, teleport, cut };
  Kind kind = Kind::drift;
  std::size_t frames = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  bool operator==(const MotionSegment&) const = default;
};

struct SynthSpec {
  std::string id = "synth";
  std::size_t width = 160;
  std::size_t height = 120;
  std::size_t length = 100;
  double fps = 30.0;
  std::size_t target_width = 32;
  std::size_t target_height = 32;
  double start_x = 80.0;  // target centre on frame 0
  double start_y = 60.0;
  std::uint64_t texture_seed = 1;
  /// Per-frame morph rate of the target texture towards a second texture,
  /// saturating at drift_max.
  double appearance_drift = 0.0;
  double drift_max = 1.0;
  /// Background rectangles per 100 square pixels.
  double clutter_density = 0.5;
  std::size_t distractors = 0;
  /// Distractor texture = s * base + (1 - s) * own random texture, where
  /// base is the target texture or, with distractor_inverted, its
  /// contrast-inverted copy.
  double distractor_similarity = 0.5;
  bool distractor_inverted = false;
  double distractor_speed = 1.0;
  double noise = 0.0;  // per-pixel Gaussian sigma
  std::vector<MotionSegment> program;  // empty = static target

  bool operator==(const SynthSpec&) const = default;
};

/// key = value lines; `segment = <kind> <frames> [x y] [vx vy]` appends a
/// motion segment (x y only for teleport and cut). Throws ConfigError.
SynthSpec parse_synth_spec(std::string_view text, const std::string& source);
std::string format_synth_spec(const SynthSpec& spec);

/// Renders the sequence with dense ground truth. Deterministic in
/// (spec, seed). Throws ConfigError when the target does not fit the
/// canvas, the program does not cover `length` or frame 0 is off-screen.
Sequence generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Moving target, clutter, one 10-30 % off-screen interval followed by a
/// teleported reappearance far from the exit point.
SynthSpec disappearance_spec(std::uint64_t seed, std::size_t length = 1000);

/// Appearance drift, similar-looking distractors and several off-screen
/// intervals.
SynthSpec drift_spec(std::uint64_t seed, std::size_t length = 600);

/// Short clip used as the base of a repetitive video.
SynthSpec repetitive_base_spec(std::uint64_t seed, std::size_t length = 50);

}  // namespace longtrack
