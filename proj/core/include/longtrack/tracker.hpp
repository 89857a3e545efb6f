#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "longtrack/evaluation.hpp"
#include "longtrack/search.hpp"
#include "longtrack/selfeval.hpp"
#include "longtrack/update.hpp"

namespace longtrack {

struct TrackerConfig {
  SearchSettings search;
  std::size_t period = 15;  // T
  double tau_abs = 0.3;
  UpdatePolicy update;
};

struct StepResult {
  ScoredBox prediction;
  bool absent = false;
  SearchMode mode = SearchMode::local;
  bool approved = false;
  bool update_applied = false;
  std::size_t frame_index = 0;
};

/// Single-sequence tracker: time-clock scheduling of global and local
/// search, self-evaluation, absence declaration and gated updates.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config,
                   std::shared_ptr<const SelfEvalNet> selfeval = nullptr);

  void init(const ImagePatch& first_frame, const BoundingBox& target);
  /// Processes the next frame. Throws std::logic_error before init.
  StepResult step(const ImagePatch& frame);

  bool initialized() const noexcept { return initialized_; }
  const TrackerState& state() const noexcept { return state_; }
  const TrackerConfig& config() const noexcept { return config_; }
  std::size_t updates_applied() const noexcept { return updates_; }

 private:
  TrackerConfig config_;
  std::shared_ptr<const SelfEvalNet> selfeval_;
  TrackerState state_;
  SchedulerState scheduler_;
  bool initialized_ = false;
  std::size_t updates_ = 0;
};

FramePrediction to_prediction(const StepResult& step);

/// Called after every processed frame (not the init frame).
using StepObserver =
    std::function<void(const StepResult&, const TrackerState&)>;

/// Tracks a whole frame sequence. The first output is the init box.
std::vector<FramePrediction> track_frames(
    std::span<const std::shared_ptr<const ImagePatch>> frames,
    const BoundingBox& init_box, const TrackerConfig& config,
    std::shared_ptr<const SelfEvalNet> selfeval = nullptr,
    const StepObserver& observer = {});

}  // namespace longtrack
