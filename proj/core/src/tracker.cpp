#include "longtrack/tracker.hpp"

#include <stdexcept>

#include "longtrack/errors.hpp"

namespace longtrack {

Tracker::Tracker(TrackerConfig config,
                 std::shared_ptr<const SelfEvalNet> selfeval)
    : config_(std::move(config)), selfeval_(std::move(selfeval)) {
  if (config_.period == 0) {
    throw ConfigError("search.T must be at least 1");
  }
  if (selfeval_ &&
      selfeval_->dims().sequence_length != config_.search.history_length) {
    throw ConfigError("self-evaluation model expects " +
                      std::to_string(selfeval_->dims().sequence_length) +
                      " maps but the history holds " +
                      std::to_string(config_.search.history_length));
  }
}

void Tracker::init(const ImagePatch& first_frame, const BoundingBox& target) {
  state_ = init_tracker(first_frame, target, config_.search);
  scheduler_ = SchedulerState{config_.period, 0};
  initialized_ = true;
  updates_ = 0;
}

StepResult Tracker::step(const ImagePatch& frame_in) {
  if (!initialized_) {
    throw std::logic_error("Tracker::step called before init");
  }
  const GrayFrame frame(frame_in);
  StepResult out;
  out.mode = scheduler_.tick() ? SearchMode::global : SearchMode::local;
  out.frame_index = scheduler_.frame_counter;
  state_.frame_index = out.frame_index;

  FinalStageResult final_result;
  Stage2Result stage2;
  if (out.mode == SearchMode::global) {
    const auto locations = global_stage1(frame, state_, config_.search);
    stage2 = global_stage2(frame, locations, state_, config_.search);
    final_result = global_stage3(frame, stage2.best, state_, config_.search);
  } else {
    final_result = local_search(frame, state_, config_.search);
  }
  out.prediction = final_result.best;
  state_.push_map(final_result.map);

  out.approved = selfeval_ && approve(*selfeval_, state_);
  out.absent = !out.approved &&
               out.prediction.normalized_score < config_.tau_abs;
  state_.absent = out.absent;
  if (!out.absent) {
    state_.last_box = out.prediction.box;
  }

  if (gate(config_.update, out.mode, out.approved,
           out.prediction.normalized_score)) {
    const auto pairs = build_pairs(out.prediction.box, stage2, frame,
                                   config_.search, config_.update);
    UpdateOutcome outcome = apply_update(state_, pairs, config_.update,
                                         config_.search.calibration);
    if (outcome.applied) {
      state_.stage2_params = std::move(outcome.params);
      out.update_applied = true;
      ++updates_;
    }
  }
  return out;
}

FramePrediction to_prediction(const StepResult& step) {
  FramePrediction p;
  p.frame_index = step.frame_index;
  if (!step.absent) {
    p.box = step.prediction.box;
  }
  p.score = step.prediction.normalized_score;
  p.search_mode = step.mode;
  p.update_applied = step.update_applied;
  return p;
}

std::vector<FramePrediction> track_frames(
    std::span<const std::shared_ptr<const ImagePatch>> frames,
    const BoundingBox& init_box, const TrackerConfig& config,
    std::shared_ptr<const SelfEvalNet> selfeval,
    const StepObserver& observer) {
  if (frames.empty()) {
    throw DataError("sequence has no frames");
  }
  Tracker tracker(config, std::move(selfeval));
  tracker.init(*frames[0], init_box);
  std::vector<FramePrediction> preds;
  preds.reserve(frames.size());
  FramePrediction first;
  first.frame_index = 0;
  first.box = init_box;
  first.score = 1.0;
  first.search_mode = SearchMode::global;
  preds.push_back(first);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const StepResult r = tracker.step(*frames[i]);
    if (observer) {
      observer(r, tracker.state());
    }
    preds.push_back(to_prediction(r));
  }
  return preds;
}

}  // namespace longtrack
