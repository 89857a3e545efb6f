#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "longtrack/search.hpp"

namespace longtrack {

enum class UpdateMode { selfaware, none, blind, simthresh };

std::string to_string(UpdateMode mode);
/// Accepts the names printed by to_string; throws ConfigError otherwise.
UpdateMode parse_update_mode(const std::string& name);

struct UpdatePolicy {
  UpdateMode mode = UpdateMode::selfaware;
  double sim_threshold = 0.5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t iterations = 10;
  std::size_t max_negatives = 64;
};

enum class PairSource { final_prediction, stage2_candidate };

/// One (query, candidate) training pair for the stage-2 similarity. The
/// candidate is carried as the unprojected l-level feature window that the
/// stage-2 map scored, so training and scoring see identical inputs.
struct UpdatePair {
  BoundingBox box;
  Tensor3 features;
  int label = 0;
  PairSource source = PairSource::stage2_candidate;
  /// Stage-2 correlation at collection time (hardness ranking).
  double stage2_score = 0.0;
};

/// One positive (the final prediction) plus hard negatives: every stage-2
/// candidate cell outside the winning location's probe regions whose box
/// does not overlap the final prediction (IoU == 0), hardest first, capped
/// at policy.max_negatives.
std::vector<UpdatePair> build_pairs(const BoundingBox& final_box,
                                    const Stage2Result& stage2,
                                    const GrayFrame& frame,
                                    const SearchSettings& settings,
                                    const UpdatePolicy& policy);

struct PairLoss {
  double loss = 0.0;
  /// Gradient over ProjectionParams::flatten() layout.
  std::vector<double> gradient;
};

/// -(1/m) sum y log s + (1 - y) log(1 - s), s = score_features(query, b).
PairLoss pair_loss(const Tensor3& query_feats, std::span<const UpdatePair> pairs,
                   const ProjectionParams& params,
                   const ScoreCalibration& calibration);

struct UpdateOutcome {
  ProjectionParams params;
  bool applied = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string message;
};

/// Runs policy.iterations full-batch momentum-SGD steps (fresh velocity)
/// on a copy of the stage-2 params. A non-finite loss or parameter discards
/// the whole update and returns the previous params with applied = false.
UpdateOutcome apply_update(const TrackerState& state,
                           std::span<const UpdatePair> pairs,
                           const UpdatePolicy& policy,
                           const ScoreCalibration& calibration);

/// Whether an update is permitted this frame. Never on local-search frames.
bool gate(const UpdatePolicy& policy, SearchMode mode, bool selfeval_approved,
          double predicted_score) noexcept;

}  // namespace longtrack
