#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "longtrack/data_io.hpp"
#include "longtrack/evaluation.hpp"
#include "longtrack/selfeval.hpp"
#include "longtrack/tracker.hpp"

namespace longtrack {

/// Period that never triggers a global search after the init frame.
inline constexpr std::size_t kLocalOnlyPeriod = static_cast<std::size_t>(-1);

/// Self-evaluation training data from one sequence: runs `base` with
/// global search on every frame and no updates, and labels each annotated
/// frame that has a full map history by the IoU of the prediction.
std::vector<EvalSample> collect_selfeval_samples(const Sequence& seq,
                                                 const TrackerConfig& base,
                                                 std::size_t group);

struct SequenceRun {
  std::string sequence_id;
  std::vector<FramePrediction> predictions;
  SuccessCurve curve;
  double seconds = 0.0;
  std::size_t updates = 0;
};

SequenceRun run_sequence(const Sequence& seq, const TrackerConfig& config,
                         std::shared_ptr<const SelfEvalNet> selfeval = nullptr);

struct AblationRow {
  std::string name;
  TrackerConfig config;
  std::vector<double> auc;  // one per sequence
  double mean_auc = 0.0;
};

/// Rows local, global, no-upd, blind-upd, sim-upd, selfaware-upd. The
/// first two vary the search with updates off; the rest use `base`'s
/// period with each update mode.
std::vector<AblationRow> ablation_rows(const TrackerConfig& base);

/// Runs every row on every sequence with up to `jobs` threads. Results do
/// not depend on `jobs`.
void run_ablation(std::vector<AblationRow>& rows,
                  const std::vector<Sequence>& corpus,
                  std::shared_ptr<const SelfEvalNet> selfeval,
                  std::size_t jobs);

/// CSV `row,mean_auc,seq1,seq2,...`.
std::string ablation_csv(const std::vector<AblationRow>& rows,
                         const std::vector<Sequence>& corpus);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace longtrack
