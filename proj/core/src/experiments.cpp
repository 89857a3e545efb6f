#include "longtrack/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "longtrack/errors.hpp"

namespace longtrack {

std::vector<EvalSample> collect_selfeval_samples(const Sequence& seq,
                                                 const TrackerConfig& base,
                                                 std::size_t group) {
  TrackerConfig config = base;
  config.period = 1;
  config.update.mode = UpdateMode::none;
  const std::size_t k = config.search.history_length;
  std::vector<EvalSample> samples;
  const StepObserver observer = [&](const StepResult& r,
                                    const TrackerState& state) {
    const AnnotationEntry* gt = seq.annotations.find(r.frame_index);
    if (gt == nullptr || state.map_history.size() < k) {
      return;
    }
    const double overlap =
        gt->absent() ? 0.0 : iou(r.prediction.box, *gt->box);
    std::vector<Grid2> maps(state.map_history.begin(),
                            state.map_history.end());
    samples.push_back(EvalSample::make(std::move(maps), overlap, group));
  };
  track_frames(seq.frames, seq.init_box, config, nullptr, observer);
  return samples;
}

SequenceRun run_sequence(const Sequence& seq, const TrackerConfig& config,
                         std::shared_ptr<const SelfEvalNet> selfeval) {
  SequenceRun run;
  run.sequence_id = seq.id;
  const auto start = std::chrono::steady_clock::now();
  std::size_t updates = 0;
  run.predictions = track_frames(
      seq.frames, seq.init_box, config, std::move(selfeval),
      [&updates](const StepResult& r, const TrackerState&) {
        updates += r.update_applied ? 1 : 0;
      });
  run.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  run.updates = updates;
  run.curve = modified_auc(run.predictions, seq.annotations);
  return run;
}

std::vector<AblationRow> ablation_rows(const TrackerConfig& base) {
  std::vector<AblationRow> rows;
  const auto row = [&](std::string name, std::size_t period, UpdateMode mode) {
    AblationRow r;
    r.name = std::move(name);
    r.config = base;
    r.config.period = period;
    r.config.update.mode = mode;
    rows.push_back(std::move(r));
  };
  row("local", kLocalOnlyPeriod, UpdateMode::none);
  row("global", 1, UpdateMode::none);
  row("no-upd", base.period, UpdateMode::none);
  row("blind-upd", base.period, UpdateMode::blind);
  row("sim-upd", base.period, UpdateMode::simthresh);
  row("selfaware-upd", base.period, UpdateMode::selfaware);
  return rows;
}

void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (std::thread& t : workers) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

void run_ablation(std::vector<AblationRow>& rows,
                  const std::vector<Sequence>& corpus,
                  std::shared_ptr<const SelfEvalNet> selfeval,
                  std::size_t jobs) {
  if (corpus.empty()) {
    throw DataError("ablation corpus is empty");
  }
  for (AblationRow& r : rows) {
    r.auc.assign(corpus.size(), 0.0);
  }
  parallel_for(rows.size() * corpus.size(), jobs, [&](std::size_t task) {
    AblationRow& r = rows[task / corpus.size()];
    const std::size_t s = task % corpus.size();
    r.auc[s] = run_sequence(corpus[s], r.config, selfeval).curve.auc;
  });
  for (AblationRow& r : rows) {
    double sum = 0.0;
    for (const double a : r.auc) {
      sum += a;
    }
    r.mean_auc = sum / static_cast<double>(r.auc.size());
  }
}

std::string ablation_csv(const std::vector<AblationRow>& rows,
                         const std::vector<Sequence>& corpus) {
  std::string out = "row,mean_auc";
  for (const Sequence& s : corpus) {
    out += "," + s.id;
  }
  out += "\n";
  char buf[64];
  for (const AblationRow& r : rows) {
    out += r.name;
    std::snprintf(buf, sizeof buf, ",%.6f", r.mean_auc);
    out += buf;
    for (const double a : r.auc) {
      std::snprintf(buf, sizeof buf, ",%.6f", a);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace longtrack
