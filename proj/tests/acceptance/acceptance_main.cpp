// Acceptance runner: `longtrack_acceptance <n>` checks criterion n and
// prints one "PASS criterion n: ..." or "FAIL criterion n: ..." line.
// With no argument every criterion runs in order.

#include <longtrack/config.hpp>
#include <longtrack/evaluation.hpp>
#include <longtrack/experiments.hpp>
#include <longtrack/numerics.hpp>
#include <longtrack/results.hpp>
#include <longtrack/search.hpp>
#include <longtrack/selfeval.hpp>
#include <longtrack/synthetic.hpp>
#include <longtrack/tracker.hpp>
#include <longtrack/update.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace lt = longtrack;
using lt::testing::random_tensor;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- 1

// Finite differences on a random subset of coordinates of a large vector.
double sampled_fd(const std::function<double(std::span<const double>)>& f,
                  const std::vector<double>& theta,
                  const std::vector<double>& grad, std::size_t begin,
                  std::size_t size, std::size_t samples, lt::Rng& rng) {
  std::vector<std::size_t> idx;
  if (size <= samples) {
    for (std::size_t i = 0; i < size; ++i) idx.push_back(begin + i);
  } else {
    while (idx.size() < samples) {
      const std::size_t i = begin + rng.below(size);
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
  }
  std::vector<double> sub;
  std::vector<double> sub_grad;
  for (std::size_t i : idx) {
    sub.push_back(theta[i]);
    sub_grad.push_back(grad[i]);
  }
  const lt::ScalarFunction g = [&](std::span<const double> x) {
    std::vector<double> full = theta;
    for (std::size_t k = 0; k < idx.size(); ++k) full[idx[k]] = x[k];
    return f(full);
  };
  return lt::finite_diff_check(g, sub, sub_grad, 1e-5);
}

std::vector<std::size_t> selfeval_blocks(const lt::SelfEvalDims& d) {
  const std::size_t k = d.kernel;
  const std::size_t h = d.hidden;
  return {k * k * d.conv1_channels, d.conv1_channels,
          k * k * d.conv1_channels * d.conv2_channels, d.conv2_channels,
          4 * h * d.encoding_size(), 4 * h * h, 4 * h,
          4 * h * h, 4 * h * h, 4 * h,
          d.mlp_hidden * h, d.mlp_hidden, d.mlp_hidden, 1};
}

Verdict criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  lt::Rng rng(2024);
  double fft_err = 0.0;
  for (int n = 0; n < 200; ++n) {
    const std::size_t ch = 1 + rng.below(8);
    const std::size_t qh = 1 + rng.below(8);
    const std::size_t qw = 1 + rng.below(8);
    const std::size_t ph = qh + rng.below(25);
    const std::size_t pw = qw + rng.below(25);
    const auto q = random_tensor(rng, qh, qw, ch, -1.0, 1.0);
    const auto p = random_tensor(rng, ph, pw, ch, -1.0, 1.0);
    const auto a = lt::xcorr_valid(q, p);
    const auto b = lt::xcorr_valid_fft(q, p);
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      fft_err = std::max(fft_err, std::abs(a.data()[i] - b.data()[i]));
    }
  }

  // Self-evaluation net at its default size, every parameter block.
  double se_err = 0.0;
  {
    const lt::SelfEvalDims dims;
    auto net = lt::SelfEvalNet::initialized(dims, 11);
    for (double& p : net.params()) p += rng.uniform(-0.05, 0.05);
    std::vector<lt::EvalSample> batch;
    for (double iou : {0.1, 0.4, 0.7}) {
      std::vector<lt::Grid2> maps;
      for (std::size_t t = 0; t < dims.sequence_length; ++t) {
        lt::Grid2 m(dims.map_side, dims.map_side);
        for (double& v : m.data()) v = rng.uniform(-2.0, 2.0);
        maps.push_back(std::move(m));
      }
      batch.push_back(lt::EvalSample::make(std::move(maps), iou));
    }
    const auto lg = lt::backward(net, batch);
    const std::vector<double> theta(net.params().begin(), net.params().end());
    const auto f = [&](std::span<const double> x) {
      auto probe = net;
      std::copy(x.begin(), x.end(), probe.params().begin());
      return lt::loss(probe, batch);
    };
    std::size_t offset = 0;
    for (std::size_t size : selfeval_blocks(dims)) {
      se_err = std::max(se_err, sampled_fd(f, theta, lg.gradient, offset, size, 24, rng));
      offset += size;
    }
    if (offset != theta.size()) se_err = 1.0;
  }

  // Projection-update loss, full gradient.
  double proj_err = 0.0;
  for (int n = 0; n < 10; ++n) {
    const auto query = random_tensor(rng, 4, 4, 8);
    std::vector<lt::UpdatePair> pairs;
    for (int k = 0; k < 8; ++k) {
      lt::UpdatePair p;
      p.features = random_tensor(rng, 4, 4, 8);
      p.label = k == 0 ? 1 : 0;
      pairs.push_back(std::move(p));
    }
    auto params = lt::ProjectionParams::identity(8);
    for (double& w : params.weight) w += rng.uniform(-0.3, 0.3);
    params.bias_logit = rng.uniform(-1.0, 1.0);
    const lt::ScoreCalibration cal;
    const auto pl = lt::pair_loss(query, pairs, params, cal);
    const lt::ScalarFunction f = [&](std::span<const double> x) {
      return lt::pair_loss(query, pairs, lt::ProjectionParams::unflatten(8, 8, x), cal)
          .loss;
    };
    proj_err = std::max(proj_err,
                        lt::finite_diff_check(f, params.flatten(), pl.gradient, 1e-5));
  }
  const double secs = seconds_since(t0);
  return {fft_err < 1e-6 && se_err < 1e-4 && proj_err < 1e-6 && secs < 120.0,
          fmt("fft max-abs %.3g (<1e-6), selfeval fd %.3g (<1e-4), "
              "projection fd %.3g (<1e-6), %.1fs (<120s)",
              fft_err, se_err, proj_err, secs)};
}

// ---------------------------------------------------------------- 2

Verdict criterion2() {
  std::ifstream in(std::string(LONGTRACK_GOLDEN_DIR) + "/default_config.txt");
  std::stringstream golden;
  golden << in.rdbuf();
  const lt::RunConfig c;
  std::vector<std::string> bad;
  if (lt::serialize_config(c) != golden.str()) bad.push_back("golden file");
  const auto& g = c.tracker.search.global;
  const auto expect = [&](bool ok, const char* what) {
    if (!ok) bad.push_back(what);
  };
  expect(g.num_locations == 10, "N");
  expect(g.stage2_scales.size() == 9, "M");
  for (std::size_t i = 0; i < g.stage2_scales.size(); ++i) {
    expect(std::abs(g.stage2_scales[i] - std::pow(2.0, -2.0 + 0.5 * i)) < 1e-12,
           "stage-2 grid");
  }
  expect(g.stage3_scales.size() == 11, "L");
  for (std::size_t i = 0; i < g.stage3_scales.size(); ++i) {
    expect(std::abs(g.stage3_scales[i] - std::pow(2.0, -0.4 + 0.08 * i)) < 1e-12,
           "stage-3 grid");
  }
  expect(g.probe_factor == 2, "t");
  expect(g.query_side == 32, "l");
  expect(g.fine_query_side == 64, "l fine");
  expect(c.tracker.search.local.query_side == 64, "l local");
  expect(c.tracker.search.local.scales ==
             std::vector<double>{0.9509, 0.9751, 1.0, 1.0255, 1.0517},
         "local scales");
  expect(c.tracker.search.history_length == 10 &&
             c.selfeval.dims.sequence_length == 10,
         "K");
  expect(c.selfeval.weights.low == 1.0 && c.selfeval.weights.mid == 0.05 &&
             c.selfeval.weights.high == 0.3,
         "sample weights");
  const auto& u = c.tracker.update;
  expect(u.learning_rate == 0.01 && u.momentum == 0.9 && u.iterations == 10,
         "update sgd");
  expect(c.tracker.period == 15, "T");
  std::string detail = "golden config and constants match";
  if (!bad.empty()) {
    detail = "mismatch:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------- 3

lt::TrackerConfig no_update(std::size_t period) {
  lt::TrackerConfig c;
  c.period = period;
  c.update.mode = lt::UpdateMode::none;
  return c;
}

Verdict criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<lt::Sequence> corpus;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    corpus.push_back(lt::generate_synthetic(lt::disappearance_spec(seed, 1000), seed));
  }
  std::vector<lt::AblationRow> rows = {{"global", no_update(1), {}, 0.0},
                                       {"local", no_update(lt::kLocalOnlyPeriod), {}, 0.0},
                                       {"hybrid", no_update(15), {}, 0.0}};
  lt::run_ablation(rows, corpus, nullptr, 1);
  const double global = rows[0].mean_auc;
  const double local = rows[1].mean_auc;
  const double hybrid = rows[2].mean_auc;
  const double secs = seconds_since(t0);
  return {global - local >= 0.10 && std::abs(hybrid - global) <= 0.05 && secs < 600.0,
          fmt("global %.4f, local %.4f (gap %.4f >= 0.10), hybrid T=15 %.4f "
              "(|diff| %.4f <= 0.05), %.0fs (<600s)",
              global, local, global - local, hybrid, std::abs(hybrid - global),
              secs)};
}

// ------------------------------------------------------------- 4 and 5

// Classifier trained on maps from held-out drift sequences (seeds disjoint
// from every evaluation corpus).
std::shared_ptr<const lt::SelfEvalNet> trained_selfeval(
    const lt::TrackerConfig& base) {
  std::vector<lt::EvalSample> data;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::uint64_t seed = 1000 + i;
    const auto seq = lt::generate_synthetic(lt::drift_spec(seed, 400), seed);
    const auto samples = lt::collect_selfeval_samples(seq, base, i);
    for (std::size_t j = 0; j < samples.size(); j += 2) data.push_back(samples[j]);
  }
  lt::TrainConfig tc;
  tc.epochs = 20;
  tc.seed = 7;
  const auto result = lt::train(data, tc);
  std::printf("selfeval: %zu samples, best epoch %zu, validation accuracy %.3f\n",
              data.size(), result.best_epoch, result.best_validation_accuracy);
  return std::make_shared<const lt::SelfEvalNet>(result.net);
}

Verdict criterion4() {
  const lt::TrackerConfig base;
  const auto net = trained_selfeval(base);
  std::vector<lt::Sequence> corpus;
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    corpus.push_back(lt::generate_synthetic(lt::drift_spec(seed, 400), seed));
  }
  auto rows = lt::ablation_rows(base);
  rows.erase(rows.begin(), rows.begin() + 2);
  lt::run_ablation(rows, corpus, net, 1);
  std::fputs(lt::ablation_csv(rows, corpus).c_str(), stdout);
  const double none = rows[0].mean_auc;
  const double blind = rows[1].mean_auc;
  const double sim = rows[2].mean_auc;
  const double aware = rows[3].mean_auc;
  const bool ok = aware - sim >= 0.03 && none - blind >= 0.03 && aware >= none;
  return {ok, fmt("no-upd %.4f, blind-upd %.4f, sim-upd %.4f, selfaware-upd %.4f; "
                  "selfaware-sim %.4f (>=0.03), no-blind %.4f (>=0.03), "
                  "selfaware-no %.4f (>=0)",
                  none, blind, sim, aware, aware - sim, none - blind, aware - none)};
}

Verdict criterion5() {
  lt::TrackerConfig aware;
  const auto net = trained_selfeval(aware);
  lt::TrackerConfig blind;
  blind.update.mode = lt::UpdateMode::blind;
  std::size_t aware_ok = 0;
  std::size_t blind_decline = 0;
  std::string per_seq;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto base = lt::generate_synthetic(lt::repetitive_base_spec(seed), seed);
    const auto rep = lt::make_repetitive(base, 20);
    const auto loops_of = [&](const lt::TrackerConfig& cfg,
                              std::shared_ptr<const lt::SelfEvalNet> se) {
      const auto preds = lt::track_frames(rep.frames, rep.init_box, cfg, se);
      return lt::per_loop_auc(preds, rep.annotations, rep.loop_length, rep.num_loops);
    };
    const auto a = loops_of(aware, net);
    const auto b = loops_of(blind, nullptr);
    const bool a_ok = a.back().auc >= 0.9 * a.front().auc;
    const bool b_dec = b.back().auc <= 0.8 * b.front().auc;
    aware_ok += a_ok ? 1 : 0;
    blind_decline += b_dec ? 1 : 0;
    per_seq += fmt(" [seq %d selfaware %.3f->%.3f, blind %.3f->%.3f]",
                   static_cast<int>(seed), a.front().auc, a.back().auc,
                   b.front().auc, b.back().auc);
  }
  return {aware_ok == 5 && blind_decline >= 3,
          fmt("selfaware stable on %zu/5 (need 5), blind >=20%% decline on %zu/5 "
              "(need 3);",
              aware_ok, blind_decline) +
              per_seq};
}

// ---------------------------------------------------------------- 6

Verdict criterion6() {
  const auto seq = lt::generate_synthetic(lt::disappearance_spec(42, 500), 42);
  std::vector<double> fps;
  std::string detail;
  for (std::size_t period : {1u, 5u, 15u, 30u}) {
    double best = 0.0;
    for (int rep = 0; rep < 2; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      lt::track_frames(seq.frames, seq.init_box, no_update(period));
      best = std::max(best, static_cast<double>(seq.frames.size()) / seconds_since(t0));
    }
    fps.push_back(best);
    detail += fmt("%sT=%zu %.1f fps", detail.empty() ? "" : ", ", period, best);
  }
  bool ok = true;
  for (std::size_t i = 1; i < fps.size(); ++i) ok = ok && fps[i] > fps[i - 1];
  return {ok, detail};
}

// ---------------------------------------------------------------- 7

Verdict criterion7() {
  lt::TrainConfig tc;
  tc.epochs = 50;
  tc.seed = 3;
  const auto data = lt::testing::separable_dataset(600, 5);
  const auto a = lt::train(data, tc);
  const auto b = lt::train(data, tc);
  const bool deterministic = a.net == b.net && a.best_epoch == b.best_epoch;

  // Shuffled labels: the selected net is scored on a fresh shuffled set so
  // best-epoch selection cannot inflate the number.
  const auto noise = lt::testing::separable_dataset(600, 6, true);
  const auto c = lt::train(noise, tc);
  const auto fresh = lt::testing::separable_dataset(2000, 77, true);
  const double chance = lt::accuracy(c.net, fresh);

  const bool ok = a.best_validation_accuracy >= 0.9 && chance >= 0.4 &&
                  chance <= 0.6 && deterministic;
  return {ok, fmt("separable validation accuracy %.3f (>=0.9) at epoch %zu, "
                  "shuffled-label accuracy on fresh set %.3f (in [0.4, 0.6]), "
                  "deterministic %s",
                  a.best_validation_accuracy, a.best_epoch, chance,
                  deterministic ? "yes" : "no")};
}

// ---------------------------------------------------------------- 8

double brute_iou(const lt::BoundingBox& a, const lt::BoundingBox& b) {
  const double ax0 = a.cx - a.width / 2, ax1 = a.cx + a.width / 2;
  const double ay0 = a.cy - a.height / 2, ay1 = a.cy + a.height / 2;
  const double bx0 = b.cx - b.width / 2, bx1 = b.cx + b.width / 2;
  const double by0 = b.cy - b.height / 2, by1 = b.cy + b.height / 2;
  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih;
  const double uni = a.width * a.height + b.width * b.height - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

Verdict criterion8() {
  lt::Rng rng(8);
  double worst = 0.0;
  std::size_t absent_cases = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 5 + rng.below(200);
    std::vector<lt::FramePrediction> preds(n);
    std::vector<lt::AnnotationEntry> gt_entries;
    for (std::size_t f = 0; f < n; ++f) {
      preds[f].frame_index = f;
      if (rng.uniform() > 0.2) {
        preds[f].box = lt::BoundingBox{rng.uniform(20, 80), rng.uniform(20, 80),
                                       rng.uniform(5, 40), rng.uniform(5, 40)};
      }
      if (rng.uniform() < 0.7) {
        lt::AnnotationEntry e{f, std::nullopt};
        if (rng.uniform() > 0.25) {
          e.box = lt::BoundingBox{rng.uniform(20, 80), rng.uniform(20, 80),
                                  rng.uniform(5, 40), rng.uniform(5, 40)};
          // Sometimes an exact hit.
          if (preds[f].box && rng.uniform() < 0.1) e.box = preds[f].box;
        }
        gt_entries.push_back(e);
      }
    }
    if (gt_entries.empty()) gt_entries.push_back({0, std::nullopt});
    const lt::AnnotationTrack gt(gt_entries);

    std::vector<double> overlaps;
    for (const auto& e : gt_entries) {
      const auto& p = preds[e.frame_index];
      if (!e.box) {
        overlaps.push_back(p.box ? 0.0 : 1.0);
        ++absent_cases;
      } else {
        overlaps.push_back(p.box ? brute_iou(*p.box, *e.box) : 0.0);
      }
    }
    double area = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double thr = k / 100.0;
      std::size_t hits = 0;
      for (double o : overlaps) hits += o > thr ? 1 : 0;
      area += static_cast<double>(hits) / static_cast<double>(overlaps.size());
    }
    area /= 101.0;
    worst = std::max(worst, std::abs(area - lt::modified_auc(preds, gt).auc));
  }
  return {worst <= 1e-12 && absent_cases > 0,
          fmt("max |brute - modified_auc| %.3g over 100 sets (<=1e-12), "
              "%zu absent-frame cases",
              worst, absent_cases)};
}

// ---------------------------------------------------------------- 9

void put_double(std::string& out, double v) {
  out += fmt("%a;", v);
}

std::string stage_digest(const lt::GrayFrame& frame, const lt::TrackerState& state,
                         const lt::SearchSettings& settings,
                         const lt::ScoredBox& coarse) {
  std::string bytes;
  for (const auto& b : lt::global_stage1(frame, state, settings)) {
    for (double v : {b.cx, b.cy, b.width, b.height}) put_double(bytes, v);
  }
  const auto s3 = lt::global_stage3(frame, coarse, state, settings);
  for (double v : {s3.best.box.cx, s3.best.box.cy, s3.best.box.width,
                   s3.best.box.height, s3.best.raw_score, s3.best.normalized_score}) {
    put_double(bytes, v);
  }
  for (double v : s3.map.data()) put_double(bytes, v);
  return bytes;
}

Verdict criterion9() {
  const auto seq = lt::generate_synthetic(lt::drift_spec(9, 200), 9);
  lt::TrackerConfig cfg;
  cfg.period = 1;
  cfg.update.mode = lt::UpdateMode::blind;
  lt::Tracker tracker(cfg);
  tracker.init(*seq.frames[0], seq.init_box);
  const lt::GrayFrame probe(*seq.frames[1]);
  const lt::ScoredBox coarse{seq.init_box, 0.0, 0.5};
  const auto initial_params = tracker.state().stage2_params;
  const std::string before = stage_digest(probe, tracker.state(), cfg.search, coarse);

  std::size_t frame = 1;
  while (tracker.updates_applied() < 100 && frame < seq.frames.size()) {
    tracker.step(*seq.frames[frame++]);
  }
  const std::string after = stage_digest(probe, tracker.state(), cfg.search, coarse);
  const bool changed = !(tracker.state().stage2_params == initial_params);
  const bool same = before == after;
  return {same && changed && tracker.updates_applied() >= 100,
          fmt("%zu updates, stage-1/3 digest %s before vs %s after (%s), "
              "stage-2 params %s",
              tracker.updates_applied(), lt::fnv1a_hex(before).c_str(),
              lt::fnv1a_hex(after).c_str(), same ? "identical" : "DIFFERENT",
              changed ? "changed" : "unchanged")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};
  std::vector<int> which;
  if (argc > 1) {
    which.push_back(std::atoi(argv[1]));
  } else {
    for (int i = 1; i <= 9; ++i) which.push_back(i);
  }
  bool all = true;
  for (int i : which) {
    if (i < 1 || i > 9) {
      std::fprintf(stderr, "unknown criterion %d\n", i);
      return 2;
    }
    Verdict v;
    try {
      v = criteria[static_cast<std::size_t>(i - 1)]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", i, v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
