#include "longtrack/update.hpp"

#include <algorithm>
#include <cmath>

#include "longtrack/errors.hpp"
#include "longtrack/numerics.hpp"

namespace longtrack {

std::string to_string(UpdateMode mode) {
  switch (mode) {
    case UpdateMode::selfaware:
      return "selfaware";
    case UpdateMode::none:
      return "none";
    case UpdateMode::blind:
      return "blind";
    case UpdateMode::simthresh:
      return "simthresh";
  }
  return "unknown";
}

UpdateMode parse_update_mode(const std::string& name) {
  for (const UpdateMode m : {UpdateMode::selfaware, UpdateMode::none,
                             UpdateMode::blind, UpdateMode::simthresh}) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw ConfigError("unknown update mode '" + name +
                    "' (expected selfaware, none, blind or simthresh)");
}

std::vector<UpdatePair> build_pairs(const BoundingBox& final_box,
                                    const Stage2Result& stage2,
                                    const GrayFrame& frame,
                                    const SearchSettings& settings,
                                    const UpdatePolicy& policy) {
  const auto& g = settings.global;
  SimilarityConfig config;
  config.query_side = g.query_side;
  config.probe_factor = g.probe_factor;
  const std::size_t stride = settings.extractor->stride();
  const std::size_t qcells = g.query_side / stride;

  std::vector<UpdatePair> pairs;
  {
    // The positive is scored exactly like a stage-2 central cell: a probe
    // of t times the predicted size centred on the prediction.
    const double t = static_cast<double>(g.probe_factor);
    const BoundingBox region{final_box.cx, final_box.cy, final_box.width * t,
                             final_box.height * t};
    const std::size_t side = config.probe_side();
    const Tensor3 feats =
        settings.extractor->extract(sample_region(frame, region, side, side));
    const std::size_t off = (feats.height() - qcells) / 2;
    UpdatePair pos;
    pos.box = final_box;
    pos.features = feats.window(off, off, qcells, qcells);
    pos.label = 1;
    pos.source = PairSource::final_prediction;
    pairs.push_back(std::move(pos));
  }

  struct Ref {
    const Stage2Probe* probe;
    MapCell cell;
    BoundingBox box;
    double score;
  };
  std::vector<Ref> candidates;
  for (const Stage2Probe& probe : stage2.probes) {
    if (probe.location == stage2.best_location) {
      continue;
    }
    for (std::size_t r = 0; r < probe.map.height(); ++r) {
      for (std::size_t c = 0; c < probe.map.width(); ++c) {
        const BoundingBox box =
            map_cell_to_box({r, c}, probe.region, config, stride);
        if (intersection_area(box, final_box) > 0.0) {
          continue;
        }
        candidates.push_back({&probe, {r, c}, box, probe.map(r, c)});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });
  if (candidates.size() > policy.max_negatives) {
    candidates.resize(policy.max_negatives);
  }
  for (const Ref& ref : candidates) {
    UpdatePair neg;
    neg.box = ref.box;
    neg.features =
        ref.probe->features.window(ref.cell.row, ref.cell.col, qcells, qcells);
    neg.label = 0;
    neg.source = PairSource::stage2_candidate;
    neg.stage2_score = ref.score;
    pairs.push_back(std::move(neg));
  }
  return pairs;
}

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// A = sum_p q_p x_p^T over spatial positions, so that the projected
// correlation equals sum_ab (W^T W)_ab A_ab.
std::vector<double> outer_accumulate(const Tensor3& q, const Tensor3& x) {
  const std::size_t ch = q.channels();
  std::vector<double> a(ch * ch, 0.0);
  const std::size_t positions = q.height() * q.width();
  const double* qd = q.data().data();
  const double* xd = x.data().data();
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < ch; ++i) {
      const double qi = qd[p * ch + i];
      for (std::size_t j = 0; j < ch; ++j) {
        a[i * ch + j] += qi * xd[p * ch + j];
      }
    }
  }
  return a;
}

struct PreparedPairs {
  std::vector<std::vector<double>> outer;
  std::vector<int> labels;
};

PreparedPairs prepare(const Tensor3& query, std::span<const UpdatePair> pairs) {
  PreparedPairs prep;
  for (const UpdatePair& p : pairs) {
    if (p.features.height() != query.height() ||
        p.features.width() != query.width() ||
        p.features.channels() != query.channels()) {
      throw ShapeError("update: pair features " + p.features.shape_string() +
                       " do not match query " + query.shape_string());
    }
    prep.outer.push_back(outer_accumulate(query, p.features));
    prep.labels.push_back(p.label);
  }
  return prep;
}

PairLoss evaluate(const PreparedPairs& prep, std::size_t query_elements,
                  const ProjectionParams& params,
                  const ScoreCalibration& calibration) {
  const std::size_t cin = params.in_channels;
  const std::size_t cout = params.out_channels;
  const std::vector<double>& w = params.weight;
  // M = W^T W
  std::vector<double> metric(cin * cin, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t a = 0; a < cin; ++a) {
      const double woa = w[o * cin + a];
      for (std::size_t b = 0; b < cin; ++b) {
        metric[a * cin + b] += woa * w[o * cin + b];
      }
    }
  }
  const double m = static_cast<double>(prep.outer.size());
  const double scale = calibration.gain / static_cast<double>(query_elements);
  PairLoss out;
  out.gradient.assign(params.parameter_count(), 0.0);
  std::vector<double> sym(cin * cin, 0.0);
  for (std::size_t k = 0; k < prep.outer.size(); ++k) {
    const std::vector<double>& a = prep.outer[k];
    double corr = 0.0;
    for (std::size_t i = 0; i < cin * cin; ++i) {
      corr += metric[i] * a[i];
    }
    const double z =
        calibration.raw(corr, query_elements) + params.bias_logit;
    const double y = static_cast<double>(prep.labels[k]);
    out.loss += (y * softplus(-z) + (1.0 - y) * softplus(z)) / m;
    const double dz = (logistic(z) - y) / m;
    out.gradient.back() += dz;
    // d corr / dW = W (A + A^T)
    for (std::size_t i = 0; i < cin; ++i) {
      for (std::size_t j = 0; j < cin; ++j) {
        sym[i * cin + j] = a[i * cin + j] + a[j * cin + i];
      }
    }
    const double coef = dz * scale;
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t c = 0; c < cin; ++c) {
        double acc = 0.0;
        for (std::size_t b = 0; b < cin; ++b) {
          acc += w[o * cin + b] * sym[b * cin + c];
        }
        out.gradient[o * cin + c] += coef * acc;
      }
    }
  }
  return out;
}

}  // namespace

PairLoss pair_loss(const Tensor3& query_feats, std::span<const UpdatePair> pairs,
                   const ProjectionParams& params,
                   const ScoreCalibration& calibration) {
  if (pairs.empty()) {
    throw DataError("update: no training pairs");
  }
  return evaluate(prepare(query_feats, pairs), query_feats.size(), params,
                  calibration);
}

UpdateOutcome apply_update(const TrackerState& state,
                           std::span<const UpdatePair> pairs,
                           const UpdatePolicy& policy,
                           const ScoreCalibration& calibration) {
  UpdateOutcome outcome;
  outcome.params = state.stage2_params;
  if (pairs.empty()) {
    outcome.message = "no training pairs";
    return outcome;
  }
  const Tensor3& query = state.query_feats_coarse;
  const PreparedPairs prep = prepare(query, pairs);
  const ProjectionParams& start = state.stage2_params;
  std::vector<double> flat = start.flatten();
  SgdMomentumState opt(flat.size(), policy.learning_rate, policy.momentum);
  ProjectionParams current = start;
  for (std::size_t it = 0; it < policy.iterations; ++it) {
    const PairLoss pl = evaluate(prep, query.size(), current, calibration);
    if (it == 0) {
      outcome.initial_loss = pl.loss;
    }
    if (!std::isfinite(pl.loss) || !all_finite(pl.gradient)) {
      outcome.message = "non-finite loss at iteration " + std::to_string(it);
      return outcome;
    }
    sgd_momentum_step_inplace(flat, pl.gradient, opt);
    if (!all_finite(flat)) {
      outcome.message = "non-finite parameters at iteration " +
                        std::to_string(it);
      return outcome;
    }
    current = ProjectionParams::unflatten(start.out_channels,
                                          start.in_channels, flat);
  }
  const PairLoss last = evaluate(prep, query.size(), current, calibration);
  if (!std::isfinite(last.loss)) {
    outcome.message = "non-finite final loss";
    return outcome;
  }
  outcome.final_loss = last.loss;
  outcome.params = std::move(current);
  outcome.applied = true;
  return outcome;
}

bool gate(const UpdatePolicy& policy, SearchMode mode, bool selfeval_approved,
          double predicted_score) noexcept {
  if (mode != SearchMode::global) {
    return false;
  }
  switch (policy.mode) {
    case UpdateMode::none:
      return false;
    case UpdateMode::blind:
      return true;
    case UpdateMode::simthresh:
      return predicted_score > policy.sim_threshold;
    case UpdateMode::selfaware:
      return selfeval_approved;
  }
  return false;
}

}  // namespace longtrack
