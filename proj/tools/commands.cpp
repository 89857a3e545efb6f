#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "longtrack/config.hpp"
#include "longtrack/data_io.hpp"
#include "longtrack/errors.hpp"
#include "longtrack/evaluation.hpp"
#include "longtrack/experiments.hpp"
#include "longtrack/results.hpp"
#include "longtrack/selfeval.hpp"
#include "longtrack/synthetic.hpp"
#include "longtrack/tracker.hpp"

namespace longtrack::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// Applies the config file, then `--key value` / `--key=value` overrides,
// then LONGTRACK_SEED when no seed was given explicitly.
RunConfig build_config(const std::string& config_path,
                       const std::vector<std::string>& extras) {
  RunConfig config;
  std::set<std::string> assigned;
  if (!config_path.empty()) {
    assigned = apply_config_file(config, config_path);
  }
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      throw ConfigError("unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) {
        throw ConfigError("missing value for --" + key);
      }
      value = extras[++i];
    }
    set_config_value(config, key, value);
    assigned.insert(key);
  }
  if (assigned.count("seed") == 0) {
    if (const char* env = std::getenv("LONGTRACK_SEED"); env && *env) {
      set_config_value(config, "seed", env);
    }
  }
  return config;
}

std::shared_ptr<const SelfEvalNet> load_selfeval(const RunConfig& config) {
  if (config.selfeval_model.empty()) {
    return nullptr;
  }
  return std::make_shared<const SelfEvalNet>(load_model(config.selfeval_model));
}

// Manifest files named on the command line plus every manifest.json below
// the given directories, sorted for a stable order.
std::vector<fs::path> find_manifests(const std::vector<std::string>& inputs) {
  std::vector<fs::path> found;
  for (const std::string& input : inputs) {
    const fs::path p(input);
    if (fs::is_directory(p)) {
      std::vector<fs::path> in_dir;
      for (const auto& entry : fs::recursive_directory_iterator(p)) {
        if (entry.is_regular_file() &&
            entry.path().filename() == "manifest.json") {
          in_dir.push_back(entry.path());
        }
      }
      std::sort(in_dir.begin(), in_dir.end());
      found.insert(found.end(), in_dir.begin(), in_dir.end());
    } else if (fs::exists(p)) {
      found.push_back(p);
    } else {
      throw DataError("no such sequence or directory: " + p.string());
    }
  }
  return found;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- track

struct TrackOutcome {
  std::string id;
  std::size_t frames = 0;
  double seconds = 0.0;
  std::optional<double> auc;
};

TrackOutcome track_one(const fs::path& manifest_path, const RunConfig& config,
                       const std::shared_ptr<const SelfEvalNet>& selfeval,
                       const fs::path& out_dir) {
  const SequenceManifest manifest = read_manifest(manifest_path);
  const Sequence seq = load_sequence_in_memory(manifest_path);

  std::size_t global_frames = 0;
  std::size_t updates = 0;
  const auto start = std::chrono::steady_clock::now();
  const std::vector<FramePrediction> preds = track_frames(
      seq.frames, seq.init_box, config.tracker, selfeval,
      [&](const StepResult& r, const TrackerState&) {
        global_frames += r.mode == SearchMode::global ? 1 : 0;
        updates += r.update_applied ? 1 : 0;
      });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  ResultsFile results;
  results.header.sequence_id = seq.id;
  results.header.fps = seq.fps;
  results.header.config_hash = config_hash(config);
  if (!manifest.annotations.empty()) {
    results.header.annotations = fs::absolute(manifest.annotations).string();
  }
  results.header.loop_length = seq.loop_length;
  results.header.num_loops = seq.num_loops;
  results.predictions = preds;
  write_results(out_dir / (seq.id + ".results.json"), results);

  const nlohmann::json timing = {
      {"sequence", seq.id},
      {"frames", preds.size()},
      {"seconds", seconds},
      {"fps", seconds > 0.0 ? static_cast<double>(preds.size()) / seconds : 0.0},
      {"period", config.tracker.period},
      {"global_frames", global_frames},
      {"updates", updates},
      {"config_hash", results.header.config_hash},
  };
  write_text_file(out_dir / (seq.id + ".timing.json"), timing.dump(1) + "\n");

  TrackOutcome outcome{seq.id, preds.size(), seconds, std::nullopt};
  if (!seq.annotations.empty()) {
    outcome.auc = modified_auc(preds, seq.annotations).auc;
  }
  return outcome;
}

int cmd_track(const RunConfig& config, const std::vector<std::string>& seqs,
              Context& ctx) {
  std::vector<std::string> inputs = seqs;
  inputs.insert(inputs.end(), config.sequences.begin(), config.sequences.end());
  if (inputs.empty()) {
    throw ConfigError("track: no sequences given (use --seq)");
  }
  const std::vector<fs::path> manifests = find_manifests(inputs);
  const auto selfeval = load_selfeval(config);
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);

  std::vector<TrackOutcome> outcomes(manifests.size());
  parallel_for(manifests.size(), config.jobs, [&](std::size_t i) {
    outcomes[i] = track_one(manifests[i], config, selfeval, out_dir);
  });
  for (const TrackOutcome& o : outcomes) {
    ctx.out << o.id << ": " << o.frames << " frames, "
            << fixed(static_cast<double>(o.frames) / std::max(o.seconds, 1e-9), 1)
            << " fps";
    if (o.auc) {
      ctx.out << ", auc " << fixed(*o.auc);
    }
    ctx.out << " -> " << (out_dir / (o.id + ".results.json")).string() << "\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------------- eval

AnnotationTrack ground_truth(const ResultsFile& results,
                             const std::string& override_path) {
  const std::string path =
      override_path.empty() ? results.header.annotations : override_path;
  if (path.empty()) {
    throw DataError("results for '" + results.header.sequence_id +
                    "' name no annotations; pass --annotations");
  }
  return parse_annotations(path);
}

int cmd_eval(const RunConfig& config, const std::vector<std::string>& files,
             const std::string& annotations, const std::string& curve_dir,
             Context& ctx) {
  if (files.empty()) {
    throw ConfigError("eval: no results given (use --results)");
  }
  if (!annotations.empty() && files.size() != 1) {
    throw ConfigError("eval: --annotations applies to a single results file");
  }
  for (const std::string& file : files) {
    const ResultsFile results = read_results(file);
    const AnnotationTrack gt = ground_truth(results, annotations);
    const SuccessCurve curve = modified_auc(results.predictions, gt);
    ctx.out << results.header.sequence_id << ": auc " << fixed(curve.auc)
            << " over " << curve.frames << " annotated frames";
    const auto window = static_cast<std::size_t>(
        std::ceil(config.eval_window_seconds * results.header.fps - 1e-9));
    if (window > 0 && window <= results.predictions.size()) {
      const SuccessCurve last =
          last_window_auc(results.predictions, gt, config.eval_window_seconds,
                          results.header.fps);
      ctx.out << ", last " << config.eval_window_seconds << "s auc "
              << fixed(last.auc);
    }
    ctx.out << "\n";
    if (results.header.num_loops > 0) {
      const auto loops =
          per_loop_auc(results.predictions, gt, results.header.loop_length,
                       results.header.num_loops);
      ctx.out << "  per-loop auc:";
      for (const SuccessCurve& c : loops) {
        ctx.out << " " << fixed(c.auc, 3);
      }
      ctx.out << "\n";
    }
    if (!curve_dir.empty()) {
      fs::create_directories(curve_dir);
      write_text_file(fs::path(curve_dir) /
                          (results.header.sequence_id + ".curve.csv"),
                      curve_csv(curve));
    }
  }
  return kExitOk;
}

// ------------------------------------------------------------- ablation

std::vector<Sequence> load_corpus(const std::vector<fs::path>& manifests) {
  std::vector<Sequence> corpus;
  corpus.reserve(manifests.size());
  for (const fs::path& m : manifests) {
    corpus.push_back(load_sequence_in_memory(m));
  }
  return corpus;
}

int cmd_ablation(const RunConfig& config, const std::vector<std::string>& inputs_in,
                 Context& ctx) {
  std::vector<std::string> inputs = inputs_in;
  inputs.insert(inputs.end(), config.sequences.begin(), config.sequences.end());
  const std::vector<fs::path> manifests = find_manifests(inputs);
  if (manifests.size() < 10) {
    throw ConfigError("ablation: needs at least 10 sequences, got " +
                      std::to_string(manifests.size()));
  }
  const auto selfeval = load_selfeval(config);
  if (!selfeval) {
    throw ConfigError(
        "ablation: the selfaware-upd row needs --selfeval.model <file>");
  }
  const std::vector<Sequence> corpus = load_corpus(manifests);
  std::vector<AblationRow> rows = ablation_rows(config.tracker);
  run_ablation(rows, corpus, selfeval, config.jobs);
  const std::string csv = ablation_csv(rows, corpus);
  fs::create_directories(config.output_dir);
  write_text_file(fs::path(config.output_dir) / "ablation.csv", csv);
  ctx.out << csv;
  return kExitOk;
}

// ------------------------------------------------------------ gen-synth

SynthSpec kind_spec(const std::string& kind, std::uint64_t seed,
                    std::size_t length) {
  if (kind == "disappearance") {
    return length ? disappearance_spec(seed, length) : disappearance_spec(seed);
  }
  if (kind == "drift") {
    return length ? drift_spec(seed, length) : drift_spec(seed);
  }
  if (kind == "repetitive") {
    return length ? repetitive_base_spec(seed, length)
                  : repetitive_base_spec(seed);
  }
  throw ConfigError("gen-synth: unknown --kind '" + kind +
                    "' (disappearance, drift or repetitive)");
}

int cmd_gen_synth(const RunConfig& config, const std::string& kind,
                  const std::string& spec_path, std::size_t count,
                  std::size_t length, Context& ctx) {
  if (kind.empty() == spec_path.empty()) {
    throw ConfigError("gen-synth: give exactly one of --kind or --spec");
  }
  std::optional<SynthSpec> file_spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) {
      throw DataError("cannot open " + spec_path);
    }
    std::stringstream text;
    text << in.rdbuf();
    file_spec = parse_synth_spec(text.str(), spec_path);
    if (length) {
      file_spec->length = length;
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = config.seed + i;
    SynthSpec spec = file_spec ? *file_spec : kind_spec(kind, seed, length);
    if (file_spec && count > 1) {
      spec.id += "-" + std::to_string(i);
    }
    const Sequence seq = generate_synthetic(spec, seed);
    const fs::path dir = fs::path(config.output_dir) / seq.id;
    const fs::path manifest = write_sequence(dir, seq);
    write_text_file(dir / "spec.txt", format_synth_spec(spec));
    ctx.out << manifest.string() << "\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------- gen-repeat

int cmd_gen_repeat(const RunConfig& config, const std::string& seq_path,
                   std::size_t loops, Context& ctx) {
  if (seq_path.empty()) {
    throw ConfigError("gen-repeat: --seq is required");
  }
  const SequenceManifest source = read_manifest(seq_path);
  if (source.annotations.empty()) {
    throw DataError(seq_path + ": repetitive sequences need annotations");
  }
  const AnnotationTrack track = parse_annotations(source.annotations);
  RepetitiveSequence rep = make_repetitive(source, track, loops);
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  rep.manifest.annotations = fs::absolute(dir / "annotations.csv");
  write_annotations(rep.manifest.annotations, rep.annotations);
  const fs::path manifest = dir / "manifest.json";
  write_manifest(manifest, rep.manifest);
  ctx.out << manifest.string() << " (" << rep.manifest.frames.size()
          << " frames)\n";
  return kExitOk;
}

// ------------------------------------------------------- train-selfeval

int cmd_train_selfeval(const RunConfig& config,
                       const std::vector<std::string>& data,
                       const std::string& model_path, Context& ctx) {
  if (model_path.empty()) {
    throw ConfigError("train-selfeval: --out <model> is required");
  }
  const std::vector<fs::path> manifests = find_manifests(data);
  if (manifests.empty()) {
    throw DataError("train-selfeval: no sequences found");
  }
  std::vector<std::vector<EvalSample>> per_seq(manifests.size());
  parallel_for(manifests.size(), config.jobs, [&](std::size_t i) {
    const Sequence seq = load_sequence_in_memory(manifests[i]);
    per_seq[i] = collect_selfeval_samples(seq, config.tracker, i);
  });
  std::vector<EvalSample> samples;
  for (auto& s : per_seq) {
    std::move(s.begin(), s.end(), std::back_inserter(samples));
  }
  const TrainResult result = train(samples, config.selfeval);
  save_model(result.net, model_path);

  std::ostringstream metrics;
  metrics << "epoch,train_loss,train_accuracy,validation_loss,"
             "validation_accuracy\n";
  for (const EpochMetrics& m : result.history) {
    metrics << m.epoch << "," << m.train_loss << "," << m.train_accuracy << ","
            << m.validation_loss << "," << m.validation_accuracy << "\n";
  }
  write_text_file(model_path + ".metrics.csv", metrics.str());
  ctx.out << "samples " << samples.size() << " (train " << result.train_size
          << ", validation " << result.validation_size << "), best epoch "
          << result.best_epoch << ", validation accuracy "
          << fixed(result.best_validation_accuracy, 3) << " -> " << model_path
          << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- report

int cmd_report(const std::string& results_dir, const std::string& out_dir,
               Context& ctx) {
  if (results_dir.empty() || !fs::is_directory(results_dir)) {
    throw DataError("report: '" + results_dir + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 13 &&
        name.ends_with(".results.json")) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw DataError("report: no *.results.json files under " + results_dir);
  }
  std::sort(files.begin(), files.end());

  const fs::path out(out_dir.empty() ? results_dir : out_dir);
  std::ostringstream summary;
  std::ostringstream sweep;
  summary << "sequence,run,frames,auc,fps,period\n";
  sweep << "sequence,period,fps,auc\n";
  // (sequence, period) -> (fps, auc) for the T-sweep table
  std::map<std::pair<std::string, std::size_t>, std::pair<double, double>> tpoints;

  for (const fs::path& file : files) {
    const ResultsFile results = read_results(file);
    const std::string& id = results.header.sequence_id;
    const fs::path rel = fs::relative(file.parent_path(), results_dir);
    const fs::path dest = out / rel;
    fs::create_directories(dest);

    std::optional<double> auc;
    if (!results.header.annotations.empty()) {
      const AnnotationTrack gt = parse_annotations(results.header.annotations);
      const SuccessCurve curve = modified_auc(results.predictions, gt);
      auc = curve.auc;
      write_text_file(dest / (id + ".curve.csv"), curve_csv(curve));
      if (results.header.num_loops > 0) {
        std::ostringstream loops;
        loops << "loop,auc\n";
        const auto curves =
            per_loop_auc(results.predictions, gt, results.header.loop_length,
                         results.header.num_loops);
        for (std::size_t i = 0; i < curves.size(); ++i) {
          loops << i + 1 << "," << curves[i].auc << "\n";
        }
        write_text_file(dest / (id + ".loops.csv"), loops.str());
      }
    }

    std::optional<double> fps;
    std::optional<std::size_t> period;
    const fs::path timing_path = file.parent_path() / (id + ".timing.json");
    if (fs::exists(timing_path)) {
      const nlohmann::json timing = read_json_file(timing_path);
      fps = timing.value("fps", 0.0);
      period = timing.value("period", std::size_t{0});
    }
    summary << id << "," << (rel.empty() ? "." : rel.string()) << ","
            << results.predictions.size() << ","
            << (auc ? fixed(*auc) : std::string("")) << ","
            << (fps ? fixed(*fps, 2) : std::string("")) << ","
            << (period ? std::to_string(*period) : std::string("")) << "\n";
    if (fps && period && auc) {
      tpoints[{id, *period}] = {*fps, *auc};
    }
  }
  for (const auto& [key, value] : tpoints) {
    sweep << key.first << "," << key.second << "," << fixed(value.first, 2)
          << "," << fixed(value.second) << "\n";
  }
  fs::create_directories(out);
  write_text_file(out / "summary.csv", summary.str());
  write_text_file(out / "tsweep.csv", sweep.str());
  ctx.out << summary.str();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Long-term single-object tracker", "longtrack"};
  app.require_subcommand(1);

  std::string config_path;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->allow_extras();
    sub->footer(
        "Any config key can be overridden with --<key> <value>, e.g. "
        "--search.T 15. LONGTRACK_SEED sets the seed when none is given.");
  };

  std::vector<std::string> seqs;
  auto* track = app.add_subcommand("track", "track sequences and write results");
  add_common(track);
  track->add_option("--seq", seqs, "sequence manifest or directory")->take_all();

  std::vector<std::string> result_files;
  std::string annotations;
  std::string curve_dir;
  auto* eval = app.add_subcommand("eval", "score results against ground truth");
  add_common(eval);
  eval->add_option("--results", result_files, "results JSON files")->take_all();
  eval->add_option("--annotations", annotations, "ground-truth CSV override");
  eval->add_option("--curves", curve_dir, "write success curves here");

  std::vector<std::string> corpus;
  auto* ablation =
      app.add_subcommand("ablation", "search and update-mode ablation table");
  add_common(ablation);
  ablation->add_option("--corpus", corpus, "sequence manifests or directories")
      ->take_all();

  std::string kind;
  std::string spec_path;
  std::size_t count = 1;
  std::size_t length = 0;
  auto* gen_synth = app.add_subcommand("gen-synth", "render synthetic sequences");
  add_common(gen_synth);
  gen_synth->add_option("--kind", kind, "disappearance, drift or repetitive");
  gen_synth->add_option("--spec", spec_path, "synthetic spec file");
  gen_synth->add_option("--count", count, "number of sequences (seeds seed..)")
      ->check(CLI::PositiveNumber);
  gen_synth->add_option("--length", length, "frames per sequence");

  std::string repeat_seq;
  std::size_t loops = 20;
  auto* gen_repeat =
      app.add_subcommand("gen-repeat", "build a forward+reverse looped sequence");
  add_common(gen_repeat);
  gen_repeat->add_option("--seq", repeat_seq, "source manifest");
  gen_repeat->add_option("--loops", loops, "number of loops")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> data;
  std::string out_path;
  std::size_t epochs = 0;
  auto* train_cmd =
      app.add_subcommand("train-selfeval", "train the self-evaluation classifier");
  add_common(train_cmd);
  train_cmd->add_option("--data", data, "training sequences or directories")
      ->take_all()
      ->required();
  train_cmd->add_option("--out", out_path, "model file to write");
  train_cmd->add_option("--epochs", epochs, "training epochs");

  std::string results_dir;
  std::string report_out;
  auto* report = app.add_subcommand("report", "curves and summary tables");
  report->add_option("--results", results_dir, "directory of results")
      ->required();
  report->add_option("--out", report_out, "output directory");

  // Plain --out is shorthand for the `output` key on the other commands.
  for (CLI::App* sub : {track, eval, ablation, gen_synth, gen_repeat}) {
    sub->add_option("--out", out_path, "output directory");
  }

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == report) {
      return cmd_report(results_dir, report_out, ctx);
    }
    std::vector<std::string> extras = sub->remaining();
    RunConfig config = build_config(config_path, extras);
    if (sub != train_cmd && !out_path.empty()) {
      config.output_dir = out_path;
    }
    if (sub == track) {
      return cmd_track(config, seqs, ctx);
    }
    if (sub == eval) {
      return cmd_eval(config, result_files, annotations, curve_dir, ctx);
    }
    if (sub == ablation) {
      return cmd_ablation(config, corpus, ctx);
    }
    if (sub == gen_synth) {
      return cmd_gen_synth(config, kind, spec_path, count, length, ctx);
    }
    if (sub == gen_repeat) {
      return cmd_gen_repeat(config, repeat_seq, loops, ctx);
    }
    if (epochs > 0) {
      config.selfeval.epochs = epochs;
    }
    return cmd_train_selfeval(config, data, out_path, ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace longtrack::cli
