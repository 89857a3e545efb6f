#include "longtrack/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "longtrack/errors.hpp"
#include "longtrack/results.hpp"

namespace longtrack {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::string fmt_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + fmt(values[i]);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && ws(s.front())) {
    s.remove_prefix(1);
  }
  while (!s.empty() && ws(s.back())) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " +
                    std::string(key) + " (expected " + expected + ")");
}

template <typename T>
T parse_int(std::string_view key, std::string_view v) {
  v = trim(v);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() ||
      !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  bad_value(key, v, "true or false");
}

std::size_t positive(std::string_view key, std::string_view v) {
  const auto n = parse_int<std::size_t>(key, v);
  if (n == 0) {
    bad_value(key, v, "a positive integer");
  }
  return n;
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  v = trim(v);
  while (!v.empty()) {
    const std::size_t comma = v.find(',');
    out.push_back(parse_real(key, v.substr(0, comma)));
    if (comma == std::string_view::npos) {
      break;
    }
    v = v.substr(comma + 1);
  }
  if (out.empty()) {
    bad_value(key, v, "a comma-separated list of numbers");
  }
  return out;
}

std::vector<std::string> parse_strings(std::string_view v) {
  std::vector<std::string> out;
  v = trim(v);
  while (!v.empty()) {
    const std::size_t comma = v.find(',');
    const std::string_view item = trim(v.substr(0, comma));
    if (!item.empty()) {
      out.emplace_back(item);
    }
    if (comma == std::string_view::npos) {
      break;
    }
    v = v.substr(comma + 1);
  }
  return out;
}

using Get = std::function<std::string(const RunConfig&)>;
using Set = std::function<void(RunConfig&, std::string_view)>;

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  const auto add = [&k](std::string name, std::string help, Get get, Set set) {
    k.push_back({std::move(name), std::move(help), std::move(get),
                 std::move(set)});
  };
  // search
  add("search.T", "global search period in frames",
      [](const RunConfig& c) { return fmt(c.tracker.period); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.period = positive("search.T", v);
      });
  add("search.N", "candidate locations kept by stage 1",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.num_locations);
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.global.num_locations = positive("search.N", v);
      });
  add("search.M", "stage-2 scales, 2^linspace(-2, 2, M)",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.stage2_scales.size());
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.global.stage2_scales =
            GlobalSearchConfig::stage2_grid(positive("search.M", v));
      });
  add("search.L", "stage-3 scales, 2^linspace(-0.4, 0.4, L)",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.stage3_scales.size());
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.global.stage3_scales =
            GlobalSearchConfig::stage3_grid(positive("search.L", v));
      });
  add("search.t", "probe region size relative to the candidate",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.probe_factor);
      },
      [](RunConfig& c, std::string_view v) {
        const std::size_t t = positive("search.t", v);
        c.tracker.search.global.probe_factor = t;
        c.tracker.search.local.probe_factor = t;
      });
  add("search.l", "query side in pixels for stages 1 and 2",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.query_side);
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.global.query_side = positive("search.l", v);
      });
  add("search.l_fine", "query side in pixels for stage 3",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.fine_query_side);
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.global.fine_query_side = positive("search.l_fine", v);
      });
  add("search.l_local", "query side in pixels for local search",
      [](const RunConfig& c) { return fmt(c.tracker.search.local.query_side); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.local.query_side = positive("search.l_local", v);
      });
  add("search.local_scales", "local search scale factors",
      [](const RunConfig& c) { return fmt_list(c.tracker.search.local.scales); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.local.scales = parse_list("search.local_scales", v);
      });
  add("search.nms_separation", "minimum stage-1 peak separation in cells",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.global.nms_min_separation);
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.global.nms_min_separation =
            parse_int<std::size_t>("search.nms_separation", v);
      });
  add("search.tau_abs", "absence threshold on the normalized score",
      [](const RunConfig& c) { return fmt(c.tracker.tau_abs); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.tau_abs = parse_real("search.tau_abs", v);
      });
  add("search.score_gain", "raw score slope per unit mean product",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.calibration.gain);
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.calibration.gain = parse_real("search.score_gain", v);
      });
  add("search.score_center", "mean product mapped to a raw score of 0",
      [](const RunConfig& c) {
        return fmt(c.tracker.search.calibration.center);
      },
      [](RunConfig& c, std::string_view v) {
        c.tracker.search.calibration.center =
            parse_real("search.score_center", v);
      });
  // update
  add("update.mode", "selfaware, none, blind or simthresh",
      [](const RunConfig& c) { return to_string(c.tracker.update.mode); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.update.mode = parse_update_mode(std::string(trim(v)));
      });
  add("update.sim_threshold", "score threshold of the simthresh mode",
      [](const RunConfig& c) { return fmt(c.tracker.update.sim_threshold); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.update.sim_threshold = parse_real("update.sim_threshold", v);
      });
  add("update.lr", "update learning rate",
      [](const RunConfig& c) { return fmt(c.tracker.update.learning_rate); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.update.learning_rate = parse_real("update.lr", v);
      });
  add("update.momentum", "update momentum",
      [](const RunConfig& c) { return fmt(c.tracker.update.momentum); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.update.momentum = parse_real("update.momentum", v);
      });
  add("update.iterations", "SGD iterations per update",
      [](const RunConfig& c) { return fmt(c.tracker.update.iterations); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.update.iterations =
            parse_int<std::size_t>("update.iterations", v);
      });
  add("update.max_negatives", "hard negatives kept per update",
      [](const RunConfig& c) { return fmt(c.tracker.update.max_negatives); },
      [](RunConfig& c, std::string_view v) {
        c.tracker.update.max_negatives =
            parse_int<std::size_t>("update.max_negatives", v);
      });
  // selfeval
  add("selfeval.K", "similarity maps per classification",
      [](const RunConfig& c) { return fmt(c.tracker.search.history_length); },
      [](RunConfig& c, std::string_view v) {
        const std::size_t k = positive("selfeval.K", v);
        c.tracker.search.history_length = k;
        c.selfeval.dims.sequence_length = k;
      });
  add("selfeval.weight_low", "sample weight for IoU below 0.3",
      [](const RunConfig& c) { return fmt(c.selfeval.weights.low); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.weights.low = parse_real("selfeval.weight_low", v);
      });
  add("selfeval.weight_mid", "sample weight for IoU in [0.3, 0.5]",
      [](const RunConfig& c) { return fmt(c.selfeval.weights.mid); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.weights.mid = parse_real("selfeval.weight_mid", v);
      });
  add("selfeval.weight_high", "sample weight for IoU above 0.5",
      [](const RunConfig& c) { return fmt(c.selfeval.weights.high); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.weights.high = parse_real("selfeval.weight_high", v);
      });
  add("selfeval.epochs", "training epochs",
      [](const RunConfig& c) { return fmt(c.selfeval.epochs); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.epochs = positive("selfeval.epochs", v);
      });
  add("selfeval.batch_size", "training minibatch size",
      [](const RunConfig& c) { return fmt(c.selfeval.batch_size); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.batch_size = positive("selfeval.batch_size", v);
      });
  add("selfeval.lr", "training learning rate",
      [](const RunConfig& c) { return fmt(c.selfeval.learning_rate); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.learning_rate = parse_real("selfeval.lr", v);
      });
  add("selfeval.momentum", "training momentum",
      [](const RunConfig& c) { return fmt(c.selfeval.momentum); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.momentum = parse_real("selfeval.momentum", v);
      });
  add("selfeval.validation_fraction", "share of videos held out",
      [](const RunConfig& c) { return fmt(c.selfeval.validation_fraction); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.validation_fraction =
            parse_real("selfeval.validation_fraction", v);
      });
  add("selfeval.weight_decay", "L2 penalty on the classifier parameters",
      [](const RunConfig& c) { return fmt(c.selfeval.weight_decay); },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.weight_decay = parse_real("selfeval.weight_decay", v);
      });
  add("selfeval.augment", "random map flips and rotations during training",
      [](const RunConfig& c) {
        return std::string(c.selfeval.augment ? "true" : "false");
      },
      [](RunConfig& c, std::string_view v) {
        c.selfeval.augment = parse_bool("selfeval.augment", v);
      });
  add("selfeval.model", "trained classifier file; empty disables it",
      [](const RunConfig& c) { return c.selfeval_model; },
      [](RunConfig& c, std::string_view v) {
        c.selfeval_model = std::string(trim(v));
      });
  // run
  add("seed", "random seed",
      [](const RunConfig& c) { return std::to_string(c.seed); },
      [](RunConfig& c, std::string_view v) {
        c.seed = parse_int<std::uint64_t>("seed", v);
        c.selfeval.seed = c.seed;
      });
  add("output", "output directory",
      [](const RunConfig& c) { return c.output_dir; },
      [](RunConfig& c, std::string_view v) {
        c.output_dir = std::string(trim(v));
      });
  add("sequences", "comma-separated manifest paths",
      [](const RunConfig& c) {
        std::string out;
        for (std::size_t i = 0; i < c.sequences.size(); ++i) {
          out += (i ? "," : "") + c.sequences[i];
        }
        return out;
      },
      [](RunConfig& c, std::string_view v) { c.sequences = parse_strings(v); });
  add("jobs", "parallel sequences",
      [](const RunConfig& c) { return fmt(c.jobs); },
      [](RunConfig& c, std::string_view v) { c.jobs = positive("jobs", v); });
  add("eval.window_seconds", "length of the last-window evaluation",
      [](const RunConfig& c) { return fmt(c.eval_window_seconds); },
      [](RunConfig& c, std::string_view v) {
        c.eval_window_seconds = parse_real("eval.window_seconds", v);
      });
  return k;
}

const ConfigKey& find_key(std::string_view key) {
  for (const ConfigKey& k : config_keys()) {
    if (k.name == key) {
      return k;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key,
                      std::string_view value) {
  find_key(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_key(key).get(config);
}

std::set<std::string> apply_config_text(RunConfig& config,
                                        std::string_view text,
                                        const std::string& source) {
  std::set<std::string> assigned;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#');
        hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(where + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (!section.empty()) {
      key = section + "." + key;
    }
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    assigned.insert(key);
  }
  return assigned;
}

std::set<std::string> apply_config_file(RunConfig& config,
                                        const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return apply_config_text(config, ss.str(), path.string());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const ConfigKey& k : config_keys()) {
    out += k.name + " = " + k.get(config) + "\n";
    if (k.name == "search.M") {
      out += "#   stage-2 scales: " +
             fmt_list(config.tracker.search.global.stage2_scales) + "\n";
    } else if (k.name == "search.L") {
      out += "#   stage-3 scales: " +
             fmt_list(config.tracker.search.global.stage3_scales) + "\n";
    }
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  RunConfig hashed = config;
  hashed.output_dir.clear();
  hashed.sequences.clear();
  hashed.jobs = 1;
  return fnv1a_hex(serialize_config(hashed));
}

}  // namespace longtrack
