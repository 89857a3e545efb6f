#include "longtrack/results.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "longtrack/errors.hpp"

namespace longtrack {

namespace fs = std::filesystem;

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string results_to_json(const ResultsFile& results) {
  nlohmann::ordered_json j;
  const ResultsHeader& h = results.header;
  j["header"] = {{"sequence", h.sequence_id},
                 {"fps", h.fps},
                 {"config_hash", h.config_hash},
                 {"annotations", h.annotations},
                 {"loop_length", h.loop_length},
                 {"num_loops", h.num_loops},
                 {"frames", results.predictions.size()}};
  nlohmann::ordered_json preds = nlohmann::ordered_json::array();
  for (const FramePrediction& p : results.predictions) {
    nlohmann::ordered_json e;
    e["frame"] = p.frame_index;
    if (p.box) {
      e["box"] = {p.box->cx, p.box->cy, p.box->width, p.box->height};
    } else {
      e["absent"] = true;
    }
    e["score"] = p.score;
    e["mode"] = p.search_mode == SearchMode::global ? "global" : "local";
    e["update"] = p.update_applied;
    preds.push_back(std::move(e));
  }
  j["predictions"] = std::move(preds);
  return j.dump(1) + "\n";
}

ResultsFile results_from_json(std::string_view text, const std::string& source) {
  ResultsFile out;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    const auto& h = j.at("header");
    out.header.sequence_id = h.at("sequence").get<std::string>();
    out.header.fps = h.at("fps").get<double>();
    out.header.config_hash = h.at("config_hash").get<std::string>();
    out.header.annotations = h.value("annotations", std::string{});
    out.header.loop_length = h.value("loop_length", std::size_t{0});
    out.header.num_loops = h.value("num_loops", std::size_t{0});
    for (const auto& e : j.at("predictions")) {
      FramePrediction p;
      p.frame_index = e.at("frame").get<std::size_t>();
      const bool has_box = e.contains("box");
      const bool absent = e.value("absent", false);
      if (has_box == absent) {
        throw DataError(source + ": frame " + std::to_string(p.frame_index) +
                        " must carry exactly one of box / absent");
      }
      if (has_box) {
        const auto& b = e.at("box");
        if (!b.is_array() || b.size() != 4) {
          throw DataError(source + ": box must be [cx, cy, w, h]");
        }
        p.box = BoundingBox{b[0].get<double>(), b[1].get<double>(),
                            b[2].get<double>(), b[3].get<double>()};
      }
      p.score = e.at("score").get<double>();
      const std::string mode = e.at("mode").get<std::string>();
      if (mode != "global" && mode != "local") {
        throw DataError(source + ": unknown search mode '" + mode + "'");
      }
      p.search_mode = mode == "global" ? SearchMode::global : SearchMode::local;
      p.update_applied = e.at("update").get<bool>();
      if (!out.predictions.empty() &&
          p.frame_index <= out.predictions.back().frame_index) {
        throw DataError(source + ": frame indices must be strictly increasing");
      }
      out.predictions.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed results: " + e.what());
  }
  return out;
}

void write_text_file(const fs::path& path, std::string_view text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DataError("cannot write '" + tmp.string() + "'");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
      throw DataError("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

void write_results(const fs::path& path, const ResultsFile& results) {
  write_text_file(path, results_to_json(results));
}

ResultsFile read_results(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open results '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return results_from_json(ss.str(), path.string());
}

std::string curve_csv(const SuccessCurve& curve) {
  std::string out = "threshold,success_rate\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.17g\n", curve.thresholds[i],
                  curve.success_rate[i]);
    out += buf;
  }
  return out;
}

}  // namespace longtrack
