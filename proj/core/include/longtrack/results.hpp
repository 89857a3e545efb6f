#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "longtrack/evaluation.hpp"

namespace longtrack {

struct ResultsHeader {
  std::string sequence_id;
  double fps = 30.0;
  std::string config_hash;
  std::string annotations;  // path of the ground truth, may be empty
  std::size_t loop_length = 0;
  std::size_t num_loops = 0;

  bool operator==(const ResultsHeader&) const = default;
};

struct ResultsFile {
  ResultsHeader header;
  std::vector<FramePrediction> predictions;

  bool operator==(const ResultsFile&) const = default;
};

/// 64-bit FNV-1a of the text, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

std::string results_to_json(const ResultsFile& results);
ResultsFile results_from_json(std::string_view text, const std::string& source);

/// Written to a temporary file and renamed into place.
void write_results(const std::filesystem::path& path,
                   const ResultsFile& results);
ResultsFile read_results(const std::filesystem::path& path);

/// CSV with a `threshold,success_rate` header row.
std::string curve_csv(const SuccessCurve& curve);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace longtrack
