#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "longtrack/annotations.hpp"
#include "longtrack/geometry.hpp"
#include "longtrack/image.hpp"

namespace longtrack {

/// Decodes P2/P3/P5/P6 netpbm data (maxval <= 255). `name` is used in
/// error messages.
ImagePatch decode_netpbm(std::string_view bytes, const std::string& name);
ImagePatch read_netpbm(const std::filesystem::path& path);
/// Writes binary P5 (gray) or P6 (RGB).
void write_netpbm(const std::filesystem::path& path, const ImagePatch& image);

struct SequenceManifest {
  std::string id;
  double fps = 30.0;
  std::vector<std::filesystem::path> frames;  // absolute after loading
  std::filesystem::path annotations;
  BoundingBox init_box;
  /// Non-zero for repetitive sequences: frames per (forward + reverse)
  /// loop and the loop count.
  std::size_t loop_length = 0;
  std::size_t num_loops = 0;

  bool operator==(const SequenceManifest&) const = default;
};

/// Relative frame and annotation paths resolve against the manifest's
/// directory. Throws DataError on malformed JSON or missing fields.
SequenceManifest read_manifest(const std::filesystem::path& path);
/// Paths inside `dir` of the manifest file are written relative to it.
void write_manifest(const std::filesystem::path& path,
                    const SequenceManifest& manifest);

/// Decodes frames in order, converting colour to gray. Throws DataError
/// naming the frame on a missing file, malformed data or a size change.
class FrameReader {
 public:
  explicit FrameReader(std::vector<std::filesystem::path> frames);

  std::optional<ImagePatch> next();
  std::size_t size() const noexcept { return frames_.size(); }
  std::size_t position() const noexcept { return pos_; }

 private:
  std::vector<std::filesystem::path> frames_;
  std::size_t pos_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

struct LoadedSequence {
  SequenceManifest manifest;
  FrameReader frames;
};

LoadedSequence load_sequence(const std::filesystem::path& manifest_path);

/// Parses `frame,x,y,w,h` (centre format) and `frame,absent` lines. Blank
/// lines and lines starting with '#' are skipped. Errors carry the source
/// name and line number.
AnnotationTrack parse_annotations_text(std::string_view text,
                                       const std::string& source);
AnnotationTrack parse_annotations(const std::filesystem::path& path);
std::string format_annotations(const AnnotationTrack& track);
void write_annotations(const std::filesystem::path& path,
                       const AnnotationTrack& track);

/// Fully decoded sequence held in memory; frames are shared, so
/// repetitive sequences cost no extra pixel storage.
struct Sequence {
  std::string id;
  double fps = 30.0;
  std::vector<std::shared_ptr<const ImagePatch>> frames;
  AnnotationTrack annotations;
  BoundingBox init_box;
  std::size_t loop_length = 0;
  std::size_t num_loops = 0;
};

Sequence load_sequence_in_memory(const std::filesystem::path& manifest_path);

/// Writes frames as frame_NNNNNN.pgm/.ppm, annotations.csv and
/// manifest.json into `dir`; returns the manifest path.
std::filesystem::path write_sequence(const std::filesystem::path& dir,
                                     const Sequence& seq);

/// (forward ++ reverse) x loops with annotations mirrored into the
/// reversed halves. Throws ConfigError when loops == 0.
struct RepetitiveSequence {
  SequenceManifest manifest;
  AnnotationTrack annotations;
};
RepetitiveSequence make_repetitive(const SequenceManifest& source,
                                   const AnnotationTrack& annotations,
                                   std::size_t loops);
Sequence make_repetitive(const Sequence& source, std::size_t loops);

/// Annotation indices of the repetitive layout for a source of length n.
AnnotationTrack repeat_annotations(const AnnotationTrack& annotations,
                                   std::size_t n, std::size_t loops);

}  // namespace longtrack
