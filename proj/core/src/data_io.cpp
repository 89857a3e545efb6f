#include "longtrack/data_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "longtrack/errors.hpp"

namespace longtrack {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + what + " '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DataError("cannot write '" + tmp.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw DataError("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

class NetpbmCursor {
 public:
  NetpbmCursor(std::string_view bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
          ++pos_;
        }
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space_and_comments();
    std::size_t value = 0;
    const char* begin = bytes_.data() + pos_;
    const char* end = bytes_.data() + bytes_.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) {
      throw DataError(name_ + ": malformed netpbm header (" + field + ")");
    }
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  std::size_t& pos() noexcept { return pos_; }
  std::string_view bytes() const noexcept { return bytes_; }

 private:
  std::string_view bytes_;
  const std::string& name_;
  std::size_t pos_ = 0;
};

}  // namespace

ImagePatch decode_netpbm(std::string_view bytes, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw DataError(name + ": not a netpbm file");
  }
  const char kind = bytes[1];
  std::size_t channels = 0;
  bool binary = false;
  switch (kind) {
    case '2':
      channels = 1;
      break;
    case '3':
      channels = 3;
      break;
    case '5':
      channels = 1;
      binary = true;
      break;
    case '6':
      channels = 3;
      binary = true;
      break;
    default:
      throw DataError(name + ": unsupported netpbm type P" +
                      std::string(1, kind));
  }
  NetpbmCursor cur(bytes, name);
  cur.pos() = 2;
  const std::size_t width = cur.number("width");
  const std::size_t height = cur.number("height");
  const std::size_t maxval = cur.number("maxval");
  if (width == 0 || height == 0) {
    throw DataError(name + ": zero image dimension");
  }
  if (maxval == 0 || maxval > 255) {
    throw DataError(name + ": maxval " + std::to_string(maxval) +
                    " unsupported (1..255)");
  }
  if (width > (1u << 16) || height > (1u << 16)) {
    throw DataError(name + ": image dimensions too large");
  }
  const std::size_t count = width * height * channels;
  std::vector<std::uint8_t> data(count);
  const auto rescale = [maxval](std::size_t v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v
                                                   : (v * 255 + maxval / 2) /
                                                         maxval);
  };
  if (binary) {
    std::size_t& pos = cur.pos();
    if (pos >= bytes.size() ||
        !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      throw DataError(name + ": malformed netpbm header");
    }
    ++pos;  // exactly one whitespace byte before the raster
    if (bytes.size() - pos < count) {
      throw DataError(name + ": truncated raster (" +
                      std::to_string(bytes.size() - pos) + " of " +
                      std::to_string(count) + " bytes)");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::uint8_t>(bytes[pos + i]);
      if (v > maxval) {
        throw DataError(name + ": sample exceeds maxval");
      }
      data[i] = rescale(v);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t v = cur.number("sample");
      if (v > maxval) {
        throw DataError(name + ": sample exceeds maxval");
      }
      data[i] = rescale(v);
    }
  }
  return ImagePatch(height, width, channels, std::move(data));
}

ImagePatch read_netpbm(const fs::path& path) {
  return decode_netpbm(read_file(path, "frame"), path.string());
}

void write_netpbm(const fs::path& path, const ImagePatch& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ShapeError("netpbm output needs 1 or 3 channels");
  }
  std::string out = (image.channels() == 1 ? "P5\n" : "P6\n") +
                    std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  const auto data = image.data();
  out.append(reinterpret_cast<const char*>(data.data()), data.size());
  write_file_atomic(path, out);
}

namespace {

BoundingBox box_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    throw DataError(where + ": expected [cx, cy, w, h]");
  }
  BoundingBox b;
  try {
    b = BoundingBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                    j[3].get<double>()};
  } catch (const nlohmann::json::exception&) {
    throw DataError(where + ": box entries must be numbers");
  }
  return b;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

SequenceManifest read_manifest(const fs::path& path) {
  const std::string text = read_file(path, "manifest");
  const std::string where = path.string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(where + ": malformed JSON: " + e.what());
  }
  SequenceManifest m;
  const fs::path base = path.parent_path();
  try {
    m.id = j.at("id").get<std::string>();
    m.fps = j.at("fps").get<double>();
    for (const auto& f : j.at("frames")) {
      m.frames.push_back(resolve(base, f.get<std::string>()));
    }
    m.annotations = resolve(base, j.at("annotations").get<std::string>());
    m.init_box = box_from_json(j.at("init_box"), where + ": init_box");
    m.loop_length = j.value("loop_length", std::size_t{0});
    m.num_loops = j.value("num_loops", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  if (m.frames.empty()) {
    throw DataError(where + ": manifest lists no frames");
  }
  if (!(m.fps > 0.0)) {
    throw DataError(where + ": fps must be positive");
  }
  if (!m.init_box.valid()) {
    throw DataError(where + ": init_box must have positive size");
  }
  return m;
}

void write_manifest(const fs::path& path, const SequenceManifest& manifest) {
  const fs::path base = path.parent_path().empty()
                            ? fs::path(".")
                            : fs::absolute(path.parent_path());
  const auto rel = [&base](const fs::path& p) {
    const fs::path abs = fs::absolute(p).lexically_normal();
    const fs::path r = abs.lexically_relative(base);
    return (r.empty() ? abs : r).generic_string();
  };
  nlohmann::ordered_json j;
  j["id"] = manifest.id;
  j["fps"] = manifest.fps;
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const auto& f : manifest.frames) {
    frames.push_back(rel(f));
  }
  j["frames"] = std::move(frames);
  j["annotations"] = rel(manifest.annotations);
  const BoundingBox& b = manifest.init_box;
  j["init_box"] = {b.cx, b.cy, b.width, b.height};
  if (manifest.num_loops > 0) {
    j["loop_length"] = manifest.loop_length;
    j["num_loops"] = manifest.num_loops;
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

FrameReader::FrameReader(std::vector<fs::path> frames)
    : frames_(std::move(frames)) {}

std::optional<ImagePatch> FrameReader::next() {
  if (pos_ >= frames_.size()) {
    return std::nullopt;
  }
  const fs::path& p = frames_[pos_];
  ImagePatch img = to_gray(read_netpbm(p));
  if (pos_ == 0) {
    height_ = img.height();
    width_ = img.width();
  } else if (img.height() != height_ || img.width() != width_) {
    throw DataError("frame '" + p.string() + "' is " +
                    std::to_string(img.width()) + "x" +
                    std::to_string(img.height()) + ", expected " +
                    std::to_string(width_) + "x" + std::to_string(height_));
  }
  ++pos_;
  return img;
}

LoadedSequence load_sequence(const fs::path& manifest_path) {
  SequenceManifest m = read_manifest(manifest_path);
  FrameReader reader(m.frames);
  return LoadedSequence{std::move(m), std::move(reader)};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view field, const std::string& where) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      field.empty() || !std::isfinite(v)) {
    throw DataError(where + ": '" + std::string(field) + "' is not a number");
  }
  return v;
}

}  // namespace

AnnotationTrack parse_annotations_text(std::string_view text,
                                       const std::string& source) {
  AnnotationTrack track;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const std::string where = source + ":" + std::to_string(line_no);
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) {
        break;
      }
      start = comma + 1;
    }
    std::size_t frame = 0;
    {
      const std::string_view f = fields[0];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(),
                                             frame);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
        throw DataError(where + ": frame index '" + std::string(f) +
                        "' is not a non-negative integer");
      }
    }
    AnnotationEntry entry;
    entry.frame_index = frame;
    if (fields.size() == 2 && fields[1] == "absent") {
      // explicit absence
    } else if (fields.size() == 5) {
      const BoundingBox b{parse_double(fields[1], where),
                          parse_double(fields[2], where),
                          parse_double(fields[3], where),
                          parse_double(fields[4], where)};
      if (!b.valid()) {
        throw DataError(where + ": box must have positive width and height");
      }
      entry.box = b;
    } else {
      throw DataError(where + ": expected 'frame,x,y,w,h' or 'frame,absent'");
    }
    if (const auto& es = track.entries();
        !es.empty() && es.back().frame_index >= frame) {
      throw DataError(where + (es.back().frame_index == frame
                                   ? ": duplicate frame index "
                                   : ": out-of-order frame index ") +
                      std::to_string(frame));
    }
    track.append(std::move(entry));
  }
  return track;
}

AnnotationTrack parse_annotations(const fs::path& path) {
  return parse_annotations_text(read_file(path, "annotations"), path.string());
}

std::string format_annotations(const AnnotationTrack& track) {
  std::string out;
  char buf[160];
  for (const AnnotationEntry& e : track.entries()) {
    if (e.absent()) {
      std::snprintf(buf, sizeof buf, "%zu,absent\n", e.frame_index);
    } else {
      const BoundingBox& b = *e.box;
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n",
                    e.frame_index, b.cx, b.cy, b.width, b.height);
    }
    out += buf;
  }
  return out;
}

void write_annotations(const fs::path& path, const AnnotationTrack& track) {
  write_file_atomic(path, format_annotations(track));
}

Sequence load_sequence_in_memory(const fs::path& manifest_path) {
  LoadedSequence loaded = load_sequence(manifest_path);
  Sequence seq;
  seq.id = loaded.manifest.id;
  seq.fps = loaded.manifest.fps;
  seq.init_box = loaded.manifest.init_box;
  seq.loop_length = loaded.manifest.loop_length;
  seq.num_loops = loaded.manifest.num_loops;
  seq.annotations = parse_annotations(loaded.manifest.annotations);
  // Repeated paths (repetitive manifests) decode once.
  std::vector<std::pair<fs::path, std::shared_ptr<const ImagePatch>>> cache;
  for (const fs::path& p : loaded.manifest.frames) {
    std::shared_ptr<const ImagePatch> img;
    for (const auto& [path, ptr] : cache) {
      if (path == p) {
        img = ptr;
        break;
      }
    }
    if (!img) {
      FrameReader one({p});
      img = std::make_shared<const ImagePatch>(*one.next());
      if (!seq.frames.empty() &&
          (img->height() != seq.frames[0]->height() ||
           img->width() != seq.frames[0]->width())) {
        throw DataError("frame '" + p.string() +
                        "' changes the sequence dimensions");
      }
      cache.emplace_back(p, img);
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

fs::path write_sequence(const fs::path& dir, const Sequence& seq) {
  fs::create_directories(dir);
  SequenceManifest m;
  m.id = seq.id;
  m.fps = seq.fps;
  m.init_box = seq.init_box;
  m.loop_length = seq.loop_length;
  m.num_loops = seq.num_loops;
  char name[64];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%06zu.%s", i,
                  seq.frames[i]->channels() == 1 ? "pgm" : "ppm");
    const fs::path p = dir / name;
    write_netpbm(p, *seq.frames[i]);
    m.frames.push_back(p);
  }
  m.annotations = dir / "annotations.csv";
  write_annotations(m.annotations, seq.annotations);
  const fs::path manifest = dir / "manifest.json";
  write_manifest(manifest, m);
  return manifest;
}

AnnotationTrack repeat_annotations(const AnnotationTrack& annotations,
                                   std::size_t n, std::size_t loops) {
  AnnotationTrack out;
  const auto& es = annotations.entries();
  for (std::size_t loop = 0; loop < loops; ++loop) {
    const std::size_t base = loop * 2 * n;
    for (const AnnotationEntry& e : es) {
      if (e.frame_index >= n) {
        throw DataError("annotation frame " + std::to_string(e.frame_index) +
                        " lies beyond the " + std::to_string(n) +
                        "-frame source");
      }
      out.append({base + e.frame_index, e.box});
    }
    for (auto it = es.rbegin(); it != es.rend(); ++it) {
      out.append({base + n + (n - 1 - it->frame_index), it->box});
    }
  }
  return out;
}

RepetitiveSequence make_repetitive(const SequenceManifest& source,
                                   const AnnotationTrack& annotations,
                                   std::size_t loops) {
  if (loops == 0) {
    throw ConfigError("loops must be at least 1");
  }
  const std::size_t n = source.frames.size();
  RepetitiveSequence out;
  out.manifest = source;
  out.manifest.id = source.id + "-rep" + std::to_string(loops);
  out.manifest.frames.clear();
  out.manifest.frames.reserve(2 * n * loops);
  for (std::size_t loop = 0; loop < loops; ++loop) {
    out.manifest.frames.insert(out.manifest.frames.end(),
                               source.frames.begin(), source.frames.end());
    out.manifest.frames.insert(out.manifest.frames.end(),
                               source.frames.rbegin(), source.frames.rend());
  }
  out.manifest.loop_length = 2 * n;
  out.manifest.num_loops = loops;
  out.annotations = repeat_annotations(annotations, n, loops);
  return out;
}

Sequence make_repetitive(const Sequence& source, std::size_t loops) {
  if (loops == 0) {
    throw ConfigError("loops must be at least 1");
  }
  const std::size_t n = source.frames.size();
  Sequence out;
  out.id = source.id + "-rep" + std::to_string(loops);
  out.fps = source.fps;
  out.init_box = source.init_box;
  out.loop_length = 2 * n;
  out.num_loops = loops;
  out.frames.reserve(2 * n * loops);
  for (std::size_t loop = 0; loop < loops; ++loop) {
    out.frames.insert(out.frames.end(), source.frames.begin(),
                      source.frames.end());
    out.frames.insert(out.frames.end(), source.frames.rbegin(),
                      source.frames.rend());
  }
  out.annotations = repeat_annotations(source.annotations, n, loops);
  return out;
}

}  // namespace longtrack
