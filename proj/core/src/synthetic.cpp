#include "longtrack/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "longtrack/errors.hpp"
#include "longtrack/numerics.hpp"

namespace longtrack {

namespace {

using Kind = MotionSegment::Kind;

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::drift:
      return "drift";
    case Kind::offscreen:
      return "offscreen";
    case Kind::teleport:
      return "teleport";
    case Kind::cut:
      return "cut";
  }
  return "?";
}

// Stream-separated generators so that, e.g., adding distractors does not
// change the background of an otherwise identical spec.
Rng stream(std::uint64_t seed, std::uint64_t salt) {
  Rng mix(seed ^ (salt * 0x9E3779B97F4A7C15ULL));
  return Rng(mix.next_u64());
}

constexpr std::size_t kTextureCell = 6;

// Blocky random field bilinearly smoothed at `cell` pixels.
std::vector<double> make_texture(std::size_t h, std::size_t w, Rng& rng,
                                 std::size_t cell) {
  const std::size_t gh = h / cell + 2;
  const std::size_t gw = w / cell + 2;
  std::vector<double> grid(gh * gw);
  for (double& v : grid) {
    v = rng.uniform(20.0, 235.0);
  }
  std::vector<double> out(h * w);
  const double inv = 1.0 / static_cast<double>(cell);
  for (std::size_t r = 0; r < h; ++r) {
    const double fy = static_cast<double>(r) * inv;
    const auto y0 = static_cast<std::size_t>(fy);
    const double ay = fy - static_cast<double>(y0);
    for (std::size_t c = 0; c < w; ++c) {
      const double fx = static_cast<double>(c) * inv;
      const auto x0 = static_cast<std::size_t>(fx);
      const double ax = fx - static_cast<double>(x0);
      const double top = grid[y0 * gw + x0] * (1.0 - ax) +
                         grid[y0 * gw + x0 + 1] * ax;
      const double bot = grid[(y0 + 1) * gw + x0] * (1.0 - ax) +
                         grid[(y0 + 1) * gw + x0 + 1] * ax;
      out[r * w + c] = top * (1.0 - ay) + bot * ay;
    }
  }
  return out;
}

std::vector<double> make_background(const SynthSpec& spec, Rng& rng) {
  const std::size_t h = spec.height;
  const std::size_t w = spec.width;
  std::vector<double> bg(h * w);
  const double base = rng.uniform(90.0, 160.0);
  const double gx = rng.uniform(-0.3, 0.3);
  const double gy = rng.uniform(-0.3, 0.3);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      bg[r * w + c] = base + gx * (static_cast<double>(c) - w / 2.0) +
                      gy * (static_cast<double>(r) - h / 2.0);
    }
  }
  const auto shapes = static_cast<std::size_t>(
      spec.clutter_density * static_cast<double>(h * w) / 100.0);
  for (std::size_t k = 0; k < shapes; ++k) {
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double rx = rng.uniform(2.0, 9.0);
    const double ry = rng.uniform(2.0, 9.0);
    const double value = rng.uniform(30.0, 225.0);
    const bool disk = rng.uniform() < 0.5;
    const long r0 = std::max(0L, static_cast<long>(std::floor(cy - ry)));
    const long r1 = std::min(static_cast<long>(h) - 1,
                             static_cast<long>(std::ceil(cy + ry)));
    const long c0 = std::max(0L, static_cast<long>(std::floor(cx - rx)));
    const long c1 = std::min(static_cast<long>(w) - 1,
                             static_cast<long>(std::ceil(cx + rx)));
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c) {
        const double dy = (static_cast<double>(r) - cy) / ry;
        const double dx = (static_cast<double>(c) - cx) / rx;
        if (!disk || dx * dx + dy * dy <= 1.0) {
          bg[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)] =
              value;
        }
      }
    }
  }
  return bg;
}

struct Placement {
  double cx = 0.0;
  double cy = 0.0;
  bool visible = true;
  std::size_t scene = 0;
};

double clamp_center(double v, double half, double extent) {
  return std::clamp(v, half, extent - half);
}

// Advances one coordinate by v, reflecting off [lo, hi].
void reflect_step(double& p, double& v, double lo, double hi) {
  p += v;
  if (p < lo) {
    p = 2.0 * lo - p;
    v = -v;
  } else if (p > hi) {
    p = 2.0 * hi - p;
    v = -v;
  }
  p = std::clamp(p, lo, hi);
}

void validate(const SynthSpec& spec) {
  if (spec.width == 0 || spec.height == 0 || spec.length == 0) {
    throw ConfigError("synthetic spec: canvas and length must be positive");
  }
  if (spec.target_width == 0 || spec.target_height == 0 ||
      spec.target_width > spec.width || spec.target_height > spec.height) {
    throw ConfigError("synthetic spec: target " +
                      std::to_string(spec.target_width) + "x" +
                      std::to_string(spec.target_height) +
                      " does not fit the " + std::to_string(spec.width) + "x" +
                      std::to_string(spec.height) + " canvas");
  }
  if (!(spec.fps > 0.0)) {
    throw ConfigError("synthetic spec: fps must be positive");
  }
  if (spec.appearance_drift < 0.0 || spec.drift_max < 0.0 ||
      spec.drift_max > 1.0 || spec.distractor_similarity < 0.0 ||
      spec.distractor_similarity > 1.0 || spec.noise < 0.0 ||
      spec.clutter_density < 0.0) {
    throw ConfigError("synthetic spec: parameter out of range");
  }
  if (!spec.program.empty()) {
    std::size_t total = 0;
    for (const MotionSegment& s : spec.program) {
      if (s.frames == 0) {
        throw ConfigError("synthetic spec: empty motion segment");
      }
      total += s.frames;
    }
    if (total != spec.length) {
      throw ConfigError("synthetic spec: motion program covers " +
                        std::to_string(total) + " frames, length is " +
                        std::to_string(spec.length));
    }
    if (spec.program.front().kind == Kind::offscreen) {
      throw ConfigError("synthetic spec: target must be visible on frame 0");
    }
  }
}

std::vector<Placement> simulate(const SynthSpec& spec) {
  const double hw = static_cast<double>(spec.target_width) / 2.0;
  const double hh = static_cast<double>(spec.target_height) / 2.0;
  const double W = static_cast<double>(spec.width);
  const double H = static_cast<double>(spec.height);
  std::vector<Placement> out(spec.length);
  Placement cur{clamp_center(spec.start_x, hw, W),
                clamp_center(spec.start_y, hh, H), true, 0};
  std::size_t seg = 0;
  std::size_t seg_start = 0;
  double vx = 0.0;
  double vy = 0.0;
  if (!spec.program.empty()) {
    vx = spec.program[0].vx;
    vy = spec.program[0].vy;
  }
  for (std::size_t t = 0; t < spec.length; ++t) {
    if (!spec.program.empty()) {
      while (t >= seg_start + spec.program[seg].frames) {
        seg_start += spec.program[seg].frames;
        ++seg;
        vx = spec.program[seg].vx;
        vy = spec.program[seg].vy;
      }
      const MotionSegment& s = spec.program[seg];
      const bool jump = t == seg_start &&
                        (s.kind == Kind::teleport || s.kind == Kind::cut);
      cur.visible = s.kind != Kind::offscreen;
      if (jump) {
        cur.cx = clamp_center(s.x, hw, W);
        cur.cy = clamp_center(s.y, hh, H);
        if (s.kind == Kind::cut && t > 0) {
          ++cur.scene;
        }
      } else if (t > 0 && cur.visible) {
        reflect_step(cur.cx, vx, hw, W - hw);
        reflect_step(cur.cy, vy, hh, H - hh);
      }
    }
    out[t] = cur;
  }
  return out;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

void paste(std::vector<double>& canvas, std::size_t cw,
           const std::vector<double>& tex, std::size_t th, std::size_t tw,
           std::size_t top, std::size_t left) {
  for (std::size_t r = 0; r < th; ++r) {
    std::copy(tex.begin() + static_cast<std::ptrdiff_t>(r * tw),
              tex.begin() + static_cast<std::ptrdiff_t>((r + 1) * tw),
              canvas.begin() + static_cast<std::ptrdiff_t>((top + r) * cw + left));
  }
}

std::size_t pixel_origin(double center, std::size_t size, std::size_t extent) {
  const double o = std::floor(center - static_cast<double>(size) / 2.0 + 0.5);
  return static_cast<std::size_t>(
      std::clamp(o, 0.0, static_cast<double>(extent - size)));
}

}  // namespace

Sequence generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  const std::size_t W = spec.width;
  const std::size_t H = spec.height;
  const std::size_t tw = spec.target_width;
  const std::size_t th = spec.target_height;

  Rng tex_rng = stream(spec.texture_seed, 1);
  const std::vector<double> tex_a = make_texture(th, tw, tex_rng, kTextureCell);
  const std::vector<double> tex_b = make_texture(th, tw, tex_rng, kTextureCell);

  Rng scene_rng = stream(seed, 2);
  std::vector<std::vector<double>> scenes;
  const std::vector<Placement> track = simulate(spec);
  const std::size_t num_scenes = track.back().scene + 1;
  for (std::size_t s = 0; s < num_scenes; ++s) {
    scenes.push_back(make_background(spec, scene_rng));
  }

  struct Distractor {
    std::vector<double> texture;
    double cx, cy, vx, vy;
  };
  Rng dis_rng = stream(seed, 3);
  std::vector<Distractor> distractors;
  const double hw = static_cast<double>(tw) / 2.0;
  const double hh = static_cast<double>(th) / 2.0;
  for (std::size_t k = 0; k < spec.distractors; ++k) {
    Distractor d;
    const std::vector<double> own = make_texture(th, tw, dis_rng, kTextureCell);
    d.texture.resize(own.size());
    for (std::size_t i = 0; i < own.size(); ++i) {
      const double base = spec.distractor_inverted ? 255.0 - tex_a[i] : tex_a[i];
      d.texture[i] = spec.distractor_similarity * base +
                     (1.0 - spec.distractor_similarity) * own[i];
    }
    d.cx = dis_rng.uniform(hw, static_cast<double>(W) - hw);
    d.cy = dis_rng.uniform(hh, static_cast<double>(H) - hh);
    const double angle = dis_rng.uniform(0.0, 6.283185307179586);
    d.vx = spec.distractor_speed * std::cos(angle);
    d.vy = spec.distractor_speed * std::sin(angle);
    distractors.push_back(std::move(d));
  }

  Rng noise_rng = stream(seed, 4);
  Sequence seq;
  seq.id = spec.id;
  seq.fps = spec.fps;
  std::vector<double> canvas(W * H);
  std::vector<double> tex(th * tw);
  for (std::size_t t = 0; t < spec.length; ++t) {
    const Placement& p = track[t];
    canvas = scenes[p.scene];
    for (Distractor& d : distractors) {
      if (t > 0) {
        reflect_step(d.cx, d.vx, hw, static_cast<double>(W) - hw);
        reflect_step(d.cy, d.vy, hh, static_cast<double>(H) - hh);
      }
      paste(canvas, W, d.texture, th, tw, pixel_origin(d.cy, th, H),
            pixel_origin(d.cx, tw, W));
    }
    AnnotationEntry entry;
    entry.frame_index = t;
    if (p.visible) {
      const double alpha = std::min(spec.drift_max,
                                    spec.appearance_drift * static_cast<double>(t));
      for (std::size_t i = 0; i < tex.size(); ++i) {
        tex[i] = (1.0 - alpha) * tex_a[i] + alpha * tex_b[i];
      }
      const std::size_t top = pixel_origin(p.cy, th, H);
      const std::size_t left = pixel_origin(p.cx, tw, W);
      paste(canvas, W, tex, th, tw, top, left);
      entry.box = BoundingBox{static_cast<double>(left) + hw,
                              static_cast<double>(top) + hh,
                              static_cast<double>(tw), static_cast<double>(th)};
    }
    ImagePatch frame(H, W, 1);
    auto data = frame.data();
    for (std::size_t i = 0; i < canvas.size(); ++i) {
      const double n = spec.noise > 0.0 ? spec.noise * noise_rng.normal() : 0.0;
      data[i] = quantize(canvas[i] + n);
    }
    if (t == 0) {
      seq.init_box = *entry.box;
    }
    seq.annotations.append(std::move(entry));
    seq.frames.push_back(std::make_shared<const ImagePatch>(std::move(frame)));
  }
  return seq;
}

namespace {

std::string_view trim_view(std::string_view s) {
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

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
  s = trim_view(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": '" + std::string(s) + "' is not a valid number");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') {
      ++i;
    }
    if (i > start) {
      out.push_back(s.substr(start, i - start));
    }
  }
  return out;
}

MotionSegment parse_segment(std::string_view value, const std::string& where) {
  const auto parts = split_ws(value);
  if (parts.size() < 2) {
    throw ConfigError(where + ": segment needs a kind and a frame count");
  }
  MotionSegment s;
  const std::string_view kind = parts[0];
  if (kind == "drift") {
    s.kind = Kind::drift;
  } else if (kind == "offscreen") {
    s.kind = Kind::offscreen;
  } else if (kind == "teleport") {
    s.kind = Kind::teleport;
  } else if (kind == "cut") {
    s.kind = Kind::cut;
  } else {
    throw ConfigError(where + ": unknown segment kind '" + std::string(kind) +
                      "'");
  }
  s.frames = parse_number<std::size_t>(parts[1], where);
  std::vector<double> rest;
  for (std::size_t i = 2; i < parts.size(); ++i) {
    rest.push_back(parse_number<double>(parts[i], where));
  }
  const bool jumps = s.kind == Kind::teleport || s.kind == Kind::cut;
  const std::size_t expected = s.kind == Kind::offscreen ? 0 : jumps ? 4 : 2;
  if (rest.size() != expected && !(jumps && rest.size() == 2) &&
      !(s.kind == Kind::drift && rest.empty())) {
    throw ConfigError(where + ": segment '" + std::string(kind) +
                      "' takes " + std::to_string(expected) + " numbers");
  }
  if (jumps) {
    s.x = rest[0];
    s.y = rest[1];
    if (rest.size() == 4) {
      s.vx = rest[2];
      s.vy = rest[3];
    }
  } else if (s.kind == Kind::drift && rest.size() == 2) {
    s.vx = rest[0];
    s.vy = rest[1];
  }
  return s;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text, const std::string& source) {
  SynthSpec spec;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim_view(line);
    if (line.empty()) {
      continue;
    }
    const std::string where = source + ":" + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key(trim_view(line.substr(0, eq)));
    const std::string_view value = trim_view(line.substr(eq + 1));
    const auto sz = [&] { return parse_number<std::size_t>(value, where); };
    const auto dbl = [&] { return parse_number<double>(value, where); };
    if (key == "id") {
      spec.id = std::string(value);
    } else if (key == "width") {
      spec.width = sz();
    } else if (key == "height") {
      spec.height = sz();
    } else if (key == "length") {
      spec.length = sz();
    } else if (key == "fps") {
      spec.fps = dbl();
    } else if (key == "target_width") {
      spec.target_width = sz();
    } else if (key == "target_height") {
      spec.target_height = sz();
    } else if (key == "start_x") {
      spec.start_x = dbl();
    } else if (key == "start_y") {
      spec.start_y = dbl();
    } else if (key == "texture_seed") {
      spec.texture_seed = parse_number<std::uint64_t>(value, where);
    } else if (key == "appearance_drift") {
      spec.appearance_drift = dbl();
    } else if (key == "drift_max") {
      spec.drift_max = dbl();
    } else if (key == "clutter_density") {
      spec.clutter_density = dbl();
    } else if (key == "distractors") {
      spec.distractors = sz();
    } else if (key == "distractor_similarity") {
      spec.distractor_similarity = dbl();
    } else if (key == "distractor_inverted") {
      const auto v = parse_number<int>(value, where);
      if (v != 0 && v != 1) {
        throw ConfigError(where + ": distractor_inverted must be 0 or 1");
      }
      spec.distractor_inverted = v == 1;
    } else if (key == "distractor_speed") {
      spec.distractor_speed = dbl();
    } else if (key == "noise") {
      spec.noise = dbl();
    } else if (key == "segment") {
      spec.program.push_back(parse_segment(value, where));
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  validate(spec);
  return spec;
}

std::string format_synth_spec(const SynthSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "id = " << spec.id << "\n"
      << "width = " << spec.width << "\n"
      << "height = " << spec.height << "\n"
      << "length = " << spec.length << "\n"
      << "fps = " << spec.fps << "\n"
      << "target_width = " << spec.target_width << "\n"
      << "target_height = " << spec.target_height << "\n"
      << "start_x = " << spec.start_x << "\n"
      << "start_y = " << spec.start_y << "\n"
      << "texture_seed = " << spec.texture_seed << "\n"
      << "appearance_drift = " << spec.appearance_drift << "\n"
      << "drift_max = " << spec.drift_max << "\n"
      << "clutter_density = " << spec.clutter_density << "\n"
      << "distractors = " << spec.distractors << "\n"
      << "distractor_similarity = " << spec.distractor_similarity << "\n"
      << "distractor_inverted = " << (spec.distractor_inverted ? 1 : 0) << "\n"
      << "distractor_speed = " << spec.distractor_speed << "\n"
      << "noise = " << spec.noise << "\n";
  for (const MotionSegment& s : spec.program) {
    out << "segment = " << kind_name(s.kind) << " " << s.frames;
    if (s.kind == Kind::teleport || s.kind == Kind::cut) {
      out << " " << s.x << " " << s.y << " " << s.vx << " " << s.vy;
    } else if (s.kind == Kind::drift) {
      out << " " << s.vx << " " << s.vy;
    }
    out << "\n";
  }
  return out.str();
}

namespace {

std::pair<double, double> random_velocity(Rng& rng, double lo, double hi) {
  const double speed = rng.uniform(lo, hi);
  const double angle = rng.uniform(0.0, 6.283185307179586);
  return {speed * std::cos(angle), speed * std::sin(angle)};
}

// Position on the last frame of the program so far.
Placement last_placement(SynthSpec spec, std::size_t frames) {
  spec.length = frames;
  return simulate(spec).back();
}

// A reappearance point at least `min_dist` from (x, y), chosen by rng.
std::pair<double, double> far_point(const SynthSpec& spec, Rng& rng, double x,
                                    double y, double min_dist) {
  const double hw = static_cast<double>(spec.target_width) / 2.0;
  const double hh = static_cast<double>(spec.target_height) / 2.0;
  std::pair<double, double> best{hw, hh};
  double best_d = -1.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double px = rng.uniform(hw, static_cast<double>(spec.width) - hw);
    const double py = rng.uniform(hh, static_cast<double>(spec.height) - hh);
    const double d = std::hypot(px - x, py - y);
    if (d >= min_dist) {
      return {px, py};
    }
    if (d > best_d) {
      best_d = d;
      best = {px, py};
    }
  }
  return best;
}

void base_scene(SynthSpec& spec, Rng& rng, std::uint64_t seed) {
  spec.width = 160;
  spec.height = 120;
  spec.target_width = 24 + 2 * rng.below(5);
  spec.target_height = 24 + 2 * rng.below(5);
  spec.start_x = rng.uniform(40.0, 120.0);
  spec.start_y = rng.uniform(35.0, 85.0);
  spec.texture_seed = seed * 7919 + 17;
}

}  // namespace

SynthSpec disappearance_spec(std::uint64_t seed, std::size_t length) {
  Rng rng = stream(seed, 11);
  SynthSpec spec;
  spec.id = "disappear-" + std::to_string(seed);
  spec.length = length;
  base_scene(spec, rng, seed);
  spec.clutter_density = 0.4;
  spec.distractors = 1;
  spec.distractor_similarity = 0.3;
  spec.distractor_speed = 0.8;

  const auto off_start = static_cast<std::size_t>(
      static_cast<double>(length) * rng.uniform(0.2, 0.4));
  const auto off_len = static_cast<std::size_t>(
      static_cast<double>(length) * rng.uniform(0.1, 0.3));
  const auto [vx, vy] = random_velocity(rng, 0.3, 0.8);
  spec.program.push_back({Kind::drift, off_start, 0, 0, vx, vy});
  const Placement exit = last_placement(spec, off_start);
  spec.program.push_back({Kind::offscreen, off_len, 0, 0, 0, 0});
  const auto [tx, ty] = far_point(spec, rng, exit.cx, exit.cy, 70.0);
  const auto [wx, wy] = random_velocity(rng, 0.1, 0.3);
  spec.program.push_back(
      {Kind::teleport, length - off_start - off_len, tx, ty, wx, wy});
  return spec;
}

SynthSpec drift_spec(std::uint64_t seed, std::size_t length) {
  Rng rng = stream(seed, 12);
  SynthSpec spec;
  spec.id = "drift-" + std::to_string(seed);
  spec.length = length;
  base_scene(spec, rng, seed);
  spec.clutter_density = 0.4;
  spec.appearance_drift = 0.001;
  spec.drift_max = 0.3;
  spec.distractors = 2;
  spec.distractor_similarity = 0.85;
  spec.distractor_inverted = true;
  spec.distractor_speed = 0.6;

  // Alternating visible and off-screen stretches, ~16 % absent overall.
  const std::size_t intervals = 2;
  const std::size_t absent_total = length * 16 / 100;
  const std::size_t off_len = absent_total / intervals;
  const std::size_t visible = length - off_len * intervals;
  const std::size_t first = visible / (intervals + 1);
  std::size_t used = 0;
  for (std::size_t k = 0; k <= intervals; ++k) {
    const std::size_t span =
        k == intervals ? visible - first * intervals : first;
    const auto [vx, vy] = random_velocity(rng, 0.2, 0.6);
    if (k == 0) {
      spec.program.push_back({Kind::drift, span, 0, 0, vx, vy});
    } else {
      const Placement exit = last_placement(spec, used);
      const auto [tx, ty] = far_point(spec, rng, exit.cx, exit.cy, 50.0);
      spec.program.push_back({Kind::teleport, span, tx, ty, vx, vy});
    }
    used += span;
    if (k < intervals && off_len > 0) {
      spec.program.push_back({Kind::offscreen, off_len, 0, 0, 0, 0});
      used += off_len;
    }
  }
  return spec;
}

SynthSpec repetitive_base_spec(std::uint64_t seed, std::size_t length) {
  Rng rng = stream(seed, 13);
  SynthSpec spec;
  spec.id = "repbase-" + std::to_string(seed);
  spec.length = length;
  base_scene(spec, rng, seed);
  spec.clutter_density = 0.4;
  spec.appearance_drift = 0.004;
  spec.drift_max = 0.3;
  spec.distractors = 2;
  spec.distractor_similarity = 0.6;
  spec.distractor_speed = 0.8;
  const std::size_t off = length / 5;
  const std::size_t before = (length - off) / 2;
  const auto [vx, vy] = random_velocity(rng, 0.3, 0.8);
  spec.program.push_back({Kind::drift, before, 0, 0, vx, vy});
  spec.program.push_back({Kind::offscreen, off, 0, 0, 0, 0});
  const Placement exit = last_placement(spec, before);
  const auto [tx, ty] = far_point(spec, rng, exit.cx, exit.cy, 50.0);
  spec.program.push_back(
      {Kind::teleport, length - before - off, tx, ty, vx, vy});
  return spec;
}

}  // namespace longtrack
