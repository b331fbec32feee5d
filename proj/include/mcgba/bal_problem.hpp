// BAL-format bundle adjustment problems: domain types, parser, writer.
//
// The text layout matches the published BAL datasets: a header line
// `<num_cameras> <num_points> <num_observations>`, one observation per line
// `cam_idx pt_idx u v`, then 9 scalars per camera and 3 per point,
// whitespace-separated.
#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "mcgba/types.hpp"

namespace mcgba {

// 9-parameter BAL camera: Rodrigues axis-angle rotation, translation,
// focal length and two radial distortion coefficients.
struct Camera {
  Vec3 rotation = Vec3::Zero();     // axis-angle, radians
  Vec3 translation = Vec3::Zero();  // world units
  double focal = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;

  static constexpr int kNumParams = kPoseDim;

  Vec9 to_vector() const {
    Vec9 v;
    v << rotation, translation, focal, k1, k2;
    return v;
  }

  static Camera from_vector(const Eigen::Ref<const Vec9>& v) {
    Camera c;
    c.rotation = v.segment<3>(0);
    c.translation = v.segment<3>(3);
    c.focal = v[6];
    c.k1 = v[7];
    c.k2 = v[8];
    return c;
  }
};

struct Observation {
  int camera = 0;
  int landmark = 0;
  Vec2 pixel = Vec2::Zero();
};

struct BAProblem {
  std::vector<Camera> cameras;
  std::vector<Vec3> landmarks;
  std::vector<Observation> observations;

  int num_cameras() const { return static_cast<int>(cameras.size()); }
  int num_landmarks() const { return static_cast<int>(landmarks.size()); }
  std::int64_t num_observations() const {
    return static_cast<std::int64_t>(observations.size());
  }

  // Throws std::invalid_argument when an invariant is broken: empty
  // cameras/landmarks/observations, an out-of-range index, a duplicate
  // (camera, landmark) pair, or an unobserved camera/landmark.
  void validate() const {
    if (cameras.empty()) throw std::invalid_argument("problem has no cameras");
    if (landmarks.empty())
      throw std::invalid_argument("problem has no landmarks");
    if (observations.empty())
      throw std::invalid_argument("problem has no observations");
    std::vector<char> cam_seen(cameras.size(), 0);
    std::vector<char> lm_seen(landmarks.size(), 0);
    std::unordered_set<std::int64_t> pairs;
    pairs.reserve(observations.size());
    for (const Observation& obs : observations) {
      if (obs.camera < 0 || obs.camera >= num_cameras())
        throw std::invalid_argument("observation camera index out of range");
      if (obs.landmark < 0 || obs.landmark >= num_landmarks())
        throw std::invalid_argument("observation landmark index out of range");
      const std::int64_t key =
          static_cast<std::int64_t>(obs.camera) * num_landmarks() +
          obs.landmark;
      if (!pairs.insert(key).second)
        throw std::invalid_argument("duplicate (camera, landmark) pair");
      cam_seen[obs.camera] = 1;
      lm_seen[obs.landmark] = 1;
    }
    for (std::size_t i = 0; i < cam_seen.size(); ++i)
      if (!cam_seen[i])
        throw std::invalid_argument("camera " + std::to_string(i) +
                                    " has no observations");
    for (std::size_t i = 0; i < lm_seen.size(); ++i)
      if (!lm_seen[i])
        throw std::invalid_argument("landmark " + std::to_string(i) +
                                    " has no observations");
  }
};

// Cameras/landmarks dropped by the parser because no observation referenced
// them (real BAL files occasionally contain orphans).
struct PruneStats {
  int pruned_cameras = 0;
  int pruned_landmarks = 0;
};

namespace detail {

// Whitespace tokenizer that tracks 1-based line numbers for error messages.
class LineTokenizer {
 public:
  explicit LineTokenizer(std::istream& in) : in_(in) {}

  long line() const { return line_; }

  // Next whitespace-separated token, or empty at end of stream.
  std::string next() {
    std::string tok;
    int c;
    while ((c = in_.get()) != EOF) {
      if (c == '\n') {
        if (!tok.empty()) {
          in_.unget();
          return tok;
        }
        ++line_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\v' ||
                 c == '\f') {
        if (!tok.empty()) return tok;
      } else {
        tok.push_back(static_cast<char>(c));
      }
    }
    return tok;
  }

  std::int64_t next_int(const char* what) {
    const std::string tok = require(what);
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw BalParseError("expected integer for " + std::string(what) +
                              ", got '" + tok + "'",
                          line_);
    return value;
  }

  double next_double(const char* what) {
    const std::string tok = require(what);
    double value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw BalParseError("expected number for " + std::string(what) +
                              ", got '" + tok + "'",
                          line_);
    return value;
  }

  bool at_end() { return next().empty(); }

 private:
  std::string require(const char* what) {
    std::string tok = next();
    if (tok.empty())
      throw BalParseError(
          "premature end of stream while reading " + std::string(what), line_);
    return tok;
  }

  std::istream& in_;
  long line_ = 1;
};

// Shortest decimal representation that round-trips to the same double.
inline std::string format_roundtrip(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Parses BAL text. Cameras and landmarks without any observation are pruned
// (indices compacted, counts reported via `stats`). Throws BalParseError
// with a line number on malformed input.
inline BAProblem parse_bal(std::istream& in, PruneStats* stats = nullptr) {
  detail::LineTokenizer tok(in);

  const std::int64_t n_cam = tok.next_int("camera count");
  const std::int64_t n_pt = tok.next_int("point count");
  const std::int64_t n_obs = tok.next_int("observation count");
  if (n_cam <= 0 || n_pt <= 0 || n_obs <= 0)
    throw BalParseError("malformed header: counts must be positive", tok.line());

  BAProblem problem;
  problem.cameras.resize(n_cam);
  problem.landmarks.resize(n_pt);
  problem.observations.resize(n_obs);

  std::unordered_set<std::int64_t> pairs;
  pairs.reserve(n_obs);
  for (std::int64_t i = 0; i < n_obs; ++i) {
    Observation& obs = problem.observations[i];
    const std::int64_t cam = tok.next_int("camera index");
    const std::int64_t pt = tok.next_int("point index");
    if (cam < 0 || cam >= n_cam)
      throw BalParseError("camera index " + std::to_string(cam) +
                              " out of range [0, " + std::to_string(n_cam) + ")",
                          tok.line());
    if (pt < 0 || pt >= n_pt)
      throw BalParseError("point index " + std::to_string(pt) +
                              " out of range [0, " + std::to_string(n_pt) + ")",
                          tok.line());
    if (!pairs.insert(cam * n_pt + pt).second)
      throw BalParseError("duplicate observation of point " +
                              std::to_string(pt) + " by camera " +
                              std::to_string(cam),
                          tok.line());
    obs.camera = static_cast<int>(cam);
    obs.landmark = static_cast<int>(pt);
    obs.pixel[0] = tok.next_double("pixel u");
    obs.pixel[1] = tok.next_double("pixel v");
  }
  for (std::int64_t i = 0; i < n_cam; ++i) {
    Vec9 params;
    for (int k = 0; k < Camera::kNumParams; ++k)
      params[k] = tok.next_double("camera parameter");
    problem.cameras[i] = Camera::from_vector(params);
  }
  for (std::int64_t i = 0; i < n_pt; ++i) {
    for (int k = 0; k < 3; ++k)
      problem.landmarks[i][k] = tok.next_double("point coordinate");
  }
  if (!tok.at_end())
    throw BalParseError("trailing data after point block", tok.line());

  // Prune orphans and compact indices, keeping the original order.
  std::vector<std::int64_t> cam_count(n_cam, 0), pt_count(n_pt, 0);
  for (const Observation& obs : problem.observations) {
    ++cam_count[obs.camera];
    ++pt_count[obs.landmark];
  }
  std::vector<int> cam_map(n_cam, -1), pt_map(n_pt, -1);
  int kept_cams = 0, kept_pts = 0;
  for (std::int64_t i = 0; i < n_cam; ++i)
    if (cam_count[i] > 0) cam_map[i] = kept_cams++;
  for (std::int64_t i = 0; i < n_pt; ++i)
    if (pt_count[i] > 0) pt_map[i] = kept_pts++;
  if (stats) {
    stats->pruned_cameras = static_cast<int>(n_cam - kept_cams);
    stats->pruned_landmarks = static_cast<int>(n_pt - kept_pts);
  }
  if (kept_cams < n_cam || kept_pts < n_pt) {
    std::vector<Camera> cams;
    cams.reserve(kept_cams);
    for (std::int64_t i = 0; i < n_cam; ++i)
      if (cam_map[i] >= 0) cams.push_back(problem.cameras[i]);
    std::vector<Vec3> pts;
    pts.reserve(kept_pts);
    for (std::int64_t i = 0; i < n_pt; ++i)
      if (pt_map[i] >= 0) pts.push_back(problem.landmarks[i]);
    problem.cameras = std::move(cams);
    problem.landmarks = std::move(pts);
    for (Observation& obs : problem.observations) {
      obs.camera = cam_map[obs.camera];
      obs.landmark = pt_map[obs.landmark];
    }
  }
  return problem;
}

// Writes BAL text such that parse_bal reproduces the problem exactly
// (scalars are emitted in shortest round-trip decimal form). Validates the
// problem first.
inline void write_bal(const BAProblem& problem, std::ostream& out) {
  problem.validate();
  out << problem.num_cameras() << ' ' << problem.num_landmarks() << ' '
      << problem.num_observations() << '\n';
  for (const Observation& obs : problem.observations) {
    out << obs.camera << ' ' << obs.landmark << ' '
        << detail::format_roundtrip(obs.pixel[0]) << ' '
        << detail::format_roundtrip(obs.pixel[1]) << '\n';
  }
  for (const Camera& cam : problem.cameras) {
    const Vec9 params = cam.to_vector();
    for (int k = 0; k < Camera::kNumParams; ++k)
      out << detail::format_roundtrip(params[k]) << '\n';
  }
  for (const Vec3& pt : problem.landmarks) {
    for (int k = 0; k < 3; ++k) out << detail::format_roundtrip(pt[k]) << '\n';
  }
}

}  // namespace mcgba
