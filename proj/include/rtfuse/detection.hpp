#ifndef RTFUSE_DETECTION_HPP
#define RTFUSE_DETECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rtfuse/errors.hpp"
#include "rtfuse/geometry.hpp"
#include "rtfuse/image.hpp"

namespace rtfuse {

/// Static per-pixel depth reference for background subtraction.
struct BackgroundModel {
  DepthImage reference;  // NaN where too few valid samples
};

/**
 * @brief Per-pixel median depth over the first n_init frames.
 *
 * A pixel gets a reference only when it is valid in at least half of those
 * frames; the median rejects transient foreground. Throws InvalidInputError
 * when no frames are given.
 */
inline BackgroundModel build_background(std::span<const DepthImage> frames, int n_init) {
  if (frames.empty() || n_init < 1)
    throw InvalidInputError("build_background: need at least one frame");
  const std::size_t use = std::min<std::size_t>(frames.size(), std::size_t(n_init));
  for (std::size_t f = 1; f < use; ++f)
    if (!frames[f].same_size(frames[0]))
      throw ShapeError("build_background: frame dimensions differ");

  BackgroundModel model;
  model.reference = DepthImage(frames[0].width(), frames[0].height(), kInvalidDepth);
  std::vector<double> samples;
  samples.reserve(use);
  for (std::size_t i = 0; i < frames[0].size(); ++i) {
    samples.clear();
    for (std::size_t f = 0; f < use; ++f)
      if (depth_valid(frames[f][i])) samples.push_back(frames[f][i]);
    if (samples.size() * 2 < use) continue;
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    model.reference[i] = samples.size() % 2 == 1 ? samples[mid]
                                                 : 0.5 * (samples[mid - 1] + samples[mid]);
  }
  return model;
}

/// Foreground = pixels at least delta_m nearer than the reference (moving
/// objects occlude the background). Invalid pixels are background.
inline Mask extract_foreground(const BackgroundModel& model, const DepthImage& frame,
                               double delta_m = 0.3) {
  if (!(delta_m > 0.0)) throw InvalidInputError("extract_foreground: delta must be positive");
  if (!frame.same_size(model.reference))
    throw ShapeError("extract_foreground: frame does not match the background model");
  Mask fg(frame.width(), frame.height(), 0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double ref = model.reference[i], d = frame[i];
    if (depth_valid(ref) && depth_valid(d) && d <= ref - delta_m) fg[i] = kMaskSet;
  }
  return fg;
}

/// Connected foreground region with its summary statistics.
struct Blob {
  std::vector<int> pixels;  // linear indices into the frame
  PixelCoord centroid;
  double mean_depth_m = 0.0;
  double mean_temp_c = std::numeric_limits<double>::quiet_NaN();  // NaN: no valid fused pixel
  int area = 0;
};

/**
 * @brief 8-connected components of the foreground mask with area at least
 * min_blob_area. Centroid is the unweighted pixel mean; the temperature is
 * averaged over the blob's valid fused pixels.
 */
inline std::vector<Blob> extract_blobs(const Mask& foreground, const FusedImage& fused,
                                       const DepthImage& frame, int min_blob_area = 20) {
  if (!frame.same_size(foreground) || !fused.temperature.same_size(foreground))
    throw ShapeError("extract_blobs: input dimensions differ");
  const int w = foreground.width(), h = foreground.height();
  std::vector<std::uint8_t> seen(foreground.size(), 0);
  std::vector<int> stack;
  std::vector<Blob> blobs;

  for (int start = 0; start < int(foreground.size()); ++start) {
    if (!foreground[start] || seen[start]) continue;
    stack.assign(1, start);
    seen[start] = 1;
    Blob blob;
    double usum = 0.0, vsum = 0.0, dsum = 0.0, tsum = 0.0;
    int tcount = 0;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int x = idx % w, y = idx / w;
      blob.pixels.push_back(idx);
      usum += x;
      vsum += y;
      if (depth_valid(frame[idx])) dsum += frame[idx];
      if (fused.valid[idx]) {
        tsum += fused.temperature[idx];
        ++tcount;
      }
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const int nidx = ny * w + nx;
          if (foreground[nidx] && !seen[nidx]) {
            seen[nidx] = 1;
            stack.push_back(nidx);
          }
        }
    }
    blob.area = int(blob.pixels.size());
    if (blob.area < min_blob_area) continue;
    blob.centroid = {usum / blob.area, vsum / blob.area};
    blob.mean_depth_m = dsum / blob.area;
    if (tcount > 0) blob.mean_temp_c = tsum / tcount;
    blobs.push_back(std::move(blob));
  }
  return blobs;
}

enum class PersonClass {
  NotPerson,
  Person,
  Unknown,  // the blob had no valid fused temperature
};

/// Person iff t_min <= mean temperature <= t_max (closed interval).
inline PersonClass classify_person(const Blob& blob, double t_min_c = 26.0,
                                   double t_max_c = 40.0) {
  if (!std::isfinite(blob.mean_temp_c)) return PersonClass::Unknown;
  return blob.mean_temp_c >= t_min_c && blob.mean_temp_c <= t_max_c ? PersonClass::Person
                                                                    : PersonClass::NotPerson;
}

struct TrackPoint {
  int frame = 0;
  PixelCoord centroid;
  double mean_temp_c = 0.0;
  PersonClass cls = PersonClass::Unknown;
};

/// Time series of one tracked object.
struct Track {
  enum class State { Active, Lost };
  int id = 0;
  std::vector<TrackPoint> history;  // strictly increasing frame indices
  State state = State::Active;
  int misses = 0;

  const TrackPoint& last() const { return history.back(); }

  /// True when more history points classify Person than NotPerson.
  bool mostly_person() const {
    int person = 0, other = 0;
    for (const auto& p : history) {
      if (p.cls == PersonClass::Person) ++person;
      else if (p.cls == PersonClass::NotPerson) ++other;
    }
    return person > other;
  }
};

/**
 * @brief One tracking step: greedy nearest-centroid association.
 *
 * Track/blob pairs are considered in ascending centroid distance, each
 * side used at most once, pairs beyond gate_px rejected. Matched tracks
 * extend their history; unmatched active tracks accumulate misses and are
 * lost after max_misses; every unmatched blob starts a new track. classes
 * must parallel blobs.
 */
inline void track_update(std::vector<Track>& tracks, std::span<const Blob> blobs,
                         std::span<const PersonClass> classes, int frame_idx,
                         double gate_px = 15.0, int max_misses = 5) {
  if (classes.size() != blobs.size())
    throw InvalidInputError("track_update: classes must parallel blobs");
  for (const auto& t : tracks)
    if (!t.history.empty() && t.history.back().frame >= frame_idx)
      throw InvalidInputError("track_update: frame index must exceed all track history");

  struct Candidate {
    double dist;
    int track;
    int blob;
  };
  std::vector<Candidate> candidates;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    if (tracks[ti].state != Track::State::Active) continue;
    const PixelCoord& last = tracks[ti].last().centroid;
    for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
      const double d = std::hypot(last.u - blobs[bi].centroid.u, last.v - blobs[bi].centroid.v);
      if (d <= gate_px) candidates.push_back({d, int(ti), int(bi)});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.track != b.track) return a.track < b.track;
    return a.blob < b.blob;
  });

  std::vector<std::uint8_t> track_used(tracks.size(), 0), blob_used(blobs.size(), 0);
  for (const auto& c : candidates) {
    if (track_used[c.track] || blob_used[c.blob]) continue;
    track_used[c.track] = blob_used[c.blob] = 1;
    Track& t = tracks[c.track];
    t.history.push_back({frame_idx, blobs[c.blob].centroid, blobs[c.blob].mean_temp_c,
                         classes[c.blob]});
    t.misses = 0;
  }

  int next_id = 0;
  for (const auto& t : tracks) next_id = std::max(next_id, t.id + 1);

  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    Track& t = tracks[ti];
    if (t.state != Track::State::Active || track_used[ti]) continue;
    if (++t.misses >= max_misses) t.state = Track::State::Lost;
  }
  for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
    if (blob_used[bi]) continue;
    Track t;
    t.id = next_id++;
    t.history.push_back({frame_idx, blobs[bi].centroid, blobs[bi].mean_temp_c, classes[bi]});
    tracks.push_back(std::move(t));
  }
}

}  // namespace rtfuse

#endif  // RTFUSE_DETECTION_HPP
