#include "gawm/replay.hpp"

#include "gawm/error.hpp"

namespace gawm {

void EpisodeTrajectory::validate() const {
  size_t L = actions.size();
  if (L == 0) throw InputError("trajectory: empty episode");
  if (observations.size() != L + 1 || rewards_raw.size() != L ||
      rewards_smoothed.size() != L || continuations.size() != L) {
    throw InputError("trajectory: mismatched field lengths");
  }
  for (size_t t = 0; t < L; ++t) {
    double c = continuations[t];
    if (c != 0.0 && c != 1.0) throw InputError("trajectory: continuation not in {0,1}");
    if (c == 0.0 && t + 1 != L) {
      throw InputError("trajectory: interior termination marker");
    }
  }
}

void RealBuffer::push(EpisodeTrajectory episode) {
  episode.validate();
  episodes_.push_back(std::move(episode));
  while (static_cast<int>(episodes_.size()) > capacity_) episodes_.pop_front();
}

std::vector<TrajectoryWindow> RealBuffer::sample_windows(int batch_size,
                                                         int window_len,
                                                         uint64_t seed) const {
  if (window_len < 1) throw InputError("sample_windows: window_len must be >= 1");
  if (episodes_.empty()) throw StateError("sample_windows: empty buffer");
  // valid start offsets per episode, uniform over (episode, offset) pairs
  std::vector<int64_t> cum;
  int64_t total = 0;
  for (const auto& ep : episodes_) {
    int valid = ep.length() - window_len + 1;
    total += std::max(0, valid);
    cum.push_back(total);
  }
  if (total == 0) throw StateError("sample_windows: no stored episode fits the window");
  Rng rng(seed);
  std::vector<TrajectoryWindow> out;
  out.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    int64_t pick = rng.uniform_int64(total);
    size_t e = 0;
    while (cum[e] <= pick) ++e;
    int offset = static_cast<int>(pick - (e == 0 ? 0 : cum[e - 1]));
    const EpisodeTrajectory& ep = episodes_[e];
    TrajectoryWindow w;
    w.episode_id = ep.episode_id;
    w.offset = offset;
    for (int t = 0; t <= window_len; ++t) {
      w.observations.push_back(ep.observations[offset + t]);
    }
    for (int t = 0; t < window_len; ++t) {
      w.actions.push_back(ep.actions[offset + t]);
      w.rewards_smoothed.push_back(ep.rewards_smoothed[offset + t]);
      w.rewards_raw.push_back(ep.rewards_raw[offset + t]);
      w.continuations.push_back(ep.continuations[offset + t]);
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::pair<const EpisodeTrajectory*, int> RealBuffer::sample_seed_state(Rng& rng) const {
  if (episodes_.empty()) throw StateError("sample_seed_state: empty buffer");
  int64_t total = 0;
  for (const auto& ep : episodes_) total += ep.length();
  int64_t pick = rng.uniform_int64(total);
  for (const auto& ep : episodes_) {
    if (pick < ep.length()) return {&ep, static_cast<int>(pick)};
    pick -= ep.length();
  }
  return {&episodes_.back(), episodes_.back().length() - 1};
}

void PseudoBuffer::push(PseudoSegment segment) {
  if (segment.actions.empty()) throw InputError("pseudo segment: empty");
  if (segment.observations.size() != segment.actions.size() + 1 ||
      segment.rewards.size() != segment.actions.size() ||
      segment.continuations.size() != segment.actions.size()) {
    throw InputError("pseudo segment: mismatched field lengths");
  }
  segments_.push_back(std::move(segment));
  while (static_cast<int>(segments_.size()) > capacity_) segments_.pop_front();
}

std::vector<PseudoSegment> PseudoBuffer::sample(int batch_size,
                                                uint64_t seed) const {
  if (segments_.empty()) throw StateError("pseudo sample: empty buffer");
  Rng rng(seed);
  std::vector<PseudoSegment> out;
  out.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    out.push_back(segments_[rng.uniform_int64(segments_.size())]);
  }
  return out;
}

}  // namespace gawm
