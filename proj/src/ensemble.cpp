#include "deepfeat/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace deepfeat::ensemble {

namespace {

/// Member positions sorted by id, after checking shapes.
std::vector<std::size_t> check(const VoteInput& v, bool need_scores) {
  if (v.members.empty()) throw std::invalid_argument("vote: no members");
  if (v.num_classes == 0) throw std::invalid_argument("vote: num_classes must be positive");
  if (!v.weights.empty() && v.weights.size() != v.members.size())
    throw std::invalid_argument("vote: " + std::to_string(v.weights.size()) + " weights for " +
                                std::to_string(v.members.size()) + " members");
  for (double w : v.weights)
    if (!(w > 0.0)) throw std::invalid_argument("vote: weights must be positive");
  const std::size_t n = v.members.front().labels.size();
  std::set<std::string> ids;
  for (const auto& m : v.members) {
    if (!ids.insert(m.id).second) throw std::invalid_argument("vote: duplicate member id '" + m.id + "'");
    if (m.labels.size() != n)
      throw std::invalid_argument("vote: member '" + m.id + "' has " + std::to_string(m.labels.size()) +
                                  " labels, expected " + std::to_string(n));
    for (int y : m.labels)
      if (y < 0 || static_cast<std::size_t>(y) >= v.num_classes)
        throw std::invalid_argument("vote: member '" + m.id + "' has a label outside [0, C)");
    if (need_scores && !m.scores) throw std::invalid_argument("vote: member '" + m.id + "' has no scores");
    if (m.scores && (m.scores->rows() != n || m.scores->cols() != v.num_classes))
      throw std::invalid_argument("vote: member '" + m.id + "' score matrix has the wrong shape");
  }
  std::vector<std::size_t> order(v.members.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v.members[a].id < v.members[b].id; });
  return order;
}

double weight_of(const VoteInput& v, std::size_t m) { return v.weights.empty() ? 1.0 : v.weights[m]; }

}  // namespace

std::vector<int> hard_vote(const VoteInput& v, TieBreak tie_break) {
  const auto order = check(v, false);
  if (tie_break == TieBreak::SummedScores)
    for (const auto& m : v.members)
      if (!m.scores) throw std::invalid_argument("vote: score tie-break needs scores from '" + m.id + "'");
  const std::size_t n = v.members.front().labels.size();
  const std::size_t C = v.num_classes;
  std::vector<int> out(n);
  std::vector<double> tally(C);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(tally.begin(), tally.end(), 0.0);
    for (auto m : order) tally[static_cast<std::size_t>(v.members[m].labels[i])] += weight_of(v, m);
    const double top = *std::max_element(tally.begin(), tally.end());
    std::size_t best = C;
    double best_score = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (tally[c] != top) continue;
      if (tie_break == TieBreak::LowestIndex) {
        best = c;
        break;
      }
      double s = 0.0;
      for (auto m : order) s += (*v.members[m].scores)(i, c);
      if (best == C || s > best_score) {
        best = c;
        best_score = s;
      }
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> soft_vote(const VoteInput& v) {
  const auto order = check(v, true);
  const std::size_t n = v.members.front().labels.size();
  const std::size_t C = v.num_classes;
  double wsum = 0.0;
  for (auto m : order) wsum += weight_of(v, m);
  std::vector<int> out(n);
  std::vector<double> mean(C);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (auto m : order) {
      const double w = weight_of(v, m);
      const auto row = v.members[m].scores->row(i);
      for (std::size_t c = 0; c < C; ++c) mean[c] += w * row[c];
    }
    std::size_t best = 0;
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] /= wsum;
      if (mean[c] > mean[best]) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace deepfeat::ensemble
